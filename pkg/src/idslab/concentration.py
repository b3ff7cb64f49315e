"""Bernstein-type bounds for long-edge counts and their Monte Carlo validation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import as_vertex_set
from .percolation import (
    LongEdgeSampler,
    PercolationModel,
    epsilon_tail,
    moment_constants,
    r_zero,
    truncation_radius,
)


@dataclass(frozen=True)
class BernsteinParams:
    n: int
    tau: float
    alpha: float

    def __post_init__(self):
        if self.n < 1 or self.tau <= 0 or self.alpha < 0:
            raise ValueError("need n >= 1, tau > 0, alpha >= 0")


def bernstein_bound(p: BernsteinParams) -> float:
    """P(sum xi_i >= alpha) bound: exp(-alpha^2/4n) up to alpha = n/tau, exp(-alpha/4tau) beyond."""
    if p.alpha <= p.n / p.tau:
        return math.exp(-p.alpha ** 2 / (4.0 * p.n))
    return math.exp(-p.alpha / (4.0 * p.tau))


def omega1_bound(m: PercolationModel, Q_size: int, delta: float, tau: float | None = None) -> float:
    """Bound on P(too many long edges at Q) for |Q| = Q_size."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    if tau is None:
        tau = moment_constants(m)[1]
    if delta <= 1.0 / tau:
        return math.exp(-delta * delta * Q_size / 4.0)
    return math.exp(-delta * Q_size / (4.0 * tau))


def prob_no_long_edge(m: PercolationModel, R: int) -> float:
    """P(Y = 0) = prod over |y| > R of (1 - p(y)), lower-certified."""
    logsum, K = m.shell_sum(lambda p: np.log1p(-p), R)
    tail = m.tail_bound(K)
    # the missing factor lies in [exp(-2 tail), 1] once p <= 1/2
    return math.exp(logsum - (2.0 * tail if m.profile.sup_beyond(K) <= 0.5 else 0.0))


@dataclass
class TailReport:
    R: int
    trials: int
    c: float
    tau: float
    delta_rows: list[tuple] = field(default_factory=list)
    t_rows: list[tuple] = field(default_factory=list)
    p_zero: tuple | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def violations(self) -> int:
        bad = sum(1 for r in self.delta_rows if not r[4])
        bad += sum(1 for r in self.t_rows if not r[3])
        return bad

    def write_csv(self, delta_path, t_path) -> None:
        with open(delta_path, "w", newline="\n") as fh:
            fh.write("delta,empirical,bound,sigma,pass\n")
            for d, e, b, s, ok in self.delta_rows:
                fh.write(f"{d:.17g},{e:.17g},{b:.17g},{s:.17g},{int(ok)}\n")
        with open(t_path, "w", newline="\n") as fh:
            fh.write("t,empirical_tail,c_exp_bound,pass\n")
            for t, e, b, ok in self.t_rows:
                fh.write(f"{t},{e:.17g},{b:.17g},{int(ok)}\n")


def _sigma(q: float, trials: int) -> float:
    q = min(max(q, 0.0), 1.0)
    return math.sqrt(q * (1.0 - q) / trials)


def validate_tails(seed: int, m: PercolationModel, Q, R: int, delta_grid=None,
                   trials: int = 10_000, t_max: int = 8, R_max: int | None = None) -> TailReport:
    """Empirical P(Omega_1) and P(Y >= t) over independent seeds versus their bounds."""
    Q = as_vertex_set(Q, m.group.dimension)
    c, tau = moment_constants(m)
    if R_max is None:
        R_max = max(truncation_radius(m), R + 1)
    if delta_grid is None:
        delta_grid = [f / tau for f in (0.25, 0.5, 1.0, 2.0, 4.0)]
    report = TailReport(R, trials, c, tau)
    if R < r_zero(m):
        report.warnings.append(f"R={R} is below r_zero; the Omega_1 bound is not guaranteed")
    sampler = LongEdgeSampler(m, Q, R, R_max)
    y1, total = sampler.run(seed, trials)
    eps = epsilon_tail(m, R)
    for delta in delta_grid:
        bound = omega1_bound(m, len(Q), delta, tau)
        emp = float(np.mean(total >= len(Q) * (eps + delta)))
        sig = _sigma(bound, trials)
        if bound < 5.0 / trials:
            report.warnings.append(f"delta={delta:.4g}: bound {bound:.3g} below resolution 5/trials")
        report.delta_rows.append((float(delta), emp, bound, sig, emp <= bound + 3 * sig))
    for t in range(1, t_max + 1):
        bound = c * math.exp(-t)
        emp = float(np.mean(y1 >= t))
        ok = emp <= bound + 3 * _sigma(bound, trials)
        report.t_rows.append((t, emp, bound, ok))
    exact = prob_no_long_edge(m, R)
    emp0 = float(np.mean(y1 == 0))
    report.p_zero = (emp0, exact, abs(emp0 - exact) <= 3 * _sigma(exact, trials) + 1e-12)
    return report
