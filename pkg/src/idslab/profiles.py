"""Radial edge-probability profiles f(k), k = word distance >= 1.

Every profile knows how to bound its own tail ``sum_{k>K} s_k f(k)`` where
``s_k`` is the size of the sphere of radius k, using only the crude growth bound
``|B_k| <= (2 g k + 1)^d``.  That is what lets the model certify epsilon(R) and
the moment constant without summing infinitely many shells.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

INF = float("inf")


class ProfileError(ValueError):
    pass


@dataclass(frozen=True)
class Growth:
    """Volume growth data of the group: |B_k| <= (2*gen_inf*k + 1)^dim."""

    gen_inf: int
    dim: int


@dataclass(frozen=True)
class Geometric:
    """f(k) = a * r**k."""

    a: float
    r: float

    def __post_init__(self):
        if self.a < 0 or not 0 <= self.r < 1:
            raise ProfileError("geometric profile needs a >= 0 and 0 <= r < 1")

    def __call__(self, k):
        return self.a * np.power(self.r, np.asarray(k, dtype=np.float64))

    def sup_beyond(self, K: int) -> float:
        return float(self.a * self.r ** (K + 1))

    def tail_bound(self, K: int, growth: Growth) -> float:
        if self.a == 0 or self.r == 0:
            return 0.0
        g, d = growth.gen_inf, growth.dim
        first = (2 * g * (K + 1) + 1) ** d * self.a * self.r ** (K + 1)
        rho = ((2 * g * (K + 2) + 1) / (2 * g * (K + 1) + 1)) ** d * self.r
        if rho >= 1:
            return INF
        return first / (1 - rho)

    def spec(self) -> dict:
        return {"profile": "geometric", "a": self.a, "r": self.r}


@dataclass(frozen=True)
class PowerLaw:
    """f(k) = beta * k**(-s), summable on Z^d only for s > d."""

    beta: float
    s: float

    def __post_init__(self):
        if self.beta < 0 or self.s <= 0:
            raise ProfileError("power-law profile needs beta >= 0 and s > 0")

    def __call__(self, k):
        k = np.asarray(k, dtype=np.float64)
        with np.errstate(divide="ignore"):
            return self.beta * np.power(k, -self.s)

    def sup_beyond(self, K: int) -> float:
        return float(self.beta * (K + 1) ** (-self.s))

    def tail_bound(self, K: int, growth: Growth) -> float:
        # Abel summation against |B_k| plus the integral test on k^(d-s-1).
        g, d = growth.gen_inf, growth.dim
        if self.beta == 0:
            return 0.0
        if self.s <= d:
            return INF
        K = max(K, 1)
        c = (2 * g + 1.0 / (K + 1)) ** d
        return self.beta * self.s * c * K ** (d - self.s) / (self.s - d)

    def spec(self) -> dict:
        return {"profile": "powerlaw", "beta": self.beta, "s": self.s}


@dataclass(frozen=True)
class Table:
    """Explicit values f(1), ..., f(n); zero beyond."""

    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if any(v < 0 or not math.isfinite(v) for v in self.values):
            raise ProfileError("table values must be finite and nonnegative")

    def __call__(self, k):
        k = np.asarray(k, dtype=np.int64)
        vals = np.asarray((0.0,) + self.values)
        out = np.zeros(k.shape, dtype=np.float64)
        ok = (k >= 1) & (k <= len(self.values))
        out[ok] = vals[k[ok]]
        return out

    @property
    def support_radius(self) -> int:
        nz = [i + 1 for i, v in enumerate(self.values) if v > 0]
        return max(nz) if nz else 0

    def sup_beyond(self, K: int) -> float:
        rest = self.values[K:]
        return max(rest) if rest else 0.0

    def tail_bound(self, K: int, growth: Growth) -> float:
        return 0.0 if K >= self.support_radius else INF

    def spec(self) -> dict:
        return {"profile": "table", "values": list(self.values)}


@dataclass(frozen=True)
class Coupling:
    """p(k) = 1 - exp(-beta * J(k)) for a nonnegative coupling profile J."""

    J: object
    beta: float

    def __post_init__(self):
        if self.beta <= 0:
            raise ProfileError("beta must be positive")

    def __call__(self, k):
        return -np.expm1(-self.beta * self.J(k))

    def sup_beyond(self, K: int) -> float:
        return min(1.0, self.beta * self.J.sup_beyond(K))

    def tail_bound(self, K: int, growth: Growth) -> float:
        # 1 - e^{-s} <= s
        return self.beta * self.J.tail_bound(K, growth)

    def spec(self) -> dict:
        return {"profile": "coupling", "beta": self.beta, "J": self.J.spec()}


@dataclass(frozen=True)
class InverseCoupling:
    """J(k) = -log(1 - p(k)) / beta; the coupling that produces profile p."""

    p: object
    beta: float

    def __post_init__(self):
        if self.beta <= 0:
            raise ProfileError("beta must be positive")

    def __call__(self, k):
        pk = self.p(k)
        if np.any(pk >= 1):
            raise ProfileError("p = 1 corresponds to an infinite coupling")
        return -np.log1p(-pk) / self.beta

    def sup_beyond(self, K: int) -> float:
        s = self.p.sup_beyond(K)
        return INF if s >= 1 else -math.log1p(-s) / self.beta

    def tail_bound(self, K: int, growth: Growth) -> float:
        # -log(1 - z) <= 2 z on [0, 1/2]
        if self.p.sup_beyond(K) > 0.5:
            return INF
        return 2.0 * self.p.tail_bound(K, growth) / self.beta

    def spec(self) -> dict:
        return {"profile": "inverse_coupling", "beta": self.beta, "p": self.p.spec()}


def profile_from_spec(spec: dict):
    kind = spec["profile"]
    if kind == "geometric":
        return Geometric(float(spec["a"]), float(spec["r"]))
    if kind == "powerlaw":
        return PowerLaw(float(spec["beta"]), float(spec["s"]))
    if kind == "table":
        return Table(tuple(spec["values"]))
    if kind == "coupling":
        return Coupling(profile_from_spec(spec["J"]), float(spec["beta"]))
    if kind == "inverse_coupling":
        return InverseCoupling(profile_from_spec(spec["p"]), float(spec["beta"]))
    raise ProfileError(f"unknown profile {kind!r}")
