"""Command line runner: ``idslab <subcommand> --config FILE --out DIR [--seed S] [--trials N]``.

Exit status: 0 success, 1 configuration error, 2 capability error.
Outputs depend only on (config, seed, trials); ``IDSLAB_THREADS`` changes
the worker count but never the bytes written.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .concentration import validate_tails
from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .frequencies import all_graphs, analytic_frequency, count_occurrences, empirical_frequency
from .geometry import GeometryError, box
from .ids import (
    CapabilityError,
    detect_atoms,
    empirical_ids,
    enumerate_W,
    error_budget,
    periodic_approximation,
)
from .percolation import (
    TruncationError,
    long_edge_census,
    moment_constants,
    r_zero,
    sample_window,
    truncation_radius,
)
from .profiles import ProfileError
from .spectral import FiniteGraph, F_R, scale, sup_distance

COMMANDS = ("sample", "ids", "periodic", "freq", "bernstein", "atoms", "budget", "wset")


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _default_q_side(cfg: ExperimentConfig) -> int:
    if cfg.run["q_side"]:
        return cfg.run["q_side"]
    return max(1, int(round(100 ** (1.0 / cfg.group.dimension))))


def _R(cfg: ExperimentConfig, default: int) -> int:
    return cfg.run["R"] if cfg.run["R"] >= 0 else default


def cmd_sample(cfg, out: Path) -> dict:
    Q = cfg.boxes.box(len(cfg.boxes))
    w = sample_window(cfg.seed, cfg.model, Q, truncation_radius(cfg.model))
    w.to_csv(out / "edges.csv")
    return {"num_edges": w.num_edges, "truncation_radius": w.rmax, "bias_bound": w.bias_bound}


def cmd_ids(cfg, out: Path) -> dict:
    run = empirical_ids(cfg.seed, cfg.model, cfg.boxes, R=_R(cfg, 0), **cfg.spectral_kw())
    run.write(out)
    with open(out / "distances.csv", "w", newline="\n") as fh:
        fh.write("j,side,sup_distance\n")
        for j, (side, d) in enumerate(zip(run.sides[1:], run.distances), start=2):
            fh.write(f"{j},{side},{_fmt(d)}\n")
    return {"truncation_radius": run.rmax}


def cmd_periodic(cfg, out: Path) -> dict:
    tile = box(cfg.run["tile_side"], cfg.group.dimension)
    res = periodic_approximation(cfg.model, tile, cfg.run["periodic_mode"], R=_R(cfg, 0),
                                 samples=cfg.run["samples"], seed=cfg.seed, **cfg.spectral_kw())
    res.to_csv(out / "periodic.csv")
    return {"tile_size": len(tile), "mode": cfg.run["periodic_mode"]}


def _pattern(cfg) -> FiniteGraph:
    V = np.array(cfg.run["pattern_vertices"], dtype=np.int64)
    order = np.lexsort(V.T[::-1])
    rank = np.empty(len(V), dtype=np.int64)
    rank[order] = np.arange(len(V))
    E = np.array([(rank[a], rank[b]) for a, b in cfg.run["pattern_edges"]], dtype=np.int64).reshape(-1, 2)
    return FiniteGraph(V[order], E)


def cmd_freq(cfg, out: Path) -> dict:
    S = _pattern(cfg)
    mode = "plain" if cfg.run["freq_mode"] == "plain" else ("isolated", cfg.run["freq_R"])
    rep = empirical_frequency(cfg.seed, cfg.model, S, mode, cfg.boxes)
    rep.to_csv(out / "freq.csv")
    return {"passed": bool(rep.passed), "sigma": rep.sigma}


def cmd_bernstein(cfg, out: Path) -> dict:
    Q = box(_default_q_side(cfg), cfg.group.dimension)
    R = _R(cfg, r_zero(cfg.model))
    grid = [cfg.run["delta"]] if cfg.run["delta"] > 0 else None
    rep = validate_tails(cfg.seed, cfg.model, Q, R, grid, cfg.trials)
    rep.write_csv(out / "omega1.csv", out / "tails.csv")
    return {"R": R, "violations": rep.violations, "warnings": rep.warnings}


def cmd_atoms(cfg, out: Path) -> dict:
    run = empirical_ids(cfg.seed, cfg.model, cfg.boxes, R=0, **cfg.spectral_kw())
    W = enumerate_W(cfg.run["max_vertices"], cfg.backend["multiplicity_tol"])
    atom_tol = cfg.backend["atom_tol"] if cfg.backend["atom_tol"] > 0 else None
    rep = detect_atoms(run, W, atom_tol, cfg.backend["multiplicity_tol"])
    rep.to_csv(out / "atoms.csv")
    return {"atom_tol": rep.atom_tol, "unexplained": len(rep.unexplained)}


def cmd_budget(cfg, out: Path) -> dict:
    m, g = cfg.model, cfg.group
    R = _R(cfg, r_zero(m))
    tau = moment_constants(m)[1]
    delta = cfg.run["delta"] if cfg.run["delta"] > 0 else 1.0 / tau
    Qj = cfg.boxes.box(len(cfg.boxes))
    tile = box(cfg.run["tile_side"], g.dimension)
    w = sample_window(cfg.seed, m, Qj, max(truncation_radius(m), R + 1))
    census = long_edge_census(w, Qj, R, delta)
    F = scale(F_R(w, Qj, R, **cfg.spectral_kw()), 1.0 / len(Qj))
    mode = "exact" if len(tile) <= 4 else "monte_carlo"
    per = periodic_approximation(m, tile, mode, R=R, samples=cfg.run["samples"], seed=cfg.seed,
                                 **cfg.spectral_kw())
    observed = sup_distance(F, per.function)
    gaps = None
    if len(tile) <= 3:
        gaps = [count_occurrences(w, S, Qj) / len(Qj) - analytic_frequency(m, S)[0] for S in all_graphs(tile)]
    bud = error_budget(m, Qj, tile, R, delta, gaps)
    ok = census.omega1 or observed <= bud.value
    with open(out / "budget.csv", "w", newline="\n") as fh:
        fh.write("window_size,tile_size,R,delta,observed,budget,probability,omega1,pass\n")
        fh.write(f"{len(Qj)},{len(tile)},{R},{_fmt(delta)},{_fmt(observed)},{_fmt(bud.value)},"
                 f"{_fmt(bud.probability)},{int(census.omega1)},{int(ok)}\n")
    return {"terms": bud.terms, "flags": bud.flags}


def cmd_wset(cfg, out: Path) -> dict:
    W = enumerate_W(cfg.run["max_vertices"], cfg.backend["multiplicity_tol"])
    W.to_csv(out / "wset.csv")
    return {"count": len(W.values)}


HANDLERS = {
    "sample": cmd_sample, "ids": cmd_ids, "periodic": cmd_periodic, "freq": cmd_freq,
    "bernstein": cmd_bernstein, "atoms": cmd_atoms, "budget": cmd_budget, "wset": cmd_wset,
}


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _load(path: str, seed, trials) -> ExperimentConfig:
    text = Path(path).read_text() if Path(path).exists() else None
    if text is not None and text.lstrip().startswith("{"):
        try:
            man = json.loads(text)
            cfg_text = man["config_text"]
        except (ValueError, KeyError):
            raise ConfigError(f"{path}: not a valid run manifest") from None
        seed = man["seed"] if seed is None else seed
        trials = man["trials"] if trials is None else trials
        return parse_config(cfg_text, man.get("config_path", path), seed, trials)
    return load_config(path, seed, trials)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="idslab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"idslab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="INI config or a manifest.json from a previous run")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=lambda s: int(s, 0), default=None, help="override [run] seed")
        p.add_argument("--trials", type=int, default=None, help="override [run] trials")
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.seed is not None and not 0 <= args.seed < 1 << 64:
            raise ConfigError("--seed must be a 64-bit unsigned integer")
        if args.trials is not None and args.trials < 1:
            raise ConfigError("--trials must be positive")
        cfg = _load(args.config, args.seed, args.trials)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        extra = HANDLERS[args.command](cfg, out)
    except (CapabilityError, TruncationError) as exc:
        print(f"capability error: {exc}", file=sys.stderr)
        return 2
    except (GeometryError, ProfileError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    outputs = {p.name: _sha256(p) for p in sorted(out.iterdir())
               if p.is_file() and p.name != "manifest.json"}
    manifest = {
        "command": args.command,
        "config_path": cfg.path,
        "config_sha256": cfg.sha256,
        "config_text": cfg.text,
        "seed": cfg.seed,
        "trials": cfg.trials,
        "model": cfg.model.spec(),
        "tolerances": {**cfg.backend, "tail_tol": cfg.model.tail_tol},
        "version": __version__,
        "outputs": outputs,
        "details": extra,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=1, default=_json_default) + "\n")
    return 0


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
