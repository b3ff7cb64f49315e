"""Experiment configuration: an INI file with a fixed set of sections.

Grammar (``#`` or ``;`` start comments)::

    [group]     dimension, generators (``1,0; -1,0; ...``), max_radius
    [model]     profile = geometric | powerlaw | table
                a, r | beta, s | values (comma separated, shells 1, 2, ...)
                coupling_beta (optional: treat the profile as J, p = 1 - exp(-beta J))
                p_max, tail_tol
    [boxes]     L0 and count, or sides = 100, 200, ...
    [run]       seed, trials, R, delta, tile_side, periodic_mode, samples,
                pattern_vertices, pattern_edges, freq_mode, freq_R,
                q_side, max_vertices
    [backend]   dense_cutoff, bisect_tol, multiplicity_tol, atom_tol

Every validation error names the file, line, section and key.
"""
from __future__ import annotations

import configparser
import hashlib
import re
from dataclasses import dataclass, field

from .geometry import FolnerBoxSequence, GeometryError, LatticeGroup
from .percolation import PercolationModel
from .profiles import Coupling, Geometric, PowerLaw, ProfileError, Table

SECTIONS = {
    "group": {"dimension", "generators", "max_radius"},
    "model": {"profile", "a", "r", "beta", "s", "values", "coupling_beta", "p_max", "tail_tol"},
    "boxes": {"l0", "count", "sides"},
    "run": {"seed", "trials", "r", "delta", "tile_side", "periodic_mode", "samples",
            "pattern_vertices", "pattern_edges", "freq_mode", "freq_r", "q_side", "max_vertices"},
    "backend": {"dense_cutoff", "bisect_tol", "multiplicity_tol", "atom_tol"},
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    text: str
    path: str
    group: LatticeGroup
    model: PercolationModel
    boxes: FolnerBoxSequence
    seed: int
    trials: int
    run: dict = field(default_factory=dict)
    backend: dict = field(default_factory=dict)

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.text.encode()).hexdigest()

    def spectral_kw(self) -> dict:
        return {k: self.backend[k] for k in ("dense_cutoff", "bisect_tol", "multiplicity_tol")}


def _line_index(text: str) -> dict:
    """(section, key) -> line number, for error messages."""
    out, section = {}, None
    for no, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip().lower()
            out[(section, None)] = no
            continue
        if section and s and s[0] not in "#;":
            key = re.split(r"[=:]", s, maxsplit=1)[0].strip().lower()
            out.setdefault((section, key), no)
    return out


class _Reader:
    def __init__(self, text: str, path: str):
        self.path = path
        self.lines = _line_index(text)
        cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            cp.read_string(text, source=path)
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        self.cp = cp
        for sec in cp.sections():
            if sec not in SECTIONS:
                self.fail(sec.lower(), None, f"unknown section [{sec}] (sections are lowercase)")
            for key in cp[sec]:
                if key not in SECTIONS[sec]:
                    self.fail(sec, key, "unknown key")

    def fail(self, section, key, msg):
        line = self.lines.get((section, key), self.lines.get((section, None)))
        where = f"{self.path}:{line}" if line else self.path
        label = f"[{section}] {key}" if key else f"[{section}]"
        raise ConfigError(f"{where}: {label}: {msg}")

    def has(self, section, key) -> bool:
        return self.cp.has_option(section, key)

    def raw(self, section, key, default=None):
        if self.has(section, key):
            return self.cp.get(section, key).strip()
        return default

    def get(self, section, key, conv, default=None, check=None, what="valid"):
        raw = self.raw(section, key)
        if raw is None:
            if default is None:
                self.fail(section, key, "missing required value")
            return default
        try:
            val = conv(raw)
        except (ValueError, TypeError):
            self.fail(section, key, f"cannot parse {raw!r} as {conv.__name__}")
        if check is not None and not check(val):
            self.fail(section, key, f"{raw!r} is not {what}")
        return val


def _int_list(raw: str) -> list[int]:
    return [int(v) for v in raw.replace(";", ",").split(",") if v.strip()]


def _float_list(raw: str) -> list[float]:
    return [float(v) for v in raw.split(",") if v.strip()]


def _vectors(raw: str) -> list[tuple[int, ...]]:
    return [tuple(int(c) for c in part.split(",")) for part in raw.split(";") if part.strip()]


def _seed(raw: str) -> int:
    v = int(raw, 0)
    if not 0 <= v < 1 << 64:
        raise ValueError
    return v


def _profile(rd: _Reader):
    kind = rd.get("model", "profile", str).lower()
    pos = lambda v: v > 0
    nonneg = lambda v: v >= 0
    if kind == "geometric":
        prof = Geometric(rd.get("model", "a", float, check=nonneg, what="nonnegative"),
                         rd.get("model", "r", float, check=lambda v: 0 <= v < 1, what="in [0, 1)"))
    elif kind == "powerlaw":
        prof = PowerLaw(rd.get("model", "beta", float, check=nonneg, what="nonnegative"),
                        rd.get("model", "s", float, check=pos, what="positive"))
    elif kind == "table":
        vals = rd.get("model", "values", _float_list, default=[]) if rd.has("model", "values") else []
        if any(v < 0 for v in vals):
            rd.fail("model", "values", "entries must be nonnegative")
        prof = Table(tuple(vals))
    else:
        rd.fail("model", "profile", f"unknown profile {kind!r} (geometric, powerlaw, table)")
    if rd.has("model", "coupling_beta"):
        prof = Coupling(prof, rd.get("model", "coupling_beta", float, check=pos, what="positive"))
    return prof


def load_config(path, seed: int | None = None, trials: int | None = None) -> ExperimentConfig:
    path = str(path)
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    return parse_config(text, path, seed, trials)


def parse_config(text: str, path: str = "<config>", seed: int | None = None,
                 trials: int | None = None) -> ExperimentConfig:
    rd = _Reader(text, path)
    for sec in ("group", "model", "boxes"):
        if not rd.cp.has_section(sec):
            raise ConfigError(f"{path}: missing section [{sec}]")
    d = rd.get("group", "dimension", int, check=lambda v: 1 <= v <= 4, what="in 1..4")
    gens = rd.get("group", "generators", _vectors, default=[]) or None
    max_radius = rd.get("group", "max_radius", int, default=64, check=lambda v: v >= 1, what="positive")
    try:
        group = LatticeGroup(d, gens, max_radius)
    except GeometryError as exc:
        rd.fail("group", "generators" if gens else "dimension", str(exc))
    prof = _profile(rd)
    p_max = rd.get("model", "p_max", float, default=1.0, check=lambda v: 0 < v <= 1, what="in (0, 1]")
    tail_tol = rd.get("model", "tail_tol", float, default=1e-8, check=lambda v: v > 0, what="positive")
    try:
        model = PercolationModel(group, prof, p_max, tail_tol)
    except (ProfileError, GeometryError) as exc:
        rd.fail("model", "profile", str(exc))
    if rd.has("boxes", "sides"):
        sides = rd.get("boxes", "sides", _int_list)
    else:
        L0 = rd.get("boxes", "l0", int, check=lambda v: v >= 1, what="positive")
        count = rd.get("boxes", "count", int, check=lambda v: v >= 1, what="positive")
        sides = [n * L0 for n in range(1, count + 1)]
    try:
        boxes = FolnerBoxSequence(group, sides)
    except ValueError as exc:
        rd.fail("boxes", "sides" if rd.has("boxes", "sides") else "l0", str(exc))
    if seed is None:
        seed = rd.get("run", "seed", _seed, default=0, what="a 64-bit unsigned integer") if rd.cp.has_section("run") else 0
    if trials is None:
        trials = rd.get("run", "trials", int, default=10_000, check=lambda v: v >= 1, what="positive") if rd.cp.has_section("run") else 10_000
    g = lambda key, conv, default, **kw: rd.get("run", key, conv, default=default, **kw) if rd.cp.has_section("run") else default
    run = {
        "R": g("r", int, -1, check=lambda v: v >= 0, what="nonnegative"),
        "delta": g("delta", float, -1.0, check=lambda v: v > 0, what="positive"),
        "tile_side": g("tile_side", int, 3, check=lambda v: v >= 1, what="positive"),
        "periodic_mode": g("periodic_mode", str, "exact", check=lambda v: v in ("exact", "monte_carlo"),
                           what="exact or monte_carlo"),
        "samples": g("samples", int, 10_000, check=lambda v: v >= 100, what="at least 100"),
        "pattern_vertices": g("pattern_vertices", _vectors, [(0,) * d]),
        "pattern_edges": g("pattern_edges", _edge_list, []),
        "freq_mode": g("freq_mode", str, "plain", check=lambda v: v in ("plain", "isolated"),
                       what="plain or isolated"),
        "freq_R": g("freq_r", int, 1, check=lambda v: v >= 0, what="nonnegative"),
        "q_side": g("q_side", int, 0, check=lambda v: v >= 1, what="positive"),
        "max_vertices": g("max_vertices", int, 5, check=lambda v: 1 <= v <= 7, what="in 1..7"),
    }
    if any(len(v) != d for v in run["pattern_vertices"]):
        rd.fail("run", "pattern_vertices", f"every vertex needs {d} coordinates")
    nv = len(run["pattern_vertices"])
    if any(not (0 <= a < nv and 0 <= b < nv and a != b) for a, b in run["pattern_edges"]):
        rd.fail("run", "pattern_edges", "edges must join two distinct listed vertices (0-based)")
    b = lambda key, conv, default, **kw: rd.get("backend", key, conv, default=default, **kw) if rd.cp.has_section("backend") else default
    backend = {
        "dense_cutoff": b("dense_cutoff", int, 2048, check=lambda v: v >= 0, what="nonnegative"),
        "bisect_tol": b("bisect_tol", float, 1e-10, check=lambda v: v > 0, what="positive"),
        "multiplicity_tol": b("multiplicity_tol", float, 1e-9, check=lambda v: v > 0, what="positive"),
        "atom_tol": b("atom_tol", float, -1.0, check=lambda v: v > 0, what="positive"),
    }
    return ExperimentConfig(text, path, group, model, boxes, int(seed), int(trials), run, backend)


def _edge_list(raw: str) -> list[tuple[int, int]]:
    out = []
    for part in raw.replace(";", ",").split(","):
        part = part.strip()
        if not part:
            continue
        a, b = part.split("-")
        out.append((int(a), int(b)))
    return out
