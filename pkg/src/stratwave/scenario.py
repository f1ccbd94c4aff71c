"""Scenario configuration, presets and run orchestration.

A scenario file is INI-style::

    [waveguide]
    h = 100
    d1 = 100/3
    ...
    [inclusion]
    box = 32 34, 32 34, 42 44
    q4_ratio = 1.1
    [source]
    position = 18, 18, 25
    [receivers]
    start = 60, 60, 30
    step = 0, 5, 0
    count = 5
    [noise]
    delta = 0.1
    seed = 0
    [forward]
    cell = 1/3
    eps = 1e-3
    max_iter = 200
    tol_modes = 1e-6
    [locator]
    box = 10 40, 10 40, 10 40
    s0 = 4
    cutoff = 0.95
    levels = 3
    budget = 20000
    trim = yes

Numbers accept fractions such as ``100/3``.  Receivers may instead be given as
``points = x y z; x y z; ...``.  Errors carry the line number of the offending
entry.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import logging
import os
import shutil
import tempfile
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .forward import ForwardModel, ReceiverSet, VolumeMesh, add_noise, assemble_kernel
from .locator import LocateResult, SamplingRegion, multilevel_locate
from .modes import ModalBasis, find_modes
from .records import record_to_csv, record_to_text
from .waveguide import DomainError, InclusionSpec, WaveguideConfig

logger = logging.getLogger(__name__)

FULL_CELL = 1 / 15
DESK_CELL = 1 / 3


class ConfigError(ValueError):
    """Invalid scenario file; ``line`` is 1-based when known."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None or line is not None:
            where = f"{path or '<config>'}:{line if line is not None else '?'}: "
        super().__init__(where + message)


def parse_number(text: str) -> float:
    text = text.strip()
    try:
        return float(text)
    except ValueError:
        return float(Fraction(text.replace(" ", "")))


def parse_vector(text: str, n=3) -> tuple:
    parts = [p for p in text.replace(",", " ").split() if p]
    if len(parts) != n:
        raise ValueError(f"expected {n} numbers, got {len(parts)}")
    return tuple(parse_number(p) for p in parts)


def parse_box(text: str) -> tuple:
    axes = [a for a in text.split(",") if a.strip()]
    if len(axes) != 3:
        raise ValueError("a box needs three 'lo hi' pairs separated by commas")
    out = []
    for a in axes:
        lo, hi = parse_vector(a, 2)
        out.append((lo, hi))
    return tuple(out)


def _fmt(x) -> str:
    return repr(float(x))


def _fmt_box(box) -> str:
    return ", ".join(f"{_fmt(lo)} {_fmt(hi)}" for lo, hi in box)


@dataclass
class Scenario:
    """Everything needed to synthesize data and run the locator."""

    waveguide: WaveguideConfig = field(default_factory=WaveguideConfig)
    inclusion_box: tuple = ((32.0, 34.0), (32.0, 34.0), (42.0, 44.0))
    q4_ratio: float = 1.1
    source: tuple = (18.0, 18.0, 25.0)
    receivers: tuple = ()
    noise: float = 0.1
    seed: int = 0
    cell: float = DESK_CELL
    eps: float = 1e-3
    max_iter: int = 200
    tol_modes: float = 1e-6
    storage: str = "auto"
    region_box: tuple = ((10.0, 40.0),) * 3
    s0: float = 4.0
    cutoff: float = 0.95
    levels: int = 3
    budget: int = 20000
    trim: bool = True
    name: str = "custom"

    def __post_init__(self):
        self.receivers = tuple(tuple(float(c) for c in p) for p in self.receivers)
        self.source = tuple(float(c) for c in self.source)

    # ---- derived objects
    def inclusion(self) -> InclusionSpec:
        return InclusionSpec.with_relative_contrast(self.waveguide, self.inclusion_box, self.q4_ratio)

    def receiver_set(self) -> ReceiverSet:
        return ReceiverSet(np.array(self.receivers, dtype=float).reshape(-1, 3))

    def region(self) -> SamplingRegion:
        kw = dict(cutoff=self.cutoff, levels=self.levels, budget=self.budget)
        if self.trim:
            return SamplingRegion.trimmed(self.region_box, self.s0, **kw)
        return SamplingRegion(self.region_box, self.s0, **kw)

    def validate(self, locating=False):
        cfg = self.waveguide
        inc = self.inclusion()
        inc.validate(cfg)
        for lo, hi in inc.box:
            n = (hi - lo) / self.cell
            if abs(n - round(n)) > 1e-9 * max(1.0, n) or round(n) < 1:
                raise DomainError(f"inclusion side {hi - lo} is not a multiple of cell={self.cell}")
        if not self.receivers:
            raise DomainError("no receivers")
        rs = self.receiver_set()
        cfg.layer_of(rs.positions[:, 2])
        if np.any(inc.contains(rs.positions)):
            raise DomainError("receiver inside the inclusion box")
        cfg.layer_of(np.array([self.source[2]]))
        if inc.contains(np.array(self.source)):
            raise DomainError("source inside the inclusion box")
        reg = self.region()
        for lo, hi in (reg.box[2],):
            if lo < 0 or hi > cfg.h:
                raise DomainError("sampling region leaves the waveguide")
        if locating and not reg.contains(self.source):
            raise DomainError(f"source {self.source} lies outside the sampling region {reg.box}")
        if self.noise < 0:
            raise DomainError("noise level must be non-negative")
        if self.eps <= 0 or self.max_iter < 1:
            raise DomainError("eps must be positive and max_iter at least 1")
        if not 0 < self.tol_modes <= 1:
            raise DomainError("tol_modes must lie in (0, 1]")
        return self

    def full_scale(self) -> "Scenario":
        return dataclasses.replace(self, cell=FULL_CELL, tol_modes=1e-8)

    # ---- serialization
    def to_ini(self) -> str:
        cfg = self.waveguide
        lines = [f"# scenario {self.name}", "[waveguide]"]
        for k, v in cfg.to_dict().items():
            lines.append(f"{k} = {_fmt(v)}")
        lines += ["", "[inclusion]", f"box = {_fmt_box(self.inclusion_box)}",
                  f"q4_ratio = {_fmt(self.q4_ratio)}",
                  "", "[source]", "position = " + ", ".join(map(_fmt, self.source)),
                  "", "[receivers]",
                  "points = " + "; ".join(" ".join(map(_fmt, p)) for p in self.receivers),
                  "", "[noise]", f"delta = {_fmt(self.noise)}", f"seed = {int(self.seed)}",
                  "", "[forward]", f"cell = {_fmt(self.cell)}", f"eps = {_fmt(self.eps)}",
                  f"max_iter = {int(self.max_iter)}", f"tol_modes = {_fmt(self.tol_modes)}",
                  f"storage = {self.storage}",
                  "", "[locator]", f"box = {_fmt_box(self.region_box)}", f"s0 = {_fmt(self.s0)}",
                  f"cutoff = {_fmt(self.cutoff)}", f"levels = {int(self.levels)}",
                  f"budget = {int(self.budget)}", f"trim = {'yes' if self.trim else 'no'}",
                  "", "[meta]", f"name = {self.name}", ""]
        return "\n".join(lines)

    def digest(self) -> str:
        return hashlib.sha256(self.to_ini().encode()).hexdigest()[:16]


# --------------------------------------------------------------------------
# config parsing

_KNOWN = {
    "waveguide": set(WaveguideConfig().to_dict()),
    "inclusion": {"box", "q4_ratio", "q4"},
    "source": {"position"},
    "receivers": {"start", "step", "count", "points"},
    "noise": {"delta", "seed"},
    "forward": {"cell", "eps", "max_iter", "tol_modes", "storage"},
    "locator": {"box", "s0", "cutoff", "levels", "budget", "trim"},
    "meta": {"name"},
    "run": None,
}


def _line_index(text: str) -> dict:
    """Map ``(section, key)`` and ``(section, None)`` to 1-based line numbers."""
    index = {}
    section = None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            index[(section, None)] = no
        elif section is not None:
            for sep in ("=", ":"):
                if sep in line:
                    index[(section, line.split(sep, 1)[0].strip().lower())] = no
                    break
    return index


def load_scenario(text: str, path=None) -> Scenario:
    """Parse scenario INI text; raises :class:`ConfigError` with a line number."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    try:
        parser.read_string(text, source=str(path or "<config>"))
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("entry before any [section] header", exc.lineno, path) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", exc.lineno, path) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.option!r} in [{exc.section}]", exc.lineno, path) from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigError("malformed line " + (exc.errors[0][1] if exc.errors else ""), line, path) from None
    idx = _line_index(text)

    for sec in parser.sections():
        if sec not in _KNOWN:
            raise ConfigError(f"unknown section [{sec}]", idx.get((sec, None)), path)
        allowed = _KNOWN[sec]
        if allowed is None:
            continue
        for key in parser[sec]:
            if key not in allowed:
                raise ConfigError(f"unknown key {key!r} in [{sec}]", idx.get((sec, key)), path)

    def get(sec, key, conv, default=None, required=False):
        if parser.has_option(sec, key):
            raw = parser.get(sec, key)
            try:
                return conv(raw)
            except (ValueError, ZeroDivisionError, DomainError) as exc:
                raise ConfigError(f"[{sec}] {key}: {exc}", idx.get((sec, key)), path) from None
        if required:
            raise ConfigError(f"missing [{sec}] {key}", idx.get((sec, None)), path)
        return default

    def as_int(s):
        v = parse_number(s)
        if v != int(v):
            raise ValueError(f"{s!r} is not an integer")
        return int(v)

    def as_count(s):
        v = as_int(s)
        if v < 1:
            raise ValueError(f"{s.strip()!r} must be at least 1")
        return v

    def as_bool(s):
        v = s.strip().lower()
        if v in ("1", "yes", "true", "on"):
            return True
        if v in ("0", "no", "false", "off"):
            return False
        raise ValueError(f"{s!r} is not a boolean")

    kw = {}
    wg_vals = {}
    for key in WaveguideConfig().to_dict():
        v = get("waveguide", key, parse_number)
        if v is not None:
            wg_vals[key] = v
    try:
        kw["waveguide"] = WaveguideConfig(**wg_vals)
    except DomainError as exc:
        raise ConfigError(str(exc), idx.get(("waveguide", None)), path) from None

    box = get("inclusion", "box", parse_box)
    if box is not None:
        kw["inclusion_box"] = box
    ratio = get("inclusion", "q4_ratio", parse_number)
    q4 = get("inclusion", "q4", parse_number)
    if ratio is not None and q4 is not None:
        raise ConfigError("give q4 or q4_ratio, not both", idx.get(("inclusion", "q4")), path)
    if q4 is not None:
        ratio = q4 / kw["waveguide"].q[1]
    if ratio is not None:
        kw["q4_ratio"] = ratio

    src = get("source", "position", parse_vector)
    if src is not None:
        kw["source"] = src

    pts = get("receivers", "points",
              lambda s: tuple(parse_vector(p) for p in s.split(";") if p.strip()))
    start = get("receivers", "start", parse_vector)
    if pts is not None and start is not None:
        raise ConfigError("give either points or start/step/count", idx.get(("receivers", "start")), path)
    if start is not None:
        step = get("receivers", "step", parse_vector, required=True)
        count = get("receivers", "count", as_count, required=True)
        kw["receivers"] = tuple(map(tuple, ReceiverSet.line(start, step, count).positions))
    elif pts is not None:
        kw["receivers"] = pts
    else:
        raise ConfigError("no receivers given", idx.get(("receivers", None)), path)

    def ranged(conv, ok, what):
        def f(s):
            v = conv(s)
            if not ok(v):
                raise ValueError(f"{s.strip()!r} {what}")
            return v
        return f

    positive = ranged(parse_number, lambda v: v > 0, "must be positive")
    unit = ranged(parse_number, lambda v: 0 < v <= 1, "must lie in (0, 1]")
    storage = ranged(str.strip, lambda v: v in ("auto", "dense", "fft"),
                     "must be auto, dense or fft")
    for sec, key, name, conv in (
        ("noise", "delta", "noise", ranged(parse_number, lambda v: v >= 0, "must be non-negative")),
        ("noise", "seed", "seed", ranged(as_int, lambda v: v >= 0, "must be non-negative")),
        ("forward", "cell", "cell", positive), ("forward", "eps", "eps", positive),
        ("forward", "max_iter", "max_iter", as_count), ("forward", "tol_modes", "tol_modes", unit),
        ("forward", "storage", "storage", storage),
        ("locator", "box", "region_box", parse_box), ("locator", "s0", "s0", positive),
        ("locator", "cutoff", "cutoff", unit), ("locator", "levels", "levels", as_count),
        ("locator", "budget", "budget", as_count), ("locator", "trim", "trim", as_bool),
        ("meta", "name", "name", str.strip),
    ):
        v = get(sec, key, conv)
        if v is not None:
            kw[name] = v
    sc = Scenario(**kw)
    try:
        sc.validate()
    except (DomainError, ValueError) as exc:
        raise ConfigError(str(exc), None, path) from None
    return sc


def load_scenario_file(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, path) from None
    return load_scenario(text, path)


# --------------------------------------------------------------------------
# presets

def _line(x, y0, z):
    return tuple((x, y0 + 5.0 * n, z) for n in range(5))


PRESETS = {
    "example1": dict(receivers=_line(10.0, 10.0, 90.0)),
    "example1-r11": dict(receivers=_line(70.0, 10.0, 90.0)),
    "example2": dict(receivers=_line(60.0, 60.0, 40.0)),
    "example2-r21": dict(receivers=_line(60.0, 60.0, 60.0)),
    "example3": dict(receivers=_line(60.0, 60.0, 30.0)),
    "example4": dict(receivers=_line(60.0, 60.0, 80.0), source=(18.0, 18.0, 45.0),
                     inclusion_box=((46.0, 48.0), (32.0, 34.0), (42.0, 44.0)),
                     region_box=((10.0, 40.0), (10.0, 40.0), (25.0, 55.0))),
    "example4-r41": dict(receivers=_line(60.0, 60.0, 90.0), source=(18.0, 18.0, 45.0),
                         inclusion_box=((46.0, 48.0), (32.0, 34.0), (42.0, 44.0)),
                         region_box=((10.0, 40.0), (10.0, 40.0), (25.0, 55.0))),
    # point source for the vertical field slice; receivers only satisfy validation
    "point-source": dict(source=(0.0, 0.0, 50.0), receivers=_line(60.0, 60.0, 30.0)),
}


def preset(name: str, full_scale=False) -> Scenario:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}")
    sc = Scenario(name=name, **PRESETS[name])
    return (sc.full_scale() if full_scale else sc).validate()


# --------------------------------------------------------------------------
# orchestration

def build_basis(sc: Scenario) -> ModalBasis:
    return find_modes(sc.waveguide, r_min=0.5 * sc.cell, tol_modes=sc.tol_modes)


def build_model(sc: Scenario, basis: ModalBasis | None = None) -> ForwardModel:
    basis = basis or build_basis(sc)
    mesh = VolumeMesh.build(sc.waveguide, sc.inclusion(), sc.cell)
    kernel = assemble_kernel(basis, mesh, storage=sc.storage)
    return ForwardModel(kernel, sc.receiver_set(), eps=sc.eps, max_iter=sc.max_iter)


@dataclass
class RunOutput:
    scenario: Scenario
    data: object
    result: LocateResult
    files: dict


def run_scenario(sc: Scenario, out_dir=None, workers=1) -> RunOutput:
    """Synthesize noisy data for the true source, locate it, and write result files.

    Files are produced in a scratch directory next to ``out_dir`` and moved into
    place only after every step succeeded.
    """
    sc.validate(locating=True)
    t0 = time.perf_counter()
    model = build_model(sc)
    clean = model.record(np.array(sc.source))
    data = add_noise(clean, sc.noise, sc.seed)
    result = multilevel_locate(sc.region(), data, model, workers=workers)
    logger.info("%s: %d forward solves in %.2f s", sc.name, result.total_solves,
                time.perf_counter() - t0)
    texts = {
        "data.csv": record_to_csv(data),
        "data.json": record_to_text(data),
        "locate.json": result.to_text(),
        "levels.csv": result.to_csv(),
    }
    texts["manifest.ini"] = manifest_text(sc, model.basis, result, texts)
    files = {}
    if out_dir is not None:
        files = write_atomic(out_dir, texts)
    return RunOutput(sc, data, result, files)


def manifest_text(sc: Scenario, basis: ModalBasis, result: LocateResult, texts: dict) -> str:
    """Scenario INI plus a ``[run]`` section; loadable as a config for reruns."""
    import scipy

    run = ["[run]", f"stratwave = {__version__}", f"numpy = {np.__version__}",
           f"scipy = {scipy.__version__}", f"scenario_digest = {sc.digest()}",
           f"waveguide_digest = {sc.waveguide.digest()}",
           f"modes = {len(basis)}", f"propagating = {basis.n_propagating}",
           f"total_solves = {result.total_solves}",
           "evaluations_per_level = " + " ".join(map(str, result.evaluations_per_level)),
           f"partial = {'yes' if result.partial else 'no'}"]
    for name in sorted(texts):
        run.append(f"sha256_{name.replace('.', '_')} = {hashlib.sha256(texts[name].encode()).hexdigest()}")
    return sc.to_ini() + "\n" + "\n".join(run) + "\n"


def write_atomic(out_dir, texts: dict) -> dict:
    out_dir = Path(out_dir)
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=".stratwave-", dir=out_dir.parent))
    try:
        for name, text in texts.items():
            (tmp / name).write_text(text)
        out_dir.mkdir(parents=True, exist_ok=True)
        files = {}
        for name in texts:
            os.replace(tmp / name, out_dir / name)
            files[name] = out_dir / name
        return files
    finally:
        shutil.rmtree(tmp, ignore_errors=True)
