"""Matched-field indicator and multilevel sampling search for a point source.

The indicator of a trial source ``x`` is the reciprocal misfit

    I(x) = 1 / (sum_m |p^s(x^r_m; x) - p^s_m|^2 + eta),

normalized by its maximum over the current vertex set.  Starting from a
uniform grid of spacing ``s0`` over the sampling box, vertices with normalized
value ``>= c`` are kept, every cell touching a kept vertex is bisected into 8
children, and the indicator is evaluated at the new vertices.

Vertices are stored as integer triples in units of the finest spacing
``s0 / 2**(N - 1)`` so deduplication and caching are exact.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.optimize import linprog

from .waveguide import DomainError

logger = logging.getLogger(__name__)

FLOOR = 1e-30
_CORNERS = np.array(list(product((0, 1), repeat=3)), dtype=np.int64)


class BudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class SamplingRegion:
    """Sampling box ``D``, initial spacing ``s0``, cut-off ``c`` and level count ``N``.

    ``N`` counts indicator sweeps: level 0 at spacing ``s0`` and ``N - 1``
    bisections after it.
    """

    box: tuple
    s0: float
    cutoff: float = 0.95
    levels: int = 3
    budget: int = 20000

    def __post_init__(self):
        box = tuple((float(lo), float(hi)) for lo, hi in self.box)
        object.__setattr__(self, "box", box)
        if len(box) != 3:
            raise DomainError("sampling box needs three axes")
        if not self.s0 > 0:
            raise DomainError("s0 must be positive")
        if not 0 < self.cutoff <= 1:
            raise DomainError(f"cut-off must lie in (0, 1], got {self.cutoff}")
        if int(self.levels) != self.levels or self.levels < 1:
            raise DomainError("levels must be a positive integer")
        if self.budget < 1:
            raise DomainError("budget must be positive")
        for lo, hi in box:
            n = (hi - lo) / self.s0
            if hi <= lo or abs(n - round(n)) > 1e-9 * max(1.0, n):
                raise DomainError(f"side [{lo}, {hi}] is not a positive multiple of s0={self.s0}")

    @classmethod
    def trimmed(cls, box, s0, **kw):
        """Region whose upper bounds are cut back to ``lo + floor((hi - lo)/s0) * s0``.

        This is the grid ``lo:s0:hi`` when ``s0`` does not divide a side.
        """
        out = []
        for lo, hi in box:
            n = int(np.floor((hi - lo) / s0 + 1e-9))
            out.append((lo, lo + n * s0))
        return cls(tuple(out), s0, **kw)

    @property
    def unit(self) -> float:
        """Finest spacing; vertex keys are integer multiples of it."""
        return self.s0 / 2 ** (self.levels - 1)

    def spacing(self, level: int) -> int:
        """Grid spacing of ``level`` in units of :attr:`unit`."""
        return 2 ** (self.levels - 1 - level)

    def counts(self, level: int) -> tuple:
        """Cells per axis at ``level``."""
        return tuple(int(round((hi - lo) / self.s0)) * 2 ** level for lo, hi in self.box)

    def full_vertex_count(self, level=None) -> int:
        level = self.levels - 1 if level is None else level
        return int(np.prod([n + 1 for n in self.counts(level)]))

    def position(self, keys) -> np.ndarray:
        keys = np.asarray(keys, dtype=np.int64)
        lo = np.array([b[0] for b in self.box])
        return lo + keys * self.unit

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return all(lo <= c <= hi for c, (lo, hi) in zip(x, self.box))

    def to_dict(self):
        return dict(box=[list(b) for b in self.box], s0=self.s0, cutoff=self.cutoff,
                    levels=self.levels, budget=self.budget)


@dataclass
class LevelSet:
    """Vertices, indicator values and active cells of one sampling level."""

    level: int
    spacing: int
    vertices: np.ndarray
    raw: np.ndarray
    values: np.ndarray
    cells: np.ndarray
    evaluations: int

    def retained(self, cutoff) -> np.ndarray:
        return self.values >= cutoff


def indicator_normalize(values) -> np.ndarray:
    """Divide by the maximum so the largest value is exactly 1."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("no indicator values to normalize")
    m = v.max()
    if not np.isfinite(m) or m <= 0:
        raise ValueError("indicator values are all zero or non-finite (degenerate data)")
    return v / m


def misfit_indicator(synth, data) -> np.ndarray:
    """Raw indicator for synthesized receiver values ``synth`` of shape ``(M, m)``."""
    d = np.asarray(data, dtype=complex).reshape(-1, 1)
    if d.size == 0:
        raise ValueError("indicator needs at least one receiver")
    eta = FLOOR * float(np.sum(np.abs(d) ** 2))
    res = np.sum(np.abs(np.asarray(synth).reshape(d.shape[0], -1) - d) ** 2, axis=0)
    return 1.0 / (res + eta)


class Indicator:
    """Cached raw indicator over integer vertex keys of a :class:`SamplingRegion`.

    ``synthesize`` maps an ``(m, 3)`` block of trial sources to ``(M, m)``
    receiver values; a :class:`~stratwave.forward.ForwardModel` method fits.
    """

    def __init__(self, synthesize, data, region: SamplingRegion, chunk=256, workers=1):
        self.synthesize = synthesize
        self.data = np.asarray(getattr(data, "values", data), dtype=complex).ravel()
        if self.data.size == 0:
            raise ValueError("indicator needs at least one receiver")
        self.region = region
        self.chunk = int(chunk)
        self.workers = int(workers)
        self.cache: dict = {}
        self.evaluations = 0

    def missing(self, keys) -> np.ndarray:
        return np.array([k for k in map(tuple, keys) if k not in self.cache],
                        dtype=np.int64).reshape(-1, 3)

    def __call__(self, keys) -> np.ndarray:
        keys = np.asarray(keys, dtype=np.int64).reshape(-1, 3)
        new = self.missing(keys)
        if new.shape[0]:
            pts = self.region.position(new)
            blocks = [pts[i:i + self.chunk] for i in range(0, pts.shape[0], self.chunk)]
            if self.workers > 1 and len(blocks) > 1:
                with ThreadPoolExecutor(self.workers) as pool:
                    parts = list(pool.map(self._block, blocks))
            else:
                parts = [self._block(b) for b in blocks]
            vals = np.concatenate(parts)
            for k, v in zip(map(tuple, new), vals):
                self.cache[k] = float(v)
            self.evaluations += new.shape[0]
        return np.array([self.cache[k] for k in map(tuple, keys)])

    def _block(self, pts):
        return misfit_indicator(self.synthesize(pts), self.data)


def indicator_raw(x, data, model) -> float:
    """Raw indicator at one trial source ``x`` using ``model.synthesize``."""
    synth = model.synthesize(np.asarray(x, dtype=float))
    return float(misfit_indicator(synth, getattr(data, "values", data))[0])


def _cell_vertices(cells, spacing):
    v = (cells[:, None, :] + spacing * _CORNERS[None, :, :]).reshape(-1, 3)
    return np.unique(v, axis=0)


def initial_level(region: SamplingRegion, indicator: Indicator) -> LevelSet:
    s = region.spacing(0)
    n = region.counts(0)
    cells = np.array(list(product(*(range(0, k * s, s) for k in n))), dtype=np.int64)
    verts = _cell_vertices(cells, s)
    return _finish(0, s, verts, cells, indicator)


def _finish(level, s, verts, cells, indicator):
    before = indicator.evaluations
    raw = indicator(verts)
    return LevelSet(level=level, spacing=s, vertices=verts, raw=raw,
                    values=indicator_normalize(raw), cells=cells,
                    evaluations=indicator.evaluations - before)


def refine_cells(level: LevelSet, cutoff: float) -> np.ndarray:
    """Children (min corners) of every cell touching a vertex with value ``>= cutoff``."""
    keep = {tuple(v) for v in level.vertices[level.retained(cutoff)]}
    cells = level.cells
    corners = cells[:, None, :] + level.spacing * _CORNERS[None, :, :]
    active = np.array([any(tuple(c) in keep for c in cc) for cc in corners], dtype=bool)
    half = level.spacing // 2
    if half < 1:
        raise DomainError("cannot bisect below the finest spacing")
    act = cells[active]
    children = (act[:, None, :] + half * _CORNERS[None, :, :]).reshape(-1, 3)
    return np.unique(children, axis=0)


def select_and_refine(level: LevelSet, cutoff: float, indicator: Indicator,
                      budget: int | None = None) -> LevelSet:
    """Keep vertices at or above ``cutoff``, bisect their cells and re-evaluate."""
    children = refine_cells(level, cutoff)
    half = level.spacing // 2
    verts = _cell_vertices(children, half)
    if budget is not None:
        need = indicator.missing(verts).shape[0]
        if indicator.evaluations + need > budget:
            raise BudgetExceeded(
                f"level {level.level + 1} needs {need} new evaluations; "
                f"{indicator.evaluations} of {budget} already used")
    return _finish(level.level + 1, half, verts, children, indicator)


@dataclass
class LocateResult:
    """Output vertices of the multilevel search with counters."""

    region: SamplingRegion
    vertices: np.ndarray
    values: np.ndarray
    levels: list
    evaluations_per_level: list
    total_solves: int
    wall_time: float = 0.0
    partial: bool = False
    message: str = ""

    @property
    def best(self) -> np.ndarray:
        return self.vertices[int(np.argmax(self.values))]

    @property
    def final_cell_size(self) -> float:
        return self.levels[-1].spacing * self.region.unit

    def to_dict(self, include_time=False) -> dict:
        out = dict(
            region=self.region.to_dict(),
            partial=self.partial,
            message=self.message,
            total_solves=self.total_solves,
            evaluations_per_level=list(self.evaluations_per_level),
            output=[[*map(float, p), float(v)] for p, v in zip(self.vertices, self.values)],
            levels=[dict(level=L.level, spacing=L.spacing * self.region.unit,
                         n_cells=int(L.cells.shape[0]), evaluations=L.evaluations,
                         vertices=[[*map(float, p), float(v), float(r)] for p, v, r in
                                   zip(self.region.position(L.vertices), L.values, L.raw)])
                    for L in self.levels],
        )
        if include_time:
            out["wall_time"] = self.wall_time
        return out

    def to_text(self) -> str:
        """Structured text export (JSON); excludes wall time so reruns compare equal."""
        return json.dumps(self.to_dict(), indent=1) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["level", "x", "y", "z", "I"])
        for L in self.levels:
            for p, v in zip(self.region.position(L.vertices), L.values):
                w.writerow([L.level, repr(float(p[0])), repr(float(p[1])), repr(float(p[2])),
                            repr(float(v))])
        return buf.getvalue()


def multilevel_locate(region: SamplingRegion, data, model=None, synthesize=None,
                      workers=1) -> LocateResult:
    """Run the multilevel sampling search.

    Parameters
    ----------
    region : SamplingRegion
    data : ScatterRecord or array of measured receiver values
    model : ForwardModel, optional
        Supplies ``synthesize``; the kernel is shared by every evaluation.
    synthesize : callable, optional
        Overrides ``model.synthesize`` (``(m, 3) -> (M, m)``).
    workers : int
        Threads for independent indicator blocks within a level.
    """
    if synthesize is None:
        if model is None:
            raise ValueError("need a forward model or a synthesize callable")
        synthesize = model.synthesize
    t0 = time.perf_counter()
    ind = Indicator(synthesize, data, region, workers=workers)
    levels = []
    partial, msg = False, ""
    if region.full_vertex_count(0) > region.budget:
        raise BudgetExceeded(f"level 0 alone needs {region.full_vertex_count(0)} evaluations")
    levels.append(initial_level(region, ind))
    for _ in range(1, region.levels):
        try:
            levels.append(select_and_refine(levels[-1], region.cutoff, ind, region.budget))
        except BudgetExceeded as exc:
            partial, msg = True, str(exc)
            logger.warning("multilevel search stopped early: %s", exc)
            break
    last = levels[-1]
    keep = last.retained(region.cutoff)
    return LocateResult(
        region=region,
        vertices=region.position(last.vertices[keep]),
        values=last.values[keep],
        levels=levels,
        evaluations_per_level=[L.evaluations for L in levels],
        total_solves=ind.evaluations,
        wall_time=time.perf_counter() - t0,
        partial=partial,
        message=msg,
    )


def hull_distance(points, x) -> float:
    """Max-norm distance from ``x`` to the convex hull of ``points`` (linear program)."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    x = np.asarray(x, dtype=float)
    m, d = P.shape
    # variables: lambda (m), t; minimize t
    cost = np.zeros(m + 1)
    cost[-1] = 1.0
    A = np.zeros((2 * d, m + 1))
    A[:d, :m] = P.T
    A[d:, :m] = -P.T
    A[:, -1] = -1.0
    b = np.concatenate([x, -x])
    eq = np.zeros((1, m + 1))
    eq[0, :m] = 1.0
    res = linprog(cost, A_ub=A, b_ub=b, A_eq=eq, b_eq=[1.0],
                  bounds=[(0, None)] * m + [(0, None)], method="highs")
    if not res.success:
        raise RuntimeError(f"hull distance LP failed: {res.message}")
    return float(res.x[-1])


def inside_padded_hull(points, x, pad) -> bool:
    """True when ``x`` lies in the convex hull of ``points`` grown by a cube of half-width ``pad``."""
    return hull_distance(points, x) <= pad * (1 + 1e-12)
