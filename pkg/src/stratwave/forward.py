"""Volume integral equation for a known inclusion and synthetic receiver data.

With equal densities inside and outside the inclusion the total field solves

    p(x) = G(x; xs) - int_Omega G(y; x) qt(y) p(y) dy,    x in Omega,

which is discretized by the midpoint rule on a uniform cell grid and solved by
the fixed-point (Born) iteration ``p <- G - K p``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .green import _masked_hankel, green_pairs, series_from_profiles
from .modes import ModalBasis
from .waveguide import DomainError, InclusionSpec, WaveguideConfig, contrast_q_tilde

logger = logging.getLogger(__name__)

DEFAULT_MAX_BYTES = 2 * 1024 ** 3


class DivergenceError(ArithmeticError):
    """The fixed-point iteration is not contracting."""


class KernelSizeError(MemoryError):
    pass


@dataclass(frozen=True)
class VolumeMesh:
    """Uniform cells of side ``delta`` tiling the inclusion box (x fastest)."""

    box: tuple
    delta: float
    shape: tuple
    centers: np.ndarray
    q_tilde: np.ndarray
    layer: int

    @classmethod
    def build(cls, cfg: WaveguideConfig, inc: InclusionSpec, delta: float) -> "VolumeMesh":
        layer = inc.validate(cfg)
        counts = []
        axes = []
        for lo, hi in inc.box:
            n = (hi - lo) / delta
            if abs(n - round(n)) > 1e-9 * max(1.0, n) or round(n) < 1:
                raise DomainError(f"box side {hi - lo} is not a multiple of delta={delta}")
            n = int(round(n))
            counts.append(n)
            axes.append(lo + delta * (np.arange(n) + 0.5))
        zz, yy, xx = np.meshgrid(axes[2], axes[1], axes[0], indexing="ij")
        centers = np.stack([xx.ravel(), yy.ravel(), zz.ravel()], axis=1)
        qt = np.asarray(contrast_q_tilde(cfg, inc, centers), dtype=float)
        return cls(box=inc.box, delta=float(delta), shape=tuple(counts), centers=centers,
                   q_tilde=qt, layer=layer)

    @property
    def n_cells(self) -> int:
        return int(self.centers.shape[0])

    @property
    def volume(self) -> float:
        return self.delta ** 3

    def contains(self, x, closed=True):
        x = np.asarray(x, dtype=float)
        inside = np.ones(x.shape[:-1], dtype=bool)
        for axis, (lo, hi) in enumerate(self.box):
            c = x[..., axis]
            inside &= (c >= lo) & (c <= hi) if closed else (c > lo) & (c < hi)
        return inside


@dataclass
class InteractionKernel:
    """Discrete integral operator ``(K p)_c = sum_c' G(c'; c) qt(c') p(c') delta^3``.

    ``storage='dense'`` keeps the full matrix.  ``storage='fft'`` keeps, for
    every pair of cell depths, the horizontal offset table and applies it as a
    zero-padded 2-D convolution; it is the only option on the finest (1/15) meshes.
    The self-cell column (zero horizontal offset) uses the effective radius
    ``r_eff`` in the Hankel factor.
    """

    basis: ModalBasis
    mesh: VolumeMesh
    r_eff: float
    storage: str
    matrix: np.ndarray | None = None
    depth_profiles: np.ndarray | None = None
    distances: np.ndarray | None = None
    _fft: np.ndarray | None = field(default=None, repr=False)
    _fft_shape: tuple | None = field(default=None, repr=False)

    @property
    def cfg(self):
        return self.basis.cfg

    @property
    def is_zero(self) -> bool:
        return not np.any(self.mesh.q_tilde)

    def apply(self, p: np.ndarray) -> np.ndarray:
        """``K @ p`` for a vector or an ``(n_cells, m)`` block."""
        if self.storage == "dense":
            return self.matrix @ p
        return self._apply_fft(p)

    def _apply_fft(self, p):
        nx, ny, nz = self.mesh.shape
        vec = p.ndim == 1
        P = p.reshape(nz, ny, nx, -1) * (self.mesh.q_tilde.reshape(nz, ny, nx, 1) * self.mesh.volume)
        fy, fx = self._fft_shape
        Pf = np.fft.fft2(P, s=(fy, fx), axes=(1, 2))           # (nz, fy, fx, m)
        out_f = np.einsum("abyx,byxm->ayxm", self._fft, Pf, optimize=True)
        out = np.fft.ifft2(out_f, axes=(1, 2))[:, :ny, :nx, :]
        out = out.reshape(nz * ny * nx, -1)
        return out[:, 0] if vec else out

    def to_dense(self) -> np.ndarray:
        if self.storage == "dense":
            return self.matrix
        eye = np.eye(self.mesh.n_cells, dtype=complex)
        return self._apply_fft(eye)


def assemble_kernel(basis: ModalBasis, mesh: VolumeMesh, r_eff=None, storage="auto",
                    max_bytes=DEFAULT_MAX_BYTES) -> InteractionKernel:
    """Mode-factored assembly of the interaction kernel on ``mesh``.

    The modal sum is tabulated once per (depth, depth, horizontal distance)
    triple; the cost is ``O(n_modes * (n_depths + n_distances))`` before the
    outer product over depth pairs.
    """
    r_eff = 0.5 * mesh.delta if r_eff is None else float(r_eff)
    if basis.r_min > r_eff * (1 + 1e-12):
        raise DomainError(f"basis r_min={basis.r_min} exceeds the self-cell radius {r_eff}")
    n = mesh.n_cells
    dense_bytes = 16 * n * n
    if storage == "auto":
        storage = "dense" if dense_bytes <= max_bytes else "fft"
    if storage == "dense" and dense_bytes > max_bytes:
        raise KernelSizeError(
            f"dense kernel for {n} cells needs {dense_bytes / 2**30:.1f} GiB "
            f"(limit {max_bytes / 2**30:.1f} GiB); use storage='fft'")
    if storage not in ("dense", "fft"):
        raise ValueError(f"unknown storage {storage!r}")

    nx, ny, nz = mesh.shape
    d = mesh.delta
    zc = mesh.centers[:: nx * ny, 2]
    # distinct horizontal distances in units of delta (integer squared norms)
    sq = np.unique((np.arange(nx)[:, None] ** 2 + np.arange(ny)[None, :] ** 2).ravel())
    dist = d * np.sqrt(sq.astype(float))
    dist_eff = np.where(sq == 0, r_eff, dist)
    k = basis.n_needed(float(dist_eff.min()))
    prof = basis.profiles(zc, k)
    hank = _masked_hankel(basis, k, dist_eff)
    table = series_from_profiles(basis.weights[:k], prof, prof, hank)  # (nz, nz, ndist)
    weight = mesh.q_tilde * mesh.volume
    kern = InteractionKernel(basis=basis, mesh=mesh, r_eff=r_eff, storage=storage,
                             depth_profiles=prof, distances=dist_eff)
    if storage == "dense":
        col = np.arange(n)
        cz, cy, cx = col // (nx * ny), (col // nx) % ny, col % nx
        off2 = (cx[:, None] - cx[None, :]) ** 2 + (cy[:, None] - cy[None, :]) ** 2
        rank = np.searchsorted(sq, off2)
        kern.matrix = table[cz[:, None], cz[None, :], rank] * weight[None, :]
    else:
        fy, fx = _fft_size(2 * ny - 1), _fft_size(2 * nx - 1)
        oy = np.arange(-(ny - 1), ny)
        ox = np.arange(-(nx - 1), nx)
        rank = np.searchsorted(sq, oy[:, None] ** 2 + ox[None, :] ** 2)
        stencil = table[:, :, rank]                              # (nz, nz, 2ny-1, 2nx-1)
        padded = np.zeros((nz, nz, fy, fx), dtype=complex)
        # place offset (0, 0) at index (0, 0) with wrap-around for negatives
        padded[:, :, oy[:, None] % fy, ox[None, :] % fx] = stencil
        kern._fft = np.fft.fft2(padded, axes=(2, 3))
        kern._fft_shape = (fy, fx)
    logger.info("assembled %s kernel: %d cells, %d modes, %d distances", storage, n, k, dist.size)
    return kern


def _fft_size(n):
    m = 1
    while m < n:
        m *= 2
    return m


@dataclass
class FieldGrid:
    """Total field on the inclusion cells."""

    values: np.ndarray
    iterations: int
    change: float
    converged: bool
    history: list = field(default_factory=list)


def _iterate(kernel, f, eps, max_iter):
    """Fixed-point iteration on a block of incident fields, column-wise stopping."""
    f = np.asarray(f, dtype=complex)
    vec = f.ndim == 1
    F = f.reshape(f.shape[0], -1)
    m = F.shape[1]
    P = F.copy()
    iters = np.zeros(m, dtype=int)
    change = np.full(m, np.inf)
    done = np.zeros(m, dtype=bool)
    grow = np.zeros(m, dtype=int)
    hist = [[] for _ in range(m)]
    for it in range(1, max_iter + 1):
        act = np.nonzero(~done)[0]
        if act.size == 0:
            break
        Pa = P[:, act]
        new = F[:, act] - kernel.apply(Pa)
        num = np.linalg.norm(new - Pa, axis=0)
        den = np.linalg.norm(new, axis=0)
        rel = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
        prev = change[act]
        grow[act] = np.where(rel > prev, grow[act] + 1, 0)
        P[:, act] = new
        change[act] = rel
        iters[act] = it
        for j, c in zip(act, rel):
            hist[j].append(float(c))
        if np.any(grow[act] >= 3):
            bad = act[grow[act] >= 3][0]
            raise DivergenceError(
                f"fixed-point change grew for 3 consecutive iterations (column {bad}, "
                f"change {change[bad]:.3e}); the contrast is too large for the iteration to contract")
        done[act] = rel <= eps
    out = [FieldGrid(values=P[:, j], iterations=int(iters[j]), change=float(change[j]),
                     converged=bool(done[j]), history=hist[j]) for j in range(m)]
    return out[0] if vec else out


def born_iterate(kernel: InteractionKernel, source=None, eps=1e-3, max_iter=200,
                 incident=None):
    """Solve ``p = G(.; xs) - K p`` on the inclusion cells.

    Starts from ``p = G(.; xs)``; each update applies ``p <- G - K p`` and the
    loop stops once the relative L2 change drops to ``eps``.  ``incident``
    replaces the point-source field (shape ``(n_cells,)`` or ``(n_cells, m)``).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if incident is None:
        if source is None:
            raise ValueError("need a source point or an incident field")
        incident = incident_field(kernel, source)
    return _iterate(kernel, incident, eps, max_iter)


def incident_field(kernel: InteractionKernel, sources) -> np.ndarray:
    """``G(cell; xs)`` for one source ``(3,)`` or a block ``(m, 3)`` -> ``(n_cells[, m])``."""
    sources = np.asarray(sources, dtype=float)
    single = sources.ndim == 1
    src = sources.reshape(-1, 3)
    if np.any(kernel.mesh.contains(src, closed=False)):
        raise DomainError("point source inside the inclusion")
    g = green_pairs(kernel.basis, kernel.mesh.centers[:, None, :], src[None, :, :],
                    r_eff=kernel.r_eff)
    return g[:, 0] if single else g


@dataclass(frozen=True)
class ReceiverSet:
    positions: np.ndarray

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if pos.shape[-1] != 3:
            raise DomainError("receiver positions need three coordinates")
        object.__setattr__(self, "positions", pos)

    @classmethod
    def line(cls, start, step, count):
        """``start + n * step`` for ``n = 0 .. count - 1``."""
        start = np.asarray(start, dtype=float)
        step = np.asarray(step, dtype=float)
        return cls(start[None, :] + np.arange(count)[:, None] * step[None, :])

    def __len__(self):
        return int(self.positions.shape[0])

    def validate(self, cfg: WaveguideConfig, mesh: VolumeMesh):
        if len(self) == 0:
            raise DomainError("no receivers")
        cfg.layer_of(self.positions[:, 2])
        if np.any(mesh.contains(self.positions)):
            raise DomainError("receiver inside the inclusion box")


@dataclass
class ScatterRecord:
    """Scattered field at the receivers, with the noise that was applied."""

    receivers: np.ndarray
    values: np.ndarray
    delta: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        self.receivers = np.atleast_2d(np.asarray(self.receivers, dtype=float))
        self.values = np.asarray(self.values, dtype=complex).ravel()
        if self.values.size != self.receivers.shape[0]:
            raise ValueError("one value per receiver expected")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite scattered values")

    def __len__(self):
        return int(self.values.size)

    def __eq__(self, other):
        if not isinstance(other, ScatterRecord):
            return NotImplemented
        return (np.array_equal(self.receivers, other.receivers)
                and np.array_equal(self.values, other.values)
                and self.delta == other.delta and self.seed == other.seed)


class ForwardModel:
    """Kernel, receivers and the receiver-side Green matrix for repeated synthesis."""

    def __init__(self, kernel: InteractionKernel, receivers: ReceiverSet, eps=1e-3, max_iter=200):
        receivers.validate(kernel.cfg, kernel.mesh)
        self.kernel = kernel
        self.receivers = receivers
        self.eps = eps
        self.max_iter = max_iter
        # G(cell; receiver), scaled by -qt * delta^3
        g = green_pairs(kernel.basis, kernel.mesh.centers[None, :, :],
                        receivers.positions[:, None, :], r_eff=kernel.r_eff)
        self._gather = -g * (kernel.mesh.q_tilde * kernel.mesh.volume)[None, :]

    @property
    def basis(self):
        return self.kernel.basis

    def solve(self, sources):
        return born_iterate(self.kernel, incident=incident_field(self.kernel, sources),
                            eps=self.eps, max_iter=self.max_iter)

    def scatter(self, fields) -> np.ndarray:
        """Receiver values for one field or a list of fields -> ``(M,)`` or ``(M, m)``."""
        if isinstance(fields, FieldGrid):
            return self._gather @ fields.values
        P = np.stack([f.values for f in fields], axis=1)
        return self._gather @ P

    def synthesize(self, sources) -> np.ndarray:
        """Scattered receiver values for one source ``(3,)`` or a block ``(m, 3)``."""
        return self.scatter(self.solve(sources))

    def record(self, source) -> ScatterRecord:
        return scattered_field(self, self.solve(source))


def scattered_field(model: ForwardModel, field: FieldGrid, receivers: ReceiverSet | None = None):
    """``p^s(x^r) = -sum_c G(c; x^r) qt(c) p(c) delta^3`` at each receiver."""
    if receivers is not None and receivers is not model.receivers:
        receivers.validate(model.kernel.cfg, model.kernel.mesh)
        model = ForwardModel(model.kernel, receivers, model.eps, model.max_iter)
    return ScatterRecord(receivers=model.receivers.positions, values=model.scatter(field))


def truncated_normal(rng: np.random.Generator, size, bound=1.0) -> np.ndarray:
    """Standard normal samples redrawn until they fall in ``[-bound, bound]``."""
    out = rng.standard_normal(size)
    bad = np.abs(out) > bound
    while np.any(bad):
        out[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(out) > bound
    return out


def add_noise(rec: ScatterRecord, delta: float, seed) -> ScatterRecord:
    """Multiplicative noise ``p (1 + delta (r1 + i r2))`` with ``r1, r2`` in ``[-1, 1]``."""
    if delta < 0:
        raise ValueError("noise level must be non-negative")
    if delta == 0:
        return ScatterRecord(rec.receivers.copy(), rec.values.copy(), 0.0, seed)
    rng = np.random.default_rng(seed)
    r = truncated_normal(rng, (len(rec), 2))
    noisy = rec.values * (1.0 + delta * (r[:, 0] + 1j * r[:, 1]))
    return ScatterRecord(rec.receivers.copy(), noisy, float(delta), seed)


def born1_bilinear(model: ForwardModel, source) -> np.ndarray:
    """First Born approximation: the scatter of the incident field itself."""
    return model._gather @ incident_field(model.kernel, source)
