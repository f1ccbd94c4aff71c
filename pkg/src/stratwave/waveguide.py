"""Three-layer stratified waveguide: geometry, materials and refraction coefficients.

Depth ``x3`` is measured downward from the pressure-release surface (``x3 = 0``)
to the rigid bottom (``x3 = h``).  Interfaces sit at ``d1`` and ``d2``.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np


class DomainError(ValueError):
    """A point or parameter lies outside the admissible domain."""


@dataclass(frozen=True)
class WaveguideConfig:
    """Layered background medium.

    Parameters
    ----------
    h : float
        Total depth of the waveguide.
    d1, d2 : float
        Depths of the two interfaces, ``0 < d1 < d2 < h``.
    rho1, rho2, rho3 : float
        Layer densities.
    f : float
        Source frequency.
    c1, c2, c3 : float
        Layer sound speeds; the layer wavenumber is ``k_i = 2 pi f / c_i``.
    n1, n2, n3 : float
        Refractive indices.
    """

    h: float = 100.0
    d1: float = 100.0 / 3.0
    d2: float = 200.0 / 3.0
    rho1: float = 1000.0
    rho2: float = 1500.0
    rho3: float = 3000.0
    f: float = 75.0
    c1: float = 1000.0
    c2: float = 1500.0
    c3: float = 3000.0
    n1: float = 1.0
    n2: float = 0.5
    n3: float = 1.0 / 3.0

    def __post_init__(self):
        for name in ("h", "d1", "d2", "rho1", "rho2", "rho3", "f",
                     "c1", "c2", "c3", "n1", "n2", "n3"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be finite and positive, got {value!r}")
        if not (0 < self.d1 < self.d2 < self.h):
            raise DomainError(
                f"interfaces must satisfy 0 < d1 < d2 < h, got d1={self.d1}, d2={self.d2}, h={self.h}")

    @classmethod
    def homogeneous(cls, k=0.3, h=100.0, rho=1.0, d1=None, d2=None):
        """Degenerate config: three layers sharing one density and one ``k n``."""
        d1 = h / 3.0 if d1 is None else d1
        d2 = 2.0 * h / 3.0 if d2 is None else d2
        c = 2.0 * math.pi / k  # with f = 1, n = 1
        return cls(h=h, d1=d1, d2=d2, rho1=rho, rho2=rho, rho3=rho, f=1.0,
                   c1=c, c2=c, c3=c, n1=1.0, n2=1.0, n3=1.0)

    @property
    def k(self) -> tuple[float, float, float]:
        w = 2.0 * math.pi * self.f
        return (w / self.c1, w / self.c2, w / self.c3)

    @property
    def q(self) -> tuple[float, float, float]:
        """Layer coefficients ``k_i n_i``."""
        k1, k2, k3 = self.k
        return (k1 * self.n1, k2 * self.n2, k3 * self.n3)

    @property
    def rho(self) -> tuple[float, float, float]:
        return (self.rho1, self.rho2, self.rho3)

    @property
    def bounds(self) -> tuple[tuple[float, float], ...]:
        return ((0.0, self.d1), (self.d1, self.d2), (self.d2, self.h))

    @property
    def qmax(self) -> float:
        return max(self.q)

    def layer_of(self, x3):
        """Layer index (0, 1, 2) of each depth.

        Layers are half-open downward: ``[0, d1)`` maps to 0, ``[d1, d2)`` to 1
        and ``[d2, h]`` to 2, so an exact interface hit belongs to the deeper layer.
        """
        x3 = np.asarray(x3, dtype=float)
        if np.any(x3 < 0) or np.any(x3 > self.h) or np.any(~np.isfinite(x3)):
            raise DomainError(f"depth outside [0, {self.h}]")
        out = np.where(x3 < self.d1, 0, np.where(x3 < self.d2, 1, 2))
        return int(out) if out.ndim == 0 else out

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "WaveguideConfig":
        fields = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - fields
        if unknown:
            raise KeyError(f"unknown waveguide keys: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})

    def digest(self) -> str:
        """Stable hash of the configuration (floats via ``repr``)."""
        blob = json.dumps({k: repr(v) for k, v in self.to_dict().items()}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


REFERENCE_WAVEGUIDE = WaveguideConfig()


def background_q(cfg: WaveguideConfig, x3):
    """Background coefficient ``q0(x3) = k_i n_i`` of the layer containing ``x3``."""
    q = np.asarray(cfg.q)
    out = q[cfg.layer_of(x3)]
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class InclusionSpec:
    """Homogeneous penetrable cuboid embedded in one layer.

    ``q4`` is the interior coefficient ``k4 n4``.  Only the equal-density case
    ``rho4 == rho`` of the host layer is supported.
    """

    box: tuple[tuple[float, float], tuple[float, float], tuple[float, float]]
    q4: float
    rho4: float

    def __post_init__(self):
        box = tuple((float(a), float(b)) for a, b in self.box)
        if len(box) != 3 or any(not a < b for a, b in box):
            raise DomainError(f"inclusion box must be three increasing intervals, got {self.box}")
        object.__setattr__(self, "box", box)
        if not (self.q4 > 0 and self.rho4 > 0):
            raise DomainError("q4 and rho4 must be positive")

    @classmethod
    def with_relative_contrast(cls, cfg: WaveguideConfig, box, ratio=1.1):
        """Inclusion in the host layer of ``box`` with ``q4 = ratio * k n`` of that layer."""
        zc = 0.5 * (box[2][0] + box[2][1])
        layer = cfg.layer_of(zc)
        return cls(box=box, q4=ratio * cfg.q[layer], rho4=cfg.rho[layer])

    def host_layer(self, cfg: WaveguideConfig) -> int:
        (_, _), (_, _), (z0, z1) = self.box
        for i, (lo, hi) in enumerate(cfg.bounds):
            if lo < z0 and z1 < hi:
                return i
        raise DomainError(f"inclusion depth range [{z0}, {z1}] is not inside a single layer")

    def validate(self, cfg: WaveguideConfig) -> int:
        layer = self.host_layer(cfg)
        if not math.isclose(self.rho4, cfg.rho[layer], rel_tol=1e-12):
            raise DomainError(
                f"rho4={self.rho4} differs from host density {cfg.rho[layer]}; "
                "only the equal-density case is implemented")
        return layer

    def contains(self, x, closed=True):
        x = np.asarray(x, dtype=float)
        inside = np.ones(x.shape[:-1], dtype=bool)
        for axis, (lo, hi) in enumerate(self.box):
            c = x[..., axis]
            inside &= (c >= lo) & (c <= hi) if closed else (c > lo) & (c < hi)
        return inside

    def to_dict(self) -> dict:
        return {"box": [list(b) for b in self.box], "q4": self.q4, "rho4": self.rho4}


def contrast_q_tilde(cfg: WaveguideConfig, inc: InclusionSpec, x):
    """Contrast ``(q0)^2 - q^2``: zero outside the closed box, constant inside."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 3:
        raise DomainError("points must have three coordinates")
    cfg.layer_of(x[..., 2])  # domain check
    layer = inc.validate(cfg)
    value = cfg.q[layer] ** 2 - inc.q4 ** 2
    out = np.where(inc.contains(x), value, 0.0)
    return float(out) if out.ndim == 0 else out
