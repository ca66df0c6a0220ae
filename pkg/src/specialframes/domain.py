"""Chart domain boxes and point validation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainBoundaryError


def as_point(x, dim: int | None = None) -> np.ndarray:
    p = np.asarray(x, dtype=float).reshape(-1)
    if dim is not None and p.shape[0] != dim:
        raise ValueError(f"point has {p.shape[0]} coordinates, chart dimension is {dim}")
    if p.shape[0] < 1 or not all(math.isfinite(v) for v in p.tolist()):
        raise ValueError(f"invalid point {p!r}")
    return p


@dataclass(frozen=True)
class Box:
    """Closed axis-aligned box; infinite bounds are allowed."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise ValueError("box bounds differ in length")
        for a, b in zip(self.lo, self.hi):
            if not a < b:
                raise ValueError(f"empty box side [{a}, {b}]")

    @classmethod
    def unbounded(cls, dim: int) -> "Box":
        return cls((-np.inf,) * dim, (np.inf,) * dim)

    @classmethod
    def from_pairs(cls, pairs) -> "Box":
        return cls(tuple(float(p[0]) for p in pairs), tuple(float(p[1]) for p in pairs))

    @property
    def dim(self) -> int:
        return len(self.lo)

    def contains(self, x) -> bool:
        # plain floats: this sits on the hot path of every transport step
        vals = np.asarray(x, dtype=float).reshape(-1).tolist()
        return len(vals) == len(self.lo) and all(a <= v <= b for v, a, b in zip(vals, self.lo, self.hi))

    def require(self, x, what: str = "point outside chart domain") -> None:
        if not self.contains(x):
            raise DomainBoundaryError(x, what)

    def diameter(self) -> float:
        return float(np.linalg.norm(np.subtract(self.hi, self.lo)))
