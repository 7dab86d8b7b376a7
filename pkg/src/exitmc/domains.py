"""Spatial domains with exact boundary-distance oracles.

The adaptive step selector only ever needs two queries: membership and
distance to the boundary set. Intervals and balls — the shapes used by all
experiments — get exact analytic answers; anything else is supplied by the
caller as a (contains, boundary_distance) pair and is trusted as-is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = ["Domain", "interval_domain", "ball_domain", "boundary_distance"]


@dataclass(frozen=True)
class Domain:
    """Open bounded domain D with a distance-to-boundary oracle.

    ``contains(x)`` is strict membership in the open set; ``distance(x)`` is
    the Euclidean distance to the boundary set (defined inside and outside).
    ``kind`` is "interval", "ball" or "custom"; analytic kinds carry their
    geometry in ``params`` so the compiled kernels can inline them.
    """

    dim: int
    contains: Callable[[np.ndarray], bool]
    distance: Callable[[np.ndarray], float]
    kind: str = "custom"
    params: tuple[float, ...] = field(default=())

    def sample_box(self) -> tuple[np.ndarray, np.ndarray]:
        """Axis-aligned bounding box, used for drawing test states."""
        if self.kind == "interval":
            lo, hi = self.params
            return np.array([lo]), np.array([hi])
        if self.kind == "ball":
            *c, r = self.params
            c = np.asarray(c)
            return c - r, c + r
        raise ValueError("custom domains do not expose a bounding box")


def interval_domain(lo: float, hi: float) -> Domain:
    """Open interval (lo, hi) in one dimension."""
    if not hi > lo:
        raise ValueError(f"need hi > lo, got ({lo}, {hi})")
    lo = float(lo)
    hi = float(hi)

    def contains(x) -> bool:
        v = float(np.asarray(x).reshape(-1)[0])
        return lo < v < hi

    def distance(x) -> float:
        v = float(np.asarray(x).reshape(-1)[0])
        return min(abs(v - lo), abs(hi - v))

    return Domain(dim=1, contains=contains, distance=distance,
                  kind="interval", params=(lo, hi))


def ball_domain(center, radius: float) -> Domain:
    """Open Euclidean ball with the sphere as boundary."""
    c = np.asarray(center, dtype=np.float64).reshape(-1)
    r = float(radius)
    if r <= 0.0:
        raise ValueError(f"radius must be positive, got {radius}")

    def contains(x) -> bool:
        v = np.asarray(x, dtype=np.float64).reshape(-1)
        return float(np.linalg.norm(v - c)) < r

    def distance(x) -> float:
        v = np.asarray(x, dtype=np.float64).reshape(-1)
        return abs(r - float(np.linalg.norm(v - c)))

    return Domain(dim=c.shape[0], contains=contains, distance=distance,
                  kind="ball", params=(*c.tolist(), r))


def boundary_distance(domain: Domain, x) -> float:
    """Distance from ``x`` to the boundary of ``domain`` (exact for analytic kinds)."""
    d = domain.distance(x)
    if d < 0.0 or math.isnan(d):
        raise ValueError(f"domain distance oracle returned {d}")
    return d
