"""Counter-based Gaussian noise streams.

Every simulated path owns one stream keyed by ``(seed, path_index)``. The
raw generator is Philox4x64-10 (the same bit generator numpy ships), so the
k-th draw of a path is a pure function of ``(seed, path_index, k)`` and is
reproducible across runs, workers and batch layouts. Normals are produced
from raw 64-bit words with the Box-Muller map; the compiled kernels in
:mod:`exitmc.kernels` implement the identical pipeline, which keeps the two
engines bit-for-bit in sync.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["NoiseIncrement", "RngStream", "sample_increment"]

# One Philox block = 4 raw uint64 words = 4 normals (two Box-Muller pairs).
_BLOCKS_PER_REFILL = 256
_INV_SQRT3 = 1.0 / math.sqrt(3.0)
_TWO_NEG53 = 2.0 ** -53
_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class NoiseIncrement:
    """Wiener increment over one step, plus the iterated integral for order 1.5.

    ``dw[j] ~ N(0, dt)`` independently across components. ``dz`` is the
    time-integrated increment with ``Var = dt^3/3`` and ``Cov(dw, dz) = dt^2/2``
    componentwise; it is present only when generated for an order-1.5 step.
    """

    dw: np.ndarray
    dz: np.ndarray | None
    dt: float


def _normals_from_raw(raw: np.ndarray) -> np.ndarray:
    """Map a block-aligned array of raw uint64 words to normals.

    Scalar math.* calls on purpose: numpy's vectorized log differs from libm
    by 1 ulp on a fraction of inputs, which would desynchronize this stream
    from the compiled kernels.
    """
    out = np.empty(raw.shape[0], dtype=np.float64)
    for i in range(0, raw.shape[0], 2):
        u0 = (float(raw[i] >> np.uint64(11)) + 1.0) * _TWO_NEG53
        u1 = float(raw[i + 1] >> np.uint64(11)) * _TWO_NEG53
        rad = math.sqrt(-2.0 * math.log(u0))
        ang = _TWO_PI * u1
        out[i] = rad * math.cos(ang)
        out[i + 1] = rad * math.sin(ang)
    return out


class RngStream:
    """Per-path normal stream, a pure function of ``(seed, path_index)``.

    The stream hands out standard normals in a fixed order; callers must
    consume them in the documented per-step order (see
    :func:`sample_increment`) to stay aligned with the compiled kernels.
    """

    def __init__(self, seed: int, path_index: int = 0):
        self.seed = int(seed) & (2**64 - 1)
        self.path_index = int(path_index) & (2**64 - 1)
        self._bitgen = np.random.Philox(
            counter=[0, 0, 0, 0], key=[self.seed, self.path_index]
        )
        self._buf = np.empty(0, dtype=np.float64)
        self._pos = 0
        self.draw_count = 0

    def _refill(self) -> None:
        raw = self._bitgen.random_raw(4 * _BLOCKS_PER_REFILL)
        self._buf = _normals_from_raw(raw)
        self._pos = 0

    def normal(self) -> float:
        """Next standard normal draw."""
        if self._pos >= self._buf.shape[0]:
            self._refill()
        z = self._buf[self._pos]
        self._pos += 1
        self.draw_count += 1
        return float(z)

    def normals(self, n: int) -> np.ndarray:
        out = np.empty(n, dtype=np.float64)
        for i in range(n):
            out[i] = self.normal()
        return out


def sample_increment(rng: RngStream, dt: float, order: float, m: int) -> NoiseIncrement:
    """Draw the driving noise for one step of length ``dt``.

    Order 1 consumes one normal per noise component. Order 1.5 consumes the
    pair (U1, U2) per component and returns the correlated tuple

        dw = U1 sqrt(dt),   dz = dt^(3/2) (U1 + U2/sqrt(3)) / 2,

    which realizes Var(dz) = dt^3/3 and Cov(dw, dz) = dt^2/2.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if order not in (1, 1.5):
        raise ValueError(f"order must be 1 or 1.5, got {order}")
    sq = math.sqrt(dt)
    if order == 1:
        dw = np.empty(m)
        for j in range(m):
            dw[j] = rng.normal() * sq
        return NoiseIncrement(dw=dw, dz=None, dt=float(dt))
    dw = np.empty(m)
    dz = np.empty(m)
    half_dt32 = 0.5 * dt * sq
    for j in range(m):
        u1 = rng.normal()
        u2 = rng.normal()
        dw[j] = u1 * sq
        dz[j] = half_dt32 * (u1 + u2 * _INV_SQRT3)
    return NoiseIncrement(dw=dw, dz=dz, dt=float(dt))
