"""One-step maps for the strong schemes of order 1 and 1.5.

These are the reference implementations operating on arbitrary coefficient
callbacks; the compiled engine in :mod:`exitmc.kernels` inlines the same
arithmetic for the preset coefficient families. Both step maps are pure:
identical inputs produce bit-identical outputs.

Supported noise classes: scalar, additive, diagonal, and commutative. For
these, every iterated integral reduces to

    I_(j1,j2) = (dW^j1 dW^j2 - delta_(j1,j2) dt) / 2,

exact on the diagonal and the standard commutative reduction off it. The
order-1.5 map implements the diagonal-noise form (eight-term update); the
fully general non-commutative schemes are out of scope.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import SdeModel
from .rng import NoiseIncrement

__all__ = ["StepInput", "milstein_step", "taylor15_step"]

_MILSTEIN_NOISE = ("scalar", "additive", "diagonal", "commutative")
_TAYLOR15_NOISE = ("scalar", "additive", "diagonal")


@dataclass(frozen=True)
class StepInput:
    """State, driving noise and step length for one integrator step."""

    state: np.ndarray
    noise: NoiseIncrement
    dt: float

    def __post_init__(self):
        if self.dt != self.noise.dt:
            raise ValueError(
                f"dt={self.dt} does not match noise.dt={self.noise.dt}"
            )
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")


def milstein_step(model: SdeModel, inp: StepInput) -> np.ndarray:
    """Order-1 (Milstein) update of the state.

    For additive noise the correction vanishes and the step is exactly
    Euler-Maruyama. Commutative noise is the caller's responsibility to
    certify; the off-diagonal reduction assumes it.
    """
    if model.noise_structure not in _MILSTEIN_NOISE:
        raise ValueError(
            f"milstein_step does not support noise_structure={model.noise_structure!r}"
        )
    x = np.asarray(inp.state, dtype=np.float64)
    dw = inp.noise.dw
    dt = inp.dt
    a = np.asarray(model.drift(x), dtype=np.float64)
    b = np.asarray(model.diffusion(x), dtype=np.float64)
    out = x + a * dt + b @ dw
    if model.noise_structure == "additive":
        return out
    model.requires(1)
    dj = np.asarray(model.diffusion_jacobian(x), dtype=np.float64)  # (d, m, d)
    # L^j1 b_(i,j2) = sum_k b[k,j1] * d b[i,j2] / d x_k
    lb = np.einsum("kp,iqk->piq", b, dj)
    ii = 0.5 * (np.outer(dw, dw) - dt * np.eye(dw.shape[0]))
    return out + np.einsum("piq,pq->i", lb, ii)


def taylor15_step(model: SdeModel, inp: StepInput) -> np.ndarray:
    """Order-1.5 update of the state (diagonal-diffusion form).

    Requires the correlated tuple (dw, dz) in the noise and all four
    derivative callbacks. The diffusion matrix must be diagonal at the
    current state (scalar models count as 1x1 diagonal).
    """
    if model.noise_structure not in _TAYLOR15_NOISE:
        raise ValueError(
            f"taylor15_step does not support noise_structure={model.noise_structure!r}"
        )
    if model.dim_state != model.dim_noise:
        raise ValueError("taylor15_step requires dim_state == dim_noise")
    if inp.noise.dz is None:
        raise ValueError("order 1.5 step needs the dz component of the noise")
    model.requires(1.5)

    x = np.asarray(inp.state, dtype=np.float64)
    dw = inp.noise.dw
    dz = inp.noise.dz
    dt = inp.dt
    d = model.dim_state

    a = np.asarray(model.drift(x), dtype=np.float64)
    b = np.asarray(model.diffusion(x), dtype=np.float64)
    if np.count_nonzero(b - np.diag(np.diagonal(b))) != 0:
        raise ValueError("taylor15_step requires a diagonal diffusion matrix")
    ja = np.asarray(model.drift_jacobian(x), dtype=np.float64)        # (d, d)
    ha = np.asarray(model.drift_hessian(x), dtype=np.float64)        # (d, d, d)
    dj = np.asarray(model.diffusion_jacobian(x), dtype=np.float64)   # (d, m, d)
    dh = np.asarray(model.diffusion_hessian(x), dtype=np.float64)    # (d, m, d, d)

    bbt = b @ b.T
    bdiag = np.diagonal(b).copy()

    out = np.empty(d)
    for i in range(d):
        # generator terms: L0 f = a.grad f + (1/2) tr(b b^T hess f); Li f = sum_k b[k,i] df/dx_k
        l0a = float(a @ ja[i] + 0.5 * np.sum(bbt * ha[i]))
        l0b = float(a @ dj[i, i] + 0.5 * np.sum(bbt * dh[i, i]))
        lib = float(b[:, i] @ dj[i, i])
        lia = float(b[:, i] @ ja[i])
        # Li Li b_ii = sum_k b[k,i] d/dx_k (sum_l b[l,i] d b_ii/dx_l)
        grad_lib = dj[:, i, :].T @ dj[i, i] + b[:, i] @ dh[i, i]
        lilib = float(b[:, i] @ grad_lib)
        out[i] = (
            x[i]
            + a[i] * dt
            + bdiag[i] * dw[i]
            + 0.5 * l0a * dt * dt
            + 0.5 * lib * (dw[i] * dw[i] - dt)
            + l0b * (dw[i] * dt - dz[i])
            + lia * dz[i]
            + 0.5 * lilib * (dw[i] * dw[i] / 3.0 - dt) * dw[i]
        )
    return out
