"""SDE model definitions and the experiment presets.

A model carries the coefficient callbacks of dX = a(X)dt + b(X)dW together
with the analytic derivatives the order 1 and 1.5 schemes need, a documented
spectral bound on b b^T, and (for the built-in presets) a compact kernel
descriptor that the compiled batch engine can inline.

Derivatives are supplied analytically per preset rather than
auto-differentiated: the schemes consume L^j b, L^0 a, L^0 b and L^i L^i b
exactly, and finite-difference noise would contaminate the order-1.5
convergence measurements. A finite-difference fallback exists for custom
models but is flagged via ``derivative_source``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .domains import Domain, ball_domain, interval_domain

__all__ = [
    "SdeModel",
    "KernelSpec",
    "PresetBundle",
    "make_model",
    "preset_bundle",
    "PRESET_NAMES",
    "validate_derivatives",
    "max_diffusion_eigenvalue",
    "with_fd_derivatives",
]

NOISE_STRUCTURES = ("scalar", "additive", "diagonal", "commutative")

# Kernel family ids understood by exitmc.kernels
KERNEL_AFFINE_1D = 0    # a = p0 + p1 x,        b = p2 + p3 x
KERNEL_COSINE_1D = 1    # a = p0 x,             b = p1 (cos x + p2)
KERNEL_CROSS_2D = 2     # a = p0 (x2, x1),      b = diag(p1 x1, p1 x2)
KERNEL_COSINE_2D = 3    # a = p0 (x2, x1),      b = diag(p1 (cos xi + p2))


@dataclass(frozen=True)
class KernelSpec:
    """Closed-form coefficient family recognized by the compiled engine."""

    family: int
    params: tuple[float, float, float, float]


@dataclass(frozen=True)
class SdeModel:
    """Autonomous Ito diffusion dX = a(X) dt + b(X) dW on R^d with m-dim noise.

    Shapes: drift (d,), diffusion (d, m), drift_jacobian (d, d) with
    J[i, k] = d a_i / d x_k, diffusion_jacobian (d, m, d), drift_hessian
    (d, d, d), diffusion_hessian (d, m, d, d). The hessians are required only
    by the order-1.5 scheme. ``diffusion_bound`` is the documented spectral
    bound of b b^T on the (slightly enlarged) experiment domain.
    """

    dim_state: int
    dim_noise: int
    drift: Callable[[np.ndarray], np.ndarray]
    diffusion: Callable[[np.ndarray], np.ndarray]
    diffusion_bound: float
    x0: np.ndarray
    drift_jacobian: Callable[[np.ndarray], np.ndarray] | None = None
    diffusion_jacobian: Callable[[np.ndarray], np.ndarray] | None = None
    drift_hessian: Callable[[np.ndarray], np.ndarray] | None = None
    diffusion_hessian: Callable[[np.ndarray], np.ndarray] | None = None
    noise_structure: str = "diagonal"
    name: str = "custom"
    kernel: KernelSpec | None = None
    derivative_source: str = "analytic"

    def __post_init__(self):
        if self.dim_state < 1 or self.dim_noise < 1:
            raise ValueError("dim_state and dim_noise must be >= 1")
        if self.noise_structure not in NOISE_STRUCTURES:
            raise ValueError(f"unknown noise_structure {self.noise_structure!r}")
        if self.noise_structure == "diagonal" and self.dim_state != self.dim_noise:
            raise ValueError("diagonal noise requires dim_state == dim_noise")
        if not self.diffusion_bound > 0.0:
            raise ValueError("diffusion_bound must be positive")
        object.__setattr__(
            self, "x0", np.asarray(self.x0, dtype=np.float64).reshape(-1)
        )
        if self.x0.shape[0] != self.dim_state:
            raise ValueError("x0 has wrong dimension")

    def requires(self, order: float) -> None:
        """Raise if the derivative callbacks for the requested order are missing."""
        if order == 1:
            if self.noise_structure != "additive" and self.diffusion_jacobian is None:
                raise ValueError(
                    f"model {self.name!r}: order 1 needs diffusion_jacobian"
                )
            return
        if order == 1.5:
            missing = [
                n
                for n, cb in (
                    ("drift_jacobian", self.drift_jacobian),
                    ("diffusion_jacobian", self.diffusion_jacobian),
                    ("drift_hessian", self.drift_hessian),
                    ("diffusion_hessian", self.diffusion_hessian),
                )
                if cb is None
            ]
            if missing:
                raise ValueError(
                    f"model {self.name!r}: order 1.5 needs {', '.join(missing)}"
                )
            return
        raise ValueError(f"order must be 1 or 1.5, got {order}")


@dataclass(frozen=True)
class PresetBundle:
    """A preset model together with its experiment domain and reference value."""

    model: SdeModel
    domain: Domain
    reference_mean_exit: float | None
    reference_source: str
    cutoff_time: float = 10.0


def _affine_1d(name, a0, a1, b0, b1, x0, c_b, structure) -> SdeModel:
    def drift(x):
        return np.array([a0 + a1 * float(x[0])])

    def diffusion(x):
        return np.array([[b0 + b1 * float(x[0])]])

    return SdeModel(
        dim_state=1,
        dim_noise=1,
        drift=drift,
        diffusion=diffusion,
        drift_jacobian=lambda x: np.array([[a1]]),
        diffusion_jacobian=lambda x: np.array([[[b1]]]),
        drift_hessian=lambda x: np.zeros((1, 1, 1)),
        diffusion_hessian=lambda x: np.zeros((1, 1, 1, 1)),
        noise_structure=structure,
        diffusion_bound=c_b,
        x0=np.array([x0]),
        name=name,
        kernel=KernelSpec(KERNEL_AFFINE_1D, (a0, a1, b0, b1)),
    )


def _cosine_1d(name, a1, amp, shift, x0, c_b) -> SdeModel:
    def drift(x):
        return np.array([a1 * float(x[0])])

    def diffusion(x):
        return np.array([[amp * (np.cos(float(x[0])) + shift)]])

    def diffusion_jacobian(x):
        return np.array([[[-amp * np.sin(float(x[0]))]]])

    def diffusion_hessian(x):
        return np.array([[[[-amp * np.cos(float(x[0]))]]]])

    return SdeModel(
        dim_state=1,
        dim_noise=1,
        drift=drift,
        diffusion=diffusion,
        drift_jacobian=lambda x: np.array([[a1]]),
        diffusion_jacobian=diffusion_jacobian,
        drift_hessian=lambda x: np.zeros((1, 1, 1)),
        diffusion_hessian=diffusion_hessian,
        noise_structure="scalar",
        diffusion_bound=c_b,
        x0=np.array([x0]),
        name=name,
        kernel=KernelSpec(KERNEL_COSINE_1D, (a1, amp, shift, 0.0)),
    )


def _cross_2d(name, a1, b1, x0, c_b) -> SdeModel:
    def drift(x):
        return np.array([a1 * float(x[1]), a1 * float(x[0])])

    def diffusion(x):
        return np.diag([b1 * float(x[0]), b1 * float(x[1])])

    def diffusion_jacobian(x):
        dj = np.zeros((2, 2, 2))
        dj[0, 0, 0] = b1
        dj[1, 1, 1] = b1
        return dj

    return SdeModel(
        dim_state=2,
        dim_noise=2,
        drift=drift,
        diffusion=diffusion,
        drift_jacobian=lambda x: np.array([[0.0, a1], [a1, 0.0]]),
        diffusion_jacobian=diffusion_jacobian,
        drift_hessian=lambda x: np.zeros((2, 2, 2)),
        diffusion_hessian=lambda x: np.zeros((2, 2, 2, 2)),
        noise_structure="diagonal",
        diffusion_bound=c_b,
        x0=np.asarray(x0, dtype=np.float64),
        name=name,
        kernel=KernelSpec(KERNEL_CROSS_2D, (a1, b1, 0.0, 0.0)),
    )


def _cosine_2d(name, a1, amp, shift, x0, c_b) -> SdeModel:
    def drift(x):
        return np.array([a1 * float(x[1]), a1 * float(x[0])])

    def diffusion(x):
        return np.diag([amp * (np.cos(float(x[0])) + shift),
                        amp * (np.cos(float(x[1])) + shift)])

    def diffusion_jacobian(x):
        dj = np.zeros((2, 2, 2))
        dj[0, 0, 0] = -amp * np.sin(float(x[0]))
        dj[1, 1, 1] = -amp * np.sin(float(x[1]))
        return dj

    def diffusion_hessian(x):
        dh = np.zeros((2, 2, 2, 2))
        dh[0, 0, 0, 0] = -amp * np.cos(float(x[0]))
        dh[1, 1, 1, 1] = -amp * np.cos(float(x[1]))
        return dh

    return SdeModel(
        dim_state=2,
        dim_noise=2,
        drift=drift,
        diffusion=diffusion,
        drift_jacobian=lambda x: np.array([[0.0, a1], [a1, 0.0]]),
        diffusion_jacobian=diffusion_jacobian,
        drift_hessian=lambda x: np.zeros((2, 2, 2)),
        diffusion_hessian=diffusion_hessian,
        noise_structure="diagonal",
        diffusion_bound=c_b,
        x0=np.asarray(x0, dtype=np.float64),
        name=name,
        kernel=KernelSpec(KERNEL_COSINE_2D, (a1, amp, shift, 0.0)),
    )


def _build_gbm1d(p):
    mu = p.pop("mu", 0.05)
    sigma = p.pop("sigma", 0.2)
    x0 = p.pop("x0", 4.0)
    # sup of (sigma x)^2 on the experiment interval (1,7) enlarged by 0.5
    c_b = p.pop("diffusion_bound", (sigma * 7.5) ** 2)
    return _affine_1d("gbm1d", 0.0, mu, 0.0, sigma, x0, c_b, "scalar")


def _build_cosine1d(p):
    a1 = p.pop("drift_slope", 0.1)
    amp = p.pop("amp", 0.3)
    shift = p.pop("shift", 3.0)
    x0 = p.pop("x0", 4.0)
    c_b = p.pop("diffusion_bound", (amp * (1.0 + shift)) ** 2)
    return _cosine_1d("cosine1d", a1, amp, shift, x0, c_b)


def _build_gbm2d(p):
    a1 = p.pop("drift_slope", 0.05)
    b1 = p.pop("sigma", 0.2)
    x0 = p.pop("x0", (3.0, 3.0))
    # sup of (sigma x_i)^2 on the disk of radius 3 about (3,3), enlarged by 0.5
    c_b = p.pop("diffusion_bound", (b1 * 6.5) ** 2)
    return _cross_2d("gbm2d", a1, b1, x0, c_b)


def _build_cosine2d(p):
    a1 = p.pop("drift_slope", 0.1)
    amp = p.pop("amp", 0.25)
    shift = p.pop("shift", 3.0)
    x0 = p.pop("x0", (3.0, 3.0))
    c_b = p.pop("diffusion_bound", (amp * (1.0 + shift)) ** 2)
    return _cosine_2d("cosine2d", a1, amp, shift, x0, c_b)


def _build_wiener1d(p):
    x0 = p.pop("x0", 0.0)
    c_b = p.pop("diffusion_bound", 1.0)
    return _affine_1d("wiener1d", 0.0, 0.0, 1.0, 0.0, x0, c_b, "additive")


_BUILDERS = {
    "gbm1d": _build_gbm1d,
    "cosine1d": _build_cosine1d,
    "gbm2d": _build_gbm2d,
    "cosine2d": _build_cosine2d,
    "wiener1d": _build_wiener1d,
}

PRESET_NAMES = tuple(sorted(_BUILDERS))

# Reference mean exit times for the preset experiments (cutoff T=10).
# The 1D values are reproducible with exitmc.pde.solve_mean_exit_1d; the 2D
# values are external reference constants (FEM solves) and are flagged as such.
_REFERENCES = {
    "gbm1d": (7.153211, "pde"),
    "cosine1d": (5.504741, "pde"),
    "gbm2d": (6.7737, "external"),
    "cosine2d": (5.0853, "external"),
    "wiener1d": (1.0, "analytic"),
}


def make_model(preset_name: str, params: dict | None = None) -> SdeModel:
    """Build a preset model, optionally overriding coefficients.

    Recognized presets: gbm1d, cosine1d, gbm2d, cosine2d, wiener1d. Unknown
    parameter keys raise, as do unknown preset names.
    """
    if preset_name not in _BUILDERS:
        raise ValueError(
            f"unknown preset {preset_name!r}; choose from {', '.join(PRESET_NAMES)}"
        )
    p = dict(params or {})
    model = _BUILDERS[preset_name](p)
    if p:
        raise ValueError(f"unknown parameters for {preset_name}: {sorted(p)}")
    return model


def preset_bundle(preset_name: str, params: dict | None = None) -> PresetBundle:
    """Preset model plus its experiment domain and reference mean exit time."""
    model = make_model(preset_name, params)
    if preset_name in ("gbm1d", "cosine1d"):
        domain = interval_domain(1.0, 7.0)
    elif preset_name in ("gbm2d", "cosine2d"):
        domain = ball_domain((3.0, 3.0), 3.0)
    else:
        domain = interval_domain(-1.0, 1.0)
    ref, source = _REFERENCES[preset_name]
    if params:
        # overridden coefficients invalidate the stored reference value
        ref, source = None, "none"
    return PresetBundle(model=model, domain=domain,
                        reference_mean_exit=ref, reference_source=source)


def max_diffusion_eigenvalue(model: SdeModel, x) -> float:
    """Largest eigenvalue of b(x) b(x)^T, for checking ``diffusion_bound``."""
    b = np.asarray(model.diffusion(np.asarray(x, dtype=np.float64)))
    return float(np.linalg.eigvalsh(b @ b.T)[-1])


def _central_diff(f, x, k, eps):
    xp = x.copy()
    xm = x.copy()
    xp[k] += eps
    xm[k] -= eps
    return (np.asarray(f(xp)) - np.asarray(f(xm))) / (2.0 * eps)


def validate_derivatives(model: SdeModel, states, rel_tol: float = 1e-5) -> float:
    """Check jacobian/hessian callbacks against central differences.

    Returns the worst mixed absolute/relative error
    ``|fd - exact| / (1 + |exact|)`` over the supplied states; raises if it
    exceeds ``rel_tol``.
    """
    worst = 0.0
    for x in np.atleast_2d(np.asarray(states, dtype=np.float64)):
        eps = 1e-5 * (1.0 + float(np.max(np.abs(x))))
        pairs = []
        if model.drift_jacobian is not None:
            fd = np.stack(
                [_central_diff(model.drift, x, k, eps) for k in range(model.dim_state)],
                axis=-1,
            )
            pairs.append((fd, np.asarray(model.drift_jacobian(x))))
        if model.diffusion_jacobian is not None:
            fd = np.stack(
                [_central_diff(model.diffusion, x, k, eps) for k in range(model.dim_state)],
                axis=-1,
            )
            pairs.append((fd, np.asarray(model.diffusion_jacobian(x))))
        if model.drift_hessian is not None:
            fd = np.stack(
                [
                    _central_diff(model.drift_jacobian, x, k, eps)
                    for k in range(model.dim_state)
                ],
                axis=-1,
            )
            pairs.append((fd, np.asarray(model.drift_hessian(x))))
        if model.diffusion_hessian is not None:
            fd = np.stack(
                [
                    _central_diff(model.diffusion_jacobian, x, k, eps)
                    for k in range(model.dim_state)
                ],
                axis=-1,
            )
            pairs.append((fd, np.asarray(model.diffusion_hessian(x))))
        for fd, exact in pairs:
            err = float(np.max(np.abs(fd - exact) / (1.0 + np.abs(exact))))
            worst = max(worst, err)
    if worst > rel_tol:
        raise ValueError(
            f"model {model.name!r}: derivative callbacks disagree with finite "
            f"differences (worst mixed error {worst:.3e} > {rel_tol:.1e})"
        )
    return worst


def with_fd_derivatives(model: SdeModel, eps: float = 1e-6) -> SdeModel:
    """Fill missing derivative callbacks by central differences.

    The result is flagged ``derivative_source='finite_difference'`` and is
    excluded from convergence-rate acceptance runs; intended for quick
    experiments with custom coefficient functions.
    """
    d = model.dim_state

    def jac_of(f):
        def jac(x):
            x = np.asarray(x, dtype=np.float64)
            return np.stack([_central_diff(f, x, k, eps) for k in range(d)], axis=-1)

        return jac

    drift_jac = model.drift_jacobian or jac_of(model.drift)
    diff_jac = model.diffusion_jacobian or jac_of(model.diffusion)
    return replace(
        model,
        drift_jacobian=drift_jac,
        diffusion_jacobian=diff_jac,
        drift_hessian=model.drift_hessian or jac_of(drift_jac),
        diffusion_hessian=model.diffusion_hessian or jac_of(diff_jac),
        derivative_source="finite_difference",
        kernel=None,
    )
