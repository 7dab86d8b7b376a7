"""Adaptive time-stepping driver for first exit times.

The driver advances a path with the order-1 or order-1.5 scheme, shrinking
the step size as the state approaches the boundary:

    order 1:    h   if d(x, boundary) >  delta,           h^2 otherwise
    order 1.5:  h   if d > delta1,   h^2 if d in (delta2, delta1],   h^3 else

with thresholds

    delta  = sqrt( 8 C_b d h   log(1/h))
    delta1 = sqrt(12 C_b d h   log(1/h))
    delta2 = sqrt(16 C_b d h^2 log(1/h))

where C_b is the model's diffusion bound and d the state dimension. The
Wiener special case replaces delta by sqrt(4 h log(1/h)) (order 1 only).
The reported exit time is the first mesh point outside the domain, truncated
at the cutoff T, with no boundary interpolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domains import Domain
from .integrators import StepInput, milstein_step, taylor15_step
from .models import SdeModel
from .rng import RngStream, sample_increment

__all__ = [
    "AdaptiveScheme",
    "ExitSample",
    "StepBudgetError",
    "step_size",
    "step_budget",
    "simulate_exit",
]

_E_INV = math.exp(-1.0)


class StepBudgetError(RuntimeError):
    """A path exceeded the hard step cap (runaway configuration)."""

    def __init__(self, message: str, path_index: int | None = None):
        super().__init__(message)
        self.path_index = path_index


@dataclass(frozen=True)
class AdaptiveScheme:
    """Order, step parameter and derived boundary-distance thresholds.

    ``delta2`` is None for order 1. ``h`` is restricted to (0, e^-1] so that
    log(1/h) >= 1 and all thresholds are real and positive; the experiments
    use h <= 2^-3 which satisfies this.
    """

    order: float
    h: float
    delta1: float
    delta2: float | None = None
    wiener_special: bool = False

    def __post_init__(self):
        if self.order not in (1, 1.5):
            raise ValueError(f"order must be 1 or 1.5, got {self.order}")
        if not 0.0 < self.h <= _E_INV:
            raise ValueError(f"h must lie in (0, e^-1], got {self.h}")
        if self.delta1 <= 0.0:
            raise ValueError("delta1 must be positive")
        if self.order == 1.5:
            if self.delta2 is None:
                raise ValueError("order 1.5 needs both thresholds")
            if not self.delta2 < self.delta1:
                raise ValueError(
                    f"delta2={self.delta2} must be below delta1={self.delta1}"
                )
        elif self.delta2 is not None:
            raise ValueError("order 1 takes a single threshold")

    @classmethod
    def from_bound(cls, order: float, h: float, c_b: float, dim: int,
                   wiener_special: bool = False) -> "AdaptiveScheme":
        """Thresholds from the diffusion bound C_b and state dimension."""
        h = float(h)
        if not 0.0 < h <= _E_INV:
            raise ValueError(f"h must lie in (0, e^-1], got {h}")
        log_inv = math.log(1.0 / h)
        if wiener_special:
            if order != 1:
                raise ValueError("wiener_special thresholds are defined for order 1 only")
            return cls(order=1, h=h, delta1=math.sqrt(4.0 * h * log_inv),
                       wiener_special=True)
        if order == 1:
            return cls(order=1, h=h,
                       delta1=math.sqrt(8.0 * c_b * dim * h * log_inv))
        return cls(
            order=1.5,
            h=h,
            delta1=math.sqrt(12.0 * c_b * dim * h * log_inv),
            delta2=math.sqrt(16.0 * c_b * dim * h * h * log_inv),
        )

    @classmethod
    def for_model(cls, model: SdeModel, order: float, h: float,
                  wiener_special: bool = False) -> "AdaptiveScheme":
        return cls.from_bound(order, h, model.diffusion_bound, model.dim_state,
                              wiener_special=wiener_special)

    @property
    def step_classes(self) -> tuple[float, ...]:
        if self.order == 1:
            return (self.h, self.h * self.h)
        return (self.h, self.h * self.h, self.h * self.h * self.h)


@dataclass(frozen=True)
class ExitSample:
    """Exit time, exit state and per-class step ledger of one path.

    ``exited`` is False when the path was truncated at the cutoff. ``cost``
    is the total number of integrator steps, the discrete realization of
    the inverse-step-size time integral on the realized mesh.
    """

    nu: float
    exit_state: np.ndarray
    exited: bool
    steps_by_class: np.ndarray
    cost: int


def step_size(scheme: AdaptiveScheme, dist: float, inside: bool = True) -> float:
    """Step length from the current boundary distance.

    Ties go to the smaller step (the threshold comparisons are strict on the
    large-step side). States outside the domain take the smallest class; the
    driver never extends a path past its exit, so this only matters for
    callers stepping in the exterior.
    """
    classes = scheme.step_classes
    if not inside:
        return classes[-1]
    if dist > scheme.delta1:
        return classes[0]
    if scheme.order == 1:
        return classes[1]
    return classes[1] if dist > scheme.delta2 else classes[2]


def step_budget(scheme: AdaptiveScheme, T: float) -> int:
    """Hard cap on steps per path: 10 T / h^2 (order 1) or 10 T / h^3."""
    exponent = 2 if scheme.order == 1 else 3
    return int(math.ceil(10.0 * T / scheme.h ** exponent))


def simulate_exit(
    model: SdeModel,
    domain: Domain,
    scheme: AdaptiveScheme,
    T: float,
    rng: RngStream,
    record_trace: bool = False,
):
    """Run one adaptive path until it exits the domain or reaches the cutoff.

    Returns an ExitSample, or (ExitSample, trace) when ``record_trace`` is
    set; the trace lists (t, state, dt, dist) per executed step.
    """
    if T <= 0.0:
        raise ValueError("T must be positive")
    step = milstein_step if scheme.order == 1 else taylor15_step
    model.requires(scheme.order)
    classes = scheme.step_classes
    budget = step_budget(scheme, T)
    m = model.dim_noise

    x = model.x0.copy()
    t = 0.0
    counts = np.zeros(3, dtype=np.int64)
    trace = [] if record_trace else None

    while True:
        if not domain.contains(x):
            sample = ExitSample(min(t, T), x, t <= T, counts, int(counts.sum()))
            break
        if t >= T:
            sample = ExitSample(T, x, False, counts, int(counts.sum()))
            break
        if counts.sum() >= budget:
            raise StepBudgetError(
                f"path exceeded the step budget of {budget} "
                f"(order {scheme.order}, h={scheme.h})",
                path_index=rng.path_index,
            )
        dist = domain.distance(x)
        dt = step_size(scheme, dist)
        inc = sample_increment(rng, dt, scheme.order, m)
        x = step(model, StepInput(state=x, noise=inc, dt=dt))
        t += dt
        counts[classes.index(dt)] += 1
        if record_trace:
            trace.append((t, x.copy(), dt, dist))

    if record_trace:
        return sample, trace
    return sample
