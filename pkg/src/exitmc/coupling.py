"""Pairwise coupling of two adaptive paths on one Brownian path.

The two members (different step parameters, or different orders) have
non-nested meshes, so the driving noise is generated forward in time on the
union of the two meshes. Each member accumulates the segment increments over
its current step; the time-integrated component composes exactly via

    dz(s, t) = dz(s, r) + dz(r, t) + (t - r) dw(s, r),

an algebraic identity of the iterated integral; dw is plain additive. When
the members' next mesh points coincide, a single shared segment is drawn, so
the driving path stays single-valued. Segments always carry (dw, dz); an
order-1 member simply ignores dz, which is what makes cross-order coupling
work on the same stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .adaptive import AdaptiveScheme, StepBudgetError, step_budget, step_size
from .domains import Domain
from .integrators import StepInput, milstein_step, taylor15_step
from .models import SdeModel
from .rng import NoiseIncrement, RngStream

__all__ = [
    "BrownianSegment",
    "CoupledExitPair",
    "compose_segments",
    "simulate_coupled",
]

_INV_SQRT3 = 1.0 / math.sqrt(3.0)


@dataclass(frozen=True)
class BrownianSegment:
    """Increments of one Brownian path over the interval (start, end]."""

    start: float
    end: float
    dw: np.ndarray
    dz: np.ndarray

    @property
    def length(self) -> float:
        return self.end - self.start


def compose_segments(first: BrownianSegment, second: BrownianSegment) -> BrownianSegment:
    """Merge two adjacent segments of the same path into one."""
    if second.start != first.end:
        raise ValueError(
            f"segments are not adjacent: ({first.start}, {first.end}] then "
            f"({second.start}, {second.end}]"
        )
    s = second.length
    return BrownianSegment(
        start=first.start,
        end=second.end,
        dw=first.dw + second.dw,
        dz=first.dz + second.dz + s * first.dw,
    )


@dataclass(frozen=True)
class CoupledExitPair:
    """Exit times and costs of a coupled (fine, coarse) pair."""

    nu_fine: float
    nu_coarse: float
    cost_fine: int
    cost_coarse: int
    exited_fine: bool
    exited_coarse: bool

    @property
    def diff(self) -> float:
        return self.nu_fine - self.nu_coarse

    @property
    def abs_diff(self) -> float:
        return abs(self.diff)


class _Member:
    """One path of the pair: scheme, clock, state, accumulators, ledger."""

    def __init__(self, model, domain, scheme, T, budget):
        self.model = model
        self.domain = domain
        self.scheme = scheme
        self.T = T
        self.budget = budget
        self.step = milstein_step if scheme.order == 1 else taylor15_step
        self.classes = scheme.step_classes
        self.x = model.x0.copy()
        self.t = 0.0
        self.acc_dw = np.zeros(model.dim_noise)
        self.acc_dz = np.zeros(model.dim_noise)
        self.counts = np.zeros(3, dtype=np.int64)
        self.active = True
        self.nu = T
        self.exited = False
        if not domain.contains(self.x):
            self.active = False
            self.nu = 0.0
            self.exited = True

    def next_time(self) -> float:
        dt = step_size(self.scheme, self.domain.distance(self.x))
        return self.t + dt

    def absorb(self, dw: np.ndarray, dz: np.ndarray, s: float) -> None:
        self.acc_dz += dz + s * self.acc_dw
        self.acc_dw += dw

    def advance(self, t_new: float, path_index: int) -> None:
        dt = t_new - self.t
        noise = NoiseIncrement(
            dw=self.acc_dw.copy(),
            dz=self.acc_dz.copy() if self.scheme.order == 1.5 else None,
            dt=dt,
        )
        self.x = self.step(self.model, StepInput(state=self.x, noise=noise, dt=dt))
        self.t = t_new
        self.acc_dw[:] = 0.0
        self.acc_dz[:] = 0.0
        self.counts[self.classes.index(dt)] += 1
        if self.counts.sum() > self.budget:
            raise StepBudgetError(
                f"coupled member exceeded the step budget of {self.budget}",
                path_index=path_index,
            )
        if not self.domain.contains(self.x):
            self.active = False
            self.nu = min(self.t, self.T)
            self.exited = self.t <= self.T
        elif self.t >= self.T:
            self.active = False
            self.nu = self.T
            self.exited = False


def simulate_coupled(
    model: SdeModel,
    domain: Domain,
    scheme_fine: AdaptiveScheme,
    scheme_coarse: AdaptiveScheme,
    T: float,
    rng: RngStream,
    record_trace: bool = False,
):
    """Drive two adaptive paths with one Brownian path; return both exits.

    ``scheme_fine.h <= scheme_coarse.h``; equal schemes give diff == 0
    exactly (identical meshes consume identical increments). With
    ``record_trace`` the drawn union-mesh segments and each member's
    consumed per-step segments are returned as well.
    """
    if T <= 0.0:
        raise ValueError("T must be positive")
    if scheme_fine.h > scheme_coarse.h:
        raise ValueError("scheme_fine must have the smaller step parameter")
    model.requires(scheme_fine.order)
    model.requires(scheme_coarse.order)
    m = model.dim_noise

    fine = _Member(model, domain, scheme_fine, T, step_budget(scheme_fine, T))
    coarse = _Member(model, domain, scheme_coarse, T, step_budget(scheme_coarse, T))
    t_w = 0.0
    segments: list[BrownianSegment] = []
    consumed = {"fine": [], "coarse": []}

    while fine.active or coarse.active:
        e_f = fine.next_time() if fine.active else math.inf
        e_c = coarse.next_time() if coarse.active else math.inf
        t_next = min(e_f, e_c)
        s = t_next - t_w
        if s > 0.0:
            sq = math.sqrt(s)
            dw = np.empty(m)
            dz = np.empty(m)
            for j in range(m):
                u1 = rng.normal()
                u2 = rng.normal()
                dw[j] = u1 * sq
                dz[j] = 0.5 * s * sq * (u1 + u2 * _INV_SQRT3)
            if fine.active:
                fine.absorb(dw, dz, s)
            if coarse.active:
                coarse.absorb(dw, dz, s)
            if record_trace:
                segments.append(BrownianSegment(t_w, t_next, dw, dz))
            t_w = t_next
        if fine.active and e_f == t_next:
            if record_trace:
                consumed["fine"].append(
                    BrownianSegment(fine.t, t_next, fine.acc_dw.copy(), fine.acc_dz.copy())
                )
            fine.advance(t_next, rng.path_index)
        if coarse.active and e_c == t_next:
            if record_trace:
                consumed["coarse"].append(
                    BrownianSegment(coarse.t, t_next, coarse.acc_dw.copy(), coarse.acc_dz.copy())
                )
            coarse.advance(t_next, rng.path_index)

    pair = CoupledExitPair(
        nu_fine=fine.nu,
        nu_coarse=coarse.nu,
        cost_fine=int(fine.counts.sum()),
        cost_coarse=int(coarse.counts.sum()),
        exited_fine=fine.exited,
        exited_coarse=coarse.exited,
    )
    if record_trace:
        return pair, segments, consumed
    return pair
