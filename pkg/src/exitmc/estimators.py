"""Monte Carlo estimators for exit times, level errors and cost scaling.

All estimators are deterministic functions of their arguments including the
seed: every path writes into its own output slot and reductions use numpy's
pairwise summation, so the results do not depend on the worker count. Worker
counts only set the numba thread pool size.

Independence across levels / grid entries comes from disjoint path-index
blocks: path_index = tag * 2^40 + i, with tag 0 for single runs, 20000 + l
for the coupled pair whose fine member is level l, and 10000 + k for the k-th
entry of a cost grid.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .adaptive import AdaptiveScheme, simulate_exit
from .coupling import simulate_coupled
from .domains import Domain
from .kernels import kernel_supported, run_coupled_batch, run_exit_batch
from .models import SdeModel
from .rng import RngStream

__all__ = [
    "McResult",
    "RateFit",
    "MeanExitResult",
    "LevelErrorResult",
    "WeakErrorResult",
    "CostResult",
    "set_workers",
    "estimate_mean_exit",
    "estimate_strong_error",
    "estimate_weak_error",
    "estimate_level_errors",
    "estimate_cost",
    "sample_exits",
    "sample_coupled",
]

_STREAM_BLOCK = 2**40
_TAG_SINGLE = 0
_TAG_COST = 10_000
_TAG_PAIR = 20_000
_PYTHON_ENGINE_WARN = 20_000


@dataclass(frozen=True)
class McResult:
    """Sample mean with its standard error (sample std / sqrt(M))."""

    estimate: float
    std_error: float
    sample_count: int


@dataclass(frozen=True)
class RateFit:
    """Least-squares slope of log2(value) against -level."""

    slope: float
    intercept: float
    levels: tuple[int, ...]
    values: tuple[float, ...]
    residual_norm: float


@dataclass(frozen=True)
class MeanExitResult:
    mean_exit: McResult
    mean_cost: McResult
    steps_by_class: np.ndarray
    exited_fraction: float


@dataclass(frozen=True)
class LevelErrorResult:
    """Coupled strong-error estimates E|nu_l - nu_(l-1)| per level pair."""

    order: float
    levels: tuple[int, ...]          # fine level of each pair
    results: tuple[McResult, ...]
    fit: RateFit | None
    mean_pair_cost: tuple[float, ...]


@dataclass(frozen=True)
class WeakErrorResult:
    """Coupled |E[nu_l - nu_(l-1)]| and, given a reference, |ref - mean nu_l|."""

    order: float
    levels: tuple[int, ...]          # fine level of each pair
    coupled: tuple[McResult, ...]
    coupled_fit: RateFit | None
    reference: float | None
    marginal_levels: tuple[int, ...]
    marginal_means: tuple[McResult, ...]
    absolute: tuple[float, ...] | None
    absolute_fit: RateFit | None


@dataclass(frozen=True)
class CostResult:
    order: float
    h_values: tuple[float, ...]
    results: tuple[McResult, ...]
    ratios: tuple[float, ...]        # cost(h_(k+1)) / cost(h_k)
    model_coefficient: float         # c in cost ~ c * h^-1 log(1/h)
    r_squared: float


def set_workers(workers: int | None) -> int:
    """Set the numba thread pool size (clamped to the launch-time maximum)."""
    import numba

    if workers is None:
        return numba.get_num_threads()
    n = max(1, min(int(workers), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n


def _mc(values: np.ndarray) -> McResult:
    m = values.shape[0]
    if m < 2:
        return McResult(float(values.mean()), 0.0, m)
    return McResult(
        float(values.mean()),
        float(values.std(ddof=1) / math.sqrt(m)),
        m,
    )


def fit_rate(levels, values) -> RateFit:
    x = -np.asarray(levels, dtype=np.float64)
    y = np.log2(np.asarray(values, dtype=np.float64))
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.linalg.norm(y - (slope * x + intercept)))
    return RateFit(
        slope=float(slope),
        intercept=float(intercept),
        levels=tuple(int(l) for l in levels),
        values=tuple(float(v) for v in values),
        residual_norm=resid,
    )


def _warn_python_engine(model: SdeModel, M: int) -> None:
    if M > _PYTHON_ENGINE_WARN:
        warnings.warn(
            f"model {model.name!r} has no compiled kernel; simulating "
            f"{M} paths through the generic engine will be slow",
            stacklevel=3,
        )


def sample_exits(model: SdeModel, domain: Domain, scheme: AdaptiveScheme,
                 T: float, M: int, seed: int, stream_tag: int = _TAG_SINGLE) -> dict:
    """Per-path exit arrays for M independent paths (kernel when available)."""
    if M >= _STREAM_BLOCK:
        raise ValueError(f"M must be below {_STREAM_BLOCK}")
    base = stream_tag * _STREAM_BLOCK
    if kernel_supported(model, domain):
        return run_exit_batch(model, domain, scheme, T, M, seed, base)
    _warn_python_engine(model, M)
    nu = np.empty(M)
    exited = np.empty(M, dtype=np.bool_)
    steps = np.empty((M, 3), dtype=np.int64)
    exit_state = np.empty((M, model.dim_state))
    for i in range(M):
        s = simulate_exit(model, domain, scheme, T, RngStream(seed, base + i))
        nu[i] = s.nu
        exited[i] = s.exited
        steps[i] = s.steps_by_class
        exit_state[i] = s.exit_state
    return {"nu": nu, "exit_state": exit_state, "exited": exited,
            "steps": steps, "cost": steps.sum(axis=1)}


def sample_coupled(model: SdeModel, domain: Domain,
                   scheme_fine: AdaptiveScheme, scheme_coarse: AdaptiveScheme,
                   T: float, M: int, seed: int, stream_tag: int) -> dict:
    """Per-pair arrays for M coupled (fine, coarse) simulations."""
    if M >= _STREAM_BLOCK:
        raise ValueError(f"M must be below {_STREAM_BLOCK}")
    base = stream_tag * _STREAM_BLOCK
    if kernel_supported(model, domain):
        return run_coupled_batch(model, domain, scheme_fine, scheme_coarse,
                                 T, M, seed, base)
    _warn_python_engine(model, M)
    nuf = np.empty(M)
    nuc = np.empty(M)
    costf = np.empty(M, dtype=np.int64)
    costc = np.empty(M, dtype=np.int64)
    exf = np.empty(M, dtype=np.bool_)
    exc = np.empty(M, dtype=np.bool_)
    for i in range(M):
        pair = simulate_coupled(model, domain, scheme_fine, scheme_coarse, T,
                                RngStream(seed, base + i))
        nuf[i] = pair.nu_fine
        nuc[i] = pair.nu_coarse
        costf[i] = pair.cost_fine
        costc[i] = pair.cost_coarse
        exf[i] = pair.exited_fine
        exc[i] = pair.exited_coarse
    return {"nu_fine": nuf, "nu_coarse": nuc, "cost_fine": costf,
            "cost_coarse": costc, "exited_fine": exf, "exited_coarse": exc}


def estimate_mean_exit(model: SdeModel, domain: Domain, scheme: AdaptiveScheme,
                       T: float, M: int, seed: int,
                       workers: int | None = None) -> MeanExitResult:
    """Mean exit time (and cost statistics) over M independent paths."""
    if M < 1:
        raise ValueError("M must be at least 1")
    set_workers(workers)
    data = sample_exits(model, domain, scheme, T, M, seed)
    return MeanExitResult(
        mean_exit=_mc(data["nu"]),
        mean_cost=_mc(data["cost"].astype(np.float64)),
        steps_by_class=data["steps"].sum(axis=0),
        exited_fraction=float(data["exited"].mean()),
    )


def _check_levels(levels) -> tuple[int, ...]:
    ls = tuple(int(l) for l in levels)
    if len(ls) < 2:
        raise ValueError("need at least two levels for coupled differences")
    if any(b - a != 1 for a, b in zip(ls, ls[1:])):
        raise ValueError(f"levels must be consecutive integers, got {ls}")
    return ls


def estimate_level_errors(model: SdeModel, domain: Domain, order: float,
                          levels, T: float, M: int, seed: int,
                          reference: float | None = None,
                          workers: int | None = None,
                          wiener_special: bool = False,
                          ) -> tuple[LevelErrorResult, WeakErrorResult]:
    """One coupled pass per level pair, serving both strong and weak errors.

    The per-level marginal means reuse the coupled members (their marginal
    law equals an uncoupled run): level l comes from the fine member of pair
    l, the lowest level from the coarse member of the first pair.
    """
    if M < 100:
        raise ValueError("level-difference estimates need M >= 100")
    ls = _check_levels(levels)
    set_workers(workers)

    strong: list[McResult] = []
    weak: list[McResult] = []
    pair_costs: list[float] = []
    marg_levels: list[int] = []
    marg_means: list[McResult] = []
    for l in ls[1:]:
        fine = AdaptiveScheme.for_model(model, order, 2.0 ** -l,
                                        wiener_special=wiener_special)
        coarse = AdaptiveScheme.for_model(model, order, 2.0 ** -(l - 1),
                                          wiener_special=wiener_special)
        data = sample_coupled(model, domain, fine, coarse, T, M, seed,
                              stream_tag=_TAG_PAIR + l)
        diff = data["nu_fine"] - data["nu_coarse"]
        strong.append(_mc(np.abs(diff)))
        mean_diff = _mc(diff)
        weak.append(McResult(abs(mean_diff.estimate), mean_diff.std_error, M))
        pair_costs.append(float(data["cost_fine"].mean() + data["cost_coarse"].mean()))
        if l == ls[1]:
            marg_levels.append(ls[0])
            marg_means.append(_mc(data["nu_coarse"]))
        marg_levels.append(l)
        marg_means.append(_mc(data["nu_fine"]))

    pair_levels = ls[1:]
    strong_fit = fit_rate(pair_levels, [r.estimate for r in strong])
    weak_vals = [r.estimate for r in weak]
    weak_fit = fit_rate(pair_levels, weak_vals) if min(weak_vals) > 0 else None

    absolute = None
    absolute_fit = None
    if reference is not None:
        absolute = tuple(abs(reference - r.estimate) for r in marg_means)
        if min(absolute) > 0:
            absolute_fit = fit_rate(marg_levels, absolute)

    strong_res = LevelErrorResult(
        order=order,
        levels=pair_levels,
        results=tuple(strong),
        fit=strong_fit,
        mean_pair_cost=tuple(pair_costs),
    )
    weak_res = WeakErrorResult(
        order=order,
        levels=pair_levels,
        coupled=tuple(weak),
        coupled_fit=weak_fit,
        reference=reference,
        marginal_levels=tuple(marg_levels),
        marginal_means=tuple(marg_means),
        absolute=absolute,
        absolute_fit=absolute_fit,
    )
    return strong_res, weak_res


def estimate_strong_error(model: SdeModel, domain: Domain, order: float,
                          levels, T: float, M: int, seed: int,
                          workers: int | None = None) -> LevelErrorResult:
    """Coupled E|nu_l - nu_(l-1)| across consecutive levels, with rate fit."""
    strong, _ = estimate_level_errors(model, domain, order, levels, T, M, seed,
                                      workers=workers)
    return strong


def estimate_weak_error(model: SdeModel, domain: Domain, order: float,
                        levels, T: float, M: int, seed: int,
                        reference: float | None = None,
                        workers: int | None = None) -> WeakErrorResult:
    """Coupled |E[nu_l - nu_(l-1)]| and, with a reference, |ref - mean nu_l|."""
    _, weak = estimate_level_errors(model, domain, order, levels, T, M, seed,
                                    reference=reference, workers=workers)
    return weak


def estimate_cost(model: SdeModel, domain: Domain, order: float, h_list,
                  T: float, M: int, seed: int,
                  workers: int | None = None,
                  wiener_special: bool = False) -> CostResult:
    """Mean step counts over an h grid, adjacent ratios, and the scaling fit.

    The fitted model curve is cost = c * h^-1 log(1/h) (single coefficient,
    least squares); r_squared is reported against the sample means.
    """
    hs = tuple(float(h) for h in h_list)
    if len(hs) == 0:
        raise ValueError("h_list must not be empty")
    if M < 1:
        raise ValueError("M must be at least 1")
    set_workers(workers)
    results = []
    for k, h in enumerate(hs):
        scheme = AdaptiveScheme.for_model(model, order, h,
                                          wiener_special=wiener_special)
        data = sample_exits(model, domain, scheme, T, M, seed,
                            stream_tag=_TAG_COST + k)
        results.append(_mc(data["cost"].astype(np.float64)))
    means = np.array([r.estimate for r in results])
    ratios = tuple(float(means[k + 1] / means[k]) for k in range(len(hs) - 1))
    f = np.array([math.log(1.0 / h) / h for h in hs])
    coeff = float(f @ means / (f @ f))
    ss_res = float(np.sum((means - coeff * f) ** 2))
    ss_tot = float(np.sum((means - means.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return CostResult(
        order=order,
        h_values=hs,
        results=tuple(results),
        ratios=ratios,
        model_coefficient=coeff,
        r_squared=r2,
    )
