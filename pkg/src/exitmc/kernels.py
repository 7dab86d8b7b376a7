"""Compiled batch engine for the preset coefficient families.

Each path owns a Philox4x64-10 stream keyed by (seed, path_index); the
implementation matches numpy.random.Philox bit-for-bit (numpy advances the
counter before producing a block, so block i uses counter word i+1). Raw
words map to normals through the same Box-Muller expressions the Python-side
RngStream uses, and every arithmetic expression below mirrors the generic
drivers in exitmc.adaptive / exitmc.coupling term for term, so kernel and
Python engines produce identical paths for identical (seed, path_index).

Results are written into per-path output slots, which makes every estimate
independent of thread count and scheduling.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, prange, uint64

from .adaptive import AdaptiveScheme, StepBudgetError, step_budget
from .domains import Domain
from .models import (
    KERNEL_AFFINE_1D,
    KERNEL_COSINE_1D,
    KERNEL_COSINE_2D,
    KERNEL_CROSS_2D,
    SdeModel,
)

__all__ = [
    "KernelUnavailable",
    "kernel_supported",
    "run_exit_batch",
    "run_coupled_batch",
    "run_endpoint_batch",
    "philox_raw_block",
]

_M0 = uint64(0xD2E7470EE14C6C93)
_M1 = uint64(0xCA5A826395121157)
_W0 = uint64(0x9E3779B97F4A7C15)
_W1 = uint64(0xBB67AE8584CAA73B)
_TWO_NEG53 = 2.0 ** -53
_TWO_PI = 2.0 * math.pi
_INV_SQRT3 = 1.0 / math.sqrt(3.0)


class KernelUnavailable(RuntimeError):
    """The model/domain combination has no compiled fast path."""


# ---------------------------------------------------------------------------
# Philox4x64-10 and the normal stream
# ---------------------------------------------------------------------------

@njit(inline="always", cache=True)
def _mulhi64(a, b):
    a_lo = a & uint64(0xFFFFFFFF)
    a_hi = a >> uint64(32)
    b_lo = b & uint64(0xFFFFFFFF)
    b_hi = b >> uint64(32)
    t = a_lo * b_lo
    w1 = a_hi * b_lo + (t >> uint64(32))
    t2 = a_lo * b_hi + (w1 & uint64(0xFFFFFFFF))
    return a_hi * b_hi + (w1 >> uint64(32)) + (t2 >> uint64(32))


@njit(inline="always", cache=True)
def _philox4(c0, k0, k1):
    x0 = c0
    x1 = uint64(0)
    x2 = uint64(0)
    x3 = uint64(0)
    kk0 = k0
    kk1 = k1
    for _ in range(10):
        hi0 = _mulhi64(_M0, x0)
        lo0 = _M0 * x0
        hi1 = _mulhi64(_M1, x2)
        lo1 = _M1 * x2
        y0 = hi1 ^ x1 ^ kk0
        y2 = hi0 ^ x3 ^ kk1
        x0 = y0
        x1 = lo1
        x2 = y2
        x3 = lo0
        kk0 += _W0
        kk1 += _W1
    return x0, x1, x2, x3


@njit(inline="always", cache=True)
def _fill_normals(blk, k0, k1, buf):
    # numpy's Philox produces block i from counter i+1
    r0, r1, r2, r3 = _philox4(blk + uint64(1), k0, k1)
    u0 = (float(r0 >> uint64(11)) + 1.0) * _TWO_NEG53
    u1 = float(r1 >> uint64(11)) * _TWO_NEG53
    rad = np.sqrt(-2.0 * np.log(u0))
    ang = _TWO_PI * u1
    buf[0] = rad * np.cos(ang)
    buf[1] = rad * np.sin(ang)
    u2 = (float(r2 >> uint64(11)) + 1.0) * _TWO_NEG53
    u3 = float(r3 >> uint64(11)) * _TWO_NEG53
    rad2 = np.sqrt(-2.0 * np.log(u2))
    ang2 = _TWO_PI * u3
    buf[2] = rad2 * np.cos(ang2)
    buf[3] = rad2 * np.sin(ang2)


@njit(inline="always", cache=True)
def _next_normal(buf, pos, blk, k0, k1):
    if pos == 4:
        _fill_normals(blk, k0, k1, buf)
        blk += uint64(1)
        pos = 0
    z = buf[pos]
    pos += 1
    return z, pos, blk


@njit(cache=True)
def _philox_raw_block(seed, path_index, blk):
    out = np.empty(4, dtype=np.uint64)
    r0, r1, r2, r3 = _philox4(uint64(blk) + uint64(1), uint64(seed), uint64(path_index))
    out[0] = r0
    out[1] = r1
    out[2] = r2
    out[3] = r3
    return out


def philox_raw_block(seed: int, path_index: int, block: int) -> np.ndarray:
    """Raw 4-word Philox block as the kernels consume it (for validation)."""
    return _philox_raw_block(
        np.uint64(seed), np.uint64(path_index), np.uint64(block)
    )


# ---------------------------------------------------------------------------
# Coefficient families and one-step maps (scalarized)
# ---------------------------------------------------------------------------

@njit(inline="always", cache=True)
def _coef_1d(family, p0, p1, p2, p3, x):
    # returns a, a', a'', b, b', b''
    if family == 0:
        return p0 + p1 * x, p1, 0.0, p2 + p3 * x, p3, 0.0
    c = np.cos(x)
    return p0 * x, p0, 0.0, p1 * (c + p2), -p1 * np.sin(x), -p1 * c


@njit(inline="always", cache=True)
def _step_1d_o1(family, p0, p1, p2, p3, x, dt, dw):
    a, ap, app, b, bp, bpp = _coef_1d(family, p0, p1, p2, p3, x)
    lb = b * bp
    ii = 0.5 * (dw * dw - dt)
    return x + a * dt + b * dw + lb * ii


@njit(inline="always", cache=True)
def _step_1d_o15(family, p0, p1, p2, p3, x, dt, dw, dz):
    a, ap, app, b, bp, bpp = _coef_1d(family, p0, p1, p2, p3, x)
    bb = b * b
    l0a = a * ap + 0.5 * (bb * app)
    l0b = a * bp + 0.5 * (bb * bpp)
    lib = b * bp
    lia = b * ap
    lilib = b * (bp * bp + b * bpp)
    return (
        x
        + a * dt
        + b * dw
        + 0.5 * l0a * dt * dt
        + 0.5 * lib * (dw * dw - dt)
        + l0b * (dw * dt - dz)
        + lia * dz
        + 0.5 * lilib * (dw * dw / 3.0 - dt) * dw
    )


@njit(inline="always", cache=True)
def _coef_2d(family, p0, p1, p2, x_self, x_other):
    # cross drift a_i = p0 * x_other, diagonal diffusion b_ii = f(x_i);
    # returns a_i, f, f', f''
    if family == 2:
        return p0 * x_other, p1 * x_self, p1, 0.0
    c = np.cos(x_self)
    return p0 * x_other, p1 * (c + p2), -p1 * np.sin(x_self), -p1 * c


@njit(inline="always", cache=True)
def _step_2d_o1(family, p0, p1, p2, x_self, x_other, dt, dw):
    a, f, fp, fpp = _coef_2d(family, p0, p1, p2, x_self, x_other)
    lb = f * fp
    ii = 0.5 * (dw * dw - dt)
    return x_self + a * dt + f * dw + lb * ii


@njit(inline="always", cache=True)
def _step_2d_o15(family, p0, p1, p2, x_self, x_other, dt, dw, dz):
    a, f, fp, fpp = _coef_2d(family, p0, p1, p2, x_self, x_other)
    a_other = p0 * x_self
    l0a = a_other * p0  # cross drift: only the off-diagonal jacobian entry survives
    bb = f * f
    l0b = a * fp + 0.5 * (bb * fpp)
    lib = f * fp
    lia = 0.0  # a_i does not depend on x_i for the cross-drift families
    lilib = f * (fp * fp + f * fpp)
    return (
        x_self
        + a * dt
        + f * dw
        + 0.5 * l0a * dt * dt
        + 0.5 * lib * (dw * dw - dt)
        + l0b * (dw * dt - dz)
        + lia * dz
        + 0.5 * lilib * (dw * dw / 3.0 - dt) * dw
    )


@njit(inline="always", cache=True)
def _dt_select(order15, dist, d1, d2, h1, h2, h3):
    # returns (dt, class index); ties at the thresholds take the smaller step
    if dist > d1:
        return h1, 0
    if not order15:
        return h2, 1
    if dist > d2:
        return h2, 1
    return h3, 2


# ---------------------------------------------------------------------------
# Exit-time batches
# ---------------------------------------------------------------------------

@njit(parallel=True, cache=True)
def _exit_batch_1d(family, p0, p1, p2, p3, order15, h, d1, d2,
                   lo, hi, x0, T, seed, stream_base, budget,
                   nu, xout, exited, steps, status):
    h1 = h
    h2 = h * h
    h3 = h2 * h
    sq1 = np.sqrt(h1)
    sq2 = np.sqrt(h2)
    sq3 = np.sqrt(h3)
    hf1 = 0.5 * h1 * sq1
    hf2 = 0.5 * h2 * sq2
    hf3 = 0.5 * h3 * sq3
    k0 = uint64(seed)
    for p in prange(nu.shape[0]):
        k1 = uint64(stream_base) + uint64(p)
        buf = np.empty(4)
        pos = 4
        blk = uint64(0)
        x = x0
        t = 0.0
        n1 = 0
        n2 = 0
        n3 = 0
        st = np.uint8(0)
        while True:
            if not (lo < x < hi):
                nu[p] = min(t, T)
                exited[p] = t <= T
                break
            if t >= T:
                nu[p] = T
                exited[p] = False
                break
            if n1 + n2 + n3 >= budget:
                st = np.uint8(1)
                nu[p] = min(t, T)
                exited[p] = False
                break
            dist = x - lo
            alt = hi - x
            if alt < dist:
                dist = alt
            if dist > d1:
                dt = h1
                sq = sq1
                hf = hf1
                cls = 0
            elif (not order15) or dist > d2:
                dt = h2
                sq = sq2
                hf = hf2
                cls = 1
            else:
                dt = h3
                sq = sq3
                hf = hf3
                cls = 2
            if order15:
                u1, pos, blk = _next_normal(buf, pos, blk, k0, k1)
                u2, pos, blk = _next_normal(buf, pos, blk, k0, k1)
                dw = u1 * sq
                dz = hf * (u1 + u2 * _INV_SQRT3)
                x = _step_1d_o15(family, p0, p1, p2, p3, x, dt, dw, dz)
            else:
                z, pos, blk = _next_normal(buf, pos, blk, k0, k1)
                dw = z * sq
                x = _step_1d_o1(family, p0, p1, p2, p3, x, dt, dw)
            t += dt
            if cls == 0:
                n1 += 1
            elif cls == 1:
                n2 += 1
            else:
                n3 += 1
        xout[p] = x
        steps[p, 0] = n1
        steps[p, 1] = n2
        steps[p, 2] = n3
        status[p] = st


@njit(parallel=True, cache=True)
def _exit_batch_2d(family, p0, p1, p2, order15, h, d1, d2,
                   cx, cy, radius, x01, x02, T, seed, stream_base, budget,
                   nu, xout, exited, steps, status):
    h1 = h
    h2 = h * h
    h3 = h2 * h
    sq1 = np.sqrt(h1)
    sq2 = np.sqrt(h2)
    sq3 = np.sqrt(h3)
    hf1 = 0.5 * h1 * sq1
    hf2 = 0.5 * h2 * sq2
    hf3 = 0.5 * h3 * sq3
    k0 = uint64(seed)
    for p in prange(nu.shape[0]):
        k1 = uint64(stream_base) + uint64(p)
        buf = np.empty(4)
        pos = 4
        blk = uint64(0)
        x1 = x01
        x2 = x02
        t = 0.0
        n1 = 0
        n2 = 0
        n3 = 0
        st = np.uint8(0)
        while True:
            rho = np.sqrt((x1 - cx) ** 2 + (x2 - cy) ** 2)
            if not rho < radius:
                nu[p] = min(t, T)
                exited[p] = t <= T
                break
            if t >= T:
                nu[p] = T
                exited[p] = False
                break
            if n1 + n2 + n3 >= budget:
                st = np.uint8(1)
                nu[p] = min(t, T)
                exited[p] = False
                break
            dist = radius - rho
            if dist < 0.0:
                dist = -dist
            if dist > d1:
                dt = h1
                sq = sq1
                hf = hf1
                cls = 0
            elif (not order15) or dist > d2:
                dt = h2
                sq = sq2
                hf = hf2
                cls = 1
            else:
                dt = h3
                sq = sq3
                hf = hf3
                cls = 2
            if order15:
                u1, pos, blk = _next_normal(buf, pos, blk, k0, k1)
                u2, pos, blk = _next_normal(buf, pos, blk, k0, k1)
                dw1 = u1 * sq
                dz1 = hf * (u1 + u2 * _INV_SQRT3)
                u1b, pos, blk = _next_normal(buf, pos, blk, k0, k1)
                u2b, pos, blk = _next_normal(buf, pos, blk, k0, k1)
                dw2 = u1b * sq
                dz2 = hf * (u1b + u2b * _INV_SQRT3)
                xn1 = _step_2d_o15(family, p0, p1, p2, x1, x2, dt, dw1, dz1)
                xn2 = _step_2d_o15(family, p0, p1, p2, x2, x1, dt, dw2, dz2)
            else:
                z1, pos, blk = _next_normal(buf, pos, blk, k0, k1)
                z2, pos, blk = _next_normal(buf, pos, blk, k0, k1)
                dw1 = z1 * sq
                dw2 = z2 * sq
                xn1 = _step_2d_o1(family, p0, p1, p2, x1, x2, dt, dw1)
                xn2 = _step_2d_o1(family, p0, p1, p2, x2, x1, dt, dw2)
            x1 = xn1
            x2 = xn2
            t += dt
            if cls == 0:
                n1 += 1
            elif cls == 1:
                n2 += 1
            else:
                n3 += 1
        xout[p, 0] = x1
        xout[p, 1] = x2
        steps[p, 0] = n1
        steps[p, 1] = n2
        steps[p, 2] = n3
        status[p] = st


# ---------------------------------------------------------------------------
# Coupled pairs on the union mesh
# ---------------------------------------------------------------------------

@njit(inline="always", cache=True)
def _dist_interval(x, lo, hi):
    d = x - lo
    alt = hi - x
    if alt < d:
        d = alt
    return d


@njit(parallel=True, cache=True)
def _coupled_batch_1d(family, p0, p1, p2, p3,
                      o15f, hf, d1f, d2f, o15c, hc, d1c, d2c,
                      lo, hi, x0, T, seed, stream_base, budget_f, budget_c,
                      nuf, nuc, costf, costc, exf, exc, status):
    k0 = uint64(seed)
    hf2 = hf * hf
    hf3 = hf2 * hf
    hc2 = hc * hc
    hc3 = hc2 * hc
    for p in prange(nuf.shape[0]):
        k1 = uint64(stream_base) + uint64(p)
        buf = np.empty(4)
        pos = 4
        blk = uint64(0)
        xf = x0
        xc = x0
        tf = 0.0
        tc = 0.0
        tw = 0.0
        awf = 0.0
        azf = 0.0
        awc = 0.0
        azc = 0.0
        nf = 0
        nc = 0
        st = np.uint8(0)
        active_f = lo < x0 < hi
        active_c = active_f
        rnf = T
        rnc = T
        ref = False
        rec = False
        if not active_f:
            rnf = 0.0
            rnc = 0.0
            ref = True
            rec = True
        while active_f or active_c:
            ef = np.inf
            ec = np.inf
            if active_f:
                dtf, _ = _dt_select(o15f, _dist_interval(xf, lo, hi), d1f, d2f,
                                    hf, hf2, hf3)
                ef = tf + dtf
            if active_c:
                dtc, _ = _dt_select(o15c, _dist_interval(xc, lo, hi), d1c, d2c,
                                    hc, hc2, hc3)
                ec = tc + dtc
            tn = ef if ef < ec else ec
            s = tn - tw
            if s > 0.0:
                sq = np.sqrt(s)
                u1, pos, blk = _next_normal(buf, pos, blk, k0, k1)
                u2, pos, blk = _next_normal(buf, pos, blk, k0, k1)
                dws = u1 * sq
                dzs = 0.5 * s * sq * (u1 + u2 * _INV_SQRT3)
                if active_f:
                    azf += dzs + s * awf
                    awf += dws
                if active_c:
                    azc += dzs + s * awc
                    awc += dws
                tw = tn
            if active_f and ef == tn:
                dt = ef - tf
                if o15f:
                    xf = _step_1d_o15(family, p0, p1, p2, p3, xf, dt, awf, azf)
                else:
                    xf = _step_1d_o1(family, p0, p1, p2, p3, xf, dt, awf)
                tf = ef
                awf = 0.0
                azf = 0.0
                nf += 1
                if nf > budget_f:
                    st = np.uint8(1)
                    break
                if not (lo < xf < hi):
                    active_f = False
                    rnf = min(tf, T)
                    ref = tf <= T
                elif tf >= T:
                    active_f = False
                    rnf = T
                    ref = False
            if active_c and ec == tn:
                dt = ec - tc
                if o15c:
                    xc = _step_1d_o15(family, p0, p1, p2, p3, xc, dt, awc, azc)
                else:
                    xc = _step_1d_o1(family, p0, p1, p2, p3, xc, dt, awc)
                tc = ec
                awc = 0.0
                azc = 0.0
                nc += 1
                if nc > budget_c:
                    st = np.uint8(1)
                    break
                if not (lo < xc < hi):
                    active_c = False
                    rnc = min(tc, T)
                    rec = tc <= T
                elif tc >= T:
                    active_c = False
                    rnc = T
                    rec = False
        nuf[p] = rnf
        nuc[p] = rnc
        costf[p] = nf
        costc[p] = nc
        exf[p] = ref
        exc[p] = rec
        status[p] = st


@njit(parallel=True, cache=True)
def _coupled_batch_2d(family, p0, p1, p2,
                      o15f, hf, d1f, d2f, o15c, hc, d1c, d2c,
                      cx, cy, radius, x01, x02, T, seed, stream_base,
                      budget_f, budget_c,
                      nuf, nuc, costf, costc, exf, exc, status):
    k0 = uint64(seed)
    hf2 = hf * hf
    hf3 = hf2 * hf
    hc2 = hc * hc
    hc3 = hc2 * hc
    for p in prange(nuf.shape[0]):
        k1 = uint64(stream_base) + uint64(p)
        buf = np.empty(4)
        pos = 4
        blk = uint64(0)
        xf1 = x01
        xf2 = x02
        xc1 = x01
        xc2 = x02
        tf = 0.0
        tc = 0.0
        tw = 0.0
        awf1 = 0.0
        awf2 = 0.0
        azf1 = 0.0
        azf2 = 0.0
        awc1 = 0.0
        awc2 = 0.0
        azc1 = 0.0
        azc2 = 0.0
        nf = 0
        nc = 0
        st = np.uint8(0)
        rho0 = np.sqrt((x01 - cx) ** 2 + (x02 - cy) ** 2)
        active_f = rho0 < radius
        active_c = active_f
        rnf = T
        rnc = T
        ref = False
        rec = False
        if not active_f:
            rnf = 0.0
            rnc = 0.0
            ref = True
            rec = True
        while active_f or active_c:
            ef = np.inf
            ec = np.inf
            if active_f:
                rho = np.sqrt((xf1 - cx) ** 2 + (xf2 - cy) ** 2)
                dist = radius - rho
                if dist < 0.0:
                    dist = -dist
                dtf, _ = _dt_select(o15f, dist, d1f, d2f, hf, hf2, hf3)
                ef = tf + dtf
            if active_c:
                rho = np.sqrt((xc1 - cx) ** 2 + (xc2 - cy) ** 2)
                dist = radius - rho
                if dist < 0.0:
                    dist = -dist
                dtc, _ = _dt_select(o15c, dist, d1c, d2c, hc, hc2, hc3)
                ec = tc + dtc
            tn = ef if ef < ec else ec
            s = tn - tw
            if s > 0.0:
                sq = np.sqrt(s)
                u1, pos, blk = _next_normal(buf, pos, blk, k0, k1)
                u2, pos, blk = _next_normal(buf, pos, blk, k0, k1)
                dws1 = u1 * sq
                dzs1 = 0.5 * s * sq * (u1 + u2 * _INV_SQRT3)
                u1b, pos, blk = _next_normal(buf, pos, blk, k0, k1)
                u2b, pos, blk = _next_normal(buf, pos, blk, k0, k1)
                dws2 = u1b * sq
                dzs2 = 0.5 * s * sq * (u1b + u2b * _INV_SQRT3)
                if active_f:
                    azf1 += dzs1 + s * awf1
                    awf1 += dws1
                    azf2 += dzs2 + s * awf2
                    awf2 += dws2
                if active_c:
                    azc1 += dzs1 + s * awc1
                    awc1 += dws1
                    azc2 += dzs2 + s * awc2
                    awc2 += dws2
                tw = tn
            if active_f and ef == tn:
                dt = ef - tf
                if o15f:
                    y1 = _step_2d_o15(family, p0, p1, p2, xf1, xf2, dt, awf1, azf1)
                    y2 = _step_2d_o15(family, p0, p1, p2, xf2, xf1, dt, awf2, azf2)
                else:
                    y1 = _step_2d_o1(family, p0, p1, p2, xf1, xf2, dt, awf1)
                    y2 = _step_2d_o1(family, p0, p1, p2, xf2, xf1, dt, awf2)
                xf1 = y1
                xf2 = y2
                tf = ef
                awf1 = 0.0
                awf2 = 0.0
                azf1 = 0.0
                azf2 = 0.0
                nf += 1
                if nf > budget_f:
                    st = np.uint8(1)
                    break
                rho = np.sqrt((xf1 - cx) ** 2 + (xf2 - cy) ** 2)
                if not rho < radius:
                    active_f = False
                    rnf = min(tf, T)
                    ref = tf <= T
                elif tf >= T:
                    active_f = False
                    rnf = T
                    ref = False
            if active_c and ec == tn:
                dt = ec - tc
                if o15c:
                    y1 = _step_2d_o15(family, p0, p1, p2, xc1, xc2, dt, awc1, azc1)
                    y2 = _step_2d_o15(family, p0, p1, p2, xc2, xc1, dt, awc2, azc2)
                else:
                    y1 = _step_2d_o1(family, p0, p1, p2, xc1, xc2, dt, awc1)
                    y2 = _step_2d_o1(family, p0, p1, p2, xc2, xc1, dt, awc2)
                xc1 = y1
                xc2 = y2
                tc = ec
                awc1 = 0.0
                awc2 = 0.0
                azc1 = 0.0
                azc2 = 0.0
                nc += 1
                if nc > budget_c:
                    st = np.uint8(1)
                    break
                rho = np.sqrt((xc1 - cx) ** 2 + (xc2 - cy) ** 2)
                if not rho < radius:
                    active_c = False
                    rnc = min(tc, T)
                    rec = tc <= T
                elif tc >= T:
                    active_c = False
                    rnc = T
                    rec = False
        nuf[p] = rnf
        nuc[p] = rnc
        costf[p] = nf
        costc[p] = nc
        exf[p] = ref
        exc[p] = rec
        status[p] = st


# ---------------------------------------------------------------------------
# Uniform-mesh endpoint batches (scheme-state convergence studies)
# ---------------------------------------------------------------------------

@njit(parallel=True, cache=True)
def _endpoint_batch_1d(family, p0, p1, p2, p3, order15, h, n_steps, x0,
                       seed, stream_base, xT, wT):
    sq = np.sqrt(h)
    hf = 0.5 * h * sq
    k0 = uint64(seed)
    for p in prange(xT.shape[0]):
        k1 = uint64(stream_base) + uint64(p)
        buf = np.empty(4)
        pos = 4
        blk = uint64(0)
        x = x0
        w = 0.0
        for _ in range(n_steps):
            if order15:
                u1, pos, blk = _next_normal(buf, pos, blk, k0, k1)
                u2, pos, blk = _next_normal(buf, pos, blk, k0, k1)
                dw = u1 * sq
                dz = hf * (u1 + u2 * _INV_SQRT3)
                x = _step_1d_o15(family, p0, p1, p2, p3, x, h, dw, dz)
            else:
                z, pos, blk = _next_normal(buf, pos, blk, k0, k1)
                dw = z * sq
                x = _step_1d_o1(family, p0, p1, p2, p3, x, h, dw)
            w += dw
        xT[p] = x
        wT[p] = w


# ---------------------------------------------------------------------------
# Python-facing wrappers
# ---------------------------------------------------------------------------

def kernel_supported(model: SdeModel, domain: Domain) -> bool:
    if model.kernel is None:
        return False
    fam = model.kernel.family
    if fam in (KERNEL_AFFINE_1D, KERNEL_COSINE_1D):
        return domain.kind == "interval"
    if fam in (KERNEL_CROSS_2D, KERNEL_COSINE_2D):
        return domain.kind == "ball"
    return False


def _require_kernel(model: SdeModel, domain: Domain) -> None:
    if not kernel_supported(model, domain):
        raise KernelUnavailable(
            f"no compiled path for model {model.name!r} on a {domain.kind} domain"
        )


def _scheme_numbers(scheme: AdaptiveScheme) -> tuple[bool, float, float, float]:
    d2 = scheme.delta2 if scheme.delta2 is not None else -1.0
    return scheme.order == 1.5, scheme.h, scheme.delta1, d2


def run_exit_batch(model: SdeModel, domain: Domain, scheme: AdaptiveScheme,
                   T: float, M: int, seed: int, stream_base: int = 0) -> dict:
    """Simulate M independent adaptive exits; per-path outputs as arrays."""
    _require_kernel(model, domain)
    o15, h, d1, d2 = _scheme_numbers(scheme)
    budget = step_budget(scheme, T)
    nu = np.empty(M)
    exited = np.empty(M, dtype=np.bool_)
    steps = np.empty((M, 3), dtype=np.int64)
    status = np.empty(M, dtype=np.uint8)
    fam = model.kernel.family
    p = model.kernel.params
    if model.dim_state == 1:
        lo, hi = domain.params
        xout = np.empty(M)
        _exit_batch_1d(fam, p[0], p[1], p[2], p[3], o15, h, d1, d2,
                       lo, hi, float(model.x0[0]), T,
                       np.uint64(seed), np.uint64(stream_base), budget,
                       nu, xout, exited, steps, status)
        exit_state = xout.reshape(M, 1)
    else:
        cx, cy, radius = domain.params
        xout = np.empty((M, 2))
        _exit_batch_2d(fam, p[0], p[1], p[2], o15, h, d1, d2,
                       cx, cy, radius, float(model.x0[0]), float(model.x0[1]), T,
                       np.uint64(seed), np.uint64(stream_base), budget,
                       nu, xout, exited, steps, status)
        exit_state = xout
    _raise_on_budget(status, scheme)
    return {"nu": nu, "exit_state": exit_state, "exited": exited,
            "steps": steps, "cost": steps.sum(axis=1)}


def run_coupled_batch(model: SdeModel, domain: Domain,
                      scheme_fine: AdaptiveScheme, scheme_coarse: AdaptiveScheme,
                      T: float, M: int, seed: int, stream_base: int = 0) -> dict:
    """Simulate M coupled pairs on shared Brownian paths."""
    _require_kernel(model, domain)
    if scheme_fine.h > scheme_coarse.h:
        raise ValueError("scheme_fine must have the smaller step parameter")
    o15f, hf, d1f, d2f = _scheme_numbers(scheme_fine)
    o15c, hc, d1c, d2c = _scheme_numbers(scheme_coarse)
    bf = step_budget(scheme_fine, T)
    bc = step_budget(scheme_coarse, T)
    nuf = np.empty(M)
    nuc = np.empty(M)
    costf = np.empty(M, dtype=np.int64)
    costc = np.empty(M, dtype=np.int64)
    exf = np.empty(M, dtype=np.bool_)
    exc = np.empty(M, dtype=np.bool_)
    status = np.empty(M, dtype=np.uint8)
    fam = model.kernel.family
    p = model.kernel.params
    if model.dim_state == 1:
        lo, hi = domain.params
        _coupled_batch_1d(fam, p[0], p[1], p[2], p[3],
                          o15f, hf, d1f, d2f, o15c, hc, d1c, d2c,
                          lo, hi, float(model.x0[0]), T,
                          np.uint64(seed), np.uint64(stream_base), bf, bc,
                          nuf, nuc, costf, costc, exf, exc, status)
    else:
        cx, cy, radius = domain.params
        _coupled_batch_2d(fam, p[0], p[1], p[2],
                          o15f, hf, d1f, d2f, o15c, hc, d1c, d2c,
                          cx, cy, radius, float(model.x0[0]), float(model.x0[1]),
                          T, np.uint64(seed), np.uint64(stream_base), bf, bc,
                          nuf, nuc, costf, costc, exf, exc, status)
    _raise_on_budget(status, scheme_fine)
    return {"nu_fine": nuf, "nu_coarse": nuc, "cost_fine": costf,
            "cost_coarse": costc, "exited_fine": exf, "exited_coarse": exc}


def run_endpoint_batch(model: SdeModel, order: float, h: float, T: float,
                       M: int, seed: int, stream_base: int = 0) -> dict:
    """Uniform-mesh integration to time T; returns endpoints and W(T) per path."""
    if model.kernel is None or model.dim_state != 1:
        raise KernelUnavailable(
            f"no compiled uniform-mesh path for model {model.name!r}"
        )
    n_steps = round(T / h)
    if abs(n_steps * h - T) > 1e-12 * max(1.0, T):
        raise ValueError(f"h={h} does not divide T={T}")
    xT = np.empty(M)
    wT = np.empty(M)
    fam = model.kernel.family
    p = model.kernel.params
    _endpoint_batch_1d(fam, p[0], p[1], p[2], p[3], order == 1.5, h,
                       n_steps, float(model.x0[0]),
                       np.uint64(seed), np.uint64(stream_base), xT, wT)
    return {"xT": xT, "wT": wT}


def _raise_on_budget(status: np.ndarray, scheme: AdaptiveScheme) -> None:
    bad = np.nonzero(status)[0]
    if bad.size:
        raise StepBudgetError(
            f"{bad.size} path(s) exceeded the step budget "
            f"(order {scheme.order}, h={scheme.h}); first offender index {bad[0]}",
            path_index=int(bad[0]),
        )
