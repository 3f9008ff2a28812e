"""Compiled right-hand sides and fixed-step RK4 loops.

Parameters travel as flat float64 vectors so one kernel serves every
parameter phase (pre-, during-, post-fault).

GFL vector: [R_g, X_g, U_g, I_d, I_q, k_p, k_i, c_ft, w_lim]
GFM vector: [R_g, X_g, U_g, E, P_in, k_p, k_i, w_lim]
"""

import math

import numba
import numpy as np
from numba import njit, prange

# the bundled TBB is too old for numba; skip it rather than warn on every run
numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

GFL = 0
GFM = 1

STABLE = 0
UNSTABLE = 1
INDETERMINATE = 2

TWO_PI = 2.0 * math.pi


@njit(cache=True)
def gfl_rhs(d, x, p):
    vq0 = p[1] * p[3] + p[0] * p[4] - p[2] * math.sin(d)
    w = (p[5] * vq0 + x) / (1.0 - p[5] * p[7])
    if w > p[8]:
        w = p[8]
    elif w < -p[8]:
        w = -p[8]
    return w, p[6] * (vq0 + p[7] * w)


@njit(cache=True)
def gfm_rhs(d, x, p):
    z2 = p[0] * p[0] + p[1] * p[1]
    pe = (p[1] * p[3] * p[2] * math.sin(d)
          + p[0] * (p[3] * p[3] - p[3] * p[2] * math.cos(d))) / z2
    y = p[4] - pe
    w = p[5] * y + x
    if w > p[7]:
        w = p[7]
    elif w < -p[7]:
        w = -p[7]
    return w, p[6] * y


@njit(cache=True)
def rhs(kind, d, x, p):
    if kind == GFL:
        return gfl_rhs(d, x, p)
    return gfm_rhs(d, x, p)


@njit(cache=True)
def rk4_step(kind, d, x, p, h):
    k1d, k1x = rhs(kind, d, x, p)
    k2d, k2x = rhs(kind, d + 0.5 * h * k1d, x + 0.5 * h * k1x, p)
    k3d, k3x = rhs(kind, d + 0.5 * h * k2d, x + 0.5 * h * k2x, p)
    k4d, k4x = rhs(kind, d + h * k3d, x + h * k3x, p)
    return (d + h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d),
            x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x))


@njit(cache=True)
def integrate_segments(kind, pmat, seg_t, seg_n, seg_hlast, d0, x0, h,
                       div_bound, stride):
    """Integrate through consecutive parameter segments.

    Segment ``s`` spans ``[seg_t[s], seg_t[s+1]]`` in ``seg_n[s]`` steps, the
    last of length ``seg_hlast[s]`` so the boundary is hit exactly. Every
    ``stride``-th step and every segment end are recorded.

    Returns (t, delta, x_int, omega, segment, n_rec, diverged).
    """
    nseg = seg_n.shape[0]
    cap = 2 + nseg
    for s in range(nseg):
        cap += seg_n[s] // stride + 1
    t_out = np.empty(cap)
    d_out = np.empty(cap)
    x_out = np.empty(cap)
    w_out = np.empty(cap)
    s_out = np.empty(cap, dtype=np.int64)

    d = d0
    x = x0
    w0, _ = rhs(kind, d, x, pmat[0])
    t_out[0] = seg_t[0]
    d_out[0] = d
    x_out[0] = x
    w_out[0] = w0
    s_out[0] = 0
    n = 1
    for s in range(nseg):
        p = pmat[s]
        ns = seg_n[s]
        for k in range(ns):
            last = k == ns - 1
            hh = seg_hlast[s] if last else h
            d, x = rk4_step(kind, d, x, p, hh)
            diverged = not (abs(d) <= div_bound and math.isfinite(x))
            if last or diverged or (k + 1) % stride == 0:
                t_out[n] = seg_t[s + 1] if last else seg_t[s] + (k + 1) * h
                d_out[n] = d
                x_out[n] = x
                w, _ = rhs(kind, d, x, p)
                w_out[n] = w
                s_out[n] = s
                n += 1
            if diverged:
                return t_out, d_out, x_out, w_out, s_out, n, True
    return t_out, d_out, x_out, w_out, s_out, n, False


@njit(cache=True)
def settle(kind, p_fault, t_fault, p_post, d0, x0, h, t_end, d_sep,
           tol_d, tol_w, dwell, div_bound):
    """Classify the fate of a (possibly faulted) trajectory with early exit.

    STABLE once the state stays within ``tol_d``/``tol_w`` of the SEP for
    ``dwell`` seconds; UNSTABLE once the angle is more than a full turn from
    the SEP or leaves ``div_bound``; INDETERMINATE if neither by ``t_end``.
    """
    d = d0
    x = x0
    if t_fault > 0.0:
        n = int(math.ceil(t_fault / h - 1e-9))
        for k in range(n):
            hh = t_fault - (n - 1) * h if k == n - 1 else h
            d, x = rk4_step(kind, d, x, p_fault, hh)
            if abs(d - d_sep) > TWO_PI or abs(d) > div_bound or not math.isfinite(x):
                return UNSTABLE
    n_post = int(math.ceil((t_end - t_fault) / h - 1e-9))
    held = 0.0
    for k in range(n_post):
        w, _ = rhs(kind, d, x, p_post)
        if abs(d - d_sep) < tol_d and abs(w) < tol_w:
            held += h
            if held >= dwell:
                return STABLE
        else:
            held = 0.0
        d, x = rk4_step(kind, d, x, p_post, h)
        if abs(d - d_sep) > TWO_PI or abs(d) > div_bound or not math.isfinite(x):
            return UNSTABLE
    # settled onto a neighbouring SEP lift within the window
    k = round((d - d_sep) / TWO_PI)
    if k != 0 and abs(d - d_sep - k * TWO_PI) < tol_d:
        return UNSTABLE
    return INDETERMINATE


@njit(parallel=True, cache=True)
def settle_many(kind, p_post, d0s, x0s, h, t_end, d_sep, tol_d, tol_w,
                dwell, div_bound):
    n = d0s.shape[0]
    out = np.empty(n, dtype=np.int8)
    for i in prange(n):
        out[i] = settle(kind, p_post, 0.0, p_post, d0s[i], x0s[i], h, t_end,
                        d_sep, tol_d, tol_w, dwell, div_bound)
    return out
