"""Backward-trace semi-Lagrangian sweep over the 4D phase grid.

This is the hot loop of the solver.  The numba build is used when available;
setting NSV_NUMBA=0 selects the pure-numpy twin, which implements the same
arithmetic with vectorized gathers.  Both paths:

* trace each phase node backward with classical RK4 (velocity sampled from
  prefiltered bicubic stage fields, periodic in space),
* evaluate the transported distribution with a 4-axis cubic B-spline stencil
  (periodic in x, zero extension in v); the splined quantity is f divided by
  a reference Maxwellian (center c, inverse spread env_inv2s2 = 1/(2 s^2)),
  and the gather restores the reference analytically at the foot velocity,
* clip the result to [0, local stencil max of f] before applying the
  exp(2 dt) compression factor, so positivity and the discrete maximum
  principle hold by construction.

Array conventions: `cf` holds spline coefficients of the reference-weighted
distribution and `fpad` the raw f samples, both shaped
(nx, nx, nv + 2*V_PAD, nv + 2*V_PAD) with zero-padded velocity axes; `cu`
stacks the 2*nsub + 1 prefiltered velocity stage fields as (K, 2, nx, nx),
index k holding time t + dt - k*(dt/nsub)/2.
"""

from __future__ import annotations

import os

import numpy as np

from .interp import V_PAD, bspline_weights

# Ceiling for the reference-Maxwellian exponent; beyond it the weighting
# saturates on both sides of the sweep instead of overflowing.
ENVELOPE_EXP_MAX = 600.0

_flag = os.environ.get("NSV_NUMBA", "").strip().lower()
if _flag in ("0", "false", "off", "no"):
    NUMBA_ENABLED = False
else:
    try:
        import numba

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a hard dependency normally
        NUMBA_ENABLED = False


def _trace_feet_numpy(cu: np.ndarray, x1, x2, v1, v2, h: float, nsub: int, dx: float):
    """Vectorized RK4 trace shared by the numpy sweep and the probe utilities.

    Integrates dx/dt = v, dv/dt = u(t, x) - v with signed step h; stage k of
    substep s reads the prefiltered field cu[2*s + k'] matching its time.
    """
    from .interp import eval_velocity_plane

    x1 = np.array(x1, dtype=np.float64, copy=True)
    x2 = np.array(x2, dtype=np.float64, copy=True)
    v1 = np.array(v1, dtype=np.float64, copy=True)
    v2 = np.array(v2, dtype=np.float64, copy=True)
    for s in range(nsub):
        u = eval_velocity_plane(cu[2 * s], x1, x2, dx)
        a_x1, a_x2 = v1, v2
        a_v1, a_v2 = u[0] - v1, u[1] - v2

        u = eval_velocity_plane(cu[2 * s + 1], x1 + 0.5 * h * a_x1, x2 + 0.5 * h * a_x2, dx)
        b_x1 = v1 + 0.5 * h * a_v1
        b_x2 = v2 + 0.5 * h * a_v2
        b_v1 = u[0] - b_x1
        b_v2 = u[1] - b_x2

        u = eval_velocity_plane(cu[2 * s + 1], x1 + 0.5 * h * b_x1, x2 + 0.5 * h * b_x2, dx)
        c_x1 = v1 + 0.5 * h * b_v1
        c_x2 = v2 + 0.5 * h * b_v2
        c_v1 = u[0] - c_x1
        c_v2 = u[1] - c_x2

        u = eval_velocity_plane(cu[2 * s + 2], x1 + h * c_x1, x2 + h * c_x2, dx)
        d_x1 = v1 + h * c_v1
        d_x2 = v2 + h * c_v2
        d_v1 = u[0] - d_x1
        d_v2 = u[1] - d_x2

        x1 += (h / 6.0) * (a_x1 + 2.0 * b_x1 + 2.0 * c_x1 + d_x1)
        x2 += (h / 6.0) * (a_x2 + 2.0 * b_x2 + 2.0 * c_x2 + d_x2)
        v1 += (h / 6.0) * (a_v1 + 2.0 * b_v1 + 2.0 * c_v1 + d_v1)
        v2 += (h / 6.0) * (a_v2 + 2.0 * b_v2 + 2.0 * c_v2 + d_v2)
    return x1, x2, v1, v2


def _gather_numpy(cf, fpad, x1, x2, v1, v2, dx, dv, v_max, env_c1, env_c2, env_inv2s2):
    """Clipped 4D B-spline evaluation at scattered feet (numpy path)."""
    nx = cf.shape[0]
    inside = (np.abs(v1) <= v_max) & (np.abs(v2) <= v_max)
    g1 = x1 / dx
    g2 = x2 / dx
    gv1 = np.where(inside, (v1 + v_max) / dv, 0.0) + V_PAD
    gv2 = np.where(inside, (v2 + v_max) / dv, 0.0) + V_PAD
    i1 = np.floor(g1).astype(np.int64)
    i2 = np.floor(g2).astype(np.int64)
    j1 = np.floor(gv1).astype(np.int64)
    j2 = np.floor(gv2).astype(np.int64)
    w_a = bspline_weights(g1 - i1)
    w_b = bspline_weights(g2 - i2)
    w_c = bspline_weights(gv1 - j1)
    w_d = bspline_weights(gv2 - j2)
    acc = np.zeros(x1.shape, dtype=np.float64)
    mx = np.zeros(x1.shape, dtype=np.float64)
    for a in range(4):
        ia = (i1 + (a - 1)) % nx
        for b in range(4):
            ib = (i2 + (b - 1)) % nx
            w_ab = w_a[a] * w_b[b]
            for c in range(4):
                ic = j1 + (c - 1)
                w_abc = w_ab * w_c[c]
                for d in range(4):
                    idx = j2 + (d - 1)
                    vals = cf[ia, ib, ic, idx]
                    acc += (w_abc * w_d[d]) * vals
                    np.maximum(mx, fpad[ia, ib, ic, idx], out=mx)
    e = ((v1 - env_c1) ** 2 + (v2 - env_c2) ** 2) * env_inv2s2
    acc = acc * np.exp(-np.minimum(e, ENVELOPE_EXP_MAX))
    out = np.clip(acc, 0.0, mx)
    out[~inside] = 0.0
    return out


def sweep_numpy(cf, fpad, cu, dx, dv, v_max, dt, nsub, growth, env_c1, env_c2, env_inv2s2, block=1 << 19):
    """Pure-numpy semi-Lagrangian sweep (reference / fallback path)."""
    nx = cf.shape[0]
    nv = cf.shape[2] - 2 * V_PAD
    xs = np.arange(nx) * dx
    vs = -v_max + np.arange(nv) * dv
    x1, x2, v1, v2 = [a.ravel() for a in np.meshgrid(xs, xs, vs, vs, indexing="ij")]
    n = x1.size
    out = np.empty(n, dtype=np.float64)
    h = -dt / nsub
    for lo in range(0, n, block):
        hi = min(lo + block, n)
        f1, f2, f3, f4 = _trace_feet_numpy(cu, x1[lo:hi], x2[lo:hi], v1[lo:hi], v2[lo:hi], h, nsub, dx)
        out[lo:hi] = _gather_numpy(cf, fpad, f1, f2, f3, f4, dx, dv, v_max, env_c1, env_c2, env_inv2s2)
    return (growth * out).reshape(nx, nx, nv, nv)


if NUMBA_ENABLED:

    @numba.njit(inline="always", fastmath=True, cache=True)
    def _u_at(cu, k, x1, x2, inv_dx, nx):
        g1 = x1 * inv_dx
        fl = np.floor(g1)
        i1 = np.int64(fl)
        f = g1 - fl
        f2 = f * f
        f3 = f2 * f
        a0 = (1.0 - 3.0 * f + 3.0 * f2 - f3) / 6.0
        a1 = (4.0 - 6.0 * f2 + 3.0 * f3) / 6.0
        a2 = (1.0 + 3.0 * f + 3.0 * f2 - 3.0 * f3) / 6.0
        a3 = f3 / 6.0
        g2 = x2 * inv_dx
        fl = np.floor(g2)
        i2 = np.int64(fl)
        f = g2 - fl
        f2 = f * f
        f3 = f2 * f
        b0 = (1.0 - 3.0 * f + 3.0 * f2 - f3) / 6.0
        b1 = (4.0 - 6.0 * f2 + 3.0 * f3) / 6.0
        b2 = (1.0 + 3.0 * f + 3.0 * f2 - 3.0 * f3) / 6.0
        b3 = f3 / 6.0
        ja = (i2 - 1) % nx
        jb = i2 % nx
        jc = (i2 + 1) % nx
        jd = (i2 + 2) % nx
        u1 = 0.0
        u2 = 0.0
        ia = (i1 - 1) % nx
        u1 += a0 * (b0 * cu[k, 0, ia, ja] + b1 * cu[k, 0, ia, jb] + b2 * cu[k, 0, ia, jc] + b3 * cu[k, 0, ia, jd])
        u2 += a0 * (b0 * cu[k, 1, ia, ja] + b1 * cu[k, 1, ia, jb] + b2 * cu[k, 1, ia, jc] + b3 * cu[k, 1, ia, jd])
        ia = i1 % nx
        u1 += a1 * (b0 * cu[k, 0, ia, ja] + b1 * cu[k, 0, ia, jb] + b2 * cu[k, 0, ia, jc] + b3 * cu[k, 0, ia, jd])
        u2 += a1 * (b0 * cu[k, 1, ia, ja] + b1 * cu[k, 1, ia, jb] + b2 * cu[k, 1, ia, jc] + b3 * cu[k, 1, ia, jd])
        ia = (i1 + 1) % nx
        u1 += a2 * (b0 * cu[k, 0, ia, ja] + b1 * cu[k, 0, ia, jb] + b2 * cu[k, 0, ia, jc] + b3 * cu[k, 0, ia, jd])
        u2 += a2 * (b0 * cu[k, 1, ia, ja] + b1 * cu[k, 1, ia, jb] + b2 * cu[k, 1, ia, jc] + b3 * cu[k, 1, ia, jd])
        ia = (i1 + 2) % nx
        u1 += a3 * (b0 * cu[k, 0, ia, ja] + b1 * cu[k, 0, ia, jb] + b2 * cu[k, 0, ia, jc] + b3 * cu[k, 0, ia, jd])
        u2 += a3 * (b0 * cu[k, 1, ia, ja] + b1 * cu[k, 1, ia, jb] + b2 * cu[k, 1, ia, jc] + b3 * cu[k, 1, ia, jd])
        return u1, u2

    @numba.njit(parallel=True, fastmath=True, cache=True)
    def _sweep_numba(cf, fpad, cu, dx, dv, v_max, dt, nsub, growth, env_c1, env_c2, env_inv2s2, out):
        nx = cf.shape[0]
        nv = out.shape[2]
        inv_dx = 1.0 / dx
        inv_dv = 1.0 / dv
        h = -dt / nsub
        for flat in numba.prange(nx * nx):
            i1 = flat // nx
            i2 = flat % nx
            x10 = i1 * dx
            x20 = i2 * dx
            wa = np.empty(4, dtype=np.float64)
            wb = np.empty(4, dtype=np.float64)
            wc = np.empty(4, dtype=np.float64)
            wd = np.empty(4, dtype=np.float64)
            ia_ = np.empty(4, dtype=np.int64)
            ib_ = np.empty(4, dtype=np.int64)
            for jv1 in range(nv):
                v10 = -v_max + jv1 * dv
                for jv2 in range(nv):
                    v20 = -v_max + jv2 * dv
                    x1 = x10
                    x2 = x20
                    v1 = v10
                    v2 = v20
                    for s in range(nsub):
                        k = 2 * s
                        u1, u2 = _u_at(cu, k, x1, x2, inv_dx, nx)
                        ax1 = v1
                        ax2 = v2
                        av1 = u1 - v1
                        av2 = u2 - v2
                        u1, u2 = _u_at(cu, k + 1, x1 + 0.5 * h * ax1, x2 + 0.5 * h * ax2, inv_dx, nx)
                        bx1 = v1 + 0.5 * h * av1
                        bx2 = v2 + 0.5 * h * av2
                        bv1 = u1 - bx1
                        bv2 = u2 - bx2
                        u1, u2 = _u_at(cu, k + 1, x1 + 0.5 * h * bx1, x2 + 0.5 * h * bx2, inv_dx, nx)
                        cx1 = v1 + 0.5 * h * bv1
                        cx2 = v2 + 0.5 * h * bv2
                        cv1 = u1 - cx1
                        cv2 = u2 - cx2
                        u1, u2 = _u_at(cu, k + 2, x1 + h * cx1, x2 + h * cx2, inv_dx, nx)
                        dx1 = v1 + h * cv1
                        dx2 = v2 + h * cv2
                        dv1 = u1 - dx1
                        dv2 = u2 - dx2
                        x1 += (h / 6.0) * (ax1 + 2.0 * bx1 + 2.0 * cx1 + dx1)
                        x2 += (h / 6.0) * (ax2 + 2.0 * bx2 + 2.0 * cx2 + dx2)
                        v1 += (h / 6.0) * (av1 + 2.0 * bv1 + 2.0 * cv1 + dv1)
                        v2 += (h / 6.0) * (av2 + 2.0 * bv2 + 2.0 * cv2 + dv2)
                    if v1 < -v_max or v1 > v_max or v2 < -v_max or v2 > v_max:
                        out[i1, i2, jv1, jv2] = 0.0
                        continue
                    g = x1 * inv_dx
                    fl = np.floor(g)
                    ibase = np.int64(fl)
                    f = g - fl
                    f2 = f * f
                    f3 = f2 * f
                    wa[0] = (1.0 - 3.0 * f + 3.0 * f2 - f3) / 6.0
                    wa[1] = (4.0 - 6.0 * f2 + 3.0 * f3) / 6.0
                    wa[2] = (1.0 + 3.0 * f + 3.0 * f2 - 3.0 * f3) / 6.0
                    wa[3] = f3 / 6.0
                    for a in range(4):
                        ia_[a] = (ibase + a - 1) % nx
                    g = x2 * inv_dx
                    fl = np.floor(g)
                    ibase = np.int64(fl)
                    f = g - fl
                    f2 = f * f
                    f3 = f2 * f
                    wb[0] = (1.0 - 3.0 * f + 3.0 * f2 - f3) / 6.0
                    wb[1] = (4.0 - 6.0 * f2 + 3.0 * f3) / 6.0
                    wb[2] = (1.0 + 3.0 * f + 3.0 * f2 - 3.0 * f3) / 6.0
                    wb[3] = f3 / 6.0
                    for b in range(4):
                        ib_[b] = (ibase + b - 1) % nx
                    g = (v1 + v_max) * inv_dv + V_PAD
                    fl = np.floor(g)
                    jc0 = np.int64(fl) - 1
                    f = g - fl
                    f2 = f * f
                    f3 = f2 * f
                    wc[0] = (1.0 - 3.0 * f + 3.0 * f2 - f3) / 6.0
                    wc[1] = (4.0 - 6.0 * f2 + 3.0 * f3) / 6.0
                    wc[2] = (1.0 + 3.0 * f + 3.0 * f2 - 3.0 * f3) / 6.0
                    wc[3] = f3 / 6.0
                    g = (v2 + v_max) * inv_dv + V_PAD
                    fl = np.floor(g)
                    jd0 = np.int64(fl) - 1
                    f = g - fl
                    f2 = f * f
                    f3 = f2 * f
                    wd[0] = (1.0 - 3.0 * f + 3.0 * f2 - f3) / 6.0
                    wd[1] = (4.0 - 6.0 * f2 + 3.0 * f3) / 6.0
                    wd[2] = (1.0 + 3.0 * f + 3.0 * f2 - 3.0 * f3) / 6.0
                    wd[3] = f3 / 6.0
                    acc = 0.0
                    mx = 0.0
                    for a in range(4):
                        pa = wa[a]
                        ra = ia_[a]
                        for b in range(4):
                            pab = pa * wb[b]
                            rb = ib_[b]
                            for c in range(4):
                                pabc = pab * wc[c]
                                rc = jc0 + c
                                s0 = (wd[0] * cf[ra, rb, rc, jd0]
                                      + wd[1] * cf[ra, rb, rc, jd0 + 1]
                                      + wd[2] * cf[ra, rb, rc, jd0 + 2]
                                      + wd[3] * cf[ra, rb, rc, jd0 + 3])
                                acc += pabc * s0
                                m0 = fpad[ra, rb, rc, jd0]
                                m1 = fpad[ra, rb, rc, jd0 + 1]
                                m2 = fpad[ra, rb, rc, jd0 + 2]
                                m3 = fpad[ra, rb, rc, jd0 + 3]
                                if m0 > mx:
                                    mx = m0
                                if m1 > mx:
                                    mx = m1
                                if m2 > mx:
                                    mx = m2
                                if m3 > mx:
                                    mx = m3
                    e = ((v1 - env_c1) * (v1 - env_c1) + (v2 - env_c2) * (v2 - env_c2)) * env_inv2s2
                    if e > ENVELOPE_EXP_MAX:
                        e = ENVELOPE_EXP_MAX
                    acc *= np.exp(-e)
                    if acc < 0.0:
                        acc = 0.0
                    elif acc > mx:
                        acc = mx
                    out[i1, i2, jv1, jv2] = growth * acc


def sweep_numba(cf, fpad, cu, dx, dv, v_max, dt, nsub, growth, env_c1, env_c2, env_inv2s2):
    """Numba-compiled semi-Lagrangian sweep."""
    if not NUMBA_ENABLED:
        raise RuntimeError("numba path requested but numba is disabled or unavailable")
    nx = cf.shape[0]
    nv = cf.shape[2] - 2 * V_PAD
    out = np.empty((nx, nx, nv, nv), dtype=np.float64)
    _sweep_numba(cf, fpad, cu, float(dx), float(dv), float(v_max), float(dt), int(nsub), float(growth),
                 float(env_c1), float(env_c2), float(env_inv2s2), out)
    return out


def semi_lagrangian_sweep(cf, fpad, cu, dx, dv, v_max, dt, nsub, growth, env_c1, env_c2, env_inv2s2):
    """Dispatch to the numba sweep unless NSV_NUMBA=0 selected the numpy twin."""
    if NUMBA_ENABLED:
        return sweep_numba(cf, fpad, cu, dx, dv, v_max, dt, nsub, growth, env_c1, env_c2, env_inv2s2)
    return sweep_numpy(cf, fpad, cu, dx, dv, v_max, dt, nsub, growth, env_c1, env_c2, env_inv2s2)
