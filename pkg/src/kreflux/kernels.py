"""Numba kernels for whole-scenario runs.

Two integration modes share one log layout (see LOG_COLUMNS):

  sampled     The DSP realization.  The motor integrates (RK4, dt_truth) under
              the zero-order-hold voltage commanded at each sampling instant;
              the regressor bank advances with the exact ZOH map on the
              sampled (i, v); the observer ODEs advance by RK4 with Phi, y, e,
              E, d_hat held over the sampling period.

  continuous  The verification-grade realization.  Motor, regressor filters,
              observer and the manifold-probe state xi are co-integrated as
              one ODE system (RK4 at dt_truth) with every algebraic quantity
              re-evaluated at the stage points; the voltage is the same
              ZOH-held command, whose switch times align with the grid.  In
              this mode the regression-identity residual and the invariant
              pi = Y - Q*xtilde - xi sit at integration-error level, so they
              work as null tests of the whole implementation.

The probe's xi uses dtilde = d_hat - (y - Phi^T x): the disturbance implied by
the regression identity itself (the filter-transient term included), which is
what makes pi-dot = -a*pi exact.

Observer kinds: 1 = KRE, 2 = gradient with d-compensation, 3 = uncompensated
gradient.  Mutation hooks: break_omega1 drops the L_q*H1[i] term from Omega1;
drop_qe removes the Q*E term from Ydot.
"""

import numpy as np
from numba import njit

LOG_COLUMNS = (
    "t", "theta", "theta_hat", "x1", "x2", "x1_hat", "x2_hat",
    "err_flux", "err_angle", "y", "phi1", "phi2", "d_true", "d_hat",
    "q11", "q12", "q22", "Y1", "Y2", "pi_norm",
)
NCOLS = len(LOG_COLUMNS)

KIND_KRE = 1
KIND_GRAD_AUT = 2
KIND_GRAD_TIE = 3

# augmented continuous state layout
# 0:2 lam | 2:4 z_vri | 4:6 z_i1 | 6:8 z_i2 | 8 z_yy | 9 z_dtrue
# 10:12 lamhat | 12:15 Q(11,12,22) | 15:17 Y | 17 z_dhat | 18:20 xi
_NS = 20


@njit(cache=True, nogil=True)
def traj_eval(segs, t):
    """theta, omega at time t from segment rows [t0, t1, theta0, omega0, accel]."""
    n = segs.shape[0]
    row = n - 1
    for k in range(n):
        if t < segs[k, 1]:
            row = k
            break
    dt = t - segs[row, 0]
    th = segs[row, 2] + segs[row, 3] * dt + 0.5 * segs[row, 4] * dt * dt
    w = segs[row, 3] + segs[row, 4] * dt
    return th, w


@njit(cache=True, nogil=True)
def _current(l1, l2, th, Ld, Lq, psi):
    c1 = np.cos(th)
    c2 = np.sin(th)
    e1 = l1 - psi * c1
    e2 = l2 - psi * c2
    ed = c1 * e1 + c2 * e2
    return ed / Ld * c1 + (e1 - ed * c1) / Lq, ed / Ld * c2 + (e2 - ed * c2) / Lq


@njit(cache=True, nogil=True)
def _ff_voltage(th, w, id_ref, iq_ref, R, Ld, Lq, psi):
    lamd = Ld * id_ref + psi
    lamq = Lq * iq_ref
    vd = R * id_ref - w * lamq
    vq = R * iq_ref + w * lamd
    c1 = np.cos(th)
    c2 = np.sin(th)
    return c1 * vd - c2 * vq, c2 * vd + c1 * vq


@njit(cache=True, nogil=True)
def _wrap(a):
    return np.arctan2(np.sin(a), np.cos(a))


@njit(cache=True, nogil=True)
def _rhs_cont(s, t, v1, v2, segs, R, Ld, Lq, psi, alpha, a_gain, gamma, eps,
              kind, break_omega1, drop_qe, out):
    L0 = Ld - Lq
    ell = psi * L0
    th, _w = traj_eval(segs, t)
    i1, i2 = _current(s[0], s[1], th, Ld, Lq, psi)
    x1 = s[0] - Lq * i1
    x2 = s[1] - Lq * i2
    u1 = v1 - R * i1
    u2 = v2 - R * i2
    h1i1 = alpha * (i1 - s[4])
    h1i2 = alpha * (i2 - s[5])
    if break_omega1 == 1:
        o11 = s[2]
        o12 = s[3]
    else:
        o11 = s[2] - Lq * h1i1
        o12 = s[3] - Lq * h1i2
    o21 = o11 - L0 * h1i1
    o22 = o12 - L0 * h1i2
    p1 = o11 + o21
    p2 = o12 + o22
    g = o21 * o11 + o22 * o12
    y = L0 * (s[6] * o11 + s[7] * o12) \
        + (o11 * o11 + o12 * o12) / alpha + s[8] / alpha
    xn = np.sqrt(x1 * x1 + x2 * x2)
    gd = (i1 * x1 + i2 * x2) / xn
    xh1 = s[10] - Lq * i1
    xh2 = s[11] - Lq * i2
    xhn = np.sqrt(xh1 * xh1 + xh2 * xh2)
    if xhn >= eps:
        gs = (i1 * xh1 + i2 * xh2) / xhn
    else:
        gs = 0.0
    d_hat = -ell * alpha * (gs - s[17])
    e = p1 * xh1 + p2 * xh2 + d_hat - y
    if kind == KIND_KRE:
        E1 = -gamma * s[15]
        E2 = -gamma * s[16]
    elif kind == KIND_GRAD_AUT:
        E1 = -gamma * p1 * e
        E2 = -gamma * p2 * e
    else:
        et = p1 * xh1 + p2 * xh2 - y
        E1 = -gamma * p1 * et
        E2 = -gamma * p2 * et
    d_eff = y - (p1 * x1 + p2 * x2)
    dtil = d_hat - d_eff

    out[0] = u1
    out[1] = u2
    out[2] = alpha * (u1 - s[2])
    out[3] = alpha * (u2 - s[3])
    out[4] = alpha * (i1 - s[4])
    out[5] = alpha * (i2 - s[5])
    out[6] = alpha * (i1 - s[6])
    out[7] = alpha * (i2 - s[7])
    out[8] = alpha * (g - s[8])
    out[9] = alpha * (gd - s[9])
    out[10] = u1 + E1
    out[11] = u2 + E2
    out[12] = -a_gain * (s[12] - p1 * p1)
    out[13] = -a_gain * (s[13] - p1 * p2)
    out[14] = -a_gain * (s[14] - p2 * p2)
    out[15] = -a_gain * (s[15] - p1 * e)
    out[16] = -a_gain * (s[16] - p2 * e)
    if drop_qe == 0:
        out[15] += s[12] * E1 + s[13] * E2
        out[16] += s[13] * E1 + s[14] * E2
    out[17] = alpha * (gs - s[17])
    out[18] = -a_gain * (s[18] - p1 * dtil)
    out[19] = -a_gain * (s[19] - p2 * dtil)


@njit(cache=True, nogil=True)
def run_continuous(n_samples, dt_sample, n_sub, segs, R, Ld, Lq, psi,
                   id_ref, iq_ref, alpha, a_gain, gamma, eps, kind,
                   lamhat0, xi0, break_omega1, drop_qe, diagnostics):
    """Co-integrated run; returns (log, diverged_at) with diverged_at = -1 if ok."""
    dt = dt_sample / n_sub
    L0 = Ld - Lq
    ell = psi * L0
    s = np.zeros(_NS)
    th0, _ = traj_eval(segs, 0.0)
    c1 = np.cos(th0)
    c2 = np.sin(th0)
    lamd = Ld * id_ref + psi
    lamq = Lq * iq_ref
    s[0] = c1 * lamd - c2 * lamq
    s[1] = c2 * lamd + c1 * lamq
    s[10] = lamhat0[0]
    s[11] = lamhat0[1]
    s[18] = xi0[0]
    s[19] = xi0[1]

    log = np.empty((n_samples + 1, NCOLS))
    k1 = np.empty(_NS)
    k2 = np.empty(_NS)
    k3 = np.empty(_NS)
    k4 = np.empty(_NS)
    tmp = np.empty(_NS)
    diverged_at = -1

    for k in range(n_samples + 1):
        t = k * dt_sample
        th, w = traj_eval(segs, t)
        v1, v2 = _ff_voltage(th, w, id_ref, iq_ref, R, Ld, Lq, psi)
        i1, i2 = _current(s[0], s[1], th, Ld, Lq, psi)
        x1 = s[0] - Lq * i1
        x2 = s[1] - Lq * i2
        h1i1 = alpha * (i1 - s[4])
        h1i2 = alpha * (i2 - s[5])
        if break_omega1 == 1:
            o11 = s[2]
            o12 = s[3]
        else:
            o11 = s[2] - Lq * h1i1
            o12 = s[3] - Lq * h1i2
        o21 = o11 - L0 * h1i1
        o22 = o12 - L0 * h1i2
        p1 = o11 + o21
        p2 = o12 + o22
        y = L0 * (s[6] * o11 + s[7] * o12) \
            + (o11 * o11 + o12 * o12) / alpha + s[8] / alpha
        xn = np.sqrt(x1 * x1 + x2 * x2)
        gd = (i1 * x1 + i2 * x2) / xn
        d_true = -ell * alpha * (gd - s[9])
        xh1 = s[10] - Lq * i1
        xh2 = s[11] - Lq * i2
        xhn = np.sqrt(xh1 * xh1 + xh2 * xh2)
        if xhn >= eps:
            gs = (i1 * xh1 + i2 * xh2) / xhn
        else:
            gs = 0.0
        d_hat = -ell * alpha * (gs - s[17])
        xt1 = xh1 - x1
        xt2 = xh2 - x2
        pi1 = s[15] - (s[12] * xt1 + s[13] * xt2) - s[18]
        pi2 = s[16] - (s[13] * xt1 + s[14] * xt2) - s[19]

        log[k, 0] = t
        log[k, 1] = _wrap(th)
        log[k, 2] = np.arctan2(xh2, xh1) if xhn > 0.0 else np.nan
        log[k, 3] = x1
        log[k, 4] = x2
        log[k, 5] = xh1
        log[k, 6] = xh2
        log[k, 7] = np.sqrt(xt1 * xt1 + xt2 * xt2)
        log[k, 8] = _wrap(np.arctan2(xh2, xh1) - th) if xhn > 0.0 else np.nan
        log[k, 9] = y
        log[k, 10] = p1
        log[k, 11] = p2
        log[k, 12] = d_true if diagnostics == 1 else np.nan
        log[k, 13] = d_hat if kind != KIND_GRAD_TIE else np.nan
        if kind == KIND_KRE:
            log[k, 14] = s[12]
            log[k, 15] = s[13]
            log[k, 16] = s[14]
            log[k, 17] = s[15]
            log[k, 18] = s[16]
            log[k, 19] = np.sqrt(pi1 * pi1 + pi2 * pi2) if diagnostics == 1 else np.nan
        else:
            log[k, 14] = np.nan
            log[k, 15] = np.nan
            log[k, 16] = np.nan
            log[k, 17] = np.nan
            log[k, 18] = np.nan
            log[k, 19] = np.nan

        finite = True
        for m in range(_NS):
            if not np.isfinite(s[m]):
                finite = False
        if not finite:
            diverged_at = k
            return log[: k + 1], diverged_at
        if k == n_samples:
            break

        for j in range(n_sub):
            tau = t + j * dt
            _rhs_cont(s, tau, v1, v2, segs, R, Ld, Lq, psi, alpha, a_gain,
                      gamma, eps, kind, break_omega1, drop_qe, k1)
            for m in range(_NS):
                tmp[m] = s[m] + 0.5 * dt * k1[m]
            _rhs_cont(tmp, tau + 0.5 * dt, v1, v2, segs, R, Ld, Lq, psi, alpha,
                      a_gain, gamma, eps, kind, break_omega1, drop_qe, k2)
            for m in range(_NS):
                tmp[m] = s[m] + 0.5 * dt * k2[m]
            _rhs_cont(tmp, tau + 0.5 * dt, v1, v2, segs, R, Ld, Lq, psi, alpha,
                      a_gain, gamma, eps, kind, break_omega1, drop_qe, k3)
            for m in range(_NS):
                tmp[m] = s[m] + dt * k3[m]
            _rhs_cont(tmp, tau + dt, v1, v2, segs, R, Ld, Lq, psi, alpha,
                      a_gain, gamma, eps, kind, break_omega1, drop_qe, k4)
            for m in range(_NS):
                s[m] += dt / 6.0 * (k1[m] + 2.0 * k2[m] + 2.0 * k3[m] + k4[m])
    return log, diverged_at


@njit(cache=True, nogil=True)
def run_sampled(n_samples, dt_sample, n_sub, segs, R, Ld, Lq, psi,
                id_ref, iq_ref, alpha, a_gain, gamma, eps, kind,
                lamhat0, noise_i, noise_v, break_omega1, drop_qe, diagnostics):
    """Sampled-data run; returns (log, diverged_at) with diverged_at = -1 if ok."""
    dt = dt_sample / n_sub
    L0 = Ld - Lq
    ell = psi * L0
    ad = np.exp(-alpha * dt_sample)
    th0, _ = traj_eval(segs, 0.0)
    c1 = np.cos(th0)
    c2 = np.sin(th0)
    lamd = Ld * id_ref + psi
    lamq = Lq * iq_ref
    l1 = c1 * lamd - c2 * lamq
    l2 = c2 * lamd + c1 * lamq
    lh1 = lamhat0[0]
    lh2 = lamhat0[1]
    q11 = 0.0
    q12 = 0.0
    q22 = 0.0
    Y1 = 0.0
    Y2 = 0.0
    zv1 = 0.0
    zv2 = 0.0
    za1 = 0.0
    za2 = 0.0
    zb1 = 0.0
    zb2 = 0.0
    z_yy = 0.0
    z_dt = 0.0
    z_dh = 0.0
    log = np.empty((n_samples + 1, NCOLS))
    diverged_at = -1

    for k in range(n_samples + 1):
        t = k * dt_sample
        th, w = traj_eval(segs, t)
        v1, v2 = _ff_voltage(th, w, id_ref, iq_ref, R, Ld, Lq, psi)
        i1t, i2t = _current(l1, l2, th, Ld, Lq, psi)
        x1 = l1 - Lq * i1t
        x2 = l2 - Lq * i2t
        # measured samples (optional additive noise)
        i1 = i1t + noise_i[k, 0]
        i2 = i2t + noise_i[k, 1]
        v1m = v1 + noise_v[k, 0]
        v2m = v2 + noise_v[k, 1]
        # ZOH regressor update
        u1 = v1m - R * i1
        u2 = v2m - R * i2
        zv1 = ad * zv1 + (1.0 - ad) * u1
        zv2 = ad * zv2 + (1.0 - ad) * u2
        za1 = ad * za1 + (1.0 - ad) * i1
        za2 = ad * za2 + (1.0 - ad) * i2
        zb1 = ad * zb1 + (1.0 - ad) * i1
        zb2 = ad * zb2 + (1.0 - ad) * i2
        h1i1 = alpha * (i1 - za1)
        h1i2 = alpha * (i2 - za2)
        if break_omega1 == 1:
            o11 = zv1
            o12 = zv2
        else:
            o11 = zv1 - Lq * h1i1
            o12 = zv2 - Lq * h1i2
        o21 = o11 - L0 * h1i1
        o22 = o12 - L0 * h1i2
        p1 = o11 + o21
        p2 = o12 + o22
        g = o21 * o11 + o22 * o12
        z_yy = ad * z_yy + (1.0 - ad) * g
        y = L0 * (zb1 * o11 + zb2 * o12) \
            + (o11 * o11 + o12 * o12) / alpha + z_yy / alpha
        # true-d diagnostic channel (from the true x, noiseless by definition)
        xn = np.sqrt(x1 * x1 + x2 * x2)
        gd = (i1t * x1 + i2t * x2) / xn
        z_dt = ad * z_dt + (1.0 - ad) * gd
        d_true = -ell * alpha * (gd - z_dt)
        # observer
        xh1 = lh1 - Lq * i1
        xh2 = lh2 - Lq * i2
        xhn = np.sqrt(xh1 * xh1 + xh2 * xh2)
        d_hat = 0.0
        if kind != KIND_GRAD_TIE:
            if xhn >= eps:
                gs = (i1 * xh1 + i2 * xh2) / xhn
            else:
                gs = 0.0
            z_dh = ad * z_dh + (1.0 - ad) * gs
            d_hat = -ell * alpha * (gs - z_dh)
        e = p1 * xh1 + p2 * xh2 + d_hat - y
        if kind == KIND_KRE:
            E1 = -gamma * Y1
            E2 = -gamma * Y2
        elif kind == KIND_GRAD_AUT:
            E1 = -gamma * p1 * e
            E2 = -gamma * p2 * e
        else:
            et = p1 * xh1 + p2 * xh2 - y
            E1 = -gamma * p1 * et
            E2 = -gamma * p2 * et
        xt1 = xh1 - x1
        xt2 = xh2 - x2

        log[k, 0] = t
        log[k, 1] = _wrap(th)
        log[k, 2] = np.arctan2(xh2, xh1) if xhn > 0.0 else np.nan
        log[k, 3] = x1
        log[k, 4] = x2
        log[k, 5] = xh1
        log[k, 6] = xh2
        log[k, 7] = np.sqrt(xt1 * xt1 + xt2 * xt2)
        log[k, 8] = _wrap(np.arctan2(xh2, xh1) - th) if xhn > 0.0 else np.nan
        log[k, 9] = y
        log[k, 10] = p1
        log[k, 11] = p2
        log[k, 12] = d_true if diagnostics == 1 else np.nan
        log[k, 13] = d_hat if kind != KIND_GRAD_TIE else np.nan
        if kind == KIND_KRE:
            log[k, 14] = q11
            log[k, 15] = q12
            log[k, 16] = q22
            log[k, 17] = Y1
            log[k, 18] = Y2
        else:
            log[k, 14] = np.nan
            log[k, 15] = np.nan
            log[k, 16] = np.nan
            log[k, 17] = np.nan
            log[k, 18] = np.nan
        log[k, 19] = np.nan  # manifold probe is continuous-mode only

        ok = (np.isfinite(lh1) and np.isfinite(lh2) and np.isfinite(q11)
              and np.isfinite(q12) and np.isfinite(q22) and np.isfinite(Y1)
              and np.isfinite(Y2) and np.isfinite(l1) and np.isfinite(l2))
        if not ok:
            diverged_at = k
            return log[: k + 1], diverged_at
        if k == n_samples:
            break

        # advance observer with held Phi, e, E (RK4 on Q, Y; lamhat is linear)
        if kind == KIND_KRE:
            pp11 = p1 * p1
            pp12 = p1 * p2
            pp22 = p2 * p2
            pe1 = p1 * e
            pe2 = p2 * e
            sq1 = 0.0
            sq2 = 0.0
            sq3 = 0.0
            sy1 = 0.0
            sy2 = 0.0
            kq1 = 0.0
            kq2 = 0.0
            kq3 = 0.0
            ky1 = 0.0
            ky2 = 0.0
            for st in range(4):
                if st == 0:
                    h = 0.0
                elif st == 3:
                    h = dt_sample
                else:
                    h = 0.5 * dt_sample
                aq1 = q11 + h * kq1
                aq2 = q12 + h * kq2
                aq3 = q22 + h * kq3
                ay1 = Y1 + h * ky1
                ay2 = Y2 + h * ky2
                kq1 = -a_gain * (aq1 - pp11)
                kq2 = -a_gain * (aq2 - pp12)
                kq3 = -a_gain * (aq3 - pp22)
                ky1 = -a_gain * (ay1 - pe1)
                ky2 = -a_gain * (ay2 - pe2)
                if drop_qe == 0:
                    ky1 += aq1 * E1 + aq2 * E2
                    ky2 += aq2 * E1 + aq3 * E2
                wgt = 2.0 if st in (1, 2) else 1.0
                sq1 += wgt * kq1
                sq2 += wgt * kq2
                sq3 += wgt * kq3
                sy1 += wgt * ky1
                sy2 += wgt * ky2
            q11 += dt_sample / 6.0 * sq1
            q12 += dt_sample / 6.0 * sq2
            q22 += dt_sample / 6.0 * sq3
            Y1 += dt_sample / 6.0 * sy1
            Y2 += dt_sample / 6.0 * sy2
        lh1 += dt_sample * (u1 + E1)
        lh2 += dt_sample * (u2 + E2)

        # advance the true motor under the held command voltage
        for j in range(n_sub):
            tau = t + j * dt
            tha, _ = traj_eval(segs, tau)
            thb, _ = traj_eval(segs, tau + 0.5 * dt)
            thc, _ = traj_eval(segs, tau + dt)
            a1, a2 = _current(l1, l2, tha, Ld, Lq, psi)
            f11 = v1 - R * a1
            f12 = v2 - R * a2
            b1, b2 = _current(l1 + 0.5 * dt * f11, l2 + 0.5 * dt * f12, thb,
                              Ld, Lq, psi)
            f21 = v1 - R * b1
            f22 = v2 - R * b2
            g1, g2 = _current(l1 + 0.5 * dt * f21, l2 + 0.5 * dt * f22, thb,
                              Ld, Lq, psi)
            f31 = v1 - R * g1
            f32 = v2 - R * g2
            d1, d2 = _current(l1 + dt * f31, l2 + dt * f32, thc, Ld, Lq, psi)
            f41 = v1 - R * d1
            f42 = v2 - R * d2
            l1 += dt / 6.0 * (f11 + 2.0 * f21 + 2.0 * f31 + f41)
            l2 += dt / 6.0 * (f12 + 2.0 * f22 + 2.0 * f32 + f42)
    return log, diverged_at
