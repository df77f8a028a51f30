"""Verification instruments: persistency-of-excitation index, Q positivity,
manifold-residual probe, error metrics and convergence-rate fitting.

Everything here is a pure function of logged series, so any metric can be
recomputed offline from a run's CSV.
"""

import warnings
from dataclasses import dataclass, asdict

import numpy as np

LOG_FLOOR = 1e-15


def sym_eig_2x2(a11, a12, a22):
    """Eigenvalues (lo, hi) of a symmetric 2x2 matrix, closed form."""
    mean = 0.5 * (a11 + a22)
    rad = np.sqrt(0.25 * (a11 - a22) ** 2 + a12 ** 2)
    return mean - rad, mean + rad


@dataclass(frozen=True)
class PEReport:
    """Worst-window excitation level of the regressor Phi."""

    window: float
    dt: float
    n_windows: int
    delta_hat: float
    worst_start: float
    sup_phi: float
    delta_min: float
    is_pe: bool

    def to_dict(self):
        return asdict(self)


def pe_index(phi, T, dt, delta_min=0.0):
    """Min over window starts of the smallest eigenvalue of the trapezoid
    integral of Phi Phi^T over [t, t+T].

    phi: (n, 2) series sampled at dt.  Raises ValueError when the series is
    shorter than one window.
    """
    phi = np.asarray(phi, dtype=float)
    nwin = int(round(T / dt))
    if nwin < 1 or phi.shape[0] < nwin + 1:
        raise ValueError(
            f"series of {phi.shape[0]} samples is shorter than the {T} s window")
    p11 = phi[:, 0] * phi[:, 0]
    p12 = phi[:, 0] * phi[:, 1]
    p22 = phi[:, 1] * phi[:, 1]

    def cumtrap(v):
        c = np.empty_like(v)
        c[0] = 0.0
        np.cumsum(0.5 * (v[1:] + v[:-1]) * dt, out=c[1:])
        return c

    c11, c12, c22 = cumtrap(p11), cumtrap(p12), cumtrap(p22)
    a11 = c11[nwin:] - c11[:-nwin]
    a12 = c12[nwin:] - c12[:-nwin]
    a22 = c22[nwin:] - c22[:-nwin]
    lo, _ = sym_eig_2x2(a11, a12, a22)
    worst = int(np.argmin(lo))
    delta_hat = float(lo[worst])
    return PEReport(window=nwin * dt, dt=dt, n_windows=len(lo),
                    delta_hat=delta_hat, worst_start=worst * dt,
                    sup_phi=float(np.max(np.hypot(phi[:, 0], phi[:, 1]))),
                    delta_min=delta_min, is_pe=delta_hat > delta_min)


def q_positivity(q_series, t, t_after):
    """Min over t >= t_after of the smallest eigenvalue of Q(t).

    q_series: (n, 3) packed (q11, q12, q22).
    """
    q_series = np.asarray(q_series, dtype=float)
    t = np.asarray(t, dtype=float)
    mask = t >= t_after
    if not np.any(mask):
        raise ValueError("no samples at or after t_after")
    lo, _ = sym_eig_2x2(q_series[mask, 0], q_series[mask, 1], q_series[mask, 2])
    return float(np.min(lo))


@dataclass(frozen=True)
class RateFit:
    """Least-squares fit of log|err| vs t."""

    rate: float
    r_squared: float
    n_points: int


def fit_rate(err, t, t_start=None, t_end=None, envelope_period=None):
    """Exponential decay rate (1/s, positive = decaying) of an error series.

    Fits a line to log|err| over [t_start, t_end].  With envelope_period, the
    series is first reduced to its max over consecutive windows of that
    length, which makes the fit insensitive to oscillation zero-crossings.
    Nonpositive samples are clipped at 1e-15 with a warning.
    """
    err = np.abs(np.asarray(err, dtype=float))
    t = np.asarray(t, dtype=float)
    if t_start is None:
        t_start = t[0]
    if t_end is None:
        t_end = t[-1]
    mask = (t >= t_start) & (t <= t_end)
    tt, ee = t[mask], err[mask]
    if envelope_period is not None and envelope_period > 0:
        nwin = max(3, int(round((t_end - t_start) / envelope_period)))
        edges = np.linspace(t_start, t_end, nwin + 1)
        tc, vc = [], []
        for a, b in zip(edges[:-1], edges[1:]):
            m = (tt >= a) & (tt < b)
            if m.any():
                tc.append(0.5 * (a + b))
                vc.append(ee[m].max())
        tt, ee = np.array(tc), np.array(vc)
    if len(tt) < 2:
        raise ValueError("fit window contains fewer than two points")
    if np.any(ee <= 0.0):
        warnings.warn("nonpositive errors in fit window clipped at 1e-15")
        ee = np.maximum(ee, LOG_FLOOR)
    logy = np.log(ee)
    A = np.vstack([tt, np.ones_like(tt)]).T
    sol, *_ = np.linalg.lstsq(A, logy, rcond=None)
    pred = A @ sol
    ss_res = float(np.sum((logy - pred) ** 2))
    ss_tot = float(np.sum((logy - logy.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return RateFit(rate=float(-sol[0]), r_squared=r2, n_points=len(tt))


def settling_time(err, t, threshold):
    """First t with err < threshold forever after; inf if never settled."""
    err = np.asarray(err, dtype=float)
    t = np.asarray(t, dtype=float)
    bad = np.flatnonzero(~(err < threshold))
    if len(bad) == 0:
        return float(t[0])
    if bad[-1] == len(t) - 1:
        return float("inf")
    return float(t[bad[-1] + 1])


def decay_rate(err, t, envelope_period, floor_factor=10.0, start_factor=0.5):
    """Rate of the decay segment: from err first below start_factor*err[0]
    down to floor_factor times the tail floor.  Returns RateFit or None when
    no usable segment exists (diverged, flat, or too short).
    """
    err = np.abs(np.asarray(err, dtype=float))
    t = np.asarray(t, dtype=float)
    if len(err) < 10 or not np.isfinite(err).all() or err[0] <= 0:
        return None
    tail = err[int(0.8 * len(err)):]
    floor = max(float(tail.mean()), LOG_FLOOR)
    below_start = np.flatnonzero(err < start_factor * err[0])
    at_floor = np.flatnonzero(err < floor_factor * floor)
    if len(below_start) == 0 or len(at_floor) == 0:
        return None
    i0, i1 = below_start[0], at_floor[0]
    if t[i1] - t[i0] < 3 * envelope_period:
        # fast transition: fall back to the raw decay stretch
        i0 = max(0, i0 - 1)
        if i1 <= i0 + 4:
            return None
        return fit_rate(err, t, t[i0], t[i1])
    return fit_rate(err, t, t[i0], t[i1], envelope_period=envelope_period)


@dataclass(frozen=True)
class ManifoldProbe:
    """History of pi = Y - Q*xtilde - xi from a KRE diagnostics run."""

    t: np.ndarray
    pi_norm: np.ndarray
    max_pi: float
    max_Y: float
    xi0: tuple

    def bound(self, scale=1e-7):
        return scale * (1.0 + self.max_Y)


def manifold_residual(runlog):
    """Extract the manifold probe from a run; errors when the run lacks it."""
    cols = runlog.columns
    if runlog.observer != "kre":
        raise ValueError("manifold probe needs a KRE run")
    if runlog.config.integration != "continuous" or not runlog.config.diagnostics:
        raise ValueError(
            "manifold probe needs a continuous-integration run with ground-truth "
            "diagnostics enabled")
    pi = cols["pi_norm"]
    if len(pi) == 0 or not np.isfinite(pi).all():
        raise ValueError("run log has no usable pi_norm series")
    max_Y = float(np.max(np.hypot(cols["Y1"], cols["Y2"])))
    return ManifoldProbe(t=cols["t"], pi_norm=pi, max_pi=float(pi.max()),
                         max_Y=max_Y, xi0=tuple(runlog.xi0))


def regression_residual(columns):
    """r = y - Phi^T x - d_true from logged series (needs d_true)."""
    d = columns["d_true"]
    if len(d) == 0 or np.isnan(d).any():
        raise ValueError("run log has no d_true diagnostics")
    return columns["y"] - (columns["phi1"] * columns["x1"]
                           + columns["phi2"] * columns["x2"]) - d


@dataclass(frozen=True)
class RunMetrics:
    """Summary metrics of one run; every field is recomputable from the CSV."""

    observer: str
    diverged: bool
    duration: float
    n_samples: int
    settle_flux_5pct: float | None
    settle_flux_1pct: float | None
    settle_angle_10mrad: float | None
    flux_err_final: float | None
    flux_err_tail_mean: float | None
    flux_err_tail_max: float | None
    angle_err_tail_mean: float | None
    angle_err_tail_max: float | None
    decay_rate: float | None
    decay_rate_r2: float | None
    max_y: float | None
    max_Y: float | None
    pe_delta_hat: float | None
    pe_window: float | None
    pe_sup_phi: float | None
    q_min_eig_after_T: float | None
    max_pi: float | None
    identity_max_after_10_alpha: float | None
    identity_rate: float | None

    def to_dict(self):
        """JSON-safe dict: NaN and +-inf become None."""
        out = {}
        for k, v in asdict(self).items():
            if isinstance(v, float) and not np.isfinite(v):
                v = None
            out[k] = v
        return out


def summarize(columns, config, observer, diverged=False):
    """Compute RunMetrics from logged columns.

    Uses only the logged series plus the scenario config, so the same function
    reproduces the in-run summary exactly from a written CSV.
    """
    t = columns["t"]
    n = len(t)
    if n == 0:
        return RunMetrics(observer=observer, diverged=diverged, duration=0.0,
                          n_samples=0, settle_flux_5pct=None,
                          settle_flux_1pct=None, settle_angle_10mrad=None,
                          flux_err_final=None, flux_err_tail_mean=None,
                          flux_err_tail_max=None, angle_err_tail_mean=None,
                          angle_err_tail_max=None, decay_rate=None,
                          decay_rate_r2=None, max_y=None, max_Y=None,
                          pe_delta_hat=None, pe_window=None, pe_sup_phi=None,
                          q_min_eig_after_T=None, max_pi=None,
                          identity_max_after_10_alpha=None, identity_rate=None)

    psi = config.psi_m
    alpha = config.alpha
    dt = config.dt_sample
    w_mean = abs(config.trajectory().mean_omega(config.duration))
    period = 2 * np.pi / w_mean if w_mean > 0 else None

    ef = columns["err_flux"]
    ea = np.abs(columns["err_angle"])
    tail = slice(int(0.8 * n), n)
    fin = float(ef[-1]) if np.isfinite(ef[-1]) else None

    rate = rate_r2 = None
    if not diverged and period is not None:
        fit = decay_rate(ef, t, envelope_period=0.5 * period)
        if fit is not None:
            rate, rate_r2 = fit.rate, fit.r_squared

    pe_delta = pe_window = pe_sup = None
    if period is not None and not diverged:
        try:
            rep = pe_index(np.stack([columns["phi1"], columns["phi2"]], axis=1),
                           period, dt)
            pe_delta, pe_window, pe_sup = rep.delta_hat, rep.window, rep.sup_phi
        except ValueError:
            pass

    qmin = None
    if observer == "kre" and not diverged and period is not None \
            and np.isfinite(columns["q11"]).all() and t[-1] > period:
        qmin = q_positivity(
            np.stack([columns["q11"], columns["q12"], columns["q22"]], axis=1),
            t, period)

    max_pi = None
    if np.isfinite(columns["pi_norm"]).all() and len(columns["pi_norm"]) > 0:
        max_pi = float(np.max(columns["pi_norm"]))

    max_Y = None
    if observer == "kre" and np.isfinite(columns["Y1"]).all():
        max_Y = float(np.max(np.hypot(columns["Y1"], columns["Y2"])))

    id_max = id_rate = None
    if not diverged and not np.isnan(columns["d_true"]).any() and period is not None:
        r = regression_residual(columns)
        m = t > 10.0 / alpha
        if m.any():
            id_max = float(np.max(np.abs(r[m])))
        if t[-1] > 5.0 / alpha:
            try:
                id_rate = fit_rate(r, t, 0.0, 5.0 / alpha,
                                   envelope_period=0.5 * period).rate
            except ValueError:
                pass

    return RunMetrics(
        observer=observer,
        diverged=diverged,
        duration=float(t[-1]),
        n_samples=n,
        settle_flux_5pct=settling_time(ef, t, 0.05 * psi),
        settle_flux_1pct=settling_time(ef, t, 0.01 * psi),
        settle_angle_10mrad=settling_time(ea, t, 0.01),
        flux_err_final=fin,
        flux_err_tail_mean=float(np.mean(ef[tail])),
        flux_err_tail_max=float(np.max(ef[tail])),
        angle_err_tail_mean=float(np.mean(ea[tail])),
        angle_err_tail_max=float(np.max(ea[tail])),
        decay_rate=rate,
        decay_rate_r2=rate_r2,
        max_y=float(np.max(np.abs(columns["y"]))),
        max_Y=max_Y,
        pe_delta_hat=pe_delta,
        pe_window=pe_window,
        pe_sup_phi=pe_sup,
        q_min_eig_after_T=qmin,
        max_pi=max_pi,
        identity_max_after_10_alpha=id_max,
        identity_rate=id_rate,
    )
