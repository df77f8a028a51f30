"""Regression-signal pipeline: from measured (v, i) streams to Omega1, Omega2,
Phi, the scalar regressand y, and the disturbance estimates.

All signals come out of one shared filter bank (a single alpha, a single dt):

    Omega1 = H2[v - R*i] - L_q*H1[i]        (H2[p i] realized as H1[i])
    Omega2 = Omega1 - L0*H1[i]
    Phi    = Omega1 + Omega2
    y      = L0*H2[i]^T Omega1 + |Omega1|^2/alpha + H2[Omega2^T Omega1]/alpha

and the disturbance channels

    d_hat  = -ell*H1[i^T sigma(x_hat)]      (observer side, sigma-clamped)
    d_true = -ell*H1[i^T x/|x|]             (diagnostics only, needs true x)

Along a true trajectory, y = Phi^T x + d + eps_t with eps_t decaying at rate
alpha from the zero-initialized filter states.  The measured current is never
differentiated anywhere.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import DegenerateFluxError
from .filters import LowPassState, h1_step, h2_step


@dataclass(frozen=True)
class RegressorSample:
    """Pipeline outputs at one time step."""

    t: float
    Omega1: np.ndarray
    Omega2: np.ndarray
    Phi: np.ndarray
    y: float
    d_hat: float | None = None
    d_true: float | None = None


@dataclass(frozen=True)
class RegressorState:
    """Filter bank for one measurement stream.

    Sub-filters (all sharing alpha and dt): H2 on v - R*i (2), H1 substate on
    i (2), H2 on i (2), H2 on the scalar Omega2^T Omega1 (1), H1 substates for
    the d_hat and d_true channels (1 each).
    """

    params: object
    alpha: float
    dt: float
    f_vri: LowPassState
    f_i_h1: LowPassState
    f_i_h2: LowPassState
    f_yy: LowPassState
    f_dhat: LowPassState
    f_dtrue: LowPassState
    break_omega1: bool = False

    @classmethod
    def create(cls, params, alpha, dt, break_omega1=False,
               z_vri=None, z_dtrue=0.0):
        """Fresh bank with zero states (eps_t arises exactly from this choice).

        z_vri / z_dtrue allow consistent warm starts for identity experiments.
        """
        vec = lambda z: LowPassState(alpha, dt, np.zeros(2) if z is None else np.asarray(z, float))  # noqa: E731
        sca = lambda z: LowPassState(alpha, dt, float(z))  # noqa: E731
        return cls(params=params, alpha=alpha, dt=dt,
                   f_vri=vec(z_vri), f_i_h1=vec(None), f_i_h2=vec(None),
                   f_yy=sca(0.0), f_dhat=sca(0.0), f_dtrue=sca(z_dtrue),
                   break_omega1=break_omega1)


def pipeline_step(state, i, v, dt):
    """Advance the measurable part of the bank by one sample.

    Returns (state', Omega1, Omega2, Phi, y).  The inner H2 sees the current
    step's Omega2^T Omega1.
    """
    if abs(dt - state.dt) > 1e-12 * state.dt:
        raise ValueError(f"dt {dt} does not match filter bank dt {state.dt}")
    i = np.asarray(i, dtype=float)
    v = np.asarray(v, dtype=float)
    p = state.params
    f_vri, h2_vri = h2_step(state.f_vri, v - p.R * i)
    f_i_h1, h1_i = h1_step(state.f_i_h1, i)
    f_i_h2, h2_i = h2_step(state.f_i_h2, i)
    if state.break_omega1:
        omega1 = h2_vri  # mutation hook: drops the L_q*H1[i] term
    else:
        omega1 = h2_vri - p.L_q * h1_i
    omega2 = omega1 - p.L0 * h1_i
    phi = omega1 + omega2
    f_yy, h2_yy = h2_step(state.f_yy, float(omega2 @ omega1))
    y = p.L0 * float(h2_i @ omega1) + float(omega1 @ omega1) / state.alpha \
        + h2_yy / state.alpha
    state = replace(state, f_vri=f_vri, f_i_h1=f_i_h1, f_i_h2=f_i_h2, f_yy=f_yy)
    return state, omega1, omega2, phi, y


def sigma(x_hat, eps):
    """x_hat/|x_hat| when |x_hat| >= eps, else the zero vector."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    x_hat = np.asarray(x_hat, dtype=float)
    n = np.hypot(x_hat[0], x_hat[1])
    if n >= eps:
        return x_hat / n
    return np.zeros(2)


def default_eps(params):
    """sigma threshold: 0.1*psi_m, inside (0, x_min) for both bundled scenarios."""
    return 0.1 * params.psi_m


def disturbance_estimate(state, i, x_hat, eps):
    """d_hat = -ell*H1[i^T sigma(x_hat)]; returns (state', d_hat)."""
    g = float(np.asarray(i, float) @ sigma(x_hat, eps))
    f_dhat, h1_g = h1_step(state.f_dhat, g)
    return replace(state, f_dhat=f_dhat), -state.params.ell * h1_g


def true_disturbance(state, i, x_true):
    """d = -ell*H1[i^T x/|x|] from the true active flux (diagnostics only)."""
    x = np.asarray(x_true, dtype=float)
    n = np.hypot(x[0], x[1])
    if n == 0.0:
        raise DegenerateFluxError("true active flux is zero")
    g = float(np.asarray(i, float) @ (x / n))
    f_dtrue, h1_g = h1_step(state.f_dtrue, g)
    return replace(state, f_dtrue=f_dtrue), -state.params.ell * h1_g
