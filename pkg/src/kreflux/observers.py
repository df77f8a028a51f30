"""The three flux/position observers.

All share the structure

    lamhat_dot = v - R*i + E,       x_hat = lamhat - L_q*i,

and differ in the correction term E:

    KRE:       Qdot = -a*(Q - Phi Phi^T), Ydot = -a*(Y - Phi*e) + Q*E,
               E = -gamma*Y,  e = Phi^T x_hat + d_hat - y
    grad_aut:  E = gamma*Phi*(y - Phi^T x_hat - d_hat)
    grad_tie:  E = gamma*Phi*(y - Phi^T x_hat)

Sampled-data discretization: Phi, y, i, v are held over the step (they only
exist at the sampling instants); e, E, d_hat are evaluated once at the step
start, and (Q, Y) advance by one classic RK4 step with those values held.
lamhat has a constant right-hand side over the step, so its RK4 update reduces
to a single Euler increment.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import NumericalFault
from .filters import LowPassState, h1_step
from .motor import angle_from_active_flux
from .regressor import default_eps, sigma


@dataclass(frozen=True)
class ObserverOutput:
    """Estimates emitted at one sampling instant."""

    x_hat: np.ndarray
    theta_hat: float
    E: np.ndarray
    e: float
    d_hat: float = 0.0


@dataclass(frozen=True)
class KreObserverState:
    """Flux estimate plus the regression-extension pair (Q, Y)."""

    params: object
    alpha: float
    gamma: float
    a: float
    eps: float
    lambda_hat: np.ndarray
    Q: np.ndarray
    Y: np.ndarray
    d_filter: LowPassState
    drop_qe: bool = False

    @classmethod
    def create(cls, params, alpha, gamma, a, dt, lambda_hat0=None, eps=None,
               drop_qe=False):
        if gamma <= 0 or a <= 0:
            raise ValueError("gamma and a must be positive")
        return cls(params=params, alpha=alpha, gamma=gamma, a=a,
                   eps=default_eps(params) if eps is None else eps,
                   lambda_hat=np.zeros(2) if lambda_hat0 is None
                   else np.asarray(lambda_hat0, float),
                   Q=np.zeros((2, 2)), Y=np.zeros(2),
                   d_filter=LowPassState(alpha, dt, 0.0), drop_qe=drop_qe)


@dataclass(frozen=True)
class GradObserverState:
    """Flux estimate for the gradient observers; d_filter used by E_aut only."""

    params: object
    alpha: float
    gamma: float
    eps: float
    lambda_hat: np.ndarray
    d_filter: LowPassState | None
    compensated: bool

    @classmethod
    def create(cls, params, alpha, gamma, dt, lambda_hat0=None, eps=None,
               compensated=True):
        if gamma <= 0:
            raise ValueError("gamma must be positive")
        return cls(params=params, alpha=alpha, gamma=gamma,
                   eps=default_eps(params) if eps is None else eps,
                   lambda_hat=np.zeros(2) if lambda_hat0 is None
                   else np.asarray(lambda_hat0, float),
                   d_filter=LowPassState(alpha, dt, 0.0) if compensated else None,
                   compensated=compensated)


def _theta_hat(x_hat):
    if x_hat[0] == 0.0 and x_hat[1] == 0.0:
        return np.nan
    return angle_from_active_flux(x_hat)


def _check_finite(arrs, what):
    for a in arrs:
        if not np.all(np.isfinite(a)):
            raise NumericalFault(f"{what} went non-finite")


def kre_step(state, i, v, Phi, y, dt):
    """One sampling-period update of the KRE observer; returns (state', output)."""
    p = state.params
    i = np.asarray(i, float)
    v = np.asarray(v, float)
    Phi = np.asarray(Phi, float)
    x_hat = state.lambda_hat - p.L_q * i

    # d_hat through the shared filter-bank realization of H1
    g = float(i @ sigma(x_hat, state.eps))
    d_sub, h1_g = h1_step(state.d_filter, g)
    d_hat = -p.ell * h1_g

    e = float(Phi @ x_hat) + d_hat - y
    E = -state.gamma * state.Y

    # RK4 on (Q, Y) with Phi, e, E held
    a = state.a
    PhiPhi = np.outer(Phi, Phi)
    Phie = Phi * e

    def f(Q, Y):
        Qd = -a * (Q - PhiPhi)
        if state.drop_qe:
            Yd = -a * (Y - Phie)  # mutation hook: QE term removed
        else:
            Yd = -a * (Y - Phie) + Q @ E
        return Qd, Yd

    Q, Y = state.Q, state.Y
    kq1, ky1 = f(Q, Y)
    kq2, ky2 = f(Q + 0.5 * dt * kq1, Y + 0.5 * dt * ky1)
    kq3, ky3 = f(Q + 0.5 * dt * kq2, Y + 0.5 * dt * ky2)
    kq4, ky4 = f(Q + dt * kq3, Y + dt * ky3)
    Q_new = Q + dt / 6.0 * (kq1 + 2 * kq2 + 2 * kq3 + kq4)
    Y_new = Y + dt / 6.0 * (ky1 + 2 * ky2 + 2 * ky3 + ky4)
    lam_new = state.lambda_hat + dt * (v - p.R * i + E)
    _check_finite((lam_new, Q_new, Y_new), "KRE observer state")

    out = ObserverOutput(x_hat=x_hat, theta_hat=_theta_hat(x_hat), E=E, e=e,
                         d_hat=d_hat)
    return replace(state, lambda_hat=lam_new, Q=Q_new, Y=Y_new,
                   d_filter=d_sub), out


def _grad_step(state, i, v, Phi, y, dt, use_dhat):
    p = state.params
    i = np.asarray(i, float)
    v = np.asarray(v, float)
    Phi = np.asarray(Phi, float)
    x_hat = state.lambda_hat - p.L_q * i
    d_sub = state.d_filter
    d_hat = 0.0
    if use_dhat:
        g = float(i @ sigma(x_hat, state.eps))
        d_sub, h1_g = h1_step(d_sub, g)
        d_hat = -p.ell * h1_g
    e = y - float(Phi @ x_hat) - d_hat
    E = state.gamma * Phi * e
    lam_new = state.lambda_hat + dt * (v - p.R * i + E)
    _check_finite((lam_new,), "gradient observer state")
    out = ObserverOutput(x_hat=x_hat, theta_hat=_theta_hat(x_hat), E=E, e=e,
                         d_hat=d_hat)
    return replace(state, lambda_hat=lam_new, d_filter=d_sub), out


def grad_aut_step(state, i, v, Phi, y, dt):
    """Gradient observer with disturbance compensation (E_aut)."""
    if not state.compensated:
        raise ValueError("state was created for the uncompensated observer")
    return _grad_step(state, i, v, Phi, y, dt, use_dhat=True)


def grad_tie_step(state, i, v, Phi, y, dt):
    """Uncompensated gradient baseline (E_tie)."""
    return _grad_step(state, i, v, Phi, y, dt, use_dhat=False)
