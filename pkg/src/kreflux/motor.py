"""Ground-truth IPMSM electrical model in the stationary alpha-beta frame.

The rotor motion is kinematic: theta(t) and omega_e(t) come from a prescribed
piecewise trajectory (constant speed / linear ramp), with theta the exact
analytic integral of omega_e inside each segment.  The electrical state is the
stator flux lambda with

    dlambda/dt = -R*i + v,      i = Linv(theta) @ (lambda - psi_m*c(theta)),

and the active flux x = lambda - L_q*i is collinear with c(theta) whenever
|L0*i| < psi_m.  All angles and speeds are electrical.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFluxError, NumericalFault

TWO_PI = 2.0 * np.pi


def wrap_angle(a):
    """Wrap an angle (or array of angles) to (-pi, pi]."""
    w = np.arctan2(np.sin(a), np.cos(a))
    # arctan2 returns -pi for inputs at the branch cut; map to +pi
    return np.where(w == -np.pi, np.pi, w) if np.ndim(w) else (np.pi if w == -np.pi else w)


def angle_diff(a, b):
    """Wrapped difference a - b in (-pi, pi]."""
    return wrap_angle(np.asarray(a) - np.asarray(b))


def rpm_to_omega_e(rpm, pole_pairs):
    """Mechanical rpm to electrical rad/s."""
    return rpm / 60.0 * TWO_PI * pole_pairs


def rotation(theta):
    """2x2 rotation matrix (dq -> alpha-beta for column vectors)."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def dq_to_ab(v_dq, theta):
    return rotation(theta) @ np.asarray(v_dq, dtype=float)


def ab_to_dq(v_ab, theta):
    return rotation(theta).T @ np.asarray(v_ab, dtype=float)


@dataclass(frozen=True)
class MotorParams:
    """Electrical constants of the machine (SI units, electrical angles)."""

    R: float
    L_d: float
    L_q: float
    psi_m: float
    pole_pairs: int

    def __post_init__(self):
        if self.R <= 0 or self.L_d <= 0 or self.L_q <= 0 or self.psi_m <= 0:
            raise ValueError("R, L_d, L_q, psi_m must all be positive")
        if int(self.pole_pairs) != self.pole_pairs or self.pole_pairs < 1:
            raise ValueError("pole_pairs must be a positive integer")

    @property
    def L0(self):
        """Inductance difference L_d - L_q."""
        return self.L_d - self.L_q

    @property
    def Ls(self):
        """Averaged inductance (L_d + L_q)/2."""
        return 0.5 * (self.L_d + self.L_q)

    @property
    def ell(self):
        """Disturbance scale psi_m * L0."""
        return self.psi_m * self.L0


@dataclass(frozen=True)
class TrajSegment:
    """One analytic trajectory piece: theta(t) = theta0 + w0*(t-t0) + 0.5*acc*(t-t0)^2."""

    t0: float
    t1: float
    theta0: float
    omega0: float
    accel: float

    def theta(self, t):
        dt = t - self.t0
        return self.theta0 + self.omega0 * dt + 0.5 * self.accel * dt * dt

    def omega(self, t):
        return self.omega0 + self.accel * (t - self.t0)


@dataclass(frozen=True)
class RotorTrajectory:
    """Piecewise electrical-angle trajectory; extends at constant speed past the end."""

    segments: tuple

    @classmethod
    def constant(cls, omega_e, theta0=0.0):
        return cls((TrajSegment(0.0, np.inf, float(theta0), float(omega_e), 0.0),))

    @classmethod
    def from_segments(cls, specs, theta0=0.0):
        """Build from (kind, ...) tuples: ("const", omega_e, duration) or
        ("ramp", omega_from, omega_to, duration).  Speeds in electrical rad/s."""
        segs = []
        t0, th = 0.0, float(theta0)
        for item in specs:
            kind = item[0]
            if kind == "const":
                _, w, dur = item
                seg = TrajSegment(t0, t0 + dur, th, float(w), 0.0)
            elif kind == "ramp":
                _, w0, w1, dur = item
                if dur <= 0:
                    raise ValueError("ramp segment needs duration > 0")
                seg = TrajSegment(t0, t0 + dur, th, float(w0), (w1 - w0) / dur)
            else:
                raise ValueError(f"unknown segment kind {kind!r}")
            segs.append(seg)
            th = seg.theta(seg.t1)
            t0 = seg.t1
        last = segs[-1]
        segs.append(TrajSegment(t0, np.inf, th, last.omega(last.t1), 0.0))
        return cls(tuple(segs))

    def _segment_at(self, t):
        for seg in self.segments:
            if t < seg.t1:
                return seg
        return self.segments[-1]

    def theta(self, t):
        return self._segment_at(t).theta(t)

    def omega(self, t):
        return self._segment_at(t).omega(t)

    def mean_omega(self, duration):
        """Average electrical speed over [0, duration]."""
        if duration <= 0:
            return self.omega(0.0)
        return (self.theta(duration) - self.theta(0.0)) / duration

    def as_array(self):
        """(n, 5) float array [t0, t1, theta0, omega0, accel] for the kernels."""
        return np.array(
            [[s.t0, s.t1, s.theta0, s.omega0, s.accel] for s in self.segments]
        )


@dataclass(frozen=True)
class MotorState:
    """Stator flux and time."""

    lam: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "lam", np.asarray(self.lam, dtype=float))
        if not np.all(np.isfinite(self.lam)):
            raise NumericalFault("motor state is non-finite")


@dataclass(frozen=True)
class GroundTruthSample:
    """One time step of the true trajectory, as seen by the estimators."""

    t: float
    theta: float
    lam: np.ndarray
    i: np.ndarray
    v: np.ndarray
    x: np.ndarray
    d_true: float | None = None


def inductance_matrix(theta, params):
    """L(theta) = Ls*I + (L0/2)*Q(theta); eigenvalues are exactly {L_d, L_q}."""
    c2, s2 = np.cos(2 * theta), np.sin(2 * theta)
    Ls, L0 = params.Ls, params.L0
    return np.array([[Ls + 0.5 * L0 * c2, 0.5 * L0 * s2],
                     [0.5 * L0 * s2, Ls - 0.5 * L0 * c2]])


def current_from_flux(lam, theta, params):
    """i = Linv(theta) @ (lambda - psi_m*c(theta)).

    Uses the eigen-decomposition Linv = (1/L_d) c c^T + (1/L_q)(I - c c^T),
    so no matrix inversion is needed.
    """
    lam = np.asarray(lam, dtype=float)
    c = np.array([np.cos(theta), np.sin(theta)])
    e = lam - params.psi_m * c
    ed = c @ e
    return ed / params.L_d * c + (e - ed * c) / params.L_q


def flux_from_current(i, theta, params):
    """lambda = L(theta) @ i + psi_m*c(theta)  (inverse of current_from_flux)."""
    i = np.asarray(i, dtype=float)
    c = np.array([np.cos(theta), np.sin(theta)])
    i_d = c @ i
    return params.L_d * i_d * c + params.L_q * (i - i_d * c) + params.psi_m * c


def active_flux(lam, i, params):
    """x = lambda - L_q*i."""
    return np.asarray(lam, dtype=float) - params.L_q * np.asarray(i, dtype=float)


def angle_from_active_flux(x):
    """Rotor angle atan2(x2, x1) in (-pi, pi]; |x| = 0 is degenerate."""
    x = np.asarray(x, dtype=float)
    if x[0] == 0.0 and x[1] == 0.0:
        raise DegenerateFluxError("active flux vector is zero; angle undefined")
    return wrap_angle(np.arctan2(x[1], x[0]))


def synth_feedforward_voltage(traj, i_dq_ref, t, params):
    """Voltage that keeps the motor on the constant-i_dq reference trajectory.

    v = dlambda*/dt + R*i* with lambda*(t) = R(theta) @ lam_dq and constant
    lam_dq = (L_d*i_d + psi_m, L_q*i_q); the derivative is analytic, using the
    segment's omega_e(t).
    """
    i_d, i_q = float(i_dq_ref[0]), float(i_dq_ref[1])
    lam_d = params.L_d * i_d + params.psi_m
    lam_q = params.L_q * i_q
    th = traj.theta(t)
    w = traj.omega(t)
    # v_dq = R*i_dq + w*J@lam_dq, rotated to alpha-beta
    v_d = params.R * i_d - w * lam_q
    v_q = params.R * i_q + w * lam_d
    c, s = np.cos(th), np.sin(th)
    return np.array([c * v_d - s * v_q, s * v_d + c * v_q])


def reference_flux(traj, i_dq_ref, t, params):
    """lambda*(t) for the constant-i_dq reference (used to start on-trajectory)."""
    return flux_from_current(dq_to_ab(i_dq_ref, traj.theta(t)), traj.theta(t), params)


def step_motor(state, v, traj, params, dt):
    """Advance dlambda/dt = -R*i + v by one RK4 step.

    i is re-evaluated from (lambda, theta) at the internal stages; v may be a
    2-vector (held over the step) or a callable t -> 2-vector evaluated at the
    stage times.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if callable(v):
        v_fn = v
    else:
        v_const = np.asarray(v, dtype=float)
        v_fn = lambda _t: v_const  # noqa: E731

    def f(lam, t):
        i = current_from_flux(lam, traj.theta(t), params)
        return v_fn(t) - params.R * i

    lam, t = state.lam, state.t
    k1 = f(lam, t)
    k2 = f(lam + 0.5 * dt * k1, t + 0.5 * dt)
    k3 = f(lam + 0.5 * dt * k2, t + 0.5 * dt)
    k4 = f(lam + dt * k3, t + dt)
    lam_new = lam + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(lam_new)):
        raise NumericalFault("motor integration went non-finite")
    return MotorState(lam_new, t + dt)


def simulate_motor(traj, params, v, t_end, dt, lam0=None):
    """Fixed-step RK4 simulation; returns (t, lam) arrays with n+1 rows."""
    n = int(round(t_end / dt))
    state = MotorState(np.zeros(2) if lam0 is None else np.asarray(lam0, float), 0.0)
    t_out = np.empty(n + 1)
    lam_out = np.empty((n + 1, 2))
    t_out[0] = 0.0
    lam_out[0] = state.lam
    for k in range(n):
        state = step_motor(state, v, traj, params, dt)
        t_out[k + 1] = state.t
        lam_out[k + 1] = state.lam
    return t_out, lam_out
