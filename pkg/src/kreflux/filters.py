"""First-order LTI filters H1(p) = alpha*p/(p+alpha) and H2(p) = alpha/(p+alpha).

H2 is discretized with the exact zero-order-hold map

    z' = a_d*z + (1 - a_d)*u,        a_d = exp(-alpha*dt),

which matches the analytic solution of zdot = -alpha*(z - u) exactly for
inputs held constant over the step.  H1 is never realized by differentiation;
it uses the algebraic identity H1 = alpha*(1 - H2), i.e. y1 = alpha*(u - z').

States are value-semantic: each step returns a new state record.
"""

from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class LowPassState:
    """Internal state of one H2 stage (also the substate of an H1 stage)."""

    alpha: float
    dt: float
    z: float | np.ndarray = 0.0
    a_d: float = None

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.a_d is None:
            object.__setattr__(self, "a_d", float(np.exp(-self.alpha * self.dt)))
        if isinstance(self.z, np.ndarray):
            object.__setattr__(self, "z", self.z.astype(float))


def h2_step(state, u):
    """One ZOH-exact step of H2; returns (new state, output)."""
    z_new = state.a_d * state.z + (1.0 - state.a_d) * u
    return replace(state, z=z_new), z_new


def h1_step(state, u):
    """One step of H1 via y1 = alpha*(u - H2[u]); returns (new state, output)."""
    state, z_new = h2_step(state, u)
    return state, state.alpha * (u - z_new)
