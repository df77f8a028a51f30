"""Sensorless active-flux observers for IPMSM drives.

A ground-truth motor simulator plus three flux/position observers built on a
filtered linear-regression identity: the Kreisselmeier regression-extension
observer and two gradient baselines (with and without disturbance
compensation), together with the verification instruments that make their
convergence claims testable.
"""

from .analysis import (ManifoldProbe, PEReport, RateFit, RunMetrics, fit_rate,
                       regression_residual, manifold_residual, pe_index,
                       q_positivity, settling_time, sym_eig_2x2)
from .errors import (ConfigError, DegenerateFluxError, KrefluxError,
                     NumericalFault)
from .filters import LowPassState, h1_step, h2_step
from .motor import (GroundTruthSample, MotorParams, MotorState,
                    RotorTrajectory, active_flux, angle_diff,
                    angle_from_active_flux, current_from_flux, dq_to_ab,
                    ab_to_dq, flux_from_current, inductance_matrix,
                    reference_flux, rpm_to_omega_e, simulate_motor, step_motor,
                    synth_feedforward_voltage, wrap_angle)
from .observers import (GradObserverState, KreObserverState, ObserverOutput,
                        grad_aut_step, grad_tie_step, kre_step)
from .regressor import (RegressorSample, RegressorState, default_eps,
                        disturbance_estimate, pipeline_step, sigma,
                        true_disturbance)
from .runner import (RunLog, compare_observers, comparison_table, read_csv,
                     run_scenario, sweep, write_csv)
from .scenario import (ScenarioConfig, bundled_config, bundled_config_path,
                       load_config, parse_config, parse_number)
from .verify import VerifyReport, verify_config

__version__ = "0.1.0"
