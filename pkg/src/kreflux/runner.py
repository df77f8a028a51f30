"""Scenario execution: drives the kernels, logs time series, writes CSV and
JSON summaries, and runs observer comparisons and parameter sweeps.
"""

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .analysis import summarize
from .errors import ConfigError
from .kernels import LOG_COLUMNS
from .scenario import OBSERVERS, ScenarioConfig

_KIND = {"kre": kernels.KIND_KRE, "grad_aut": kernels.KIND_GRAD_AUT,
         "grad_tie": kernels.KIND_GRAD_TIE}

CSV_FMT = "%.17g"


@dataclass
class RunLog:
    """Time series plus summary for one scenario run."""

    config: ScenarioConfig
    observer: str
    columns: dict
    diverged: bool
    diverged_at: int
    xi0: tuple
    metrics: object = field(default=None)

    @property
    def summary(self):
        return self.metrics

    def write_csv(self, path):
        write_csv(path, self.columns)

    def write_metrics(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.metrics.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def write_csv(path, columns):
    """Write the canonical 20-column CSV; NaN cells become empty fields."""
    names = list(LOG_COLUMNS)
    n = len(columns["t"])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(names) + "\n")
        for k in range(n):
            cells = []
            for name in names:
                v = columns[name][k]
                cells.append("" if math.isnan(v) else CSV_FMT % v)
            fh.write(",".join(cells) + "\n")


def read_csv(path):
    """Read a run CSV back into a column dict (empty fields -> NaN)."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
    out = {}
    for j, name in enumerate(header):
        out[name] = np.array(
            [float(r[j]) if r[j] != "" else np.nan for r in rows], dtype=float)
    return out


def _initial_lambda_hat(cfg):
    th0 = cfg.theta0 + cfg.init_angle_offset
    return np.array([cfg.init_mag_scale * cfg.psi_m * np.cos(th0),
                     cfg.init_mag_scale * cfg.psi_m * np.sin(th0)])


def run_scenario(cfg, observer=None, xi0=(0.0, 0.0), break_omega1=False,
                 drop_qe=False):
    """Run one scenario for one observer; returns a RunLog.

    observer overrides cfg.observer ('all' is not accepted here; expand it at
    the call site).  xi0 perturbs the manifold-probe initial state
    (continuous-mode KRE runs only).
    """
    observer = observer or cfg.observer
    if observer not in OBSERVERS:
        raise ValueError(f"run_scenario needs a single observer, got {observer!r}")
    params = cfg.motor_params()
    segs = cfg.trajectory().as_array()
    n = int(round(cfg.duration / cfg.dt_sample))
    n_sub = cfg.sample_ratio()
    lamhat0 = _initial_lambda_hat(cfg)
    kind = _KIND[observer]
    diag = 1 if cfg.diagnostics else 0

    if n == 0:
        columns = {name: np.empty(0) for name in LOG_COLUMNS}
        log = RunLog(config=cfg, observer=observer, columns=columns,
                     diverged=False, diverged_at=-1, xi0=tuple(xi0))
        log.metrics = summarize(columns, cfg, observer, diverged=False)
        return log

    if cfg.integration == "continuous":
        raw, diverged_at = kernels.run_continuous(
            n, cfg.dt_sample, n_sub, segs, params.R, params.L_d, params.L_q,
            params.psi_m, cfg.i_d_ref, cfg.i_q_ref, cfg.alpha, cfg.a,
            cfg.gamma, cfg.eps, kind, lamhat0, np.asarray(xi0, dtype=float),
            1 if break_omega1 else 0, 1 if drop_qe else 0, diag)
    else:
        rng = np.random.default_rng(cfg.seed)
        if cfg.noise_std_i > 0:
            noise_i = rng.normal(0.0, cfg.noise_std_i, size=(n + 1, 2))
        else:
            noise_i = np.zeros((n + 1, 2))
        if cfg.noise_std_v > 0:
            noise_v = rng.normal(0.0, cfg.noise_std_v, size=(n + 1, 2))
        else:
            noise_v = np.zeros((n + 1, 2))
        raw, diverged_at = kernels.run_sampled(
            n, cfg.dt_sample, n_sub, segs, params.R, params.L_d, params.L_q,
            params.psi_m, cfg.i_d_ref, cfg.i_q_ref, cfg.alpha, cfg.a,
            cfg.gamma, cfg.eps, kind, lamhat0, noise_i, noise_v,
            1 if break_omega1 else 0, 1 if drop_qe else 0, diag)

    diverged = diverged_at >= 0
    columns = {name: np.ascontiguousarray(raw[:, j])
               for j, name in enumerate(LOG_COLUMNS)}
    log = RunLog(config=cfg, observer=observer, columns=columns,
                 diverged=diverged, diverged_at=int(diverged_at), xi0=tuple(xi0))
    log.metrics = summarize(columns, cfg, observer, diverged=diverged)
    return log


def expand_observers(cfg, observers=None):
    if observers is None:
        observers = OBSERVERS if cfg.observer == "all" else (cfg.observer,)
    if isinstance(observers, str):
        observers = tuple(observers.split(","))
    bad = [o for o in observers if o not in OBSERVERS]
    if bad:
        raise ValueError(f"unknown observers {bad}; valid: {OBSERVERS}")
    return tuple(observers)


def compare_observers(cfg, observers=None, max_workers=3):
    """Run several observers on identical input streams; returns
    {observer: RunLog}.  Each observer gets its own pipeline clone; the
    ground-truth trace is identical because every run is driven by the same
    deterministic scenario and seed.
    """
    observers = expand_observers(cfg, observers)
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        futs = {obs: pool.submit(run_scenario, cfg, observer=obs)
                for obs in observers}
        return {obs: fut.result() for obs, fut in futs.items()}


def comparison_table(results):
    """Plain-text side-by-side metrics table."""
    fields = (("settle_flux_5pct", "settle |xt|<5%psi [s]"),
              ("settle_angle_10mrad", "settle |tht|<0.01 [s]"),
              ("decay_rate", "decay rate [1/s]"),
              ("flux_err_final", "final |xt| [Wb]"),
              ("flux_err_tail_mean", "steady |xt| [Wb]"),
              ("angle_err_tail_mean", "steady |tht| [rad]"),
              ("diverged", "diverged"))
    names = list(results)
    width = 24
    lines = ["".ljust(width) + "".join(n.rjust(16) for n in names)]
    for key, label in fields:
        cells = []
        for n in names:
            v = getattr(results[n].metrics, key)
            if v is None:
                cells.append("-".rjust(16))
            elif isinstance(v, bool):
                cells.append(("yes" if v else "no").rjust(16))
            elif isinstance(v, float) and math.isinf(v):
                cells.append("never".rjust(16))
            else:
                cells.append(f"{v:.6g}".rjust(16))
        lines.append(label.ljust(width) + "".join(cells))
    return "\n".join(lines)


def sweep(cfg, param, values, max_workers=4):
    """Run the configured observer across a parameter sweep.

    param is one of gamma / a / alpha; values are floats.  Divergence is a
    sweep outcome, not an error.  Returns a list of (value, RunLog).
    """
    if param not in ("gamma", "a", "alpha"):
        raise ConfigError(f"sweep parameter must be gamma, a or alpha, got {param!r}")
    observer = cfg.observer if cfg.observer != "all" else "kre"
    configs = [cfg.with_overrides(**{param: v}) for v in values]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        futs = [pool.submit(run_scenario, c, observer=observer) for c in configs]
        return list(zip(values, (f.result() for f in futs)))
