"""Built-in verification battery.

Runs the property checks that tie the whole implementation together on a
given scenario config and reports a machine-readable verdict:

  identity_rate          regression-identity residual decays at rate alpha
  identity_floor         |y - Phi^T x - d_true| < 1e-6*max|y| for t > 10/alpha
  manifold_invariance  max|Y - Q*xt - xi| < 1e-7*(1 + max|Y|), gamma in {1, 5}
  manifold_perturbation  perturbed xi(0) -> |pi| tracks |pi(0)|*exp(-a*t) to 1%
  pe                   worst-window min-eig of the windowed int Phi Phi^T > 0
  q_positivity         min-eig Q(t) > 0 for t >= one electrical period
  convergence          theta error settles under 10 mrad inside 1 s, flux
                       error under 1% of psi_m
  gain_monotonicity    KRE at gamma=5 settles faster and decays faster than
                       at gamma=1
  baseline_degradation at gamma=5 the compensated gradient observer settles
                       later than KRE and ends with >= 2x its flux error

The identity checks (identity_*, manifold_*) run in continuous integration,
where the residuals are exact up to integration error; the behavioral checks
run the sampled-data realization from the config.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .analysis import fit_rate, regression_residual, q_positivity
from .runner import run_scenario

IDENTITY_REL_TOL = 1e-6
MANIFOLD_REL_TOL = 1e-7
PERTURB_REL_TOL = 1e-2
RATE_REL_TOL = 0.20
ANGLE_SETTLE_BOUND = 0.01
ANGLE_SETTLE_DEADLINE = 1.0
FLUX_TAIL_REL_BOUND = 0.01
BASELINE_FACTOR = 2.0
XI0_PERTURBATION = (0.01, 0.0)


@dataclass
class CheckResult:
    name: str
    passed: bool
    details: dict = field(default_factory=dict)

    def to_dict(self):
        det = {}
        for k, v in self.details.items():
            if isinstance(v, float) and not math.isfinite(v):
                v = None
            det[k] = v
        return {"name": self.name, "passed": bool(self.passed), **det}


@dataclass
class VerifyReport:
    checks: list

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self):
        return {"passed": self.passed,
                "checks": [c.to_dict() for c in self.checks]}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def render(self):
        lines = []
        for c in self.checks:
            mark = "PASS" if c.passed else "FAIL"
            det = ", ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}"
                            for k, v in c.details.items())
            lines.append(f"[{mark}] {c.name}: {det}")
        lines.append(f"verdict: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def _continuous(cfg):
    return cfg.with_overrides(integration="continuous", diagnostics=True,
                              noise_std_i=0.0, noise_std_v=0.0)


def check_identity(cfg, break_omega1=False):
    """Regression-identity residual: decay rate and post-transient floor."""
    ccfg = _continuous(cfg)
    log = run_scenario(ccfg, observer="kre", break_omega1=break_omega1)
    t = log.columns["t"]
    r = regression_residual(log.columns)
    max_y = float(np.max(np.abs(log.columns["y"])))
    alpha = cfg.alpha
    period = 2 * math.pi / abs(cfg.trajectory().mean_omega(cfg.duration))

    fit = fit_rate(r, t, 0.0, 5.0 / alpha, envelope_period=0.5 * period)
    rate_ok = abs(fit.rate - alpha) <= RATE_REL_TOL * alpha

    mask = t > 10.0 / alpha
    worst = float(np.max(np.abs(r[mask])))
    tol = IDENTITY_REL_TOL * max_y
    return [
        CheckResult("identity_rate", rate_ok,
                    {"fitted_rate": fit.rate, "alpha": alpha,
                     "rel_error": abs(fit.rate - alpha) / alpha,
                     "r_squared": fit.r_squared}),
        CheckResult("identity_floor", worst < tol,
                    {"max_residual_after_10_over_alpha": worst,
                     "tolerance": tol, "max_y": max_y}),
    ]


def check_manifold(cfg, drop_qe=False):
    """Virtual-manifold invariance at gamma in {1, 5} plus the perturbed-xi
    decay law."""
    ccfg = _continuous(cfg)
    worst_ratio = -math.inf
    details = {}
    for gamma in (1.0, 5.0):
        log = run_scenario(ccfg.with_overrides(gamma=gamma), observer="kre",
                           drop_qe=drop_qe)
        pi = log.columns["pi_norm"]
        max_pi = float(np.max(pi)) if len(pi) and np.isfinite(pi).all() else math.inf
        max_Y = log.metrics.max_Y if log.metrics.max_Y is not None else 0.0
        bound = MANIFOLD_REL_TOL * (1.0 + max_Y)
        ratio = max_pi / bound
        details[f"max_pi_gamma{gamma:g}"] = max_pi
        details[f"bound_gamma{gamma:g}"] = bound
        worst_ratio = max(worst_ratio, ratio)
    inv = CheckResult("manifold_invariance", worst_ratio < 1.0, details)

    # perturbed probe: pi(0) = -xi(0), then pi(t) = |pi(0)|*exp(-a*t)
    pcfg = ccfg.with_overrides(duration=min(cfg.duration, 0.5))
    plog = run_scenario(pcfg, observer="kre", xi0=XI0_PERTURBATION,
                        drop_qe=drop_qe)
    t = plog.columns["t"]
    pi = plog.columns["pi_norm"]
    pi0 = math.hypot(*XI0_PERTURBATION)
    ref = pi0 * np.exp(-cfg.a * t)
    mask = ref > 1e-4 * pi0  # above the unperturbed probe floor
    rel = float(np.max(np.abs(pi[mask] - ref[mask]) / ref[mask]))
    pert = CheckResult("manifold_perturbation", rel < PERTURB_REL_TOL,
                       {"max_rel_error": rel, "tolerance": PERTURB_REL_TOL,
                        "checked_points": int(mask.sum())})
    return [inv, pert]


def check_pe_and_q(cfg):
    """PE of Phi over one electrical period, and positivity of Q after it."""
    log = run_scenario(cfg, observer="kre")
    m = log.metrics
    pe = CheckResult("pe", m.pe_delta_hat is not None
                     and m.pe_delta_hat > cfg.pe_delta_min,
                     {"delta_hat": m.pe_delta_hat, "window": m.pe_window,
                      "sup_phi": m.pe_sup_phi, "delta_min": cfg.pe_delta_min})
    period = 2 * math.pi / abs(cfg.trajectory().mean_omega(cfg.duration))
    qmin = q_positivity(
        np.stack([log.columns["q11"], log.columns["q12"], log.columns["q22"]],
                 axis=1), log.columns["t"], period)
    qpos = CheckResult("q_positivity", qmin > 0.0,
                       {"min_eig_after_T": qmin, "T": period})
    return [pe, qpos]


def check_convergence(cfg):
    """There is a settling time t_s < 1 s past which the angle error stays
    below 10 mrad and the flux error below 1% of psi_m (settling times are
    forever-after by construction)."""
    log = run_scenario(cfg, observer="kre")
    m = log.metrics
    s_angle = m.settle_angle_10mrad
    s_flux = m.settle_flux_1pct
    ok = (not log.diverged and s_angle is not None and s_flux is not None
          and max(s_angle, s_flux) < ANGLE_SETTLE_DEADLINE)
    return [CheckResult("convergence", ok,
                        {"settle_angle_10mrad": s_angle,
                         "settle_flux_1pct": s_flux,
                         "deadline": ANGLE_SETTLE_DEADLINE,
                         "angle_tail_max": m.angle_err_tail_max,
                         "flux_tail_max": m.flux_err_tail_max,
                         "diverged": log.diverged})]


def check_gain_monotonicity(cfg):
    """KRE gamma=5 settles strictly faster and decays strictly faster than
    gamma=1."""
    logs = {g: run_scenario(cfg.with_overrides(gamma=g), observer="kre")
            for g in (1.0, 5.0)}
    s1 = logs[1.0].metrics.settle_flux_5pct
    s5 = logs[5.0].metrics.settle_flux_5pct
    r1 = logs[1.0].metrics.decay_rate
    r5 = logs[5.0].metrics.decay_rate
    ok = (s5 is not None and s1 is not None and s5 < s1
          and r1 is not None and r5 is not None and r5 > r1)
    return [CheckResult("gain_monotonicity", ok,
                        {"settle_gamma1": s1, "settle_gamma5": s5,
                         "rate_gamma1": r1, "rate_gamma5": r5})]


def check_baseline_degradation(cfg):
    """At gamma=5 the compensated gradient observer is strictly worse than
    KRE: later settling and a final flux error at least 2x larger."""
    gcfg = cfg.with_overrides(gamma=5.0)
    kre = run_scenario(gcfg, observer="kre")
    aut = run_scenario(gcfg, observer="grad_aut")
    s_kre = kre.metrics.settle_flux_5pct
    s_aut = aut.metrics.settle_flux_5pct
    f_kre = kre.metrics.flux_err_final
    f_aut = aut.metrics.flux_err_final
    if aut.diverged or f_aut is None or not math.isfinite(f_aut):
        # divergence counts as unbounded final error
        f_aut = math.inf
    ratio = f_aut / f_kre if f_kre and f_kre > 0 else math.inf
    ok = (s_aut > s_kre) and (ratio >= BASELINE_FACTOR)
    return [CheckResult("baseline_degradation", ok,
                        {"settle_kre": s_kre, "settle_grad_aut": s_aut,
                         "final_flux_kre": f_kre, "final_flux_grad_aut": f_aut,
                         "ratio": ratio, "grad_aut_diverged": aut.diverged})]


ALL_CHECKS = ("identity", "manifold", "pe_q", "convergence",
              "gain_monotonicity", "baseline_degradation")


def verify_config(cfg, checks=None, break_omega1=False, drop_qe=False):
    """Run the battery (or a subset) on a config; returns a VerifyReport."""
    checks = ALL_CHECKS if checks is None else tuple(checks)
    results = []
    for name in checks:
        if name == "identity":
            results += check_identity(cfg, break_omega1=break_omega1)
        elif name == "manifold":
            results += check_manifold(cfg, drop_qe=drop_qe)
        elif name == "pe_q":
            results += check_pe_and_q(cfg)
        elif name == "convergence":
            results += check_convergence(cfg)
        elif name == "gain_monotonicity":
            results += check_gain_monotonicity(cfg)
        elif name == "baseline_degradation":
            results += check_baseline_degradation(cfg)
        else:
            raise ValueError(f"unknown check {name!r}")
    return VerifyReport(results)
