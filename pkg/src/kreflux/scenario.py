"""Scenario configuration: the line-oriented `key = value` format, validation,
and the two bundled configs.

Format rules: one `key = value` per line, `#` starts a comment, SI units,
angles in rad.  Numbers accept a `pi` suffix (`200pi` means 200*pi).  Speeds
are given either as `speed_rpm` / `omega_e` for a single constant-speed run,
or as repeated `segment =` lines:

    segment = const <rpm> <duration_s>
    segment = ramp <rpm_from> <rpm_to> <duration_s>

Unknown keys are rejected; errors name the key and line.
"""

import math
from dataclasses import dataclass, replace

from .errors import ConfigError
from .motor import MotorParams, RotorTrajectory, rpm_to_omega_e

OBSERVERS = ("kre", "grad_aut", "grad_tie")

_REQUIRED = ("R", "L_d", "L_q", "psi_m", "pole_pairs", "duration")

_DEFAULTS = {
    "theta0": 0.0,
    "i_d_ref": 0.0,
    "i_q_ref": 2.0,
    "gamma": 1.0,
    "a": 20.0 * math.pi,
    "alpha": 200.0 * math.pi,
    "eps": None,  # 0.1*psi_m unless set
    "dt_truth": 1e-5,
    "dt_sample": 1e-4,
    "init_angle_offset": 0.0,
    "init_mag_scale": 1.0,
    "noise_std_i": 0.0,
    "noise_std_v": 0.0,
    "observer": "kre",
    "seed": 0,
    "integration": "sampled",
    "diagnostics": True,
    "pe_delta_min": 0.0,
}


def parse_number(text):
    """Float with optional `pi` suffix: '200pi' -> 200*pi."""
    text = text.strip()
    if text.lower().endswith("pi"):
        return float(text[:-2] or "1") * math.pi
    return float(text)


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated, fully-resolved experiment description."""

    R: float
    L_d: float
    L_q: float
    psi_m: float
    pole_pairs: int
    duration: float
    theta0: float
    segments: tuple  # ("const", omega_e, dur) / ("ramp", w0, w1, dur), rad/s
    i_d_ref: float
    i_q_ref: float
    gamma: float
    a: float
    alpha: float
    eps: float
    dt_truth: float
    dt_sample: float
    init_angle_offset: float
    init_mag_scale: float
    noise_std_i: float
    noise_std_v: float
    observer: str
    seed: int
    integration: str
    diagnostics: bool
    pe_delta_min: float

    def motor_params(self):
        return MotorParams(R=self.R, L_d=self.L_d, L_q=self.L_q,
                           psi_m=self.psi_m, pole_pairs=self.pole_pairs)

    def trajectory(self):
        return RotorTrajectory.from_segments(self.segments, theta0=self.theta0)

    def sample_ratio(self):
        return int(round(self.dt_sample / self.dt_truth))

    def with_overrides(self, **kw):
        return replace(self, **kw)


def _validate(cfg, lines_of_key):
    def err(msg, key):
        raise ConfigError(msg, key=key, line=lines_of_key.get(key))

    if cfg.duration < 0:
        err("duration must be >= 0", "duration")
    for key in ("gamma", "a", "alpha"):
        if getattr(cfg, key) <= 0:
            err(f"{key} must be > 0", key)
    if cfg.eps <= 0:
        err("eps must be > 0", "eps")
    if cfg.dt_truth <= 0 or cfg.dt_sample <= 0:
        err("dt_truth and dt_sample must be > 0", "dt_sample")
    ratio = cfg.dt_sample / cfg.dt_truth
    if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
        err(f"dt_sample must be an integer multiple of dt_truth (ratio {ratio})",
            "dt_sample")
    if cfg.observer not in OBSERVERS + ("all",):
        err(f"observer must be one of {OBSERVERS + ('all',)}", "observer")
    if cfg.integration not in ("sampled", "continuous"):
        err("integration must be 'sampled' or 'continuous'", "integration")
    if cfg.integration == "continuous" and (cfg.noise_std_i > 0 or cfg.noise_std_v > 0):
        err("measurement noise is not meaningful in continuous integration",
            "integration")
    if cfg.noise_std_i < 0 or cfg.noise_std_v < 0:
        err("noise std must be >= 0", "noise_std_i")
    if cfg.init_mag_scale <= 0:
        err("init_mag_scale must be > 0", "init_mag_scale")
    try:
        cfg.motor_params()
    except ValueError as exc:
        err(str(exc), "R")
    # segments shorter than the run simply extend at the final speed
    return cfg


def parse_config(text):
    """Parse the key = value format into a ScenarioConfig."""
    raw = {}
    lines_of_key = {}
    segments_rpm = []
    for ln, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"expected 'key = value', got {stripped!r}", line=ln)
        key, value = (part.strip() for part in stripped.split("=", 1))
        if not key or not value:
            raise ConfigError(f"expected 'key = value', got {stripped!r}",
                              key=key or None, line=ln)
        if key == "segment":
            segments_rpm.append((value, ln))
            continue
        if key in raw:
            raise ConfigError(f"duplicate key {key!r}", key=key, line=ln)
        raw[key] = value
        lines_of_key[key] = ln

    known = set(_REQUIRED) | set(_DEFAULTS) | {"speed_rpm", "omega_e"}
    for key in raw:
        if key not in known:
            raise ConfigError(f"unknown key {key!r}", key=key,
                              line=lines_of_key[key])
    for key in _REQUIRED:
        if key not in raw:
            raise ConfigError(f"missing required key {key!r}", key=key)

    def num(key, default=None):
        if key not in raw:
            return default
        try:
            return parse_number(raw[key])
        except ValueError:
            raise ConfigError(f"non-numeric value {raw[key]!r} for {key!r}",
                              key=key, line=lines_of_key[key]) from None

    pole_pairs_f = num("pole_pairs")
    if pole_pairs_f != int(pole_pairs_f):
        raise ConfigError("pole_pairs must be an integer", key="pole_pairs",
                          line=lines_of_key["pole_pairs"])
    pole_pairs = int(pole_pairs_f)

    # trajectory: either a base speed or explicit segments
    has_speed = "speed_rpm" in raw or "omega_e" in raw
    if has_speed and segments_rpm:
        raise ConfigError("give either a base speed or segment lines, not both",
                          key="speed_rpm")
    duration = num("duration")
    if segments_rpm:
        segments = []
        for value, ln in segments_rpm:
            parts = value.split()
            try:
                if parts[0] == "const" and len(parts) == 3:
                    segments.append(("const",
                                     rpm_to_omega_e(parse_number(parts[1]), pole_pairs),
                                     parse_number(parts[2])))
                elif parts[0] == "ramp" and len(parts) == 4:
                    segments.append(("ramp",
                                     rpm_to_omega_e(parse_number(parts[1]), pole_pairs),
                                     rpm_to_omega_e(parse_number(parts[2]), pole_pairs),
                                     parse_number(parts[3])))
                else:
                    raise ValueError
            except (ValueError, IndexError):
                raise ConfigError(
                    f"bad segment {value!r} (want 'const <rpm> <dur>' or "
                    f"'ramp <rpm0> <rpm1> <dur>')", key="segment", line=ln) from None
        segments = tuple(segments)
    elif has_speed:
        if "speed_rpm" in raw and "omega_e" in raw:
            raise ConfigError("give speed_rpm or omega_e, not both",
                              key="speed_rpm", line=lines_of_key["speed_rpm"])
        w = (rpm_to_omega_e(num("speed_rpm"), pole_pairs)
             if "speed_rpm" in raw else num("omega_e"))
        segments = (("const", w, duration if duration > 0 else 1.0),)
    else:
        raise ConfigError("missing required key: speed_rpm, omega_e or segment lines",
                          key="speed_rpm")

    psi_m = num("psi_m")
    eps = num("eps", None)
    if eps is None:
        eps = 0.1 * psi_m

    observer = raw.get("observer", _DEFAULTS["observer"])
    integration = raw.get("integration", _DEFAULTS["integration"])
    diagnostics = raw.get("diagnostics", "true").strip().lower()
    if diagnostics not in ("true", "false", "on", "off", "1", "0"):
        raise ConfigError(f"diagnostics must be boolean, got {diagnostics!r}",
                          key="diagnostics", line=lines_of_key.get("diagnostics"))

    seed_f = num("seed", float(_DEFAULTS["seed"]))
    if seed_f != int(seed_f):
        raise ConfigError("seed must be an integer", key="seed",
                          line=lines_of_key.get("seed"))

    cfg = ScenarioConfig(
        R=num("R"), L_d=num("L_d"), L_q=num("L_q"), psi_m=psi_m,
        pole_pairs=pole_pairs, duration=duration,
        theta0=num("theta0", _DEFAULTS["theta0"]),
        segments=segments,
        i_d_ref=num("i_d_ref", _DEFAULTS["i_d_ref"]),
        i_q_ref=num("i_q_ref", _DEFAULTS["i_q_ref"]),
        gamma=num("gamma", _DEFAULTS["gamma"]),
        a=num("a", _DEFAULTS["a"]),
        alpha=num("alpha", _DEFAULTS["alpha"]),
        eps=eps,
        dt_truth=num("dt_truth", _DEFAULTS["dt_truth"]),
        dt_sample=num("dt_sample", _DEFAULTS["dt_sample"]),
        init_angle_offset=num("init_angle_offset", _DEFAULTS["init_angle_offset"]),
        init_mag_scale=num("init_mag_scale", _DEFAULTS["init_mag_scale"]),
        noise_std_i=num("noise_std_i", _DEFAULTS["noise_std_i"]),
        noise_std_v=num("noise_std_v", _DEFAULTS["noise_std_v"]),
        observer=observer,
        seed=int(seed_f),
        integration=integration,
        diagnostics=diagnostics in ("true", "on", "1"),
        pe_delta_min=num("pe_delta_min", _DEFAULTS["pe_delta_min"]),
    )
    return _validate(cfg, lines_of_key)


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def bundled_config_path(name):
    """Path to a bundled config ('paper_sim' or 'salient')."""
    from importlib.resources import files
    if not name.endswith(".cfg"):
        name += ".cfg"
    path = files("kreflux").joinpath("configs", name)
    if not path.is_file():
        raise FileNotFoundError(f"no bundled config {name!r}")
    return path


def bundled_config(name):
    return parse_config(bundled_config_path(name).read_text(encoding="utf-8"))
