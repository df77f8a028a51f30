"""Shared fixtures: bundled configs and the expensive reference runs."""

import numpy as np
import pytest

from kreflux import MotorParams, bundled_config, run_scenario


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    """Trigger kernel JIT once so individual tests time the runs, not the
    compiler (the on-disk cache makes this nearly free after the first
    session)."""
    cfg = bundled_config("salient").with_overrides(duration=2e-4)
    run_scenario(cfg, observer="kre")
    run_scenario(cfg.with_overrides(integration="continuous"), observer="kre")


@pytest.fixture(scope="session")
def paper_params():
    return MotorParams(R=2.5, L_d=0.00782, L_q=0.00782, psi_m=0.10, pole_pairs=4)


@pytest.fixture(scope="session")
def salient_params():
    return MotorParams(R=2.5, L_d=0.00782, L_q=0.0120, psi_m=0.10, pole_pairs=4)


@pytest.fixture(scope="session")
def paper_cfg():
    return bundled_config("paper_sim")


@pytest.fixture(scope="session")
def salient_cfg():
    return bundled_config("salient")


@pytest.fixture(scope="session")
def salient_cont_log(salient_cfg):
    """Continuous-integration KRE run on the salient scenario (diagnostics on)."""
    return run_scenario(salient_cfg.with_overrides(integration="continuous"),
                        observer="kre")


@pytest.fixture(scope="session")
def paper_sampled_log(paper_cfg):
    """Sampled-data KRE run on the reference (paper_sim) scenario."""
    return run_scenario(paper_cfg, observer="kre")


def nan_equal_dicts(a, b):
    """Dict equality with NaN == NaN and exact float comparison elsewhere."""
    if a.keys() != b.keys():
        return False
    for k in a:
        va, vb = a[k], b[k]
        if isinstance(va, float) and isinstance(vb, float):
            if np.isnan(va) and np.isnan(vb):
                continue
            if va != vb:
                return False
        elif va != vb:
            return False
    return True
