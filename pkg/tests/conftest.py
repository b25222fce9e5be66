from pathlib import Path

import pytest
import yaml

from src.physics.channel_model import ChannelParams, ProtocolParams


@pytest.fixture
def typical_channel():
    """Detector parameters of a typical TF-QKD setup at 10 dB."""
    return ChannelParams(loss_db=10.0, det_eff=0.2, dark=1e-8, misalign=0.015)


@pytest.fixture
def make_protocol():
    def _make(num_phases: int = 4, mu: float = 0.1, nu: float = 0.02, omega: float = 0.0, f: float = 1.1) -> ProtocolParams:
        return ProtocolParams(num_phases=num_phases, mu=mu, nu=nu, omega=omega, f=f)

    return _make


@pytest.fixture
def small_config(tmp_path) -> Path:
    """A config file with a coarse search, fast enough for end-to-end runs."""
    config = {
        "protocol": {"m_list": [8], "f": 1.1, "omega": 0.0},
        "channel": {"loss": {"start": 10.0, "end": 10.0, "step": 1.0}, "det_eff": 0.2, "dark": 1.0e-8, "misalign": 0.015},
        "search": {"mu_range": [1.0e-3, 1.0], "nu_range": [1.0e-3, 1.0], "grid_size": 5, "refine_rounds": 1, "shrink": 4.0},
        "monte_carlo": {"validate": False, "trials": 20000},
        "output": {"path": str(tmp_path / "scan.csv"), "seed": 11},
    }
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(config, sort_keys=False))
    return path
