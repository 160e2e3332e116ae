import pytest

from mox_frontend import campaign, default_config, default_sensor_params
from mox_frontend.signal_model import GASES, LEVELS

CAMPAIGN_SEED = 2024

_acceptance_lines: list[str] = []


def record_acceptance(number: int, title: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    _acceptance_lines.append(f"[{status}] criterion {number}: {title}" + (f" -- {detail}" if detail else ""))


@pytest.fixture
def acceptance():
    return record_acceptance


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def cfg():
    return default_config()


@pytest.fixture(scope="session")
def noisy_campaign():
    return campaign(GASES, LEVELS, 20, default_sensor_params(), CAMPAIGN_SEED)


@pytest.fixture(scope="session")
def noiseless_campaign():
    return campaign(GASES, LEVELS, 20, default_sensor_params(noise_sigma_v=0.0), CAMPAIGN_SEED)


def array_vectors(trials, config):
    from mox_frontend.events import concentration_vector
    from mox_frontend.frontend import run_array

    out = []
    for t in trials:
        v = concentration_vector(
            run_array(t.traces, config), config.n_sensors,
            gas=t.stimulus.gas, level=t.stimulus.level, trial=t.trial,
        )
        out.append(((t.stimulus.gas, t.stimulus.level), v))
    return out


@pytest.fixture(scope="session")
def noiseless_labeled(noiseless_campaign, cfg):
    return array_vectors(noiseless_campaign, cfg)


@pytest.fixture(scope="session")
def default_campaign_dir(tmp_path_factory):
    """The CLI's default synthetic campaign written once per session."""
    from mox_frontend.cli import main

    d = tmp_path_factory.mktemp("campaign")
    assert main(["synth", "--out", str(d), "--jobs", "2"]) == 0
    return d
