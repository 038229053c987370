import os
from pathlib import Path

import pytest
from hypothesis import settings

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "src" / "rigdde" / "data"

settings.register_profile("default", deadline=None, max_examples=200)
settings.register_profile("quick", deadline=None, max_examples=30)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def data_dir():
    return DATA


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: runs a full rigorous Poincaré map (tens of seconds or more)")


@pytest.fixture(scope="session")
def mg6_config():
    from rigdde.proof_cli import ProofConfig

    return ProofConfig.load(DATA / "mg6.cfg")


@pytest.fixture(scope="session")
def mg6_run(mg6_config):
    """One full n=6 proof run shared by all tests that need it."""
    from rigdde.proof_cli import run_proof

    return run_proof(mg6_config)


@pytest.fixture(scope="session")
def mg8_config():
    from rigdde.proof_cli import ProofConfig

    return ProofConfig.load(DATA / "mg8.cfg")


@pytest.fixture(scope="session")
def mg8_run(mg8_config):
    from rigdde.proof_cli import run_proof

    return run_proof(mg8_config)


_ACCEPTANCE = {}


@pytest.fixture
def criterion():
    """``criterion(k, ok, detail)`` records one acceptance line and returns ``ok``."""

    def record(k, ok, detail):
        line = f"ACCEPTANCE {k}: {'PASS' if ok else 'FAIL'} {detail}"
        _ACCEPTANCE[k] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[k])
