import numpy as np
import pytest
from hypothesis import settings

from starnoise.noise import SourceNoise

SEED = 20240611

settings.register_profile("repro", derandomize=True, deadline=None, max_examples=100)
settings.load_profile("repro")


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)


def random_rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_noise(rng, kind="none"):
    """Uniform draw over the full unit cube for the parameters ``kind`` uses."""
    params = dict(alpha=rng.uniform(), delta=rng.uniform(), mu=rng.uniform(), beta=rng.uniform())
    if kind == "amp":
        params.update(gamma_amp=rng.uniform(), xi_amp=rng.uniform())
    elif kind == "ph":
        params.update(gamma_ph=rng.uniform(), xi_ph=rng.uniform())
    return SourceNoise(**params)


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES = []


def record_acceptance(label, passed, detail):
    line = f"ACCEPTANCE {label}: {'PASS' if passed else 'FAIL'} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
