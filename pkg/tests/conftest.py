from dataclasses import replace

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from jdsn.model import get_model

settings.register_profile("jdsn", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("jdsn")

FAMILY_KEYS = ("normal", "gamma", "ig", "weibull", "lognormal")


def constant_c_model(family_key: str, c_value: float):
    """OU model whose jump coefficient is the constant ``c_value``."""
    m = get_model(f"ou-{family_key}")
    return replace(m, c=lambda x, alpha: c_value + 0.0 * np.asarray(x, dtype=float))


def random_alpha(family, rng):
    """A random interior parameter for ``family``."""
    key = family.key
    if key == "normal":
        return np.array([rng.uniform(-2, 2), rng.uniform(0.3, 2.0)])
    if key == "lognormal":
        return np.array([rng.uniform(-1, 1), rng.uniform(0.3, 1.2)])
    if key == "ig":
        return np.array([rng.uniform(0.5, 3), rng.uniform(0.5, 5)])
    # gamma, weibull: scale, shape > 1
    return np.array([rng.uniform(0.5, 3), rng.uniform(1.3, 4)])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str) -> str:
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
