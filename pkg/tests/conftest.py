import math

import numpy as np
import pytest

# criterion number -> (title, passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


def l_shape(n_long=30, n_short=12, length=4.5, width=1.8, heading=0.0, origin=(10.0, 5.0),
            sigma=0.0, rng=None):
    """Points on two perpendicular box sides meeting at ``origin``."""
    rng = rng or np.random.default_rng(0)
    u = np.array([math.cos(heading), math.sin(heading)])
    v = np.array([-u[1], u[0]])
    s1 = np.linspace(0.0, length, n_long)
    s2 = np.linspace(0.0, width, n_short + 1)[1:]
    pts = np.vstack([np.outer(s1, u), np.outer(s2, v)]) + np.asarray(origin)
    if sigma > 0:
        pts = pts + rng.normal(0.0, sigma, pts.shape)
    return pts


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
