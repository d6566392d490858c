import numpy as np
import pytest

from multiscale_pi import MultiscaleSystem

# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


def linear_system(eps=0.1, lam=(1.0,), f_const=0.0, g_zero=True, slow_dim=1):
    """Fast variables relax to a constant ``f``; the slow field is zero (or ``-y``)."""
    lam = np.asarray(lam, dtype=float)
    m = lam.size
    c = np.full(m, float(f_const))
    return MultiscaleSystem(
        slow_dim=slow_dim,
        fast_dim=m,
        epsilon=eps,
        lambda_diag=lam,
        f=lambda y: c.copy(),
        g=(lambda x, y: np.zeros(slow_dim)) if g_zero else (lambda x, y: -y),
    )


@pytest.fixture
def make_linear():
    return linear_system
