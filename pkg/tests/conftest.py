import numpy as np
import pytest

from multitime.wavegrid import SpatialGrid, gaussian_packet, product_state


@pytest.fixture(scope="session")
def grid():
    return SpatialGrid.centered(256, 40.0)


@pytest.fixture(scope="session")
def packet_pair(grid):
    """Unit-width product packet, slightly displaced so no symmetry hides errors."""
    psi1 = gaussian_packet(grid, 0.3, 1.0, 0.4)
    psi2 = gaussian_packet(grid, -0.2, 1.0, -0.1)
    return product_state(psi1, psi2)


@pytest.fixture
def rng():
    return np.random.default_rng(20261014)


def pytest_terminal_summary(terminalreporter):
    """Echo the one-line verdicts recorded by the acceptance tests."""
    lines = []
    for key in ("passed", "failed"):
        for rep in terminalreporter.stats.get(key, []):
            if rep.when == "call":
                lines += [v for k, v in rep.user_properties if k == "criterion"]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: (int(s.split()[1].rstrip(":abc")), s)):
            terminalreporter.write_line(line)
