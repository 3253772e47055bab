import numpy as np
import pytest

# Filled by the acceptance tests; printed once at the end of the run.
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def blobs(centers, per_cluster, sigma=0.0, seed=0):
    """Points around the given centers, cluster sizes given per center."""
    centers = np.asarray(centers, dtype=float)
    sizes = np.broadcast_to(np.asarray(per_cluster), (centers.shape[0],))
    r = np.random.default_rng(seed)
    labels = np.repeat(np.arange(centers.shape[0]), sizes)
    A = centers[labels] + sigma * r.standard_normal((labels.size, centers.shape[1]))
    return A, labels
