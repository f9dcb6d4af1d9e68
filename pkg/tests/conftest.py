import numpy as np
import pytest

from gkl import geometry
from gkl.greedy import WORK_DTYPE
from gkl.kernels import get_kernel


def synthesized(model, points, n_centers=8, seed=0):
    """f = sum a_i k(., y_i) with its exact squared native norm."""
    rng = np.random.default_rng(seed)
    dim = points.shape[1]
    centers = rng.random((n_centers, dim))
    coeffs = rng.standard_normal(n_centers).astype(WORK_DTYPE)
    C = centers.astype(WORK_DTYPE)
    f = np.asarray(model(points.astype(WORK_DTYPE), C) @ coeffs, dtype=float)
    norm_sq = float(coeffs @ model(C, C) @ coeffs)
    return f, norm_sq


def make_config(kernel, dim, count, seed):
    model = get_kernel(kernel)
    cset = geometry.sample_random(seed, count, dim)
    return model, cset


@pytest.fixture
def synth():
    return synthesized


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
