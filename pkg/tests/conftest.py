import sys

import numpy as np
import pytest

from hallspec.grid import Grid


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=[1.0, 2.0], ids=["L1", "L2"])
def grid16(request):
    return Grid(16, request.param)


@pytest.fixture
def grid32():
    return Grid(32, 1.0)


def dft_matrix(N):
    """Explicit forward DFT with amplitude normalization (independent of scipy.fft)."""
    j = np.arange(N)
    k = np.fft.fftfreq(N, 1.0 / N)
    return np.exp(-2j * np.pi * np.outer(k, j) / N) / N


def direct_dft3(samples):
    F = dft_matrix(samples.shape[-1])
    return np.einsum("ai,bj,ck,...ijk->...abc", F, F, F, samples)


def direct_idft3(coeffs):
    N = coeffs.shape[-1]
    F = np.conj(dft_matrix(N)) * N
    return np.einsum("ia,jb,kc,...abc->...ijk", F.T, F.T, F.T, coeffs)


def pytest_terminal_summary(terminalreporter):
    """Print the one-line verdict of every acceptance criterion that ran."""
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
