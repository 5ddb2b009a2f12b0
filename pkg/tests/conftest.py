"""Shared fixtures: the default grid and the kernel corpus.

The corpus deliberately mixes certificate-passing and certificate-failing
kernels.  Failing entries keep a moderate max/min ratio so that plain
Picard iteration still converges (the certificate is sufficient for
uniqueness, not necessary for convergence).
"""

import numpy as np
import pytest

from treegibbs import (
    ConstantKernel,
    ExponentialKernel,
    PolynomialKernel,
    TabulatedKernel,
    make_grid,
)


def separable_kernel(n: int = 9) -> TabulatedKernel:
    """(1+t)(1+u), represented exactly: the function is bilinear, so the
    tabulated kernel's bilinear interpolation reproduces it everywhere."""
    return TabulatedKernel.from_callable(lambda t, u: (1.0 + t) * (1.0 + u), n, n)


def build_corpus():
    """(name, spec, k) triples used across the solver and acceptance tests."""
    return [
        ("const-1", ConstantKernel(1.0), 2),
        ("const-2.5", ConstantKernel(2.5), 3),
        ("poly-pass-k2", PolynomialKernel(coeffs=[(1, 1, 0.1)], a=1.0), 2),
        ("poly-pass-mixed", PolynomialKernel(coeffs=[(1, 1, 0.05), (1, 2, 0.02)], a=1.0), 2),
        ("poly-pass-k3", PolynomialKernel(coeffs=[(1, 1, 0.04)], a=1.0), 3),
        ("poly-fail-k2", PolynomialKernel(coeffs=[(1, 1, 0.5)], a=1.0), 2),
        ("poly-fail-deg2", PolynomialKernel(coeffs=[(2, 1, 1.0), (1, 1, 0.5)], a=2.0), 2),
        ("exp-weak-pos", ExponentialKernel(J=1.0, beta=0.05, interaction=[(1, 1, 1.0)]), 2),
        ("exp-weak-neg", ExponentialKernel(J=-1.0, beta=0.05, interaction=[(1, 1, 1.0)]), 2),
        ("exp-strong-pos", ExponentialKernel(J=1.0, beta=0.5, interaction=[(1, 1, 1.0)]), 2),
        ("exp-strong-neg", ExponentialKernel(J=-1.0, beta=0.5, interaction=[(1, 1, 1.0)]), 2),
        ("separable-k1", separable_kernel(), 1),
    ]


@pytest.fixture(scope="session")
def grid96():
    return make_grid(12, 8)


@pytest.fixture(scope="session")
def corpus():
    return build_corpus()


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
