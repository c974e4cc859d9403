import math

import numpy as np
import pytest
from scipy import integrate

from affine_shift.errors import QuadratureError
from affine_shift.quadrature import gauss_kronrod


def test_complex_gaussian_oscillation_exact():
    # int_{-inf}^{inf} e^{ix} e^{-x^2} dx = sqrt(pi) e^{-1/4}; truncated at 12 the tail is negligible
    res = gauss_kronrod(lambda x: np.exp(1j * x - x * x), -12.0, 12.0, 1e-14, 1e-14, 4096)
    assert abs(res.value - math.sqrt(math.pi) * math.exp(-0.25)) < 1e-14


@pytest.mark.parametrize("func", [np.cos, lambda x: np.exp(-x) * np.sin(7 * x), lambda x: 1.0 / (1.0 + 25 * x * x)])
def test_agrees_with_quadpack(func):
    want = integrate.quad(func, 0.0, 3.0, epsabs=1e-13, epsrel=1e-13, limit=500)[0]
    got = gauss_kronrod(func, 0.0, 3.0, 1e-13, 1e-13, 4096)
    assert abs(complex(got.value).real - want) < 1e-12
    assert got.error <= 1e-12


def test_endpoint_singularity_converges():
    res = gauss_kronrod(lambda x: 1.0 / np.sqrt(x), 0.0, 1.0, 1e-9, 1e-9, 2**14)
    assert abs(complex(res.value).real - 2.0) < 1e-8


def test_exhaustion_raises():
    with pytest.raises(QuadratureError):
        gauss_kronrod(lambda x: np.sin(1.0 / np.maximum(x, 1e-300)), 0.0, 1.0, 1e-15, 1e-15, 32)
