import numpy as np
import pytest

from confgeo.config import FDConfig
from confgeo.errors import DomainError
from confgeo.fd import check_margin, fd_partial, field_derivative, stencil


def test_stencil_first_derivative_order4():
    offs, w = stencil(1, 4)
    assert np.allclose(offs, [-2, -1, 0, 1, 2])
    assert np.allclose(w, [1 / 12, -2 / 3, 0, 2 / 3, -1 / 12])


def test_stencil_second_derivative_order2():
    offs, w = stencil(2, 2)
    assert np.allclose(w, [1, -2, 1])


def test_stencil_reproduces_polynomials():
    # degree-6 polynomial: order-4 stencils are exact through degree p+d-1
    coeffs = np.array([0.3, -1.2, 0.8, 2.0, -0.5])
    f = lambda U: np.polyval(coeffs, U[:, 0])
    U = np.array([[0.4]])
    cfg = FDConfig(order=4, richardson=False)
    d3 = fd_partial(f, U, (3,), cfg)
    exact = np.polyval(np.polyder(coeffs, 3), 0.4)
    assert d3[0] == pytest.approx(exact, rel=1e-9)


def test_mixed_partial_accuracy():
    f = lambda U: np.sin(U[:, 0]) * np.exp(0.5 * U[:, 1])
    U = np.array([[0.3, -0.2]])
    cfg = FDConfig()
    val = fd_partial(f, U, (1, 1), cfg)
    exact = np.cos(0.3) * 0.5 * np.exp(-0.1)
    assert val[0] == pytest.approx(exact, rel=1e-9)


def test_fourth_derivative_with_richardson():
    f = lambda U: np.cosh(U[:, 0])
    U = np.array([[0.5]])
    cfg = FDConfig(order=4, richardson=True)
    val = fd_partial(f, U, (4,), cfg)
    assert val[0] == pytest.approx(np.cosh(0.5), rel=1e-7)


def test_declared_order_convergence():
    # halving h reduces the error of a p=2 stencil by about 2^p
    f = lambda U: np.sin(U[:, 0])
    U = np.array([[0.7]])
    errs = []
    for h in (0.02, 0.01):
        cfg = FDConfig(order=2, richardson=False, step=h)
        val = fd_partial(f, U, (2,), cfg)
        errs.append(abs(val[0] + np.sin(0.7)))
    ratio = errs[0] / errs[1]
    assert 2.5 < ratio < 6.5


def test_field_derivative_matches_partial():
    f = lambda U: U[:, 0] ** 2 * U[:, 1]
    U = np.array([[1.0, 2.0], [0.5, -1.0]])
    cfg = FDConfig()
    d = field_derivative(f, U, 0, 1, cfg)
    assert np.allclose(d, 2 * U[:, 0] * U[:, 1], atol=1e-9)


def test_check_margin():
    U = np.array([[0.05, 0.5]])
    with pytest.raises(DomainError):
        check_margin(U, np.zeros(2), np.ones(2), margin=0.1)
    check_margin(U + 0.1, np.zeros(2), np.ones(2), margin=0.1)
