import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from ptmeta.errors import SingularityError, WoodAnomalyError
from ptmeta.geometry import LatticeConfig
from ptmeta.greens import (green_free, green_low_freq_terms, green_periodic, green_periodic_spectral,
                           green_quasi_ewald, green_quasi_spatial, green_quasi_spectral,
                           propagating_orders)

L2 = LatticeConfig(1.0, 2)
L3 = LatticeConfig(1.0, 3)


def _laplacian(f, x, h=1e-3):
    out = 0.0
    for i in range(len(x)):
        e = np.zeros(len(x))
        e[i] = h
        out += (f(x + e) - 2 * f(x) + f(x - e)) / h**2
    return out


@pytest.mark.parametrize("dim", [2, 3])
def test_free_green_solves_helmholtz(dim):
    k = 1.7
    x = np.linspace(0.3, 0.5, dim)
    res = _laplacian(lambda y: green_free(y, k, dim), x) + k**2 * green_free(x, k, dim)
    assert abs(res) < 1e-5


def test_free_green_singular_and_sign():
    with pytest.raises(SingularityError):
        green_free(np.zeros(3), 1.0, 3)
    assert green_free(np.array([0.0, 0.0, 1.0]), 0.0, 3) == pytest.approx(-1 / (4 * np.pi))
    assert green_free(np.array([1.0, 0.0]), 0.0, 2).real == pytest.approx(0.0)


@pytest.mark.parametrize("lat,x,alpha,k", [
    (L2, (0.3, 0.1), [0.7], 1.3),
    (L2, (0.1, 0.8), [0.2], 0.1),
    (L3, (0.2, -0.1, 0.3), [0.5, -0.3], 1.1),
    (L3, (0.1, 0.2, 0.5), [0.3, 0.0], 0.0),
])
def test_three_representations_agree(lat, x, alpha, k):
    e = green_quasi_ewald(np.array(x), alpha, k, lat)
    assert abs(e - green_quasi_spectral(x, alpha, k, lat)) < 1e-9
    assert abs(e - green_quasi_spatial(x, alpha, k, lat)) < 1e-7


@given(x1=st.floats(-0.5, 0.5), x2=st.floats(0.05, 0.6), alpha=st.floats(0.1, 3.0),
       k=st.floats(0.05, 2.5))
@settings(max_examples=25, deadline=None)
def test_quasi_periodicity(x1, x2, alpha, k):
    assume(min(abs(abs(alpha + 2 * np.pi * q) - k) for q in range(-2, 3)) > 1e-3)
    x = np.array([x1, x2])
    g0 = green_quasi_ewald(x, [alpha], k, L2)
    g1 = green_quasi_ewald(x + np.array([1.0, 0.0]), [alpha], k, L2)
    assert abs(g1 - np.exp(1j * alpha) * g0) < 1e-10 * max(1.0, abs(g0))


def test_wood_anomaly_raises():
    with pytest.raises(WoodAnomalyError):
        green_quasi_ewald(np.array([0.1, 0.2]), [0.5], 2 * np.pi - 0.5, L2)


def test_propagating_orders():
    assert propagating_orders([0.3], 0.5, L2) == 1
    assert propagating_orders([0.0], 7.0, L2) == 3


def test_regular_part_is_smooth():
    x = np.array([0.05, 0.02])
    g = green_quasi_ewald(x, [0.3], 0.5, L2)
    reg = green_quasi_ewald(x, [0.3], 0.5, L2, regular=True)
    assert abs(reg - (g - green_free(x, 0.5, 2))) < 1e-12
    r0 = green_quasi_ewald(np.zeros(2), [0.3], 0.5, L2, regular=True)
    r1 = green_quasi_ewald(np.array([1e-6, 0.0]), [0.3], 0.5, L2, regular=True)
    assert abs(r0 - r1) < 1e-5


@pytest.mark.parametrize("lat,x", [(L2, (0.3, 0.2)), (L2, (0.1, 1.5)),
                                   (L3, (0.3, 0.2, 0.4)), (L3, (0.1, -0.2, 1.5))])
def test_periodic_laplace(lat, x):
    assert green_periodic(np.array(x), lat) == pytest.approx(green_periodic_spectral(x, lat), abs=1e-10)


@pytest.mark.parametrize("lat,x,a0", [(L2, (0.2, 0.3), [-0.5]), (L3, (0.2, -0.1, 0.3), [0.3, 0.2])])
def test_low_frequency_expansion(lat, x, a0):
    x = np.array(x)
    errs = []
    for w in (1e-2, 5e-3):
        t = green_low_freq_terms(x, a0, w, lat)
        g = green_quasi_ewald(x, w * np.array(a0), w, lat)
        errs.append(abs(g - t["singular"] - t["periodic"] - t["linear"]))
    assert errs[1] / errs[0] == pytest.approx(0.5, rel=0.05)
