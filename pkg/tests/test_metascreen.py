import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ptmeta.errors import ConfigurationError, SingularityError, UnsupportedRegimeError
from ptmeta.geometry import MaterialParams
from ptmeta.metascreen import (FIG5_DIRECTION, IncidentWave, asymptotic_scattering_matrix,
                               energy_relation_residual, extraordinary_gain, numerical_scattering,
                               reflection_zero_frequencies, reflection_zeros, refine_extremum)


@given(lam=st.floats(-1e-3, 1e-3), k3=st.floats(1e-3, 0.1), a=st.floats(1e-5, 1e-2),
       b=st.floats(0.0, 1e-2), c=st.floats(0.1, 2.0), dim=st.sampled_from([2, 3]))
@settings(max_examples=200, deadline=None)
def test_closed_form_reciprocity_and_energy(lam, k3, a, b, c, dim):
    try:
        S = asymptotic_scattering_matrix(lam, k3, a, b, c, 1.0, dim)
    except SingularityError:
        return
    assert S.t_plus == S.t_minus
    scale = max(1.0, S.T_plus * S.T_minus, S.R_plus * S.R_minus)
    assert energy_relation_residual(S) / scale < 1e-11


def test_closed_form_zeros_and_singularity():
    k3, a, b, c = 0.05, 2e-4, 1e-4, 0.9
    lp, lm = reflection_zeros(k3, b, c)
    assert asymptotic_scattering_matrix(lp, k3, a, b, c, 1.0, 2).R_plus == 0.0
    assert asymptotic_scattering_matrix(lm, k3, a, b, c, 1.0, 2).R_minus == 0.0
    bstar = extraordinary_gain(a, c, 1.0, 2)
    with pytest.raises(SingularityError):
        asymptotic_scattering_matrix(0.0, k3, a, bstar, c, 1.0, 2)
    S0 = asymptotic_scattering_matrix(1e-6, k3, a, 0.0, c, 1.0, 2)
    assert S0.R_plus + S0.T_plus == pytest.approx(1.0, abs=1e-12)


def test_reflection_zero_frequencies_self_consistent():
    lam2, vol, w3, b, c = 0.03, 0.07, 0.5, 1e-4, 0.9
    wp, wm = reflection_zero_frequencies(lam2, vol, w3, b, c)
    assert wm < np.sqrt(lam2 / vol) < wp
    for w, s in ((wp, 1), (wm, -1)):
        assert w**2 * vol - lam2 == pytest.approx(s * 2 * w * w3 * b * c, rel=1e-12)


def test_extraordinary_gain_scaling():
    assert extraordinary_gain(2e-4, 0.9, 2.0, 3) == pytest.approx(2e-4 * 0.9 / 4)
    assert extraordinary_gain(2e-4, -0.9, 2.0, 2) == pytest.approx(2e-4 * 0.9 / 2)


def test_incident_wave_validation():
    with pytest.raises(ConfigurationError):
        IncidentWave((1.0, 0.0), 0.1)
    with pytest.raises(ConfigurationError):
        IncidentWave((0.6, 0.6), 0.1)
    w = IncidentWave(FIG5_DIRECTION, 0.1)
    assert w.w3 == pytest.approx(0.5)


def test_refine_extremum_parabola():
    f = lambda x: (x - 0.3137) ** 2
    grid = np.linspace(0, 1, 11)
    x, v = refine_extremum(f, grid, [f(g) for g in grid])
    assert x == pytest.approx(0.3137, abs=1e-6)
    x, _ = refine_extremum(lambda x: -f(x), grid, [-f(g) for g in grid], maximize=True)
    assert x == pytest.approx(0.3137, abs=1e-6)


def test_numerical_matches_closed_form(disk_dimer, chain, screen):
    w2 = screen.omega2_0()
    for f, b in ((0.99, 1e-4), (1.01, 0.0), (1.0, 5e-5)):
        w = f * w2
        S = numerical_scattering(disk_dimer, chain, MaterialParams(2e-4, b), IncidentWave(FIG5_DIRECTION, w))
        lam = w**2 * disk_dimer.volume - screen.lambda2_0
        A = asymptotic_scattering_matrix(lam, 0.5 * w, 2e-4, b, screen.c, 1.0, 2)
        # leading-order agreement
        assert abs(S.T_plus - A.T_plus) < 0.05 * max(1.0, A.T_plus)
        assert abs(S.R_plus - A.R_plus) < 0.05 * max(1.0, A.R_plus)
        assert abs(S.t_plus - S.t_minus) < 1e-8
        assert energy_relation_residual(S) < 1e-6


def test_lossless_screen_is_unitary(disk_dimer, chain, screen):
    S = numerical_scattering(disk_dimer, chain, MaterialParams(2e-4, 0.0),
                             IncidentWave(FIG5_DIRECTION, 0.98 * screen.omega2_0()))
    assert np.allclose(S.matrix.conj().T @ S.matrix, np.eye(2), atol=1e-9)


def test_diffraction_regime_rejected(disk_dimer, chain):
    with pytest.raises(UnsupportedRegimeError):
        numerical_scattering(disk_dimer, chain, None, IncidentWave(FIG5_DIRECTION, 4.5))
