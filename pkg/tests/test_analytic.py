import math

import numpy as np
import pytest

from yukawa1d.model import INFINITE_BETA, ModelParams, fermi_occupation
from yukawa1d import analytic
from yukawa1d.analytic import Sector, SectorLevel


P = ModelParams(m=1.0, mu=1.0, lam=1.0)


def test_mass_shift_and_vev():
    assert analytic.mass_shift(P) == 0.5
    assert analytic.phi_vev_fermion(P) == -1.0
    p2 = ModelParams(m=2.0, mu=0.3, lam=0.6)
    np.testing.assert_allclose(
        analytic.mass_shift(p2), 0.3 - 0.36 / 8.0, rtol=1e-15
    )
    np.testing.assert_allclose(analytic.phi_vev_fermion(p2), -0.15, rtol=1e-15)


def test_energy_both_sectors():
    assert analytic.energy(P, SectorLevel(Sector.BOSONIC, 0)) == 0.5
    assert analytic.energy(P, SectorLevel(Sector.FERMIONIC, 0)) == 1.0
    assert analytic.energy(P, SectorLevel(Sector.BOSONIC, 3)) == 3.5
    # fermionic tower is rigidly shifted by mu_lambda
    for n in range(6):
        eb = analytic.energy(P, SectorLevel(Sector.BOSONIC, n))
        ef = analytic.energy(P, SectorLevel(Sector.FERMIONIC, n))
        np.testing.assert_allclose(ef - eb, analytic.mass_shift(P), rtol=1e-15)


def test_sector_level_validation():
    with pytest.raises(ValueError):
        SectorLevel(Sector.BOSONIC, -1)
    with pytest.raises(ValueError):
        SectorLevel("bosonic", 0)


def test_spectrum_sorted_and_tie_broken():
    sp = analytic.spectrum(P, 4)
    energies = [e for e, _ in sp]
    assert energies == sorted(energies)
    assert sp[0][1] == SectorLevel(Sector.BOSONIC, 0)
    # lam=0: exact degeneracy E_{n,F} = E_{n+1,B}; bosonic state first
    p0 = ModelParams(m=1.0, mu=1.0, lam=0.0)
    sp0 = analytic.spectrum(p0, 4)
    for (e1, l1), (e2, l2) in zip(sp0, sp0[1:]):
        if e1 == e2:
            assert l1.sector is Sector.BOSONIC
            assert l2.sector is Sector.FERMIONIC


def test_free_propagators():
    np.testing.assert_allclose(analytic.free_boson_propagator(0.0, 2.0), 0.25)
    np.testing.assert_allclose(
        analytic.free_fermion_propagator(1.0, 1.0), 1.0 / (-1j + 1.0)
    )
    with pytest.raises(ValueError, match="pole"):
        analytic.free_fermion_propagator(0.0, 0.0)


def test_zero_T_boson_two_point():
    v = analytic.zero_T_boson_two_point(P, 0.0)
    np.testing.assert_allclose(float(v), 0.5)
    assert "N=0" in v.note
    # symmetric in tau and exponentially decaying
    np.testing.assert_allclose(
        float(analytic.zero_T_boson_two_point(P, 1.3)),
        float(analytic.zero_T_boson_two_point(P, -1.3)),
    )
    np.testing.assert_allclose(
        float(analytic.zero_T_boson_two_point(P, 2.0)),
        math.exp(-2.0) / 2.0,
        rtol=1e-15,
    )


def test_zero_T_fermion_two_point_free():
    p = ModelParams(m=1.0, mu=0.7, lam=0.0)
    assert analytic.zero_T_fermion_two_point_free(p, -0.5) == 0.0
    assert analytic.zero_T_fermion_two_point_free(p, 0.0) == 0.0  # theta(0)=0
    np.testing.assert_allclose(
        analytic.zero_T_fermion_two_point_free(p, 2.0), math.exp(-1.4), rtol=1e-15
    )
    with pytest.raises(ValueError, match="lam=0"):
        analytic.zero_T_fermion_two_point_free(P, 1.0)


def test_ho_thermal_correlator_limits():
    m, beta = 1.3, 2.7
    # beta -> inf recovers the ground-state correlator
    np.testing.assert_allclose(
        analytic.ho_thermal_correlator(m, INFINITE_BETA, 0.9),
        math.exp(-m * 0.9) / (2 * m),
        rtol=1e-15,
    )
    # periodicity endpoints agree
    np.testing.assert_allclose(
        analytic.ho_thermal_correlator(m, beta, 0.0),
        analytic.ho_thermal_correlator(m, beta, beta),
        rtol=1e-15,
    )
    # reflection symmetry about beta/2
    for tau in (0.3, 0.9, 1.2):
        np.testing.assert_allclose(
            analytic.ho_thermal_correlator(m, beta, tau),
            analytic.ho_thermal_correlator(m, beta, beta - tau),
            rtol=1e-14,
        )
    # equal-time value is the thermal width coth(m beta/2)/(2m)
    np.testing.assert_allclose(
        analytic.ho_thermal_correlator(m, beta, 0.0),
        1.0 / (2 * m) / math.tanh(m * beta / 2),
        rtol=1e-14,
    )
    with pytest.raises(ValueError, match="reduce modulo beta"):
        analytic.ho_thermal_correlator(m, beta, beta + 0.1)
    with pytest.raises(ValueError, match="reduce modulo beta"):
        analytic.ho_thermal_correlator(m, beta, -0.1)
    with pytest.raises(ValueError):
        analytic.ho_thermal_correlator(-1.0, beta, 0.1)


def test_exact_thermal_two_point():
    pb = ModelParams(m=1.0, mu=1.0, lam=1.0, beta=4.0)
    disc = fermi_occupation(analytic.mass_shift(pb), 4.0)  # (lam/m^2)^2 = 1
    for tau in (0.0, 1.0, 2.0, 4.0):
        np.testing.assert_allclose(
            analytic.exact_thermal_two_point(pb, tau),
            analytic.ho_thermal_correlator(1.0, 4.0, tau) + disc,
            rtol=1e-15,
        )
    # lam=0 collapses to the bare oscillator
    p0 = ModelParams(m=1.0, mu=1.0, lam=0.0, beta=4.0)
    np.testing.assert_allclose(
        analytic.exact_thermal_two_point(p0, 1.1),
        analytic.ho_thermal_correlator(1.0, 4.0, 1.1),
        rtol=1e-15,
    )
    with pytest.raises(ValueError, match="finite beta"):
        analytic.exact_thermal_two_point(P, 1.0)


def test_ground_state_overlap():
    assert analytic.ground_state_overlap(ModelParams(m=1.0, mu=1.0, lam=0.0)) == 1.0
    np.testing.assert_allclose(
        analytic.ground_state_overlap(P), math.exp(-0.25), rtol=1e-15
    )
    # m-dependence: exp(-lam^2/(4 m^3))
    p = ModelParams(m=2.0, mu=1.0, lam=1.0)
    np.testing.assert_allclose(
        analytic.ground_state_overlap(p), math.exp(-1.0 / 32.0), rtol=1e-15
    )


def test_predicted_pole_decomposition():
    d = analytic.predicted_pole_decomposition(P)
    assert d.delta_mu == -0.5
    assert d.z1f == 0.5
    # z1f tracks 1 - overlap^2 at leading order
    for lam in (0.1, 0.2):
        p = ModelParams(m=1.0, mu=1.0, lam=lam)
        z = analytic.predicted_pole_decomposition(p).z1f
        deficit = 1.0 - analytic.ground_state_overlap(p) ** 2
        assert abs(z - deficit) < 2.0 * lam**4


def test_pole_decomposition_validation():
    with pytest.raises(ValueError, match="z1f"):
        analytic.PoleDecomposition(delta_mu=-0.5, z1f=1.5)
