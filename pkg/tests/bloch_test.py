import sys
import pathlib

LIB_PATH = str(pathlib.Path(__file__).parent.absolute() / "..")
sys.path.insert(0, LIB_PATH)
# pylint: disable=wrong-import-position

import numpy as np
import pytest

from qnmgain.core.bloch import (
    BareState, DressedState, bare_rhs, bare_to_dressed, dressed_rhs, dressed_steady,
    dressed_to_bare, evolve_bare, evolve_dressed, nogain_analytic, nogain_constants,
    plateau_populations, populations,
)
from qnmgain.core.exceptions import GainPresentError, SymmetryError
from qnmgain.core.liouvillian import (
    DensityMatrix, LindbladModel, evolve, liouvillian_matrix, steady_state, unvec, vec,
)
from qnmgain.core.qnm_rates import RateSet, collective_rates

rng = np.random.default_rng(20240611)


def random_symmetric(dephase_range=(1e-3, 1e-1)):
    loss = 1.0
    loss_ab = rng.uniform(-1.0, 1.0) * loss
    gain = rng.uniform(0.0, 1.6) * loss
    gain_ab = rng.uniform(-1.0, 1.0) * gain
    down_aa = loss + gain
    return RateSet.symmetric(
        down_aa, loss_ab + gain_ab, gamma_up_aa=gain, gamma_up_ab=gain_ab,
        delta_down_ab=rng.uniform(-2.0, 2.0), delta_up_ab=rng.uniform(-0.5, 0.5),
        gamma_dephase=rng.uniform(*dephase_range) * down_aa)


oracle_rates = [random_symmetric() for _ in range(100)]
e_a = BareState.from_density(DensityMatrix.basis([1, 0]))


def test_dressed_basis_round_trip():
    dressed = bare_to_dressed(e_a)
    assert dressed.rhoPP == pytest.approx(0.5)
    assert dressed.rhoMM == pytest.approx(0.5)
    assert dressed.rhoPM == pytest.approx(0.5)
    np.testing.assert_allclose(dressed_to_bare(dressed).matrix, e_a.matrix, atol=1e-15)
    plus = bare_to_dressed(BareState.from_density(DensityMatrix.dressed("plus")))
    assert plus.rhoPP == pytest.approx(1.0)


def test_steady_state_matches_null_space():
    for rates in oracle_rates:
        oracle = steady_state(LindbladModel.from_rates(rates)).entries
        analytic = dressed_to_bare(dressed_steady(rates)).matrix
        np.testing.assert_allclose(analytic, oracle, rtol=0.0, atol=1e-10)


def test_right_hand_sides_match_liouvillian():
    for rates in oracle_rates[:20]:
        lmat = liouvillian_matrix(LindbladModel.from_rates(rates))
        rho = DensityMatrix.from_ket(rng.normal(size=4) + 1j * rng.normal(size=4)).entries
        # keep only the X-shaped block the Bloch equations track
        mask = np.eye(4, dtype=bool)
        mask[1, 2] = mask[2, 1] = True
        rho = np.where(mask, rho, 0.0)
        exact = unvec(lmat @ vec(rho), 4)
        bare = bare_rhs(BareState(rho), rates)
        np.testing.assert_allclose(bare.vector(), BareState(exact).vector(), atol=1e-12)
        dressed = dressed_rhs(bare_to_dressed(BareState(rho)), rates)
        np.testing.assert_allclose(dressed.vector(), bare_to_dressed(BareState(exact)).vector(),
                                   atol=1e-12)


def test_trajectories_match_liouvillian():
    times = np.linspace(0.0, 10.0, 101)
    for rates in oracle_rates[:5]:
        exact = evolve(LindbladModel.from_rates(rates), DensityMatrix.basis([1, 0]), times)
        bare = evolve_bare(rates, e_a, times)
        dressed = evolve_dressed(rates, bare_to_dressed(e_a), times)
        for k in range(len(times)):
            reference = BareState(exact.states[k])
            np.testing.assert_allclose(bare[k].vector(), reference.vector(), atol=1e-8)
            np.testing.assert_allclose(dressed[k].vector(), bare_to_dressed(reference).vector(),
                                       atol=1e-8)


def test_asymmetric_pair_bare_equations():
    rates = RateSet(omega0=0.0, gamma_down=[[1.0, 0.3], [0.3, 0.6]],
                    gamma_up=[[0.2, 0.05], [0.05, 0.1]], delta_down=[[0.0, 0.8], [0.8, 0.0]],
                    delta_up=np.zeros((2, 2)), gamma_dephase=[0.01, 0.03],
                    detuning=[0.0, 0.4])
    times = np.linspace(0.0, 8.0, 41)
    exact = evolve(LindbladModel.from_rates(rates), DensityMatrix.basis([1, 0]), times)
    bare = evolve_bare(rates, e_a, times)
    for k in range(len(times)):
        np.testing.assert_allclose(bare[k].vector(), BareState(exact.states[k]).vector(),
                                   atol=1e-8)
    with pytest.raises(SymmetryError):
        dressed_steady(rates)


def test_closed_form_steady_laws():
    for gain in (0.05, 0.4, 1.0, 1.6):
        loss = 1.0 + gain
        rates = RateSet.symmetric(loss, loss, gamma_up_aa=gain, gamma_up_ab=gain,
                                  delta_down_ab=0.7, gamma_dephase=1e-6 * loss)
        rho = steady_state(LindbladModel.from_rates(rates))
        state = BareState.from_density(rho)
        dressed = bare_to_dressed(state)
        total = loss + gain
        rho_aa, rho_bb = populations(state)
        assert rho_aa == pytest.approx(gain / total, abs=1e-6)
        assert rho_bb == pytest.approx(gain / total, abs=1e-6)
        assert dressed.rhoTT == pytest.approx(gain ** 2 / total ** 2, abs=1e-6)
        assert dressed.rhoPP == pytest.approx(gain * loss / total ** 2, abs=1e-6)
        analytic = dressed_steady(rates)
        assert analytic.rhoTT == pytest.approx(dressed.rhoTT, abs=1e-6)


def test_nogain_analytic_decay():
    rates = RateSet.symmetric(1.0, 0.6, delta_down_ab=2.0)
    plus, minus = collective_rates(rates)
    times = np.linspace(0.0, 10.0, 201)
    c1, c2, c3 = nogain_constants(bare_to_dressed(e_a))
    closed = nogain_analytic(rates, c1, c2, c3, times)
    np.testing.assert_allclose(closed.rhoPP, 0.5 * np.exp(-plus * times), atol=1e-15)
    np.testing.assert_allclose(closed.rhoMM, 0.5 * np.exp(-minus * times), atol=1e-15)
    numeric = evolve_dressed(rates, bare_to_dressed(e_a), times)
    np.testing.assert_allclose([s.rhoPP for s in numeric], closed.rhoPP, atol=1e-9)
    np.testing.assert_allclose([s.rhoMM for s in numeric], closed.rhoMM, atol=1e-9)
    np.testing.assert_allclose([s.rhoPM for s in numeric], closed.rhoPM, atol=1e-9)
    exact = evolve(LindbladModel.from_rates(rates), DensityMatrix.basis([1, 0]), times)
    np.testing.assert_allclose([bare_to_dressed(BareState(m)).rhoPP for m in exact.states],
                               closed.rhoPP, atol=1e-9)


def test_nogain_analytic_rejects_gain():
    rates = RateSet.symmetric(1.2, 1.0, gamma_up_aa=0.2, gamma_up_ab=0.2)
    with pytest.raises(GainPresentError):
        nogain_analytic(rates, 0.5, 0.5, 0.5, [0.0, 1.0])
    pumped = RateSet.symmetric(1.0, 0.5, gamma_pump=0.1)
    with pytest.raises(GainPresentError):
        nogain_analytic(pumped, 0.5, 0.5, 0.5, [0.0, 1.0])


def test_no_gain_plateau():
    rates = RateSet.symmetric(1.0, 1.0, delta_down_ab=0.1, gamma_dephase=0.001)
    times = np.linspace(0.0, 10.0, 1001)
    states = evolve_bare(rates, e_a, times)
    rho_aa, rho_bb = plateau_populations(states, times, (5.0, 10.0))
    assert 0.24 <= rho_aa <= 0.26
    assert 0.24 <= rho_bb <= 0.26
    with pytest.raises(ValueError):
        plateau_populations(states, times, (20.0, 30.0))


def test_gain_populates_two_quanta_state():
    rates = RateSet.symmetric(26.0, 26.0, gamma_up_aa=25.0, gamma_up_ab=25.0,
                              gamma_dephase=0.001)
    times = np.linspace(0.0, 2.0, 201)
    ground = DressedState.from_elements(1.0, 0.0, 0.0, 0.0)
    states = evolve_dressed(rates, ground, times)
    assert states[0].rhoTT == 0.0
    assert states[-1].rhoTT > 0.1
    states[-1].validate()
