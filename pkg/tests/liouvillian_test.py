import sys
import pathlib
import warnings

LIB_PATH = str(pathlib.Path(__file__).parent.absolute() / "..")
sys.path.insert(0, LIB_PATH)
# pylint: disable=wrong-import-position

import numpy as np
import pytest

from qnmgain.core.exceptions import (
    DegenerateSteadyStateError, EmitterIndexError, RateMatrixWarning, ScenarioError,
    UnstableLiouvillianError,
)
from qnmgain.core.liouvillian import (
    DensityMatrix, LindbladModel, build_hamiltonian, check_stability, evolve, liouvillian_matrix,
    lowering_operator, number_operator, propagate, spectral_gap, steady_state, unvec, vec,
)
from qnmgain.core.qnm_rates import RateSet


def single(gamma_down=1.0, gamma_up=0.0, dephase=0.0, pump=0.0):
    return RateSet(omega0=0.0, gamma_down=[[gamma_down]], gamma_up=[[gamma_up]],
                   delta_down=[[0.0]], delta_up=[[0.0]], gamma_dephase=dephase, gamma_pump=pump)


pair = RateSet.symmetric(1.0, 0.5, gamma_up_aa=0.3, gamma_up_ab=0.2, delta_down_ab=1.5,
                         gamma_dephase=0.01)
pair_model = LindbladModel.from_rates(pair)


def test_basis_ordering():
    # emitter 0 is the leftmost factor: |e_a g_b> is index 2
    assert DensityMatrix.basis([1, 0]).entries[2, 2] == 1.0
    assert DensityMatrix.basis([0, 1]).entries[1, 1] == 1.0
    lower = lowering_operator(2, 0)
    assert lower[0, 2] == 1.0 and lower[1, 3] == 1.0
    np.testing.assert_allclose(number_operator(2, 1), np.diag([0, 1, 0, 1]))
    with pytest.raises(EmitterIndexError):
        lowering_operator(2, 2)


def test_vectorization_is_column_stacking():
    rho = np.arange(16.0).reshape(4, 4)
    np.testing.assert_array_equal(vec(rho)[:4], rho[:, 0])
    np.testing.assert_array_equal(unvec(vec(rho), 4), rho)


def test_hamiltonian_exchange():
    ham = build_hamiltonian(pair)
    assert ham[1, 2] == pytest.approx(1.5)
    assert ham[2, 1] == pytest.approx(1.5)
    np.testing.assert_allclose(np.diag(ham), 0.0)


def test_trace_and_hermiticity_preserved():
    lmat = liouvillian_matrix(pair_model)
    np.testing.assert_allclose(vec(np.eye(4)).conj() @ lmat, 0.0, atol=1e-12)
    rho = DensityMatrix.from_ket([0.3, 0.5, 0.4j, 0.7]).entries
    drho = unvec(lmat @ vec(rho), 4)
    np.testing.assert_allclose(drho, drho.conj().T, atol=1e-12)


def test_single_emitter_decay():
    times = np.linspace(0.0, 5.0, 51)
    trajectory = evolve(LindbladModel.from_rates(single(2.0)), DensityMatrix.basis([1]), times)
    np.testing.assert_allclose(trajectory.expectation(number_operator(1, 0)).real,
                               np.exp(-2.0 * times), atol=1e-9)


def test_single_emitter_gain_steady_state():
    rho = steady_state(LindbladModel.from_rates(single(1.5, 0.5))).entries
    assert rho[1, 1].real == pytest.approx(0.5 / 2.0, abs=1e-12)
    pumped = steady_state(LindbladModel.from_rates(single(1.0, pump=0.25))).entries
    assert pumped[1, 1].real == pytest.approx(0.25 / 1.25, abs=1e-12)


def test_steady_state_is_a_density_matrix():
    rho = steady_state(pair_model)
    rho.validate()
    residual = liouvillian_matrix(pair_model) @ vec(rho.entries)
    np.testing.assert_allclose(residual, 0.0, atol=1e-12)
    assert spectral_gap(pair_model) > 0.0


def test_dark_state_degeneracy():
    dark = RateSet.symmetric(1.0, 1.0)
    with pytest.raises(DegenerateSteadyStateError):
        steady_state(LindbladModel.from_rates(dark))


def test_unstable_generator_rejected():
    with pytest.warns(RateMatrixWarning):
        model = LindbladModel.from_rates(RateSet.symmetric(1.0, 2.0))
    with pytest.raises(UnstableLiouvillianError):
        check_stability(liouvillian_matrix(model))
    with pytest.raises(UnstableLiouvillianError):
        steady_state(model)


def test_density_matrix_validation():
    with pytest.raises(ScenarioError, match="trace"):
        DensityMatrix(np.diag([1.0, 1.0, 0.0, 0.0])).validate()
    with pytest.raises(ScenarioError, match="Hermitian"):
        DensityMatrix(np.array([[0.5, 0.1], [0.2, 0.5]])).validate()
    with pytest.raises(ScenarioError, match="positive"):
        DensityMatrix(np.diag([1.5, -0.5])).validate()
    DensityMatrix.dressed("minus").validate()


def test_mismatched_initial_state():
    with pytest.raises(ScenarioError, match="run.initial_state"):
        evolve(pair_model, DensityMatrix.ground(3), [0.0, 1.0])


def test_time_grid_checks():
    with pytest.raises(ValueError):
        evolve(pair_model, DensityMatrix.ground(2), [0.5, 1.0])
    with pytest.raises(ValueError):
        evolve(pair_model, DensityMatrix.ground(2), [0.0, 2.0, 1.0])


def test_three_emitters():
    rates = RateSet(omega0=0.0, gamma_down=np.full((3, 3), 0.4) + 0.6 * np.eye(3),
                    gamma_up=0.1 * np.eye(3), delta_down=np.zeros((3, 3)),
                    delta_up=np.zeros((3, 3)), gamma_dephase=0.01)
    model = LindbladModel.from_rates(rates)
    assert model.dim == 8
    rho = steady_state(model).entries
    populations = [np.trace(number_operator(3, k) @ rho).real for k in range(3)]
    np.testing.assert_allclose(populations, populations[0], rtol=1e-9)


def test_propagation_matches_generator():
    lmat = liouvillian_matrix(pair_model)
    start = vec(DensityMatrix.from_ket([0.3, 0.5, 0.4j, 0.7]).entries)
    step = 1e-3
    samples = propagate(lmat, start, [0.0, step, 2.0 * step])
    # second-order one-sided difference
    slope = (-3.0 * samples[0] + 4.0 * samples[1] - samples[2]) / (2.0 * step)
    np.testing.assert_allclose(slope, lmat @ start, atol=1e-4)


def test_evolution_stays_physical():
    times = np.linspace(0.0, 10.0, 201)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        trajectory = evolve(pair_model, DensityMatrix.basis([1, 0]), times)
    traces = np.einsum("tii->t", trajectory.states)
    np.testing.assert_allclose(traces, 1.0, atol=1e-9)
    lowest = min(np.linalg.eigvalsh(rho).min() for rho in trajectory.states)
    assert lowest > -1e-8
    assert len(trajectory) == len(times)
