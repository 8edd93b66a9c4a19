"""
Optical Bloch equations of an emitter pair in the bare and dressed bases.

Bare basis: (1) |g_a g_b>, (2) |g_a e_b>, (3) |e_a g_b>, (4) |e_a e_b>.
Dressed basis: |G>, |->, |+>, |T> with |+-> = (|e_a g_b> +- |g_a e_b>)/sqrt(2).
"""
import logging
from dataclasses import dataclass
from typing import List, NamedTuple, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from .exceptions import (
    DegenerateSteadyStateError, GainPresentError, IntegrationError, ScenarioError, SymmetryError,
)
from .liouvillian import ATOL, RTOL, DensityMatrix
from .qnm_rates import RateSet, collective_rates

logger = logging.getLogger(__name__)

PROBABILITY_TOLERANCE = 1e-10
COHERENCE_TOLERANCE = 1e-8
SINGULAR_CONDITION = 1e12

_S = 1.0 / np.sqrt(2.0)
# columns are |G>, |->, |+>, |T> in the bare basis
DRESSED_BASIS = np.array([
    [1.0, 0.0, 0.0, 0.0],
    [0.0, -_S, _S, 0.0],
    [0.0, _S, _S, 0.0],
    [0.0, 0.0, 0.0, 1.0],
], dtype=complex)


@dataclass(frozen=True, eq=False)
class BareState:
    """
    Two-emitter state in the bare basis.

    The full 4x4 matrix is kept so that coherences outside the tracked set
    survive a change of basis.

    Attributes:
        matrix (np.ndarray): 4x4 complex density matrix (or its time derivative).
    """
    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=complex)
        if matrix.shape != (4, 4):
            raise ScenarioError("", f"bare state must be 4x4, got {matrix.shape}")
        object.__setattr__(self, "matrix", matrix)

    @classmethod
    def from_elements(cls, rho11, rho22, rho33, rho44, rho23=0.0):
        matrix = np.diag([rho11, rho22, rho33, rho44]).astype(complex)
        matrix[1, 2] = rho23
        matrix[2, 1] = np.conj(rho23)
        return cls(matrix)

    @classmethod
    def from_density(cls, rho: DensityMatrix):
        return cls(rho.entries)

    @classmethod
    def from_vector(cls, y):
        return cls.from_elements(y[0], y[1], y[2], y[3], complex(y[4], y[5]))

    rho11 = property(lambda self: float(self.matrix[0, 0].real))
    rho22 = property(lambda self: float(self.matrix[1, 1].real))
    rho33 = property(lambda self: float(self.matrix[2, 2].real))
    rho44 = property(lambda self: float(self.matrix[3, 3].real))
    rho23 = property(lambda self: complex(self.matrix[1, 2]))

    def vector(self) -> np.ndarray:
        return np.array([self.rho11, self.rho22, self.rho33, self.rho44,
                         self.rho23.real, self.rho23.imag])

    def validate(self):
        probs = np.array([self.rho11, self.rho22, self.rho33, self.rho44])
        if probs.min() < -PROBABILITY_TOLERANCE:
            raise ScenarioError("", f"negative bare population {probs.min():.3e}")
        if abs(probs.sum() - 1.0) > PROBABILITY_TOLERANCE:
            raise ScenarioError("", f"bare populations sum to {probs.sum():.12g}")
        bound = np.sqrt(max(self.rho22, 0.0) * max(self.rho33, 0.0)) + COHERENCE_TOLERANCE
        if abs(self.rho23) > bound:
            raise ScenarioError("", "rho23 exceeds the Cauchy-Schwarz bound")
        return self


@dataclass(frozen=True, eq=False)
class DressedState:
    """
    Two-emitter state in the dressed basis, ordered |G>, |->, |+>, |T>.

    Attributes:
        matrix (np.ndarray): 4x4 complex density matrix (or its time derivative).
    """
    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=complex)
        if matrix.shape != (4, 4):
            raise ScenarioError("", f"dressed state must be 4x4, got {matrix.shape}")
        object.__setattr__(self, "matrix", matrix)

    @classmethod
    def from_elements(cls, rhoGG, rhoPP, rhoMM, rhoTT, rhoPM=0.0):  # pylint: disable=invalid-name
        matrix = np.diag([rhoGG, rhoMM, rhoPP, rhoTT]).astype(complex)
        matrix[2, 1] = rhoPM
        matrix[1, 2] = np.conj(rhoPM)
        return cls(matrix)

    @classmethod
    def from_vector(cls, y):
        return cls.from_elements(y[0], y[1], y[2], y[3], complex(y[4], y[5]))

    rhoGG = property(lambda self: float(self.matrix[0, 0].real))
    rhoMM = property(lambda self: float(self.matrix[1, 1].real))
    rhoPP = property(lambda self: float(self.matrix[2, 2].real))
    rhoTT = property(lambda self: float(self.matrix[3, 3].real))
    rhoPM = property(lambda self: complex(self.matrix[2, 1]))

    def vector(self) -> np.ndarray:
        return np.array([self.rhoGG, self.rhoPP, self.rhoMM, self.rhoTT,
                         self.rhoPM.real, self.rhoPM.imag])

    def validate(self):
        probs = np.array([self.rhoGG, self.rhoPP, self.rhoMM, self.rhoTT])
        if probs.min() < -PROBABILITY_TOLERANCE:
            raise ScenarioError("", f"negative dressed population {probs.min():.3e}")
        if abs(probs.sum() - 1.0) > PROBABILITY_TOLERANCE:
            raise ScenarioError("", f"dressed populations sum to {probs.sum():.12g}")
        return self


def bare_to_dressed(state: BareState) -> DressedState:
    return DressedState(DRESSED_BASIS.conj().T @ state.matrix @ DRESSED_BASIS)


def dressed_to_bare(state: DressedState) -> BareState:
    return BareState(DRESSED_BASIS @ state.matrix @ DRESSED_BASIS.conj().T)


def populations(state: BareState) -> Tuple[float, float]:
    return state.rho33 + state.rho44, state.rho22 + state.rho44


def _require_pair(rates: RateSet):
    if rates.n != 2:
        raise SymmetryError(f"Bloch equations describe two emitters, got {rates.n}")


def _bare_derivative(y, rates: RateSet) -> np.ndarray:
    r11, r22, r33, r44, re23, im23 = y
    down = rates.gamma_down
    pump = rates.pump_matrix()
    j = rates.exchange()[0, 1]
    deph = 0.5 * (rates.gamma_dephase[0] + rates.gamma_dephase[1])
    shift = rates.detuning[1] - rates.detuning[0]
    cross = down[0, 1] + pump[0, 1]

    d22 = (-(down[1, 1] + pump[0, 0]) * r22 + down[0, 0] * r44 + pump[1, 1] * r11
           - cross * re23 - 2.0 * j * im23)
    d33 = (-(down[0, 0] + pump[1, 1]) * r33 + down[1, 1] * r44 + pump[0, 0] * r11
           - cross * re23 + 2.0 * j * im23)
    d44 = (-(down[0, 0] + down[1, 1]) * r44 + pump[0, 0] * r22 + pump[1, 1] * r33
           + 2.0 * pump[0, 1] * re23)
    rho23 = complex(re23, im23)
    width = 0.5 * (down[0, 0] + down[1, 1] + pump[0, 0] + pump[1, 1]) + deph
    d23 = (-width * rho23
           + 0.5 * down[0, 1] * (2.0 * r44 - r33 - r22)
           + 0.5 * pump[0, 1] * (2.0 * r11 - r33 - r22)
           - 1j * j * (r33 - r22)
           - 1j * shift * rho23)
    return np.array([-(d22 + d33 + d44), d22, d33, d44, d23.real, d23.imag])


def bare_rhs(state: BareState, rates: RateSet) -> BareState:
    """
    Time derivative of the tracked bare elements.

    Returns:
        BareState: Derivatives of rho11..rho44 and rho23; other entries are zero.
    """
    _require_pair(rates)
    return BareState.from_vector(_bare_derivative(state.vector(), rates))


class _DressedCoefficients(NamedTuple):
    down: float
    down_ab: float
    pump: float
    pump_ab: float
    dephase: float
    exchange: float


def _dressed_coefficients(rates: RateSet) -> _DressedCoefficients:
    _require_pair(rates)
    if not rates.is_symmetric_pair():
        raise SymmetryError("Dressed-state equations need equal diagonal rates;"
                            " use the liouvillian module for asymmetric pairs")
    if abs(rates.gamma_dephase[0] - rates.gamma_dephase[1]) > 1e-12 * (1.0 + rates.gamma_dephase.max()):
        raise SymmetryError("Dressed-state equations need equal dephasing;"
                            " use the liouvillian module")
    if rates.detuning.any():
        raise SymmetryError("Dressed-state equations need identical emitters (zero detuning);"
                            " use the liouvillian module")
    pump = rates.pump_matrix()
    return _DressedCoefficients(
        down=rates.gamma_down[0, 0], down_ab=rates.gamma_down[0, 1],
        pump=pump[0, 0], pump_ab=pump[0, 1],
        dephase=rates.gamma_dephase[0], exchange=rates.exchange()[0, 1])


def _dressed_derivative(y, c: _DressedCoefficients) -> np.ndarray:
    gg, pp, mm, tt, re_pm, im_pm = y
    up_plus, up_minus = c.pump + c.pump_ab, c.pump - c.pump_ab
    down_plus, down_minus = c.down + c.down_ab, c.down - c.down_ab
    exchange = 0.5 * c.dephase * (pp - mm)

    dpp = down_plus * tt + up_plus * gg - (down_plus + up_plus) * pp - exchange
    dmm = down_minus * tt + up_minus * gg - (down_minus + up_minus) * mm + exchange
    dtt = -2.0 * c.down * tt + c.pump * (pp + mm) + c.pump_ab * (pp - mm)
    rho_pm = complex(re_pm, im_pm)
    dpm = -(c.down + c.pump + 2j * c.exchange) * rho_pm - 1j * c.dephase * im_pm
    return np.array([-(dpp + dmm + dtt), dpp, dmm, dtt, dpm.real, dpm.imag])


def dressed_rhs(state: DressedState, rates: RateSet) -> DressedState:
    """
    Time derivative of the dressed populations and the +- coherence.

    Raises:
        SymmetryError: If the pair is not symmetric.
    """
    return DressedState.from_vector(_dressed_derivative(state.vector(), _dressed_coefficients(rates)))


def dressed_steady(rates: RateSet) -> DressedState:
    """
    Analytic steady state of the dressed equations.

    The three population balances are solved together with
    rhoGG = 1 - rhoPP - rhoMM - rhoTT. The +- coherence obeys a homogeneous
    pair of equations and is therefore zero whenever that pair is regular.

    Raises:
        DegenerateSteadyStateError: If either linear system is singular.
    """
    c = _dressed_coefficients(rates)
    up_plus, up_minus = c.pump + c.pump_ab, c.pump - c.pump_ab
    down_plus, down_minus = c.down + c.down_ab, c.down - c.down_ab
    half = 0.5 * c.dephase
    system = np.array([
        [-(down_plus + 2.0 * up_plus + half), -up_plus + half, down_plus - up_plus],
        [-up_minus + half, -(down_minus + 2.0 * up_minus + half), down_minus - up_minus],
        [c.pump + c.pump_ab, c.pump - c.pump_ab, -2.0 * c.down],
    ])
    rhs = -np.array([up_plus, up_minus, 0.0])
    if np.linalg.cond(system) > SINGULAR_CONDITION:
        raise DegenerateSteadyStateError(
            "Dressed steady state is not unique (no dephasing and a dark subradiant state?)")
    pp, mm, tt = np.linalg.solve(system, rhs)

    width = c.down + c.pump
    coherence = np.array([[-width, 2.0 * c.exchange],
                          [-2.0 * c.exchange, -(width + c.dephase)]])
    if abs(np.linalg.det(coherence)) <= 1e-300 or np.linalg.cond(coherence) > SINGULAR_CONDITION:
        raise DegenerateSteadyStateError("Steady +- coherence is not unique")
    return DressedState.from_elements(1.0 - pp - mm - tt, pp, mm, tt, 0.0)


class NoGainTrajectory(NamedTuple):
    times: np.ndarray
    rhoPP: np.ndarray  # pylint: disable=invalid-name
    rhoMM: np.ndarray  # pylint: disable=invalid-name
    rhoPM: np.ndarray  # pylint: disable=invalid-name


def nogain_constants(state: DressedState) -> Tuple[float, float, complex]:
    return state.rhoPP, state.rhoMM, state.rhoPM


def nogain_analytic(rates: RateSet, c1, c2, c3, t_grid) -> NoGainTrajectory:
    """
    Closed-form single-excitation decay without gain or dephasing.

    Raises:
        GainPresentError: If gain or a heuristic pump is present.
        ValueError: If dephasing is present.
    """
    if rates.pump_matrix().any():
        raise GainPresentError("With gain present the |T> state does not decouple;"
                               " integrate the dressed equations instead")
    if rates.gamma_dephase.any():
        raise ValueError("Closed-form decay assumes zero dephasing")
    plus, minus = collective_rates(rates)
    times = np.asarray(t_grid, dtype=float)
    coherence_rate = rates.gamma_down[0, 0] + 2j * rates.exchange()[0, 1]
    return NoGainTrajectory(times=times,
                            rhoPP=c1 * np.exp(-plus * times),
                            rhoMM=c2 * np.exp(-minus * times),
                            rhoPM=c3 * np.exp(-coherence_rate * times))


def _integrate(derivative, y0, t_grid) -> np.ndarray:
    grid = np.asarray(t_grid, dtype=float)
    if grid.size == 1:
        return np.asarray(y0, dtype=float)[None, :]
    sol = solve_ivp(lambda _t, y: derivative(y), (grid[0], grid[-1]), y0, method="DOP853",
                    t_eval=grid, rtol=RTOL, atol=ATOL)
    if not sol.success:
        raise IntegrationError(f"Bloch integration failed: {sol.message}")
    return sol.y.T


def evolve_bare(rates: RateSet, state0: BareState, t_grid) -> List[BareState]:
    _require_pair(rates)
    samples = _integrate(lambda y: _bare_derivative(y, rates), state0.vector(), t_grid)
    return [BareState.from_vector(y) for y in samples]


def evolve_dressed(rates: RateSet, state0: DressedState, t_grid) -> List[DressedState]:
    coeffs = _dressed_coefficients(rates)
    samples = _integrate(lambda y: _dressed_derivative(y, coeffs), state0.vector(), t_grid)
    return [DressedState.from_vector(y) for y in samples]


def plateau_populations(states: Sequence[BareState], t_grid, window) -> Tuple[float, float]:
    """
    Mean emitter populations over a time window.

    Args:
        states (list): Bare states sampled on t_grid.
        t_grid (array): Sample times.
        window (tuple): Inclusive (start, stop) in the same time unit.

    Returns:
        tuple: Window means of rho_aa and rho_bb.
    """
    times = np.asarray(t_grid, dtype=float)
    start, stop = window
    mask = (times >= start) & (times <= stop)
    if not mask.any():
        raise ValueError(f"Plateau window {window} contains no samples")
    pops = np.array([populations(s) for s, inside in zip(states, mask) if inside])
    return float(pops[:, 0].mean()), float(pops[:, 1].mean())
