"""
Gain-extended Lindblad master equation for n two-level emitters.

Superoperators act on column-stacked density matrices,
vec(rho) = rho.flatten(order="F"), so that vec(A rho B) = (B^T kron A) vec(rho).
The single-site basis is (|g>, |e>) and emitter 0 is the leftmost tensor factor.
"""
import logging
import warnings
from dataclasses import dataclass, field
from functools import reduce
from typing import List, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import svd

from .exceptions import (
    DegenerateSteadyStateError, EmitterIndexError, IntegrationError, PositivityWarning,
    ScenarioError, UnstableLiouvillianError,
)
from .qnm_rates import RateSet, _warn_if_not_psd

logger = logging.getLogger(__name__)

RTOL = 1e-10
ATOL = 1e-12
HERMITIAN_TOLERANCE = 1e-12
TRACE_TOLERANCE = 1e-12
PSD_STATE_TOLERANCE = 1e-10
POSITIVITY_WARNING = 1e-8
STABILITY_TOLERANCE = 1e-8
NULL_SPACE_TOLERANCE = 1e-10
MAX_EMITTERS = 6

_SIGMA_MINUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)


def vec(matrix) -> np.ndarray:
    return np.asarray(matrix).flatten(order="F")


def unvec(vector, dim) -> np.ndarray:
    return np.asarray(vector).reshape((dim, dim), order="F")


def spre(op) -> np.ndarray:
    return np.kron(np.eye(op.shape[0]), op)


def spost(op) -> np.ndarray:
    return np.kron(op.T, np.eye(op.shape[0]))


def lowering_operator(n, alpha) -> np.ndarray:
    """
    Lowering operator of emitter `alpha`, identity on the other sites.

    Raises:
        EmitterIndexError: If alpha is not in 0..n-1.
    """
    if not 0 <= alpha < n:
        raise EmitterIndexError(f"Emitter id {alpha} out of range for {n} emitters")
    factors = [_SIGMA_MINUS if site == alpha else np.eye(2) for site in range(n)]
    return reduce(np.kron, factors)


def raising_operator(n, alpha) -> np.ndarray:
    return lowering_operator(n, alpha).conj().T


def number_operator(n, alpha) -> np.ndarray:
    lower = lowering_operator(n, alpha)
    return lower.conj().T @ lower


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """
    Emitter state on the 2^n dimensional Hilbert space.

    Attributes:
        entries (np.ndarray): Complex square matrix.
    """
    entries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "entries", np.array(self.entries, dtype=complex))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def n(self) -> int:
        return int(round(np.log2(self.dim)))

    def validate(self, key_path=""):
        """
        Check Hermiticity, unit trace and positivity within tolerance.

        Raises:
            ScenarioError: On the first violated invariant.
        """
        rho = self.entries
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or 2 ** self.n != rho.shape[0]:
            raise ScenarioError(key_path, f"state must be 2^n x 2^n, got {rho.shape}")
        if np.abs(rho - rho.conj().T).max() > HERMITIAN_TOLERANCE:
            raise ScenarioError(key_path, "state is not Hermitian")
        if abs(np.trace(rho) - 1.0) > TRACE_TOLERANCE:
            raise ScenarioError(key_path, f"state trace is {np.trace(rho).real:.12g}, not 1")
        if np.linalg.eigvalsh(rho).min() < -PSD_STATE_TOLERANCE:
            raise ScenarioError(key_path, "state is not positive semidefinite")
        return self

    @classmethod
    def from_ket(cls, psi):
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def basis(cls, occupation: Sequence[int]):
        """ Product state with emitter k excited when occupation[k] is 1. """
        index = int("".join(str(int(bit)) for bit in occupation), 2)
        psi = np.zeros(2 ** len(occupation))
        psi[index] = 1.0
        return cls.from_ket(psi)

    @classmethod
    def ground(cls, n):
        return cls.basis([0] * n)

    @classmethod
    def dressed(cls, name):
        """ |plus> or |minus> = (|e_a g_b> +- |g_a e_b>)/sqrt(2). """
        sign = {"plus": 1.0, "minus": -1.0}[name]
        return cls.from_ket([0.0, sign, 1.0, 0.0])


def build_hamiltonian(rates: RateSet) -> np.ndarray:
    """
    Emitter Hamiltonian in the frame rotating at omega0.

    Args:
        rates (RateSet): Detunings and pairwise rates in one unit.

    Returns:
        np.ndarray: H / hbar = sum detuning_a n_a + sum J_ab sigma+_a sigma-_b over a != b.
    """
    n = rates.n
    dim = 2 ** n
    ham = np.zeros((dim, dim), dtype=complex)
    lowers = [lowering_operator(n, k) for k in range(n)]
    exchange = rates.exchange()
    for alpha in range(n):
        ham += rates.detuning[alpha] * (lowers[alpha].conj().T @ lowers[alpha])
        for beta in range(n):
            if alpha != beta and exchange[alpha, beta] != 0.0:
                ham += exchange[alpha, beta] * (lowers[alpha].conj().T @ lowers[beta])
    return ham


@dataclass(frozen=True, eq=False)
class Dissipator:
    """
    A family of jump operators sharing one Hermitian rate matrix.

    Attributes:
        name (str): Label of the family.
        jumps (list): Jump operators L_alpha.
        rate_matrix (np.ndarray): Coefficients of L_alpha rho L_beta^dagger.
    """
    name: str
    jumps: List[np.ndarray]
    rate_matrix: np.ndarray

    def superoperator(self) -> np.ndarray:
        dim = self.jumps[0].shape[0]
        out = np.zeros((dim * dim, dim * dim), dtype=complex)
        for alpha, l_alpha in enumerate(self.jumps):
            for beta, l_beta in enumerate(self.jumps):
                rate = self.rate_matrix[alpha, beta]
                if rate == 0.0:
                    continue
                product = l_beta.conj().T @ l_alpha
                out += rate * (np.kron(l_beta.conj(), l_alpha)
                               - 0.5 * spre(product) - 0.5 * spost(product))
        return out


def build_dissipators(rates: RateSet) -> List[Dissipator]:
    n = rates.n
    lowers = [lowering_operator(n, k) for k in range(n)]
    raises = [lower.conj().T for lower in lowers]
    families = [
        Dissipator("decay", lowers, rates.gamma_down),
        Dissipator("gain", raises, rates.gamma_up),
        Dissipator("dephasing", [r @ l for r, l in zip(raises, lowers)], np.diag(rates.gamma_dephase)),
    ]
    if rates.heuristic:
        families.append(Dissipator("pump", raises, rates.heuristic_pump_matrix()))
    return families


@dataclass(frozen=True, eq=False)
class LindbladModel:
    """
    Hamiltonian plus dissipator families built from a RateSet.

    Attributes:
        rates (RateSet): Source rates.
        rotating_frame (bool): Work at detuning from omega0.
        hamiltonian (np.ndarray): H / hbar in the rate unit.
        dissipators (list): Dissipator families.
    """
    rates: RateSet
    rotating_frame: bool = True
    hamiltonian: np.ndarray = field(default=None)
    dissipators: List[Dissipator] = field(default=None)

    def __post_init__(self):
        if self.rates.n > MAX_EMITTERS:
            raise ScenarioError("emitters.count",
                                f"dense superoperators support at most {MAX_EMITTERS} emitters")
        if not self.rotating_frame:
            raise ScenarioError("run.rotating_frame", "only the rotating frame at omega0 is supported")
        if self.hamiltonian is None:
            object.__setattr__(self, "hamiltonian", build_hamiltonian(self.rates))
        if self.dissipators is None:
            object.__setattr__(self, "dissipators", build_dissipators(self.rates))
        if np.abs(self.hamiltonian - self.hamiltonian.conj().T).max() > HERMITIAN_TOLERANCE:
            raise ScenarioError("rates.delta_down", "Hamiltonian is not Hermitian")
        for family in self.dissipators:
            _warn_if_not_psd(family.name, family.rate_matrix)

    @classmethod
    def from_rates(cls, rates: RateSet):
        return cls(rates=rates)

    @property
    def n(self) -> int:
        return self.rates.n

    @property
    def dim(self) -> int:
        return 2 ** self.n


def liouvillian_matrix(model: LindbladModel) -> np.ndarray:
    """
    Dense generator acting on column-stacked density matrices.

    Args:
        model (LindbladModel): Hamiltonian and dissipator families.

    Returns:
        np.ndarray: L of shape (4^n, 4^n) with d vec(rho)/dt = L vec(rho).
    """
    lmat = -1j * (spre(model.hamiltonian) - spost(model.hamiltonian))
    for family in model.dissipators:
        lmat = lmat + family.superoperator()
    return lmat


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    Sampled density-matrix trajectory.

    Attributes:
        times (np.ndarray): Output times.
        states (np.ndarray): Density matrices, shape (len(times), dim, dim).
    """
    times: np.ndarray
    states: np.ndarray

    def expectation(self, op) -> np.ndarray:
        return np.einsum("ij,tji->t", op, self.states)

    def __len__(self):
        return len(self.times)

    def __getitem__(self, k) -> DensityMatrix:
        return DensityMatrix(self.states[k])


def _check_grid(t_grid):
    grid = np.asarray(t_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("Time grid must be a non-empty 1-d sequence")
    if grid[0] != 0.0:
        raise ValueError(f"Time grid must start at 0, got {grid[0]}")
    if grid.size > 1 and (np.diff(grid) <= 0).any():
        raise ValueError("Time grid must be strictly increasing")
    return grid


def propagate(lmat, vec0, t_grid) -> np.ndarray:
    """
    Integrate d vec/dt = L vec and sample it on t_grid.

    Returns:
        np.ndarray: Array of shape (len(t_grid), len(vec0)).

    Raises:
        IntegrationError: If the integrator aborts.
    """
    grid = _check_grid(t_grid)
    y0 = np.asarray(vec0, dtype=complex)
    if grid.size == 1:
        return y0[None, :].copy()
    sol = solve_ivp(lambda _t, y: lmat @ y, (grid[0], grid[-1]), y0, method="DOP853",
                    t_eval=grid, rtol=RTOL, atol=ATOL)
    if not sol.success:
        raise IntegrationError(f"Integration failed: {sol.message}")
    return sol.y.T


def evolve(model: LindbladModel, rho0: DensityMatrix, t_grid) -> Trajectory:
    """
    Solve the master equation from rho0 and sample it on t_grid.

    Args:
        model (LindbladModel): Emitter model.
        rho0 (DensityMatrix): Initial state, validated first.
        t_grid (array): Increasing times starting at 0.

    Returns:
        Trajectory: Hermitian-symmetrised states at every grid time.

    Raises:
        ScenarioError: If rho0 is invalid or has the wrong dimension.
        IntegrationError: If the integrator aborts.
    """
    rho0.validate("run.initial_state")
    if rho0.dim != model.dim:
        raise ScenarioError("run.initial_state",
                            f"state dimension {rho0.dim} does not match {model.n} emitters")
    lmat = liouvillian_matrix(model)
    samples = propagate(lmat, vec(rho0.entries), t_grid)
    states = np.array([unvec(sample, model.dim) for sample in samples])
    states = 0.5 * (states + np.conj(np.transpose(states, (0, 2, 1))))
    lowest = min(np.linalg.eigvalsh(rho).min() for rho in states)
    if lowest < -POSITIVITY_WARNING:
        warnings.warn(f"Trajectory lost positivity (min eigenvalue {lowest:.3e})",
                      PositivityWarning, stacklevel=2)
    logger.debug("Evolved %d emitters over %d samples", model.n, len(states))
    return Trajectory(times=np.asarray(t_grid, dtype=float), states=states)


def check_stability(lmat) -> np.ndarray:
    """
    Return the Liouvillian eigenvalues after checking none grows.

    Raises:
        UnstableLiouvillianError: If any eigenvalue has Re > 1e-8.
    """
    eigenvalues = np.linalg.eigvals(lmat)
    growth = eigenvalues.real.max()
    if growth > STABILITY_TOLERANCE:
        raise UnstableLiouvillianError(
            f"Liouvillian eigenvalue with Re = {growth:.3e} > 0: outside linear/stable regime")
    return eigenvalues


def steady_state(model: LindbladModel) -> DensityMatrix:
    """
    Unique steady state from the null space of the Liouvillian.

    Raises:
        UnstableLiouvillianError: If the generator has a growing mode.
        DegenerateSteadyStateError: If the null space has more than one dimension.
    """
    lmat = liouvillian_matrix(model)
    check_stability(lmat)
    _, singular, vh = svd(lmat)
    threshold = NULL_SPACE_TOLERANCE * max(singular[0], 1.0)
    null_dim = int((singular <= threshold).sum())
    if null_dim > 1:
        raise DegenerateSteadyStateError(
            f"Steady state is not unique: null space has dimension {null_dim}"
            " (dark subradiant state without dephasing or gain?)")
    rho = unvec(vh[-1].conj(), model.dim)
    rho = rho / np.trace(rho)
    rho = 0.5 * (rho + rho.conj().T)
    logger.debug("Steady state found, smallest singular value %.3e", singular[-1])
    return DensityMatrix(rho)


def spectral_gap(model: LindbladModel) -> float:
    """ Slowest nonzero decay rate of the Liouvillian. """
    eigenvalues = check_stability(liouvillian_matrix(model))
    rates = -eigenvalues.real
    nonzero = rates[np.abs(eigenvalues) > NULL_SPACE_TOLERANCE * max(1.0, np.abs(eigenvalues).max())]
    return float(nonzero.min())
