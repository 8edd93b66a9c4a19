import logging
from abc import abstractmethod

import numpy as np

from .liouvillian import (
    LindbladModel, check_stability, liouvillian_matrix, lowering_operator, steady_state, vec,
)

logger = logging.getLogger(__name__)


class BaseSpectrum:
    """
    Base class for steady-state emission spectra via the quantum regression theorem.

    For every pair of emitters (n, n') the engine evaluates
    S0[n, n'](delta) = int_0^inf Tr[sigma+_n e^{L tau} B_n'] e^{-i delta tau} d tau,
    with B_n' = sigma-_n' rho_ss - Tr(sigma-_n' rho_ss) rho_ss. The kernel sign
    puts a transition of energy E at delta = +E. Subclasses decide how the
    half-Fourier transform of the regression vector is carried out.

    Attributes:
        model (LindbladModel): Model whose steady state is analysed.
        rho_ss (DensityMatrix): Unique steady state of the model.
    """

    def __init__(self, model: LindbladModel, debug=False):
        """
        Initialize the engine and its regression sources.

        Args:
            model (LindbladModel): Model to analyse.
            debug (bool): If True, enables debug logging. Defaults to False.

        Raises:
            PhysicsRegimeError: If the model has no unique stable steady state.
        """
        self._debug = debug
        self.model = model
        self._lmat = liouvillian_matrix(model)
        self._eigenvalues = check_stability(self._lmat)
        self.rho_ss = steady_state(model)
        rho = self.rho_ss.entries
        sources, readout = [], []
        for emitter in range(model.n):
            lower = lowering_operator(model.n, emitter)
            source = lower @ rho
            sources.append(vec(source - np.trace(source) * rho))
            # Tr[A X] = vec(A^T) . vec(X)
            readout.append(lower.conj().T.flatten(order="C"))
        self._sources = np.column_stack(sources)
        self._readout = np.array(readout)
        self._debug_print(f"Spectrum engine ready for {model.n} emitters")

    def __enter__(self):
        return self

    def __exit__(self, _type, value, traceback):
        self.close()

    def close(self):
        """ Drop the cached superoperator data. """
        self._lmat = None
        self._sources = None

    def _debug_print(self, data):
        if self._debug:
            logger.debug(data[:100] + "...")

    def correlation_spectra(self, detuning) -> np.ndarray:
        """
        Complex S0 tensor on a detuning grid.

        Args:
            detuning (array): Detunings from omega0 in the model's rate unit.

        Returns:
            np.ndarray: Shape (len(detuning), n, n), indexed [k, n, n'].
        """
        grid = np.asarray(detuning, dtype=float)
        out = np.empty((grid.size, self.model.n, self.model.n), dtype=complex)
        for k, delta in enumerate(grid):
            out[k] = self._readout @ self._transform(delta)
        self._debug_print(f"Evaluated {grid.size} detunings with {type(self).__name__}")
        return out

    @abstractmethod
    def _transform(self, delta) -> np.ndarray:
        """
        Half-Fourier transform of the regression vectors at one detuning.

        Args:
            delta (float): Detuning from omega0.

        Returns:
            np.ndarray: Shape (d^2, n), one column per source emitter.
        """
        raise NotImplementedError
