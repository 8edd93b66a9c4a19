import numpy as np
from scipy.linalg import solve

from .base_spectrum import BaseSpectrum
from .liouvillian import vec


class ResolventSpectrum(BaseSpectrum):
    """Spectrum engine solving the shifted Liouvillian resolvent at each detuning"""

    def __init__(self, model, debug=False):
        super().__init__(model, debug=debug)
        dim = model.dim
        # shift the steady-state eigenvalue to -1; sources are traceless so nothing else changes
        projector = np.outer(vec(self.rho_ss.entries), vec(np.eye(dim)))
        self._shifted = self._lmat - projector
        self._identity = np.eye(dim * dim)

    def _transform(self, delta) -> np.ndarray:
        return solve(1j * delta * self._identity - self._shifted, self._sources)
