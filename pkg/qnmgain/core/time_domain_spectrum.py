from typing import List, Tuple

import numpy as np
from scipy.linalg import expm

from .base_spectrum import BaseSpectrum
from .exceptions import IntegrationError

TAIL_TOLERANCE = 1e-12
MAX_STEPS = 200


class TimeDomainSpectrum(BaseSpectrum):
    """
    Spectrum engine integrating the regression vector in time

    The tau axis doubles its step at every interval. Each interval is
    integrated exactly with the augmented-matrix exponential
    expm(h [[L - i delta, B], [0, 0]]), whose upper-right block is
    int_0^h e^{(L - i delta) s} ds B. The sum stops once ||B(tau)|| falls
    below 1e-12 ||B(0)||.
    """

    def __init__(self, model, debug=False):
        super().__init__(model, debug=debug)
        self._steps = self._build_steps()
        self._debug_print(f"Time-domain grid uses {len(self._steps)} intervals")

    def _build_steps(self) -> List[Tuple[float, float, np.ndarray]]:
        scale = max(np.abs(self._eigenvalues).max(), 1e-300)
        step = 0.1 / scale
        tau = 0.0
        current = self._sources
        reference = np.linalg.norm(current)
        steps = []
        if reference == 0.0:
            return steps
        while np.linalg.norm(current) >= TAIL_TOLERANCE * reference:
            if len(steps) >= MAX_STEPS:
                raise IntegrationError(
                    "Regression vector did not decay; the slowest Liouvillian rate is too small")
            steps.append((tau, step, current))
            current = expm(self._lmat * step) @ current
            tau += step
            step *= 2.0
        return steps

    def _transform(self, delta) -> np.ndarray:
        size, width = self._sources.shape
        total = np.zeros((size, width), dtype=complex)
        augmented = np.zeros((size + width, size + width), dtype=complex)
        shifted = self._lmat - 1j * delta * np.eye(size)
        for tau, step, current in self._steps:
            augmented[:size, :size] = shifted
            augmented[:size, size:] = current
            block = expm(step * augmented)[:size, size:]
            total += np.exp(-1j * delta * tau) * block
        return total
