"""
Entanglement negativity and steady-state emission spectra.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Iterable, List, NamedTuple, Optional, Type

import numpy as np
from scipy.integrate import trapezoid
from scipy.signal import find_peaks, peak_widths

from .base_spectrum import BaseSpectrum
from .exceptions import EmitterIndexError, MissingDetectorError
from .liouvillian import (
    DensityMatrix, LindbladModel, Trajectory, liouvillian_matrix, lowering_operator, propagate,
    steady_state, vec,
)
from .qnm_rates import QnmModel, RateSet, ac_coefficient
from .resolvent_spectrum import ResolventSpectrum
from .time_domain_spectrum import TimeDomainSpectrum

logger = logging.getLogger(__name__)

SPECTRUM_ENGINES: Dict[str, Type[BaseSpectrum]] = {
    "resolvent": ResolventSpectrum,
    "time-domain": TimeDomainSpectrum,
}
DEFAULT_GRID_POINTS = 2001
DEFAULT_GRID_SPAN = 4.0
PEAK_PROMINENCE = 1e-3


def log_negativity(rho: DensityMatrix, partition: Iterable[int]) -> float:
    """
    Logarithmic negativity for the bipartition (partition | rest).

    The partial transpose swaps the row and column index of every emitter in
    `partition` on the (2,)*2n tensor reshape of rho.

    Args:
        rho (DensityMatrix): State of n emitters.
        partition (iterable): Emitter ids transposed.

    Returns:
        float: log2(N + 1) with N = 2 * sum of |negative eigenvalues|.
    """
    n = rho.n
    subset = sorted(set(partition))
    for emitter in subset:
        if not 0 <= emitter < n:
            raise EmitterIndexError(f"Emitter id {emitter} out of range for {n} emitters")
    axes = list(range(2 * n))
    for emitter in subset:
        axes[emitter], axes[n + emitter] = axes[n + emitter], axes[emitter]
    tensor = rho.entries.reshape((2,) * (2 * n))
    transposed = tensor.transpose(axes).reshape(rho.dim, rho.dim)
    eigenvalues = np.linalg.eigvalsh(0.5 * (transposed + transposed.conj().T))
    negativity = 2.0 * np.clip(-eigenvalues, 0.0, None).sum()
    return float(np.log2(negativity + 1.0))


def negativity_series(trajectory: Trajectory, partition=(0,)) -> np.ndarray:
    return np.array([log_negativity(trajectory[k], partition) for k in range(len(trajectory))])


def correlation_ss(model: LindbladModel, n, n_prime, tau_grid) -> np.ndarray:
    """
    Steady-state correlation <sigma+_n(tau) sigma-_n'(0)> on a tau grid.

    Raises:
        PhysicsRegimeError: If the steady state is not unique or not stable.
    """
    rho = steady_state(model).entries
    source = lowering_operator(model.n, n_prime) @ rho
    readout = lowering_operator(model.n, n).conj().T.flatten(order="C")
    samples = propagate(liouvillian_matrix(model), vec(source), tau_grid)
    return samples @ readout


class Peak(NamedTuple):
    position: float
    height: float
    fwhm: float


@dataclass(frozen=True, eq=False)
class SpectrumSeries:
    """
    Sampled steady-state spectrum.

    Attributes:
        detuning (np.ndarray): Strictly increasing detunings from omega0, Gamma(0) units.
        values (np.ndarray): S(detuning).
        self_term (np.ndarray): Re S0 of emitter 0 with itself.
        cross_term (np.ndarray): Sum of Re S0 over distinct emitter pairs.
        peaks (list): Detected peaks.
    """
    detuning: np.ndarray
    values: np.ndarray
    self_term: Optional[np.ndarray] = None
    cross_term: Optional[np.ndarray] = None
    peaks: List[Peak] = field(default=None)

    def __post_init__(self):
        grid = np.asarray(self.detuning, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape:
            raise ValueError("Spectrum grid and values must be 1-d arrays of equal length")
        if grid.size > 1 and (np.diff(grid) <= 0).any():
            raise ValueError("Spectrum grid must be strictly increasing")
        if not np.isfinite(values).all():
            raise ValueError("Spectrum values must be finite")
        object.__setattr__(self, "detuning", grid)
        object.__setattr__(self, "values", values)
        for name in ("self_term", "cross_term"):
            if getattr(self, name) is None:
                object.__setattr__(self, name, np.zeros_like(values))
        if self.peaks is None:
            object.__setattr__(self, "peaks", detect_peaks(self))


def detect_peaks(series: SpectrumSeries, prominence=PEAK_PROMINENCE) -> List[Peak]:
    """
    Local maxima above a relative prominence threshold.

    Args:
        series (SpectrumSeries): Spectrum to scan.
        prominence (float): Threshold relative to the series maximum.

    Returns:
        list: Peaks ordered by position, FWHM from linearly interpolated half-height crossings.
    """
    values, grid = series.values, series.detuning
    top = values.max() if values.size else 0.0
    if values.size < 3 or top <= 0.0:
        return []
    indices, props = find_peaks(values, prominence=prominence * top, plateau_size=1)
    if indices.size == 0:
        return []
    # prominence = height, so the width line sits at half the absolute height
    _, _, left_ips, right_ips = peak_widths(
        values, indices, rel_height=0.5,
        prominence_data=(values[indices], props["left_bases"], props["right_bases"]))
    samples = np.arange(values.size)
    peaks = []
    for k, index in enumerate(indices):
        # flat tops report the plateau centre
        first, last = props["left_edges"][k], props["right_edges"][k]
        left = np.interp(left_ips[k], samples, grid)
        right = np.interp(right_ips[k], samples, grid)
        peaks.append(Peak(position=0.5 * float(grid[first] + grid[last]),
                          height=float(values[index]), fwhm=float(right - left)))
    return peaks


def spectrum_engine(method) -> Type[BaseSpectrum]:
    try:
        return SPECTRUM_ENGINES[method]
    except KeyError:
        raise ValueError(f"Unknown spectrum method {method!r}; "
                         f"expected one of {sorted(SPECTRUM_ENGINES)}") from None


def default_detuning_grid(rates: RateSet, num=DEFAULT_GRID_POINTS) -> np.ndarray:
    span = DEFAULT_GRID_SPAN * max(np.abs(rates.exchange()).max(), rates.gamma_down[0, 0])
    return np.linspace(-span, span, num)


def _series_from_tensor(grid, tensor, weights=None) -> SpectrumSeries:
    weighted = tensor if weights is None else weights * tensor
    real = weighted.real
    total = real.sum(axis=(1, 2))
    self_term = real[:, 0, 0]
    return SpectrumSeries(detuning=grid, values=total, self_term=self_term,
                          cross_term=total - np.trace(real, axis1=1, axis2=2))


def _prepare(model: LindbladModel, include_cross_pump) -> LindbladModel:
    if include_cross_pump:
        return model
    rates = model.rates.without_cross_pump()
    pumps = {"gain": rates.gamma_up, "pump": rates.heuristic_pump_matrix()}
    # custom Hamiltonians and extra families survive, only the pump families change
    dissipators = [replace(family, rate_matrix=pumps[family.name]) if family.name in pumps
                   else family for family in model.dissipators]
    return replace(model, rates=rates, dissipators=dissipators)


def spectrum_ss(model: LindbladModel, omega_grid=None, include_cross_pump=True,
                method="resolvent", debug=False) -> SpectrumSeries:
    """
    Steady-state spectrum S = sum over n, n' of Re S0[n, n'].

    Args:
        model (LindbladModel): Emitter model in Gamma(0) units.
        omega_grid (array, optional): Detuning grid; defaults to default_detuning_grid.
        include_cross_pump (bool): If False, the cross-emitter incoherent pump is dropped.
        method (str): "resolvent" or "time-domain".
        debug (bool): Forwarded to the engine.

    Returns:
        SpectrumSeries: Spectrum with peak annotations.
    """
    model = _prepare(model, include_cross_pump)
    grid = default_detuning_grid(model.rates) if omega_grid is None else np.asarray(omega_grid, float)
    with spectrum_engine(method)(model, debug=debug) as engine:
        tensor = engine.correlation_spectra(grid)
    return _series_from_tensor(grid, tensor)


def weighted_spectrum(model: LindbladModel, omega_grid,
                      weights: Callable[[float], np.ndarray], include_cross_pump=True,
                      method="resolvent") -> SpectrumSeries:
    """ S = sum over n, n' of Re{g[n, n'](delta) S0[n, n'](delta)}. """
    model = _prepare(model, include_cross_pump)
    grid = np.asarray(omega_grid, dtype=float)
    with spectrum_engine(method)(model) as engine:
        tensor = engine.correlation_spectra(grid)
    factors = np.array([weights(delta) for delta in grid])
    return _series_from_tensor(grid, tensor, factors)


def optional_weighted_spectrum(model: LindbladModel, omega_grid, qnm: QnmModel, detector,
                               gamma_ref_ev, include_cross_pump=True,
                               method="resolvent") -> SpectrumSeries:
    """
    Spectrum weighted by emitter-to-detector propagation through the QNM.

    Args:
        model (LindbladModel): Emitter model in Gamma(0) units.
        omega_grid (array): Detuning grid in Gamma(0) units.
        qnm (QnmModel): Mode model holding the detector amplitude.
        detector (str): Key of qnm.detector_amp.
        gamma_ref_ev (float): Gamma(0) in eV, converting detunings to frequencies.

    Raises:
        MissingDetectorError: If the detector has no mode amplitude.
    """
    if detector not in qnm.detector_amp:
        raise MissingDetectorError(f"No detector mode amplitude for {detector!r}")
    f_det = qnm.detector_amp[detector]
    omega0 = model.rates.omega0

    def propagator(delta):
        a_c = ac_coefficient(omega0 + delta * gamma_ref_ev, qnm)
        return np.array([d * a_c * f * f_det for d, f in zip(qnm.dipole_scale, qnm.mode_amp)])

    reference = propagator(0.0)
    norm = np.abs(reference).max() ** 2

    def weights(delta):
        g = propagator(delta)
        return np.outer(g.conj(), g) / norm

    return weighted_spectrum(model, omega_grid, weights, include_cross_pump, method)


def single_emitter_spectrum(rates: RateSet, emitter=0, omega_grid=None,
                            method="resolvent") -> SpectrumSeries:
    """ Spectrum of one emitter alone, keeping its own diagonal rates. """
    if not 0 <= emitter < rates.n:
        raise EmitterIndexError(f"Emitter id {emitter} out of range for {rates.n} emitters")

    def diag(matrix):
        return np.array([[matrix[emitter, emitter]]])

    single = RateSet(omega0=rates.omega0, gamma_down=diag(rates.gamma_down),
                     gamma_up=diag(rates.gamma_up), delta_down=np.zeros((1, 1)),
                     delta_up=np.zeros((1, 1)), gamma_dephase=rates.gamma_dephase[emitter],
                     gamma_pump=rates.gamma_pump[emitter], detuning=rates.detuning[emitter])
    return spectrum_ss(LindbladModel.from_rates(single), omega_grid, method=method)


def integrated_power(series: SpectrumSeries) -> float:
    return float(trapezoid(series.values, series.detuning))


def peak_ratio(series: SpectrumSeries, low, high) -> float:
    """
    Height of the peak nearest `low` over the height of the peak nearest `high`.

    Returns 0 when both positions resolve to the same peak or no peak exists.
    """
    if not series.peaks:
        return 0.0
    near_high = min(series.peaks, key=lambda p: abs(p.position - high))
    near_low = min(series.peaks, key=lambda p: abs(p.position - low))
    if near_low is near_high:
        return 0.0
    return near_low.height / near_high.height


def spectral_weight_ratio(series: SpectrumSeries, low, high) -> float:
    """
    Spectrum value at detuning `low` over its value at `high`, linearly interpolated.

    Unlike peak_ratio this needs no resolved maximum at `low`, so it tracks a line
    hidden in the flank of a stronger one.

    Returns:
        float: The ratio, or 0 when the spectrum at `high` is not positive.
    """
    grid, values = series.detuning, series.values
    for position in (low, high):
        if not grid[0] <= position <= grid[-1]:
            raise ValueError(f"Detuning {position} lies outside the spectrum grid")
    reference = float(np.interp(high, grid, values))
    if reference <= 0.0:
        return 0.0
    return float(np.interp(low, grid, values)) / reference
