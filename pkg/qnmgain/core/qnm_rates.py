"""
Loss- and gain-modified coupling rates from a single quasinormal mode.

Energies are in eV, lengths in nm, and every rate is returned in Purcell units,
i.e. divided by the background emission rate at the same frequency. That
division cancels hbar, epsilon_0 and the absolute dipole strength.
"""
import logging
import warnings
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import brentq

from .columns import RateColumns
from .exceptions import (
    CalibrationError, EmitterIndexError, RateMatrixWarning, ScenarioError, SymmetryError,
)

logger = logging.getLogger(__name__)

HBAR_C_EV_NM = 197.32698
PSD_TOLERANCE = 1e-12
SYMMETRY_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class QnmModel:
    """
    Single-QNM description of the photonic environment.

    Attributes:
        omega_c (float): QNM resonance frequency in eV.
        gamma_c (float): QNM half-width in eV, the eigenfrequency being omega_c - i gamma_c.
        mode_amp (tuple): Projected normalized mode value at each emitter, nm^(-3/2).
        gain_overlap (float): Integral of |f_c|^2 over the gain region, dimensionless.
        alpha_g (float): Gain parameter, |Im eps| of the gain region.
        n_b (float): Background refractive index.
        dipole_scale (tuple): Dipole magnitude ratios d_alpha / d_ref.
        detector_amp (dict): Projected mode value at named detector positions.
    """
    omega_c: float
    gamma_c: float
    mode_amp: Tuple[complex, ...]
    gain_overlap: float = 0.0
    alpha_g: float = 0.0
    n_b: float = 1.5
    dipole_scale: Optional[Tuple[float, ...]] = None
    detector_amp: Dict[str, complex] = field(default_factory=dict)

    def __post_init__(self):
        amps = tuple(complex(f) for f in self.mode_amp)
        object.__setattr__(self, "mode_amp", amps)
        scales = self.dipole_scale
        if scales is None:
            scales = (1.0,) * len(amps)
        object.__setattr__(self, "dipole_scale", tuple(float(d) for d in scales))
        object.__setattr__(self, "detector_amp",
                           {str(k): complex(v) for k, v in self.detector_amp.items()})

        if not amps:
            raise ScenarioError("qnm.mode_amp", "at least one emitter is required")
        if len(self.dipole_scale) != len(amps):
            raise ScenarioError("qnm.dipole_scale",
                                f"expected {len(amps)} entries, got {len(self.dipole_scale)}")
        if any(d <= 0 for d in self.dipole_scale):
            raise ScenarioError("qnm.dipole_scale", "dipole scales must be positive")
        if self.gamma_c <= 0:
            raise ScenarioError("qnm.gamma_c",
                                "must be positive (linear, below-threshold regime)")
        if self.omega_c <= 0:
            raise ScenarioError("qnm.omega_c", "must be positive")
        if self.gain_overlap < 0:
            raise ScenarioError("qnm.gain_overlap", "must be non-negative")
        if self.alpha_g < 0:
            raise ScenarioError("qnm.alpha_g", "must be non-negative")
        if self.n_b <= 0:
            raise ScenarioError("qnm.n_b", "must be positive")

    @classmethod
    def symmetric(cls, omega_c, gamma_c, amp, count=2, **kwargs):
        """ Model with `count` emitters sharing the same mode amplitude. """
        return cls(omega_c=omega_c, gamma_c=gamma_c, mode_amp=(amp,) * count, **kwargs)

    @property
    def n_emitters(self) -> int:
        return len(self.mode_amp)

    @property
    def complex_frequency(self) -> complex:
        return complex(self.omega_c, -self.gamma_c)

    def with_alpha(self, alpha_g):
        return replace(self, alpha_g=float(alpha_g))


def _check_omega(omega):
    if omega <= 0:
        raise ValueError(f"Frequency must be positive, got {omega} eV")


def _check_emitter(model, *ids):
    for idx in ids:
        if not 0 <= idx < model.n_emitters:
            raise EmitterIndexError(
                f"Emitter id {idx} out of range for {model.n_emitters} emitters")


def ac_coefficient(omega, model: QnmModel) -> complex:
    """
    Single-pole expansion coefficient of the mode at a real frequency.

    Args:
        omega (float): Frequency in eV, positive.
        model (QnmModel): Mode model.

    Returns:
        complex: omega / (2 (omega_c - i gamma_c - omega)); i omega_c / (2 gamma_c) on resonance.

    Raises:
        ValueError: If omega is not positive.
    """
    _check_omega(omega)
    return omega / (2.0 * (model.complex_frequency - omega))


def background_rate(omega, n_b) -> float:
    """
    Twice the imaginary part of the homogeneous Green function, in nm^-3.

    Args:
        omega (float): Frequency in eV.
        n_b (float): Background refractive index.

    Returns:
        float: 2 Im G_B = k^3 n_B / (3 pi) with k = omega / (hbar c).
    """
    _check_omega(omega)
    k = omega / HBAR_C_EV_NM
    return k ** 3 * n_b / (3.0 * np.pi)


def green_projected(omega, model: QnmModel, a, b) -> complex:
    _check_emitter(model, a, b)
    d_ab = model.dipole_scale[a] * model.dipole_scale[b]
    # unconjugated product
    return d_ab * ac_coefficient(omega, model) * model.mode_amp[a] * model.mode_amp[b]


def gamma_nldos(omega, model: QnmModel, a, b) -> float:
    """
    Mode-mediated decay rate between emitters `a` and `b` without gain.

    Args:
        omega (float): Frequency in eV.
        model (QnmModel): Mode model.
        a (int): First emitter id.
        b (int): Second emitter id.

    Returns:
        float: 2 Im G_ab / (2 Im G_B), in units of the background decay rate.
    """
    return 2.0 * green_projected(omega, model, a, b).imag / background_rate(omega, model.n_b)


def delta_nldos(omega, model: QnmModel, a, b) -> float:
    return -green_projected(omega, model, a, b).real / background_rate(omega, model.n_b)


def k_projected(omega, model: QnmModel, a, b) -> complex:
    _check_emitter(model, a, b)
    d_ab = model.dipole_scale[a] * model.dipole_scale[b]
    a_c = ac_coefficient(omega, model)
    overlap = model.mode_amp[a] * np.conj(model.mode_amp[b])
    return d_ab * abs(a_c) ** 2 * overlap * model.alpha_g * model.gain_overlap


def gamma_up(omega, model: QnmModel, a, b) -> float:
    return 2.0 * k_projected(omega, model, a, b).real / background_rate(omega, model.n_b)


def delta_up(omega, model: QnmModel, a, b) -> float:
    """ Gain Lamb shift, taken from K in emitter order so that it is reciprocal. """
    first, second = sorted((a, b))
    return -k_projected(omega, model, first, second).imag / background_rate(omega, model.n_b)


def gamma_down_total(omega, model: QnmModel, a, b) -> float:
    return gamma_nldos(omega, model, a, b) + gamma_up(omega, model, a, b)


def delta_down_total(omega, model: QnmModel, a, b) -> float:
    return delta_nldos(omega, model, a, b) + delta_up(omega, model, a, b)


def purcell_factor(omega, model: QnmModel, a=0) -> float:
    """ No-gain decay rate of emitter `a`, the number quoted by the anchors. """
    return gamma_down_total(omega, model.with_alpha(0.0), a, a)


def rate_matrices(omega, model: QnmModel) -> Dict[str, np.ndarray]:
    """
    Evaluate every pairwise rate at one frequency.

    Returns:
        dict: n x n matrices keyed by gamma_down, gamma_up, delta_down, delta_up.
    """
    n = model.n_emitters
    out = {key: np.zeros((n, n)) for key in ("gamma_down", "gamma_up", "delta_down", "delta_up")}
    for a in range(n):
        for b in range(a, n):
            values = {
                "gamma_down": gamma_down_total(omega, model, a, b),
                "gamma_up": gamma_up(omega, model, a, b),
                "delta_down": delta_down_total(omega, model, a, b),
                "delta_up": delta_up(omega, model, a, b),
            }
            for key, value in values.items():
                out[key][a, b] = out[key][b, a] = value
    return out


def _warn_if_not_psd(name, matrix):
    if not matrix.any():
        return
    scale = np.linalg.norm(matrix)
    lowest = np.linalg.eigvalsh(matrix).min()
    if lowest < -PSD_TOLERANCE * scale:
        warnings.warn(
            f"Rate matrix {name} is not positive semidefinite (min eigenvalue {lowest:.3e});"
            " the master equation is not completely positive", RateMatrixWarning, stacklevel=3)


@dataclass(frozen=True, eq=False)
class RateSet:
    """
    Coherent and incoherent rates at the working frequency.

    All matrices are n x n, real and symmetric, and share one rate unit
    (Purcell units straight from the QNM model, or Gamma(0) units once scaled).

    Attributes:
        omega0 (float): Working transition frequency in eV.
        gamma_down (np.ndarray): Downward rates, nldos part plus gain part.
        gamma_up (np.ndarray): Gain-induced upward rates.
        delta_down (np.ndarray): Coherent exchange couplings (off-diagonal used).
        delta_up (np.ndarray): Gain corrections to the exchange couplings.
        gamma_dephase (np.ndarray): Pure dephasing rate per emitter.
        gamma_pump (np.ndarray): Heuristic incoherent pump per emitter.
        detuning (np.ndarray): Emitter detuning from omega0 in the rotating frame.
        pump_cross (bool): Whether the heuristic pump carries the cross-emitter term.
    """
    omega0: float
    gamma_down: np.ndarray
    gamma_up: np.ndarray
    delta_down: np.ndarray
    delta_up: np.ndarray
    gamma_dephase: Optional[np.ndarray] = None
    gamma_pump: Optional[np.ndarray] = None
    detuning: Optional[np.ndarray] = None
    pump_cross: bool = True

    def __post_init__(self):
        n = np.asarray(self.gamma_down).shape[0]
        for name in ("gamma_down", "gamma_up", "delta_down", "delta_up"):
            matrix = np.array(getattr(self, name), dtype=float)
            if matrix.shape != (n, n):
                raise ScenarioError(f"rates.{name}", f"expected shape {(n, n)}, got {matrix.shape}")
            if not np.allclose(matrix, matrix.T, rtol=0.0, atol=1e-12 * (1.0 + abs(matrix).max())):
                raise ScenarioError(f"rates.{name}", "matrix must be symmetric")
            object.__setattr__(self, name, matrix)
        for name in ("gamma_dephase", "gamma_pump", "detuning"):
            value = getattr(self, name)
            vector = np.zeros(n) if value is None else np.broadcast_to(
                np.asarray(value, dtype=float), (n,)).copy()
            if name != "detuning" and (vector < 0).any():
                raise ScenarioError(f"rates.{name}", "must be non-negative")
            object.__setattr__(self, name, vector)
        _warn_if_not_psd("gamma_down", self.gamma_down)
        _warn_if_not_psd("gamma_up", self.gamma_up)

    @classmethod
    def symmetric(cls, gamma_down_aa, gamma_down_ab, gamma_up_aa=0.0, gamma_up_ab=0.0,
                  delta_down_ab=0.0, delta_up_ab=0.0, gamma_dephase=0.0, gamma_pump=0.0,
                  omega0=0.0, pump_cross=True):
        """ Two identical emitters at mirror-symmetric positions. """
        def pair(diag, off):
            return np.array([[diag, off], [off, diag]], dtype=float)
        return cls(omega0=omega0,
                   gamma_down=pair(gamma_down_aa, gamma_down_ab),
                   gamma_up=pair(gamma_up_aa, gamma_up_ab),
                   delta_down=pair(0.0, delta_down_ab),
                   delta_up=pair(0.0, delta_up_ab),
                   gamma_dephase=gamma_dephase, gamma_pump=gamma_pump, pump_cross=pump_cross)

    @property
    def n(self) -> int:
        return self.gamma_down.shape[0]

    @property
    def nldos(self) -> np.ndarray:
        return self.gamma_down - self.gamma_up

    @property
    def gamma_ref(self) -> float:
        """ Gamma(0): no-gain decay rate of emitter 0 in the current unit. """
        return float(self.nldos[0, 0])

    @property
    def heuristic(self) -> bool:
        return bool((self.gamma_pump > 0).any())

    def heuristic_pump_matrix(self) -> np.ndarray:
        root = np.sqrt(self.gamma_pump)
        matrix = np.outer(root, root) if self.pump_cross else np.diag(self.gamma_pump)
        return matrix

    def pump_matrix(self) -> np.ndarray:
        """ Effective collective pump matrix: gain part plus heuristic pump. """
        return self.gamma_up + self.heuristic_pump_matrix()

    def exchange(self) -> np.ndarray:
        """ Coherent exchange couplings, diagonal removed. """
        coupling = self.delta_down + self.delta_up
        return coupling - np.diag(np.diag(coupling))

    def scaled(self, factor):
        return replace(self, gamma_down=self.gamma_down * factor, gamma_up=self.gamma_up * factor,
                       delta_down=self.delta_down * factor, delta_up=self.delta_up * factor,
                       gamma_dephase=self.gamma_dephase * factor,
                       gamma_pump=self.gamma_pump * factor, detuning=self.detuning * factor)

    def without_cross_pump(self):
        """ Drop the incoherent cross-emitter pump (off-diagonal gamma_up and heuristic term). """
        up = np.diag(np.diag(self.gamma_up))
        return replace(self, gamma_up=up, pump_cross=False)

    def with_(self, **changes):
        return replace(self, **changes)

    def is_symmetric_pair(self) -> bool:
        if self.n != 2:
            return False
        scale = 1.0 + abs(self.gamma_down).max() + abs(self.pump_matrix()).max()
        tol = SYMMETRY_TOLERANCE * scale
        pump = self.pump_matrix()
        return (abs(self.gamma_down[0, 0] - self.gamma_down[1, 1]) <= tol
                and abs(pump[0, 0] - pump[1, 1]) <= tol)


def collective_rates(rates: RateSet) -> Tuple[float, float]:
    """
    Superradiant and subradiant decay rates of a symmetric pair.

    Raises:
        SymmetryError: If the pair has distinct diagonal rates.
    """
    if not rates.is_symmetric_pair():
        raise SymmetryError(
            "Collective rates need two emitters with equal diagonal rates;"
            " use the liouvillian module for asymmetric pairs")
    nldos = rates.nldos
    up = rates.gamma_up
    plus = nldos[0, 0] + nldos[0, 1] + up[0, 0] + up[0, 1]
    minus = nldos[0, 0] - nldos[0, 1] + up[0, 0] - up[0, 1]
    return float(plus), float(minus)


def build_rateset(model: QnmModel, omega0, gamma_dephase=0.0, gamma_pump=None,
                  include_cross_pump=True, detailed_balance=False, rate_unit=1.0) -> RateSet:
    """
    Assemble the master-equation rates of a QNM model at the working frequency.

    Args:
        model (QnmModel): Photonic model, including its gain parameter.
        omega0 (float): Working frequency in eV.
        gamma_dephase (float or sequence): Pure dephasing, already in `rate_unit`.
        gamma_pump (float or sequence, optional): Heuristic pump, already in `rate_unit`.
            Any positive entry switches to heuristic mode and replaces the gain matrix.
        include_cross_pump (bool): Keep the cross-emitter pump term.
        detailed_balance (bool): Add the heuristic pump to the decay diagonal as well.
        rate_unit (float): Purcell-unit value of the output rate unit.

    Returns:
        RateSet: Rates divided by `rate_unit`.
    """
    mats = {key: value / rate_unit for key, value in rate_matrices(omega0, model).items()}
    n = model.n_emitters
    pump = np.zeros(n) if gamma_pump is None else np.broadcast_to(
        np.asarray(gamma_pump, dtype=float), (n,)).copy()
    if (pump > 0).any():
        if model.alpha_g > 0:
            logger.warning("Heuristic pump replaces the gain matrix; alpha_g=%s ignored",
                           model.alpha_g)
        mats["gamma_down"] = mats["gamma_down"] - mats["gamma_up"]
        mats["gamma_up"] = np.zeros((n, n))
        mats["delta_down"] = mats["delta_down"] - mats["delta_up"]
        mats["delta_up"] = np.zeros((n, n))
        if detailed_balance:
            mats["gamma_down"] = mats["gamma_down"] + np.diag(pump)
    rates = RateSet(omega0=omega0, gamma_dephase=gamma_dephase, gamma_pump=pump,
                    pump_cross=include_cross_pump, **mats)
    if not include_cross_pump:
        rates = rates.without_cross_pump()
    return rates


def rate_sweep(model: QnmModel, omega_grid: Iterable[float], a=0, b=1) -> pd.DataFrame:
    rows = []
    for omega in omega_grid:
        rows.append({
            RateColumns.omega: float(omega),
            RateColumns.gamma_down_aa: gamma_down_total(omega, model, a, a),
            RateColumns.gamma_up_aa: gamma_up(omega, model, a, a),
            RateColumns.gamma_down_ab: gamma_down_total(omega, model, a, b),
            RateColumns.gamma_up_ab: gamma_up(omega, model, a, b),
            RateColumns.delta_down_ab: delta_down_total(omega, model, a, b),
            RateColumns.delta_up_ab: delta_up(omega, model, a, b),
        })
    return pd.DataFrame(rows, columns=RateColumns.all)


def solve_linewidth(model: QnmModel, anchors: Sequence[Tuple[float, float]]) -> float:
    """
    Find the QNM half-width reproducing the ratio of two no-gain Purcell anchors.

    The overall amplitude is left to `calibrate`; only the ratio depends on gamma_c.

    Raises:
        ValueError: If not exactly two anchors are given.
        CalibrationError: If no half-width in (1e-6, 10) x omega_c matches.
    """
    if len(anchors) != 2:
        raise ValueError(f"Linewidth fit needs exactly two anchors, got {len(anchors)}")
    (w1, t1), (w2, t2) = anchors
    target = np.log(t1 / t2)

    def mismatch(log_gamma):
        trial = replace(model, gamma_c=float(np.exp(log_gamma)))
        return np.log(purcell_factor(w1, trial) / purcell_factor(w2, trial)) - target

    lo, hi = np.log(1e-6 * model.omega_c), np.log(10.0 * model.omega_c)
    f_lo, f_hi = mismatch(lo), mismatch(hi)
    if np.sign(f_lo) == np.sign(f_hi):
        raise CalibrationError("No QNM half-width reproduces the anchor ratio",
                               [float(f_lo), float(f_hi)])
    gamma_c = float(np.exp(brentq(mismatch, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)))
    logger.debug("Fitted QNM half-width %.9g eV", gamma_c)
    return gamma_c


def _best_scale(current, targets, tolerance, what):
    ratios = np.asarray(current) / np.asarray(targets)
    if not np.isfinite(ratios).all() or (ratios <= 0.0).any():
        raise CalibrationError(f"Anchors for {what} need finite positive model rates",
                               [float(r) - 1.0 for r in ratios])
    scale = ratios.sum() / (ratios ** 2).sum()
    residuals = scale * ratios - 1.0
    if not np.isfinite(scale) or scale <= 0.0:
        raise CalibrationError(f"Anchors for {what} give a non-positive scale {scale}",
                               [float(r) for r in residuals])
    if np.abs(residuals).max() > tolerance:
        raise CalibrationError(f"Anchors for {what} cannot be met by a single scale",
                               [float(r) for r in residuals])
    return float(scale)


def calibrate(model: QnmModel, anchors: Sequence[Tuple[float, float]] = (),
              gain_anchors: Sequence[Tuple[float, float, float]] = (),
              fit_linewidth=False, tolerance=1e-6) -> QnmModel:
    """
    Rescale a model so its rates hit the given anchors.

    No-gain anchors (omega, Purcell factor of emitter 0) rescale |mode_amp|^2;
    gain anchors (omega, alpha_g, gain rate of emitter 0) then rescale gain_overlap.
    Both are exact in one step because the rates are linear in either scale.

    Args:
        model (QnmModel): Model to rescale.
        anchors (list): (omega_eV, target) pairs evaluated at alpha_g = 0.
        gain_anchors (list): (omega_eV, alpha_g, target gamma_up_aa) triples.
        fit_linewidth (bool): First solve gamma_c from exactly two no-gain anchors.
        tolerance (float): Largest accepted relative residual.

    Returns:
        QnmModel: The calibrated model.

    Raises:
        CalibrationError: If the anchors are inconsistent; carries the best-fit residuals.
    """
    anchors = [tuple(map(float, anchor)) for anchor in anchors]
    gain_anchors = [tuple(map(float, anchor)) for anchor in gain_anchors]
    if not anchors and not gain_anchors:
        raise ValueError("Calibration needs at least one anchor")
    if fit_linewidth:
        model = replace(model, gamma_c=solve_linewidth(model, anchors))

    if anchors:
        current = [purcell_factor(omega, model) for omega, _ in anchors]
        scale = _best_scale(current, [t for _, t in anchors], tolerance, "mode amplitude")
        root = np.sqrt(scale)
        model = replace(model, mode_amp=tuple(f * root for f in model.mode_amp))
        logger.debug("Mode amplitude rescaled by %.9g", root)

    if gain_anchors:
        if model.gain_overlap <= 0:
            raise CalibrationError("Gain anchors need a positive gain_overlap to rescale", [])
        current = [gamma_up(omega, model.with_alpha(alpha), 0, 0)
                   for omega, alpha, _ in gain_anchors]
        scale = _best_scale(current, [t for *_, t in gain_anchors], tolerance, "gain overlap")
        model = replace(model, gain_overlap=model.gain_overlap * scale)
        logger.debug("Gain overlap rescaled by %.9g", scale)
    return model
