"""
Scenario documents: JSON run descriptions with strict key validation.
"""
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .exceptions import QnmGainError, ScenarioError
from .liouvillian import DensityMatrix
from .qnm_rates import QnmModel, RateSet, calibrate

logger = logging.getLogger(__name__)

MODES = ("rates", "dynamics", "steady", "spectrum", "sweep", "compare")
INITIAL_STATES = ("ground", "e_a", "e_b", "plus", "minus", "excited", "custom")
TIME_UNITS = ("gamma0", "inverse_ev")
SPECTRUM_METHODS = ("resolvent", "time-domain")

_MISSING = object()


@dataclass(frozen=True)
class GridSpec:
    """
    Uniform grid.

    Attributes:
        start (float): First point.
        stop (float): Last point.
        num (int): Number of points.
    """
    start: float
    stop: float
    num: int

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.num)


@dataclass(frozen=True, eq=False)
class RunBlock:
    """
    What to compute and where to write it.

    Attributes:
        mode (str): One of rates, dynamics, steady, spectrum, sweep, compare.
        omega0 (float): Working frequency in eV.
        t_grid (GridSpec): Time grid in units of 1/Gamma(0).
        omega_grid (GridSpec, optional): Detuning grid in Gamma(0) units.
        rate_grid (GridSpec): Frequency grid in eV for rate sweeps.
        initial_state (str): Named initial state.
        custom_state (DensityMatrix, optional): State used when initial_state is custom.
        alpha_g (list): Gain parameters to run.
        gamma_dephase (float): Pure dephasing in Gamma(0) units.
        gamma_pump (list): Heuristic pump strengths in Gamma(0) units.
        include_cross_pump (list): Cross-pump settings to run.
        detailed_balance (bool): Add the heuristic pump to the decay diagonal.
        negativity (bool): Append the log-negativity column to trajectories.
        plateau_window (tuple): Window for plateau populations.
        spectrum_method (str): resolvent or time-domain.
        time_unit (str): gamma0 or inverse_ev.
        gamma_ref_ev (float, optional): Gamma(0) in eV.
        detector (str, optional): Detector tag for weighted spectra.
        workers (int, optional): Sweep worker count.
        output (str): File stem of every artifact.
        compare_table (str, optional): Rate table for compare mode.
        compare_tolerance (float): Relative deviation flagged by compare mode.
    """
    mode: str
    omega0: Optional[float]
    t_grid: GridSpec
    omega_grid: Optional[GridSpec]
    rate_grid: GridSpec
    initial_state: str
    custom_state: Optional[DensityMatrix]
    alpha_g: List[float]
    gamma_dephase: float
    gamma_pump: List[float]
    include_cross_pump: List[bool]
    detailed_balance: bool
    negativity: bool
    plateau_window: Tuple[float, float]
    spectrum_method: str
    time_unit: str
    gamma_ref_ev: Optional[float]
    detector: Optional[str]
    workers: Optional[int]
    output: str
    compare_table: Optional[str]
    compare_tolerance: float


@dataclass(frozen=True, eq=False)
class Scenario:
    """
    Validated scenario.

    Attributes:
        qnm (QnmModel, optional): Calibrated mode model at alpha_g = 0.
        rates (RateSet, optional): Directly supplied rates, in their own unit.
        count (int): Number of emitters.
        run (RunBlock): Run settings.
        resolved (dict): Fully resolved document, echoed into every output.
        base_dir (Path): Directory relative paths are resolved against.
    """
    qnm: Optional[QnmModel]
    rates: Optional[RateSet]
    count: int
    run: RunBlock
    resolved: Dict[str, Any]
    base_dir: Path = field(default_factory=Path)


class _Block:
    """ Key reader that records defaults and rejects unknown keys. """

    def __init__(self, data, path, strict):
        if not isinstance(data, dict):
            raise ScenarioError(path, "expected an object")
        self._data = dict(data)
        self._path = path
        self._strict = strict
        self.resolved = {}

    def key(self, name):
        return f"{self._path}.{name}" if self._path else name

    def take(self, name, default=_MISSING, convert=None):
        if name in self._data:
            raw = self._data.pop(name)
        elif default is _MISSING:
            raise ScenarioError(self.key(name), "required key is missing")
        else:
            raw = default
        self.resolved[name] = raw
        if raw is None or convert is None:
            return raw
        try:
            return convert(raw)
        except QnmGainError:
            raise
        except (TypeError, ValueError) as error:
            raise ScenarioError(self.key(name), str(error)) from None

    def finish(self):
        for name in sorted(self._data):
            if self._strict:
                raise ScenarioError(self.key(name), "unknown key")
            logger.warning("Ignoring unknown key %s", self.key(name))
        return self.resolved


def _complex(value):
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ValueError(f"complex values are [re, im] pairs, got {value}")
        return complex(float(value[0]), float(value[1]))
    return complex(float(value))


def _positive(value):
    value = float(value)
    if value <= 0:
        raise ValueError(f"must be positive, got {value}")
    return value


def _non_negative(value):
    value = float(value)
    if value < 0:
        raise ValueError(f"must be non-negative, got {value}")
    return value


def _choice(options):
    def convert(value):
        if value not in options:
            raise ValueError(f"expected one of {list(options)}, got {value!r}")
        return value
    return convert


def _grid(value):
    if not isinstance(value, dict) or set(value) != {"start", "stop", "num"}:
        raise ValueError("grids are objects with exactly start, stop and num")
    spec = GridSpec(float(value["start"]), float(value["stop"]), int(value["num"]))
    if spec.num < 1 or (spec.num > 1 and spec.stop <= spec.start):
        raise ValueError("grid needs num >= 1 and stop > start")
    return spec


def _non_empty_list(convert):
    def parse(value):
        if not isinstance(value, list) or not value:
            raise ValueError("expected a non-empty list")
        return [convert(item) for item in value]
    return parse


def _bool(value):
    if not isinstance(value, bool):
        raise ValueError(f"expected true or false, got {value!r}")
    return value


def _matrix(value):
    matrix = np.array(value, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError("expected a square matrix")
    return matrix


def _pair(value):
    if not isinstance(value, list) or len(value) != 2:
        raise ValueError("expected [start, stop]")
    start, stop = float(value[0]), float(value[1])
    if stop < start:
        raise ValueError("window stop precedes start")
    return start, stop


def _custom_state(value):
    if not isinstance(value, dict) or "real" not in value:
        raise ValueError("custom_state is an object with real and optional imag matrices")
    real = np.array(value["real"], dtype=float)
    imag = np.array(value.get("imag", np.zeros_like(real)), dtype=float)
    return DensityMatrix(real + 1j * imag).validate("run.custom_state")


def _parse_qnm(data, count, symmetric, strict):
    block = _Block(data, "qnm", strict)
    omega_c = block.take("omega_c", convert=_positive)
    gamma_c = block.take("gamma_c", convert=_positive)
    amps = block.take("mode_amp", convert=_non_empty_list(_complex))
    gain_overlap = block.take("gain_overlap", 0.0, _non_negative)
    n_b = block.take("n_b", 1.5, _positive)
    scales = block.take("dipole_scale", None, _non_empty_list(_positive))
    detectors = block.take("detector_amp", {},
                           lambda d: {str(k): _complex(v) for k, v in dict(d).items()})
    calibration = block.take("calibrate", None)
    resolved = block.finish()

    if symmetric and len(amps) == 1:
        amps = amps * count
    if symmetric and scales is not None and len(scales) == 1:
        scales = scales * count
    if len(amps) != count:
        raise ScenarioError("qnm.mode_amp", f"expected {count} amplitudes, got {len(amps)}")
    model = QnmModel(omega_c=omega_c, gamma_c=gamma_c, mode_amp=tuple(amps),
                     gain_overlap=gain_overlap, n_b=n_b,
                     dipole_scale=None if scales is None else tuple(scales),
                     detector_amp=detectors)

    if calibration is not None:
        cal = _Block(calibration, "qnm.calibrate", strict)
        anchors = cal.take("anchors", [], lambda v: [tuple(map(float, a)) for a in v])
        gain_anchors = cal.take("gain_anchors", [], lambda v: [tuple(map(float, a)) for a in v])
        fit_linewidth = cal.take("fit_linewidth", False, _bool)
        resolved["calibrate"] = cal.finish()
        for key, items, size in (("anchors", anchors, 2), ("gain_anchors", gain_anchors, 3)):
            if any(len(item) != size for item in items):
                raise ScenarioError(f"qnm.calibrate.{key}", f"entries need {size} numbers")
        try:
            model = calibrate(model, anchors, gain_anchors, fit_linewidth=fit_linewidth)
        except ValueError as error:
            raise ScenarioError("qnm.calibrate", str(error)) from None
    return model, resolved


def _parse_rates(data, count, strict):
    block = _Block(data, "rates", strict)
    zeros = np.zeros((count, count)).tolist()
    mats = {name: block.take(name, zeros if name != "gamma_down" else _MISSING, _matrix)
            for name in ("gamma_down", "gamma_up", "delta_down", "delta_up")}
    detuning = block.take("detuning", [0.0] * count, lambda v: np.array(v, dtype=float))
    omega0 = block.take("omega0", 0.0, float)
    resolved = block.finish()
    for name, matrix in mats.items():
        if matrix.shape != (count, count):
            raise ScenarioError(f"rates.{name}", f"expected {count}x{count}, got {matrix.shape}")
    if detuning.shape != (count,):
        raise ScenarioError("rates.detuning", f"expected {count} entries")
    rates = RateSet(omega0=omega0, detuning=detuning, **mats)
    if rates.gamma_ref <= 0:
        raise ScenarioError("rates.gamma_down",
                            "gamma_down[0][0] - gamma_up[0][0] sets Gamma(0) and must be positive")
    return rates, resolved


def _parse_run(data, count, default_output, has_qnm, strict):
    block = _Block(data, "run", strict)
    run = RunBlock(
        mode=block.take("mode", "dynamics", _choice(MODES)),
        omega0=block.take("omega0", None, _positive),
        t_grid=block.take("t_grid", {"start": 0.0, "stop": 10.0, "num": 1001}, _grid),
        omega_grid=block.take("omega_grid", None, _grid),
        rate_grid=block.take("rate_grid", {"start": 1.0, "stop": 1.8, "num": 801}, _grid),
        initial_state=block.take("initial_state", "e_a", _choice(INITIAL_STATES)),
        custom_state=block.take("custom_state", None, _custom_state),
        alpha_g=block.take("alpha_g", [0.0], _non_empty_list(_non_negative)),
        gamma_dephase=block.take("gamma_dephase", 0.001, _non_negative),
        gamma_pump=block.take("gamma_pump", [0.0], _non_empty_list(_non_negative)),
        include_cross_pump=block.take("include_cross_pump", [True], _non_empty_list(_bool)),
        detailed_balance=block.take("detailed_balance", False, _bool),
        negativity=block.take("negativity", False, _bool),
        plateau_window=block.take("plateau_window", [5.0, 10.0], _pair),
        spectrum_method=block.take("spectrum_method", "resolvent", _choice(SPECTRUM_METHODS)),
        time_unit=block.take("time_unit", "gamma0", _choice(TIME_UNITS)),
        gamma_ref_ev=block.take("gamma_ref_ev", None, _positive),
        detector=block.take("detector", None, str),
        workers=block.take("workers", None, int),
        output=block.take("output", default_output, str),
        compare_table=block.take("compare_table", None, str),
        compare_tolerance=block.take("compare_tolerance", 1e-6, _positive),
    )
    resolved = block.finish()

    if run.t_grid.start != 0.0:
        raise ScenarioError("run.t_grid.start", "time grids start at 0")
    if run.rate_grid.start <= 0.0:
        raise ScenarioError("run.rate_grid.start", "rate frequencies must be positive")
    if run.detector is not None and None not in (run.omega0, run.omega_grid, run.gamma_ref_ev) \
            and run.omega0 + run.omega_grid.start * run.gamma_ref_ev <= 0.0:
        raise ScenarioError("run.omega_grid.start", "detector frequencies must be positive")
    if run.initial_state == "custom":
        if run.custom_state is None:
            raise ScenarioError("run.custom_state", "required when initial_state is custom")
        if run.custom_state.dim != 2 ** count:
            raise ScenarioError("run.custom_state", f"expected a {2 ** count}x{2 ** count} state")
    if run.initial_state in ("plus", "minus") and count != 2:
        raise ScenarioError("run.initial_state", f"{run.initial_state} needs exactly two emitters")
    if run.initial_state == "e_b" and count < 2:
        raise ScenarioError("run.initial_state", "e_b needs a second emitter")
    if has_qnm and run.omega0 is None:
        raise ScenarioError("run.omega0", "required with a qnm block")
    if not has_qnm:
        if run.alpha_g != [0.0]:
            raise ScenarioError("run.alpha_g", "gain parameters need a qnm block")
        if run.detector is not None:
            raise ScenarioError("run.detector", "detector weighting needs a qnm block")
    if run.time_unit == "inverse_ev" and run.gamma_ref_ev is None:
        raise ScenarioError("run.gamma_ref_ev", "required for inverse_ev time axes")
    if run.detector is not None and run.gamma_ref_ev is None:
        raise ScenarioError("run.gamma_ref_ev", "required for detector-weighted spectra")
    if run.workers is not None and run.workers < 1:
        raise ScenarioError("run.workers", "must be at least 1")
    return run, resolved


def parse_scenario(document: Dict[str, Any], strict=True, default_output="scenario",
                   base_dir=None) -> Scenario:
    """
    Validate a scenario document.

    Args:
        document (dict): Parsed JSON document.
        strict (bool): Reject unknown keys instead of ignoring them.
        default_output (str): Output stem when run.output is absent.
        base_dir (Path, optional): Directory relative paths are resolved against.

    Returns:
        Scenario: The validated scenario.

    Raises:
        ScenarioError: With the offending key path.
    """
    top = _Block(document, "", strict)
    qnm_data = top.take("qnm", None)
    rates_data = top.take("rates", None)
    emitter_data = top.take("emitters", {})
    run_data = top.take("run", {})
    comment = top.take("comment", None)
    top.finish()

    if (qnm_data is None) == (rates_data is None):
        raise ScenarioError("", "exactly one of qnm and rates must supply the rates")

    emitters = _Block(emitter_data, "emitters", strict)
    count = emitters.take("count", 2, int)
    symmetric = emitters.take("symmetric", True, _bool)
    emitters_resolved = emitters.finish()
    if count < 1:
        raise ScenarioError("emitters.count", "at least one emitter is required")

    resolved = {"emitters": emitters_resolved}
    if comment is not None:
        resolved["comment"] = comment
    qnm = rates = None
    if qnm_data is not None:
        qnm, resolved["qnm"] = _parse_qnm(qnm_data, count, symmetric, strict)
    else:
        rates, resolved["rates"] = _parse_rates(rates_data, count, strict)
    run, resolved["run"] = _parse_run(run_data, count, default_output, qnm is not None, strict)
    return validate_mode(Scenario(qnm=qnm, rates=rates, count=count, run=run, resolved=resolved,
                                  base_dir=Path(base_dir) if base_dir else Path.cwd()))


def validate_mode(scenario: Scenario) -> Scenario:
    """
    Check the requirements of the selected mode.

    Raises:
        ScenarioError: If the mode cannot run on this scenario.
    """
    mode = scenario.run.mode
    if mode in ("rates", "compare") and scenario.qnm is None:
        raise ScenarioError("run.mode", f"{mode} mode needs a qnm block")
    if mode in ("steady", "sweep") and scenario.count != 2:
        raise ScenarioError("run.mode", f"{mode} mode reports dressed populations of a pair")
    if mode == "compare" and scenario.run.compare_table is None:
        raise ScenarioError("run.compare_table", "required in compare mode")
    return scenario


def with_mode(scenario: Scenario, mode, compare_table=None) -> Scenario:
    """ Switch the run mode (and optionally the compare table), keeping the echo in sync. """
    changes = {"mode": _choice(MODES)(mode)}
    if compare_table is not None:
        changes["compare_table"] = str(compare_table)
    resolved = dict(scenario.resolved)
    resolved["run"] = {**resolved["run"], **changes}
    return validate_mode(replace(scenario, run=replace(scenario.run, **changes),
                                 resolved=resolved))


def load_scenario(path, strict=True) -> Scenario:
    """
    Read and validate a scenario file.

    Args:
        path: JSON file.
        strict (bool): Reject unknown keys. Defaults to True.

    Raises:
        ScenarioError: If the file cannot be read or fails validation.
    """
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ScenarioError("", f"scenario file {path} does not exist") from None
    except json.JSONDecodeError as error:
        raise ScenarioError("", f"{path} is not valid JSON: {error}") from None
    logger.debug("Loaded scenario %s", path)
    return parse_scenario(document, strict=strict, default_output=path.stem,
                          base_dir=path.parent)


PRESET_DIR = Path(__file__).resolve().parent.parent / "presets"


def preset_names() -> List[str]:
    return sorted(path.stem for path in PRESET_DIR.glob("*.json"))


def preset_path(name) -> Path:
    """
    Path of a shipped preset.

    Raises:
        ScenarioError: If no preset has this name.
    """
    path = PRESET_DIR / f"{name}.json"
    if not path.exists():
        raise ScenarioError("", f"unknown preset {name!r}; available: {preset_names()}")
    return path
