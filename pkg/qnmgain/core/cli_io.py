"""
Scenario runner: turns a validated scenario into CSV artifacts.
"""
import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, NamedTuple, Optional, Tuple

import numpy as np
import pandas as pd
import psutil

from .bloch import BareState, bare_to_dressed, plateau_populations, populations
from .columns import CompareColumns, RateColumns, SpectrumColumns, SteadyColumns, TrajectoryColumns
from .exceptions import QnmGainError, ScenarioError
from .liouvillian import (
    DensityMatrix, LindbladModel, Trajectory, check_stability, evolve, liouvillian_matrix,
    number_operator, steady_state,
)
from .observables import negativity_series, optional_weighted_spectrum, spectrum_ss
from .qnm_rates import QnmModel, RateSet, build_rateset, purcell_factor, rate_sweep
from .scenario import Scenario, load_scenario
from .table_codec import TableCodec

logger = logging.getLogger(__name__)

__all__ = ["Entry", "RateTable", "Runner", "compare_rate_tables", "ingest_rate_table",
           "load_scenario", "run"]


class Entry(NamedTuple):
    """ One point of the run matrix. """
    alpha_g: float
    gamma_pump: float
    include_cross_pump: bool

    @property
    def tag(self) -> str:
        cross = "cross" if self.include_cross_pump else "nocross"
        return f"a{self.alpha_g:g}_p{self.gamma_pump:g}_{cross}"

    def header(self) -> Dict[str, object]:
        return {"alpha_g": self.alpha_g, "gamma_pump": self.gamma_pump,
                "include_cross_pump": self.include_cross_pump}


@dataclass(frozen=True, eq=False)
class RateTable:
    """
    Tabulated rates versus frequency, in Purcell units.

    Attributes:
        frame (pd.DataFrame): Columns of RateColumns.all, omega strictly increasing.
        header (dict): Comment header of the source file, if any.
    """
    frame: pd.DataFrame
    header: Dict[str, object]

    @property
    def omega(self) -> np.ndarray:
        return self.frame[RateColumns.omega].to_numpy(dtype=float)

    def at(self, omega) -> Dict[str, float]:
        """ Linear interpolation of every rate column at `omega` (eV). """
        return {column: float(np.interp(omega, self.omega, self.frame[column].to_numpy(float)))
                for column in RateColumns.rates}


def ingest_rate_table(path) -> RateTable:
    """
    Read an external rate table, e.g. a full-dipole numerical solution.

    Args:
        path: CSV file with omega_eV and the six rate columns.

    Raises:
        ScenarioError: On a missing file, missing columns or a non-monotone frequency axis.
    """
    path = Path(path)
    if not path.exists():
        raise ScenarioError("run.compare_table", f"rate table {path} does not exist")
    header, frame = TableCodec.read_table(path)
    missing = [column for column in RateColumns.all if column not in frame.columns]
    if missing:
        raise ScenarioError("run.compare_table", f"{path.name} lacks columns {missing}")
    omega = frame[RateColumns.omega].to_numpy(dtype=float)
    if omega.size > 1 and (np.diff(omega) <= 0).any():
        raise ScenarioError("run.compare_table", f"{path.name}: omega_eV must increase strictly")
    return RateTable(frame=frame[RateColumns.all].astype(float), header=header)


def compare_rate_tables(table: RateTable, model: QnmModel, alpha_g=0.0,
                        tolerance=1e-6) -> pd.DataFrame:
    """
    Per-column deviation of QNM rates from a tabulated reference.

    The deviation of a column is max |qnm - table| over the grid divided by
    max |table|, so zero crossings of the coherent couplings do not blow up.

    Returns:
        pd.DataFrame: One row per rate column with the deviation and a flag.
    """
    qnm = rate_sweep(model.with_alpha(alpha_g), table.omega)
    rows = []
    for column in RateColumns.rates:
        reference = table.frame[column].to_numpy(dtype=float)
        error = np.abs(qnm[column].to_numpy(dtype=float) - reference).max()
        scale = np.abs(reference).max()
        if scale > 0:
            deviation = error / scale
        else:
            deviation = 0.0 if error == 0 else float("inf")
        rows.append({CompareColumns.column: column,
                     CompareColumns.max_rel_deviation: float(deviation),
                     CompareColumns.flagged: bool(deviation > tolerance)})
    return pd.DataFrame(rows, columns=[CompareColumns.column, CompareColumns.max_rel_deviation,
                                       CompareColumns.flagged])


def _complex_pairs(values):
    return [[float(np.real(v)), float(np.imag(v))] for v in values]


class Runner:
    """
    Executes every entry of a scenario's run matrix and writes its tables.

    Attributes:
        scenario (Scenario): Validated scenario.
        out_dir (Path): Directory receiving the CSV files.
        gamma0 (float): Gamma(0) in the unit of the rate source.
    """

    def __init__(self, scenario: Scenario, out_dir, debug=False, workers: Optional[int] = None):
        """
        Initialize the runner.

        Args:
            scenario (Scenario): Validated scenario.
            out_dir: Output directory, created on demand.
            debug (bool): If True, enables debug logging. Defaults to False.
            workers (int, optional): Sweep worker count, overriding the scenario.
        """
        self._debug = debug
        self.scenario = scenario
        self.out_dir = Path(out_dir)
        self._workers = workers if workers is not None else scenario.run.workers
        run = scenario.run
        if scenario.qnm is not None:
            self.gamma0 = purcell_factor(run.omega0, scenario.qnm)
        else:
            self.gamma0 = scenario.rates.gamma_ref

    def _debug_print(self, data):
        if self._debug:
            logger.debug(data[:100] + "...")

    @property
    def entries(self) -> List[Entry]:
        run = self.scenario.run
        return [Entry(*combo) for combo in itertools.product(
            run.alpha_g, run.gamma_pump, run.include_cross_pump)]

    def header(self, entry: Optional[Entry] = None) -> Dict[str, object]:
        header = {"scenario": self.scenario.resolved, "gamma0": self.gamma0}
        qnm = self.scenario.qnm
        if qnm is not None:
            header["calibrated"] = {"gamma_c": qnm.gamma_c, "gain_overlap": qnm.gain_overlap,
                                    "mode_amp": _complex_pairs(qnm.mode_amp)}
        if entry is not None:
            header["entry"] = entry.header()
        return header

    def rates(self, entry: Entry) -> RateSet:
        """ Rates of one entry in Gamma(0) units. """
        run = self.scenario.run
        if self.scenario.qnm is not None:
            return build_rateset(self.scenario.qnm.with_alpha(entry.alpha_g), run.omega0,
                                 gamma_dephase=run.gamma_dephase, gamma_pump=entry.gamma_pump,
                                 include_cross_pump=entry.include_cross_pump,
                                 detailed_balance=run.detailed_balance, rate_unit=self.gamma0)
        rates = self.scenario.rates.scaled(1.0 / self.gamma0).with_(
            gamma_dephase=run.gamma_dephase, gamma_pump=entry.gamma_pump,
            pump_cross=entry.include_cross_pump)
        if rates.heuristic:
            gamma_down = rates.nldos
            if run.detailed_balance:
                gamma_down = gamma_down + np.diag(rates.gamma_pump)
            rates = rates.with_(gamma_down=gamma_down, gamma_up=np.zeros_like(gamma_down),
                                delta_down=rates.delta_down - rates.delta_up,
                                delta_up=np.zeros_like(gamma_down))
        if not entry.include_cross_pump:
            rates = rates.without_cross_pump()
        return rates

    def model(self, entry: Entry) -> LindbladModel:
        """
        Lindblad model of one entry, checked for stability.

        Raises:
            UnstableLiouvillianError: If the generator has a growing mode.
        """
        model = LindbladModel.from_rates(self.rates(entry))
        check_stability(liouvillian_matrix(model))
        return model

    def initial_state(self) -> DensityMatrix:
        run = self.scenario.run
        n = self.scenario.count
        name = run.initial_state
        if name == "custom":
            return run.custom_state
        if name in ("plus", "minus"):
            return DensityMatrix.dressed(name)
        if name == "ground":
            return DensityMatrix.ground(n)
        if name == "excited":
            return DensityMatrix.basis([1] * n)
        excited = 0 if name == "e_a" else 1
        return DensityMatrix.basis([int(k == excited) for k in range(n)])

    def _time_axis(self, times):
        run = self.scenario.run
        if run.time_unit == "inverse_ev":
            return times / run.gamma_ref_ev
        return times

    def trajectory(self, entry: Entry) -> Tuple[Trajectory, pd.DataFrame]:
        """ Evolve the initial state and tabulate populations (and negativity on request). """
        run = self.scenario.run
        trajectory = evolve(self.model(entry), self.initial_state(), run.t_grid.values())
        table = {TrajectoryColumns.time: self._time_axis(trajectory.times)}
        if self.scenario.count == 2:
            bare = [BareState.from_density(trajectory[k]) for k in range(len(trajectory))]
            dressed = [bare_to_dressed(state) for state in bare]
            pops = np.array([populations(state) for state in bare])
            table[TrajectoryColumns.rho_aa] = pops[:, 0]
            table[TrajectoryColumns.rho_bb] = pops[:, 1]
            table[TrajectoryColumns.rho_pp] = [state.rhoPP for state in dressed]
            table[TrajectoryColumns.rho_mm] = [state.rhoMM for state in dressed]
            table[TrajectoryColumns.rho_tt] = [state.rhoTT for state in dressed]
            table[TrajectoryColumns.rho23_re] = [state.rho23.real for state in bare]
            table[TrajectoryColumns.rho23_im] = [state.rho23.imag for state in bare]
        else:
            for emitter in range(self.scenario.count):
                table[TrajectoryColumns.population(emitter)] = trajectory.expectation(
                    number_operator(self.scenario.count, emitter)).real
        if run.negativity:
            table[TrajectoryColumns.negativity] = negativity_series(trajectory)
        return trajectory, pd.DataFrame(table)

    def steady_row(self, entry: Entry) -> Tuple[Dict[str, object], pd.DataFrame]:
        """ Steady-state and plateau summary of one entry, with the trajectory behind it. """
        model = self.model(entry)
        bare = BareState.from_density(steady_state(model))
        dressed = bare_to_dressed(bare)
        trajectory, frame = self.trajectory(entry)
        states = [BareState.from_density(trajectory[k]) for k in range(len(trajectory))]
        try:
            plateau = plateau_populations(states, trajectory.times, self.scenario.run.plateau_window)
        except ValueError as error:
            raise ScenarioError("run.plateau_window", str(error)) from None
        rho_aa, rho_bb = populations(bare)
        row = {
            SteadyColumns.alpha_g: entry.alpha_g,
            SteadyColumns.gamma_pump: entry.gamma_pump,
            SteadyColumns.cross_pump: entry.include_cross_pump,
            SteadyColumns.rho_gg: dressed.rhoGG,
            SteadyColumns.rho_pp: dressed.rhoPP,
            SteadyColumns.rho_mm: dressed.rhoMM,
            SteadyColumns.rho_tt: dressed.rhoTT,
            SteadyColumns.rho11: bare.rho11,
            SteadyColumns.rho22: bare.rho22,
            SteadyColumns.rho33: bare.rho33,
            SteadyColumns.rho44: bare.rho44,
            SteadyColumns.rho23_re: bare.rho23.real,
            SteadyColumns.rho23_im: bare.rho23.imag,
            SteadyColumns.rho_aa: rho_aa,
            SteadyColumns.rho_bb: rho_bb,
            SteadyColumns.plateau_aa: plateau[0],
            SteadyColumns.plateau_bb: plateau[1],
            SteadyColumns.gamma_ref: self.gamma0 if self.scenario.qnm is not None else float("nan"),
        }
        return row, frame

    def spectrum(self, entry: Entry) -> Tuple[pd.DataFrame, pd.DataFrame]:
        run = self.scenario.run
        model = self.model(entry)
        grid = None if run.omega_grid is None else run.omega_grid.values()
        if run.detector is not None:
            if grid is None:
                raise ScenarioError("run.omega_grid", "detector-weighted spectra need a grid")
            series = optional_weighted_spectrum(
                model, grid, self.scenario.qnm.with_alpha(entry.alpha_g), run.detector,
                run.gamma_ref_ev, method=run.spectrum_method)
        else:
            series = spectrum_ss(model, grid, method=run.spectrum_method, debug=self._debug)
        table = pd.DataFrame({
            SpectrumColumns.detuning: series.detuning,
            SpectrumColumns.total: series.values,
            SpectrumColumns.self_term: series.self_term,
            SpectrumColumns.cross_term: series.cross_term,
        })
        peaks = pd.DataFrame([peak._asdict() for peak in series.peaks],
                             columns=[SpectrumColumns.position, SpectrumColumns.height,
                                      SpectrumColumns.fwhm])
        return table, peaks

    def _path(self, *parts) -> Path:
        return self.out_dir / ("_".join((self.scenario.run.output,) + parts) + ".csv")

    def _write(self, path, frame, entry=None) -> Path:
        TableCodec.write_table(path, frame, self.header(entry))
        self._debug_print(f"Wrote {path}")
        return path

    def run_rates(self) -> List[Path]:
        grid = self.scenario.run.rate_grid.values()
        return [self._write(self._path("rates", f"a{alpha:g}"),
                            rate_sweep(self.scenario.qnm.with_alpha(alpha), grid))
                for alpha in self.scenario.run.alpha_g]

    def run_dynamics(self) -> List[Path]:
        written = []
        for entry in self.entries:
            _, frame = self.trajectory(entry)
            written.append(self._write(self._path(entry.tag), frame, entry))
        return written

    def run_steady(self) -> List[Path]:
        rows = [self.steady_row(entry)[0] for entry in self.entries]
        return [self._write(self._path("steady"), pd.DataFrame(rows))]

    def run_spectrum(self) -> List[Path]:
        written = []
        for entry in self.entries:
            table, peaks = self.spectrum(entry)
            written.append(self._write(self._path("spectrum", entry.tag), table, entry))
            written.append(self._write(self._path("spectrum", entry.tag, "peaks"), peaks, entry))
        return written

    def sweep_entry(self, entry: Entry) -> Dict[str, object]:
        row, frame = self.steady_row(entry)
        self._write(self._path(entry.tag), frame, entry)
        return row

    def worker_count(self) -> int:
        workers = self._workers or psutil.cpu_count(logical=False) or 1
        return max(1, min(workers, len(self.entries)))

    def run_sweep(self) -> List[Path]:
        entries = self.entries
        workers = self.worker_count()
        self._debug_print(f"Sweeping {len(entries)} entries on {workers} workers")
        if workers == 1:
            rows = [self.sweep_entry(entry) for entry in entries]
        else:
            with ProcessPoolExecutor(max_workers=workers) as executor:
                rows = list(executor.map(_sweep_entry, [(self.scenario, self.out_dir, entry)
                                                        for entry in entries]))
        written = [self._path(entry.tag) for entry in entries]
        written.append(self._write(self._path("sweep"), pd.DataFrame(rows)))
        return written

    def run_compare(self) -> List[Path]:
        run = self.scenario.run
        table = ingest_rate_table(self.scenario.base_dir / run.compare_table)
        written = []
        for alpha in run.alpha_g:
            report = compare_rate_tables(table, self.scenario.qnm, alpha, run.compare_tolerance)
            flagged = report.loc[report[CompareColumns.flagged], CompareColumns.column].tolist()
            if flagged:
                logger.warning("Rate table deviates beyond %g at alpha_g=%g in %s",
                               run.compare_tolerance, alpha, flagged)
            written.append(self._write(self._path("compare", f"a{alpha:g}"), report))
        return written

    def run(self) -> List[Path]:
        """
        Execute the scenario's mode.

        Returns:
            list: Written paths in a deterministic order.

        Raises:
            QnmGainError: Module errors, logged with the scenario output stem.
        """
        mode = self.scenario.run.mode
        handler = getattr(self, f"run_{mode}")
        try:
            return handler()
        except QnmGainError as error:
            logger.error("Scenario %s (%s mode) failed: %s", self.scenario.run.output, mode, error)
            raise


def _sweep_entry(task) -> Dict[str, object]:
    scenario, out_dir, entry = task
    return Runner(scenario, out_dir).sweep_entry(entry)


def run(scenario: Scenario, out_dir, debug=False, workers=None) -> List[Path]:
    return Runner(scenario, out_dir, debug=debug, workers=workers).run()
