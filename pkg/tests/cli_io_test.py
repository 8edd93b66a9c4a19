import sys
import pathlib
import json

LIB_PATH = str(pathlib.Path(__file__).parent.absolute() / "..")
sys.path.insert(0, LIB_PATH)
# pylint: disable=wrong-import-position

import numpy as np
import pytest

from qnmgain.cli import EXIT_OK, EXIT_PHYSICS, EXIT_VALIDATION, main
from qnmgain.core.cli_io import (
    Entry, Runner, compare_rate_tables, ingest_rate_table, run,
)
from qnmgain.core.columns import (
    CompareColumns, RateColumns, SpectrumColumns, SteadyColumns, TrajectoryColumns,
)
from qnmgain.core.exceptions import ScenarioError
from qnmgain.core.observables import peak_ratio, spectral_weight_ratio, spectrum_ss
from qnmgain.core.qnm_rates import QnmModel, rate_sweep
from qnmgain.core.scenario import load_scenario, parse_scenario, preset_path, with_mode
from qnmgain.core.table_codec import TableCodec

PAIR = {
    "rates": {"gamma_down": [[2.0, 1.0], [1.0, 2.0]], "delta_down": [[0.0, 3.0], [3.0, 0.0]]},
    "run": {"mode": "steady", "t_grid": {"start": 0.0, "stop": 10.0, "num": 201},
            "output": "pair"},
}
QNM = QnmModel.symmetric(1.2, 0.05, 0.05, gain_overlap=1.0)

fig4 = load_scenario(preset_path("fig4"))
fig5 = load_scenario(preset_path("fig5"))
fig6 = load_scenario(preset_path("fig6"))
fig7 = load_scenario(preset_path("fig7"))


def pair(**run_changes):
    doc = json.loads(json.dumps(PAIR))
    doc["run"].update(run_changes)
    return parse_scenario(doc)


def write_json(path, doc):
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


def test_entry_tags():
    assert Entry(0.22, 0.0, True).tag == "a0.22_p0_cross"
    assert Entry(0.0, 0.1, False).tag == "a0_p0.1_nocross"


def test_override_rates_are_in_gamma0_units():
    runner = Runner(pair(gamma_pump=[0.1]), ".")
    assert runner.gamma0 == 2.0
    rates = runner.rates(runner.entries[0])
    assert rates.gamma_down[0, 1] == pytest.approx(0.5)
    assert rates.exchange()[0, 1] == pytest.approx(1.5)
    np.testing.assert_allclose(rates.gamma_pump, [0.1, 0.1])
    np.testing.assert_allclose(rates.gamma_dephase, [0.001, 0.001])


def test_steady_run_writes_echoed_table(tmp_path):
    scenario = pair()
    written = run(scenario, tmp_path)
    assert written == [tmp_path / "pair_steady.csv"]
    header, frame = TableCodec.read_table(written[0])
    assert header["scenario"] == scenario.resolved
    assert header["gamma0"] == 2.0
    assert len(frame) == 1
    row = frame.iloc[0]
    # no gain: everything relaxes to the ground state
    assert row[SteadyColumns.rho_gg] == pytest.approx(1.0, abs=1e-9)
    assert row[SteadyColumns.rho_aa] == pytest.approx(0.0, abs=1e-9)
    assert np.isnan(row[SteadyColumns.gamma_ref])


def test_runs_are_deterministic(tmp_path):
    scenario = pair(mode="spectrum", gamma_pump=[0.1], include_cross_pump=[True, False],
                    omega_grid={"start": -6.0, "stop": 6.0, "num": 121})
    first = run(scenario, tmp_path / "one")
    second = run(scenario, tmp_path / "two")
    assert [p.name for p in first] == [p.name for p in second]
    assert len(first) == 4
    for a, b in zip(first, second):
        assert a.read_bytes() == b.read_bytes()
    _, peaks = TableCodec.read_table(tmp_path / "one" / "pair_spectrum_a0_p0.1_cross_peaks.csv")
    assert list(peaks.columns) == [SpectrumColumns.position, SpectrumColumns.height,
                                   SpectrumColumns.fwhm]


def test_dynamics_columns_and_time_unit(tmp_path):
    scenario = pair(mode="dynamics", negativity=True, time_unit="inverse_ev", gamma_ref_ev=0.5)
    (path,) = run(scenario, tmp_path)
    assert path.name == "pair_a0_p0_cross.csv"
    _, frame = TableCodec.read_table(path)
    assert list(frame.columns) == [
        TrajectoryColumns.time, TrajectoryColumns.rho_aa, TrajectoryColumns.rho_bb,
        TrajectoryColumns.rho_pp, TrajectoryColumns.rho_mm, TrajectoryColumns.rho_tt,
        TrajectoryColumns.rho23_re, TrajectoryColumns.rho23_im, TrajectoryColumns.negativity]
    assert frame[TrajectoryColumns.time].iloc[-1] == pytest.approx(20.0)
    assert frame[TrajectoryColumns.rho_aa].iloc[0] == pytest.approx(1.0)


def test_three_emitter_dynamics(tmp_path):
    doc = {"rates": {"gamma_down": (np.full((3, 3), 0.5) + 0.5 * np.eye(3)).tolist()},
           "emitters": {"count": 3},
           "run": {"mode": "dynamics", "t_grid": {"start": 0.0, "stop": 2.0, "num": 21},
                   "output": "trio"}}
    (path,) = run(parse_scenario(doc), tmp_path)
    _, frame = TableCodec.read_table(path)
    assert list(frame.columns) == ["t", "pop_0", "pop_1", "pop_2"]
    assert frame["pop_0"].iloc[0] == pytest.approx(1.0)


def test_sweep_is_independent_of_worker_count(tmp_path):
    scenario = pair(mode="sweep", gamma_pump=[0.0, 0.1], include_cross_pump=[True, False])
    serial = Runner(scenario, tmp_path / "serial", workers=1).run()
    parallel = Runner(scenario, tmp_path / "parallel", workers=2).run()
    assert [p.name for p in serial] == [p.name for p in parallel]
    assert serial[-1].name == "pair_sweep.csv"
    assert len(serial) == 5
    for a, b in zip(serial, parallel):
        assert a.read_bytes() == b.read_bytes()
    _, frame = TableCodec.read_table(serial[-1])
    assert list(frame[SteadyColumns.gamma_pump]) == [0.0, 0.0, 0.1, 0.1]


def test_worker_count_is_capped():
    scenario = pair(gamma_pump=[0.0, 0.1])
    assert Runner(scenario, ".", workers=8).worker_count() == 2
    assert 1 <= Runner(scenario, ".").worker_count() <= 2


def test_rate_table_comparison(tmp_path):
    grid = np.linspace(1.0, 1.4, 41)
    reference = rate_sweep(QNM, grid)
    path = TableCodec.write_table(tmp_path / "table.csv", reference, {"source": "qnm"})
    table = ingest_rate_table(path)
    assert table.header == {"source": "qnm"}
    assert table.at(1.2)[RateColumns.gamma_down_aa] == pytest.approx(
        reference[RateColumns.gamma_down_aa].iloc[20], rel=1e-9)
    report = compare_rate_tables(table, QNM)
    assert list(report[CompareColumns.column]) == RateColumns.rates
    assert not report[CompareColumns.flagged].any()

    perturbed = reference.copy()
    perturbed[RateColumns.gamma_down_ab] *= 1.01
    TableCodec.write_table(path, perturbed, {})
    report = compare_rate_tables(ingest_rate_table(path), QNM).set_index(CompareColumns.column)
    assert report.loc[RateColumns.gamma_down_ab, CompareColumns.flagged]
    assert report.loc[RateColumns.gamma_down_ab, CompareColumns.max_rel_deviation] == \
        pytest.approx(0.01 / 1.01, rel=1e-6)
    assert report[CompareColumns.flagged].sum() == 1


def test_rate_table_errors(tmp_path):
    reference = rate_sweep(QNM, np.linspace(1.0, 1.4, 5))
    with pytest.raises(ScenarioError, match="does not exist"):
        ingest_rate_table(tmp_path / "none.csv")
    short = TableCodec.write_table(tmp_path / "short.csv",
                                   reference.drop(columns=[RateColumns.delta_up_ab]), {})
    with pytest.raises(ScenarioError, match="lacks columns"):
        ingest_rate_table(short)
    reverse = TableCodec.write_table(tmp_path / "reverse.csv", reference.iloc[::-1], {})
    with pytest.raises(ScenarioError, match="increase strictly") as info:
        ingest_rate_table(reverse)
    assert info.value.key_path == "run.compare_table"


def test_compare_mode_resolves_relative_tables(tmp_path):
    TableCodec.write_table(tmp_path / "table.csv", rate_sweep(QNM, np.linspace(1.1, 1.3, 21)), {})
    doc = {"qnm": {"omega_c": 1.2, "gamma_c": 0.05, "mode_amp": [0.05], "gain_overlap": 1.0},
           "run": {"mode": "compare", "omega0": 1.21, "alpha_g": [0.0, 0.1],
                   "compare_table": "table.csv", "output": "check"}}
    scenario = parse_scenario(doc, base_dir=tmp_path)
    written = run(scenario, tmp_path / "out")
    assert [p.name for p in written] == ["check_compare_a0.csv", "check_compare_a0.1.csv"]
    _, clean = TableCodec.read_table(written[0])
    assert not clean[CompareColumns.flagged].any()
    _, gained = TableCodec.read_table(written[1])
    assert gained.set_index(CompareColumns.column).loc[RateColumns.gamma_up_aa,
                                                      CompareColumns.flagged]


def test_cli_exit_codes(tmp_path, capsys):
    scenario = write_json(tmp_path / "pair.json", PAIR)
    assert main(["steady", "--scenario", str(scenario), "--out", str(tmp_path)]) == EXIT_OK
    assert str(tmp_path / "pair_steady.csv") in capsys.readouterr().out

    assert main(["rates", "--scenario", str(scenario), "--out", str(tmp_path)]) == EXIT_VALIDATION
    assert "run.mode" in capsys.readouterr().err

    unstable = write_json(tmp_path / "unstable.json",
                          {"rates": {"gamma_down": [[1.0, 2.0], [2.0, 1.0]]},
                           "run": {"t_grid": {"start": 0.0, "stop": 1.0, "num": 11}}})
    assert main(["dynamics", "--scenario", str(unstable),
                 "--out", str(tmp_path)]) == EXIT_PHYSICS

    extra = json.loads(json.dumps(PAIR))
    extra["run"]["colour"] = "blue"
    lenient = write_json(tmp_path / "extra.json", extra)
    assert main(["steady", "--scenario", str(lenient), "--out", str(tmp_path)]) == EXIT_VALIDATION
    assert main(["steady", "--scenario", str(lenient), "--out", str(tmp_path),
                 "--lenient"]) == EXIT_OK

    capsys.readouterr()
    zero = write_json(tmp_path / "zero.json",
                      {"qnm": {"omega_c": 1.2, "gamma_c": 0.05, "mode_amp": [0.05]},
                       "run": {"omega0": 1.21,
                               "rate_grid": {"start": 0.0, "stop": 1.0, "num": 3}}})
    assert main(["rates", "--scenario", str(zero), "--out", str(tmp_path)]) == EXIT_VALIDATION
    assert "run.rate_grid.start" in capsys.readouterr().err


def test_cli_resolves_preset_names(tmp_path):
    assert main(["rates", "--scenario", "fig3", "--out", str(tmp_path)]) == EXIT_OK
    for alpha in ("0", "0.001", "0.1", "0.22"):
        header, frame = TableCodec.read_table(tmp_path / f"fig3_rates_a{alpha}.csv")
        assert list(frame.columns) == RateColumns.all
        assert header["calibrated"]["gamma_c"] == pytest.approx(0.0525, rel=1e-2)
    assert main(["rates", "--scenario", "fig99", "--out", str(tmp_path)]) == EXIT_VALIDATION


def test_gain_raises_plateau_near_resonance():
    for scenario in (fig4, fig5):
        runner = Runner(scenario, ".")
        plateaus = [runner.steady_row(entry)[0][SteadyColumns.plateau_aa]
                    for entry in runner.entries]
        assert plateaus[0] == pytest.approx(0.25, abs=0.01)
        assert all(np.diff(plateaus) > 0)


def test_gain_keeps_entanglement_small():
    runner = Runner(fig4, ".")
    entry = [e for e in runner.entries if e.alpha_g == 0.22][0]
    _, frame = runner.trajectory(entry)
    late = frame[frame[TrajectoryColumns.time] > 2.0]
    assert late[TrajectoryColumns.negativity].max() < 1e-3


def test_gain_pumps_two_quanta_from_ground():
    runner = Runner(fig6, ".")
    no_gain, gain = runner.entries
    _, frame = runner.trajectory(no_gain)
    np.testing.assert_allclose(frame[TrajectoryColumns.rho_tt], 0.0, atol=1e-12)
    _, frame = runner.trajectory(gain)
    assert frame[TrajectoryColumns.rho_tt].iloc[0] == 0.0
    assert frame[TrajectoryColumns.rho_tt].iloc[-1] > 0.01


def test_cross_pump_hides_lower_peak():
    runner = Runner(fig7, ".")
    weights, peaks = {}, {}
    for entry in runner.entries:
        exchange = runner.rates(entry).exchange()[0, 1]
        series = spectrum_ss(runner.model(entry))
        key = entry.gamma_pump, entry.include_cross_pump
        weights[key] = spectral_weight_ratio(series, -exchange, exchange)
        peaks[key] = peak_ratio(series, -exchange, exchange)
    # cross pump on: no resolved lower peak, its weight grows with pump
    assert weights[0.001, True] < 0.05
    assert weights[0.1, True] > 0.05
    assert weights[0.001, True] < weights[0.01, True] < weights[0.1, True]
    # cross pump off: the lower peak is resolved at every pump
    for gamma_pump in (0.001, 0.01, 0.1):
        assert peaks[gamma_pump, False] > 0.1


def test_spectrum_mode_uses_preset(tmp_path):
    scenario = with_mode(fig7, "spectrum")
    runner = Runner(scenario, tmp_path)
    table, peaks = runner.spectrum(runner.entries[0])
    assert table[SpectrumColumns.total].max() > 0
    assert len(peaks) >= 1
