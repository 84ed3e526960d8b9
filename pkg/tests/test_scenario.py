import json
import warnings

import numpy as np
import pytest

from raman_nli.errors import ConfigError, InvalidGridError
from raman_nli.raman import synthetic_gain_table
from raman_nli.scenario import (
    FIBER_DEFAULTS,
    ResultRow,
    apply_overrides,
    load_raman_gain_csv,
    load_scenario,
    run_scenario,
    run_scenarios,
    scenario_from_dict,
    write_gain_csv,
    write_report_csv,
)

MINIMAL = {"fiber": {"alpha_db_km": 0.16}, "raman": {}, "plan": {"channels": [{"frequency_ghz": 0.0}]}}


def _quiet(doc, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return scenario_from_dict(doc, **kw)


def test_minimal_config_lists_defaults():
    config = scenario_from_dict(MINIMAL)
    for key in FIBER_DEFAULTS:
        if key != "alpha_db_km":
            assert f"fiber.{key}" in config.defaults
    assert "fiber.alpha_db_km" not in config.defaults
    assert "run.model" in config.defaults and "raman.slope_m_per_w_hz" in config.defaults


def test_loss_converted_to_per_metre():
    assert scenario_from_dict(MINIMAL).fiber.alpha == pytest.approx(3.6841361487904736e-05, rel=1e-12)


def test_missing_raman_block_warns():
    doc = {k: v for k, v in MINIMAL.items() if k != "raman"}
    with pytest.warns(UserWarning, match="raman"):
        config = scenario_from_dict(doc)
    assert config.spectrum().fraction == pytest.approx(0.2293, abs=1e-4)


def test_implausible_value_warns_only():
    doc = apply_overrides(MINIMAL, ["fiber.alpha_db_km=0.9"])
    with pytest.warns(UserWarning, match="alpha_db_km"):
        scenario_from_dict(doc)


@pytest.mark.parametrize("override, field", [
    ("fiber.a_eff_um2=-1", "fiber.a_eff_um2"),
    ("fiber.colour=1", "fiber.colour"),
    ("run.model=\"fast\"", "run.model"),
    ("run.dbp=[7]", "run.dbp"),
    ("run.ssfm.n_symbols=1000", "run.ssfm.n_symbols"),
    ("plan.occupancy={}", "plan.occupancy"),
    ("raman.mode=\"measured\"", "raman.csv"),
    ("schema_version=9", "schema_version"),
])
def test_errors_name_the_field(override, field):
    with pytest.raises(ConfigError, match=field.replace(".", r"\.")):
        _quiet(apply_overrides(MINIMAL, [override]))


def test_override_parsing():
    doc = apply_overrides(MINIMAL, ["run.ssfm.steps=200", "run.model=closed-form", "run.dbp=[0]"])
    assert doc["run"]["ssfm"]["steps"] == 200
    assert doc["run"]["model"] == "closed-form"
    assert doc["run"]["dbp"] == [0]
    assert "run" not in MINIMAL
    with pytest.raises(ConfigError):
        apply_overrides(MINIMAL, ["no-equals-sign"])


def test_echo_round_trip(tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps(MINIMAL))
    config = load_scenario(path, ["raman.n2=2.6e-20"])
    assert config.echo()["raman"]["n2"] == 2.6e-20
    again = scenario_from_dict(json.loads(json.dumps(config.echo())))
    assert again.echo() == config.echo()
    assert again.spectrum().fraction == config.spectrum().fraction


def _write_csv(path, rows, header="freq_hz,gain_m_per_w"):
    path.write_text(header + "\n" + "\n".join(rows) + "\n")
    return path


@pytest.mark.parametrize("rows, line", [
    (["0,0", "1e12,1e-14", "5e11,2e-14"], 4),
    (["0,0", "-1e12,1e-14", "2e12,2e-14"], 3),
    (["1e9,0", "1e12,1e-14", "2e12,2e-14"], 2),
    (["0,0", "1e12,abc", "2e12,2e-14"], 3),
    (["0,0", "1e12", "2e12,2e-14"], 3),
    (["0,0", "1e12,1e-14", "5e13,2e-14"], 4),
])
def test_gain_csv_errors_carry_line_numbers(tmp_path, rows, line):
    with pytest.raises(ConfigError, match=f"line {line}"):
        load_raman_gain_csv(_write_csv(tmp_path / "g.csv", rows))


def test_gain_csv_header_checked(tmp_path):
    with pytest.raises(ConfigError, match="line 1"):
        load_raman_gain_csv(_write_csv(tmp_path / "g.csv", ["0,0"], header="f,g"))


def test_gain_csv_needs_three_rows(tmp_path):
    with pytest.raises(InvalidGridError):
        load_raman_gain_csv(_write_csv(tmp_path / "g.csv", ["0,0", "1e12,1e-14"]))


def test_truncated_table_warns(tmp_path):
    freq, gain = synthetic_gain_table(f_max=15e12)
    write_gain_csv(tmp_path / "g.csv", freq, gain)
    with pytest.warns(UserWarning, match="Kramers-Kronig"):
        load_raman_gain_csv(tmp_path / "g.csv")


def test_synthetic_table_reproduces_fraction(tmp_path):
    freq, gain = synthetic_gain_table()
    write_gain_csv(tmp_path / "g.csv", freq, gain)
    table = load_raman_gain_csv(tmp_path / "g.csv")
    spec = table.spectrum(1550e-9, 2.1e-20, real_offset=-2.12e-15)
    assert spec.fraction == pytest.approx(0.23, abs=0.005)
    halved = tmp_path / "h.csv"
    write_gain_csv(halved, freq, gain / 2)
    assert np.allclose(load_raman_gain_csv(halved, polarization_averaged=True).gain, table.gain, rtol=1e-12)


def test_measured_mode_path_resolution(tmp_path):
    freq, gain = synthetic_gain_table()
    write_gain_csv(tmp_path / "g.csv", freq, gain)
    doc = apply_overrides(MINIMAL, ['raman.mode="measured"', 'raman.csv="g.csv"'])
    (tmp_path / "s.json").write_text(json.dumps(doc))
    config = load_scenario(tmp_path / "s.json")
    assert config.raw["raman"]["csv"] == str((tmp_path / "g.csv").resolve())
    assert config.spectrum().mode == "measured"


def test_result_row_source_tag():
    with pytest.raises(ValueError):
        ResultRow(0, 0.0, 0.0, 1.0, 20.0, 0.2, 0.1, -0.01, "model")


NINE = {
    "raman": {},
    "plan": {"symbol_rate_gbd": 5.0, "power_dbm": -8.0,
             "channels": [{"frequency_ghz": f} for f in (-600, -500, -300, -100, 0, 100, 200, 400, 600)]},
    "run": {"model": "closed-form"},
}


def test_closed_form_scenario_rows():
    report = run_scenario(scenario_from_dict(NINE))
    assert len(report) == 9
    assert all(r.source == "cf" and not r.dbp for r in report)
    assert all(r.delta_eta_db < 0 for r in report)
    assert report.log["timings"]["cf"] > 0


def test_dbp_rows_follow_plain_rows():
    doc = apply_overrides(NINE, ["run.dbp=[0, 4]", "run.channels=[0, 4, 8]"])
    report = run_scenario(scenario_from_dict(doc))
    assert [(r.index, r.dbp) for r in report] == [(0, False), (4, False), (8, False), (0, True), (4, True)]
    plain = {r.index: r for r in report.select("cf")}
    for r in report.select("cf", dbp=True):
        assert r.delta_eta_db < plain[r.index].delta_eta_db


def test_report_is_deterministic(tmp_path):
    doc = apply_overrides(NINE, ["run.channels=[1, 7]"])
    a = write_report_csv(tmp_path / "a.csv", run_scenario(scenario_from_dict(doc)).rows)
    b = write_report_csv(tmp_path / "b.csv", run_scenario(scenario_from_dict(doc)).rows)
    assert a.read_bytes() == b.read_bytes()


def test_run_scenarios_keeps_order(monkeypatch):
    monkeypatch.setenv("RAMAN_NLI_THREADS", "2")
    docs = [apply_overrides(NINE, [f"run.channels=[{i}]"]) for i in (2, 6)]
    reports = run_scenarios([scenario_from_dict(d) for d in docs])
    assert [r[0].index for r in reports] == [2, 6]


@pytest.mark.slow
def test_lower_band_channels_see_larger_impact():
    # a dense upper band and three sparse channels about 1 THz below it
    upper = [{"frequency_ghz": f} for f in np.arange(0, 400, 50.0).tolist()]
    lower = [{"frequency_ghz": f} for f in (-1000.0, -950.0, -900.0)]
    doc = {"raman": {}, "run": {"model": "closed-form"},
           "plan": {"symbol_rate_gbd": 5.0, "power_dbm": -8.0, "channels": lower + upper}}
    report = run_scenario(scenario_from_dict(doc))
    low = [abs(r.delta_eta_db) for r in report if r.frequency < -500e9]
    high = [abs(r.delta_eta_db) for r in report if r.frequency >= 0]
    assert min(low) > max(high)


@pytest.mark.slow
def test_compare_single_channel():
    doc = {"raman": {}, "run": {"model": "compare",
                                "ssfm": {"steps": 1000, "n_symbols": 4096, "realizations": 4}},
           "plan": {"symbol_rate_gbd": 5.0, "power_dbm": 3.0, "roll_off": 0.01,
                    "channels": [{"frequency_ghz": 0.0}]}}
    report = run_scenario(scenario_from_dict(doc))
    gn, sim = report.select("gn"), report.select("ssfm")
    assert len(gn) == len(sim) == 1
    assert gn[0].delta_model_sim_db == sim[0].delta_model_sim_db
    assert abs(gn[0].snr_db - sim[0].snr_db) <= 0.1
