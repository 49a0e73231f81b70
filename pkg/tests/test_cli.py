import json
import math
import time

import pytest

from bosefield.cli import apply_env_overrides, main
from bosefield.config import ConfigError, RunConfig, config_from_dict, default_config, parse_config
from bosefield.report import CheckEntry, ConvergenceTable, VerificationReport
from bosefield.suites import UnknownSuiteError, emit_convergence_table, resolve_selection, run_suites

SMALL = {"grid": {"points": 5, "spacing": 0.5}, "nmax": 3}


def write_config(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(data if isinstance(data, str) else json.dumps(data))
    return path


# -- configuration ------------------------------------------------------------------


def test_defaults_fill_missing_fields(tmp_path):
    cfg = parse_config(write_config(tmp_path, {}))
    assert cfg == default_config()
    assert cfg.grid.points == 8 and cfg.nmax == 3 and cfg.kappa == 0.3
    assert (cfg.f_window.start_index, cfg.f_window.end_index) == (1, 6)
    assert cfg.dyson_config().order == 8


def test_partial_section_keeps_other_defaults(tmp_path):
    cfg = parse_config(write_config(tmp_path, {"time": {"t_max": 0.2}}))
    assert cfg.time.t_max == 0.2 and cfg.time.quad_steps == 64


def test_empty_config_is_rejected(tmp_path):
    with pytest.raises(ConfigError, match="empty"):
        parse_config(write_config(tmp_path, "  \n"))


def test_malformed_json_reports_position(tmp_path):
    with pytest.raises(ConfigError, match="line 1 column"):
        parse_config(write_config(tmp_path, '{"nmax": }'))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        parse_config(tmp_path / "nope.json")


@pytest.mark.parametrize("data, field", [
    ({"f_window": {"start_index": 0, "end_index": 3}}, "f_window"),
    ({"f_window": {"start_index": 2, "end_index": 7}}, "f_window"),
    ({"f_window": {"profile": "mode", "start_index": 2, "end_index": 3}}, "f_window"),
    ({"nmax": 1}, "nmax"),
    ({"grid": {"points": 2}}, "grid.points"),
    ({"tolerances": {"dyson": 0.0}}, "tolerances.dyson"),
    ({"time": {"quad_rule": "gauss"}}, "time.quad_rule"),
    ({"potential": {"kind": "square"}}, "potential.kind"),
    ({"seed": -1}, "seed"),
])
def test_invalid_values_name_the_field(data, field):
    with pytest.raises(ConfigError) as exc:
        config_from_dict(data)
    assert any(issue.startswith(field) for issue in exc.value.issues)


def test_unknown_fields_and_types():
    with pytest.raises(ConfigError) as exc:
        config_from_dict({"grid": {"pts": 4}, "colour": 1, "nmax": "3", "kappa": True})
    issues = exc.value.issues
    assert "grid.pts: unknown field" in issues
    assert "colour: unknown field" in issues
    assert any(i.startswith("nmax: expected an integer") for i in issues)
    assert any(i.startswith("kappa: expected a number") for i in issues)


def test_mode_profile_window():
    cfg = config_from_dict({"f_window": {"profile": "mode", "start_index": 3}})
    f = cfg.test_function()
    assert cfg.f_window.end_index == 3
    assert abs(f[3]) > 0 and sum(abs(f) > 0) == 1


def test_env_overrides():
    cfg = default_config()
    out = apply_env_overrides(cfg, {"BOSEFIELD_SEED": "7", "BOSEFIELD_WORKERS": "2"})
    assert (out.seed, out.workers) == (7, 2)
    assert apply_env_overrides(cfg, {}) is cfg
    with pytest.raises(ConfigError):
        apply_env_overrides(cfg, {"BOSEFIELD_SEED": "seven"})
    with pytest.raises(ConfigError):
        apply_env_overrides(cfg, {"BOSEFIELD_WORKERS": "0"})


# -- suites and reports -------------------------------------------------------------


def test_selection():
    assert resolve_selection("all") == resolve_selection(None)
    assert resolve_selection("seminorm,ccr") == ["ccr", "seminorm"]
    with pytest.raises(UnknownSuiteError):
        resolve_selection("ccr,bogus")


def test_ccr_suite_is_fast_and_green():
    start = time.perf_counter()
    report = run_suites(default_config(), "ccr")
    assert time.perf_counter() - start < 5
    assert report.passed and report.suites() == ["ccr"]
    assert all(e.anchor for e in report.entries)


def test_determinism_across_workers():
    cfg = config_from_dict(SMALL)
    names = "ccr,harmonic,isometry,seminorm"
    one = run_suites(cfg, names, workers=1)
    two = run_suites(cfg, names, workers=2)
    assert one.payload() == two.payload()


def test_suite_data_independent_of_selection():
    cfg = config_from_dict(SMALL)
    alone = run_suites(cfg, "seminorm")
    both = run_suites(cfg, "ccr,seminorm")
    pick = lambda r: [e.to_dict(False) for e in r.entries if e.suite == "seminorm"]
    assert pick(alone) == pick(both)


def test_seed_changes_random_data():
    a = run_suites(config_from_dict(SMALL), "ccr")
    b = run_suites(config_from_dict({**SMALL, "seed": 1}), "ccr")
    assert [e.measured for e in a.entries] != [e.measured for e in b.entries]


def test_report_round_trip(tmp_path):
    report = run_suites(config_from_dict(SMALL), "ccr,isometry")
    report.tables.append(ConvergenceTable("demo", "order", [(0, 1.0, None), (1, 0.5, 2.0)], True,
                                          bounds=[math.inf, 1.0]))
    path = tmp_path / "report.json"
    report.write(path)
    back = VerificationReport.from_json(path.read_text())
    assert back.payload() == report.payload()
    assert back.tables[0].bounds[0] == math.inf


def test_report_rejects_bad_version_and_summary():
    rep = VerificationReport({}, [CheckEntry("s", "c", "d", "a", 0.1, 1.0, True)])
    d = rep.to_dict()
    with pytest.raises(ValueError):
        VerificationReport.from_dict({**d, "schema_version": 99})
    with pytest.raises(ValueError):
        VerificationReport.from_dict({**d, "summary": {"total": 5, "passed": 5, "failed": 0}})


def test_format_lines():
    rep = VerificationReport({}, [CheckEntry("s", "ok", "", "a", 0.1, 1.0, True),
                                  CheckEntry("s", "bad", "", "a", 2.0, 1.0, False)])
    lines = rep.format_lines()
    assert lines[0].startswith("PASS  s/ok")
    assert lines[1].startswith("FAIL  s/bad")
    assert lines[-1] == "1/2 checks passed, 1 failed"


# -- convergence tables -------------------------------------------------------------


def test_convergence_at_time_zero_is_exact():
    cfg = config_from_dict({**SMALL, "time": {"t_max": 0.0, "dyson_order": 2}})
    table = emit_convergence_table(cfg, "dyson_order")
    assert all(e < 1e-13 for _, e, _ in table.rows)
    assert all(r is None for _, _, r in table.rows)
    assert table.monotone


def test_quadrature_study_ratio():
    table = emit_convergence_table(default_config(), "quad_steps")
    ratios = [r for _, _, r in table.rows if r is not None]
    assert table.monotone and len(ratios) == 3
    assert all(8 <= r <= 32 for r in ratios)


def test_order_study_stays_below_bound():
    table = emit_convergence_table(config_from_dict({**SMALL, "time": {"quad_steps": 32}}), "dyson_order")
    assert [p for p, _, _ in table.rows] == list(range(13))
    assert all(e <= b for (_, e, _), b in zip(table.rows, table.bounds))
    assert "bound" in table.to_text()


def test_unknown_study():
    with pytest.raises(ValueError):
        emit_convergence_table(default_config(), "bogus")


# -- entry point --------------------------------------------------------------------


def test_main_passes(tmp_path, capsys):
    cfg = write_config(tmp_path, {})
    out = tmp_path / "r.json"
    assert main(["--config", str(cfg), "--suite", "ccr", "--report", str(out)]) == 0
    text = capsys.readouterr().out
    assert "3/3 checks passed" in text
    assert VerificationReport.from_json(out.read_text()).passed


def test_main_exit_one_on_failed_check(tmp_path, capsys):
    # the default order leaves the sector-2 series above the Dyson tolerance
    cfg = write_config(tmp_path, {})
    assert main(["--config", str(cfg), "--suite", "dyson-convergence", "--quiet"]) == 1
    assert "failed" in capsys.readouterr().out


def test_main_usage_errors(tmp_path, capsys):
    cfg = write_config(tmp_path, {})
    assert main(["--config", str(cfg), "--suite", "nope"]) == 2
    assert main(["--config", str(tmp_path / "missing.json")]) == 2
    assert main(["--config", str(write_config(tmp_path, {"nmax": 0}, "bad.json"))]) == 2
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["--config", str(cfg), "--study", "bogus"])
    assert exc.value.code == 2
    err = capsys.readouterr().err
    assert "unknown suite(s): nope" in err and "nmax" in err


def test_main_env_override_rejected(tmp_path, monkeypatch):
    monkeypatch.setenv("BOSEFIELD_WORKERS", "many")
    assert main(["--config", str(write_config(tmp_path, {})), "--suite", "ccr"]) == 2


def test_main_list(capsys):
    assert main(["--config", "unused.json", "--list"]) == 0
    assert "coherence-mechanism" in capsys.readouterr().out


def test_main_study(tmp_path, capsys):
    cfg = write_config(tmp_path, SMALL)
    out = tmp_path / "s.json"
    assert main(["--config", str(cfg), "--study", "quad_steps", "--report", str(out)]) == 0
    assert "# quad_steps" in capsys.readouterr().out
    assert VerificationReport.from_json(out.read_text()).tables[0].study == "quad_steps"


def test_run_config_round_trips_through_dict():
    cfg = config_from_dict(SMALL)
    assert config_from_dict(cfg.to_dict()) == cfg
    assert isinstance(cfg, RunConfig)
