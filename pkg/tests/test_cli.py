import json

import pytest

from timebin_epp.cli import build_parser, main, parse_config
from timebin_epp.experiment import REPORT_FIELDS, ConfigError


def parse(*argv):
    return parse_config(build_parser().parse_args(list(argv)))


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_flags_make_valid_config():
    cfg = parse("run", "--F", "0.7", "--a", "0.1", "--b", "0.1", "--c", "0.1", "--trials", "1000", "--seed", "42")
    assert cfg.noise.weights == (0.7, 0.1, 0.1, 0.1)
    assert (cfg.trials, cfg.seed) == (1000, 42)


def test_defaults_are_noiseless():
    cfg = parse("run")
    assert cfg.noise.weights == (1.0, 0.0, 0.0, 0.0)
    assert (cfg.trials, cfg.seed, cfg.parties, cfg.branch) == (1000, 0, 2, None)


def test_simplex_violation():
    with pytest.raises(ConfigError) as exc:
        parse("run", "--F", "0.7", "--a", "0.7")
    assert exc.value.field == "noise"


def test_file_with_flag_override(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"F": 0.5, "b": 0.5, "seed": 3, "trials": 10}))
    cfg = parse("run", "--config", str(path), "--seed", "7")
    assert cfg.seed == 7
    assert cfg.trials == 10
    assert cfg.noise.weights == (0.5, 0.0, 0.5, 0.0)


@pytest.mark.parametrize("content, field", [
    ("{not json", "config"),
    ("[1, 2]", "config"),
    ('{"colour": 1}', "colour"),
    ('{"trials": "many"}', "trials"),
    ('{"trials": true}', "trials"),
])
def test_bad_files(tmp_path, content, field):
    path = tmp_path / "cfg.json"
    path.write_text(content)
    with pytest.raises(ConfigError) as exc:
        parse("run", "--config", str(path))
    assert exc.value.field == field


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        parse("run", "--config", str(tmp_path / "nope.json"))


def test_run_uniform_mixture(capsys):
    code, out, _ = run_cli(capsys, "run", "--F", "0.25", "--a", "0.25", "--b", "0.25", "--c", "0.25",
                           "--trials", "2000", "--seed", "1")
    assert code == 0
    doc = json.loads(out)
    assert tuple(doc) == REPORT_FIELDS
    assert doc["success_probability"] == 1.0
    assert doc["mean_corrected_fidelity"] == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("argv", [
    ["run", "--F", "0.7", "--a", "0.7"],
    ["run", "--trials", "0"],
    ["run", "--workers", "0"],
    ["ghz"],
    ["sweep", "--step", "0.3"],
    ["oracle-check", "--draws", "0"],
])
def test_config_errors_exit_1(capsys, argv):
    code, out, err = run_cli(capsys, *argv)
    assert code == 1
    assert out == ""
    assert "config error" in err


def test_sweep_step_quarter(capsys):
    code, out, _ = run_cli(capsys, "sweep", "--step", "0.25", "--trials", "50")
    assert code == 0
    reports = json.loads(out)["reports"]
    assert len(reports) == 35
    assert all(r["mean_corrected_fidelity"] == pytest.approx(1, abs=1e-12) for r in reports)
    assert all(r["success_probability"] == 1.0 for r in reports)


def test_sweep_csv_rows(capsys):
    code, out, _ = run_cli(capsys, "sweep", "--step", "0.25", "--trials", "10", "--format", "csv")
    assert code == 0
    assert len(out.splitlines()) == 36


def test_oracle_check_randomized(capsys):
    code, out, _ = run_cli(capsys, "oracle-check", "--seed", "1", "--draws", "20")
    assert code == 0
    doc = json.loads(out)
    assert doc["passed"] and doc["max_deviation"] < 1e-10


def test_oracle_check_fixed(capsys):
    code, out, _ = run_cli(capsys, "oracle-check", "--F", "0.5", "--c", "0.5", "--dephasing", "3.14159")
    assert code == 0
    assert json.loads(out)["mode"] == "fixed"


def test_ghz_run(capsys):
    code, out, _ = run_cli(capsys, "ghz", "--parties", "3", "--trials", "200", "--F", "0.6", "--b", "0.4")
    assert code == 0
    doc = json.loads(out)
    assert doc["success_probability"] == 1.0
    assert len(doc["branch_counts"]) == 8


def test_internal_errors_exit_2(capsys, monkeypatch):
    from timebin_epp import cli
    from timebin_epp.protocol import InternalConsistencyError

    def boom(*args, **kwargs):
        raise InternalConsistencyError("mismatched delays")

    monkeypatch.setattr(cli, "run_experiment", boom)
    code, _, err = run_cli(capsys, "run")
    assert code == 2
    assert "mismatched" in err


def test_oracle_disagreement_exits_2(capsys, monkeypatch):
    from timebin_epp import oracle

    monkeypatch.setattr(oracle, "randomized_cross_check", lambda seed, draws: 1e-3)
    code, out, _ = run_cli(capsys, "oracle-check")
    assert code == 2
    assert json.loads(out)["passed"] is False


def test_out_file_and_byte_determinism(tmp_path):
    args = ["run", "--F", "0.4", "--a", "0.3", "--b", "0.2", "--c", "0.1", "--theta-dist", "uniform",
            "--trials", "400", "--seed", "99"]
    paths = [tmp_path / f"r{i}.json" for i in range(3)]
    assert main(args + ["--out", str(paths[0])]) == 0
    assert main(args + ["--out", str(paths[1])]) == 0
    assert main(args + ["--out", str(paths[2]), "--workers", "2"]) == 0
    data = [p.read_bytes() for p in paths]
    assert data[0] == data[1] == data[2]
