import json
import math

import pytest

from retarded_bounds.cli import CSV_HEADER, ConfigError, RunConfig, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def csv_rows(text):
    return [line.split(",") for line in text.splitlines() if line and not line.startswith("#")]


def test_bound_preset_to_stdout(capsys):
    code, out, _ = run(capsys, "bound", "--preset", "gronwall", "--grid", "11")
    assert code == 0
    rows = csv_rows(out)
    assert ",".join(rows[0]) == CSV_HEADER
    assert len(rows) == 12
    assert float(rows[-1][1]) == pytest.approx(math.e, rel=1e-8)
    assert rows[-1][4] == "true"


def test_verify_writes_csv_file(tmp_path, capsys):
    out_file = tmp_path / "g.csv"
    code, out, _ = run(capsys, "verify", "--preset", "gronwall", "--grid", "201", "--out", str(out_file))
    assert code == 0
    rows = csv_rows(out_file.read_text())
    assert len(rows) == 202 and all(r[2] for r in rows[1:])
    assert "pass" in out.lower()


def test_scaled_bound_fails_dominance(capsys):
    code, _, _ = run(capsys, "verify", "--preset", "gronwall", "--grid", "201", "--scale-bound", "0.99")
    assert code == 2


def test_blowup_below_horizon_passes(capsys):
    code, _, _ = run(capsys, "verify", "--preset", "blowup", "--t-max", "0.9", "--grid", "901")
    assert code == 0


def test_tau_reports(capsys):
    code, out, _ = run(capsys, "tau", "--preset", "gronwall")
    assert code == 0 and "Psi unbounded" in out and out.strip().endswith("(capped at t_max)")
    code, out, _ = run(capsys, "tau", "--preset", "blowup", "--t-max", "2")
    assert code == 0 and "Psi bounded" in out
    tau = float(out.strip().splitlines()[-1].split("=")[1].split()[0])
    assert tau == pytest.approx(1.0, abs=1e-6)


def test_invalid_instance_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"phi": "x", "c": "1", "eta": "x", "w": "1", "alpha": "2*t", "f": "1"}))
    code, _, err = run(capsys, "bound", "--config", str(cfg))
    assert code == 1 and "alpha" in err


def test_bad_config_keys(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"preset": "gronwall", "colour": "red"}))
    code, _, err = run(capsys, "bound", "--config", str(cfg))
    assert code == 1 and "colour" in err
    with pytest.raises(ConfigError):
        RunConfig.from_json("[1, 2]")


def test_config_with_problem_block(tmp_path, capsys):
    cfg = tmp_path / "p.json"
    cfg.write_text(json.dumps({"problem": {"phi": "x", "c": "1", "eta": "x", "w": "1", "alpha": "t",
                                           "f": "1"}, "grid": 5}))
    code, out, _ = run(capsys, "bound", "--config", str(cfg))
    assert code == 0 and len(csv_rows(out)) == 6


def test_parse_error_is_invalid(capsys):
    code, _, err = run(capsys, "bound", "--preset", "gronwall", "--grid", "1")
    assert code == 1


def test_batch_is_deterministic(capsys):
    args = ("batch", "--seed", "3", "--seeds", "3", "--family", "power", "--grid", "201")
    code1, out1, _ = run(capsys, *args)
    code2, out2, _ = run(capsys, *args)
    assert code1 == code2 == 0
    assert out1 == out2
    assert len(csv_rows(out1)) == 4
