import csv
import io
import json
import subprocess
import sys

import pytest

from loopsource.cli import assess_feasibility, main


def run_cli(args, tmp_path, name="out.csv"):
    path = tmp_path / name
    code = main(args + ["--out", str(path)])
    text = path.read_text() if path.exists() else ""
    return code, text


def read_csv(text):
    rows = list(csv.reader(io.StringIO(text)))
    return rows[0], rows[1:]


def test_sweep_train_column_is_geometric(tmp_path):
    code, text = run_cli(
        ["sweep", "--t", "1..8", "--nbar", "1", "--eta-d", "1", "--detector", "bucket"],
        tmp_path,
    )
    assert code == 0
    header, rows = read_csv(text)
    t_col = header.index("time_bins")
    train_col = header.index("train")
    for row in rows:
        t = int(row[t_col])
        assert float(row[train_col]) == pytest.approx(1.0 - 2.0**-t, rel=1e-15)


def test_simulate_runs_are_byte_identical(tmp_path):
    args = ["simulate", "--nbar", "0.5", "--t", "3", "--eta", "0.9",
            "--trials", "20000", "--seed", "7"]
    code_a, text_a = run_cli(args, tmp_path, "a.csv")
    code_b, text_b = run_cli(args, tmp_path, "b.csv")
    assert code_a == code_b == 0
    assert text_a == text_b
    assert "herald_rate" in text_a


def test_csv_round_trip_is_byte_stable(tmp_path):
    code, text = run_cli(["figure", "fig2"], tmp_path)
    assert code == 0
    header, rows = read_csv(text)

    def retype(cell):
        try:
            return int(cell)
        except ValueError:
            pass
        try:
            return float(cell)
        except ValueError:
            return cell

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        out = []
        for cell in row:
            value = retype(cell)
            if isinstance(value, float):
                out.append(format(value, ".17g"))
            else:
                out.append(str(value))
        writer.writerow(out)
    assert buffer.getvalue() == text


def test_json_output_carries_meta_and_null(tmp_path):
    code, text = run_cli(
        ["simulate", "--nbar", "0", "--t", "2", "--trials", "50",
         "--format", "json"],
        tmp_path,
        "out.json",
    )
    assert code == 0
    data = json.loads(text)
    assert data["meta"]["command"] == "simulate"
    assert data["meta"]["seed"] == 0
    assert "version" in data["meta"]
    assert data["meta"]["parameters"]["nbar"] == "0"
    # a run that never heralds has no conditional fidelity
    assert data["columns"]["conditional_fidelity"] == [None]
    assert data["columns"]["herald_rate"] == [0.0]


def test_undefined_sentinel_in_csv(tmp_path):
    code, text = run_cli(
        ["simulate", "--nbar", "0", "--t", "2", "--trials", "50"], tmp_path
    )
    assert code == 0
    header, rows = read_csv(text)
    assert rows[0][header.index("conditional_fidelity")] == "undefined"


def test_fidelity_command_reports_per_loop_rows(tmp_path):
    code, text = run_cli(
        ["fidelity", "--nbar", "0.5", "--t", "3", "--eta", "0.9"], tmp_path
    )
    assert code == 0
    header, rows = read_csv(text)
    assert len(rows) == 3
    fid_col = header.index("loop_fidelity")
    values = [float(r[fid_col]) for r in rows]
    assert values[0] > values[1] > values[2]


def test_chronological_flag_flips_schedule_interpretation(tmp_path):
    code_a, text_a = run_cli(
        ["herald", "--nbar", "0.1,0.2,0.3", "--t", "3"], tmp_path, "a.csv"
    )
    code_b, text_b = run_cli(
        ["herald", "--nbar", "0.3,0.2,0.1", "--t", "3", "--chronological"],
        tmp_path,
        "b.csv",
    )
    assert code_a == code_b == 0
    _, rows_a = read_csv(text_a)
    _, rows_b = read_csv(text_b)
    assert rows_a == rows_b[::-1]


def test_histogram_mode_rows(tmp_path):
    code, text = run_cli(
        ["simulate", "--nbar", "0.5", "--t", "3", "--trials", "1000",
         "--histogram"],
        tmp_path,
    )
    assert code == 0
    header, rows = read_csv(text)
    assert header == ["loop", "count", "frequency"]
    assert len(rows) == 4
    assert sum(int(r[1]) for r in rows) == 1000


def test_parallel_command_summary(tmp_path):
    code, text = run_cli(
        ["parallel", "--nbar", "0.5", "--t", "3", "--sources", "3",
         "--trials", "2000", "--seed", "1"],
        tmp_path,
    )
    assert code == 0
    header, rows = read_csv(text)
    assert rows[0][header.index("sources")] == "3"


def test_optimize_biased_emits_one_row_per_bin(tmp_path):
    code, text = run_cli(
        ["optimize", "--t", "3", "--eta", "0.95", "--biased"], tmp_path
    )
    assert code == 0
    header, rows = read_csv(text)
    assert len(rows) == 3
    nbar_col = header.index("nbar")
    loops_col = header.index("loops_before_output")
    by_loop = {int(r[loops_col]): float(r[nbar_col]) for r in rows}
    assert by_loop[2] > by_loop[1] > by_loop[0]


def test_feasibility_reference_points():
    ghz = assess_feasibility(1e9)
    assert ghz.fibre_length == pytest.approx(2.0, abs=0.1)
    assert ghz.net_transmission == pytest.approx(0.086, abs=0.001)
    assert assess_feasibility(80e6).fibre_length == pytest.approx(2.6, abs=0.1)
    assert assess_feasibility(1e5).fibre_transmission == pytest.approx(0.91, abs=0.01)


def test_feasibility_command_output(tmp_path):
    code, text = run_cli(["feasibility", "--rate", "1e9"], tmp_path)
    assert code == 0
    header, rows = read_csv(text)
    assert float(rows[0][header.index("fibre_length")]) == pytest.approx(2.04, abs=0.01)


def test_fig2_first_row_and_regeneration(tmp_path):
    code_a, text_a = run_cli(["figure", "fig2"], tmp_path, "a.csv")
    code_b, text_b = run_cli(["figure", "fig2"], tmp_path, "b.csv")
    assert code_a == code_b == 0
    assert text_a == text_b
    header, rows = read_csv(text_a)
    assert header == ["time_bins", "herald_resolved", "herald_bucket"]
    assert len(rows) == 50
    assert float(rows[0][1]) == pytest.approx(0.25)
    assert float(rows[0][2]) == pytest.approx(0.5)


def test_fig11_rows_trade_fidelity_for_herald_rate(tmp_path):
    code, text = run_cli(["figure", "fig11"], tmp_path)
    assert code == 0
    header, rows = read_csv(text)
    herald_col = header.index("herald_bucket")
    fid_col = header.index("fidelity_bucket")
    heralds = [float(r[herald_col]) for r in rows]
    fidelities = [float(r[fid_col]) for r in rows]
    assert all(b > a for a, b in zip(heralds, heralds[1:]))
    assert all(b < a for a, b in zip(fidelities, fidelities[1:]))


def test_fig7_bucket_beats_resolved_at_low_efficiency(tmp_path):
    code, text = run_cli(
        ["figure", "fig7", "--nbar", "1", "--eta", "0.6"], tmp_path
    )
    assert code == 0
    header, rows = read_csv(text)
    resolved = float(rows[0][header.index("unconditional_resolved")])
    bucket = float(rows[0][header.index("unconditional_bucket")])
    assert bucket > resolved


def test_usage_error_on_schedule_length_mismatch(tmp_path, capsys):
    code = main(["herald", "--nbar", "0.1,0.2,0.3", "--t", "2"])
    assert code == 2
    assert "--nbar" in capsys.readouterr().err


def test_usage_error_on_out_of_range_efficiency(capsys):
    code = main(["herald", "--eta-d", "1.5"])
    assert code == 2
    assert "--eta-d" in capsys.readouterr().err


def test_usage_error_on_figure_override_not_allowed(capsys):
    code = main(["figure", "fig2", "--eta-s", "0.5"])
    assert code == 2
    assert "--eta-s" in capsys.readouterr().err


def test_usage_error_on_range_t_where_scalar_needed(capsys):
    code = main(["simulate", "--t", "1..5"])
    assert code == 2
    assert "--t" in capsys.readouterr().err


def test_numerical_failure_exit_code(capsys):
    code = main(["fidelity", "--nbar", "1e200", "--t", "2"])
    assert code == 3
    err = capsys.readouterr().err
    assert "non-finite" in err


def test_bad_subcommand_is_a_usage_error():
    result = subprocess.run(
        [sys.executable, "-m", "loopsource.cli", "frobnicate"],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 2


def test_console_script_entry_point():
    result = subprocess.run(
        ["loopsource", "figure", "fig2", "--t", "1..2"],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0
    assert result.stdout.splitlines()[1] == "1,0.25,0.5"
