import csv
import json

import pytest

from juicespec.cli import main


def files_of(directory):
    return {p.relative_to(directory).as_posix(): p.read_bytes() for p in sorted(directory.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def data_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "data.csv"
    assert main(["synth", "--seed", "42", "--juices", "31", "--replicates", "3", "--out", str(path)]) == 0
    return path


@pytest.fixture(scope="module")
def small_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("small") / "small.csv"
    assert main(["synth", "--seed", "5", "--juices", "8", "--replicates", "2", "--out", str(path)]) == 0
    return path


def test_synth_is_byte_identical(tmp_path, data_csv):
    again = tmp_path / "again.csv"
    assert main(["synth", "--seed", "42", "--juices", "31", "--replicates", "3", "--out", str(again)]) == 0
    assert again.read_bytes() == data_csv.read_bytes()
    assert len(again.read_bytes().decode().splitlines()) == 94


def test_synth_to_stdout(capsysbinary, data_csv):
    assert main(["synth", "--seed", "42"]) == 0
    assert capsysbinary.readouterr().out == data_csv.read_bytes()


def test_validate_summary(capsys, data_csv):
    assert main(["validate", "--data", str(data_csv)]) == 0
    out = capsys.readouterr().out
    assert "samples: 93  juices: 31" in out


def test_validate_reports_row_and_column(tmp_path, capsys, data_csv):
    lines = data_csv.read_text().splitlines()
    cells = lines[5].split(",")
    cells[10] = "oops"
    lines[5] = ",".join(cells)
    bad = tmp_path / "bad.csv"
    bad.write_text("\n".join(lines) + "\n")
    assert main(["validate", "--data", str(bad)]) == 1
    err = capsys.readouterr().err
    assert "row 6" in err and "'ta'" in err


def test_evaluate_region_svm(tmp_path, data_csv):
    out = tmp_path / "r"
    assert main(["evaluate", "--data", str(data_csv), "--task", "region", "--model", "svm",
                 "--cv", "loso", "--seed", "7", "--out", str(out)]) == 0
    metrics = json.loads((out / "metrics.json").read_text())
    assert {"accuracy", "f1"} <= metrics.keys()
    with open(out / "predictions.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 93
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 7
    assert len(manifest["input_sha256"]) == 64
    assert manifest["command_line"][:2] == ["juicespec", "evaluate"]
    assert manifest["feature_spec"]["include_chemistry"] is True


def test_single_region_is_a_data_error(tmp_path, capsys):
    data = tmp_path / "one.csv"
    assert main(["synth", "--regions", "1", "--vineyards", "2", "--juices", "4", "--out", str(data)]) == 0
    code = main(["evaluate", "--data", str(data), "--task", "region", "--cv", "loso", "--out", str(tmp_path / "r")])
    assert code == 1
    assert "single class" in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv, flag",
    [
        (["evaluate", "--task", "region", "--out", "x"], "--data"),
        (["evaluate", "--data", "d.csv", "--task", "sweetness", "--out", "x"], "--task"),
        (["rank", "--data", "d.csv", "--task", "all", "--window", "250-420", "--out", "x"], "--window"),
        (["synth", "--seed", "-1"], "--seed"),
        (["report", "--data", "d", "--format", "xlsx"], "--format"),
    ],
)
def test_usage_errors_exit_2_and_name_the_flag(capsys, argv, flag):
    assert main(argv) == 2
    assert flag in capsys.readouterr().err


def test_bad_config_is_a_usage_error(tmp_path, capsys, small_csv):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("svm.gamma=2\n")
    code = main(["evaluate", "--data", str(small_csv), "--task", "bitterness", "--config", str(cfg),
                 "--out", str(tmp_path / "r")])
    assert code == 2
    assert "--config" in capsys.readouterr().err


def test_evaluate_all_then_report(tmp_path, capsys, small_csv):
    cfg = tmp_path / "fast.cfg"
    cfg.write_text("epochs=2\nrf.n_trees=5\nhidden_width=4\nlstm_hidden=2\n")
    out = tmp_path / "runs"
    for cv in ("loso", "lojo"):
        assert main(["evaluate", "--data", str(small_csv), "--task", "vineyard", "--model", "all", "--cv", cv,
                     "--config", str(cfg), "--out", str(out / cv)]) == 0
    assert sorted(p.name for p in (out / "loso").iterdir()) == sorted(
        ["svm", "rf", "dnn1", "dnn2", "dnn3", "cnn1d", "lstm", "bilstm"])
    capsys.readouterr()
    assert main(["report", "--data", str(out), "--format", "csv"]) == 0
    rows = list(csv.reader(capsys.readouterr().out.splitlines()))
    assert len(rows) == 9 and all(len(r) == 5 for r in rows)


def test_report_without_results_is_usage_error(tmp_path):
    assert main(["report", "--data", str(tmp_path)]) == 2


def test_rank_outputs(tmp_path, small_csv):
    out = tmp_path / "rank"
    assert main(["rank", "--data", str(small_csv), "--task", "bitterness", "--top", "3", "--out", str(out)]) == 0
    rows = list(csv.reader((out / "topk.csv").read_text().splitlines()))
    assert rows[0] == ["rank", "bitterness:rf", "bitterness:svm"]
    assert len(rows) == 4
    manifest = json.loads((out / "manifest.json").read_text())
    assert "full standardized dataset" in manifest["convention"]


@pytest.mark.parametrize("task, cv, data", [("region", "loso", "data_csv"), ("bitterness", "lojo", "small_csv")])
def test_thread_count_does_not_change_outputs(tmp_path, request, task, cv, data):
    path = request.getfixturevalue(data)
    out = tmp_path / "r"
    runs = []
    for jobs in ("1", "3"):
        assert main(["evaluate", "--data", str(path), "--task", task, "--model", "svm",
                     "--cv", cv, "--seed", "11", "--jobs", jobs, "--out", str(out)]) == 0
        runs.append(files_of(out))
    assert runs[0] == runs[1]
