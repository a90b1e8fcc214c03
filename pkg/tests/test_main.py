"""Tests for CLI entrypoint."""

import json
from pathlib import Path
from typing import Any

import numpy as np
import pytest

from capls_da.__main__ import main
from capls_da.data import load_features, save_features, save_split
from capls_da.errors import NonConvergence
from capls_da.zsl import make_split, split_target


@pytest.fixture
def synth_dir(tmp_path: Path) -> Path:
    out_dir = tmp_path / "synth"
    exit_code = main(
        [
            "synth",
            "--classes",
            "4",
            "--per-class-source",
            "12",
            "--per-class-target",
            "12",
            "--dim",
            "8",
            "--class-sep",
            "10",
            "--rotation",
            "0.3",
            "--out-dir",
            str(out_dir),
        ]
    )
    assert exit_code == 0
    return out_dir


def _uda_args(synth_dir: Path, out: Path, *extra: str) -> list[str]:
    return [
        "uda",
        "--source-features",
        str(synth_dir / "source_features.csv"),
        "--source-labels",
        str(synth_dir / "source_labels.txt"),
        "--target-features",
        str(synth_dir / "target_features.csv"),
        "--target-labels",
        str(synth_dir / "target_labels.txt"),
        "--dim",
        "4",
        "--iters",
        "3",
        "--out",
        str(out),
        *extra,
    ]


def _read(path: Path) -> dict[str, Any]:
    return json.loads(path.read_text())


def test_synth_writes_four_files(synth_dir: Path) -> None:
    assert sorted(p.name for p in synth_dir.iterdir()) == [
        "source_features.csv",
        "source_labels.txt",
        "target_features.csv",
        "target_labels.txt",
    ]


def test_synth_binary_format(tmp_path: Path) -> None:
    exit_code = main(["synth", "--classes", "2", "--dim", "3", "--format", "bin", "--out-dir", str(tmp_path)])

    assert exit_code == 0
    assert (tmp_path / "source_features.bin").read_bytes()[:4] == b"CPLS"


def test_synth_invalid_config_exits_2(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    exit_code = main(["synth", "--dim", "1", "--rotation", "0.5", "--out-dir", str(tmp_path)])

    assert exit_code == 2
    assert "dim >= 2" in capsys.readouterr().err


def test_uda_writes_report_and_prints_accuracy(
    synth_dir: Path,
    tmp_path: Path,
    capsys: pytest.CaptureFixture[str],
) -> None:
    capsys.readouterr()
    out = tmp_path / "uda.json"

    exit_code = main(_uda_args(synth_dir, out))

    assert exit_code == 0
    report = _read(out)
    assert len(report["trace"]) == 4
    assert report["config"]["dim"] == 4
    assert report["config"]["solver"]["ridge"] == 1.0
    assert report["metrics"]["subspace_dim"] == 4
    assert set(report["versions"]) >= {"capls_da", "numpy", "scipy", "pydantic"}
    printed = capsys.readouterr().out.strip()
    assert printed == f"accuracy={report['metrics']['final_accuracy']:.4f}"


def test_uda_metrics_are_deterministic(synth_dir: Path, tmp_path: Path) -> None:
    first, second = tmp_path / "a.json", tmp_path / "b.json"

    assert main(_uda_args(synth_dir, first)) == 0
    assert main(_uda_args(synth_dir, second)) == 0

    assert json.dumps(_read(first)["metrics"]) == json.dumps(_read(second)["metrics"])


def test_uda_echoes_environment_and_flag_overrides(
    synth_dir: Path,
    tmp_path: Path,
    monkeypatch: pytest.MonkeyPatch,
) -> None:
    monkeypatch.setenv("CAPLS_RIDGE", "0.5")
    monkeypatch.setenv("CAPLS_TEMPERATURE", "2.0")
    out = tmp_path / "uda.json"

    exit_code = main(_uda_args(synth_dir, out, "--temperature", "0.25", "--with-baselines", "--selection", "all"))

    assert exit_code == 0
    report = _read(out)
    assert report["config"]["solver"]["ridge"] == 0.5
    assert report["config"]["solver"]["temperature"] == 0.25
    assert report["config"]["selection"] == "all"
    assert "source_only" in report["metrics"]["baselines"]


def test_uda_missing_file_exits_2(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    missing = tmp_path / "nope.csv"

    exit_code = main(
        [
            "uda",
            "--source-features",
            str(missing),
            "--source-labels",
            str(missing),
            "--target-features",
            str(missing),
            "--out",
            str(tmp_path / "r.json"),
        ]
    )

    assert exit_code == 2
    assert "nope.csv" in capsys.readouterr().err


def test_uda_rerun_from_report_config_reproduces_metrics(
    synth_dir: Path,
    tmp_path: Path,
    monkeypatch: pytest.MonkeyPatch,
) -> None:
    first = tmp_path / "first.json"
    assert main(_uda_args(synth_dir, first, "--ridge", "0.5", "--with-baselines", "--zscore")) == 0
    config = _read(first)["config"]
    solver = config["solver"]
    monkeypatch.setenv("CAPLS_RESIDUAL_TOL", repr(solver["residual_tol"]))
    monkeypatch.setenv("CAPLS_SYMMETRY_TOL", repr(solver["symmetry_tol"]))
    second = tmp_path / "second.json"

    options = {
        "--source-features": config["source_features"],
        "--source-labels": config["source_labels"],
        "--target-features": config["target_features"],
        "--target-labels": config["target_labels"],
        "--dim": str(config["dim"]),
        "--iters": str(config["iters"]),
        "--seed": str(config["seed"]),
        "--projection": config["projection"],
        "--selection": config["selection"],
        "--ridge": repr(solver["ridge"]),
        "--temperature": repr(solver["temperature"]),
        "--out": str(second),
    }
    argv = ["uda", *(part for item in options.items() for part in item)]
    if config["zscore"]:
        argv.append("--zscore")
    if config["with_baselines"]:
        argv.append("--with-baselines")

    assert main(argv) == 0

    assert json.dumps(_read(second)["metrics"]) == json.dumps(_read(first)["metrics"])
    assert _read(second)["config"]["solver"] == solver


def test_uda_undecodable_features_exit_2(synth_dir: Path, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    broken = tmp_path / "broken.csv"
    broken.write_bytes(b"1.0,2.0\n\xff\xfe,3\n")
    args = _uda_args(synth_dir, tmp_path / "r.json")
    args[args.index("--source-features") + 1] = str(broken)

    exit_code = main(args)

    assert exit_code == 2
    err = capsys.readouterr().err
    assert f"{broken}:2:" in err
    assert "UTF-8" in err

def test_uda_rejects_non_positive_ridge(synth_dir: Path, tmp_path: Path) -> None:
    assert main(_uda_args(synth_dir, tmp_path / "r.json", "--ridge", "0")) == 2


def test_numerical_failure_exits_3(
    synth_dir: Path,
    tmp_path: Path,
    monkeypatch: pytest.MonkeyPatch,
    capsys: pytest.CaptureFixture[str],
) -> None:
    def failing_run_uda(*args: object, **kwargs: object) -> None:
        raise NonConvergence("Generalized eigenpair residual 1e-3 exceeds tolerance 1e-6.")

    monkeypatch.setattr("capls_da.__main__.run_uda", failing_run_uda)

    exit_code = main(_uda_args(synth_dir, tmp_path / "r.json"))

    assert exit_code == 3
    assert "residual" in capsys.readouterr().err
    assert not (tmp_path / "r.json").exists()


def _zsl_base(synth_dir: Path, out: Path) -> list[str]:
    return [
        "zsl",
        "--source-features",
        str(synth_dir / "source_features.csv"),
        "--source-labels",
        str(synth_dir / "source_labels.txt"),
        "--dim",
        "4",
        "--out",
        str(out),
    ]


def test_zsl_over_seeded_splits(synth_dir: Path, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    capsys.readouterr()
    out = tmp_path / "zsl.json"

    exit_code = main(
        [
            *_zsl_base(synth_dir, out),
            "--target-features",
            str(synth_dir / "target_features.csv"),
            "--target-labels",
            str(synth_dir / "target_labels.txt"),
            "--known-classes",
            "2",
            "--split-seeds",
            "0,1,2",
            "--with-baselines",
        ]
    )

    assert exit_code == 0
    report = _read(out)
    assert [entry["seed"] for entry in report["trace"]] == [0, 1, 2]
    assert all("baseline_1nn" in entry for entry in report["trace"])
    assert set(report["metrics"]["aggregate"]) == {"acc_known", "acc_unseen", "harmonic"}
    assert capsys.readouterr().out.startswith("harmonic=")


def test_zsl_from_split_file(synth_dir: Path, tmp_path: Path) -> None:
    labels = np.loadtxt(synth_dir / "target_labels.txt", dtype=np.int64)
    split_path = tmp_path / "split.json"
    save_split(make_split(labels, 3, seed=4), split_path)
    out = tmp_path / "zsl.json"

    exit_code = main(
        [
            *_zsl_base(synth_dir, out),
            "--target-features",
            str(synth_dir / "target_features.csv"),
            "--target-labels",
            str(synth_dir / "target_labels.txt"),
            "--split-file",
            str(split_path),
        ]
    )

    assert exit_code == 0
    report = _read(out)
    assert len(report["trace"]) == 1
    assert report["trace"][0]["seed"] == 4
    assert report["metrics"]["aggregate"]["harmonic"]["sem"] == 0.0


def test_zsl_from_explicit_train_and_test_files(synth_dir: Path, tmp_path: Path) -> None:
    target = load_features(synth_dir / "target_features.csv", synth_dir / "target_labels.txt")
    train, test = split_target(target, make_split(target.labels, 2, seed=0))
    assert train is not None
    save_features(train, tmp_path / "tt.csv", tmp_path / "tt.txt")
    save_features(test, tmp_path / "te.csv", tmp_path / "te.txt")
    out = tmp_path / "zsl.json"

    exit_code = main(
        [
            *_zsl_base(synth_dir, out),
            "--target-train-features",
            str(tmp_path / "tt.csv"),
            "--target-train-labels",
            str(tmp_path / "tt.txt"),
            "--target-test-features",
            str(tmp_path / "te.csv"),
            "--target-test-labels",
            str(tmp_path / "te.txt"),
        ]
    )

    assert exit_code == 0
    entry = _read(out)["trace"][0]
    assert len(entry["known_classes"]) == 2
    assert len(entry["unseen_classes"]) == 2


def test_zsl_explicit_files_need_the_train_split(synth_dir: Path, tmp_path: Path) -> None:
    exit_code = main(
        [
            *_zsl_base(synth_dir, tmp_path / "zsl.json"),
            "--target-test-features",
            str(synth_dir / "target_features.csv"),
            "--target-test-labels",
            str(synth_dir / "target_labels.txt"),
        ]
    )

    assert exit_code == 2


def test_zsl_explicit_files_without_unseen_classes_exit_2(synth_dir: Path, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    target = load_features(synth_dir / "target_features.csv", synth_dir / "target_labels.txt")
    _, test = split_target(target, make_split(target.labels, 2, seed=0))
    save_features(test, tmp_path / "te.csv", tmp_path / "te.txt")

    exit_code = main(
        [
            *_zsl_base(synth_dir, tmp_path / "zsl.json"),
            "--target-train-features",
            str(synth_dir / "target_features.csv"),
            "--target-train-labels",
            str(synth_dir / "target_labels.txt"),
            "--target-test-features",
            str(tmp_path / "te.csv"),
            "--target-test-labels",
            str(tmp_path / "te.txt"),
        ]
    )

    assert exit_code == 2
    assert "unseen" in capsys.readouterr().err
    assert not (tmp_path / "zsl.json").exists()


def test_zsl_split_file_without_unseen_classes_exits_2(synth_dir: Path, tmp_path: Path) -> None:
    split_path = tmp_path / "split.json"
    split_path.write_text(
        json.dumps({"known_classes": [0, 1, 2, 3], "unseen_classes": [], "target_train_rows": [0, 1], "target_test_rows": [2, 3]})
    )

    exit_code = main(
        [
            *_zsl_base(synth_dir, tmp_path / "zsl.json"),
            "--target-features",
            str(synth_dir / "target_features.csv"),
            "--target-labels",
            str(synth_dir / "target_labels.txt"),
            "--split-file",
            str(split_path),
        ]
    )

    assert exit_code == 2
    assert not (tmp_path / "zsl.json").exists()

def test_zsl_all_classes_known_exits_2(synth_dir: Path, tmp_path: Path) -> None:
    exit_code = main(
        [
            *_zsl_base(synth_dir, tmp_path / "zsl.json"),
            "--target-features",
            str(synth_dir / "target_features.csv"),
            "--target-labels",
            str(synth_dir / "target_labels.txt"),
            "--known-classes",
            "4",
        ]
    )

    assert exit_code == 2


def test_zsl_requires_target_files(synth_dir: Path, tmp_path: Path) -> None:
    assert main(_zsl_base(synth_dir, tmp_path / "zsl.json")) == 2


def test_main_without_command_is_a_usage_error() -> None:
    with pytest.raises(SystemExit) as info:
        main([])

    assert info.value.code == 2


def test_unknown_log_level_is_a_usage_error(tmp_path: Path) -> None:
    with pytest.raises(SystemExit) as info:
        main(["--log-level", "bogus", "synth", "--classes", "2", "--dim", "3", "--out-dir", str(tmp_path)])

    assert info.value.code == 2


def test_unknown_log_level_in_environment_falls_back(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("CAPLS_LOG_LEVEL", "bogus")

    assert main(["synth", "--classes", "2", "--dim", "3", "--out-dir", str(tmp_path)]) == 0


def test_log_level_is_case_insensitive(tmp_path: Path) -> None:
    assert main(["--log-level", "debug", "synth", "--classes", "2", "--dim", "3", "--out-dir", str(tmp_path)]) == 0
