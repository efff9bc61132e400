"""Tests for the command-line interface: artifacts, exit codes, determinism."""

import csv
import json
from pathlib import Path

import pytest

from crowdirt.cli import ALL_STRATEGIES, main

SIM_CONFIG = {
    "n_participants": 6,
    "n_images": 8,
    "points_per_image": 4,
    "n_cameras": 2,
    "n_occasions": 2,
    "assignments_per_point": 4,
}


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """simulate -> fit once per module; several tests read the artifacts."""
    root = tmp_path_factory.mktemp("pipeline")
    cfg = write_config(root, SIM_CONFIG)
    rc = main(["simulate", "--config", cfg, "--out-dir", str(root), "--seed", "3"])
    assert rc == 0
    rc = main(
        [
            "fit",
            "--input", str(root / "data.csv"),
            "--out-dir", str(root),
            "--seed", "3",
            "--chains", "2",
            "--warmup", "200",
            "--samples", "200",
            "--gold-fraction", "0.5",
        ]
    )
    assert rc in (0, 2)  # convergence warnings are acceptable on this tiny run
    return root


class TestSimulate:
    def test_artifacts_and_determinism(self, tmp_path):
        cfg = write_config(tmp_path, SIM_CONFIG)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["simulate", "--config", cfg, "--out-dir", str(out1), "--seed", "1"]) == 0
        assert main(["simulate", "--config", cfg, "--out-dir", str(out2), "--seed", "1"]) == 0
        assert (out1 / "data.csv").read_text() == (out2 / "data.csv").read_text()
        assert (out1 / "truth.json").read_text() == (out2 / "truth.json").read_text()
        with open(out1 / "data.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 8 * 4 * 4
        assert set(rows[0]) == {
            "participant_id", "image_id", "point_id", "camera_id",
            "timestamp", "answer", "duration_secs", "truth",
        }

    def test_seed_changes_output(self, tmp_path):
        cfg = write_config(tmp_path, SIM_CONFIG)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        main(["simulate", "--config", cfg, "--out-dir", str(out1), "--seed", "1"])
        main(["simulate", "--config", cfg, "--out-dir", str(out2), "--seed", "2"])
        assert (out1 / "data.csv").read_text() != (out2 / "data.csv").read_text()

    def test_unknown_config_key(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"n_participants": 5, "bogus_key": 1})
        assert main(["simulate", "--config", cfg, "--out-dir", str(tmp_path)]) == 1
        assert "error:" in capsys.readouterr().err


class TestFit:
    def test_artifacts(self, pipeline):
        for name in (
            "draws_chain0.csv", "draws_chain1.csv", "summary.json",
            "diagnostics.json", "groups.csv", "weights.csv", "manifest.json",
        ):
            assert (pipeline / name).exists(), name
        manifest = json.loads((pipeline / "manifest.json").read_text())
        assert set(manifest) >= {"gold_images", "eval_images", "seed", "rhat_warnings"}
        gold, ev = set(manifest["gold_images"]), set(manifest["eval_images"])
        assert gold and ev and not gold & ev
        diag = json.loads((pipeline / "diagnostics.json").read_text())
        assert set(diag) == {"rhat", "ess", "accept_rates"}
        with open(pipeline / "draws_chain0.csv") as fh:
            header = fh.readline().strip().split(",")
        assert header[0] == "iteration"
        assert any(h.startswith("theta[") for h in header)

    def test_groups_and_weights_files(self, pipeline):
        with open(pipeline / "weights.csv") as fh:
            rows = list(csv.DictReader(fh))
        total = sum(float(r["weight"]) for r in rows)
        assert total == pytest.approx(1.0, abs=1e-9)
        with open(pipeline / "groups.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert all(r["group"] in ("beginner", "competent", "experienced", "expert") for r in rows)

    def test_determinism(self, pipeline, tmp_path):
        rc = main(
            [
                "fit",
                "--input", str(pipeline / "data.csv"),
                "--out-dir", str(tmp_path),
                "--seed", "3",
                "--chains", "2",
                "--warmup", "200",
                "--samples", "200",
                "--gold-fraction", "0.5",
            ]
        )
        assert rc in (0, 2)
        assert (tmp_path / "draws_chain0.csv").read_text() == (pipeline / "draws_chain0.csv").read_text()
        assert (tmp_path / "summary.json").read_text() == (pipeline / "summary.json").read_text()

    def test_missing_input(self, tmp_path, capsys):
        rc = main(["fit", "--input", str(tmp_path / "nope.csv"), "--out-dir", str(tmp_path)])
        assert rc == 1
        assert "input file not found" in capsys.readouterr().err

    def test_bad_gold_fraction(self, pipeline, capsys):
        rc = main(
            ["fit", "--input", str(pipeline / "data.csv"), "--out-dir", str(pipeline),
             "--gold-fraction", "1.5"]
        )
        assert rc == 1
        assert "gold fraction" in capsys.readouterr().err


class TestConsensus:
    def test_all_strategies(self, pipeline):
        rc = main(
            [
                "consensus",
                "--input", str(pipeline / "data.csv"),
                "--out-dir", str(pipeline),
                "--strategies", ",".join(ALL_STRATEGIES),
            ]
        )
        assert rc == 0
        for strategy in ALL_STRATEGIES:
            path = pipeline / f"consensus_{strategy}.csv"
            assert path.exists()
            with open(path) as fh:
                rows = list(csv.DictReader(fh))
            assert rows, strategy
            assert all(r["label"] in ("present", "absent") for r in rows)

    def test_labels_restricted_to_eval_images(self, pipeline):
        manifest = json.loads((pipeline / "manifest.json").read_text())
        eval_images = set(manifest["eval_images"])
        with open(pipeline / "consensus_consensus.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert {r["image_id"] for r in rows} <= eval_images

    def test_sorted_output(self, pipeline):
        with open(pipeline / "consensus_weighted.csv") as fh:
            rows = list(csv.DictReader(fh))
        keys = [(r["image_id"], r["point_id"]) for r in rows]
        assert keys == sorted(keys)

    def test_weighted_without_fit_artifacts(self, tmp_path, capsys):
        cfg = write_config(tmp_path, SIM_CONFIG)
        main(["simulate", "--config", cfg, "--out-dir", str(tmp_path), "--seed", "1"])
        rc = main(
            ["consensus", "--input", str(tmp_path / "data.csv"),
             "--out-dir", str(tmp_path), "--strategies", "weighted"]
        )
        assert rc == 1
        assert "fit artifacts required" in capsys.readouterr().err

    def test_raw_without_fit_artifacts(self, tmp_path):
        cfg = write_config(tmp_path, SIM_CONFIG)
        main(["simulate", "--config", cfg, "--out-dir", str(tmp_path), "--seed", "1"])
        rc = main(
            ["consensus", "--input", str(tmp_path / "data.csv"),
             "--out-dir", str(tmp_path), "--strategies", "raw,consensus"]
        )
        assert rc == 0
        assert (tmp_path / "consensus_raw.csv").exists()

    def test_unknown_strategy(self, pipeline, capsys):
        rc = main(
            ["consensus", "--input", str(pipeline / "data.csv"),
             "--out-dir", str(pipeline), "--strategies", "plurality"]
        )
        assert rc == 1
        assert "unknown strategy" in capsys.readouterr().err

    def test_empty_strategies(self, pipeline, capsys):
        rc = main(
            ["consensus", "--input", str(pipeline / "data.csv"),
             "--out-dir", str(pipeline), "--strategies", " , "]
        )
        assert rc == 1
        assert "empty" in capsys.readouterr().err


class TestEvaluate:
    def test_report(self, pipeline):
        # consensus files exist from TestConsensus; regenerate to be order-safe
        main(
            ["consensus", "--input", str(pipeline / "data.csv"),
             "--out-dir", str(pipeline), "--strategies", ",".join(ALL_STRATEGIES)]
        )
        rc = main(
            ["evaluate", "--input", str(pipeline / "data.csv"),
             "--out-dir", str(pipeline), "--strategies", ",".join(ALL_STRATEGIES)]
        )
        assert rc == 0
        with open(pipeline / "report.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert [r["method"] for r in rows] == list(ALL_STRATEGIES)
        for r in rows:
            assert 0.0 <= float(r["acc"]) <= 1.0
            assert int(r["TP"]) + int(r["FP"]) + int(r["TN"]) + int(r["FN"]) == int(r["n"])

    def test_missing_consensus_file(self, pipeline, tmp_path, capsys):
        rc = main(
            ["evaluate", "--input", str(pipeline / "data.csv"),
             "--out-dir", str(tmp_path), "--strategies", "consensus"]
        )
        assert rc == 1
        assert "consensus file missing" in capsys.readouterr().err


class TestCluster:
    def test_cluster_from_summary(self, pipeline, tmp_path):
        # copy summary.json into a fresh dir and recluster there
        (tmp_path / "summary.json").write_text((pipeline / "summary.json").read_text())
        rc = main(
            ["cluster", "--input", str(pipeline / "data.csv"), "--out-dir", str(tmp_path)]
        )
        assert rc == 0
        with open(tmp_path / "groups.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 6
        assert all(int(r["n_points"]) > 0 for r in rows)

    def test_missing_summary(self, tmp_path, capsys):
        rc = main(["cluster", "--out-dir", str(tmp_path)])
        assert rc == 1
        assert "fit artifact missing" in capsys.readouterr().err
