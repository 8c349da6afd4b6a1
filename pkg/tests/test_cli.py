import hashlib
import json

import pytest

from changedet.cli import main
from changedet.imagery import load_manifest


def run(argv):
    return main(argv)


@pytest.fixture(scope="module")
def tiny_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    code = run(
        [
            "generate", "--out", str(data), "--num-series", "8",
            "--changed-fraction", "0.5", "--seed", "7",
            "--height", "16", "--width", "16", "--n-images", "12",
            "--span-months", "40", "--cloud-probability", "0.1",
        ]
    )
    assert code == 0
    return root, data


@pytest.fixture(scope="module")
def trained_model(tiny_dataset):
    root, data = tiny_dataset
    ckpt = root / "model.npz"
    code = run(
        [
            "train", "--data", str(data), "--out", str(ckpt),
            "--epochs", "1", "--triplets-per-series", "2", "--context", "2",
            "--seed", "1", "--report", str(root / "train_report.json"),
        ]
    )
    assert code == 0
    return ckpt


class TestGenerate:
    def test_manifest_contents(self, tiny_dataset):
        _, data = tiny_dataset
        manifest = load_manifest(data)
        assert len(manifest.entries) == 8
        assert manifest.format == 1
        changed = [e for e in manifest.entries if e.changed]
        assert changed and all(e.event is not None for e in changed)
        for entry in manifest.entries:
            ppms = sorted((data / entry.directory).glob("*.ppm"))
            assert len(ppms) == entry.n

    def test_same_seed_bit_identical(self, tmp_path):
        args = [
            "generate", "--num-series", "3", "--seed", "5",
            "--height", "8", "--width", "8", "--n-images", "6", "--span-months", "20",
        ]
        assert run(args + ["--out", str(tmp_path / "a")]) == 0
        assert run(args + ["--out", str(tmp_path / "b")]) == 0

        def digest(d):
            h = hashlib.sha256()
            for p in sorted(d.rglob("*")):
                if p.is_file():
                    h.update(p.name.encode())
                    h.update(p.read_bytes())
            return h.hexdigest()

        assert digest(tmp_path / "a") == digest(tmp_path / "b")

    def test_changed_fraction_recorded(self, tmp_path):
        assert (
            run(
                [
                    "generate", "--out", str(tmp_path / "d"), "--num-series", "30",
                    "--changed-fraction", "0.33", "--seed", "9",
                    "--height", "8", "--width", "8", "--n-images", "6",
                    "--span-months", "20",
                ]
            )
            == 0
        )
        manifest = load_manifest(tmp_path / "d")
        n_changed = sum(1 for e in manifest.entries if e.changed)
        # binomial(30, 0.33): a loose sanity corridor
        assert 3 <= n_changed <= 18


class TestPipeline:
    def test_score_writes_one_row_per_series(self, tiny_dataset, trained_model):
        root, data = tiny_dataset
        scores = root / "scores.csv"
        per_query = root / "series_scores.csv"
        code = run(
            [
                "score", "--model", str(trained_model), "--data", str(data),
                "--measure", "pivot", "--out", str(scores),
                "--per-query-out", str(per_query),
            ]
        )
        assert code == 0
        lines = scores.read_text().strip().splitlines()
        assert lines[0] == "series_id,measure,score,pivot_index,pivot_month"
        assert len(lines) == 9  # header + 8 series
        assert per_query.exists()

    def test_evaluate_prints_report_json(self, tiny_dataset, trained_model, capsys):
        root, data = tiny_dataset
        scores = root / "scores2.csv"
        assert (
            run(
                [
                    "score", "--model", str(trained_model), "--data", str(data),
                    "--out", str(scores),
                ]
            )
            == 0
        )
        capsys.readouterr()  # drop the score command's summary line
        code = run(
            ["evaluate", "--scores", str(scores), "--labels", str(data / "manifest.json")]
        )
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert set(report) >= {"auroc", "max_f1", "best_threshold", "n_pos", "n_neg"}
        assert 0.0 <= report["auroc"] <= 1.0

    def test_ablate_writes_table(self, tiny_dataset, tmp_path):
        _, data = tiny_dataset
        out = tmp_path / "ablation.csv"
        code = run(
            [
                "ablate", "--data", str(data), "--eval-data", str(data),
                "--contexts", "1,2", "--measures", "pivot,spearman",
                "--epochs", "1", "--triplets-per-series", "1",
                "--seed", "3", "--out", str(out),
            ]
        )
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "context,measure,auroc,max_f1"
        assert len(lines) == 5

    def test_localize_writes_artifacts(self, tiny_dataset, tmp_path):
        _, data = tiny_dataset
        out = tmp_path / "loc"
        code = run(
            [
                "localize", "--data", str(data), "--out-dir", str(out),
                "--patch-edge", "8", "--epochs", "1", "--triplets-per-series", "1",
                "--context", "2", "--seed", "2",
            ]
        )
        assert code == 0
        assert (out / "full_model.npz").exists()
        assert (out / "patch_model.npz").exists()
        reports = json.loads((out / "reports.json").read_text())
        assert set(reports) == {"full", "patch", "kept_ids"}
        maps = list((out / "maps").glob("*_overlay.ppm"))
        assert len(maps) == 8


class TestErrors:
    def test_unknown_flag_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["generate", "--no-such-flag"])
        assert exc.value.code == 2

    def test_missing_required_flag_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["train", "--data", "somewhere"])
        assert exc.value.code == 2

    def test_nonexistent_input_returns_1(self, capsys):
        assert main(["train", "--data", "/no/such/dir", "--out", "/tmp/x.npz"]) == 1
        assert "error:" in capsys.readouterr().err

    def test_unknown_subcommand_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2
