import json

import numpy as np
import pytest

from perigen.cli import main
from perigen.datagen import load_dataset
from perigen.evaluate import read_report
from perigen.pgraph import decompose


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    """One tiny end-to-end pipeline shared by the CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    data = root / "data.jsonl"
    assert main([
        "gen-data", "--units", "triangle,grid", "--count-per-unit", "6",
        "--m-max", "3", "--pattern", "chain", "--seed", "3", "--out", str(data),
    ]) == 0
    config = root / "config.json"
    config.write_text(json.dumps({
        "epochs": 3, "batch_size": 4, "seed": 1, "checkpoint_every": 2,
        "model": {"gin_layers": 1, "clusters": 2, "local_dim": 3,
                  "global_dim": 3, "hidden": 4, "n_max": 6, "m_max": 3},
    }))
    run_dir = root / "run"
    assert main(["train", "--data", str(data), "--config", str(config), "--out", str(run_dir)]) == 0
    return root, data, config, run_dir


class TestGenData:
    def test_deterministic_output(self, tmp_path):
        args = ["gen-data", "--units", "triangle", "--count-per-unit", "4",
                "--m-max", "4", "--pattern", "chain", "--seed", "7"]
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        assert main(args + ["--out", str(a)]) == 0
        assert main(args + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
        assert (tmp_path / "a.jsonl.manifest.json").exists()

    def test_manifest_records_flags(self, tmp_path):
        out = tmp_path / "d.jsonl"
        main(["gen-data", "--units", "grid", "--count-per-unit", "2", "--seed", "5", "--out", str(out)])
        manifest = json.loads((tmp_path / "d.jsonl.manifest.json").read_text())
        assert manifest["subcommand"] == "gen-data"
        assert manifest["resolved"]["seed"] == 5

    def test_unknown_unit_fails(self, tmp_path, capsys):
        rc = main(["gen-data", "--units", "heptagon", "--out", str(tmp_path / "x.jsonl")])
        assert rc == 1
        assert "error:" in capsys.readouterr().err


class TestTrainCli:
    def test_outputs_exist(self, small_run):
        _, _, _, run_dir = small_run
        assert (run_dir / "ckpt_final.npz").exists()
        assert (run_dir / "ckpt_epoch_0002.npz").exists()
        assert (run_dir / "train_log.csv").exists()
        assert (run_dir / "manifest.json").exists()
        log = (run_dir / "train_log.csv").read_text().splitlines()
        assert len(log) == 4  # header + 3 epochs

    def test_missing_data_file(self, tmp_path, capsys):
        rc = main(["train", "--data", str(tmp_path / "nope.jsonl"), "--out", str(tmp_path / "run")])
        assert rc == 1
        assert "error:" in capsys.readouterr().err


class TestSampleCli:
    def test_threshold_deterministic(self, small_run, tmp_path):
        _, _, _, run_dir = small_run
        args = ["sample", "--ckpt", str(run_dir / "ckpt_final.npz"), "--count", "5",
                "--mode", "threshold", "--seed", "2"]
        a, b = tmp_path / "sa.jsonl", tmp_path / "sb.jsonl"
        assert main(args + ["--out", str(a)]) == 0
        assert main(args + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_samples_decompose_cleanly(self, small_run, tmp_path):
        _, _, _, run_dir = small_run
        out = tmp_path / "samples.jsonl"
        assert main(["sample", "--ckpt", str(run_dir / "ckpt_final.npz"), "--count", "8",
                     "--mode", "bernoulli", "--seed", "4", "--out", str(out)]) == 0
        records = load_dataset(out)
        assert len(records) == 8
        for rec in records:
            decompose(rec.graph(), rec.n)


class TestEvalCli:
    def test_self_eval_near_zero(self, small_run, tmp_path, capsys):
        _, data, _, _ = small_run
        report_path = tmp_path / "report.json"
        assert main(["eval", "--ref", str(data), "--gen", str(data),
                     "--train-set", str(data), "--out", str(report_path)]) == 0
        report = read_report(report_path)
        assert report.kld_cluster <= 1e-9
        assert report.novelty == 0.0


class TestTraverseCli:
    def test_traversal_files(self, small_run, tmp_path):
        _, _, _, run_dir = small_run
        out = tmp_path / "trav.jsonl"
        assert main(["traverse", "--ckpt", str(run_dir / "ckpt_final.npz"), "--latent", "local",
                     "--dim", "1", "--values=-2,0,2", "--out", str(out)]) == 0
        assert len(load_dataset(out)) == 3
        stats = (tmp_path / "trav.jsonl.stats.csv").read_text().splitlines()
        assert stats[0] == "value,n,m,clustering,density"
        assert len(stats) == 4


class TestConverters:
    def test_decompose_then_assemble_roundtrip(self, small_run, tmp_path):
        _, data, _, _ = small_run
        dec = tmp_path / "dec.jsonl"
        asm = tmp_path / "asm.jsonl"
        assert main(["decompose", "--in", str(data), "--n", "3", "--out", str(dec)]) == 1  # mixed units: grid has n=4
        triangle_only = tmp_path / "tri.jsonl"
        main(["gen-data", "--units", "triangle", "--count-per-unit", "3",
              "--m-max", "3", "--seed", "9", "--out", str(triangle_only)])
        assert main(["decompose", "--in", str(triangle_only), "--n", "3", "--out", str(dec)]) == 0
        assert main(["assemble", "--in", str(dec), "--pad", "18", "--out", str(asm)]) == 0
        orig = load_dataset(triangle_only)
        back = load_dataset(asm)
        for a, b in zip(orig, back):
            assert np.array_equal(a.graph().stripped, b.graph().stripped)


class TestBfsStabilityCli:
    def test_prints_table(self, small_run, capsys):
        _, data, _, _ = small_run
        assert main(["bfs-stability", "--data", str(data), "--perms", "4", "--seed", "0"]) == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0] == "scheme,spearman,kendall"
        assert out[1].startswith("bfs,") and out[2].startswith("random,")


class TestErrors:
    def test_unknown_flag_nonzero_exit(self):
        with pytest.raises(SystemExit) as exc:
            main(["gen-data", "--frobnicate", "1"])
        assert exc.value.code != 0

    def test_missing_subcommand(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code != 0
