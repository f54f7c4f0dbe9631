import json
import struct

import numpy as np
import pytest

from spdnn import dataio
from spdnn.cli import main


def run_cli(*argv):
    return main([str(a) for a in argv])


class TestGenerate:
    def test_small_butterfly(self, tmp_path):
        code = run_cli("generate", "--radices", "2,2", "--layers", "2",
                       "--kron-width", "1", "--out", tmp_path)
        assert code == 0
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["neurons"] == 4 and manifest["layers"] == 2
        for name in manifest["files"]:
            w = dataio.read_layer_tsv(tmp_path / name, 4)
            assert w.nnz == 8
        assert len(manifest["files"]) == 2

    def test_challenge_shape_manifest(self, tmp_path):
        code = run_cli("generate", "--radices", "2,2,2,2,2,2", "--layers", "120",
                       "--kron-width", "16", "--out", tmp_path / "net")
        assert code == 0
        manifest = json.loads((tmp_path / "net" / "manifest.json").read_text())
        assert manifest["neurons"] == 1024
        assert manifest["n_connections"] == 3_932_160

    def test_invalid_radix_exits_2(self, tmp_path, capsys):
        code = run_cli("generate", "--radices", "1,2", "--layers", "2",
                       "--out", tmp_path)
        assert code == 2
        assert "radices" in capsys.readouterr().err

    def test_neurons_cross_check(self, tmp_path):
        code = run_cli("generate", "--radices", "2,2", "--layers", "2",
                       "--neurons", "999", "--out", tmp_path)
        assert code == 2

    def test_idempotent_outputs(self, tmp_path):
        for sub in ("a", "b"):
            assert run_cli("generate", "--radices", "3,2", "--layers", "3",
                           "--out", tmp_path / sub) == 0
        for name in json.loads((tmp_path / "a" / "manifest.json").read_text())["files"]:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


class TestPreprocess:
    def _write_idx(self, path, pixels):
        with open(path, "wb") as f:
            f.write(struct.pack(">IIII", 0x803, pixels.shape[0],
                                pixels.shape[1], pixels.shape[2]))
            f.write(pixels.tobytes())

    def test_all_zero_gives_empty_file(self, tmp_path):
        idx = tmp_path / "z.idx"
        self._write_idx(idx, np.zeros((2, 28, 28), np.uint8))
        out = tmp_path / "in.tsv"
        assert run_cli("preprocess", "--images", idx, "--side", "32",
                       "--out", out) == 0
        assert out.read_bytes() == b""

    def test_saturated_gives_full_file(self, tmp_path):
        idx = tmp_path / "f.idx"
        self._write_idx(idx, np.full((1, 28, 28), 255, np.uint8))
        out = tmp_path / "in.tsv"
        assert run_cli("preprocess", "--images", idx, "--side", "32",
                       "--out", out) == 0
        m = dataio.read_input_tsv(out, 1024)
        assert m.nnz == 1024

    def test_bad_idx_exits_3(self, tmp_path):
        idx = tmp_path / "bad.idx"
        idx.write_bytes(b"\x00" * 16)
        assert run_cli("preprocess", "--images", idx, "--side", "32",
                       "--out", tmp_path / "o.tsv") == 3


class TestRun:
    def test_tiny_synthetic_run(self, tmp_path):
        code = run_cli("run", "--radices", "2,2,2,2,2", "--layers", "4",
                       "--inputs", "synthetic:16:0.5", "--weight", "0.2",
                       "--bias", "-0.1", "--out", tmp_path)
        assert code == 0
        lines = (tmp_path / "results.jsonl").read_text().splitlines()
        assert len(lines) == 1
        rec = json.loads(lines[0])
        assert rec["correct"] is True
        assert rec["n_ops"] == 16 * rec["n_connections"]
        truth = dataio.read_categories(tmp_path / "truth-categories.tsv")
        computed = dataio.read_categories(tmp_path / "categories.tsv")
        assert truth == computed

    def test_repetitions_emit_one_line_each(self, tmp_path):
        code = run_cli("run", "--radices", "2,2", "--layers", "2",
                       "--inputs", "synthetic:8:0.5", "--repetitions", "3",
                       "--out", tmp_path)
        assert code == 0
        assert len((tmp_path / "results.jsonl").read_text().splitlines()) == 3

    def test_sparse_representation(self, tmp_path):
        code = run_cli("run", "--radices", "2,2", "--layers", "3",
                       "--inputs", "synthetic:8:0.5", "--representation", "sparse",
                       "--weight", "0.3", "--bias", "-0.05", "--out", tmp_path)
        assert code == 0
        rec = json.loads((tmp_path / "results.jsonl").read_text().splitlines()[0])
        assert rec["representation"] == "sparse"

    def test_input_file_width_mismatch_exits_3(self, tmp_path):
        inputs = tmp_path / "in.tsv"
        dataio.write_input_tsv([np.array([1, 900])], inputs)  # col 900 > width 32
        code = run_cli("run", "--radices", "2,2,2,2,2", "--layers", "2",
                       "--inputs", inputs, "--out", tmp_path)
        assert code == 3

    def test_input_file_round(self, tmp_path):
        inputs = tmp_path / "in.tsv"
        dataio.write_input_tsv([np.array([1, 2, 3]), np.array([4])], inputs)
        code = run_cli("run", "--radices", "2,2", "--layers", "2",
                       "--inputs", inputs, "--weight", "0.5", "--bias", "-0.1",
                       "--out", tmp_path)
        assert code == 0

    def test_bad_synthetic_spec_exits_2(self, tmp_path):
        code = run_cli("run", "--radices", "2,2", "--layers", "2",
                       "--inputs", "synthetic:nope", "--out", tmp_path)
        assert code == 2

    def test_deterministic_categories_across_seeded_runs(self, tmp_path):
        for sub in ("a", "b"):
            assert run_cli("run", "--radices", "2,2", "--layers", "3",
                           "--inputs", "synthetic:10:0.4", "--seed", "42",
                           "--weight", "0.3", "--bias", "-0.05",
                           "--out", tmp_path / sub) == 0
        assert ((tmp_path / "a" / "categories.tsv").read_bytes()
                == (tmp_path / "b" / "categories.tsv").read_bytes())


class TestFitAndReport:
    def _write_results(self, path, n1=1e9, beta=1.0, points=8):
        ops = np.logspace(6, 10, points)
        with open(path, "w") as f:
            for n_ops in ops:
                n_ops = int(n_ops)
                t = (n_ops / n1) ** beta
                f.write(json.dumps({"n_ops": n_ops, "t_dnn_seconds": t,
                                    "label": "synthetic"}) + "\n")

    def test_fit_exact_recovery(self, tmp_path, capsys):
        results = tmp_path / "results.jsonl"
        self._write_results(results)
        out = tmp_path / "fit.json"
        assert run_cli("fit", "--results", results, "--out", out) == 0
        fit = json.loads(out.read_text())
        assert fit["beta"] == pytest.approx(1.0, abs=1e-10)
        assert fit["n1"] == pytest.approx(1e9, rel=1e-8)

    def test_fit_insufficient_data_exits_4(self, tmp_path):
        results = tmp_path / "results.jsonl"
        self._write_results(results, points=1)
        assert run_cli("fit", "--results", results) == 4

    def test_report_includes_reference_overlay(self, tmp_path):
        results = tmp_path / "results.jsonl"
        self._write_results(results)
        out = tmp_path / "report"
        assert run_cli("report", "--results", results, "--out", out) == 0
        assert (out / "model_fit.png").exists()
        assert (out / "fit.csv").exists()
        refs = list(out.glob("ref_*.tsv"))
        assert len(refs) == 6
        assert "Bisson-Nvidia-2019" in (out / "summary.txt").read_text()


class TestConfigFile:
    def test_config_file_with_flag_override(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("radices = 2,2\nlayers = 2\nkron-width = 1\n"
                       "inputs = synthetic:4:0.5\nout = {}\n".format(tmp_path / "c"))
        # --layers on the command line wins over the config file
        code = run_cli("run", "--config", cfg, "--layers", "3")
        assert code == 0
        rec = json.loads((tmp_path / "c" / "results.jsonl").read_text().splitlines()[0])
        assert rec["n_layers"] == 3

    def test_missing_required_key_exits_2(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("layers = 2\n")
        assert run_cli("run", "--config", cfg, "--out", tmp_path) == 2

    def test_malformed_config_exits_2(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("this is not a key value line\n")
        assert run_cli("generate", "--config", cfg, "--out", tmp_path) == 2
