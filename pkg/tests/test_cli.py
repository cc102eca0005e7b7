import json

import numpy as np
import pytest

from fecgcs import cli
from fecgcs.signal_io import load_payload, load_recording

SMALL = ["--channels", "3", "--samples", "512", "--N", "128", "--block-size", "16", "--d", "4"]


def run(argv):
    return cli.main([str(a) for a in argv])


class TestSynthAndMatrix:
    def test_synth_outputs(self, tmp_path):
        assert run(["--out", tmp_path, "--seed", 2, "synth", "--channels", 3, "--samples", 500]) == 0
        for name in ("recording", "fecg", "mecg", "noise", "sources"):
            assert (tmp_path / f"{name}.csv").exists()
        meta = json.loads((tmp_path / "synth.json").read_text())
        assert meta["measured"]["sinr_db"] == pytest.approx(-15.0)
        assert meta["spec"]["seed"] == 2

    def test_global_flags_after_command(self, tmp_path):
        assert run(["synth", "--out", tmp_path, "--seed", 5, "--samples", 300]) == 0
        assert json.loads((tmp_path / "synth.json").read_text())["spec"]["seed"] == 5

    def test_gen_matrix(self, tmp_path, capsys):
        assert run(["--out", tmp_path, "gen-matrix", "--N", 64, "--cr", 50, "--d", 4]) == 0
        desc = json.loads((tmp_path / "matrix.json").read_text())
        assert (desc["M"], desc["N"], desc["d"]) == (32, 64, 4)
        assert len((tmp_path / "columns.csv").read_text().splitlines()) >= 64

    def test_M_and_cr_exclusive(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            run(["--out", tmp_path, "gen-matrix", "--M", 10, "--cr", 50])
        assert exc.value.code == 2


class TestRoundTrip:
    def test_compress_reconstruct_eval(self, tmp_path):
        assert run(["--out", tmp_path, "synth", "--channels", 2, "--samples", 256]) == 0
        rec = tmp_path / "recording.csv"
        assert run(["--out", tmp_path / "c", "compress", rec, "--N", 128, "--d", 4]) == 0
        payloads = sorted((tmp_path / "c").glob("payload_ch*.csv"))
        assert len(payloads) == 2
        assert load_payload(payloads[0]).M == 64
        assert run(["--out", tmp_path / "r", "reconstruct", *payloads, "--block-size", 16]) == 0
        out = load_recording(tmp_path / "r" / "reconstructed.csv", 250.0)
        assert out.data.shape == (2, 256)
        assert run(["--out", tmp_path / "e", "eval", rec, tmp_path / "r" / "reconstructed.csv",
                    "--parts", tmp_path / "fecg.csv", tmp_path / "mecg.csv", tmp_path / "noise.csv"]) == 0
        ev = json.loads((tmp_path / "e" / "eval.json").read_text())
        assert len(ev["channels"]) == 2
        assert ev["sinr"]["sinr_db"] == pytest.approx(-15.0)

    def test_ica_with_reference(self, tmp_path):
        assert run(["--out", tmp_path, "synth", "--channels", 3, "--samples", 1000]) == 0
        rec = tmp_path / "recording.csv"
        assert run(["--out", tmp_path, "ica", rec, "--reference", rec]) == 0
        rep = json.loads((tmp_path / "ica_report.json").read_text())
        assert rep["k_extracted"] == 3
        assert all(r == pytest.approx(1.0) for _, _, r in rep["matching"]["pairs"])


class TestPipeline:
    def test_reproducible_csv(self, tmp_path):
        for name in ("a", "b"):
            assert run(["--out", tmp_path / name, "--seed", 3, "pipeline", *SMALL]) == 0
        csvs = sorted(p.name for p in (tmp_path / "a").glob("*.csv"))
        assert csvs == ["components_original.csv", "components_reconstructed.csv",
                        "original.csv", "reconstructed.csv"]
        for n in csvs:
            assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()
        summary = json.loads((tmp_path / "a" / "summary.json").read_text())
        assert 0 <= summary["fetal_correlation"] <= 1

    def test_config_file(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"channels": 3, "samples": 512, "N": 128, "block_size": 16, "d": 4}))
        assert run(["--out", tmp_path / "o", "--config", cfg, "pipeline"]) == 0
        assert json.loads((tmp_path / "o" / "summary.json").read_text())["N"] == 128

    def test_config_unknown_key(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"bogus": 1}))
        assert run(["--out", tmp_path, "--config", cfg, "pipeline"]) == 2
        assert "error [config]" in capsys.readouterr().err


class TestSweep:
    def test_outputs(self, tmp_path, capsys):
        argv = ["--out", tmp_path, "sweep", "cr", "--lo", 40, "--hi", 60, "--step", 20,
                "--trials", 1, *SMALL]
        assert run(argv) == 0
        text = (tmp_path / "sweep_cr.csv").read_text()
        assert text.splitlines()[0].startswith("cr,mean_correlation")
        assert len(text.splitlines()) == 3
        assert (tmp_path / "sweep_cr.svg").read_text().startswith("<svg")
        assert (tmp_path / "sweep_cr_timing.csv").exists()


class TestOpsCount:
    def test_reference_values(self, capsys):
        assert run(["opscount"]) == 0
        out = capsys.readouterr().out
        assert "768" in out and "5888" in out

    def test_table_formula(self):
        rows = cli.opscount_table(512, 256, [2, 12, 256])
        assert [r[1] for r in rows[:3]] == [768, 5888, 256 * 512 - 256]
        assert rows[3][0].startswith("db4")

    def test_csv(self, tmp_path):
        assert run(["--out", tmp_path, "opscount", "--csv"]) == 0
        assert (tmp_path / "opscount.csv").read_text().splitlines()[1] == "sparse-binary d=2,768,0"

    def test_invalid_d(self, capsys):
        assert run(["opscount", "--d", "300"]) == 2


class TestExitCodes:
    def test_missing_file(self, tmp_path, capsys):
        assert run(["--out", tmp_path, "ica", tmp_path / "missing.csv"]) == 2
        assert "error [load]" in capsys.readouterr().err

    def test_malformed_payload(self, tmp_path, capsys):
        bad = tmp_path / "p.csv"
        bad.write_text("not a payload\n")
        assert run(["--out", tmp_path, "reconstruct", bad]) == 2
        assert "error [load]" in capsys.readouterr().err

    def test_rank_failure_is_numeric(self, tmp_path, capsys):
        # two identical channels leave rank 1 after whitening
        rec = tmp_path / "r.csv"
        x = np.random.default_rng(0).standard_normal(400)
        np.savetxt(rec, np.column_stack([x, x]), delimiter=",")
        assert run(["--out", tmp_path, "ica", rec]) == 1
        assert "error [ica]" in capsys.readouterr().err

    def test_bad_jobs(self, tmp_path):
        assert run(["--jobs", 0, "opscount"]) == 2
