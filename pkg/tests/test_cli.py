import csv
import math

import pytest

from qkdbench import decoy
from qkdbench.cli import main


def read_csv_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestSweep:
    def test_full_range_and_anchor(self, bench_config_file, tmp_path):
        out = tmp_path / "sweep.csv"
        code = main(
            [
                "sweep",
                "--config", str(bench_config_file),
                "--out", str(out),
                "--atten-min", "0", "--atten-max", "40", "--atten-step", "1",
                "--gain-convention", "attenuation-only",
            ]
        )
        assert code == 0
        rows = read_csv_rows(out)
        assert len(rows) == 41
        assert list(rows[0]) == decoy.SWEEP_CSV_HEADER
        six = next(r for r in rows if float(r["attenuation_db"]) == 6.0)
        assert 2.5e6 <= float(six["lbskr_bps"]) <= 4.5e6

    def test_single_point(self, bench_config_file, tmp_path):
        out = tmp_path / "one.csv"
        code = main(
            ["sweep", "--config", str(bench_config_file), "--out", str(out),
             "--atten-min", "6", "--atten-max", "6", "--atten-step", "1"]
        )
        assert code == 0
        assert len(read_csv_rows(out)) == 1

    def test_missing_config(self, tmp_path, capsys):
        code = main(["sweep", "--config", str(tmp_path / "nope.cfg"), "--out", str(tmp_path / "x.csv")])
        assert code == 2
        assert "error" in capsys.readouterr().err

    def test_cutoff_printed(self, bench_config_file, tmp_path, capsys):
        out = tmp_path / "sweep.csv"
        main(["sweep", "--config", str(bench_config_file), "--out", str(out),
              "--atten-min", "0", "--atten-max", "40", "--atten-step", "1"])
        assert "cutoff" in capsys.readouterr().out

    def test_text_format(self, bench_config_file, tmp_path):
        out = tmp_path / "sweep.txt"
        code = main(
            ["sweep", "--config", str(bench_config_file), "--out", str(out),
             "--atten-min", "6", "--atten-max", "8", "--atten-step", "1", "--format", "text"]
        )
        assert code == 0
        text = out.read_text()
        assert text.count("attenuation_db = ") == 3
        assert "lbskr_bps = " in text

    def test_unwritable_output_is_io_error(self, bench_config_file, tmp_path, capsys):
        blocker = tmp_path / "blocker"
        blocker.write_text("plain file, not a directory")
        code = main(
            ["sweep", "--config", str(bench_config_file), "--out", str(blocker / "x.csv"),
             "--atten-min", "6", "--atten-max", "6", "--atten-step", "1"]
        )
        assert code == 3
        assert "I/O error" in capsys.readouterr().err


class TestSimulate:
    def test_reproducible_outputs(self, bench_config_file, tmp_path):
        args = ["simulate", "--config", str(bench_config_file), "--frames", "50000", "--seed", "5"]
        assert main(args + ["--out", str(tmp_path / "a")]) == 0
        assert main(args + ["--out", str(tmp_path / "b")]) == 0
        a = (tmp_path / "a.summary.txt").read_bytes()
        b = (tmp_path / "b.summary.txt").read_bytes()
        assert a == b

    def test_emit_ttags_products(self, bench_config_file, tmp_path):
        code = main(
            ["simulate", "--config", str(bench_config_file), "--frames", "50000",
             "--seed", "6", "--out", str(tmp_path / "run"), "--emit-ttags"]
        )
        assert code == 0
        assert (tmp_path / "run.ttag").exists()
        assert (tmp_path / "run.alice.csv").exists()
        assert (tmp_path / "run.sidecar.txt").exists()
        sidecar = (tmp_path / "run.sidecar.txt").read_text()
        assert "period_ticks = 128" in sidecar

    def test_zero_frames(self, bench_config_file, tmp_path):
        code = main(
            ["simulate", "--config", str(bench_config_file), "--frames", "0",
             "--seed", "1", "--out", str(tmp_path / "x")]
        )
        assert code == 2

    def test_random_seed_printed(self, bench_config_file, tmp_path, capsys):
        code = main(
            ["simulate", "--config", str(bench_config_file), "--frames", "1000",
             "--out", str(tmp_path / "r")]
        )
        assert code == 0
        assert "seed = " in capsys.readouterr().out


class TestAnalyzeTtags:
    @pytest.fixture
    def simulated(self, bench_config_file, tmp_path):
        main(
            ["simulate", "--config", str(bench_config_file), "--frames", "400000",
             "--seed", "9", "--out", str(tmp_path / "run"), "--emit-ttags"]
        )
        return tmp_path / "run.ttag", tmp_path / "run.alice.csv"

    def test_pipeline_qber(self, bench_config_file, simulated, capsys):
        ttag, alice = simulated
        code = main(
            ["analyze-ttags", "--config", str(bench_config_file), "--ttags", str(ttag),
             "--alice-log", str(alice), "--window-ns", "1", "--seed", "11"]
        )
        assert code == 0
        out = capsys.readouterr().out
        line = next(l for l in out.splitlines() if l.startswith("Q_signal"))
        qber_mu = float(line.split("qber_signal = ")[1])
        # analytic comparator with the 13/128 gated background
        from qkdbench.config import load_config
        from dataclasses import replace

        source, link, _ = load_config(bench_config_file)
        link = replace(link, background_suppression=13 / 128)
        obs = decoy.channel_observables(source, link, "full-budget")
        # generous band: the small fixture has ~6k sifted signal bits
        assert abs(qber_mu - obs.e_mu) <= 4 * math.sqrt(obs.e_mu / 6000)

    def test_wide_window_matches_ungated(self, bench_config_file, simulated, capsys):
        ttag, alice = simulated
        code = main(
            ["analyze-ttags", "--config", str(bench_config_file), "--ttags", str(ttag),
             "--alice-log", str(alice), "--window-ns", "10", "--seed", "11"]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "rejected = 0" in out

    def test_empty_stream(self, bench_config_file, tmp_path, capsys):
        empty = tmp_path / "empty.ttag"
        empty.write_bytes(b"")
        alice = tmp_path / "alice.csv"
        alice.write_text("frame,bit,basis,class\n0,0,Z,signal\n")
        code = main(
            ["analyze-ttags", "--config", str(bench_config_file), "--ttags", str(empty),
             "--alice-log", str(alice)]
        )
        assert code == 2
        assert "no records" in capsys.readouterr().err

    def test_truncated_stream(self, bench_config_file, tmp_path):
        bad = tmp_path / "bad.ttag"
        bad.write_bytes(b"\x01\x02\x03")
        alice = tmp_path / "alice.csv"
        alice.write_text("frame,bit,basis,class\n0,0,Z,signal\n")
        code = main(
            ["analyze-ttags", "--config", str(bench_config_file), "--ttags", str(bad),
             "--alice-log", str(alice)]
        )
        assert code == 2


class TestSidechannel:
    def test_identical_profiles_only_spatial(self, tmp_path, capsys):
        path = tmp_path / "flat.csv"
        lines = ["axis,stateH,stateV,stateD,stateA"]
        for i in range(32):
            lines.append(f"{i * 1e-12},3,3,3,3")
        path.write_text("\n".join(lines) + "\n")
        code = main(["sidechannel", "--profiles", str(path)])
        assert code == 0
        out = capsys.readouterr().out
        total = float(next(l for l in out.splitlines() if "total" in l).split(" = ")[1])
        assert total == pytest.approx(1e-5, rel=1e-9)

    def test_synth_with_pedestals_reduces_rate(self, bench_config_file, tmp_path, capsys):
        sweep_csv = tmp_path / "sweep.csv"
        main(["sweep", "--config", str(bench_config_file), "--out", str(sweep_csv),
              "--atten-min", "6", "--atten-max", "6", "--atten-step", "1",
              "--gain-convention", "attenuation-only"])
        capsys.readouterr()
        code = main(
            ["sidechannel", "--synth", "--pedestals", "0.05,0,0,0.05",
             "--sweep-csv", str(sweep_csv), "--attenuation-db", "6"]
        )
        assert code == 0
        out = capsys.readouterr().out
        lines = dict(
            l.split(" = ") for l in out.splitlines() if " = " in l and not l.startswith("seed")
        )
        total = float(lines["leakage_total_bits_per_pulse"])
        lbskr = float(lines["lbskr_bps"])
        adjusted = float(lines["leakage_adjusted_bps"])
        assert total > 1e-2
        assert 0 < adjusted < lbskr

    def test_ambiguous_inputs(self, tmp_path, capsys):
        path = tmp_path / "p.csv"
        path.write_text("axis,stateH,stateV,stateD,stateA\n0,1,1,1,1\n")
        code = main(["sidechannel", "--profiles", str(path), "--synth"])
        assert code == 2
        assert "ambiguous" in capsys.readouterr().err

    def test_no_input(self):
        assert main(["sidechannel"]) == 2

    def test_malformed_profiles(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("axis,stateH\n0,1\n")
        assert main(["sidechannel", "--profiles", str(path)]) == 2


class TestOptimize:
    def test_smoke(self, bench_config_file, capsys):
        code = main(
            ["optimize", "--config", str(bench_config_file),
             "--mu-grid", "0.25,0.5,0.75,1.0", "--nu1-grid", "0.05,0.1"]
        )
        assert code == 0
        out = capsys.readouterr().out
        mu = float(next(l for l in out.splitlines() if l.startswith("mu_opt")).split(" = ")[1])
        assert 0.25 <= mu <= 1.0


class TestThreads:
    def test_env_var_parallel_sweep_matches(self, bench_config_file, tmp_path, monkeypatch):
        serial = tmp_path / "serial.csv"
        main(["sweep", "--config", str(bench_config_file), "--out", str(serial),
              "--atten-min", "0", "--atten-max", "10", "--atten-step", "1"])
        monkeypatch.setenv("QKDBENCH_THREADS", "4")
        threaded = tmp_path / "threaded.csv"
        main(["sweep", "--config", str(bench_config_file), "--out", str(threaded),
              "--atten-min", "0", "--atten-max", "10", "--atten-step", "1"])
        assert serial.read_text() == threaded.read_text()
