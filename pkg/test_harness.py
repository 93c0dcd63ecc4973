"""
Tests for the experiment runners and the command-line harness.
"""

import numpy as np
import pandas as pd
import pytest

import experiments
import harness
from config import load_config
from errors import OutOfRangeError
from gfield import field_new

GF7_3 = field_new(7, 3)

QUICK_SNR = {"channel.kind": "awgn", "sim.trials": "20"}


def test_trial_streams_are_reproducible_and_distinct():
    a = experiments.trial_rng(1, "sweep-snr", 0, 3).random(4)
    b = experiments.trial_rng(1, "sweep-snr", 0, 3).random(4)
    c = experiments.trial_rng(1, "sweep-snr", 0, 4).random(4)
    d = experiments.trial_rng(1, "density-proposed", 0, 3).random(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)


def test_codec_roundtrip_plain_and_shifted():
    report = experiments.codec_roundtrip(5, GF7_3, 1)
    assert report.codeword == (5, 3, 6)
    assert report.valid and report.offset_estimate == 0
    assert report.success

    shifted = experiments.codec_roundtrip(5, GF7_3, 1, offset=1)
    assert not shifted.valid
    assert shifted.offset_estimate == 1
    assert [(r.tnid, r.offset) for r in shifted.decoded] == [(5, 1)]


def test_codec_roundtrip_with_corruption():
    report = experiments.codec_roundtrip(5, GF7_3, 1, corrupt="1:0")
    assert report.received == ((5,), (0,), (6,))
    assert [(r.tnid, r.matches) for r in report.decoded] == [(5, 2)]

    erased = experiments.codec_roundtrip(300, field_new(521, 8), 1, corrupt="0:-,3:-,5:-")
    assert erased.offset_estimate is None
    assert erased.success
    with pytest.raises(OutOfRangeError):
        experiments.parse_corruption("9:1", 3)
    with pytest.raises(OutOfRangeError):
        experiments.parse_corruption("1=2", 3)


def test_snr_sweep_extremes():
    cfg = load_config(overrides={**QUICK_SNR, "sweep.snr_db": "-60, 60"}, environ={}).validate()
    df = experiments.run_snr_sweep(cfg)
    assert list(df.columns) == experiments.SNR_COLUMNS
    low, high = df.iloc[0], df.iloc[1]
    assert low["erasure_rate"] > 0.95
    assert high["erasure_rate"] == 0.0
    assert high["error_rate"] == 0.0


def test_snr_sweep_erasure_falls_with_snr():
    # the informative band: above about -6 dB nothing is erased at this trial count
    cfg = load_config(overrides={"sim.trials": "30", "sweep.snr_db": "-27, -24, -21, -18, -15, -12, -9, -6"},
                      environ={}).validate()
    df = experiments.run_snr_sweep(cfg)
    assert experiments.spearman(df["snr_db"], df["erasure_rate"]) < -0.9
    assert (df["error_rate"] < 0.01).all()


@pytest.mark.slow
def test_snr_sweep_full_range_rayleigh():
    cfg = load_config(overrides={"sim.trials": "2000"}, environ={}).validate()
    assert cfg.raw("channel.kind") == "rayleigh_block"
    df = experiments.run_snr_sweep(cfg)
    assert len(df) >= 8
    assert (df["error_rate"] < 0.01).all()
    assert experiments.spearman(df["snr_db"], df["erasure_rate"]) < -0.9


def test_spearman():
    assert experiments.spearman([1, 2, 3], [9, 5, 1]) == pytest.approx(-1.0)


def test_density_sweep_small_pair():
    cfg = load_config(overrides={"sim.area": "4", "sweep.density": "0, 0.5", "sim.trials": "10",
                                 "protocol.max_slots": "200"}, environ={}).validate()
    df = experiments.run_density_sweep(cfg)
    assert list(df.columns) == experiments.DENSITY_COLUMNS
    assert df["nodes"].tolist() == [2]
    assert df["median_proposed"].iloc[0] < 200
    assert df["median_baseline"].iloc[0] < 200


def test_density_sweep_zero_density_is_empty():
    cfg = load_config(overrides={"sweep.density": "0", "sim.trials": "2"}, environ={}).validate()
    assert experiments.run_density_sweep(cfg).empty


def test_density_trial_reports_elapsed_slots():
    cfg = load_config(overrides={"sim.area": "4", "protocol.T": "25", "protocol.max_slots": "200"},
                      environ={}).validate()
    proposed, reference, transmissions, elapsed = experiments.density_trial(cfg, 0, 2, 0)
    assert len(proposed) == len(reference) == 2
    assert elapsed == [25 * c for c in proposed]
    assert transmissions > 0


@pytest.mark.slow
def test_density_sweep_favors_coded_discovery():
    cfg = load_config(overrides={"sim.trials": "1000", "sim.workers": "4"}, environ={}).validate()
    df = experiments.run_density_sweep(cfg)
    assert (df["median_proposed"] < df["median_baseline"]).all()
    ratio = (df["median_baseline"] / df["median_proposed"]).tolist()
    assert all(a <= b for a, b in zip(ratio, ratio[1:]))


def test_baseline_curve_table():
    df = experiments.baseline_curve([1, 2], [1], [0.5])
    assert df["p_discover"].tolist() == pytest.approx([0.5, 0.25])
    assert df["p_discover_opt"].tolist() == pytest.approx([1.0, 0.25])


def test_perfect_decode_helper():
    assert sorted(experiments.perfect_decode([4, 400, 77], field_new(521, 8))) == [4, 77, 400]


def test_cli_codec(capsys):
    assert harness.main(["codec", "5", "--n", "3", "--k", "1", "--d", "7"]) == 0
    out = capsys.readouterr().out
    assert "codeword: 5,3,6" in out
    assert "decoded: 5 " in out

    assert harness.main(["codec", "5", "--n", "3", "--k", "1", "--d", "7", "--offset", "1"]) == 0
    assert "offset: 1" in capsys.readouterr().out


def test_cli_codec_rejects_composite_field(capsys):
    assert harness.main(["codec", "5", "--n", "3", "--k", "1", "--d", "4"]) == 1
    assert "prime" in capsys.readouterr().err


def test_cli_usage_error_exits_one():
    with pytest.raises(SystemExit) as exc:
        harness.main(["codec"])
    assert exc.value.code == 1


def test_cli_baseline_curve_to_stdout(capsys):
    code = harness.main(["baseline-curve", "--set", "curve.L=2", "--set", "curve.t=1", "--set", "curve.p=0.5"])
    assert code == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("# ")
    assert lines[1] == "L,t,p,p_discover,p_discover_opt"
    assert lines[2] == "2,1,0.5,0.25,0.25"


def test_cli_bad_config_value_exits_one(tmp_path):
    out = tmp_path / "x.csv"
    assert harness.main(["sweep-snr", "--set", "code.k=9", "--out", str(out)]) == 1
    assert not out.exists()


def test_cli_sweep_is_byte_identical(tmp_path):
    args = ["sweep-snr", "--seed", "7", "--trials", "5", "--set", "sweep.snr_db=-10, 10"]
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    assert harness.main(args + ["--out", str(first)]) == 0
    assert harness.main(args + ["--out", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()
    df = pd.read_csv(first, comment="#")
    assert df["snr_db"].tolist() == [-10, 10]
    assert df["trials"].tolist() == [5, 5]
