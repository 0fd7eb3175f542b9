import math
import os
import subprocess

import pytest

import pairvoice


def test_t_tail_matches_closed_forms():
    assert pairvoice.student_t_p(1.0, 1.0) == pytest.approx(0.5, abs=1e-12)
    assert pairvoice.student_t_p(1.96, 1e6) == pytest.approx(math.erfc(1.96 / math.sqrt(2)), abs=1e-5)


def test_ttests():
    r = pairvoice.independent_ttest([1, 2, 3, 4, 5], [3, 4, 5, 6, 7])
    assert r["t"] == pytest.approx(-2.0)
    assert r["dof"] == pytest.approx(8.0)
    assert pairvoice.paired_ttest([2, 4, 6], [1, 3, 8])["p"] == pytest.approx(1.0)


def test_errors_carry_their_kind():
    with pytest.raises(pairvoice.PairvoiceError, match="DegenerateError"):
        pairvoice.paired_ttest([1, 2, 3], [1, 2, 3])


def test_f0_of_a_sine():
    sr = 22050
    x = [0.5 * math.sin(2 * math.pi * 200 * i / sr) for i in range(sr // 2)]
    f0, voiced = pairvoice.f0_track(x, sr)
    assert all(voiced)
    assert all(abs(f - 200) <= 2 for f in f0)
    feats = pairvoice.extract_features(x, sr)
    assert feats["f0_hz.p50"] == pytest.approx(200, abs=2)


def test_synth_and_run(tmp_path):
    manifest = pairvoice.synth(tmp_path / "cohort", n_patients=20, seed=1)
    report = pairvoice.run_experiment(
        manifest, tasks=["pg"], groups=["all"], t_tests=["paired"], net={"epochs": 10}
    )
    assert len(report["cells"]) == 2
    assert report["n_failed"] == 0
    with pytest.raises(pairvoice.PairvoiceError, match="RefusalError"):
        pairvoice.synth(tmp_path / "cohort", n_patients=20)
    table = pairvoice.selection_table(manifest, '{"tasks": ["pg"], "groups": ["all"]}')
    assert table.startswith("feature_set,sex,t_test")


def test_signal_cohort_loads(tmp_path):
    pairvoice.synth(tmp_path / "sig", mode="signal", n_patients=2, duration_s=0.5)
    samples, sr = pairvoice.load_wav(tmp_path / "sig" / "wav" / "P001_pg_dry.wav")
    assert sr == 22050
    assert len(samples) == 11025


@pytest.mark.skipif("PAIRVOICE_CLI" not in os.environ, reason="CLI path not provided")
def test_cli_synth(tmp_path):
    cli = os.environ["PAIRVOICE_CLI"]
    out = tmp_path / "c"
    assert subprocess.run([cli, "synth", "--n", "6", "--out", str(out)]).returncode == 0
    assert subprocess.run([cli, "synth", "--n", "6", "--out", str(out)], capture_output=True).returncode == 1
