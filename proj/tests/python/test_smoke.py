import json

import numpy as np
import pytest

import hifdetect as hd

SMALL_CONFIG = json.dumps(
    {
        "sim": {
            "samples_per_cycle": 256,
            "duration": 2.0,
            "baseline_harmonics": [{"order": 7, "fraction": 0.02}],
            "noise_sigma": 0.001,
            "rng_seed": 5,
        },
        "events": [
            {
                "type": "hif",
                "onset": 1.2,
                "duration": 0.05,
                "R0": 40.0,
                "tau": 4.0e-4,
                "u0": 300.0,
                "r0": 0.5,
                "g_init": 0.5,
            }
        ],
        "havok": {"window_k": 64, "window_cycles": 2.0, "hop_cycles": 0.125},
        "s2g": {
            "subseq_len_l": 32,
            "query_len_lq": 64,
            "embed_dim": 2,
            "bins_per_axis": 50,
        },
        "detector": {
            "baseline_span": 0.5,
            "smoothing_window": 641,
            "sigma_multiplier": 3.0,
            "min_event_duration": 0.02,
        },
    }
)


def test_version():
    assert hd.version() == hd.__version__
    assert hd.__version__.count(".") == 2


def test_presets():
    for name in ("case_a", "case_b"):
        doc = json.loads(hd.preset(name))
        assert doc["sim"]["samples_per_cycle"] == 2048
        assert any(e["type"] == "hif" for e in doc["events"])
    assert hd.preset("case_z") == ""


def test_canonical_echo_is_fixed_point():
    echo = hd.canonical_echo(SMALL_CONFIG)
    assert hd.canonical_echo(echo) == echo
    assert json.loads(echo)["detector"]["smoothing_window"] == 641


def test_bad_config_raises_config_error():
    with pytest.raises(hd.ConfigError, match="sim.nois_sigma"):
        hd.simulate('{"sim": {"nois_sigma": 0.1}}')
    assert issubclass(hd.ConfigError, ValueError)


def test_simulate_shapes_and_determinism():
    rec = hd.simulate(SMALL_CONFIG)
    n = 256 * 60 * 2
    assert rec["time"].shape == (n,)
    assert rec["i_primary"].shape == (n,)
    assert rec["labels"].shape == (n,)
    assert rec["sample_rate"] == pytest.approx(256 * 60)
    assert rec["labels"].max() == 1
    assert "i_primary" in rec["channels"]
    assert np.isfinite(rec["i_primary"]).all()

    again = hd.simulate(SMALL_CONFIG)
    assert np.array_equal(rec["i_primary"], again["i_primary"])
    assert np.array_equal(rec["labels"], again["labels"])

    reseeded = hd.simulate(SMALL_CONFIG.replace('"rng_seed": 5', '"rng_seed": 6'))
    assert not np.array_equal(rec["i_primary"], reseeded["i_primary"])


def test_detect_flags_the_fault():
    rec = hd.simulate(SMALL_CONFIG)
    report = hd.detect(SMALL_CONFIG, rec["i_primary"], rec["sample_rate"])
    assert report["rank"] >= 2
    assert report["theta"] < 0.0
    assert not report["degenerate_baseline"]
    assert len(report["input_digest"]) == 16
    assert report["score_timestamps"].shape == report["anomaly_score"].shape
    assert report["flagged"].dtype == np.uint8
    assert len(report["intervals"]) >= 1
    onsets = [iv["onset"] for iv in report["intervals"]]
    assert any(1.2 <= t <= 1.22 for t in onsets)
    doc = json.loads(report["report_json"])
    assert doc["input_digest"] == report["input_digest"]
    assert doc["config"]["detector"]["smoothing_window"] == 641


def test_detect_rejects_wrong_sample_rate():
    rec = hd.simulate(SMALL_CONFIG)
    with pytest.raises(hd.SampleRateError):
        hd.detect(SMALL_CONFIG, rec["i_primary"], 1000.0)


def test_run_evaluates_against_schedule():
    report = hd.run(SMALL_CONFIG)
    ev = report["evaluation"]
    assert ev["true_positives"] == 1
    assert ev["false_positives"] == 0
    assert ev["missed"] == 0
    assert ev["detection_rate"] == 1.0
    (event,) = ev["events"]
    assert event["detected"]
    assert 0.0 <= event["latency"] <= 1.0 / 60.0


def test_hankel_helpers():
    x = np.arange(1.0, 7.0)
    h = hd.build_hankel(x, 3)
    assert h.shape == (4, 3)
    assert np.array_equal(h[0], [1.0, 2.0, 3.0])
    assert np.array_equal(h[:, 0], [1.0, 2.0, 3.0, 4.0])

    u, s, v = hd.hankel_svd(x, 3)
    assert u.shape == (4, 4)
    assert v.shape == (3, 3)
    assert s.shape == (3,)
    assert np.all(np.diff(s) <= 1e-12)
    recon = u[:, :3] @ np.diag(s) @ v.T
    assert np.allclose(recon, h, atol=1e-10)

    assert hd.optimal_rank(np.array([5.0, 0.01, 0.009]), 0.5) == 2
