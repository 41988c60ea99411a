import math

import numpy as np
import pytest

from penmin.svt import (
    THRESHOLD_RATIO,
    SvtConfig,
    hard_threshold_denoise,
    minimal_threshold,
    optimal_threshold,
    svt_experiment,
)


def test_minimal_threshold_values():
    assert minimal_threshold(100, 1.0) == pytest.approx(20.0)
    assert minimal_threshold(1, 2.0) == pytest.approx(4.0)
    with pytest.raises(ValueError):
        minimal_threshold(100, 0.0)
    with pytest.raises(ValueError):
        minimal_threshold(0, 1.0)


def test_optimal_threshold_values_and_ratio():
    assert optimal_threshold(100, 1.0) == pytest.approx(23.0940107676, rel=1e-10)
    assert optimal_threshold(1, 1.0) == pytest.approx(4.0 / math.sqrt(3.0), rel=1e-12)
    for n, sigma in [(3, 0.1), (50, 1.3), (999, 7.0)]:
        ratio = optimal_threshold(n, sigma) / minimal_threshold(n, sigma)
        assert ratio == THRESHOLD_RATIO == pytest.approx(2.0 / math.sqrt(3.0), rel=1e-15)


def test_hard_threshold_identity_and_zero():
    rng = np.random.default_rng(0)
    m = rng.standard_normal((8, 8))
    np.testing.assert_allclose(hard_threshold_denoise(m, 0.0), m, atol=1e-10)
    smax = np.linalg.svd(m, compute_uv=False)[0]
    np.testing.assert_allclose(hard_threshold_denoise(m, smax * 1.01), 0.0, atol=1e-12)
    with pytest.raises(ValueError):
        hard_threshold_denoise(m, -1.0)


def test_hard_threshold_recovers_strong_rank_one():
    rng = np.random.default_rng(1)
    u = rng.standard_normal(20)
    v = rng.standard_normal(20)
    u /= np.linalg.norm(u)
    v /= np.linalg.norm(v)
    m = 5.0 * np.outer(u, v)
    np.testing.assert_allclose(hard_threshold_denoise(m, 3.0), m, atol=1e-8)


def test_hard_threshold_idempotent():
    rng = np.random.default_rng(2)
    m = rng.standard_normal((15, 15))
    lam = 2.0
    once = hard_threshold_denoise(m, lam)
    twice = hard_threshold_denoise(once, lam)
    np.testing.assert_allclose(twice, once, atol=1e-8)


def test_config_validation():
    with pytest.raises(ValueError):
        SvtConfig(n=10, sigma=1.0, rank=11, signal_singular_values=tuple([1.0] * 11))
    with pytest.raises(ValueError):
        SvtConfig(n=10, sigma=0.0, rank=0, signal_singular_values=())
    with pytest.raises(ValueError):
        SvtConfig(n=10, sigma=1.0, rank=1, signal_singular_values=(-2.0,))
    with pytest.raises(ValueError):
        SvtConfig(n=10, sigma=1.0, rank=1, signal_singular_values=(1.0,), replicates=0)
    with pytest.raises(ValueError):
        SvtConfig(n=10, sigma=1.0, rank=2, signal_singular_values=(1.0,))


def test_noise_only_bulk_edge_concentration():
    # pure noise: the top singular value rarely exceeds 1.05 * lambda_min
    n, reps = 200, 100
    from penmin.noise import RngStream

    lam = minimal_threshold(n, 1.0)
    exceed = 0
    for r in range(reps):
        g = RngStream(50, r).generator().standard_normal((n, n))
        smax = np.linalg.svd(g, compute_uv=False)[0]
        exceed += smax >= 1.05 * lam
    assert exceed / reps <= 0.01 + 3 * math.sqrt(0.01 * 0.99 / reps)


def test_experiment_noise_only_both_near_zero():
    config = SvtConfig(n=100, sigma=1.0, rank=0, signal_singular_values=(),
                       replicates=20, seed=3)
    report = svt_experiment(config)
    by_name = {row["threshold_name"]: row for row in report.rows}
    assert by_name["optimal"]["mse_mean"] <= by_name["minimal"]["mse_mean"] + 2 * (
        by_name["minimal"]["mse_stderr"] + by_name["optimal"]["mse_stderr"]
    )


def test_experiment_strong_signal_ordering_and_determinism():
    n = 200
    s = 10 * math.sqrt(n)
    config = SvtConfig(n=n, sigma=1.0, rank=1, signal_singular_values=(s,),
                       replicates=50, seed=0)
    report = svt_experiment(config)
    by_name = {row["threshold_name"]: row for row in report.rows}
    assert by_name["optimal"]["mse_mean"] < by_name["minimal"]["mse_mean"]
    assert report.diff_mean > 0
    report2 = svt_experiment(config)
    assert report.rows == report2.rows and report.diff_mean == report2.diff_mean


def test_report_csv_format():
    config = SvtConfig(n=30, sigma=1.0, rank=1, signal_singular_values=(60.0,),
                       replicates=3, seed=1)
    text = svt_experiment(config).to_csv()
    lines = text.strip().splitlines()
    assert lines[0] == "threshold_name,lambda,mse_mean,mse_stderr,replicates"
    assert len(lines) == 3
    assert lines[1].startswith("minimal,") and lines[2].startswith("optimal,")
