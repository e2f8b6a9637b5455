import json
import os
import pathlib

import numpy as np
import pytest

import marketstruct as ms


def test_mp_bounds_unit_ratio():
    assert ms.mp_bounds(1.0, 1.0) == (0.0, 4.0)
    lo, hi = ms.mp_bounds(3.3)
    assert hi == pytest.approx((1 + (1 / 3.3) ** 0.5) ** 2)
    with pytest.raises(ms.Error):
        ms.mp_bounds(0.5)


def test_correlation_matches_numpy():
    rng = np.random.default_rng(1)
    r = rng.normal(size=(200, 6))
    c = ms.rolling_correlation(r, 150, 199)
    np.testing.assert_allclose(c, np.corrcoef(r[50:200].T), atol=1e-10)
    ev, w = ms.eigen_spectrum(c)
    assert ev.sum() == pytest.approx(6.0)
    assert np.all(np.diff(ev) <= 0)
    series = ms.time_varying_rmt(r, 150)
    assert len(series["t"]) == 51


def test_periodogram_matches_fft():
    x = np.random.default_rng(2).normal(size=101)
    p = ms.periodogram(list(x), demean=False)
    ref = np.abs(np.fft.fft(x)) ** 2 / len(x)
    np.testing.assert_allclose(p, ref[1:51], rtol=1e-10)


def test_clustering_and_distances():
    d = np.array([[0, 1, 4, 5], [1, 0, 3, 6], [4, 3, 0, 2], [5, 6, 2, 0]], dtype=float)
    merges, order = ms.cluster(d, ["a", "b", "c", "d"], "single")
    assert [m[2] for m in merges] == [1.0, 2.0, 3.0]
    assert sorted(order) == [0, 1, 2, 3]
    assert ms.wasserstein_1d({5: 0.5, 15: 0.5}, {10: 1.0}) == 5.0
    assert ms.mjw_distance([{10: 1.0}, {30: 1.0}], [{10: 1.0}]) == 5.0


def test_portfolio_closed_form():
    r = np.full((100, 1), 0.002)
    res = ms.algo1_security_selection(r, ["X"], {"s": ["X"]}, window=10, best=1)
    assert res["total"] == pytest.approx(90 * 11 * 0.002)
    two = ms.algo2_sector_allocation(np.random.default_rng(3).normal(size=(80, 4)) * 0.01, ["A", "B", "C", "D"],
                                     {"s1": ["A", "B"], "s2": ["C", "D"]}, window=20, best=1)
    assert len(two["per_t"]) == 60
    assert all(len(s) == 1 for s in two["selections"])


def test_changepoints_short_chain():
    x = list(np.random.default_rng(4).normal(size=300))
    out = ms.changepoints(x, iterations=200, burnin=100, max_segments=5, seed=1, grid=8)
    assert out["map_m"] >= 1
    assert len(out["segments"]) == 200
    assert out["surface"].shape == (300, 8)


def test_pipeline_on_fixture(tmp_path):
    fixture = pathlib.Path(os.environ.get("MARKETSTRUCT_FIXTURE", pathlib.Path(__file__).parents[2] / "data" / "fixture"))
    artifacts = ms.run_pipeline(fixture / "pipeline.json", output=tmp_path / "bundle", iterations=300, burnin=150,
                                plots=False)
    paths = {a[0] for a in artifacts}
    assert "report.json" in paths
    report = json.loads((tmp_path / "bundle" / "report.json").read_text())
    assert all(e["diverges"] for e in report["reference_discrepancies"])
    assert any(d["diverges"] for d in ms.reference_edge_check())
