import math

import numpy as np
import pytest

from product_median import Euclidean, InvalidInput, ProductManifold, WeightedSample
from product_median import lab

from oracles import bw_dist


def test_ar1_covariance():
    np.testing.assert_array_equal(lab.ar1_covariance(3, 0.5), [[1, 0.5, 0.25], [0.5, 1, 0.5], [0.25, 0.5, 1]])
    for rho in (0.1, 0.5, 0.9):
        assert np.all(np.diag(lab.ar1_covariance(6, rho)) == 1)
    assert np.linalg.eigvalsh(lab.ar1_covariance(10, 0.9))[0] > 0
    for rho in (0.0, 1.0, -0.2):
        with pytest.raises(InvalidInput):
            lab.ar1_covariance(3, rho)


def test_mix64_reference_values():
    # SplitMix64 outputs for state 0 (first draw) from the reference generator
    assert lab.mix64(0) == 0xE220A8397B1DCDAF
    assert lab.cell_seed(0, 0, 0) != lab.cell_seed(0, 0, 1) != lab.cell_seed(0, 1, 0)


def test_univariate_signal_law():
    pts = lab.sample_univariate("signal", lab.make_rng(1), 100_000)
    mu = np.array([p[0][0] for p in pts])
    var = np.array([p[1] for p in pts]) ** 2
    assert abs(mu.mean() + 1) <= 0.01
    assert abs(mu.std() - 0.5) <= 0.01
    assert np.all((var > 0) & (var < 1))
    assert abs(var.mean() - 0.5) <= 0.01


def test_univariate_noise_law():
    pts = lab.sample_univariate("noise", lab.make_rng(2), 20_000)
    mu = np.array([p[0][0] for p in pts])
    var = np.array([p[1] for p in pts]) ** 2
    assert abs(mu.mean() - 5) <= 0.05
    assert np.all((var > 0) & (var < 5))
    single = lab.sample_univariate("signal", lab.make_rng(3))
    assert single[0].shape == (1,) and single[1] > 0


def test_multivariate_laws():
    rng = lab.make_rng(4)
    norms = [np.sum(lab.sample_multivariate("signal", 10, 0.5, rng)[0] ** 2) for _ in range(2000)]
    assert abs(np.mean(norms) - 0.5) <= 0.05
    m, C = lab.sample_multivariate("noise", 5, 0.9, rng)
    assert abs(m.mean() - 10) < 1.5
    assert np.array_equal(C, C.T) and np.linalg.eigvalsh(C)[0] > 0
    with pytest.raises(InvalidInput):
        lab.sample_multivariate("signal", 1, 0.5, rng)


def test_contaminate_counts():
    pm = ProductManifold([Euclidean(1)])
    clean = WeightedSample(pm, [(np.array([0.0]),)] * 1000)
    noise = lambda r, k: [(np.array([1.0]),)] * k
    for alpha, k in ((0.0, 0), (0.5, 500), (0.499, 499), (0.3, 300)):
        out = lab.contaminate(clean, alpha, noise, lab.make_rng(5))
        assert sum(p[0][0] == 1.0 for p in out.points) == k
        np.testing.assert_array_equal(out.weights, clean.weights)
    assert lab.contaminate(clean, 0.0, noise, lab.make_rng(5)) is clean


def test_estimation_error():
    ref = lab.UNIVARIATE_REFERENCE
    assert lab.estimation_error(lab.UNIVARIATE, ref, ref) == 0
    est = (np.array([-1.0]), math.sqrt(0.5) + 0.1)
    assert lab.estimation_error(lab.UNIVARIATE, est, ref) == pytest.approx(0.1, abs=1e-15)
    rng = lab.make_rng(6)
    pm = lab.multivariate_manifold(4)
    a, b = lab.sample_multivariate("signal", 4, 0.5, rng), lab.sample_multivariate("noise", 4, 0.5, rng)
    direct = math.sqrt(np.sum((a[0] - b[0]) ** 2) + bw_dist(a[1], b[1]) ** 2)
    assert lab.estimation_error(pm, a, b) == pytest.approx(direct, abs=1e-9)


def test_contamination_spec_validation():
    with pytest.raises(InvalidInput):
        lab.ContaminationSpec(alpha_grid=(0.1, 0.5))
    with pytest.raises(InvalidInput):
        lab.ContaminationSpec(n=0)
    with pytest.raises(InvalidInput):
        lab.ContaminationSpec(scenario="multivariate", d=1)


def test_small_sweep_is_deterministic_and_thread_independent():
    spec = lab.ContaminationSpec(n=100, alpha_grid=(0.0, 0.2, 0.4), trials=2, seed=99)
    a = lab.run_sweep(spec, threads=1)
    b = lab.run_sweep(spec, threads=3)
    assert a.rows == b.rows
    assert len(a.rows) == 3 * 2 * 2
    assert [(r.alpha, r.trial) for r in a.rows[::2]] == [(al, t) for al in spec.alpha_grid for t in range(2)]
    assert all(math.isfinite(r.error) and r.error >= 0 for r in a.rows)
    m = a.mean_error("geometric_median")
    assert set(m) == {0.0, 0.2, 0.4}


def test_sweep_reference_override():
    spec = lab.ContaminationSpec(n=50, alpha_grid=(0.0,), trials=1, reference=(np.array([-1.0]), 0.5))
    assert spec.reference_point()[1] == 0.5


def test_univariate_clean_errors_small():
    res = lab.run_sweep(lab.ContaminationSpec(n=1000, alpha_grid=(0.0,), trials=2, seed=3))
    assert all(r.error <= 0.1 for r in res.rows)


def test_univariate_median_beats_mean_at_04():
    res = lab.run_sweep(lab.ContaminationSpec(n=400, alpha_grid=(0.4,), trials=2, seed=4))
    assert res.mean_error("geometric_median")[0.4] < res.mean_error("frechet_mean")[0.4]


def test_breakdown_probe_small():
    rng = lab.make_rng(7)
    clean = WeightedSample(lab.UNIVARIATE, lab.sample_univariate("signal", rng, 20))
    lo = lab.breakdown_probe(lab.UNIVARIATE, clean, 0.4, [0.0, 10.0, 1e3])
    assert all(d <= lo.bound + 1e-6 for _, d in lo.rows)
    hi = lab.breakdown_probe(lab.UNIVARIATE, clean, 0.6, [0.0, 10.0, 100.0, 1e3])
    dists = [d for _, d in hi.rows]
    assert dists[0] <= hi.diameter
    assert all(b > a for a, b in zip(dists, dists[1:]))
    assert all(d >= R - 2 * hi.diameter for R, d in hi.rows[1:])
    with pytest.raises(InvalidInput):
        lab.breakdown_probe(lab.UNIVARIATE, clean, 0.5, [1.0])


def test_place_at_distance():
    pm = ProductManifold([Euclidean(2)])
    stacks = pm.stack([(np.zeros(2),), (np.array([1.0, 0.0]),)])
    z = lab.place_at_distance(pm, (np.array([0.5, 0.0]),), (np.array([0.0, 1.0]),), stacks, 10.0)
    assert float(np.min(pm.dists(z, stacks))) == pytest.approx(10.0, abs=1e-8)


def test_perturbation_probe_small():
    rng = lab.make_rng(8)
    pm = ProductManifold([Euclidean(2), Euclidean(1)])
    pts = [(rng.standard_normal(2), rng.standard_normal(1)) for _ in range(15)]
    res = lab.perturbation_probe(pm, WeightedSample(pm, pts), [0.0, 1e-4, 1e-3, 1e-2], lab.make_rng(9), trials=5)
    assert res.rows[0] == (0.0, 0.0)
    disp = [m for _, m in res.rows]
    assert disp == sorted(disp)
    assert res.in_uniqueness_ball is True
    assert 0.45 <= res.slope <= 1.1
