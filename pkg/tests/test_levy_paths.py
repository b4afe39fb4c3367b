import json
import math

import numpy as np
import pytest
from scipy.optimize import brentq
from scipy.special import gammainc

from goupsim.levy_paths import (
    BLOCK,
    DyadicGrid,
    GammaDrift,
    LevyPathSample,
    PoissonDrift,
    RngSeed,
    StableHalf,
    WindowError,
    _increments_from_uniforms,
    aggregate_to_level,
    backward_increments,
    build_two_sided_path,
    forward_increments,
    hitting_time,
    polygon_eval,
    polygon_inverse,
    process_from_dict,
    process_to_dict,
    sample_increment,
    step_eval,
    stream_for,
    write_path_csv,
    write_path_metadata,
)
from conftest import make_drift_path

SEED = RngSeed(20240817)


def test_spec_validation():
    with pytest.raises(ValueError):
        GammaDrift(0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        GammaDrift(1.0, 1.0, -0.5)
    with pytest.raises(ValueError):
        PoissonDrift(1.0, 1.0, 0.0)  # strict increase needs positive drift
    with pytest.raises(ValueError):
        RngSeed(-1)
    with pytest.raises(ValueError):
        DyadicGrid(3, 1, 8)  # must contain k=0


def test_sample_increment_rejects_bad_dt():
    with pytest.raises(ValueError):
        sample_increment(GammaDrift(1.0, 1.0, 1.0), 0.0, stream_for(SEED, 9))
    with pytest.raises(ValueError):
        sample_increment(StableHalf(), -1.0, stream_for(SEED, 9))


def test_gamma_increment_mean():
    # E[Gamma(1,1) + drift*1] = 2; Monte Carlo mean over 1e6 draws within 3 SE
    draws = sample_increment(GammaDrift(1.0, 1.0, 1.0), 1.0, stream_for(SEED, 1), size=10**6)
    se = draws.std(ddof=1) / math.sqrt(draws.size)
    assert abs(draws.mean() - 2.0) <= 3.0 * se


def test_poisson_increment_zero_count_is_pure_drift():
    # a uniform below exp(-lam) forces a zero Poisson count, leaving drift*dt
    spec = PoissonDrift(1.0, 1.0, 1.0)
    u = np.array([0.5 * math.exp(-1.0)])
    assert _increments_from_uniforms(spec, 1.0, u)[0] == 1.0


def test_stable_half_median():
    # median of 1/Z^2 = 1/median(chi2_1); chi2_1 median from root-finding on
    # its CDF P(X <= m) = gammainc(1/2, m/2) = 1/2
    chi2_median = brentq(lambda m: gammainc(0.5, 0.5 * m) - 0.5, 1e-6, 4.0, xtol=1e-12)
    expected = 1.0 / chi2_median
    assert abs(expected - 2.1981) < 5e-4
    draws = sample_increment(StableHalf(), 1.0, stream_for(SEED, 2), size=10**6)
    med = np.median(draws)
    # SE of the sample median: 1 / (2 f(m) sqrt(n)) with the exact density
    dens = (2.0 * math.pi) ** -0.5 * expected**-1.5 * math.exp(-0.5 / expected)
    se = 1.0 / (2.0 * dens * math.sqrt(draws.size))
    assert abs(med - expected) <= 3.0 * se


def test_mean_variance_sanity_at_1e5():
    cases = [
        (GammaDrift(1.0, 1.0, 1.0), 2.0, 1.0),
        (GammaDrift(2.0, 0.5, 0.25), 2.0 * 0.5 + 0.25, 2.0 * 0.25),
        (PoissonDrift(1.0, 1.0, 1.0), 2.0, 1.0),
        (PoissonDrift(2.0, 0.5, 0.5), 2.0 * 0.5 + 0.5, 2.0 * 0.25),
    ]
    for i, (spec, mean, var) in enumerate(cases):
        draws = sample_increment(spec, 1.0, stream_for(SEED, 3, i), size=10**5)
        n = draws.size
        se_mean = draws.std(ddof=1) / math.sqrt(n)
        assert abs(draws.mean() - mean) <= 3.0 * se_mean
        centered = draws - draws.mean()
        m2 = np.mean(centered**2)
        m4 = np.mean(centered**4)
        se_var = math.sqrt(max(m4 - m2**2, 0.0) / n)
        assert abs(draws.var(ddof=1) - var) <= 3.0 * se_var


def test_build_invariants():
    for spec in (GammaDrift(1.0, 1.0, 1.0), PoissonDrift(1.0, 1.0, 1.0), StableHalf()):
        path = build_two_sided_path(spec, 3, -4, 4, SEED)
        assert path.values[path.index_of(0)] == 0.0
        assert np.all(np.diff(path.values) > 0.0)


def test_build_poisson_zero_jump_window_is_pure_drift():
    # with no jumps in the window the path is exactly x_k = t_k
    spec = PoissonDrift(1.0, 1.0, 1.0)
    grid = DyadicGrid(3, -4, 4)
    for root in range(200):
        path = build_two_sided_path(spec, 3, -4, 4, RngSeed(root))
        expected = np.arange(-4, 5) * grid.dt
        if np.array_equal(path.values, expected):
            break
    else:
        pytest.fail("no zero-jump window found in 200 seeds (p ~ 0.32 each)")


def test_build_gamma_growth_rate():
    # mean of x_kmax / t_kmax over 1e4 paths -> E L(1) = 2 within 3 SE
    spec = GammaDrift(1.0, 1.0, 1.0)
    k_max = 256
    ratios = np.empty(10**4)
    t_end = k_max * 2.0**-10
    for i in range(ratios.size):
        path = build_two_sided_path(spec, 10, -2, k_max, RngSeed(777, stream_id=i))
        ratios[i] = path.values[-1] / t_end
    se = ratios.std(ddof=1) / math.sqrt(ratios.size)
    assert abs(ratios.mean() - 2.0) <= 3.0 * se


def test_lazy_block_extension_is_bitwise_stable():
    spec = StableHalf()
    small = forward_increments(spec, 2.0**-8, SEED, 100)
    large = forward_increments(spec, 2.0**-8, SEED, 3 * BLOCK + 17)
    assert np.array_equal(small, large[:100])
    bsmall = backward_increments(spec, 2.0**-8, SEED, 50)
    blarge = backward_increments(spec, 2.0**-8, SEED, BLOCK + 50)
    assert np.array_equal(bsmall, blarge[:50])


def test_build_windows_nest_bitwise():
    spec = GammaDrift(1.0, 1.0, 1.0)
    wide = build_two_sided_path(spec, 6, -300, 500, SEED)
    narrow = build_two_sided_path(spec, 6, -100, 200, SEED)
    sl = slice(wide.index_of(-100), wide.index_of(200) + 1)
    assert np.array_equal(wide.values[sl], narrow.values)


def test_aggregate_equal_increments():
    path = make_drift_path(level=3, k_min=-8, k_max=8, drift=1.0)
    coarse = aggregate_to_level(path, 0)
    assert np.array_equal(np.diff(coarse.values), np.ones(2))
    assert coarse.grid.k_min == -1 and coarse.grid.k_max == 1


def test_aggregate_identity():
    path = build_two_sided_path(StableHalf(), 5, -32, 32, SEED)
    assert aggregate_to_level(path, 5) is path


def test_aggregate_subsamples_bitwise():
    path = build_two_sided_path(GammaDrift(1.0, 1.0, 1.0), 12, -(2**12), 2**12, SEED)
    coarse = aggregate_to_level(path, 5)
    ks = np.arange(coarse.grid.k_min, coarse.grid.k_max + 1)
    assert np.array_equal(coarse.values, path.value_at_index(ks * 2**7))


def test_aggregate_consistency_sum_identity():
    path = build_two_sided_path(StableHalf(), 10, -(2**10), 2**10, SEED)
    fine_inc = np.diff(path.values)
    for n in range(0, 10):
        factor = 2 ** (10 - n)
        coarse = aggregate_to_level(path, n)
        coarse_inc = np.diff(coarse.values)
        starts = np.arange(coarse_inc.size) * factor
        sums = np.add.reduceat(fine_inc, starts)
        rel = np.abs(coarse_inc - sums) / coarse_inc
        assert rel.max() <= 1e-12


def test_aggregate_rejects_refinement():
    path = build_two_sided_path(StableHalf(), 4, -4, 4, SEED)
    with pytest.raises(ValueError):
        aggregate_to_level(path, 6)


def test_polygon_eval_nodes_bitwise():
    path = build_two_sided_path(GammaDrift(1.0, 1.0, 1.0), 7, -64, 64, SEED)
    ks = np.arange(-64, 65)
    taus = ks * path.grid.dt
    vals = polygon_eval(path, taus)
    assert np.array_equal(vals, path.values)


def test_polygon_eval_midpoint(drift_path):
    path = build_two_sided_path(StableHalf(), 6, -16, 16, SEED)
    dt = path.grid.dt
    for k in (-10, -1, 0, 5, 15):
        mid = (k + 0.5) * dt
        expected = 0.5 * (path.value_at_index(k) + path.value_at_index(k + 1))
        assert abs(polygon_eval(path, mid) - expected) <= 1e-15


def test_polygon_eval_pure_drift(drift_path):
    taus = np.linspace(-3.9, 3.9, 101)
    assert np.allclose(polygon_eval(drift_path, taus), taus, atol=1e-14)


def test_polygon_eval_window_errors(drift_path):
    with pytest.raises(WindowError):
        polygon_eval(drift_path, 4.1)
    with pytest.raises(WindowError):
        polygon_eval(drift_path, -4.1)


def test_polygon_inverse_nodes_and_roundtrip():
    path = build_two_sided_path(GammaDrift(1.0, 1.0, 1.0), 8, -128, 128, SEED)
    ks = np.arange(-128, 129)
    assert np.array_equal(polygon_inverse(path, path.values), ks * path.grid.dt)
    rng = np.random.default_rng(5)
    xs = rng.uniform(path.values[0], path.values[-1], size=500)
    taus = polygon_inverse(path, xs)
    assert np.max(np.abs(polygon_eval(path, taus) - xs)) <= 1e-12
    # and the other composition direction on times
    ts = rng.uniform(path.grid.t_min, path.grid.t_max, size=500)
    assert np.max(np.abs(polygon_inverse(path, polygon_eval(path, ts)) - ts)) <= 1e-12


def test_polygon_inverse_pure_drift():
    path = make_drift_path(level=5, k_min=-32, k_max=32, drift=2.0)
    assert abs(polygon_inverse(path, 1.0) - 0.5) <= 1e-15


def test_polygon_monotone():
    path = build_two_sided_path(StableHalf(), 8, -64, 64, SEED)
    taus = np.linspace(path.grid.t_min, path.grid.t_max, 4001)
    vals = polygon_eval(path, taus)
    assert np.all(np.diff(vals) > 0.0)


def test_step_eval_nodes_and_right_continuity():
    path = build_two_sided_path(StableHalf(), 6, -32, 32, SEED)
    dt = path.grid.dt
    for k in (-32, -7, 0, 13, 32):
        assert step_eval(path, k * dt) == path.value_at_index(k)
    for k in (-7, 0, 13):
        assert step_eval(path, k * dt + 2.0 ** (-6 - 3)) == path.value_at_index(k)


def test_step_eval_drift_discretization_bound():
    path = make_drift_path(level=16, k_min=-8, k_max=2**16, drift=1.0)
    assert abs(step_eval(path, 0.5) - 0.5) <= 2.0**-16


def test_hitting_time_nodes():
    path = build_two_sided_path(GammaDrift(1.0, 1.0, 1.0), 6, -32, 32, SEED)
    ks = np.arange(-32, 33)
    assert np.array_equal(hitting_time(path, path.values), ks * path.grid.dt)
    assert hitting_time(path, 0.0) == 0.0
    with pytest.raises(WindowError):
        hitting_time(path, path.values[-1] + 1.0)


def test_hitting_step_adjunction():
    # hitting_time(x) <= t  iff  step_eval(t) >= x, over grid times and random x
    rng = np.random.default_rng(99)
    for spec in (GammaDrift(1.0, 1.0, 1.0), PoissonDrift(1.0, 1.0, 1.0), StableHalf()):
        path = build_two_sided_path(spec, 6, -128, 128, SEED)
        ts = np.arange(-128, 129) * path.grid.dt
        step_vals = step_eval(path, ts)
        xs = rng.uniform(path.values[0], path.values[-1], size=200)
        hits = hitting_time(path, xs)
        lhs = hits[:, None] <= ts[None, :]
        rhs = step_vals[None, :] >= xs[:, None]
        assert np.array_equal(lhs, rhs)
        # closure: the path value at the hitting time dominates the level
        assert np.all(step_eval(path, hits) >= xs)


def test_process_dict_roundtrip():
    for spec in (GammaDrift(1.5, 0.5, 0.1), PoissonDrift(2.0, 0.5, 1.0), StableHalf()):
        assert process_from_dict(process_to_dict(spec)) == spec
    with pytest.raises(ValueError):
        process_from_dict({"family": "drift-only"})


def test_export_files(tmp_path):
    path = build_two_sided_path(GammaDrift(1.0, 1.0, 1.0), 4, -8, 8, SEED)
    csv_file = tmp_path / "path.csv"
    meta_file = tmp_path / "path.json"
    write_path_csv(path, csv_file)
    write_path_metadata(path, meta_file)
    lines = csv_file.read_text().splitlines()
    assert lines[0] == "k,t,x"
    assert len(lines) == 1 + 17
    k0, t0, x0 = lines[1].split(",")
    assert int(k0) == -8 and float(t0) == -0.5
    xs = np.array([float(line.split(",")[2]) for line in lines[1:]])
    assert np.array_equal(xs, path.values)
    meta = json.loads(meta_file.read_text())
    assert meta["process"]["family"] == "gamma"
    assert meta["n_max"] == 4
    assert meta["k_min"] == -8 and meta["k_max"] == 8
