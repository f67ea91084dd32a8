"""Core model tests: sampling laws, toroidal metric, kernel, neighbor queries."""

import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adrcm.model import (
    MarkedPoint,
    ModelParams,
    ParameterError,
    PointConfig,
    add_point,
    config_from_csv,
    config_to_csv,
    connects,
    derive_seed,
    down_neighbors,
    sample_config,
    torus_dist,
    up_neighbors,
    wrap_position,
)
from adrcm.theory import lambda_down, lambda_up

from oracles import config_from_points, neighbors_oracle, random_config


# -- parameters and points -------------------------------------------------


@pytest.mark.parametrize(
    "gamma,beta,n",
    [(0.0, 1.0, 1.0), (1.0, 1.0, 1.0), (0.5, 0.0, 1.0), (0.5, -1.0, 1.0), (0.5, 1.0, 0.0)],
)
def test_invalid_params_rejected(gamma, beta, n):
    with pytest.raises(ParameterError):
        ModelParams(gamma, beta, n)


def test_invalid_mark_rejected():
    with pytest.raises(ParameterError):
        MarkedPoint(0.0, 0.0)
    with pytest.raises(ParameterError):
        MarkedPoint(0.0, 1.5)


# -- torus metric -----------------------------------------------------------


def test_torus_dist_wraparound_shorter():
    n = 7.0
    assert torus_dist(-0.4 * n, 0.4 * n, n) == pytest.approx(0.2 * n)


def test_torus_dist_identity_and_antipode():
    assert torus_dist(1.23, 1.23, 5.0) == 0.0
    assert torus_dist(0.0, 2.5, 5.0) == pytest.approx(2.5)


@given(
    x=st.floats(-50, 50),
    y=st.floats(-50, 50),
    n=st.floats(0.1, 100.0),
)
@settings(max_examples=200, deadline=None)
def test_torus_dist_properties(x, y, n):
    d = torus_dist(x, y, n)
    assert 0.0 <= d <= n / 2 + 1e-9
    assert d == pytest.approx(torus_dist(y, x, n))


def test_wrap_position_canonical_range():
    n = 10.0
    for x in (-5.0, 5.0, 17.3, -123.4, 4.999999):
        w = wrap_position(x, n)
        assert -5.0 <= w < 5.0


# -- connection kernel --------------------------------------------------------


def test_connects_hand_evaluations():
    params = ModelParams(0.5, 1.0, 100.0)
    # dist 1, sqrt(0.25) * sqrt(0.64) = 0.4 <= 1
    assert connects(MarkedPoint(0.0, 0.25), MarkedPoint(1.0, 0.64), params)
    # dist 2 beats the kernel bound 1 for marks near 1
    assert not connects(MarkedPoint(0.0, 1.0), MarkedPoint(2.0, 1.0 - 1e-9), params)


def test_connects_zero_distance_always():
    params = ModelParams(0.9, 0.01, 100.0)
    assert connects(MarkedPoint(3.0, 0.001), MarkedPoint(3.0, 0.999), params)


def test_connects_symmetric_on_random_pairs():
    rng = np.random.default_rng(7)
    params = ModelParams(0.35, 0.8, 20.0)
    for _ in range(300):
        a = MarkedPoint(rng.uniform(-10, 10), rng.uniform(0.01, 1.0))
        b = MarkedPoint(rng.uniform(-10, 10), rng.uniform(0.01, 1.0))
        assert connects(a, b, params) == connects(b, a, params)


# -- sampling ----------------------------------------------------------------


def test_sample_config_poisson_mean():
    params = ModelParams(0.3, 1.0, 1000.0)
    reps = 10000
    counts = np.array([len(sample_config(params, derive_seed(11, i))) for i in range(reps)])
    se = math.sqrt(1000.0 / reps)
    assert abs(counts.mean() - 1000.0) <= 3.0 * se


def test_sample_config_deterministic():
    params = ModelParams(0.3, 1.0, 500.0)
    a = sample_config(params, 987654321)
    b = sample_config(params, 987654321)
    assert a == b
    assert np.array_equal(a.positions, b.positions)
    assert np.array_equal(a.marks, b.marks)


def test_sample_config_empty_fraction_tiny_volume():
    params = ModelParams(0.3, 1.0, 0.001)
    reps = 100000
    empty = sum(len(sample_config(params, derive_seed(13, i))) == 0 for i in range(reps))
    target = math.exp(-0.001)
    se = math.sqrt(target * (1 - target) / reps)
    assert abs(empty / reps - target) <= 3.0 * se


def test_sample_config_marks_in_range_and_distinct():
    params = ModelParams(0.3, 1.0, 2000.0)
    cfg = sample_config(params, 5)
    assert np.all(cfg.marks > 0.0) and np.all(cfg.marks <= 1.0)
    assert np.unique(cfg.marks).size == len(cfg)
    assert np.all(np.diff(cfg.positions) >= 0.0)


def test_mark_order_permutation():
    params = ModelParams(0.3, 1.0, 100.0)
    cfg = sample_config(params, 21)
    order = cfg.mark_order
    assert sorted(order.tolist()) == list(range(len(cfg)))
    assert np.all(np.diff(cfg.marks[order]) > 0.0)


# -- neighbor queries ----------------------------------------------------------


def test_up_neighbors_empty_config():
    params = ModelParams(0.5, 1.0, 10.0)
    cfg = config_from_points(params, [])
    assert up_neighbors(cfg, MarkedPoint(0.0, 0.5)).size == 0
    assert down_neighbors(cfg, MarkedPoint(0.0, 0.5)).size == 0


def test_up_neighbors_single_point_example():
    params = ModelParams(0.5, 1.0, 50.0)
    cfg = config_from_points(params, [(1.0, 0.64)])
    found = up_neighbors(cfg, MarkedPoint(0.0, 0.25))
    assert found.tolist() == [0]


def test_down_neighbors_all_lower_mark():
    params = ModelParams(0.4, 1.2, 60.0)
    rng = np.random.default_rng(3)
    cfg = random_config(params, rng, 40)
    p = MarkedPoint(0.0, 0.7)
    for i in down_neighbors(cfg, p).tolist():
        assert cfg.marks[i] < 0.7


def test_neighbor_queries_match_brute_force():
    rng = np.random.default_rng(2024)
    for trial in range(500):
        gamma = rng.uniform(0.05, 0.95)
        beta = rng.uniform(0.2, 2.0)
        n = rng.uniform(1.0, 30.0)
        params = ModelParams(gamma, beta, n)
        cfg = random_config(params, rng, 50)
        x = rng.uniform(-n / 2, n / 2)
        u = 1.0 - rng.random()
        p = MarkedPoint(x, u)
        ups, downs = neighbors_oracle(cfg, p)
        assert sorted(up_neighbors(cfg, p).tolist()) == ups
        assert sorted(down_neighbors(cfg, p).tolist()) == downs


def test_neighbors_of_member_point_match_brute_force():
    rng = np.random.default_rng(77)
    for trial in range(200):
        params = ModelParams(rng.uniform(0.1, 0.9), rng.uniform(0.3, 1.5), 12.0)
        cfg = random_config(params, rng, 30)
        if len(cfg) == 0:
            continue
        i = int(rng.integers(len(cfg)))
        p = cfg.point(i)
        ups, downs = neighbors_oracle(cfg, p, member_index=i)
        assert sorted(up_neighbors(cfg, p).tolist()) == ups
        assert sorted(down_neighbors(cfg, p).tolist()) == downs


def test_up_down_partition_neighbors():
    rng = np.random.default_rng(15)
    params = ModelParams(0.3, 1.0, 25.0)
    for _ in range(50):
        cfg = random_config(params, rng, 40)
        p = MarkedPoint(float(rng.uniform(-12.5, 12.5)), 1.0 - float(rng.random()))
        ups = set(up_neighbors(cfg, p).tolist())
        downs = set(down_neighbors(cfg, p).tolist())
        assert not (ups & downs)
        o_ups, o_downs = neighbors_oracle(cfg, p)
        assert (ups | downs) == set(o_ups) | set(o_downs)


def test_tied_marks_split_by_index():
    params = ModelParams(0.5, 2.0, 10.0)
    cfg = config_from_points(params, [(-1.0, 0.5), (1.0, 0.5)])
    p0, p1 = cfg.point(0), cfg.point(1)
    assert up_neighbors(cfg, p0).tolist() == [1]
    assert down_neighbors(cfg, p0).size == 0
    assert down_neighbors(cfg, p1).tolist() == [0]


# -- add_point -----------------------------------------------------------------


def test_add_point_to_empty():
    params = ModelParams(0.5, 1.0, 10.0)
    cfg = config_from_points(params, [])
    grown = add_point(cfg, MarkedPoint(1.0, 0.5))
    assert len(grown) == 1 and len(cfg) == 0


def test_add_point_duplicate_rejected():
    params = ModelParams(0.5, 1.0, 10.0)
    cfg = config_from_points(params, [(1.0, 0.5)])
    with pytest.raises(ParameterError):
        add_point(cfg, MarkedPoint(1.0, 0.5))


def test_add_point_monotone_up_neighbors():
    rng = np.random.default_rng(8)
    params = ModelParams(0.3, 1.0, 20.0)
    for _ in range(50):
        cfg = random_config(params, rng, 25)
        if len(cfg) == 0:
            continue
        probe = cfg.point(int(rng.integers(len(cfg))))
        before = up_neighbors(cfg, probe).size
        extra = MarkedPoint(float(rng.uniform(-10, 10)), 1.0 - float(rng.random()))
        try:
            grown = add_point(cfg, extra)
        except ParameterError:
            continue
        after = up_neighbors(grown, probe).size
        assert before <= after <= before + 1


def test_add_point_down_neighbors_match_oracle():
    rng = np.random.default_rng(9)
    params = ModelParams(0.45, 0.7, 15.0)
    for _ in range(100):
        cfg = random_config(params, rng, 20)
        extra = MarkedPoint(float(rng.uniform(-7.5, 7.5)), 1.0 - float(rng.random()))
        try:
            grown = add_point(cfg, extra)
        except ParameterError:
            continue
        idx = grown.index_of(MarkedPoint(wrap_position(extra.x, 15.0), extra.u))
        _, downs = neighbors_oracle(grown, grown.point(idx), member_index=idx)
        assert sorted(down_neighbors(grown, grown.point(idx)).tolist()) == downs


def test_config_arrays_immutable():
    params = ModelParams(0.5, 1.0, 10.0)
    cfg = sample_config(params, 1)
    with pytest.raises(ValueError):
        cfg.positions[0] = 0.0


# -- Palm statistics -----------------------------------------------------------


def test_palm_down_mean_matches_intensity():
    params = ModelParams(0.3, 0.5, 200.0)
    reps = 3000
    counts = np.empty(reps)
    for i in range(reps):
        cfg = sample_config(params, derive_seed(31, i))
        counts[i] = down_neighbors(cfg, MarkedPoint(0.0, 0.37)).size
    lam = lambda_down(params)
    se = counts.std(ddof=1) / math.sqrt(reps)
    assert abs(counts.mean() - lam) <= 3.0 * se


def test_palm_up_mean_matches_intensity():
    params = ModelParams(0.3, 0.5, 200.0)
    u = 0.1
    reps = 3000
    counts = np.empty(reps)
    for i in range(reps):
        cfg = sample_config(params, derive_seed(37, i))
        counts[i] = up_neighbors(cfg, MarkedPoint(0.0, u)).size
    lam = lambda_up(u, params)
    se = counts.std(ddof=1) / math.sqrt(reps)
    assert abs(counts.mean() - lam) <= 3.0 * se


# -- CSV round trip --------------------------------------------------------------


def test_csv_round_trip_exact():
    params = ModelParams(0.3, 1.0, 300.0)
    cfg = sample_config(params, 123)
    buffer = io.StringIO()
    config_to_csv(cfg, buffer)
    text = buffer.getvalue()
    assert text.startswith("x,u\n")
    assert len(text.strip().splitlines()) == len(cfg) + 1
    back = config_from_csv(io.StringIO(text), params, seed=cfg.seed)
    assert np.array_equal(back.positions, cfg.positions)
    assert np.array_equal(back.marks, cfg.marks)


def test_csv_rejects_bad_header():
    params = ModelParams(0.3, 1.0, 10.0)
    with pytest.raises(ParameterError):
        config_from_csv(io.StringIO("a,b\n1,0.5\n"), params)


def test_point_config_validation():
    params = ModelParams(0.3, 1.0, 10.0)
    with pytest.raises(ParameterError):
        PointConfig(params, np.array([0.0]), np.array([1.5]), 0)
    with pytest.raises(ParameterError):
        PointConfig(params, np.array([6.0]), np.array([0.5]), 0)
    with pytest.raises(ParameterError):
        PointConfig(params, np.array([1.0, 0.0]), np.array([0.5, 0.6]), 0)
