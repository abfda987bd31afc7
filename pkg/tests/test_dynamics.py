import io
import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from netphase.dynamics import (
    DegenerateSeriesError,
    DelayVectors,
    InsufficientDataError,
    autocorrelation_delay,
    embed,
    estimate_dimension,
    fit_occupancy,
    fnn_curve,
    fnn_fraction,
    fnn_test,
    load_occupancy,
    lorenz,
    novelty_score,
    novelty_scores,
    project,
    read_fnn_csv,
    read_points_csv,
    save_occupancy,
    score_series,
    sine,
    uniform_noise,
    write_fnn_csv,
    write_points_csv,
)
from netphase.dynamics.fnn import nearest_brute, nearest_kdtree

# ---------------------------------------------------------------- embedding


def test_embed_examples():
    s = [1, 2, 3, 4, 5, 6]
    assert embed(s, 3, 1).vectors.tolist() == [[1, 2, 3], [2, 3, 4], [3, 4, 5], [4, 5, 6]]
    assert embed(s, 2, 2).vectors.tolist() == [[1, 3], [2, 4], [3, 5], [4, 6]]


def test_embed_too_short():
    with pytest.raises(InsufficientDataError) as info:
        embed([1, 2, 3], 3, 2)
    assert info.value.minimum == 5
    assert "5" in str(info.value)


@pytest.mark.parametrize("d,T", [(0, 1), (1, 0), (2, -1)])
def test_embed_rejects_nonpositive(d, T):
    with pytest.raises(ValueError):
        embed([1.0] * 10, d, T)


def _embed_oracle(s, d, T):
    return [[s[n + k * T] for k in range(d)] for n in range(len(s) - T * (d - 1))]


def test_embed_exhaustive_small():
    for n in range(1, 13):
        s = [float(10 * i + 1) for i in range(n)]
        for d, T in itertools.product(range(1, 5), repeat=2):
            if n < T * (d - 1) + 1:
                with pytest.raises(InsufficientDataError):
                    embed(s, d, T)
                continue
            dv = embed(s, d, T)
            assert dv.vectors.tolist() == _embed_oracle(s, d, T)
            assert len(dv) == n - T * (d - 1)


# ---------------------------------------------------------------- projection


def test_project_examples():
    v = np.array([[1, 2, 3], [4, 5, 6]], dtype=float)
    assert project(v, (0, 2)).tolist() == [[1, 3], [4, 6]]
    assert project(v, (0, 1, 2)).tolist() == v.tolist()
    with pytest.raises(IndexError):
        project(v, (0, 3))
    with pytest.raises(ValueError):
        project(v, (0,))


# ---------------------------------------------------------------- autocorrelation


def test_acf_delay_sine_half_period():
    # the first autocorrelation minimum of a sine sits at half its period
    assert autocorrelation_delay(sine(2000, 40.0)) == 20


def test_acf_constant_is_degenerate():
    with pytest.raises(DegenerateSeriesError):
        autocorrelation_delay(np.ones(50))


# ---------------------------------------------------------------- FNN


def test_sine_quarter_period_d2():
    # an irrational period keeps samples from repeating exactly
    period = 50 * math.sqrt(2)
    s = sine(1000, period)
    T = round(period / 4)
    assert fnn_fraction(s, 2, T) < 0.05
    curve = fnn_curve(s, 4, T)
    assert curve.fractions[0] > 0.3
    assert curve.fractions[1] < 0.05


def test_uniform_noise_d5():
    # one draw sits on either side of 0.2 about half the time; assert on a fixed batch mean
    vals = []
    for seed in range(20):
        x = uniform_noise(1000, seed=seed)
        vals.append(fnn_fraction(x, 5, autocorrelation_delay(x)))
    assert np.mean(vals) > 0.2


def test_noise_never_reaches_threshold():
    x = uniform_noise(2000, seed=3)
    assert estimate_dimension(fnn_curve(x, 8), 0.05) is None


def test_constant_is_degenerate():
    with pytest.raises(DegenerateSeriesError):
        fnn_fraction(np.full(100, 2.0), 2, 1)


def test_too_few_points():
    with pytest.raises(InsufficientDataError):
        fnn_fraction(np.arange(12.0), 3, 2)


def _verdicts_oracle(s, d, T, r_tol, a_tol, theiler):
    """Direct O(N^2) loop over the definition."""
    s = np.asarray(s, dtype=float)
    A = s.std()
    m_pts = len(s) - d * T
    out = []
    for n in range(m_pts):
        best, best_m = math.inf, -1
        for m in range(m_pts):
            if abs(n - m) <= theiler:
                continue
            r2 = sum((s[n + k * T] - s[m + k * T]) ** 2 for k in range(d))
            if r2 < best:
                best, best_m = r2, m
        if best_m < 0:
            out.append(None)
            continue
        rd = math.sqrt(best)
        extra = abs(s[n + d * T] - s[best_m + d * T])
        rd1 = math.sqrt(best + extra ** 2)
        first = extra / rd > r_tol if rd > 0 else extra > 0
        out.append((best_m, first or rd1 / A > a_tol))
    return out


@pytest.mark.parametrize("seed", range(4))
def test_fnn_matches_definition_loop(seed):
    rng = np.random.default_rng(seed)
    s = np.cumsum(rng.normal(size=120))
    d, T = 2, 3
    res = fnn_test(s, d, T, theiler=T, method="brute")
    expected = _verdicts_oracle(s, d, T, 15.0, 2.0, T)
    for n, exp in enumerate(expected):
        if exp is None:
            continue
        assert res.neighbor[n] == exp[0]
        assert bool(res.is_false[n]) == exp[1]


def test_kdtree_equals_brute_force_on_random_series():
    rng = np.random.default_rng(2024)
    for case in range(50):
        n = int(rng.integers(30, 501))
        kind = case % 3
        if kind == 0:
            s = rng.normal(size=n)
        elif kind == 1:
            s = np.round(rng.normal(size=n), 1)  # many exact ties
        else:
            s = np.sin(np.arange(n) * rng.uniform(0.05, 0.5)) + 0.01 * rng.normal(size=n)
        d = int(rng.integers(1, 6))
        T = int(rng.integers(1, 5))
        if n - d * T < 10:
            continue
        a = fnn_test(s, d, T, method="brute")
        b = fnn_test(s, d, T, method="kdtree")
        assert np.array_equal(a.neighbor, b.neighbor)
        assert np.array_equal(a.distance, b.distance)
        assert np.array_equal(a.is_false, b.is_false)
        assert a.fraction == b.fraction


def test_nearest_tie_breaks_to_smaller_index():
    Y = np.array([[0.0], [1.0], [2.0], [1.0], [0.0]])
    for fn in (nearest_brute, nearest_kdtree):
        idx, _ = fn(Y, 0)
        assert idx.tolist() == [4, 3, 1, 1, 0]


@given(st.integers(0, 10_000), st.floats(0.01, 1000.0), st.integers(1, 4), st.integers(1, 3))
def test_fnn_scale_invariant(seed, a, d, T):
    s = np.random.default_rng(seed).normal(size=200)
    r1 = fnn_test(s, d, T)
    r2 = fnn_test(a * s, d, T)
    assert np.array_equal(r1.neighbor, r2.neighbor)
    assert np.array_equal(r1.is_false, r2.is_false)


def test_fraction_in_unit_interval():
    s = np.random.default_rng(0).normal(size=300)
    for d in range(1, 6):
        assert 0.0 <= fnn_fraction(s, d, 1) <= 1.0


def test_curve_skips_short_dimensions():
    s = np.random.default_rng(0).normal(size=30)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        curve = fnn_curve(s, 10, 3)
    assert curve.dimensions == sorted(curve.dimensions) and curve.dimensions[0] == 1
    assert curve.skipped and caught
    assert all(d > curve.dimensions[-1] for d, _ in curve.skipped)


def test_estimate_dimension_examples():
    assert estimate_dimension([1.0, 0.6, 0.3, 0.02, 0.01], 0.05) == 4
    assert estimate_dimension([0.9, 0.5, 0.3], 0.05) is None
    with pytest.raises(ValueError):
        estimate_dimension([])


def test_lorenz_generator_shape_and_determinism():
    a = lorenz(500)
    b = lorenz(500)
    assert a.shape == (500, 3)
    assert np.array_equal(a, b)
    assert a[:, 2].min() > 0  # z stays positive on the attractor


# ---------------------------------------------------------------- occupancy


def test_identical_points_one_cell():
    m = fit_occupancy(np.full((100, 2), 3.0), resolution=8)
    assert m.total == 100
    assert m.counts.max() == 100 and np.count_nonzero(m.counts) == 1


def test_grid_filling_points_equal_counts():
    g = np.array([[x, y] for x in range(10) for y in range(10)], dtype=float)
    m = fit_occupancy(g, resolution=2)
    assert m.counts.tolist() == [[25, 25], [25, 25]]


def test_boundary_lands_in_last_cell():
    pts = np.array([[i / 99, i / 99] for i in range(100)])
    m = fit_occupancy(pts, resolution=4)
    assert m.cells(np.array([[1.0, 1.0]])).tolist() == [[3, 3]]


def test_lorenz_projection_partial_occupancy():
    x = lorenz(3000)[:, 0]
    m = fit_occupancy(embed(x, 3, 6), (0, 1), 32)
    assert 0 < m.occupied_fraction < 1
    assert m.total == len(x) - 12


def test_too_few_training_points():
    with pytest.raises(InsufficientDataError):
        fit_occupancy(np.zeros((99, 2)))


def test_novelty_training_points_zero():
    x = lorenz(2000)[:, 0]
    dv = embed(x, 2, 6)
    m = fit_occupancy(dv, (0, 1), 32)
    assert not novelty_scores(m, dv.vectors).any()
    assert not score_series(m, x).any()


def _exhaustive_score(m, point):
    cell = m.cells(np.asarray(point)[None, :])[0]
    occupied = np.argwhere(m.counts > 0)
    if any((occupied == cell).all(axis=1)):
        return 0
    return int(np.abs(occupied - cell).max(axis=1).min())


def test_novelty_matches_exhaustive_scan():
    rng = np.random.default_rng(9)
    pts = rng.normal(size=(300, 2)) * [1.0, 0.3]
    m = fit_occupancy(pts, resolution=16)
    probes = rng.uniform(-6, 6, size=(400, 2))
    assert novelty_scores(m, probes).tolist() == [_exhaustive_score(m, p) for p in probes]


@pytest.mark.parametrize("dy", [0.0, 3.0, 7.5, 40.0])
def test_far_outlier_single_cluster(dy):
    # identical training points collapse into cell (0, 0) with unit-width cells
    m = fit_occupancy(np.full((100, 2), 2.0), resolution=32)
    probe = np.array([2.0 + 1e9, 2.0 + dy])
    score = novelty_score(m, probe)
    assert score == _exhaustive_score(m, probe)
    assert score == 31 - 0


def test_adjacent_empty_cell_scores_one():
    pts = np.array([[0.0, 0.0]] * 50 + [[1.0, 1.0]] * 50)
    m = fit_occupancy(pts, resolution=4)
    width = m.cell_width
    assert novelty_score(m, [width[0] * 1.5, width[1] * 0.5]) == 1


@given(st.integers(0, 2**32 - 1), st.floats(0.05, 0.95))
def test_novelty_monotone_along_axis(seed, y):
    # L-shaped normal region: bottom row plus left column of the unit square
    rng = np.random.default_rng(seed)
    t = rng.uniform(0, 1, 150)
    pts = np.vstack([np.column_stack([t, np.zeros(150)]), np.column_stack([np.zeros(150), t])])
    m = fit_occupancy(pts, resolution=32)
    xs = np.linspace(0, 0.95, 120)
    scores = novelty_scores(m, np.column_stack([xs, np.full_like(xs, y)]))
    assert scores[0] == 0
    assert (np.diff(scores) >= 0).all()


def test_novelty_shape_error():
    m = fit_occupancy(np.random.default_rng(0).normal(size=(120, 2)))
    with pytest.raises(ValueError):
        novelty_score(m, [1.0, 2.0, 3.0])


def test_occupancy_save_load(tmp_path):
    x = lorenz(1000)[:, 0]
    m = fit_occupancy(embed(x, 3, 5), (0, 2), 16)
    save_occupancy(m, tmp_path / "m.npz")
    back = load_occupancy(tmp_path / "m.npz")
    assert back.axes == m.axes and back.resolution == m.resolution and back.embedding == (3, 5)
    assert np.array_equal(back.counts, m.counts)
    assert np.array_equal(score_series(back, x), score_series(m, x))


# ---------------------------------------------------------------- CSV


def test_points_csv_round_trip():
    dv = embed(np.arange(10.0) * 0.5, 3, 2)
    buf = io.StringIO()
    write_points_csv(buf, dv)
    assert buf.getvalue().splitlines()[0] == "y0,y1,y2"
    buf.seek(0)
    assert read_points_csv(buf).tolist() == dv.vectors.tolist()


def test_fnn_csv_round_trip():
    curve = fnn_curve(sine(500, 40.0), 3, 10)
    buf = io.StringIO()
    write_fnn_csv(buf, curve)
    assert buf.getvalue().splitlines()[0] == "d,fraction,neighbors"
    buf.seek(0)
    back = read_fnn_csv(buf)
    assert back.fractions == curve.fractions and back.dimensions == [1, 2, 3]
