import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from compgrowth.continuum import (Ball, ContinuumError, EventGraphIndex, OutburstEventSet,
                                  RadiusLaw, ball_mesh, ball_point_gaps, ball_sup_times,
                                  ball_vs_point_gap,
                                  continuum_passage_time, continuum_territories,
                                  events_from_binary, events_to_binary, events_to_csv,
                                  simulate_outbursts, sweep_times)
from compgrowth.geometry import SiteConfiguration
from compgrowth.hashing import quantize
from oracles import continuum_chain_min


def _small_instance(rng, n):
    centers = rng.uniform(0, 4, size=(n, 2))
    delays = quantize(rng.uniform(0.1, 2.0, size=n))
    radii = rng.uniform(0.5, 2.5, size=n)
    return OutburstEventSet.from_arrays(centers, delays, radii, [0, 0], [4, 4])


@pytest.mark.parametrize("n_events", [0, 1, 2, 3, 4, 5])
def test_matches_chain_enumeration(n_events, backend):
    rng = np.random.default_rng(n_events)
    for trial in range(40):
        ev = _small_instance(rng, n_events)
        c = rng.uniform(0, 4, size=2)
        r = rng.uniform(0.3, 1.5)
        targets = np.vstack([rng.uniform(-1, 5, size=(6, 2)), ev.centers])
        got, trunc = continuum_passage_time(ev, Ball(c, r), targets)
        want = [continuum_chain_min(ev, c, r, y) for y in targets]
        assert got.tolist() == want
        assert np.array_equal(trunc, ~np.isfinite(got))


def test_chain_enumeration_with_a_horizon(backend):
    rng = np.random.default_rng(99)
    for trial in range(40):
        ev = _small_instance(rng, 5)
        ev.t_cap = float(quantize(rng.uniform(0.5, 4.0)))
        c = rng.uniform(0, 4, size=2)
        targets = rng.uniform(-1, 5, size=(8, 2))
        got, _ = continuum_passage_time(ev, Ball(c, 1.0), targets)
        want = [continuum_chain_min(ev, c, 1.0, y, ev.t_cap) for y in targets]
        assert got.tolist() == want


def test_hand_built_chain():
    ev = OutburstEventSet.from_arrays([[0.8, 0.0], [2.5, 0.0]], [0.25, 0.5], [2.0, 2.0],
                                      [-2, -2], [6, 6])
    t, _ = continuum_passage_time(ev, Ball([0.0, 0.0], 1.0), [[0.5, 0], [2.5, 0], [4.0, 0], [9, 0]])
    assert t.tolist() == [0.0, 0.25, 0.75, np.inf]


def test_centre_is_not_covered_by_its_own_burst():
    ev = OutburstEventSet.from_arrays([[2.0, 0.0]], [1.0], [1.0], [-2, -2], [4, 4])
    # the source ball touches the centre, which then fires; the centre itself stays at time 0
    ev_t, t = sweep_times(ev, Ball([1.0, 0.0], 1.0), [[2.0, 0.0], [2.9, 0.0]])
    assert ev_t.tolist() == [0.0] and t.tolist() == [0.0, 1.0]


def test_simulation_is_reproducible():
    law = RadiusLaw.exponential(2.0)
    a = simulate_outbursts(([0, 0], [5, 5]), 4.0, law, 7)
    b = simulate_outbursts(([0, 0], [5, 5]), 4.0, law, 7)
    c = simulate_outbursts(([0, 0], [5, 5]), 4.0, law, 8)
    assert a == b and not a == c


def test_poisson_count_and_marks():
    law = RadiusLaw.exponential(1.5)
    counts = [simulate_outbursts(([0, 0], [3, 2]), 5.0, law, s).count for s in range(200)]
    # mean 30: the sample mean has SE ~ 0.39
    assert abs(np.mean(counts) - 30.0) < 4 * np.sqrt(30.0 / 200)
    ev = simulate_outbursts(([0, 0], [20, 20]), 10.0, law, 1)
    assert stats.kstest(ev.radii, lambda r: law.cdf(r)).pvalue > 1e-3
    assert stats.kstest(ev.delays / 10.0, "uniform").pvalue > 1e-3
    assert stats.kstest(ev.centers[:, 0] / 20.0, "uniform").pvalue > 1e-3
    assert np.all(ev.radii <= ev.r_cap)
    assert ev.truncated_mass == pytest.approx(1e-6, rel=1e-6)
    assert np.all(ev.delays * 2.0**32 == np.round(ev.delays * 2.0**32))


def test_radius_laws():
    t = RadiusLaw.truncated_exponential(1.0, 2.0)
    q = np.linspace(0, 1, 11)
    assert np.allclose(t.cdf(t.ppf(q)), q)
    assert t.ppf(1.0) == pytest.approx(2.0)
    assert t.default_cap() == pytest.approx(2.0, abs=1e-4)
    assert RadiusLaw.constant(1.5).default_cap() == 1.5
    with pytest.raises(ContinuumError):
        RadiusLaw.truncated_exponential(1.0, np.inf)
    with pytest.raises(ContinuumError):
        RadiusLaw("gamma")


def test_index_matches_linear_scan():
    ev = simulate_outbursts(([0, 0], [10, 10]), 1.0, RadiusLaw.exponential(1.0), 3)
    idx = EventGraphIndex(ev)
    rng = np.random.default_rng(0)
    for y in np.vstack([rng.uniform(-1, 11, size=(200, 2)), ev.centers[:50]]):
        assert idx.covering(y) == idx.covering_linear(y)


def test_truncation_flags():
    ev = simulate_outbursts(([0, 0], [30, 8]), 3.0, RadiusLaw.constant(1.0), 2)
    t, trunc = continuum_passage_time(ev, Ball([1.0, 4.0]), [[2.0, 4.0], [29.0, 4.0]])
    assert not trunc[0] and trunc[1] and np.isinf(t[1])


def test_ball_mesh_contains_centre_and_stays_inside():
    m = ball_mesh([0.33, -0.2], 0.1)
    assert np.array_equal(m[0], [0.33, -0.2])
    assert np.all(((m - [0.33, -0.2]) ** 2).sum(axis=1) <= 1.0 + 1e-12)


@given(seed=st.integers(0, 2**31))
def test_ball_time_dominates_point_time(seed):
    ev = simulate_outbursts(([0, 0], [12, 12]), 30.0, RadiusLaw.constant(1.0), seed)
    x, ys = np.array([3.0, 3.0]), np.array([[8.0, 8.0], [4.5, 9.0]])
    point, _ = continuum_passage_time(ev, Ball(x), ys)
    ball = ball_sup_times(ev, Ball(x), ys, pitch=0.25)
    assert np.all(point <= ball)
    assert ball_vs_point_gap(ev, x, ys[0], pitch=0.25)[2] >= 0


@given(seed=st.integers(0, 2**31))
def test_ball_times_obey_the_triangle_inequality(seed):
    ev = simulate_outbursts(([0, 0], [10, 10]), 40.0, RadiusLaw.exponential(1.0), seed)
    pts = np.array([[2.0, 2.0], [7.5, 3.0], [5.0, 8.0]])
    T = np.stack([ball_sup_times(ev, Ball(p), pts, pitch=0.25) for p in pts])
    assert np.all(T >= 0)
    assert np.all(T[:, None, :] <= T[:, :, None] + T[None, :, :])


def test_territories_validation():
    ev = simulate_outbursts(([-6, -6], [6, 6]), 20.0, RadiusLaw.constant(1.0), 0)
    with pytest.raises(ContinuumError):
        continuum_territories(ev, SiteConfiguration(np.array([[0.0, 0], [1.5, 0]])), [-5, -5], 1.0, (11, 11))
    with pytest.raises(ContinuumError):
        continuum_territories(ev, SiteConfiguration(np.array([[-3.0, 0], [3.0, 0]])), [-7, -5], 1.0, (11, 11))
    tm = continuum_territories(ev, SiteConfiguration(np.array([[-3.0, 0], [3.0, 0]])), [-5, -5], 1.0,
                               (11, 11), keep_times=True)
    assert tm.type_times.shape == (2, 11, 11)
    assert tm.winner[0, 5] == 1 and tm.winner[10, 5] == 2


def test_event_file_round_trip():
    ev = simulate_outbursts(([0, 0], [4, 3]), 2.0, RadiusLaw.exponential(1.0), 11)
    assert events_from_binary(events_to_binary(ev)) == ev
    text = events_to_csv(ev)
    assert text.count("\n") == ev.count + 1
    with pytest.raises(ValueError):
        events_from_binary(b"XXXX" + events_to_binary(ev)[4:])


def test_ball_point_gaps_are_nonnegative():
    ev = simulate_outbursts(([-6, -6], [6, 6]), 30.0, RadiusLaw.constant(1.0), 3)
    rep = ball_point_gaps(ev, [0.0, 0.0], np.random.default_rng(0).uniform(-4, 4, (50, 2)))
    assert rep["n"] + rep["dropped"] == 50 and rep["n"] > 0
    assert np.all(rep["gaps"] >= 0)
    q = list(rep["percentiles"].values())
    assert q == sorted(q)
