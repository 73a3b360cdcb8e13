from dataclasses import replace
import math

import numpy as np
import pytest

from nlpde.problems import fisher_kpp, nonlocal_competition
from nlpde.stochastic import (
    NonlocalMeasure,
    RngStream,
    TimeGrid,
    gaussian_increment,
    sample_nonlocal,
    simulate_path,
    step,
)



def test_stream_replay_and_independence():
    a = RngStream(7, (1, 2)).normal(100)
    b = RngStream(7, (1, 2)).normal(100)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, RngStream(7, (1, 3)).normal(100))
    assert not np.array_equal(a, RngStream(8, (1, 2)).normal(100))
    # prefix paths are distinct streams too
    assert not np.array_equal(RngStream(7, (1,)).normal(100), RngStream(7, (1, 0)).normal(100))
    assert RngStream(7).child(1, 2).path == (1, 2)


def test_sibling_streams_uncorrelated():
    base = RngStream(11)
    x = np.array([base.child(k, 0).normal() for k in range(100_000)])
    y = np.array([base.child(k, 1).normal() for k in range(100_000)])
    assert abs(np.corrcoef(x, y)[0, 1]) < 0.01


def test_time_grid():
    g = TimeGrid(0.2, 10)
    t, tau = g.forward_times, g.reversed_times
    assert t[0] == 0.0 and t[-1] == pytest.approx(0.2)
    np.testing.assert_allclose(tau, 0.2 - t[::-1])
    np.testing.assert_allclose(t, np.arange(11) * 0.02)
    with pytest.raises(ValueError):
        TimeGrid(0.0, 3)
    with pytest.raises(ValueError):
        TimeGrid(1.0, 0)


def test_gaussian_increment_moments():
    rng = RngStream(1)
    np.testing.assert_array_equal(gaussian_increment(rng, 3, 0.0), np.zeros(3))
    draws = gaussian_increment(RngStream(2), 2, 1.0, size=1_000_000)
    assert np.all(np.abs(draws.mean(axis=0)) < 4e-3)
    draws = gaussian_increment(RngStream(3), 1, 0.25, size=1_000_000)
    assert draws.var() == pytest.approx(0.25, rel=0.02)
    with pytest.raises(ValueError):
        gaussian_increment(rng, 1, -1.0)


def test_step_examples():
    fk = fisher_kpp(1, 0.2)
    np.testing.assert_array_equal(step(fk, 0.1, 0.0, np.zeros(1), np.zeros(1)), [0.0])
    np.testing.assert_allclose(step(fk, 0.1, 0.0, np.array([0.45]), np.array([1.0])), [0.45])
    comp = nonlocal_competition(1, 0.2)
    np.testing.assert_allclose(step(comp, 0.1, 0.0, np.zeros(1), np.array([1.0])), [0.1])


def test_step_with_drift():
    comp = replace(nonlocal_competition(2, 1.0), mu=lambda y: np.ones_like(y))
    out = step(comp, 0.5, 0.25, np.zeros((3, 2)), np.zeros((3, 2)))
    np.testing.assert_allclose(out, np.full((3, 2), 0.25))


def _still(problem):
    return replace(problem, sigma_action=lambda x, v: 0.0 * np.asarray(v))


def test_simulate_path_basics():
    x0 = np.array([0.1, -0.2])
    path = simulate_path(_still(fisher_kpp(2, 1.0)), TimeGrid(1.0, 1), x0, RngStream(0))
    np.testing.assert_array_equal(path[1], x0)
    fk = fisher_kpp(3, 5.0)
    fk = replace(fk, sigma_action=lambda x, v: 3.0 * np.asarray(v))
    paths = simulate_path(fk, TimeGrid(5.0, 50), np.zeros((200, 3)), RngStream(1))
    assert paths.states.shape == (51, 200, 3)
    assert np.all(fk.domain.contains(paths.states))
    again = simulate_path(fk, TimeGrid(5.0, 50), np.zeros((200, 3)), RngStream(1))
    np.testing.assert_array_equal(paths.states, again.states)
    short = simulate_path(fk, TimeGrid(5.0, 50), np.zeros((200, 3)), RngStream(1), n_steps=4)
    np.testing.assert_array_equal(short.states, paths.states[:5])
    with pytest.raises(ValueError):
        simulate_path(fk, TimeGrid(5.0, 50), np.full(3, 0.7), RngStream(1))


def test_independent_paths_uncorrelated():
    comp = nonlocal_competition(1, 1.0)
    grid = TimeGrid(1.0, 4)
    a = simulate_path(comp, grid, np.zeros((100_000, 1)), RngStream(5, (0,)))[-1][:, 0]
    b = simulate_path(comp, grid, np.zeros((100_000, 1)), RngStream(5, (1,)))[-1][:, 0]
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.01


def test_nonlocal_samplers():
    z, w = sample_nonlocal(NonlocalMeasure.uniform_hypercube(2), np.zeros(2), RngStream(1), size=1_000_000)
    assert np.all(np.abs(z.mean(axis=0)) < 4e-3)
    assert np.all(w == 1.0)
    z, _ = sample_nonlocal(NonlocalMeasure.gaussian_around_x(0.1), np.zeros(1), RngStream(2), size=1_000_000)
    assert z.var() == pytest.approx(0.005, rel=0.02)
    m = NonlocalMeasure.weighted_gaussian(1 / 50)
    for d in (1, 3):
        assert m.density_weight(np.zeros(d)) == pytest.approx((2 * math.pi) ** (-d / 2) * 50.0**d)
    z, w = sample_nonlocal(m, np.zeros(2), RngStream(3), size=10)
    assert np.all(w > 0)
    z, w = sample_nonlocal(NonlocalMeasure.dirac(), np.array([0.2, 0.3]), RngStream(4), size=3)
    np.testing.assert_array_equal(z, np.tile([0.2, 0.3], (3, 1)))
