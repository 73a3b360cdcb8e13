import numpy as np
import pytest

from nlpde.neural import GradientBuffer
from nlpde.optim import Adam, AdamState, Sgd, adam_update, make_optimizer, sgd_update


def test_adam_first_step():
    s = AdamState(1, 0.01)
    delta = adam_update(s, np.array([0.5]))
    assert delta[0] == pytest.approx(0.01 * 0.5 / (0.5 + 1e-8), rel=1e-14)
    assert s.step_count == 1


def test_adam_zero_gradient():
    s = AdamState(3, 0.01)
    for _ in range(4):
        assert not adam_update(s, np.zeros(3)).any()


def test_adam_constant_gradient():
    s = AdamState(2, 0.01)
    adam_update(s, np.ones(2))
    delta = adam_update(s, np.ones(2))
    np.testing.assert_allclose(delta, 0.01 / (1 + 1e-8), rtol=1e-12)
    s = AdamState(2, 0.01)
    for _ in range(200):
        delta = adam_update(s, np.array([3.0, -2.0]))
    np.testing.assert_allclose(delta, [0.01, -0.01], rtol=1e-6)


def test_adam_first_step_bound_and_sign():
    rng = np.random.default_rng(0)
    g = rng.normal(0, 10, 1000) * 10.0 ** rng.integers(-9, 3, 1000)
    s = AdamState(1000, 0.02)
    delta = adam_update(s, g)
    assert np.all(np.abs(delta) <= 0.02 * np.abs(g) / (np.abs(g) + 1e-8) * (1 + 1e-12))
    assert np.all(np.abs(delta) < 0.02)
    assert np.all(np.sign(delta) == np.sign(g))
    later = adam_update(s, -0.1 * g)
    assert np.all(np.sign(later) == np.sign(s.first_moment))


def test_adam_state_and_schedule():
    s = AdamState(2, lambda m: 0.1 / m)
    assert not s.first_moment.any() and not s.second_moment.any()
    adam_update(s, np.ones(2))
    d2 = adam_update(s, np.ones(2))
    np.testing.assert_allclose(d2, 0.05 / (1 + 1e-8))
    with pytest.raises(ValueError):
        adam_update(s, np.ones(3))
    with pytest.raises(ValueError):
        AdamState(2, -1.0)
    a, b = AdamState(2, 0.01), AdamState(2, 0.01)
    g = np.array([0.3, -4.0])
    np.testing.assert_array_equal(adam_update(a, g), adam_update(b, g))


def test_sgd():
    assert not sgd_update(0.1, np.zeros(2)).any()
    np.testing.assert_allclose(sgd_update(0.1, np.array([1.0, -2.0])), [0.1, -0.2])
    g1, g2 = np.array([1.0, 3.0]), np.array([-0.5, 2.0])
    np.testing.assert_allclose(sgd_update(0.1, g1) + sgd_update(0.1, g2), sgd_update(0.1, g1 + g2))
    with pytest.raises(ValueError):
        sgd_update(0.0, g1)


def test_optimizer_objects():
    buf = GradientBuffer(np.array([0.5, -0.5]), 1)
    np.testing.assert_allclose(Adam(2, 0.01).delta(buf), [0.01, -0.01], rtol=1e-7)
    np.testing.assert_allclose(Sgd(2, 0.1).delta(buf), [0.05, -0.05])
    assert isinstance(make_optimizer("adam", 2, 0.01), Adam)
    with pytest.raises(ValueError):
        make_optimizer("rmsprop", 2, 0.01)
    with pytest.raises(ValueError):
        Sgd(2, 0.1).delta(np.ones(3))
