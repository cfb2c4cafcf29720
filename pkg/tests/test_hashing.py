import numpy as np
from scipy import stats

from compgrowth.hashing import hash_keys, mix64, quantize, uniform01


def test_hash_is_a_pure_function_of_its_keys():
    a = hash_keys(5, 0, np.arange(10), 3)
    b = hash_keys(5, 0, np.arange(10)[::-1], 3)[::-1]
    assert np.array_equal(a, b)
    assert not np.array_equal(hash_keys(5, 0, np.arange(10), 3), hash_keys(6, 0, np.arange(10), 3))
    assert not np.array_equal(hash_keys(5, 0, np.arange(10), 3), hash_keys(5, 1, np.arange(10), 3))


def test_negative_keys_and_collisions():
    xs, ys = np.meshgrid(np.arange(-40, 40), np.arange(-40, 40))
    h = hash_keys(1, 0, xs.ravel(), ys.ravel())
    assert np.unique(h).size == h.size


def test_uniforms_look_uniform():
    u = uniform01(hash_keys(3, np.arange(20000)))
    assert u.min() >= 0.0 and u.max() < 1.0
    assert stats.kstest(u, "uniform").pvalue > 1e-3
    # neighbouring keys are not correlated
    assert abs(np.corrcoef(u[:-1], u[1:])[0, 1]) < 0.03


def test_mix64_scalar_and_array_agree():
    assert mix64(7)[0] == mix64(np.array([7, 8]))[0]


def test_quantized_values_add_exactly():
    rng = np.random.default_rng(0)
    x = quantize(rng.exponential(size=1000))
    assert np.all(x * 2.0**32 == np.round(x * 2.0**32))
    # any summation order gives the same result
    assert np.sum(x) == np.sum(x[::-1]) == np.sum(rng.permutation(x))
