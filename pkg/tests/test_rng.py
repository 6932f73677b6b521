"""Portable RNG: determinism, batching invariance, and stream values
pinned against an independent big-integer implementation."""

import numpy as np
import pytest
from scipy.special import ndtri

from kronrisk import PortableRng

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix64_py(z):
    # reference splitmix64 finalizer on python ints
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return (z ^ (z >> 31)) & _MASK


def _uniform_py(seed, i):
    word = _mix64_py((seed + (i + 1) * _GOLDEN) & _MASK)
    return ((word >> 11) + 0.5) * 2.0 ** -53


def test_uniform_matches_reference_implementation():
    for seed in (0, 1, 12345, 2**63 + 17):
        got = PortableRng(seed).uniform(8)
        expect = [_uniform_py(seed, i) for i in range(8)]
        assert got.tolist() == expect


def test_same_seed_same_stream():
    a = PortableRng(99).normal(1000)
    b = PortableRng(99).normal(1000)
    assert np.array_equal(a, b)


def test_batching_does_not_change_the_stream():
    whole = PortableRng(5).uniform(10)
    r = PortableRng(5)
    parts = np.concatenate([r.uniform(3), r.uniform(0), r.uniform(7)])
    assert np.array_equal(whole, parts)
    assert r.counter == 10


def test_uniforms_live_in_open_interval():
    u = PortableRng(2).uniform(100_000)
    assert u.min() > 0.0 and u.max() < 1.0


def test_normals_are_inverse_cdf_of_uniforms():
    r1, r2 = PortableRng(77), PortableRng(77)
    assert np.array_equal(r1.normal(64), ndtri(r2.uniform(64)))


def test_normal_moments_are_sane():
    z = PortableRng(31415).normal(200_000)
    assert abs(z.mean()) < 4.0 / np.sqrt(z.size)
    assert abs(z.std() - 1.0) < 0.01


def test_distinct_seeds_decorrelate():
    a = PortableRng(1).uniform(1000)
    b = PortableRng(2).uniform(1000)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.1


def test_seed_wraps_modulo_2_64():
    assert np.array_equal(PortableRng(5).uniform(4),
                          PortableRng(5 + 2**64).uniform(4))


def test_rejects_bad_arguments():
    with pytest.raises(ValueError):
        PortableRng(1.5)
    with pytest.raises(ValueError):
        PortableRng(1).uniform(-1)
