import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from bayespec.rng import RngStream, derive_key, derive_keys, normals, uniforms


def test_derive_keys_matches_scalar_path():
    keys = derive_keys(42, "move", 3, count=50)
    assert keys.dtype == np.uint64
    assert [int(k) for k in keys] == [derive_key(42, "move", 3, i) for i in range(50)]


def test_keys_differ_between_tags_and_seeds():
    a = {derive_key(s, t) for s in range(20) for t in ("a", "b", "c")}
    assert len(a) == 60


@given(st.integers(0, 2 ** 63), st.integers(0, 2 ** 40))
def test_uniform_range(key, c0):
    u = uniforms(np.uint64(key), np.arange(c0, c0 + 256, dtype=np.uint64))
    assert np.all((u >= 0.0) & (u < 1.0))


def test_normal_moments():
    z = normals(np.uint64(derive_key(1, "z")), 2 * np.arange(400_000, dtype=np.uint64))
    se = 1 / np.sqrt(len(z))
    assert abs(z.mean()) < 4 * se
    assert abs(z.var() - 1) < 4 * np.sqrt(2) * se
    assert abs((z ** 3).mean()) < 4 * np.sqrt(15) * se


def test_stream_is_pure_function_of_counter():
    s = RngStream(derive_key(3))
    first = s.uniform(10)
    assert s.counter == 10
    again = RngStream(s.key)
    assert np.array_equal(again.uniform(10), first)
    mid = RngStream(s.key, counter=4)
    assert mid.uniform() == first[4]


def test_normal_consumes_two_counters():
    s = RngStream(7)
    s.normal(5)
    assert s.counter == 10


def test_generator_is_reproducible():
    a = RngStream(9).generator().standard_normal(4)
    b = RngStream(9).generator().standard_normal(4)
    assert np.array_equal(a, b)
