import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dimfusion import tensor as T


def make_input(rng, seq=5, heads=2, head_dim=8):
    return T.Tensor(rng.normal(size=(seq, heads, head_dim)), requires_grad=True)


def test_zero_position_is_identity():
    rng = np.random.default_rng(0)
    x = make_input(rng, seq=3)
    positions = np.zeros((3, 3), dtype=np.int64)
    y = T.rope_3d(x, positions, (2, 4, 2))
    np.testing.assert_allclose(y.data, x.data, atol=1e-15)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_norm_preserved_per_token_head(seed):
    rng = np.random.default_rng(seed)
    seq = int(rng.integers(1, 7))
    x = make_input(rng, seq=seq)
    positions = rng.integers(0, 50, size=(seq, 3))
    y = T.rope_3d(x, positions, (2, 4, 2))
    np.testing.assert_allclose(
        np.linalg.norm(y.data, axis=-1), np.linalg.norm(x.data, axis=-1), atol=1e-10
    )


def test_table4_dims_partition_and_bad_dims_rejected():
    rng = np.random.default_rng(1)
    x = T.Tensor(rng.normal(size=(4, 1, 128)))
    positions = rng.integers(0, 8, size=(4, 3))
    T.rope_3d(x, positions, (16, 56, 56))
    with pytest.raises(T.ShapeError):
        T.rope_3d(x, positions, (16, 56, 55))


def test_odd_slice_rejected():
    x = T.Tensor(np.zeros((2, 1, 8)))
    with pytest.raises(T.ShapeError):
        T.rope_3d(x, np.zeros((2, 3), dtype=int), (3, 3, 2))


def test_distinct_axes_rotate_distinct_slices():
    rng = np.random.default_rng(2)
    x = make_input(rng, seq=1)
    only_t = T.rope_3d(x, np.array([[3, 0, 0]]), (2, 4, 2))
    only_h = T.rope_3d(x, np.array([[0, 3, 0]]), (2, 4, 2))
    # The t rotation leaves the h and w slices untouched, and vice versa.
    np.testing.assert_array_equal(only_t.data[..., 2:], x.data[..., 2:])
    np.testing.assert_array_equal(only_h.data[..., :2], x.data[..., :2])
    np.testing.assert_array_equal(only_h.data[..., 6:], x.data[..., 6:])
    assert not np.allclose(only_t.data[..., :2], x.data[..., :2])


def test_rope_grad_check():
    rng = np.random.default_rng(3)
    x = make_input(rng, seq=4)
    positions = rng.integers(0, 9, size=(4, 3))

    def f(lv):
        return T.mean(T.mul(T.rope_3d(lv[0], positions, (2, 4, 2)), lv[1]))

    probe = make_input(rng, seq=4)
    err = T.grad_check(f, [x, probe], eps=1e-5)
    assert err < 1e-6


def test_relative_phase_only_depends_on_offset():
    # Dot product of rotated q, k at equal offset is translation invariant.
    rng = np.random.default_rng(4)
    q = rng.normal(size=(1, 1, 8))
    k = rng.normal(size=(1, 1, 8))
    dims = (2, 4, 2)

    def score(p_q, p_k):
        rq = T.rope_3d(T.Tensor(q), np.array([p_q]), dims).data
        rk = T.rope_3d(T.Tensor(k), np.array([p_k]), dims).data
        return float((rq * rk).sum())

    s1 = score([2, 5, 1], [4, 9, 3])
    s2 = score([12, 15, 11], [14, 19, 13])
    assert s1 == pytest.approx(s2, abs=1e-10)
