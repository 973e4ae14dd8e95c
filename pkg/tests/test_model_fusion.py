import numpy as np
import pytest

from dimfusion import tensor as T
from dimfusion.llmstub import HiddenStack, StubConfig, encode, init_stub
from dimfusion.model import (
    TooFewLayers,
    block_fuse,
    block_unfuse,
    init_text_encoding,
    layer_map,
)


def test_layer_map_identity_when_counts_match():
    assert layer_map(4, 4) == [0, 1, 2, 3]


def test_layer_map_single_block_takes_last_layer():
    assert layer_map(1, 7) == [6]


def test_layer_map_covers_range_monotonically():
    mapping = layer_map(46, 12)
    assert mapping[0] == 0
    assert mapping[-1] == 11
    assert all(a <= b for a, b in zip(mapping, mapping[1:]))
    assert len(mapping) == 46


def test_layer_map_rejects_degenerate_inputs():
    with pytest.raises(ValueError):
        layer_map(0, 4)


def make_stack(rng, seq=5, d_llm=32, n_layers=3):
    return HiddenStack([rng.normal(size=(seq, d_llm)) for _ in range(n_layers + 1)])


def test_init_text_encoding_width_is_half_d():
    rng = np.random.default_rng(0)
    hs = make_stack(rng, d_llm=32)
    w = T.Tensor(rng.normal(size=(64, 32)), requires_grad=True)
    b = T.Tensor(np.zeros(32), requires_grad=True)
    enc = init_text_encoding(hs, w, b)
    assert enc.shape == (5, 32)


def test_init_text_encoding_identity_slice_oracle():
    # With the weight set to [I | 0] the encoding is the last layer's
    # first D/2 columns, exactly.
    rng = np.random.default_rng(1)
    hs = make_stack(rng, d_llm=32)
    w = np.zeros((64, 32))
    w[:32, :32] = np.eye(32)
    enc = init_text_encoding(hs, T.Tensor(w), T.Tensor(np.zeros(32)))
    np.testing.assert_array_equal(enc.data, hs.layers[-1][:, :32])


def test_init_text_encoding_needs_two_layers():
    rng = np.random.default_rng(2)
    hs = HiddenStack([rng.normal(size=(4, 8))])
    with pytest.raises(TooFewLayers):
        init_text_encoding(hs, T.Tensor(np.zeros((16, 4))), T.Tensor(np.zeros(4)))


def test_block_fuse_restores_full_width_with_enc_first():
    rng = np.random.default_rng(3)
    enc = T.Tensor(rng.normal(size=(6, 16)))
    layer = rng.normal(size=(6, 8))
    w = T.Tensor(rng.normal(size=(8, 16)))
    b = T.Tensor(np.zeros(16))
    fused = block_fuse(enc, layer, w, b)
    assert fused.shape == (6, 32)
    np.testing.assert_array_equal(fused.data[:, :16], enc.data)


def test_block_fuse_zero_layer_zero_bias_gives_enc_and_zeros():
    rng = np.random.default_rng(4)
    enc = T.Tensor(rng.normal(size=(6, 16)))
    fused = block_fuse(
        enc, np.zeros((6, 8)), T.Tensor(rng.normal(size=(8, 16))), T.Tensor(np.zeros(16))
    )
    np.testing.assert_array_equal(fused.data[:, :16], enc.data)
    np.testing.assert_array_equal(fused.data[:, 16:], np.zeros((6, 16)))


def test_block_fuse_keeps_token_count():
    rng = np.random.default_rng(5)
    for l_txt in (1, 4, 9):
        enc = T.Tensor(rng.normal(size=(l_txt, 16)))
        fused = block_fuse(
            enc,
            rng.normal(size=(l_txt, 8)),
            T.Tensor(rng.normal(size=(8, 16))),
            T.Tensor(np.zeros(16)),
        )
        assert fused.shape[0] == l_txt


def test_unfuse_of_fuse_recovers_encoding():
    rng = np.random.default_rng(6)
    enc = T.Tensor(rng.normal(size=(5, 16)))
    fused = block_fuse(
        enc,
        rng.normal(size=(5, 8)),
        T.Tensor(rng.normal(size=(8, 16))),
        T.Tensor(rng.normal(size=16)),
    )
    recovered = block_unfuse(fused)
    assert recovered.shape == (5, 16)
    np.testing.assert_array_equal(recovered.data, enc.data)


def test_unfuse_halves_width():
    x = T.Tensor(np.arange(24.0).reshape(2, 12))
    assert block_unfuse(x).shape == (2, 6)
