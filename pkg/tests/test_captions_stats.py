import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from caption_gen import random_caption
from dimfusion.captions import EmptyCorpus, default_tokenizer, token_stats
from dimfusion.captions.stats import stats_from_counts


def test_singleton_corpus():
    rng = np.random.default_rng(0)
    stats = token_stats([random_caption(rng)], tokenizer=lambda text: 192)
    assert (stats.avg, stats.median, stats.std_dev, stats.min, stats.max) == (
        192.0,
        192.0,
        0.0,
        192,
        192,
    )


def test_three_counts_hand_arithmetic():
    stats = stats_from_counts([1000, 1176, 1305])
    assert stats.avg == pytest.approx(3481 / 3)
    assert round(stats.avg, 2) == 1160.33
    assert stats.median == 1176
    assert stats.min == 1000 and stats.max == 1305


def test_min_max_bounds():
    stats = stats_from_counts([192, 1800])
    assert stats.min == 192
    assert stats.max == 1800
    assert stats.median == pytest.approx(996.0)


def test_empty_corpus_raises():
    with pytest.raises(EmptyCorpus):
        token_stats([])


def test_default_tokenizer_counts_words_and_punctuation():
    assert default_tokenizer("a small, red mug.") == 6
    assert default_tokenizer("") == 0


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), perm_seed=st.integers(0, 10**6))
def test_stats_permutation_invariant(seed, perm_seed):
    rng = np.random.default_rng(seed)
    captions = [random_caption(rng) for _ in range(5)]
    shuffled = list(captions)
    np.random.default_rng(perm_seed).shuffle(shuffled)
    assert token_stats(captions) == token_stats(shuffled)


def test_stats_invariants_hold():
    counts = [12, 900, 40, 40, 7]
    stats = stats_from_counts(counts)
    assert stats.min <= stats.median <= stats.max
    assert stats.std_dev >= 0
