import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from toxivec.errors import UsageError
from toxivec.vocab import (NegativeSamplingTable, Vocabulary, build_ns_table,
                           build_vocabulary, keep_probability,
                           keep_probability_vector)


def make_vocab(counts: dict[str, int], min_count: int = 1) -> Vocabulary:
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return Vocabulary(
        words=[w for w, _ in ordered],
        count=np.array([c for _, c in ordered], dtype=np.int64),
        total_tokens=sum(counts.values()),
        min_count=min_count,
    )


class TestBuildVocabulary:
    def test_counts_and_order(self):
        vocab = build_vocabulary([["a", "b", "a"], ["a", "c"]], min_count=1)
        assert vocab.words == ["a", "b", "c"]  # b/c tie broken lexicographically
        assert vocab.count.tolist() == [3, 1, 1]
        assert vocab.total_tokens == 5

    def test_min_count_threshold(self):
        vocab = build_vocabulary([["a", "b", "a"], ["a", "c"]], min_count=2)
        assert vocab.words == ["a"]
        assert vocab.total_tokens == 3

    def test_empty_corpus_fatal(self):
        with pytest.raises(UsageError):
            build_vocabulary([], min_count=1)

    def test_everything_below_threshold_fatal(self):
        with pytest.raises(UsageError):
            build_vocabulary([["a", "b"]], min_count=5)

    def test_encode_drops_oov(self):
        vocab = build_vocabulary([["a", "b", "a"]], min_count=2)
        assert vocab.encode(["a", "zzz", "a"]).tolist() == [0, 0]

    @given(st.lists(st.lists(st.sampled_from("abcdef"), min_size=1, max_size=8),
                    min_size=1, max_size=30))
    def test_deterministic(self, docs):
        first = build_vocabulary(docs, min_count=1)
        second = build_vocabulary(docs, min_count=1)
        assert first.words == second.words
        assert first.count.tolist() == second.count.tolist()


class TestNegativeSamplingTable:
    def test_hand_evaluated_cumulative_fill(self):
        # counts {a:3, b:1}, p=0.75, size 8: 3^0.75/(3^0.75+1) ~= 0.695,
        # so slots 0..5 hold a and slots 6..7 hold b.
        vocab = make_vocab({"a": 3, "b": 1})
        table = build_ns_table(vocab, power=0.75, size=8)
        assert table.slots.tolist() == [0, 0, 0, 0, 0, 0, 1, 1]

    def test_single_word(self):
        table = build_ns_table(make_vocab({"solo": 7}), size=16)
        assert table.slots.tolist() == [0] * 16

    def test_uniform_counts_near_equal_shares(self):
        vocab = make_vocab({w: 10 for w in "abcde"})
        table = build_ns_table(vocab, power=0.4, size=1000)
        shares = np.bincount(table.slots, minlength=5)
        assert shares.max() - shares.min() <= 1

    def test_size_below_vocab_fatal(self):
        with pytest.raises(UsageError):
            build_ns_table(make_vocab({"a": 1, "b": 1}), size=1)

    @settings(max_examples=50)
    @given(st.lists(st.integers(min_value=1, max_value=500), min_size=1, max_size=20),
           st.floats(min_value=0.25, max_value=1.0))
    def test_slot_shares_track_powered_mass(self, counts, power):
        vocab = make_vocab({f"w{i}": c for i, c in enumerate(counts)})
        size = 512
        table = build_ns_table(vocab, power=power, size=size)
        mass = vocab.count.astype(float) ** power
        mass /= mass.sum()
        shares = np.bincount(table.slots, minlength=len(vocab)) / size
        assert np.abs(shares - mass).max() <= 1.5 / size

    def test_million_draws_match_distribution(self):
        # 10-word vocabulary: uniform slot draws reproduce f^p/sum(f^p)
        # within 1% absolute.
        counts = {f"w{i}": c for i, c in enumerate([900, 500, 300, 200, 150, 100, 60, 30, 10, 5])}
        vocab = make_vocab(counts)
        table = build_ns_table(vocab, power=0.75, size=1_000_000)
        rng = np.random.default_rng(7)
        draws = table.slots[rng.integers(0, len(table), size=1_000_000)]
        empirical = np.bincount(draws, minlength=10) / 1_000_000
        mass = vocab.count.astype(float) ** 0.75
        mass /= mass.sum()
        assert np.abs(empirical - mass).max() < 0.01


class TestKeepProbability:
    def test_disabled_by_default_threshold(self):
        vocab = make_vocab({"a": 50, "b": 50})
        assert keep_probability("a", vocab, 0.0) == 1.0

    def test_boundary_phi_equals_t(self):
        # phi = 10/1000 = 0.01 = t: sqrt(1) + 1 capped at 1.0
        vocab = make_vocab({"a": 10, "rest": 990})
        assert keep_probability("a", vocab, 0.01) == 1.0

    def test_hundred_times_t(self):
        # phi = 100/1000 = 0.1, t = 0.001: sqrt(0.01) + 0.01 = 0.11
        vocab = make_vocab({"a": 100, "rest": 900})
        assert keep_probability("a", vocab, 0.001) == pytest.approx(0.11, abs=1e-12)

    def test_unknown_word_rejected(self):
        with pytest.raises(UsageError):
            keep_probability("zzz", make_vocab({"a": 1}), 0.0)

    @given(st.lists(st.integers(min_value=1, max_value=10_000), min_size=1, max_size=15),
           st.floats(min_value=0, max_value=1))
    def test_bounds(self, counts, t):
        vocab = make_vocab({f"w{i}": c for i, c in enumerate(counts)})
        probs = keep_probability_vector(vocab, t)
        assert np.all(probs >= 0) and np.all(probs <= 1)
        for word in vocab.words[:3]:
            assert keep_probability(word, vocab, t) == pytest.approx(
                probs[vocab.index_of[word]])
