import numpy as np
import pytest
from hypothesis import given, strategies as st

from catft.categorize import CategoryScheme
from catft.selector import (
    SuccessorLawError, TransitionModel, fit, load_selector, oracle_select, predict_next,
    save_selector, update_many, update_online,
)

S7 = CategoryScheme(8)


def sequence_from_bits(bits, start=0, k=7):
    seq, c = [start], start
    for b in bits:
        c = ((2 * c) % (1 << k)) + int(b)
        seq.append(c)
    return seq


def test_fit_tally():
    m = fit([0, 0, 1], S7)
    assert m.counts[0].tolist() == [1, 1]
    assert m.counts.sum() == 2


@pytest.mark.parametrize("seq", [[], [17]])
def test_fit_short_sequences(seq):
    m = fit(seq, S7)
    assert m.counts.sum() == 0
    assert predict_next(m, 17) == (34, 0.5)


def test_fit_rejects_illegal_transition():
    with pytest.raises(SuccessorLawError, match="5 -> 99"):
        fit([5, 99], S7)


def test_predict_examples():
    m = TransitionModel(S7)
    m.counts[9] = [3, 1]
    c, p = predict_next(m, 9)
    assert c == 18 and p == pytest.approx(4 / 6)
    fresh = TransitionModel(S7)
    assert predict_next(fresh, 9) == (18, 0.5)
    m0 = TransitionModel(S7, alpha=0.0)
    m0.counts[9] = [0, 10]
    assert predict_next(m0, 9) == (19, 1.0)


def test_update_online():
    m = TransitionModel(S7)
    for _ in range(10):
        update_online(m, 3, 7)
    assert m.counts[3].tolist() == [0, 10]
    with pytest.raises(SuccessorLawError):
        update_online(m, 3, 8)


@given(st.lists(st.integers(0, 1), max_size=300), st.integers(0, 127), st.data())
def test_batch_online_equivalence(bits, start, data):
    seq = sequence_from_bits(bits, start)
    cut = data.draw(st.integers(0, len(seq)))
    m = fit(seq[:cut], S7)
    update_many(m, seq[max(cut - 1, 0):])
    np.testing.assert_array_equal(m.counts, fit(seq, S7).counts)


@given(st.lists(st.integers(0, 1), max_size=200), st.floats(0.01, 10))
def test_rows_stochastic_and_open_interval(bits, alpha):
    m = fit(sequence_from_bits(bits), S7, alpha)
    for c in range(128):
        p0, p1 = m.probabilities(c)
        assert p0 + p1 == 1.0
        assert 0 < p0 < 1 and 0 < p1 < 1


def test_deterministic_sequence_accuracy_one():
    from catft.synthetic import lfsr_bits
    seq = sequence_from_bits(lfsr_bits(1000, 1), start=1)
    m = fit(seq[:200], S7)
    hits = [predict_next(m, a)[0] == b for a, b in zip(seq[200:], seq[201:])]
    assert all(hits)


def test_oracle_identity():
    assert [oracle_select(c) for c in (0, 63, 127)] == [0, 63, 127]


def test_save_load(tmp_path):
    m = fit(sequence_from_bits([1, 0, 1, 1, 0]), S7, alpha=0.5)
    save_selector(m, tmp_path / "s.json")
    back = load_selector(tmp_path / "s.json")
    assert back.alpha == 0.5 and np.array_equal(back.counts, m.counts)
    text = (tmp_path / "s.json").read_text().replace('"version": 1', '"version": 2')
    (tmp_path / "s.json").write_text(text)
    with pytest.raises(ValueError, match="version"):
        load_selector(tmp_path / "s.json")


def test_snapshot_is_independent():
    m = fit([0, 1], S7)
    snap = m.snapshot()
    update_online(snap, 1, 3)
    assert m.counts[1].sum() == 0
