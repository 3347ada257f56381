import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_model
from toxivec.errors import DataFormatError
from toxivec.model_io import (EmbeddingModel, load_binary, load_text,
                              save_binary, save_text)


def test_text_exact_bytes(tmp_path):
    model = EmbeddingModel(words=["a", "b"], vectors=np.array([[1.0, 0.0], [0.0, 1.0]], dtype=np.float32))
    path = tmp_path / "m.txt"
    save_text(model, path)
    assert path.read_bytes() == b"2 2\na 1 0\nb 0 1\n"


def test_text_round_trip_relative_error(tmp_path):
    model = random_model(40, 17, seed=3)
    path = tmp_path / "m.txt"
    save_text(model, path)
    loaded = load_text(path)
    assert loaded.words == model.words
    np.testing.assert_allclose(loaded.vectors, model.vectors, rtol=1e-6, atol=0)


def test_text_word_count_mismatch_names_line(tmp_path):
    path = tmp_path / "m.txt"
    path.write_text("3 2\na 1 0\nb 0 1\n", encoding="utf-8")
    with pytest.raises(DataFormatError, match="line 3"):
        load_text(path)


def test_text_extra_rows_fatal(tmp_path):
    path = tmp_path / "m.txt"
    path.write_text("1 2\na 1 0\nb 0 1\n", encoding="utf-8")
    with pytest.raises(DataFormatError, match="line 3"):
        load_text(path)


def test_text_non_numeric_value_fatal(tmp_path):
    path = tmp_path / "m.txt"
    path.write_text("1 2\na 1 oops\n", encoding="utf-8")
    with pytest.raises(DataFormatError, match="line 2"):
        load_text(path)


def test_text_bad_header_fatal(tmp_path):
    path = tmp_path / "m.txt"
    path.write_text("not a header\n", encoding="utf-8")
    with pytest.raises(DataFormatError, match="header"):
        load_text(path)


def test_text_loader_accepts_any_dimension(tmp_path):
    path = tmp_path / "m.txt"
    path.write_text("1 7\nw 1 2 3 4 5e-1 -6.25 7.5\n", encoding="utf-8")
    loaded = load_text(path)
    assert loaded.dim == 7
    assert loaded.vectors[0].tolist() == [1, 2, 3, 4, 0.5, -6.25, 7.5]


def test_binary_round_trip_bitwise(tmp_path):
    model = random_model(25, 9, seed=11)
    path = tmp_path / "m.bin"
    save_binary(model, path)
    loaded = load_binary(path)
    assert loaded.words == model.words
    assert loaded.vectors.tobytes() == model.vectors.tobytes()


def test_binary_file_size_arithmetic(tmp_path):
    model = EmbeddingModel(words=["aa", "b", "ccc"],
                           vectors=np.zeros((3, 4), dtype=np.float32))
    path = tmp_path / "m.bin"
    save_binary(model, path)
    header = len(b"3 4\n")
    rows = sum(len(w.encode("utf-8")) + 1 + 4 * 4 + 1 for w in model.words)
    assert path.stat().st_size == header + rows


def test_binary_truncated_reports_offset(tmp_path):
    model = random_model(4, 5, seed=2)
    path = tmp_path / "m.bin"
    save_binary(model, path)
    data = path.read_bytes()
    truncated = tmp_path / "t.bin"
    truncated.write_bytes(data[: len(data) - 9])
    with pytest.raises(DataFormatError) as err:
        load_binary(truncated)
    assert err.value.offset is not None
    assert "truncated" in str(err.value)


def test_binary_loader_rejects_text_file(tmp_path):
    model = EmbeddingModel(words=["a", "b"], vectors=np.array([[1.0, 0.0], [0.0, 1.0]], dtype=np.float32))
    path = tmp_path / "m.txt"
    save_text(model, path)
    with pytest.raises(DataFormatError):
        load_binary(path)


def test_binary_tolerates_missing_row_newlines(tmp_path):
    model = random_model(3, 2, seed=5)
    path = tmp_path / "m.bin"
    with open(path, "wb") as handle:
        handle.write(b"3 2\n")
        for word, row in zip(model.words, model.vectors):
            handle.write(word.encode() + b" " + row.astype("<f4").tobytes())
    loaded = load_binary(path)
    assert loaded.words == model.words
    assert loaded.vectors.tobytes() == model.vectors.tobytes()


@pytest.mark.parametrize("bad", ["has space", "has\nnewline", ""])
def test_words_with_separators_rejected_at_save(tmp_path, bad):
    model = EmbeddingModel.__new__(EmbeddingModel)
    model.words = [bad]
    model.vectors = np.zeros((1, 2), dtype=np.float32)
    model.index_of = {bad: 0}
    with pytest.raises(ValueError):
        save_binary(model, tmp_path / "m.bin")
    with pytest.raises(ValueError):
        save_text(model, tmp_path / "m.txt")


_words = st.lists(
    st.text(st.characters(blacklist_characters=" \n", min_codepoint=33, max_codepoint=0x024F),
            min_size=1, max_size=12),
    min_size=1, max_size=8, unique=True,
)


@settings(max_examples=40, deadline=None)
@given(words=_words, dim=st.integers(min_value=1, max_value=6), seed=st.integers(0, 2**16))
def test_round_trip_properties(tmp_path_factory, words, dim, seed):
    rng = np.random.default_rng(seed)
    vectors = rng.normal(scale=4.0, size=(len(words), dim)).astype(np.float32)
    model = EmbeddingModel(words=words, vectors=vectors)
    root = tmp_path_factory.mktemp("roundtrip")
    save_binary(model, root / "m.bin")
    binary = load_binary(root / "m.bin")
    assert binary.words == words
    assert binary.vectors.tobytes() == vectors.tobytes()
    save_text(model, root / "m.txt")
    text = load_text(root / "m.txt")
    assert text.words == words
    np.testing.assert_allclose(text.vectors, vectors, rtol=1e-6, atol=0)
