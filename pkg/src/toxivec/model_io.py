"""Read/write embedding models in the common text and binary formats.

Text: header line ``V D``, then one ``word v1 ... vD`` line per word,
values printed with up to 6 significant digits. Binary: the same ASCII
header, then per word the UTF-8 word bytes, one 0x20 space, D
little-endian float32 values, and one 0x0A newline (tolerated as absent
on load for compatibility with writers that omit it).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO

import numpy as np

from .errors import DataFormatError

_HEADER_MAX_BYTES = 128


@dataclass
class EmbeddingModel:
    """Immutable word/vector store; vectors are float32, one row per word."""

    words: list[str]
    vectors: np.ndarray  # (V, D) float32
    index_of: dict[str, int] = field(init=False, repr=False)
    _unit64: np.ndarray | None = field(init=False, repr=False, default=None)

    def __post_init__(self):
        self.vectors = np.ascontiguousarray(self.vectors, dtype=np.float32)
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.words):
            raise ValueError("vector matrix shape does not match word list")
        self.index_of = {w: i for i, w in enumerate(self.words)}

    @property
    def size(self) -> int:
        return len(self.words)

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def __contains__(self, word: str) -> bool:
        return word in self.index_of

    def vector(self, word: str) -> np.ndarray:
        return self.vectors[self.index_of[word]]

    def unit_vectors(self) -> np.ndarray:
        """Row-normalized float64 copy, cached; zero rows stay zero."""
        if self._unit64 is None:
            mat = self.vectors.astype(np.float64)
            norms = np.linalg.norm(mat, axis=1, keepdims=True)
            np.divide(mat, norms, out=mat, where=norms > 0)
            self._unit64 = mat
        return self._unit64


def _check_word(word: str) -> str:
    if " " in word or "\n" in word:
        raise ValueError(f"word {word!r} contains a space or newline; cannot be serialized")
    if not word:
        raise ValueError("empty word cannot be serialized")
    return word


def _format_value(value: float) -> str:
    return f"{float(value):.6g}"


def save_text(model: EmbeddingModel, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(f"{model.size} {model.dim}\n")
        for word, row in zip(model.words, model.vectors):
            handle.write(_check_word(word))
            for value in row:
                handle.write(" ")
                handle.write(_format_value(value))
            handle.write("\n")


def load_text(path: str | Path) -> EmbeddingModel:
    with open(path, encoding="utf-8", newline="\n") as handle:
        header = handle.readline()
        size, dim = _parse_header(header.rstrip("\n"), line=1)
        words: list[str] = []
        matrix = np.empty((size, dim), dtype=np.float32)
        for i in range(size):
            line = handle.readline()
            lineno = 2 + i
            if not line:
                raise DataFormatError(
                    f"unexpected end of file after line {1 + i}: "
                    f"header declares {size} words, found {i}",
                    line=1 + i,
                )
            parts = line.rstrip("\n").split(" ")
            if len(parts) != dim + 1:
                raise DataFormatError(
                    f"line {lineno}: expected a word and {dim} values, got {len(parts)} fields",
                    line=lineno,
                )
            words.append(parts[0])
            try:
                matrix[i] = [float(p) for p in parts[1:]]
            except ValueError as exc:
                raise DataFormatError(f"line {lineno}: non-numeric value ({exc})", line=lineno) from None
        trailer = handle.readline()
        if trailer.strip():
            raise DataFormatError(
                f"line {2 + size}: more rows than the {size} words declared in the header",
                line=2 + size,
            )
    return EmbeddingModel(words=words, vectors=matrix)


def _parse_header(text: str, *, line: int | None = None, offset: int | None = None) -> tuple[int, int]:
    parts = text.split(" ")
    where = f"line {line}" if line is not None else f"byte {offset}"
    if len(parts) != 2:
        raise DataFormatError(f"{where}: header must be 'V D', got {text!r}", line=line, offset=offset)
    try:
        size, dim = int(parts[0]), int(parts[1])
    except ValueError:
        raise DataFormatError(f"{where}: header must be 'V D', got {text!r}", line=line, offset=offset) from None
    if size < 1 or dim < 1:
        raise DataFormatError(f"{where}: header counts must be positive, got {text!r}", line=line, offset=offset)
    return size, dim


def save_binary(model: EmbeddingModel, path: str | Path) -> None:
    with open(path, "wb") as handle:
        handle.write(f"{model.size} {model.dim}\n".encode("ascii"))
        for word, row in zip(model.words, model.vectors):
            handle.write(_check_word(word).encode("utf-8"))
            handle.write(b" ")
            handle.write(row.astype("<f4", copy=False).tobytes())
            handle.write(b"\n")


def load_binary(path: str | Path) -> EmbeddingModel:
    with open(path, "rb") as handle:
        header, offset = _read_binary_header(handle)
        size, dim = header
        words: list[str] = []
        matrix = np.empty((size, dim), dtype=np.float32)
        row_bytes = 4 * dim
        pending: bytes = b""
        for i in range(size):
            word_bytes = bytearray()
            byte = pending if pending else handle.read(1)
            pending = b""
            while True:
                if not byte:
                    raise DataFormatError(
                        f"truncated file: end of input at byte {offset + len(word_bytes)} "
                        f"while reading word {i + 1} of {size}",
                        offset=offset + len(word_bytes),
                    )
                if byte == b" ":
                    break
                if byte == b"\n":
                    raise DataFormatError(
                        f"malformed binary model: newline inside word at byte {offset + len(word_bytes)}",
                        offset=offset + len(word_bytes),
                    )
                word_bytes += byte
                byte = handle.read(1)
            if not word_bytes:
                raise DataFormatError(
                    f"malformed binary model: empty word at byte {offset}", offset=offset
                )
            offset += len(word_bytes) + 1
            try:
                words.append(word_bytes.decode("utf-8"))
            except UnicodeDecodeError as exc:
                raise DataFormatError(f"word {i + 1} is not valid UTF-8 at byte {offset}: {exc}", offset=offset) from None
            blob = handle.read(row_bytes)
            if len(blob) != row_bytes:
                raise DataFormatError(
                    f"truncated file: expected {row_bytes} vector bytes at byte {offset}, got {len(blob)}",
                    offset=offset,
                )
            matrix[i] = np.frombuffer(blob, dtype="<f4")
            offset += row_bytes
            # Optional row-terminating newline; absent in some writers.
            pending = handle.read(1)
            if pending == b"\n":
                offset += 1
                pending = b""
        if pending or handle.read(1):
            raise DataFormatError(
                f"trailing data after the {size} words declared in the header (byte {offset})",
                offset=offset,
            )
    return EmbeddingModel(words=words, vectors=matrix)


def _read_binary_header(handle: BinaryIO) -> tuple[tuple[int, int], int]:
    raw = bytearray()
    while len(raw) < _HEADER_MAX_BYTES:
        byte = handle.read(1)
        if not byte:
            raise DataFormatError(f"truncated file: no header newline in first {len(raw)} bytes", offset=len(raw))
        if byte == b"\n":
            break
        raw += byte
    else:
        raise DataFormatError(f"header longer than {_HEADER_MAX_BYTES} bytes; not a model file", offset=len(raw))
    try:
        text = raw.decode("ascii")
    except UnicodeDecodeError:
        raise DataFormatError("header is not ASCII; not a model file", offset=0) from None
    return _parse_header(text, offset=0), len(raw) + 1


def save(model: EmbeddingModel, path: str | Path, fmt: str) -> None:
    if fmt == "txt":
        save_text(model, path)
    elif fmt == "bin":
        save_binary(model, path)
    else:
        raise ValueError(f"unknown model format {fmt!r} (expected 'txt' or 'bin')")


def load(path: str | Path, fmt: str) -> EmbeddingModel:
    if fmt == "txt":
        return load_text(path)
    if fmt == "bin":
        return load_binary(path)
    raise ValueError(f"unknown model format {fmt!r} (expected 'txt' or 'bin')")
