"""Standardize raw message bodies into token documents.

Pipeline: strip HTML markup -> drop URLs -> drop board metadata
(quote-links, cross-board links, line-initial greentext markers) ->
lowercase tokenization. Stop words are kept; a fixed frequency threshold
is applied later at vocabulary build time, not here.

A normalized corpus is stored one document per line, tokens joined by
single spaces, UTF-8, ``\n`` line endings.
"""

from __future__ import annotations

import re
from pathlib import Path
from typing import Iterable, Iterator

# One normalized message: ordered lowercase tokens.
CorpusDocument = list[str]

_BR_RE = re.compile(r"<br\s*/?\s*>", re.IGNORECASE)
# Tag-ish spans only: "</i>", "<span class=..>". Leaves bare "<" alone so
# text like "i <3 u" or "a < b" survives.
_TAG_RE = re.compile(r"</?[A-Za-z][^<>]*>")
_ENTITY_RE = re.compile(r"&(amp|lt|gt|quot|apos|nbsp|#\d+|#[xX][0-9a-fA-F]+);")
_NAMED_ENTITIES = {
    "amp": "&",
    "lt": "<",
    "gt": ">",
    "quot": '"',
    "apos": "'",
    "nbsp": "\xa0",
}

_URL_RE = re.compile(r"(?:https?://|www\.)\S+")
_CROSS_BOARD_RE = re.compile(r">>>/[^/\s]+/")
_QUOTE_LINK_RE = re.compile(r">>\d+")
_GREENTEXT_RE = re.compile(r"^>", re.MULTILINE)

# Tokens are maximal runs of Unicode letters/digits plus apostrophes and
# hyphens; everything else (emoji, punctuation, underscores) separates.
_TOKEN_RE = re.compile(r"(?:[^\W_]|['’-])+")


def _decode_entity(match: re.Match) -> str:
    body = match.group(1)
    if body in _NAMED_ENTITIES:
        return _NAMED_ENTITIES[body]
    try:
        code = int(body[2:], 16) if body[1] in "xX" else int(body[1:])
        return chr(code)
    except (ValueError, OverflowError):
        return match.group(0)


def strip_markup(body_html: str) -> str:
    """Decode a message body to plain text.

    ``<br>`` variants become single spaces, other tags are dropped, and
    the common entities (amp/lt/gt/quot/apos/nbsp plus numeric forms)
    are decoded in a single pass so ``&amp;gt;`` yields ``&gt;``.
    Malformed HTML is handled best-effort, never an error.
    """
    text = _BR_RE.sub(" ", body_html)
    text = _TAG_RE.sub("", text)
    return _ENTITY_RE.sub(_decode_entity, text)


def remove_urls(text: str) -> str:
    """Replace each maximal ``http(s)://...`` or ``www....`` run with a space."""
    return _URL_RE.sub(" ", text)


def remove_platform_metadata(text: str) -> str:
    """Drop board furniture that carries no lexical content.

    Removes cross-board links (``>>>/board/``), post quote-links
    (``>>12345``), and a single line-initial greentext ``>``. A ``>``
    anywhere else ("5 > 3") is left for the tokenizer to discard.
    Tripcode stripping is deliberately not attempted.
    """
    text = _CROSS_BOARD_RE.sub("", text)
    text = _QUOTE_LINK_RE.sub("", text)
    return _GREENTEXT_RE.sub("", text)


def tokenize(text: str) -> CorpusDocument:
    """Lowercase and split into tokens; may return an empty list."""
    return _TOKEN_RE.findall(text.lower())


def normalize_text(text: str) -> CorpusDocument:
    """Run the full standardization pipeline over one raw text."""
    return tokenize(remove_platform_metadata(remove_urls(strip_markup(text))))


def normalize_post(post) -> CorpusDocument | None:
    """Normalize one raw post; None when nothing survives (image-only etc.)."""
    tokens = normalize_text(post.body_html)
    return tokens if tokens else None


def doc_to_line(tokens: Iterable[str]) -> str:
    return " ".join(tokens)


def read_corpus(path: str | Path) -> Iterator[CorpusDocument]:
    """Stream documents from a normalized corpus file, skipping blank lines."""
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            tokens = line.split()
            if tokens:
                yield tokens


def write_corpus(docs: Iterable[CorpusDocument], path: str | Path) -> int:
    """Write documents in the one-per-line corpus format; returns line count."""
    written = 0
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for tokens in docs:
            if not tokens:
                continue
            handle.write(doc_to_line(tokens))
            handle.write("\n")
            written += 1
    return written
