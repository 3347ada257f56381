"""Parse imageboard archive dumps and fetch pages from archive APIs.

Three on-disk formats are supported, all streamed so peak memory stays
independent of input size:

* FoolFuuka-style JSON: a top-level array of post objects, or an object
  whose values are post objects (thread-shaped values holding ``op`` /
  ``posts`` are expanded). Field mapping: ``num`` -> post_id,
  ``timestamp`` -> timestamp, ``comment`` -> body_html.
* CSV dumps with a header row carrying the same column names,
  RFC-4180 quoting.
* JSON lines with explicit platform/board/post_id/timestamp/body_html.

Dirty records are skipped and counted rather than aborting: multi-GB
community dumps are routinely imperfect. Only a broken top-level
structure is fatal.

The archive client speaks the paginated ``/_/api/chan/index/`` JSON
endpoint, persists a resumable cursor (page + post-id high-water mark),
and is single-flight per cursor.
"""

from __future__ import annotations

import csv
import io
import json
import re
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import BinaryIO, Callable, Iterator

from .errors import DataFormatError, ResourceError, UsageError

DEFAULT_RATE_LIMIT_S = 1.0
DEFAULT_MAX_RETRIES = 5
DEFAULT_BACKOFF_BASE_S = 2.0
_MAX_RECORD_BYTES = 8_000_000
_CHUNK_SIZE = 1 << 16


class Platform(str, Enum):
    FOURCHAN = "fourchan"
    EIGHTCHAN = "eightchan"
    OTHER = "other"

    @classmethod
    def parse(cls, value: str) -> "Platform":
        try:
            return cls(value)
        except ValueError:
            return cls.OTHER


@dataclass(frozen=True)
class RawPost:
    """One message as found in an archive dump; body may be empty
    (image-only posts) and is dropped later by normalization."""

    platform: Platform
    board: str
    post_id: int
    timestamp: int
    body_html: str


@dataclass
class ParseStats:
    yielded: int = 0
    skipped: int = 0

    @property
    def records(self) -> int:
        return self.yielded + self.skipped


# ---------------------------------------------------------------------------
# Streaming record scanner for top-level JSON containers
# ---------------------------------------------------------------------------

_WS = b" \t\r\n"
_SPECIAL = re.compile(rb'["{}\[\]]')
_STRING_SPECIAL = re.compile(rb'["\\]')
_SCALAR_END = re.compile(rb'[,\]}\s]')


class _ByteScanner:
    """Chunked reader exposing the few primitives the record splitter needs.

    The buffer only ever holds the record currently being scanned plus
    one read chunk; a record larger than the cap is treated as corrupt.
    """

    def __init__(self, stream: BinaryIO):
        self.stream = stream
        self.buf = b""
        self.base = 0  # absolute offset of buf[0]
        self.i = 0
        self.eof = False

    @property
    def offset(self) -> int:
        return self.base + self.i

    def refill(self) -> bool:
        if self.eof:
            return False
        chunk = self.stream.read(_CHUNK_SIZE)
        if not chunk:
            self.eof = True
            return False
        self.buf += chunk
        if len(self.buf) > _MAX_RECORD_BYTES:
            raise DataFormatError(
                f"record near byte {self.base + self.i} exceeds {_MAX_RECORD_BYTES} bytes; "
                "input does not look like a post dump",
                offset=self.base + self.i,
            )
        return True

    def compact(self) -> None:
        """Forget consumed bytes; only call between records."""
        if self.i:
            self.base += self.i
            self.buf = self.buf[self.i:]
            self.i = 0

    def _ensure(self) -> bool:
        while self.i >= len(self.buf):
            if not self.refill():
                return False
        return True

    def peek(self) -> int | None:
        if not self._ensure():
            return None
        return self.buf[self.i]

    def take(self) -> int | None:
        byte = self.peek()
        if byte is not None:
            self.i += 1
        return byte

    def skip_ws(self) -> None:
        while True:
            if not self._ensure():
                return
            while self.i < len(self.buf):
                if self.buf[self.i] in _WS:
                    self.i += 1
                else:
                    return

    def skip_string(self) -> None:
        """Cursor sits on an opening quote; move it past the closing one."""
        start = self.offset
        self.i += 1
        while True:
            match = _STRING_SPECIAL.search(self.buf, self.i)
            if match is None:
                self.i = len(self.buf)
                if not self.refill():
                    raise DataFormatError(f"unterminated string starting at byte {start}", offset=start)
                continue
            if self.buf[match.start()] == 0x22:  # closing quote
                self.i = match.start() + 1
                return
            # Backslash escape: skip the escaped character too.
            self.i = match.start() + 2
            while self.i > len(self.buf):
                if not self.refill():
                    raise DataFormatError(f"unterminated string starting at byte {start}", offset=start)

    def scan_value(self) -> bytes:
        """Consume one JSON value and return its raw bytes."""
        first = self.peek()
        if first is None:
            raise DataFormatError(f"unexpected end of input at byte {self.offset}", offset=self.offset)
        start_rel = self.i
        if first == 0x22:  # string
            self.skip_string()
            return self.buf[start_rel:self.i]
        if first in (0x7B, 0x5B):  # { or [
            depth = 0
            while True:
                match = _SPECIAL.search(self.buf, self.i)
                if match is None:
                    self.i = len(self.buf)
                    if not self.refill():
                        raise DataFormatError(
                            f"unbalanced JSON value truncated at byte {self.offset}", offset=self.offset
                        )
                    continue
                byte = self.buf[match.start()]
                self.i = match.start()
                if byte == 0x22:
                    self.skip_string()
                    continue
                self.i += 1
                if byte in (0x7B, 0x5B):
                    depth += 1
                elif depth > 0:
                    depth -= 1
                    if depth == 0:
                        return self.buf[start_rel:self.i]
                else:
                    raise DataFormatError(
                        f"unbalanced closing bracket at byte {self.offset - 1}", offset=self.offset - 1
                    )
        # Scalar: runs to the next separator, which stays unconsumed.
        while True:
            match = _SCALAR_END.search(self.buf, self.i)
            if match is None:
                self.i = len(self.buf)
                if not self.refill():
                    return self.buf[start_rel:self.i]
                continue
            self.i = match.start()
            return self.buf[start_rel:self.i]


def _iter_json_records(stream: BinaryIO) -> Iterator[bytes]:
    """Yield the raw bytes of each record in a top-level array/object."""
    scanner = _ByteScanner(stream)
    scanner.skip_ws()
    if scanner.buf.startswith(b"\xef\xbb\xbf"):  # UTF-8 BOM
        scanner.i = 3
        scanner.skip_ws()
    opener = scanner.take()
    if opener == 0x5B:  # array
        closer = 0x5D
        has_keys = False
    elif opener == 0x7B:  # object of records
        closer = 0x7D
        has_keys = True
    else:
        raise DataFormatError(
            f"expected a JSON array or object at byte {max(scanner.offset - 1, 0)}",
            offset=max(scanner.offset - 1, 0),
        )
    scanner.skip_ws()
    if scanner.peek() == closer:
        scanner.take()
    else:
        while True:
            if has_keys:
                scanner.skip_ws()
                if scanner.peek() != 0x22:
                    raise DataFormatError(f"expected an object key at byte {scanner.offset}", offset=scanner.offset)
                scanner.skip_string()
                scanner.skip_ws()
                if scanner.take() != 0x3A:  # ':'
                    raise DataFormatError(f"expected ':' at byte {scanner.offset - 1}", offset=scanner.offset - 1)
            scanner.skip_ws()
            yield scanner.scan_value()
            scanner.compact()
            scanner.skip_ws()
            separator = scanner.take()
            if separator == closer:
                break
            if separator != 0x2C:  # ','
                where = scanner.offset - (0 if separator is None else 1)
                raise DataFormatError(
                    f"expected ',' or container end at byte {where}", offset=where
                )
    scanner.skip_ws()
    if scanner.peek() is not None:
        raise DataFormatError(f"trailing data after top-level container at byte {scanner.offset}",
                              offset=scanner.offset)


# ---------------------------------------------------------------------------
# FoolFuuka-style JSON
# ---------------------------------------------------------------------------


def _expand_post_objects(obj) -> Iterator[object]:
    """Yield post-shaped dicts; thread wrappers (op/posts) are unwrapped."""
    if isinstance(obj, dict) and "comment" not in obj and "num" not in obj \
            and ("op" in obj or "posts" in obj):
        op = obj.get("op")
        if op is not None:
            yield op
        posts = obj.get("posts")
        if isinstance(posts, dict):
            yield from posts.values()
        elif isinstance(posts, list):
            yield from posts
        return
    yield obj


def _int_field(value) -> int | None:
    if isinstance(value, bool):
        return None
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        try:
            return int(value)
        except ValueError:
            return None
    return None


def _post_from_foolfuuka(obj, platform: Platform, board: str) -> RawPost | None:
    if not isinstance(obj, dict):
        return None
    comment = obj.get("comment")
    if not isinstance(comment, str):  # null or missing comment: image-only or deleted
        return None
    post_id = _int_field(obj.get("num"))
    timestamp = _int_field(obj.get("timestamp"))
    if post_id is None or timestamp is None:
        return None
    return RawPost(platform=platform, board=board, post_id=post_id,
                   timestamp=timestamp, body_html=comment)


def parse_foolfuuka_json(
    stream: BinaryIO,
    *,
    platform: Platform = Platform.OTHER,
    board: str = "",
    stats: ParseStats | None = None,
) -> Iterator[RawPost]:
    """Stream posts out of a FoolFuuka-style JSON dump.

    Records failing the field contract are counted in ``stats.skipped``;
    a malformed top-level structure raises with the byte offset.
    """
    stats = stats if stats is not None else ParseStats()
    for raw in _iter_json_records(stream):
        try:
            record = json.loads(raw)
        except json.JSONDecodeError:
            stats.skipped += 1
            continue
        for obj in _expand_post_objects(record):
            post = _post_from_foolfuuka(obj, platform, board)
            if post is None:
                stats.skipped += 1
            else:
                stats.yielded += 1
                yield post


# ---------------------------------------------------------------------------
# CSV dumps
# ---------------------------------------------------------------------------

_CSV_REQUIRED = ("num", "timestamp", "comment")


def parse_4plebs_csv(
    stream: BinaryIO,
    *,
    platform: Platform = Platform.OTHER,
    board: str = "",
    stats: ParseStats | None = None,
) -> Iterator[RawPost]:
    """Stream posts out of a headered CSV dump (num/timestamp/comment columns).

    An empty comment cell means "no text" (CSV cannot express null) and
    the row is skipped.
    """
    stats = stats if stats is not None else ParseStats()
    text = io.TextIOWrapper(stream, encoding="utf-8-sig", newline="")
    reader = csv.reader(text)
    try:
        header = next(reader, None)
    except csv.Error as exc:
        raise DataFormatError(f"unreadable CSV header: {exc}", line=1) from None
    if header is None:
        raise DataFormatError("empty CSV file: missing header row", line=1)
    columns = {name: position for position, name in enumerate(header)}
    missing = [name for name in _CSV_REQUIRED if name not in columns]
    if missing:
        raise DataFormatError(f"CSV header missing required column(s): {', '.join(missing)}", line=1)
    num_col, ts_col, comment_col = (columns[n] for n in _CSV_REQUIRED)
    while True:
        try:
            row = next(reader)
        except StopIteration:
            return
        except csv.Error:
            stats.skipped += 1
            continue
        if not row:
            continue
        try:
            post_id = int(row[num_col])
            timestamp = int(row[ts_col])
            comment = row[comment_col]
        except (ValueError, IndexError):
            stats.skipped += 1
            continue
        if comment == "":
            stats.skipped += 1
            continue
        stats.yielded += 1
        yield RawPost(platform=platform, board=board, post_id=post_id,
                      timestamp=timestamp, body_html=comment)


# ---------------------------------------------------------------------------
# JSON lines interchange
# ---------------------------------------------------------------------------

_JSONL_REQUIRED = ("platform", "board", "post_id", "timestamp", "body_html")


def parse_jsonl(stream: BinaryIO, stats: ParseStats | None = None) -> Iterator[RawPost]:
    """Stream posts from the generic one-object-per-line interchange format.

    Blank lines are ignored; any other unparseable line is skipped and
    counted. Never fatal.
    """
    stats = stats if stats is not None else ParseStats()
    text = io.TextIOWrapper(stream, encoding="utf-8-sig", errors="replace")
    for line in text:
        body = line.strip()
        if not body:
            continue
        try:
            record = json.loads(body)
        except json.JSONDecodeError:
            stats.skipped += 1
            continue
        if not isinstance(record, dict) or any(key not in record for key in _JSONL_REQUIRED):
            stats.skipped += 1
            continue
        post_id = _int_field(record["post_id"])
        timestamp = _int_field(record["timestamp"])
        if post_id is None or timestamp is None or not isinstance(record["body_html"], str) \
                or not isinstance(record["board"], str) or not isinstance(record["platform"], str):
            stats.skipped += 1
            continue
        stats.yielded += 1
        yield RawPost(
            platform=Platform.parse(record["platform"]),
            board=record["board"],
            post_id=post_id,
            timestamp=timestamp,
            body_html=record["body_html"],
        )


# ---------------------------------------------------------------------------
# Archive API client
# ---------------------------------------------------------------------------

HttpGet = Callable[[str], tuple[int, bytes]]


def _default_http_get(url: str) -> tuple[int, bytes]:
    import requests

    response = requests.get(url, timeout=30, headers={"User-Agent": "toxivec-archive-client"})
    return response.status_code, response.content


@dataclass
class ArchiveCursor:
    """Resumable position in a paginated archive; survives restarts via a
    small JSON state file."""

    endpoint: str
    board: str
    page: int = 1
    max_post_id: int = 0
    state_path: Path | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.page < 1:
            raise UsageError(f"cursor page must be >= 1, got {self.page}")

    @classmethod
    def open(cls, state_path: str | Path, endpoint: str, board: str) -> "ArchiveCursor":
        state_path = Path(state_path)
        if not state_path.exists():
            return cls(endpoint=endpoint, board=board, state_path=state_path)
        try:
            record = json.loads(state_path.read_text(encoding="utf-8"))
            cursor = cls(
                endpoint=record["endpoint"],
                board=record["board"],
                page=int(record["page"]),
                max_post_id=int(record["max_post_id"]),
                state_path=state_path,
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise DataFormatError(f"corrupt cursor state file {state_path}: {exc}") from None
        if cursor.endpoint != endpoint or cursor.board != board:
            raise UsageError(
                f"cursor state file {state_path} belongs to {cursor.endpoint!r}/{cursor.board!r}, "
                f"not {endpoint!r}/{board!r}; remove it to start over"
            )
        return cursor

    def save(self) -> None:
        if self.state_path is None:
            return
        payload = json.dumps({
            "endpoint": self.endpoint, "board": self.board,
            "page": self.page, "max_post_id": self.max_post_id,
        })
        temp = self.state_path.with_suffix(self.state_path.suffix + ".tmp")
        temp.write_text(payload, encoding="utf-8")
        temp.replace(self.state_path)


def _get_with_retry(
    http_get: HttpGet, url: str, sleep: Callable[[float], None],
    max_retries: int, backoff_base_s: float,
) -> bytes:
    retries = 0
    while True:
        try:
            status, body = http_get(url)
        except OSError as exc:
            raise ResourceError(f"network failure fetching {url}: {exc}") from exc
        if status == 200:
            return body
        if status == 429 or 500 <= status < 600:
            if retries >= max_retries:
                raise ResourceError(f"HTTP {status} fetching {url} after {max_retries} retries")
            sleep(backoff_base_s * (2 ** retries))
            retries += 1
            continue
        raise ResourceError(f"HTTP {status} fetching {url}")


def fetch_archive_pages(
    cursor: ArchiveCursor,
    limit: int,
    *,
    platform: Platform = Platform.OTHER,
    rate_limit_s: float = DEFAULT_RATE_LIMIT_S,
    http_get: HttpGet | None = None,
    sleep: Callable[[float], None] = time.sleep,
    max_retries: int = DEFAULT_MAX_RETRIES,
    backoff_base_s: float = DEFAULT_BACKOFF_BASE_S,
    stats: ParseStats | None = None,
) -> Iterator[RawPost]:
    """Fetch up to `limit` index pages, yielding only posts above the
    cursor's post-id high-water mark.

    The cursor is persisted after each fully yielded page, so a restart
    resumes at the last completed page and never re-yields a post id.
    An empty page stops the walk (after the page increment is recorded).
    """
    stats = stats if stats is not None else ParseStats()
    http_get = http_get if http_get is not None else _default_http_get
    base = cursor.endpoint.rstrip("/")
    for requests_made in range(limit):
        if requests_made > 0 and rate_limit_s > 0:
            sleep(rate_limit_s)
        url = f"{base}/_/api/chan/index/?board={cursor.board}&page={cursor.page}"
        body = _get_with_retry(http_get, url, sleep, max_retries, backoff_base_s)
        try:
            payload = json.loads(body)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"archive page {url} is not valid JSON: {exc}") from None
        records = payload.values() if isinstance(payload, dict) else payload
        posts: list[RawPost] = []
        record_count = 0
        for record in records:
            for obj in _expand_post_objects(record):
                record_count += 1
                post = _post_from_foolfuuka(obj, platform, cursor.board)
                if post is None:
                    stats.skipped += 1
                else:
                    posts.append(post)
        if record_count == 0:
            cursor.page += 1
            cursor.save()
            return
        if posts:
            mark = cursor.max_post_id
            page_max = max(post.post_id for post in posts)
            for post in posts:
                if post.post_id > mark:
                    stats.yielded += 1
                    yield post
            cursor.max_post_id = max(mark, page_max)
        cursor.page += 1
        cursor.save()
