"""View-record data model, TSV log parsing, and UTC day bucketing.

Log line format (one record per line, TAB separated)::

    epoch_seconds <TAB> video_id <TAB> dotted_quad_ipv4 <TAB> user_id_or_dash

Metadata line format::

    video_id <TAB> category <TAB> YYYY-MM-DD
"""

from __future__ import annotations

import contextlib
import datetime as dt
import enum
import gc
import io
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, NamedTuple, Optional

from .errors import LogReadError, RecordParseError

SECONDS_PER_DAY = 86400
EPOCH = dt.date(1970, 1, 1)
MAX_KEPT_ERRORS = 20


class ViewRecord(NamedTuple):
    timestamp: int
    video_id: str
    ip: str
    user_id: Optional[str] = None

    @property
    def day(self) -> dt.date:
        return day_of(self.timestamp)


class Category(str, enum.Enum):
    UGC = "UGC"
    MV = "MV"
    TV = "TV"
    MOVIE = "MOVIE"
    NEWS = "NEWS"
    SPORTS = "SPORTS"
    OTHER = "OTHER"


class VideoMeta(NamedTuple):
    video_id: str
    category: Category
    release_date: dt.date


@dataclass
class DayBucket:
    day: dt.date
    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def start(self) -> int:
        return day_start(self.day)

    @property
    def end(self) -> int:
        return day_start(self.day) + SECONDS_PER_DAY


def day_of(timestamp: int) -> dt.date:
    return EPOCH + dt.timedelta(days=timestamp // SECONDS_PER_DAY)


def day_start(day: dt.date) -> int:
    return (day - EPOCH).days * SECONDS_PER_DAY


# Dotted quads seen so far; real logs repeat the same addresses constantly.
_valid_ips: dict = {}
# Video and user ids already checked to be whitespace-free tokens.
_valid_tokens: dict = {}


def _is_token(s: str) -> bool:
    # non-empty and free of whitespace, checked in C
    return s.split() == [s]


def check_ipv4(text: str) -> bool:
    """True for a canonical dotted quad (no leading zeros, octets 0-255)."""
    if text in _valid_ips:
        return True
    parts = text.split(".")
    if len(parts) != 4:
        return False
    for p in parts:
        if not (p.isascii() and p.isdigit()) or len(p) > 3:
            return False
        if len(p) > 1 and p[0] == "0":
            return False
        if int(p) > 255:
            return False
    if len(_valid_ips) < 1_000_000:
        _valid_ips[text] = True
    return True


def ip_to_int(ip: str) -> int:
    a, b, c, d = (int(p) for p in ip.split("."))
    return (a << 24) | (b << 16) | (c << 8) | d


def int_to_ip(value: int) -> str:
    if not 0 <= value < 2**32:
        raise ValueError(f"not a 32-bit address: {value}")
    return f"{value >> 24}.{(value >> 16) & 255}.{(value >> 8) & 255}.{value & 255}"


def parse_record(line: str, lineno: Optional[int] = None) -> ViewRecord:
    fields = line.split("\t")
    if len(fields) == 4:
        ts, video, ip, user = fields
        # fast path: every field already seen in a valid record
        if (ts.isdigit() and ts.isascii() and video in _valid_tokens and ip in _valid_ips
                and (user == "-" or user in _valid_tokens)):
            return ViewRecord(int(ts), video, ip, None if user == "-" else user)
    return _parse_fields(fields, lineno)


def _remember(token: str) -> None:
    if len(_valid_tokens) < 2_000_000:
        _valid_tokens[token] = True


def _parse_fields(fields: list, lineno: Optional[int]) -> ViewRecord:
    if len(fields) != 4:
        raise RecordParseError("FieldCount", f"expected 4 fields, got {len(fields)}", lineno)
    ts, video, ip, user = fields
    if not (ts.isascii() and ts.isdigit()):
        raise RecordParseError("InvalidTimestamp", f"{ts!r} is not a non-negative integer", lineno, 1)
    if not video:
        raise RecordParseError("EmptyVideoId", "video id is empty", lineno, 2)
    if not _is_token(video):
        raise RecordParseError("InvalidToken", f"video id {video!r} contains whitespace", lineno, 2)
    if ip not in _valid_ips and not check_ipv4(ip):
        raise RecordParseError("InvalidIp", f"{ip!r} is not a dotted-quad IPv4 address", lineno, 3)
    _remember(video)
    if user == "-":
        return ViewRecord(int(ts), video, ip, None)
    if not _is_token(user):
        raise RecordParseError("InvalidToken", f"user id {user!r} is empty or has whitespace", lineno, 4)
    _remember(user)
    return ViewRecord(int(ts), video, ip, user)


def format_record(record: ViewRecord) -> str:
    user = "-" if record.user_id is None else record.user_id
    return f"{record.timestamp}\t{record.video_id}\t{record.ip}\t{user}"


def validate_record(record: ViewRecord) -> None:
    """Raise RecordParseError if ``record`` could not round-trip through TSV."""
    if parse_record(format_record(record)) != record:
        raise RecordParseError("InvalidToken", f"record does not round-trip: {record!r}")


@dataclass
class ParseSummary:
    lines: int = 0
    records: int = 0
    errors: int = 0
    examples: list = field(default_factory=list)

    def add_error(self, err: RecordParseError) -> None:
        self.errors += 1
        if len(self.examples) < MAX_KEPT_ERRORS:
            self.examples.append(str(err))


@dataclass
class ParsedLog:
    records: list
    summary: ParseSummary

    @property
    def n_errors(self) -> int:
        return self.summary.errors


def _text_lines(source) -> Iterator[str]:
    if isinstance(source, io.TextIOBase) or hasattr(source, "encoding"):
        yield from source
        return
    for raw in source:
        yield raw.decode("utf-8") if isinstance(raw, (bytes, bytearray)) else raw


def iter_log(source: IO, summary: Optional[ParseSummary] = None, strict: bool = False) -> Iterator[ViewRecord]:
    """Yield records from a text or binary stream, in file order.

    Malformed lines are counted in ``summary`` and skipped; with ``strict``
    the first one is raised instead.
    """
    if summary is None:
        summary = ParseSummary()
    lineno = summary.lines
    good = summary.records
    try:
        for line in _text_lines(source):
            lineno += 1
            line = line.rstrip("\n")
            if line.endswith("\r"):
                line = line[:-1]
            if not line:
                continue
            try:
                rec = parse_record(line, lineno)
            except RecordParseError as err:
                if strict:
                    raise
                summary.add_error(err)
                continue
            good += 1
            # keep the summary current for callers that stop early
            summary.lines = lineno
            summary.records = good
            yield rec
    except (OSError, UnicodeDecodeError) as exc:
        raise LogReadError(f"failed reading log: {exc}", good, lineno) from exc
    finally:
        summary.lines = lineno
        summary.records = good


@contextlib.contextmanager
def gc_paused():
    """Hold off cyclic GC while bulk-allocating acyclic objects (records, count dicts)."""
    was_enabled = gc.isenabled()
    gc.disable()
    try:
        yield
    finally:
        if was_enabled:
            gc.enable()


def read_log(source: IO, strict: bool = False) -> ParsedLog:
    summary = ParseSummary()
    with gc_paused():
        records = list(iter_log(source, summary, strict=strict))
    return ParsedLog(records, summary)


def read_log_file(path, strict: bool = False) -> ParsedLog:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return read_log(fh, strict=strict)


def write_log(records: Iterable[ViewRecord], sink: IO) -> int:
    n = 0
    for rec in records:
        sink.write(format_record(rec))
        sink.write("\n")
        n += 1
    return n


def bucket_by_day(records: Iterable[ViewRecord]) -> list:
    """Partition records into UTC-day buckets, sorted by day.

    Within a bucket, records keep their input order.
    """
    buckets: dict = {}
    for rec in records:
        key = rec.timestamp // SECONDS_PER_DAY
        bucket = buckets.get(key)
        if bucket is None:
            bucket = buckets[key] = []
        bucket.append(rec)
    return [DayBucket(EPOCH + dt.timedelta(days=k), buckets[k]) for k in sorted(buckets)]


def parse_meta_line(line: str, lineno: Optional[int] = None) -> VideoMeta:
    fields = line.split("\t")
    if len(fields) != 3:
        raise RecordParseError("FieldCount", f"expected 3 fields, got {len(fields)}", lineno)
    video, cat, date = fields
    if not _is_token(video):
        raise RecordParseError("EmptyVideoId", f"bad video id {video!r}", lineno, 1)
    try:
        category = Category(cat)
    except ValueError:
        raise RecordParseError("InvalidCategory", f"unknown category {cat!r}", lineno, 2) from None
    try:
        release = dt.date.fromisoformat(date)
    except ValueError:
        raise RecordParseError("InvalidDate", f"bad date {date!r}", lineno, 3) from None
    return VideoMeta(video, category, release)


def format_meta(meta: VideoMeta) -> str:
    return f"{meta.video_id}\t{meta.category.value}\t{meta.release_date.isoformat()}"


def read_meta(source: IO) -> dict:
    """Read a metadata file into ``{video_id: VideoMeta}``; duplicates are an error."""
    out: dict = {}
    for lineno, line in enumerate(_text_lines(source), 1):
        line = line.rstrip("\r\n")
        if not line:
            continue
        meta = parse_meta_line(line, lineno)
        if meta.video_id in out:
            raise RecordParseError("DuplicateVideo", f"video {meta.video_id!r} listed twice", lineno, 1)
        out[meta.video_id] = meta
    return out


def read_meta_file(path) -> dict:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return read_meta(fh)


def write_meta(metas: Iterable[VideoMeta], sink: IO) -> int:
    n = 0
    for m in metas:
        sink.write(format_meta(m))
        sink.write("\n")
        n += 1
    return n
