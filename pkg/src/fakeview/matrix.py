"""Sparse entity x video access matrices (IP or user rows, video columns)."""

from __future__ import annotations

import enum
from typing import Iterable, Iterator, Optional

from .errors import NotFoundError
from .records import ViewRecord, gc_paused

DEFAULT_MIN_VIEWS = 50


class KeyKind(str, enum.Enum):
    IP = "IP"
    USER = "USER"

    @classmethod
    def parse(cls, value) -> "KeyKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ValueError(f"key kind must be 'ip' or 'user', got {value!r}") from None


class AccessMatrix:
    """Daily view counts ``a[entity][video]`` with eagerly kept row/column totals.

    Zero cells are never stored. Rows are IPs or user ids depending on
    ``key_kind``; the column view is an inverted index built on demand.
    """

    def __init__(self, key_kind=KeyKind.IP):
        self.key_kind = KeyKind.parse(key_kind)
        self.rows: dict = {}
        self.row_totals: dict = {}
        self.col_totals: dict = {}
        self.total_views = 0
        self._columns: Optional[dict] = None

    @classmethod
    def build(cls, records: Iterable[ViewRecord], key_kind=KeyKind.IP) -> "AccessMatrix":
        """Tally records (a DayBucket or any iterable of ViewRecord)."""
        mat = cls(key_kind)
        with gc_paused():
            mat._tally(records)
        mat._recompute_totals()
        return mat

    def _tally(self, records) -> None:
        rows = self.rows
        if self.key_kind is KeyKind.IP:
            for rec in records:
                row = rows.get(rec.ip)
                if row is None:
                    row = rows[rec.ip] = {}
                vid = rec.video_id
                row[vid] = row.get(vid, 0) + 1
        else:
            for rec in records:
                user = rec.user_id
                if user is None:
                    continue
                row = rows.get(user)
                if row is None:
                    row = rows[user] = {}
                vid = rec.video_id
                row[vid] = row.get(vid, 0) + 1

    @classmethod
    def from_rows(cls, rows: dict, key_kind=KeyKind.IP) -> "AccessMatrix":
        mat = cls(key_kind)
        for entity, row in rows.items():
            kept = {v: int(c) for v, c in row.items() if c}
            if any(c < 0 for c in kept.values()):
                raise ValueError(f"negative count in row {entity!r}")
            if kept:
                mat.rows[entity] = kept
        mat._recompute_totals()
        return mat

    def _recompute_totals(self) -> None:
        self.row_totals = {e: sum(row.values()) for e, row in self.rows.items()}
        cols: dict = {}
        for row in self.rows.values():
            for vid, c in row.items():
                cols[vid] = cols.get(vid, 0) + c
        self.col_totals = cols
        self.total_views = sum(self.row_totals.values())
        self._columns = None

    def increment(self, entity, video_id: str, count: int = 1) -> None:
        if count < 1:
            raise ValueError("count must be >= 1")
        row = self.rows.get(entity)
        if row is None:
            row = self.rows[entity] = {}
        row[video_id] = row.get(video_id, 0) + count
        self.row_totals[entity] = self.row_totals.get(entity, 0) + count
        self.col_totals[video_id] = self.col_totals.get(video_id, 0) + count
        self.total_views += count
        if self._columns is not None:
            col = self._columns.setdefault(video_id, {})
            col[entity] = col.get(entity, 0) + count

    def add_record(self, record: ViewRecord) -> None:
        if self.key_kind is KeyKind.IP:
            self.increment(record.ip, record.video_id)
        elif record.user_id is not None:
            self.increment(record.user_id, record.video_id)

    def merge(self, other: "AccessMatrix") -> "AccessMatrix":
        """Combine two shard matrices of the same kind into a new matrix."""
        if other.key_kind is not self.key_kind:
            raise ValueError("cannot merge matrices of different key kinds")
        out = AccessMatrix(self.key_kind)
        out.rows = {e: dict(r) for e, r in self.rows.items()}
        for e, row in other.rows.items():
            mine = out.rows.setdefault(e, {})
            for v, c in row.items():
                mine[v] = mine.get(v, 0) + c
        out._recompute_totals()
        return out

    def filter_rows(self, min_views: int = DEFAULT_MIN_VIEWS) -> "AccessMatrix":
        """Keep rows whose total is at least ``min_views``; column totals are recounted."""
        if min_views < 0:
            raise ValueError("min_views must be >= 0")
        out = AccessMatrix(self.key_kind)
        out.rows = {e: row for e, row in self.rows.items() if self.row_totals[e] >= min_views}
        out._recompute_totals()
        return out

    # -- queries ---------------------------------------------------------

    @property
    def m(self) -> int:
        return len(self.rows)

    @property
    def n(self) -> int:
        return len(self.col_totals)

    def __contains__(self, entity) -> bool:
        return entity in self.rows

    def __eq__(self, other) -> bool:
        if not isinstance(other, AccessMatrix):
            return NotImplemented
        return self.key_kind is other.key_kind and self.rows == other.rows

    def row(self, entity) -> dict:
        try:
            return self.rows[entity]
        except KeyError:
            raise NotFoundError(f"entity {entity!r} not in matrix") from None

    def columns(self) -> dict:
        """Inverted index ``{video: {entity: count}}``, materialized once."""
        if self._columns is None:
            cols: dict = {}
            with gc_paused():
                for e, row in self.rows.items():
                    for v, c in row.items():
                        col = cols.get(v)
                        if col is None:
                            col = cols[v] = {}
                        col[e] = c
            self._columns = cols
        return self._columns

    def column(self, video_id: str) -> dict:
        try:
            return self.columns()[video_id]
        except KeyError:
            raise NotFoundError(f"video {video_id!r} not in matrix") from None

    def cells(self) -> Iterator[tuple]:
        for e, row in self.rows.items():
            for v, c in row.items():
                yield e, v, c

    def check_invariants(self) -> None:
        assert all(c >= 1 for _, _, c in self.cells())
        assert self.row_totals == {e: sum(r.values()) for e, r in self.rows.items()}
        cols: dict = {}
        for _, v, c in self.cells():
            cols[v] = cols.get(v, 0) + c
        assert self.col_totals == cols
        assert self.total_views == sum(self.row_totals.values()) == sum(self.col_totals.values())

    def __repr__(self):
        return f"AccessMatrix({self.key_kind.value}, m={self.m}, n={self.n}, total={self.total_views})"


def write_matrix_csv(matrix: AccessMatrix, sink) -> int:
    """Dump cells as ``entity,video,count`` rows, sorted for stable output."""
    sink.write("entity,video,count\n")
    n = 0
    for e in sorted(matrix.rows):
        row = matrix.rows[e]
        for v in sorted(row):
            sink.write(f"{e},{v},{row[v]}\n")
            n += 1
    return n
