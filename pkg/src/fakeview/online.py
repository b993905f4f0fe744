"""Streaming threshold rule over view records.

Per IP the detector keeps a view count and the set of videos seen (exact up
to ``distinct_cap`` entries, then only "at least that many"). An IP is
flagged the first time ``views > K`` while it has touched fewer than ``L``
videos. An optional entropy tier flags IPs whose running entropy is still
below ``eps_lo`` once they reach ``W`` views. Alerts latch: at most one per
IP per window.
"""

from __future__ import annotations

import dataclasses
import enum
import zlib
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple, Optional

from .entropy import RunningEntropy
from .errors import ConfigError, WindowError
from .records import SECONDS_PER_DAY, ViewRecord

SECONDS_PER_HOUR = 3600


class Rule(str, enum.Enum):
    THRESHOLD_RULE = "THRESHOLD_RULE"
    ENTROPY_RULE = "ENTROPY_RULE"


@dataclass(frozen=True)
class OnlineConfig:
    """Rule parameters. ``window_hours=None`` means calendar (UTC) days."""

    k: int = 300
    l: int = 10
    window_hours: Optional[int] = None
    entropy_tier: bool = False
    eps_lo: float = 0.3
    w: int = 300
    distinct_cap: int = 64

    def validate(self) -> "OnlineConfig":
        if self.k < 1 or self.l < 1:
            raise ConfigError("K and L must be >= 1")
        if self.window_hours is not None and not 1 <= self.window_hours <= 24 * 366:
            raise ConfigError("window_hours must be a positive number of hours")
        if self.eps_lo < 0:
            raise ConfigError("eps_lo must be >= 0")
        if self.w < 1:
            raise ConfigError("W must be >= 1")
        if self.distinct_cap < self.l:
            raise ConfigError("distinct_cap must be >= L or the rule could never be checked")
        return self

    @property
    def window_seconds(self) -> int:
        return SECONDS_PER_DAY if self.window_hours is None else self.window_hours * SECONDS_PER_HOUR

    def window_of(self, timestamp: int) -> int:
        """Start timestamp of the window containing ``timestamp``."""
        size = self.window_seconds
        return (int(timestamp) // size) * size

    @classmethod
    def from_json(cls, data: dict) -> "OnlineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown online keys: {sorted(unknown)}")
        return cls(**data).validate()


def configure(k=300, l=10, window_hours=None, entropy_tier=False, eps_lo=0.3, w=300, distinct_cap=64) -> OnlineConfig:
    """Validated online parameters."""
    return OnlineConfig(k, l, window_hours, entropy_tier, eps_lo, w, distinct_cap).validate()


class Alert(NamedTuple):
    ip: str
    window: int
    views: int
    videos: int
    rule: Rule
    ts: int

    def to_json(self) -> dict:
        return {"ip": self.ip, "views": self.views, "videos": self.videos, "rule": Rule(self.rule).value, "ts": self.ts}


class IpSummary(NamedTuple):
    views: int
    distinct: int
    saturated: bool
    entropy: Optional[float]
    alerted: bool


class WindowSummary(NamedTuple):
    window: Optional[int]
    ips: dict
    total_views: int
    suspicious: list


class _Counter:
    __slots__ = ("views", "videos", "distinct", "entropy", "alerted")

    def __init__(self, track_entropy: bool):
        self.views = 0
        self.videos: Optional[dict] = {}
        self.distinct = 0
        self.entropy = RunningEntropy() if track_entropy else None
        self.alerted = False

    def add(self, video: str, cap: int) -> None:
        self.views += 1
        videos = self.videos
        if videos is None:
            return
        seen = videos.get(video, 0)
        if seen == 0:
            if len(videos) >= cap:
                # saturate: from here on only "at least cap" is known
                self.videos = None
                self.entropy = None
                self.distinct = cap
                return
            self.distinct += 1
        videos[video] = seen + 1
        if self.entropy is not None:
            self.entropy.add(seen)

    def summary(self) -> IpSummary:
        h = self.entropy.value if self.entropy is not None else None
        return IpSummary(self.views, self.distinct, self.videos is None, h, self.alerted)


class OnlineDetector:
    """Single-writer rule detector for one shard of the IP space."""

    def __init__(self, config: Optional[OnlineConfig] = None):
        self.config = (config or OnlineConfig()).validate()
        self._pending: Optional[OnlineConfig] = None
        self.window: Optional[int] = None
        self._counters: dict = {}
        self._records = 0

    def configure(self, config: OnlineConfig) -> None:
        """Queue new parameters; they apply from the next window."""
        self._pending = config.validate()

    def in_window(self, timestamp: int) -> bool:
        return self.window is None or self.config.window_of(timestamp) == self.window

    def process(self, record: ViewRecord) -> Optional[Alert]:
        cfg = self.config
        if self.window is None:
            self.window = cfg.window_of(record.timestamp)
        elif cfg.window_of(record.timestamp) != self.window:
            raise WindowError(
                f"record at {record.timestamp} is outside window starting {self.window}; rotate first"
            )
        c = self._counters.get(record.ip)
        if c is None:
            c = self._counters[record.ip] = _Counter(cfg.entropy_tier)
        c.add(record.video_id, cfg.distinct_cap)
        self._records += 1
        if c.alerted:
            return None
        if c.views > cfg.k and c.distinct < cfg.l:
            c.alerted = True
            return Alert(record.ip, self.window, c.views, c.distinct, Rule.THRESHOLD_RULE, record.timestamp)
        if c.entropy is not None and c.views >= cfg.w and c.entropy.value <= cfg.eps_lo:
            c.alerted = True
            return Alert(record.ip, self.window, c.views, c.distinct, Rule.ENTROPY_RULE, record.timestamp)
        return None

    def rotate(self, new_window: Optional[int] = None) -> WindowSummary:
        """Flush the current window's counters and start afresh.

        The flushed summary marks IPs above ``K/2`` views as suspicious so
        they can be handed to the offline pipeline.
        """
        half = self.config.k / 2.0
        ips = {ip: c.summary() for ip, c in sorted(self._counters.items())}
        summary = WindowSummary(
            self.window, ips, self._records, [ip for ip, s in ips.items() if s.views > half],
        )
        if self._pending is not None:
            self.config, self._pending = self._pending, None
        self._counters = {}
        self._records = 0
        self.window = new_window
        return summary

    def run(self, records: Iterable[ViewRecord], summaries: Optional[list] = None) -> Iterator[Alert]:
        """Process a time-ordered stream, rotating whenever a later window starts.

        Flushed window summaries are appended to ``summaries`` when given.
        A record older than the current window raises WindowError.
        """
        for rec in records:
            if not self.in_window(rec.timestamp):
                if self.config.window_of(rec.timestamp) < self.window:
                    raise WindowError(f"late record at {rec.timestamp} for window starting {self.window}")
                flushed = self.rotate()
                if summaries is not None:
                    summaries.append(flushed)
            alert = self.process(rec)
            if alert is not None:
                yield alert

    def __len__(self) -> int:
        return len(self._counters)


def shard_of(ip: str, n_shards: int) -> int:
    """Stable shard index for an IP (CRC-32 of its text form)."""
    if n_shards < 1:
        raise ValueError("n_shards must be >= 1")
    return zlib.crc32(ip.encode("ascii")) % n_shards


class ShardedDetector:
    """Routes each record to the shard owning its IP; shards share nothing."""

    def __init__(self, n_shards: int, config: Optional[OnlineConfig] = None):
        if n_shards < 1:
            raise ValueError("n_shards must be >= 1")
        self.shards = [OnlineDetector(config) for _ in range(n_shards)]

    def process(self, record: ViewRecord) -> Optional[Alert]:
        return self.shards[shard_of(record.ip, len(self.shards))].process(record)

    def rotate(self, new_window: Optional[int] = None) -> WindowSummary:
        parts = [s.rotate(new_window) for s in self.shards]
        window = next((p.window for p in parts if p.window is not None), None)
        ips: dict = {}
        for p in parts:
            ips.update(p.ips)
        suspicious = sorted(ip for p in parts for ip in p.suspicious)
        return WindowSummary(window, dict(sorted(ips.items())), sum(p.total_views for p in parts), suspicious)
