"""Labeled synthetic view logs: normal diurnal traffic plus injected attacks.

Normal traffic: each user draws a daily view count, picks videos i.i.d. from
a Zipf catalog, and gets timestamps from a 24-hour diurnal curve. Users sit
behind public IPs according to a NAT group-size profile. Attacks append
flagged records from fresh (or NAT) IPs; everything is deterministic per seed.

Attack rates follow the two tools and two IP modes seen in the wild, divided
by ``scale`` (default 1000) so a day fits on a laptop:

=================  ================  ===============
                   artificial views  forged reports
=================  ================  ===============
single IP          < 10k/day         ~10m/day
multiple IPs       100k - 10m/day    > 10m/day
=================  ================  ===============
"""

from __future__ import annotations

import dataclasses
import datetime as dt
import enum
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .entropy import PopularityDistribution
from .errors import ConfigError, RateError
from .records import (
    SECONDS_PER_DAY, Category, DayBucket, VideoMeta, ViewRecord, day_start, int_to_ip,
)

DEFAULT_DAY = dt.date(2013, 9, 4)
DEFAULT_SCALE = 1000.0

# Relative hourly view volume, 00:00 .. 23:00; evening busy hours dominate.
_DIURNAL_SHAPE = [
    3.0, 2.0, 1.4, 1.0, 0.8, 0.8, 1.0, 1.6, 2.4, 3.0, 3.4, 3.6,
    3.9, 3.8, 3.6, 3.6, 3.8, 4.2, 5.2, 6.2, 6.8, 6.6, 5.6, 4.2,
]
DEFAULT_DIURNAL = [w / sum(_DIURNAL_SHAPE) for w in _DIURNAL_SHAPE]

# (users behind one public IP, probability of that group size)
DEFAULT_NAT_PROFILE = [(1, 0.70), (2, 0.12), (5, 0.10), (20, 0.05), (60, 0.02), (200, 0.01)]

DEFAULT_CATEGORY_MIX = {
    "UGC": 0.40, "MV": 0.15, "TV": 0.20, "MOVIE": 0.10, "NEWS": 0.08, "SPORTS": 0.05, "OTHER": 0.02,
}

# Normal users live in 1.0.0.0 - 99.255.255.255; attackers get fresh
# addresses from 100.0.0.0 upward so they never collide with the population.
_NORMAL_IP_BASE = 1 << 24
_NORMAL_IP_SPAN = 99 << 24
_ATTACK_IP_BASE = 100 << 24
_ATTACK_IP_SPAN = 100 << 24


def _rng(seed: int, *stream) -> np.random.Generator:
    tags = [int(seed) & (2**64 - 1)] + [sum(ord(c) << (8 * i) for i, c in enumerate(s)) if isinstance(s, str) else int(s) for s in stream]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(tags)))


@dataclass
class WorkloadConfig:
    n_videos: int = 2000
    zipf_exponent: float = 0.7
    n_users: int = 20000
    nat_profile: list = field(default_factory=lambda: list(DEFAULT_NAT_PROFILE))
    views_per_user_per_day: dict = field(default_factory=lambda: {"kind": "geometric", "mean": 4.0})
    diurnal_curve: list = field(default_factory=lambda: list(DEFAULT_DIURNAL))
    day: dt.date = DEFAULT_DAY
    rng_seed: int = 0
    catalog_seed: Optional[int] = None
    user_id_fraction: float = 0.1
    category_mix: dict = field(default_factory=lambda: dict(DEFAULT_CATEGORY_MIX))
    mean_release_age_days: float = 180.0

    def validate(self) -> None:
        if self.n_users < 1 or self.n_videos < 1:
            raise ConfigError("need at least one user and one video")
        if not self.zipf_exponent > 0:
            raise ConfigError("zipf_exponent must be > 0")
        if len(self.diurnal_curve) != 24:
            raise ConfigError("diurnal_curve needs 24 hourly weights")
        if any(w < 0 for w in self.diurnal_curve) or abs(sum(self.diurnal_curve) - 1.0) > 1e-9:
            raise ConfigError("hourly weights must be >= 0 and sum to 1")
        if not self.nat_profile:
            raise ConfigError("nat_profile is empty")
        sizes = [s for s, _ in self.nat_profile]
        probs = [p for _, p in self.nat_profile]
        if any(int(s) != s or s < 1 for s in sizes) or any(p < 0 for p in probs):
            raise ConfigError("nat_profile entries must be (size >= 1, probability >= 0)")
        if abs(sum(probs) - 1.0) > 1e-9:
            raise ConfigError("nat_profile probabilities must sum to 1")
        kind = self.views_per_user_per_day.get("kind")
        if kind not in ("geometric", "poisson", "fixed"):
            raise ConfigError(f"unknown views_per_user_per_day kind {kind!r}")
        if not self.views_per_user_per_day.get("mean", 0) >= 1:
            raise ConfigError("views_per_user_per_day mean must be >= 1")
        if not 0 <= self.user_id_fraction <= 1:
            raise ConfigError("user_id_fraction must be in [0, 1]")

    @property
    def seed_for_catalog(self) -> int:
        return self.rng_seed if self.catalog_seed is None else self.catalog_seed

    def to_json(self) -> dict:
        d = dataclasses.asdict(self)
        d["day"] = self.day.isoformat()
        d["nat_profile"] = [list(x) for x in self.nat_profile]
        return d

    @classmethod
    def from_json(cls, data: dict) -> "WorkloadConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown workload keys: {sorted(unknown)}")
        data = dict(data)
        if "day" in data and isinstance(data["day"], str):
            try:
                data["day"] = dt.date.fromisoformat(data["day"])
            except ValueError:
                raise ConfigError(f"bad day {data['day']!r}") from None
        if "nat_profile" in data:
            data["nat_profile"] = [tuple(x) for x in data["nat_profile"]]
        if "diurnal_curve" in data:
            w = [float(x) for x in data["diurnal_curve"]]
            total = sum(w)
            data["diurnal_curve"] = [x / total for x in w] if total > 0 else w
        cfg = cls(**data)
        cfg.validate()
        return cfg


class AttackMethod(str, enum.Enum):
    ARTIFICIAL_VIEWS = "ARTIFICIAL_VIEWS"
    FORGED_REPORTS = "FORGED_REPORTS"


class Pacing(str, enum.Enum):
    UNIFORM = "UNIFORM"
    RANDOM_ON_OFF = "RANDOM_ON_OFF"


@dataclass
class AttackConfig:
    method: AttackMethod
    target_videos: list
    total_fake_views: int
    ip_count: int = 1
    start_hour: float = 0.0
    duration_hours: float = 24.0
    pacing: Pacing = Pacing.UNIFORM
    rng_seed: int = 0
    via_ips: Optional[list] = None
    attach_user_ids: bool = False
    scale: float = DEFAULT_SCALE
    video_weights: Optional[list] = None
    label: str = ""

    @property
    def ip_mode(self) -> str:
        return "SINGLE" if self.ip_count == 1 else f"MULTI({self.ip_count})"

    def per_ip_cap(self) -> Optional[int]:
        if AttackMethod(self.method) is AttackMethod.ARTIFICIAL_VIEWS:
            return max(1, int(10_000 / self.scale))
        return None

    def validate(self) -> None:
        if self.total_fake_views <= 0:
            raise ConfigError("total_fake_views must be > 0")
        if self.ip_count < 1:
            raise ConfigError("ip_count must be >= 1")
        if not self.target_videos:
            raise ConfigError("attack needs at least one target video")
        if self.via_ips is not None and len(self.via_ips) != self.ip_count:
            raise ConfigError("via_ips must list exactly ip_count addresses")
        if self.video_weights is not None and len(self.video_weights) != len(self.target_videos):
            raise ConfigError("video_weights must match target_videos")
        if self.scale <= 0:
            raise ConfigError("scale must be > 0")
        if not (0 <= self.start_hour and self.duration_hours > 0 and self.start_hour + self.duration_hours <= 24 + 1e-9):
            raise ConfigError("attack window must lie within the day")
        cap = self.per_ip_cap()
        if cap is not None and self.total_fake_views > cap * self.ip_count:
            raise RateError(
                f"artificial views are limited to {cap}/day per IP at scale {self.scale:g}; "
                f"{self.total_fake_views} views need at least {math.ceil(self.total_fake_views / cap)} IPs"
            )


@dataclass
class GroundTruth:
    fake_record_flags: np.ndarray
    fake_ips: set = field(default_factory=set)
    fake_videos: set = field(default_factory=set)
    injected_per_video: dict = field(default_factory=dict)
    fake_ips_with_user_ids: set = field(default_factory=set)
    fake_user_ids: set = field(default_factory=set)
    attacks: list = field(default_factory=list)

    @classmethod
    def clean(cls, n: int) -> "GroundTruth":
        return cls(np.zeros(n, dtype=bool))

    @property
    def fake_views(self) -> int:
        return int(self.fake_record_flags.sum())

    @property
    def fake_fraction(self) -> float:
        n = len(self.fake_record_flags)
        return self.fake_views / n if n else 0.0

    def check(self) -> None:
        assert sum(self.injected_per_video.values()) == self.fake_views

    def sidecar(self) -> dict:
        return {
            "fake_ips": sorted(self.fake_ips),
            "fake_videos": sorted(self.fake_videos),
            "injected_per_video": {k: self.injected_per_video[k] for k in sorted(self.injected_per_video)},
            "fake_ips_with_user_ids": sorted(self.fake_ips_with_user_ids),
            "fake_user_ids": sorted(self.fake_user_ids),
            "total_records": int(len(self.fake_record_flags)),
            "fake_views": self.fake_views,
            "attacks": self.attacks,
        }

    @classmethod
    def from_files(cls, flags_path, sidecar_path) -> "GroundTruth":
        flags = []
        with open(flags_path, encoding="utf-8") as fh:
            for expected, line in enumerate(fh):
                idx, flag = line.rstrip("\n").split("\t")
                if int(idx) != expected or flag not in ("0", "1"):
                    raise ValueError(f"bad truth line {expected + 1}: {line!r}")
                flags.append(flag == "1")
        with open(sidecar_path, encoding="utf-8") as fh:
            side = json.load(fh)
        return cls(
            np.asarray(flags, dtype=bool),
            set(side["fake_ips"]),
            set(side["fake_videos"]),
            dict(side["injected_per_video"]),
            set(side.get("fake_ips_with_user_ids", [])),
            set(side.get("fake_user_ids", [])),
            list(side.get("attacks", [])),
        )

    def write(self, flags_path, sidecar_path) -> None:
        with open(flags_path, "w", encoding="utf-8", newline="\n") as fh:
            for i, f in enumerate(self.fake_record_flags):
                fh.write(f"{i}\t{1 if f else 0}\n")
        with open(sidecar_path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.sidecar(), fh, indent=2, sort_keys=True)
            fh.write("\n")


@dataclass
class Catalog:
    video_ids: list
    popularity: PopularityDistribution
    meta: dict

    def rank_of(self, video_id: str) -> int:
        return self.video_ids.index(video_id)


def video_id_for(rank: int) -> str:
    return f"v{rank:06d}"


def generate_catalog(config: WorkloadConfig) -> Catalog:
    """Zipf-ranked video ids with categories and release dates (seeded by catalog_seed)."""
    config.validate()
    rng = _rng(config.seed_for_catalog, "catalog")
    ids = [video_id_for(r) for r in range(config.n_videos)]
    pop = PopularityDistribution.zipf(config.n_videos, config.zipf_exponent, keys=ids)
    cats = list(config.category_mix)
    probs = np.asarray([config.category_mix[c] for c in cats], dtype=float)
    cat_idx = rng.choice(len(cats), size=config.n_videos, p=probs / probs.sum())
    ages = np.floor(rng.exponential(config.mean_release_age_days, size=config.n_videos)).astype(int)
    meta = {
        vid: VideoMeta(vid, Category(cats[c]), config.day - dt.timedelta(days=int(a)))
        for vid, c, a in zip(ids, cat_idx.tolist(), ages.tolist())
    }
    return Catalog(ids, pop, meta)


def _user_views(rng, config: WorkloadConfig) -> np.ndarray:
    spec = config.views_per_user_per_day
    mean = float(spec["mean"])
    n = config.n_users
    if spec["kind"] == "geometric":
        return rng.geometric(1.0 / mean, size=n)
    if spec["kind"] == "poisson":
        return 1 + rng.poisson(mean - 1.0, size=n)
    return np.full(n, int(round(mean)))


def _assign_nat_groups(rng, config: WorkloadConfig) -> np.ndarray:
    sizes = np.asarray([s for s, _ in config.nat_profile], dtype=np.int64)
    probs = np.asarray([p for _, p in config.nat_profile], dtype=float)
    draws = sizes[rng.choice(len(sizes), size=config.n_users, p=probs / probs.sum())]
    cum = np.cumsum(draws)
    n_ips = int(np.searchsorted(cum, config.n_users) + 1)
    return np.repeat(np.arange(n_ips), draws[:n_ips])[: config.n_users]


def _unique_addresses(rng, n: int, base: int, span: int) -> np.ndarray:
    return base + rng.choice(span, size=n, replace=False)


def generate_normal_day(config: WorkloadConfig, catalog: Optional[Catalog] = None):
    """One attack-free day: ``(DayBucket, GroundTruth)`` with all flags false.

    Records are ordered by timestamp. Byte-identical across runs for a seed.
    """
    config.validate()
    if catalog is None:
        catalog = generate_catalog(config)
    rng = _rng(config.rng_seed, "normal", config.day.toordinal())
    ip_of_user = _assign_nat_groups(rng, config)
    n_ips = int(ip_of_user.max()) + 1
    ip_ints = _unique_addresses(rng, n_ips, _NORMAL_IP_BASE, _NORMAL_IP_SPAN)
    ip_strs = [int_to_ip(int(a)) for a in ip_ints]

    per_user = _user_views(rng, config)
    user_of_view = np.repeat(np.arange(config.n_users), per_user)
    n_views = len(user_of_view)
    video_idx = catalog.popularity.sample_indices(rng, n_views)
    hours = rng.choice(24, size=n_views, p=np.asarray(config.diurnal_curve) / np.sum(config.diurnal_curve))
    ts = day_start(config.day) + hours * 3600 + rng.integers(0, 3600, size=n_views)
    logged_in = rng.random(config.n_users) < config.user_id_fraction

    order = np.argsort(ts, kind="stable")
    ts = ts[order].tolist()
    users = user_of_view[order]
    vids = [catalog.video_ids[i] for i in video_idx[order].tolist()]
    ips = [ip_strs[i] for i in ip_of_user[users].tolist()]
    uid_names = {int(u): f"u{u}" for u in np.flatnonzero(logged_in).tolist()}
    uids = [uid_names.get(u) for u in users.tolist()]
    records = list(map(ViewRecord, ts, vids, ips, uids))
    return DayBucket(config.day, records), GroundTruth.clean(len(records))


def _attack_timestamps(rng, attack: AttackConfig, start: int, n: int) -> np.ndarray:
    lo = start + int(round(attack.start_hour * 3600))
    hi = min(start + SECONDS_PER_DAY, lo + int(round(attack.duration_hours * 3600)))
    if Pacing(attack.pacing) is Pacing.UNIFORM or hi - lo < 600:
        return np.sort(rng.integers(lo, hi, size=n))
    # on/off in 5-minute slots; at least one slot stays on
    n_slots = (hi - lo) // 300
    on = np.flatnonzero(rng.random(n_slots) < 0.5)
    if on.size == 0:
        on = np.asarray([rng.integers(n_slots)])
    slot = rng.choice(on, size=n)
    return np.sort(lo + slot * 300 + rng.integers(0, 300, size=n))


def _split_views(rng, total: int, parts: int, cap: Optional[int]) -> np.ndarray:
    if parts == 1:
        return np.asarray([total])
    share = rng.dirichlet(np.full(parts, 4.0))
    counts = np.floor(share * total).astype(np.int64)
    counts[np.argsort(-share)[: total - counts.sum()]] += 1
    if cap is not None:
        # push overflow onto IPs with headroom
        over = np.maximum(counts - cap, 0).sum()
        counts = np.minimum(counts, cap)
        while over > 0:
            room = np.flatnonzero(counts < cap)
            take = min(over, room.size)
            counts[room[:take]] += 1
            over -= take
    return counts


def _fake_records(attack: AttackConfig, day_start_ts: int):
    attack.validate()
    rng = _rng(attack.rng_seed, "attack", attack.label or "")
    n = int(attack.total_fake_views)
    if attack.via_ips is not None:
        ips = list(attack.via_ips)
    else:
        ips = [int_to_ip(int(a)) for a in _unique_addresses(rng, attack.ip_count, _ATTACK_IP_BASE, _ATTACK_IP_SPAN)]
    per_ip = _split_views(rng, n, len(ips), attack.per_ip_cap())
    ip_of_view = np.repeat(np.arange(len(ips)), per_ip)
    rng.shuffle(ip_of_view)
    targets = list(attack.target_videos)
    weights = np.asarray(attack.video_weights if attack.video_weights else [1.0] * len(targets), dtype=float)
    vid_of_view = rng.choice(len(targets), size=n, p=weights / weights.sum())
    ts = _attack_timestamps(rng, attack, day_start_ts, n)
    tag = attack.label or f"s{attack.rng_seed}"
    bot_ids = [f"bot-{tag}-{k}" for k in range(len(ips))] if attack.attach_user_ids else [None] * len(ips)
    fake = list(map(
        ViewRecord, ts.tolist(), [targets[v] for v in vid_of_view.tolist()],
        [ips[i] for i in ip_of_view.tolist()], [bot_ids[i] for i in ip_of_view.tolist()],
    ))
    active = [k for k in range(len(ips)) if per_ip[k]]
    counts = np.bincount(vid_of_view, minlength=len(targets)).tolist()
    info = {
        "label": attack.label, "method": AttackMethod(attack.method).value, "ip_mode": attack.ip_mode,
        "ips": sorted({ips[k] for k in active}), "targets": targets, "total_fake_views": n,
        "start_hour": attack.start_hour, "duration_hours": attack.duration_hours,
        "pacing": Pacing(attack.pacing).value, "via_nat": attack.via_ips is not None,
    }
    per_video = {v: c for v, c in zip(targets, counts) if c}
    users = {bot_ids[k] for k in active if bot_ids[k]}
    return fake, per_video, {ips[k] for k in active}, users, info


def inject_attacks(bucket: DayBucket, truth: GroundTruth, attacks: Sequence[AttackConfig]):
    """Inject several attacks with a single merge; see :func:`inject_attack`."""
    fake: list = []
    injected = dict(truth.injected_per_video)
    fake_ips, fake_videos = set(truth.fake_ips), set(truth.fake_videos)
    with_uid, fake_users = set(truth.fake_ips_with_user_ids), set(truth.fake_user_ids)
    infos = list(truth.attacks)
    for attack in attacks:
        recs, per_video, ips, users, info = _fake_records(attack, bucket.start)
        fake.extend(recs)
        for v, c in per_video.items():
            injected[v] = injected.get(v, 0) + c
        fake_ips |= ips
        fake_videos |= set(per_video)
        if users:
            with_uid |= ips
            fake_users |= users
        infos.append(info)

    old = bucket.records
    n = len(fake)
    old_ts = np.fromiter((r.timestamp for r in old), dtype=np.int64, count=len(old))
    if old_ts.size < 2 or bool(np.all(old_ts[1:] >= old_ts[:-1])):
        new_ts = np.fromiter((r.timestamp for r in fake), dtype=np.int64, count=n)
        order = np.argsort(new_ts, kind="stable")
        fake = [fake[i] for i in order.tolist()]
        # slot of each fake record in the merged list; equal stamps go after originals
        pos = np.searchsorted(old_ts, new_ts[order], side="right") + np.arange(n)
        total = len(old) + n
        is_new = np.zeros(total, dtype=bool)
        is_new[pos] = True
        merged = [None] * total
        for p, r in zip(np.flatnonzero(~is_new).tolist(), old):
            merged[p] = r
        for p, r in zip(pos.tolist(), fake):
            merged[p] = r
        flags = np.empty(total, dtype=bool)
        flags[~is_new] = truth.fake_record_flags
        flags[is_new] = True
    else:
        merged = list(old) + fake
        flags = np.concatenate([truth.fake_record_flags, np.ones(n, dtype=bool)])
    new_truth = GroundTruth(flags, fake_ips, fake_videos, injected, with_uid, fake_users, infos)
    return DayBucket(bucket.day, merged), new_truth


def inject_attack(bucket: DayBucket, truth: GroundTruth, attack: AttackConfig):
    """Add ``total_fake_views`` flagged records for one attack.

    If the bucket is time-ordered the new records are merged in by
    timestamp (ties keep existing records first); otherwise they are
    appended. Either way, dropping flagged records restores the input.
    """
    return inject_attacks(bucket, truth, [attack])


def hourly_histogram(records) -> list:
    hist = [0] * 24
    for r in records:
        hist[(r.timestamp % SECONDS_PER_DAY) // 3600] += 1
    return hist


def strip_fake(bucket: DayBucket, truth: GroundTruth) -> DayBucket:
    keep = [r for r, f in zip(bucket.records, truth.fake_record_flags.tolist()) if not f]
    return DayBucket(bucket.day, keep)
