"""Multi-day attack scenarios built on the simulator.

``simulate`` produces a run of days where a fixed fraction of the
reportable videos is attacked and fake views make up a target share of each
day's traffic. Some targets are fresh uploads with no organic audience yet;
the rest come from the catalog below its most popular head. Attack sizes
are spread log-normally around the day's budget so both barely visible and
overwhelming attacks occur.
"""

from __future__ import annotations

import dataclasses
import datetime as dt
import math
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from .errors import ConfigError
from .records import Category, DayBucket, VideoMeta
from .simulator import (
    DEFAULT_SCALE, AttackConfig, AttackMethod, Catalog, GroundTruth, Pacing, WorkloadConfig,
    _rng, generate_catalog, generate_normal_day, inject_attacks,
)

DEFAULT_METHOD_MIX = {
    "forged_single": 0.40,
    "forged_multi": 0.30,
    "forged_nat": 0.15,
    "artificial_multi": 0.15,
}
METHODS = ("forged_single", "forged_multi", "forged_nat", "artificial_multi", "artificial_single")

VIEWS_PER_FORGED_IP = 250
NAT_HOST_MIN_VIEWS = 25

# A day with about 1.2M views and 2,000+ videos above 100 views.
WEEK_WORKLOAD = dict(n_videos=10_000, zipf_exponent=0.7, n_users=300_000)


@dataclass
class ScenarioConfig:
    workload: WorkloadConfig = field(default_factory=WorkloadConfig)
    days: int = 1
    attack_video_fraction: float = 0.05
    fake_view_fraction: tuple = (0.02, 0.05)
    method_mix: dict = field(default_factory=lambda: dict(DEFAULT_METHOD_MIX))
    report_threshold: int = 100
    head_exclusion: float = 0.02
    young_fraction: float = 0.8
    user_id_attack_fraction: float = 0.5
    scale: float = DEFAULT_SCALE
    size_dispersion: float = 1.0
    fresh_target_fraction: float = 0.3
    min_attack_views: int = 150
    artificial_max_ips: int = 20
    seed: int = 0

    def validate(self) -> None:
        self.workload.validate()
        if self.days < 1:
            raise ConfigError("days must be >= 1")
        if not 0 <= self.fresh_target_fraction <= 1:
            raise ConfigError("fresh_target_fraction must be in [0, 1]")
        if self.artificial_max_ips < 1:
            raise ConfigError("artificial_max_ips must be >= 1")
        if self.min_attack_views < 2:
            raise ConfigError("min_attack_views must be >= 2")
        if self.size_dispersion < 0:
            raise ConfigError("size_dispersion must be >= 0")
        if not 0 <= self.attack_video_fraction < 1:
            raise ConfigError("attack_video_fraction must be in [0, 1)")
        lo, hi = self.fake_view_fraction
        if not 0 <= lo <= hi < 1:
            raise ConfigError("fake_view_fraction must be 0 <= lo <= hi < 1")
        unknown = set(self.method_mix) - set(METHODS)
        if unknown:
            raise ConfigError(f"unknown attack methods {sorted(unknown)}")
        if self.attack_video_fraction > 0 and sum(self.method_mix.values()) <= 0:
            raise ConfigError("method_mix weights must be positive")

    def to_json(self) -> dict:
        d = dataclasses.asdict(self)
        d["workload"] = self.workload.to_json()
        d["fake_view_fraction"] = list(self.fake_view_fraction)
        return d

    @classmethod
    def from_json(cls, data: dict) -> "ScenarioConfig":
        data = dict(data)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
        data["workload"] = WorkloadConfig.from_json(data.get("workload", {}))
        if "fake_view_fraction" in data:
            data["fake_view_fraction"] = tuple(data["fake_view_fraction"])
        cfg = cls(**data)
        cfg.validate()
        return cfg


@dataclass
class SimulatedDay:
    bucket: DayBucket
    truth: GroundTruth
    meta: dict


def _organic_counts(bucket: DayBucket) -> dict:
    vids, counts = np.unique(np.asarray([r.video_id for r in bucket.records]), return_counts=True)
    return dict(zip(vids.tolist(), counts.tolist()))


def _ip_counts(bucket: DayBucket) -> dict:
    out: dict = {}
    for r in bucket.records:
        out[r.ip] = out.get(r.ip, 0) + 1
    return out


def plan_attacks(
    config: ScenarioConfig, catalog: Catalog, bucket: DayBucket, day_index: int, excluded: set, meta: dict,
) -> list:
    """Choose targets, sizes and methods for one day; updates ``meta`` release dates."""
    rng = _rng(config.seed, "plan", day_index)
    organic = _organic_counts(bucket)
    reportable = sum(1 for c in organic.values() if c >= config.report_threshold)
    n_attacks = int(round(config.attack_video_fraction * reportable))
    if n_attacks == 0:
        return []
    n_fresh = int(rng.binomial(n_attacks, config.fresh_target_fraction))
    first = int(math.ceil(config.head_exclusion * len(catalog.video_ids)))
    pool = [v for v in catalog.video_ids[first:] if v not in excluded]
    if len(pool) < n_attacks - n_fresh:
        raise ConfigError("not enough untouched videos left to attack")
    picks = rng.choice(len(pool), size=n_attacks - n_fresh, replace=False).tolist()
    targets = [pool[i] for i in picks] + [f"u{day_index:03d}{k:04d}" for k in range(n_fresh)]
    if n_fresh:
        cats = list(config.workload.category_mix)
        for vid in targets[-n_fresh:]:
            meta[vid] = VideoMeta(vid, Category(cats[int(rng.integers(len(cats)))]), bucket.day)

    normal_total = len(bucket.records)
    lo, hi = config.fake_view_fraction
    f = rng.uniform(lo, hi)
    budget = int(round(f * normal_total / (1.0 - f)))
    names = [m for m in METHODS if config.method_mix.get(m, 0) > 0]
    probs = np.asarray([config.method_mix[m] for m in names], dtype=float)
    methods = [names[i] for i in rng.choice(len(names), size=n_attacks, p=probs / probs.sum()).tolist()]
    cap = max(1, int(10_000 / config.scale))

    # every attack buys a minimum package; the rest of the budget is spread log-normally
    floor = max(2, min(config.min_attack_views, budget // n_attacks))
    weight = rng.lognormal(0, config.size_dispersion, n_attacks)
    sizes = floor + np.floor(weight / weight.sum() * max(budget - floor * n_attacks, 0)).astype(int)
    # playback bots are rate-capped, so their orders are limited by the bot pool
    limit = np.asarray([
        cap * config.artificial_max_ips if m == "artificial_multi" else cap if m == "artificial_single" else np.inf
        for m in methods
    ])
    free = ~np.isfinite(limit)
    if free.any():
        excess = int(np.maximum(sizes - limit, 0).sum())
        sizes = np.minimum(sizes, limit).astype(int)
        share = weight * free
        sizes += np.floor(share / share.sum() * excess).astype(int)
        top = int(np.argmax(np.where(free, sizes, -1)))
        sizes[top] += max(budget - int(sizes.sum()), 0)
    else:
        sizes = np.minimum(sizes, limit).astype(int)

    ip_views = _ip_counts(bucket) if "forged_nat" in methods else {}
    nat_hosts = sorted((w, ip) for ip, w in ip_views.items() if w >= NAT_HOST_MIN_VIEWS)
    used_nat: set = set()

    attacks = []
    for k, (vid, delta, method) in enumerate(zip(targets, sizes.tolist(), methods)):
        delta = max(int(delta), 2)
        kw = dict(
            target_videos=[vid],
            total_fake_views=delta,
            scale=config.scale,
            rng_seed=int(rng.integers(2**63)),
            pacing=Pacing.RANDOM_ON_OFF if rng.random() < 0.5 else Pacing.UNIFORM,
            attach_user_ids=bool(rng.random() < config.user_id_attack_fraction),
            label=f"d{day_index}a{k}",
        )
        duration = float(rng.uniform(1.0, 6.0))
        kw["start_hour"] = float(rng.uniform(0.0, 24.0 - duration))
        kw["duration_hours"] = duration
        if method == "forged_single":
            attack = AttackConfig(AttackMethod.FORGED_REPORTS, ip_count=1, **kw)
        elif method == "forged_multi":
            # a few hundred views per IP; too small an order goes out through one IP
            n_ips = int(np.clip(delta // VIEWS_PER_FORGED_IP, 1, 10))
            attack = AttackConfig(AttackMethod.FORGED_REPORTS, ip_count=n_ips, **kw)
        elif method == "artificial_multi":
            attack = AttackConfig(AttackMethod.ARTIFICIAL_VIEWS, ip_count=max(2, math.ceil(delta / cap)), **kw)
        elif method == "artificial_single":
            kw["total_fake_views"] = min(delta, cap)
            attack = AttackConfig(AttackMethod.ARTIFICIAL_VIEWS, ip_count=1, **kw)
        else:
            # hide behind a NAT whose own traffic is smaller than the attack
            hosts = [ip for w, ip in nat_hosts if w <= delta and ip not in used_nat]
            if not hosts:
                attack = AttackConfig(AttackMethod.FORGED_REPORTS, ip_count=1, **kw)
            else:
                ip = hosts[int(rng.integers(len(hosts)))]
                used_nat.add(ip)
                attack = AttackConfig(AttackMethod.FORGED_REPORTS, ip_count=1, via_ips=[ip], **kw)
        attacks.append(attack)
        if rng.random() < config.young_fraction:
            old = meta[vid]
            age = int(rng.integers(10, 31))
            meta[vid] = VideoMeta(vid, old.category, bucket.day - dt.timedelta(days=age))
    return attacks


def simulate(config: ScenarioConfig) -> Iterator[SimulatedDay]:
    """Yield one ``SimulatedDay`` per configured day.

    The catalog (and so video ids and popularity) is shared by all days;
    each day gets its own users, NAT layout and attacks. ``meta`` is the
    scenario's metadata as of that day.
    """
    config.validate()
    base = config.workload
    catalog = generate_catalog(dataclasses.replace(base, catalog_seed=base.seed_for_catalog))
    meta = dict(catalog.meta)
    attacked: set = set()
    for d in range(config.days):
        wl = dataclasses.replace(
            base,
            day=base.day + dt.timedelta(days=d),
            rng_seed=int(_rng(config.seed, "day", d).integers(2**62)),
            catalog_seed=base.seed_for_catalog,
        )
        bucket, truth = generate_normal_day(wl, catalog)
        attacks = plan_attacks(config, catalog, bucket, d, attacked, meta)
        if attacks:
            bucket, truth = inject_attacks(bucket, truth, attacks)
            attacked.update(truth.fake_videos)
        yield SimulatedDay(bucket, truth, dict(meta))


def noon_attack_day(
    workload: WorkloadConfig, catalog: Optional[Catalog] = None, n_videos: int = 3, total_fake_views: int = 20_000,
    ip_count: int = 8, start_hour: float = 11.5, duration_hours: float = 2.0, pacing: Pacing = Pacing.UNIFORM,
    seed: int = 0,
) -> SimulatedDay:
    """A normal day plus a multi-IP forged-report burst on a few videos.

    The default window, 11:30 to 13:30, is centred on the noon hour so the
    burst lands mostly in that hourly bin instead of straddling two.
    """
    if catalog is None:
        catalog = generate_catalog(workload)
    bucket, truth = generate_normal_day(workload, catalog)
    rng = _rng(seed, "noon")
    first = len(catalog.video_ids) // 2
    picks = rng.choice(len(catalog.video_ids) - first, size=n_videos, replace=False) + first
    attack = AttackConfig(
        AttackMethod.FORGED_REPORTS,
        target_videos=[catalog.video_ids[i] for i in picks.tolist()],
        total_fake_views=total_fake_views,
        ip_count=ip_count,
        start_hour=start_hour,
        duration_hours=duration_hours,
        pacing=pacing,
        rng_seed=seed,
        label="noon",
    )
    bucket, truth = inject_attacks(bucket, truth, [attack])
    return SimulatedDay(bucket, truth, dict(catalog.meta))
