"""Two-phase offline detection: fake-view videos first, then the IPs behind them.

Videos in scope (enough views to be reported) are judged by the entropy
rules, with the trained hyperplane settling the middle ground. IPs that
pass the view filter are then judged by their own entropy and by how much
of their traffic lands on videos already judged fake; the latter is what
exposes attackers hiding behind busy NAT addresses. Fake views are counted
only on (fake IP, fake video) cells.
"""

from __future__ import annotations

import dataclasses
import datetime as dt
import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Optional, Sequence

from .classifier import (
    BASE_SCHEMA, FAKE, NORMAL, FeatureVector, LabeledExample, LinearModel, SeedParams, TsvmConfig,
    extract_row_features, extract_video_features, seed_label, train_tsvm,
)
from .entropy import row_profiles
from .errors import ConfigError, SchemaError, TrainError
from .matrix import DEFAULT_MIN_VIEWS, AccessMatrix, KeyKind


class Label(str, enum.Enum):
    FAKE = "FAKE"
    NORMAL = "NORMAL"


class Reason(str, enum.Enum):
    LOW_ENTROPY = "LOW_ENTROPY"
    MODEL_MARGIN = "MODEL_MARGIN"
    NAT_CROSS_REFERENCE = "NAT_CROSS_REFERENCE"
    HIGH_ENTROPY_NORMAL = "HIGH_ENTROPY_NORMAL"


_ALLOWED = {
    Reason.LOW_ENTROPY: {Label.FAKE},
    Reason.NAT_CROSS_REFERENCE: {Label.FAKE},
    Reason.HIGH_ENTROPY_NORMAL: {Label.NORMAL},
    Reason.MODEL_MARGIN: {Label.FAKE, Label.NORMAL},
}


class Evidence(NamedTuple):
    views: int
    distinct: int
    entropy: float
    fake_fraction: Optional[float] = None


@dataclass(frozen=True)
class Verdict:
    entity: str
    label: Label
    reason: Reason
    margin: Optional[float]
    evidence: Evidence

    def __post_init__(self):
        object.__setattr__(self, "label", Label(self.label))
        object.__setattr__(self, "reason", Reason(self.reason))
        if self.label not in _ALLOWED[self.reason]:
            raise ValueError(f"reason {self.reason.value} cannot go with label {self.label.value}")

    @property
    def is_fake(self) -> bool:
        return self.label is Label.FAKE

    def to_json(self) -> dict:
        return {
            "entity": self.entity, "label": self.label.value, "reason": self.reason.value,
            "margin": self.margin, "evidence": self.evidence._asdict(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "Verdict":
        return cls(data["entity"], data["label"], data["reason"], data.get("margin"), Evidence(**data["evidence"]))


@dataclass
class DetectionParams:
    min_views: int = DEFAULT_MIN_VIEWS
    report_threshold: int = 100
    eps_hi: float = 0.5
    eps_lo: float = 0.3
    v_min: int = 100
    theta: float = 0.5

    def validate(self) -> None:
        if self.min_views < 0 or self.report_threshold < 1 or self.v_min < 1:
            raise ConfigError("view thresholds must be positive")
        if self.eps_hi < 0 or self.eps_lo < 0:
            raise ConfigError("entropy slacks must be >= 0")
        if not 0 < self.theta <= 1:
            raise ConfigError("theta must be in (0, 1]")

    @property
    def seeds(self) -> SeedParams:
        return SeedParams(self.eps_hi, self.eps_lo, self.v_min)

    @classmethod
    def from_json(cls, data: dict) -> "DetectionParams":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown detection keys: {sorted(unknown)}")
        params = cls(**data)
        params.validate()
        return params


def default_train_config() -> TsvmConfig:
    """TSVM settings for the video model.

    The unlabeled videos sit between the two seed rules and are mostly
    fake, so the starting positive share is chosen by objective.
    """
    return TsvmConfig(positive_fraction="auto", class_weight="balanced")


def default_ip_train_config() -> TsvmConfig:
    """TSVM settings for the IP model.

    Unlabeled IPs are mostly large NATs. Choosing the share by objective
    would happily split them off by view count alone, so the labeled share
    is kept as the starting point.
    """
    return TsvmConfig(positive_fraction=None, class_weight="balanced")


@dataclass
class ModelBundle:
    """Hyperplanes for the video phase and (optionally) the IP phase."""

    video: LinearModel
    ip: Optional[LinearModel] = None
    params: DetectionParams = field(default_factory=DetectionParams)

    def to_json(self) -> dict:
        return {
            "video_model": self.video.to_json(),
            "ip_model": self.ip.to_json() if self.ip is not None else None,
            "params": dataclasses.asdict(self.params),
        }

    @classmethod
    def from_json(cls, data: dict) -> "ModelBundle":
        if "video_model" not in data:
            # a bare video model is accepted too
            return cls(LinearModel.from_json(data))
        ip = data.get("ip_model")
        return cls(
            LinearModel.from_json(data["video_model"]),
            LinearModel.from_json(ip) if ip else None,
            DetectionParams.from_json(data.get("params", {})),
        )


@dataclass
class DetectionReport:
    day: Optional[dt.date]
    total_views: int
    fake_views: int
    fake_view_fraction: float
    fake_videos: list
    fake_ips: list
    adjusted_view_counts: dict
    video_margins: dict = field(default_factory=dict)
    videos_in_scope: int = 0
    ips_in_scope: int = 0
    unattributed_views: int = 0

    def check(self) -> None:
        for vid, adj in self.adjusted_view_counts.items():
            if adj < 0:
                raise AssertionError(f"negative adjusted count for {vid}")
        if self.total_views and not math.isclose(self.fake_view_fraction, self.fake_views / self.total_views):
            raise AssertionError("fake_view_fraction does not match fake_views / total_views")

    def to_json(self) -> dict:
        return {
            "day": self.day.isoformat() if self.day else None,
            "total_views": self.total_views,
            "fake_views": self.fake_views,
            "fake_view_fraction": self.fake_view_fraction,
            "fake_videos": [v.to_json() for v in self.fake_videos],
            "fake_ips": [v.to_json() for v in self.fake_ips],
            "adjusted_view_counts": dict(sorted(self.adjusted_view_counts.items())),
            "video_margins": dict(sorted(self.video_margins.items())),
            "videos_in_scope": self.videos_in_scope,
            "ips_in_scope": self.ips_in_scope,
            "unattributed_views": self.unattributed_views,
        }

    @classmethod
    def from_json(cls, data: dict) -> "DetectionReport":
        try:
            return cls(
                dt.date.fromisoformat(data["day"]) if data.get("day") else None,
                int(data["total_views"]), int(data["fake_views"]), float(data["fake_view_fraction"]),
                [Verdict.from_json(v) for v in data["fake_videos"]],
                [Verdict.from_json(v) for v in data["fake_ips"]],
                {k: int(v) for k, v in data["adjusted_view_counts"].items()},
                {k: float(v) for k, v in data.get("video_margins", {}).items()},
                int(data.get("videos_in_scope", 0)), int(data.get("ips_in_scope", 0)),
                int(data.get("unattributed_views", 0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"malformed detection report: {exc}") from None

    @property
    def fake_video_ids(self) -> set:
        return {v.entity for v in self.fake_videos}

    @property
    def fake_ip_set(self) -> set:
        return {v.entity for v in self.fake_ips}


# -- video phase ----------------------------------------------------------


def _check_schema(model: LinearModel, features: Mapping) -> None:
    if "day_diff" in model.feature_schema and features and all(fv.day_diff is None for fv in features.values()):
        # imputation would silently collapse the feature; refuse rather than guess
        raise SchemaError("model uses day_diff but no video has release metadata")


def detect_fake_videos(
    matrix: AccessMatrix, meta: Optional[Mapping], model: LinearModel, params: DetectionParams = None,
    day: Optional[dt.date] = None,
) -> dict:
    """``{video: Verdict}`` for every video with at least ``report_threshold`` views."""
    params = params or DetectionParams()
    feats = extract_video_features(matrix, meta, day, min_views=params.report_threshold)
    _check_schema(model, feats)
    keys = sorted(feats)
    margins = model.margins([feats[k] for k in keys]).tolist() if keys else []
    distinct = {v: len(col) for v, col in matrix.columns().items()}
    out = {}
    for vid, margin in zip(keys, margins):
        fv = feats[vid]
        ev = Evidence(matrix.col_totals[vid], distinct[vid], fv.entropy)
        rule = seed_label(fv, params.seeds)
        if rule == NORMAL:
            out[vid] = Verdict(vid, Label.NORMAL, Reason.HIGH_ENTROPY_NORMAL, margin, ev)
        elif rule == FAKE:
            out[vid] = Verdict(vid, Label.FAKE, Reason.LOW_ENTROPY, margin, ev)
        else:
            out[vid] = Verdict(vid, Label.FAKE if margin < 0 else Label.NORMAL, Reason.MODEL_MARGIN, margin, ev)
    return out


# -- IP phase ---------------------------------------------------------------


def _fake_fraction(row: dict, total: int, fake_videos: set) -> float:
    if not fake_videos or not total:
        return 0.0
    return sum(c for v, c in row.items() if v in fake_videos) / total


def _ip_rule(h: float, views: int, fraction: float, params: DetectionParams) -> tuple:
    """Rule tier for one IP; returns ``(label, reason)`` or ``None`` for the model tier."""
    if h <= params.eps_lo:
        return Label.FAKE, Reason.LOW_ENTROPY
    if h >= math.log(views) - params.eps_hi and fraction < params.theta:
        return Label.NORMAL, Reason.HIGH_ENTROPY_NORMAL
    if fraction >= params.theta:
        return Label.FAKE, Reason.NAT_CROSS_REFERENCE
    return None


def detect_fake_ips(
    matrix: AccessMatrix, video_verdicts: Mapping, model: Optional[LinearModel] = None,
    params: DetectionParams = None,
) -> dict:
    """``{ip: Verdict}`` for every row of an already filtered IP matrix.

    Without an IP model, IPs left to the model tier are judged normal.
    """
    params = params or DetectionParams()
    fake_videos = {v for v, verdict in video_verdicts.items() if verdict.is_fake}
    profiles = row_profiles(matrix)
    out = {}
    pending = []
    for ip in sorted(profiles):
        p = profiles[ip]
        fraction = _fake_fraction(matrix.rows[ip], p.total_views, fake_videos)
        ev = Evidence(p.total_views, p.distinct, p.entropy, fraction)
        decided = _ip_rule(p.entropy, p.total_views, fraction, params)
        if decided is not None:
            out[ip] = Verdict(ip, decided[0], decided[1], None, ev)
        else:
            pending.append((ip, ev))
    if pending:
        if model is None:
            for ip, ev in pending:
                out[ip] = Verdict(ip, Label.NORMAL, Reason.MODEL_MARGIN, None, ev)
        else:
            rows = [FeatureVector(math.log10(ev.views), ev.entropy) for _, ev in pending]
            for (ip, ev), margin in zip(pending, model.margins(rows).tolist()):
                out[ip] = Verdict(ip, Label.FAKE if margin < 0 else Label.NORMAL, Reason.MODEL_MARGIN, margin, ev)
    return dict(sorted(out.items()))


def ip_seed_labels(matrix: AccessMatrix, video_verdicts: Mapping, params: DetectionParams = None) -> dict:
    """IP seeds from the rule tier (cross-referenced IPs count as fake).

    An IP the rules leave open but that never touched a fake video is a
    normal seed: busy NATs land here, and without them the model would have
    to extrapolate from small IPs alone. The rest stay unlabeled.
    """
    params = params or DetectionParams()
    fake_videos = {v for v, verdict in video_verdicts.items() if verdict.is_fake}
    feats = extract_row_features(matrix)
    out = {}
    for ip, fv in feats.items():
        total = matrix.row_totals[ip]
        fraction = _fake_fraction(matrix.rows[ip], total, fake_videos)
        decided = _ip_rule(fv.entropy, total, fraction, params)
        if decided is not None:
            label = FAKE if decided[0] is Label.FAKE else NORMAL
        else:
            label = NORMAL if fraction == 0.0 else 0
        out[ip] = LabeledExample(fv, label)
    return out


# -- training and the full pipeline ----------------------------------------


def train_models(
    matrices: Sequence[tuple], params: DetectionParams = None, config: Optional[TsvmConfig] = None,
    schema: Sequence[str] = BASE_SCHEMA, ip_config: Optional[TsvmConfig] = None,
) -> ModelBundle:
    """Train video and IP hyperplanes from seed labels on one or more days.

    ``matrices`` holds ``(ip_matrix, meta, day)`` triples. The IP model is
    trained on the IP seeds that the trained video model implies; if those
    seeds lack one of the classes the bundle carries no IP model.
    """
    params = params or DetectionParams()
    params.validate()
    config = config or default_train_config()
    ip_config = ip_config or default_ip_train_config()
    video_examples = []
    for matrix, meta, day in matrices:
        feats = extract_video_features(matrix, meta, day, min_views=params.report_threshold)
        video_examples.extend(LabeledExample(fv, seed_label(fv, params.seeds)) for fv in feats.values())
    video_model = train_tsvm(video_examples, config, schema)

    ip_examples = []
    for matrix, meta, day in matrices:
        verdicts = detect_fake_videos(matrix, meta, video_model, params, day)
        ip_examples.extend(ip_seed_labels(matrix.filter_rows(params.min_views), verdicts, params).values())
    try:
        ip_model = train_tsvm(ip_examples, ip_config, BASE_SCHEMA)
    except TrainError:
        ip_model = None
    return ModelBundle(video_model, ip_model, params)


def run_pipeline(
    records, meta: Optional[Mapping] = None, model: Optional[ModelBundle] = None, params: DetectionParams = None,
    day: Optional[dt.date] = None, train_config: Optional[TsvmConfig] = None, schema: Sequence[str] = BASE_SCHEMA,
) -> DetectionReport:
    """Build the matrix, run both phases and account for fake views.

    ``records`` may be a DayBucket, any iterable of ViewRecord or a ready
    IP AccessMatrix. Without ``model`` the models are trained on this day.
    """
    if isinstance(records, AccessMatrix):
        matrix = records
    else:
        if day is None and hasattr(records, "day"):
            day = records.day
        matrix = AccessMatrix.build(records, KeyKind.IP)
    if matrix.key_kind is not KeyKind.IP:
        raise SchemaError("the detector needs an IP-keyed matrix")
    if params is None:
        params = model.params if model is not None else DetectionParams()
    params.validate()
    if model is None:
        model = train_models([(matrix, meta, day)], params, train_config, schema)
    if isinstance(model, LinearModel):
        model = ModelBundle(model, None, params)

    videos = detect_fake_videos(matrix, meta, model.video, params, day)
    filtered = matrix.filter_rows(params.min_views)
    ips = detect_fake_ips(filtered, videos, model.ip, params)

    fake_vids = {v for v, verdict in videos.items() if verdict.is_fake}
    fake_ips = {ip for ip, verdict in ips.items() if verdict.is_fake}
    removed: dict = {}
    for ip in fake_ips:
        for vid, c in matrix.rows[ip].items():
            if vid in fake_vids:
                removed[vid] = removed.get(vid, 0) + c
    fake_views = sum(removed.values())
    adjusted = {vid: total - removed.get(vid, 0) for vid, total in matrix.col_totals.items()}
    unattributed = 0
    if fake_vids:
        cols = matrix.columns()
        for vid in fake_vids:
            unattributed += sum(c for ip, c in cols[vid].items() if matrix.row_totals[ip] < params.min_views)

    total = matrix.total_views
    report = DetectionReport(
        day=day,
        total_views=total,
        fake_views=fake_views,
        fake_view_fraction=fake_views / total if total else 0.0,
        fake_videos=[videos[v] for v in sorted(fake_vids)],
        fake_ips=[ips[ip] for ip in sorted(fake_ips)],
        adjusted_view_counts=adjusted,
        video_margins={v: verdict.margin for v, verdict in videos.items()},
        videos_in_scope=len(videos),
        ips_in_scope=filtered.m,
        unattributed_views=unattributed,
    )
    report.check()
    return report


def weekly_rows(reports: Iterable[DetectionReport]) -> list:
    """One ``(day, total_views, fake_views, fake_fraction, fake_video_count)`` row per report, by day."""
    rows = [
        (r.day, r.total_views, r.fake_views, r.fake_view_fraction, len(r.fake_videos))
        for r in reports
    ]
    return sorted(rows, key=lambda row: (row[0] is None, row[0] or dt.date.min))
