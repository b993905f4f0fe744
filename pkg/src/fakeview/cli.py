"""Command-line entry point: ``fakeview <subcommand> ...``.

Exit codes: 0 on success, 1 on runtime or I/O failure, 2 on usage or
configuration errors (including missing model or truth files).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as dt
import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import Optional

from . import __version__
from .classifier import BASE_SCHEMA, FEATURES, TsvmConfig, auc_from_points, roc_curve, write_roc_csv
from .detector import (
    DetectionParams, DetectionReport, ModelBundle, default_ip_train_config, default_train_config, run_pipeline,
    train_models, weekly_rows,
)
from .entropy import col_profiles, row_profiles
from .errors import ConfigError, FakeViewError, RateError, SchemaError, TrainError, UndefinedAUCError
from .matrix import AccessMatrix, KeyKind
from .online import OnlineConfig, OnlineDetector
from .records import (
    DayBucket, ParseSummary, bucket_by_day, iter_log, read_log_file, read_meta_file, write_log, write_meta,
)
from .scenarios import WEEK_WORKLOAD, ScenarioConfig, simulate
from .simulator import AttackConfig, AttackMethod, GroundTruth, Pacing, inject_attacks

log = logging.getLogger("fakeview")

PRESETS = {"small": {}, "week": WEEK_WORKLOAD}
SECTIONS = ("generate", "analyze", "train", "detect", "watch", "evaluate", "report")


class UsageError(Exception):
    """Bad invocation; reported with exit code 2."""


# -- helpers ---------------------------------------------------------------


def _load_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError("config file must hold a JSON object")
    unknown = set(data) - set(SECTIONS)
    if unknown:
        raise UsageError(f"unknown config sections: {sorted(unknown)}")
    return data


def _pick(args, section: dict, name: str, default=None):
    """Flag value if given, else config value, else ``default``."""
    value = getattr(args, name, None)
    if value is not None:
        return value
    return section.get(name, default)


def _stamp(args) -> dict:
    return {} if args.reproducible else {"created_at": dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")}


def _write_json(data, path: Optional[str]) -> None:
    text = json.dumps(data, indent=2, sort_keys=True) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _require_file(path: Optional[str], what: str) -> str:
    if not path:
        raise UsageError(f"{what} is required")
    if not os.path.isfile(path):
        raise UsageError(f"{what} not found: {path}")
    return path


def _read_records(paths) -> list:
    records = []
    for path in paths:
        parsed = read_log_file(path)
        if parsed.n_errors:
            log.warning("%s: skipped %d malformed lines (first: %s)", path, parsed.n_errors, parsed.summary.examples[0])
        records.extend(parsed.records)
    return records


def _buckets(records, day: Optional[str]) -> list:
    buckets = bucket_by_day(records)
    if day is not None:
        try:
            want = dt.date.fromisoformat(day)
        except ValueError:
            raise UsageError(f"bad --day {day!r}; expected YYYY-MM-DD") from None
        buckets = [b for b in buckets if b.day == want]
        if not buckets:
            raise UsageError(f"no records on {day}")
    return buckets


def _one_bucket(records, day: Optional[str]) -> DayBucket:
    buckets = _buckets(records, day)
    if not buckets:
        return DayBucket(dt.date(1970, 1, 1), [])
    if len(buckets) > 1:
        days = ", ".join(b.day.isoformat() for b in buckets)
        raise UsageError(f"log spans several days ({days}); pick one with --day")
    return buckets[0]


def _meta(path: Optional[str]) -> dict:
    return read_meta_file(path) if path else {}


def _detection_params(args, section: dict) -> DetectionParams:
    base = dict(section.get("params", {}))
    for name in ("min_views", "report_threshold", "eps_hi", "eps_lo", "v_min", "theta"):
        value = getattr(args, name, None)
        if value is not None:
            base[name] = value
    return DetectionParams.from_json(base)


# -- attack specs -------------------------------------------------------------


def parse_attack_spec(spec: str, index: int = 0, scale: float = 1000.0) -> AttackConfig:
    """``method:mode:views:videos[:start_hour:duration_hours]``.

    ``method`` is ``forged`` or ``artificial``; ``mode`` is ``single``,
    ``multi`` (6 IPs), ``multiN`` (N IPs) or ``nat`` (routed through the
    busiest address of the day); ``videos`` is a comma-separated id list.
    """
    parts = spec.split(":")
    if len(parts) not in (4, 6):
        raise ConfigError(f"attack spec {spec!r} must look like method:mode:views:videos[:start:duration]")
    method_s, mode, views_s, videos_s = parts[:4]
    methods = {"forged": AttackMethod.FORGED_REPORTS, "artificial": AttackMethod.ARTIFICIAL_VIEWS}
    if method_s not in methods:
        raise ConfigError(f"attack method must be forged or artificial, not {method_s!r}")
    try:
        views = int(views_s)
        start, duration = (float(parts[4]), float(parts[5])) if len(parts) == 6 else (0.0, 24.0)
    except ValueError:
        raise ConfigError(f"attack spec {spec!r} has a non-numeric field") from None
    videos = [v for v in videos_s.split(",") if v]
    if not videos:
        raise ConfigError(f"attack spec {spec!r} names no video")
    via = None
    if mode == "single":
        n_ips = 1
    elif mode == "nat":
        n_ips, via = 1, []
    elif mode.startswith("multi"):
        tail = mode[len("multi"):]
        if tail and not tail.isdigit():
            raise ConfigError(f"bad multi mode {mode!r}; use multi or multiN")
        n_ips = int(tail) if tail else 6
    else:
        raise ConfigError(f"attack mode must be single, multi, multiN or nat, not {mode!r}")
    attack = AttackConfig(
        methods[method_s], videos, views, ip_count=n_ips, start_hour=start, duration_hours=duration,
        pacing=Pacing.UNIFORM, rng_seed=index, via_ips=via, scale=scale, label=f"cli{index}",
    )
    if via is None:
        attack.validate()
    return attack


def _busiest_ip(bucket: DayBucket) -> str:
    counts: dict = {}
    for r in bucket.records:
        counts[r.ip] = counts.get(r.ip, 0) + 1
    return min(counts, key=lambda ip: (-counts[ip], ip))


# -- subcommands ------------------------------------------------------------


def cmd_generate(args, cfg: dict) -> int:
    sec = cfg.get("generate", {})
    preset = _pick(args, sec, "preset", "small")
    if preset not in PRESETS:
        raise UsageError(f"unknown preset {preset!r}")
    workload = dict(PRESETS[preset])
    workload.update(sec.get("workload", {}))
    scenario = dict(sec.get("scenario", {}))
    seed = _pick(args, sec, "seed", scenario.get("seed", 0))
    workload.setdefault("rng_seed", seed)
    scenario["workload"] = workload
    scenario["seed"] = seed
    scenario["days"] = _pick(args, sec, "days", scenario.get("days", 1))
    specs = args.attack if args.attack else sec.get("attacks", [])
    if args.attack_fraction is not None:
        scenario["attack_video_fraction"] = args.attack_fraction
    elif specs:
        scenario["attack_video_fraction"] = 0.0
    sc = ScenarioConfig.from_json(scenario)
    attacks = [parse_attack_spec(s, i, sc.scale) for i, s in enumerate(specs)]

    out = Path(_pick(args, sec, "out_dir", "."))
    out.mkdir(parents=True, exist_ok=True)
    files = []
    meta: dict = {}
    for d, day in enumerate(simulate(sc)):
        bucket, truth = day.bucket, day.truth
        if attacks:
            todays = []
            for a in attacks:
                a = dataclasses.replace(a, rng_seed=a.rng_seed + 7919 * d, label=f"{a.label}d{d}")
                if a.via_ips is not None:
                    a = dataclasses.replace(a, via_ips=[_busiest_ip(bucket)])
                todays.append(a)
            bucket, truth = inject_attacks(bucket, truth, todays)
        stem = bucket.day.isoformat()
        with open(out / f"{stem}.tsv", "w", encoding="utf-8", newline="\n") as fh:
            write_log(bucket.records, fh)
        truth.write(out / f"{stem}.truth.tsv", out / f"{stem}.truth.json")
        files.append(stem)
        meta = day.meta
        log.info("%s: %d records, %d fake", stem, len(bucket.records), truth.fake_views)
    with open(out / "meta.tsv", "w", encoding="utf-8", newline="\n") as fh:
        write_meta(sorted(meta.values()), fh)
    manifest = {"config": sc.to_json(), "attacks": specs, "days": files, "version": __version__, **_stamp(args)}
    _write_json(manifest, str(out / "generate.json"))
    return 0


def cmd_analyze(args, cfg: dict) -> int:
    sec = cfg.get("analyze", {})
    key = _pick(args, sec, "key", "ip")
    min_views = _pick(args, sec, "min_views", 50)
    if min_views < 0:
        raise UsageError("--min-views must be >= 0")
    bucket = _one_bucket(_read_records(args.logs), args.day)
    if key == "video":
        matrix = AccessMatrix.build(bucket.records, KeyKind.IP)
        profiles = [p for p in col_profiles(matrix).values() if p.total_views >= min_views]
    else:
        matrix = AccessMatrix.build(bucket.records, KeyKind.parse(key)).filter_rows(min_views)
        profiles = list(row_profiles(matrix).values())
    profiles.sort(key=lambda p: str(p.entity))
    sink = sys.stdout if args.output in (None, "-") else open(args.output, "w", encoding="utf-8", newline="")
    try:
        w = csv.writer(sink, lineterminator="\n")
        w.writerow(["entity", "total_views", "distinct_videos", "entropy_nats"])
        for p in profiles:
            w.writerow([p.entity, p.total_views, p.distinct, repr(p.entropy)])
    finally:
        if sink is not sys.stdout:
            sink.close()
    return 0


def _tsvm_config(args, sec: dict) -> TsvmConfig:
    base = dataclasses.asdict(default_train_config())
    base.update(sec.get("tsvm", {}))
    for flag, name in (("c_labeled", "c_labeled"), ("c_unlabeled", "c_unlabeled_max"), ("max_outer_iters", "max_outer_iters")):
        value = getattr(args, flag, None)
        if value is not None:
            base[name] = value
    if args.positive_fraction is not None:
        pf = args.positive_fraction
        if pf == "labeled":
            base["positive_fraction"] = None
        elif pf in ("auto", "inductive"):
            base["positive_fraction"] = pf
        else:
            try:
                base["positive_fraction"] = float(pf)
            except ValueError:
                raise UsageError(f"bad --positive-fraction {pf!r}") from None
    unknown = set(base) - {f.name for f in dataclasses.fields(TsvmConfig)}
    if unknown:
        raise UsageError(f"unknown tsvm keys: {sorted(unknown)}")
    config = TsvmConfig(**base)
    try:
        config.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return config


def cmd_train(args, cfg: dict) -> int:
    sec = cfg.get("train", {})
    params = _detection_params(args, sec)
    tsvm = _tsvm_config(args, sec)
    use_day_diff = bool(_pick(args, sec, "day_diff", False))
    schema = FEATURES if use_day_diff else BASE_SCHEMA
    meta = _meta(args.meta)
    buckets = _buckets(_read_records(args.logs), args.day)
    if not buckets:
        raise UsageError("no records to train on")
    mats = [(AccessMatrix.build(b.records, KeyKind.IP), meta, b.day) for b in buckets]
    ip_base = dataclasses.asdict(default_ip_train_config())
    ip_base.update(sec.get("ip_tsvm", {}))
    try:
        ip_tsvm = TsvmConfig(**ip_base)
        ip_tsvm.validate()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad ip_tsvm section: {exc}") from None
    bundle = train_models(mats, params, tsvm, schema, ip_tsvm)
    data = bundle.to_json()
    data["provenance"] = {
        "days": [b.day.isoformat() for b in buckets], "tsvm": dataclasses.asdict(tsvm),
        "ip_tsvm": dataclasses.asdict(ip_tsvm),
        "schema": list(schema), "version": __version__, **_stamp(args),
    }
    _write_json(data, args.output)
    return 0


def _load_bundle(path: str) -> ModelBundle:
    with open(_require_file(path, "--model"), encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"model file {path} is not valid JSON: {exc}") from None
    return ModelBundle.from_json(data)


def cmd_detect(args, cfg: dict) -> int:
    sec = cfg.get("detect", {})
    bundle = _load_bundle(_pick(args, sec, "model"))
    params = _detection_params(args, {"params": {**dataclasses.asdict(bundle.params), **sec.get("params", {})}})
    meta = _meta(args.meta)
    reports = []
    for b in _buckets(_read_records(args.logs), args.day):
        report = run_pipeline(AccessMatrix.build(b.records, KeyKind.IP), meta, bundle, params, day=b.day)
        data = report.to_json()
        data["provenance"] = {"params": dataclasses.asdict(params), "version": __version__, **_stamp(args)}
        reports.append(data)
        log.info("%s: fake fraction %.4f, %d fake videos, %d fake IPs", b.day, report.fake_view_fraction,
                 len(report.fake_videos), len(report.fake_ips))
    _write_json(reports[0] if len(reports) == 1 else reports, args.output)
    return 0


def _follow(path: str, poll: float):
    """Yield lines appended to ``path`` until interrupted."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        buf = ""
        while True:
            chunk = fh.readline()
            if not chunk:
                time.sleep(poll)
                continue
            buf += chunk
            if buf.endswith("\n"):
                yield buf
                buf = ""


def cmd_watch(args, cfg: dict) -> int:
    sec = cfg.get("watch", {})
    base = dict(sec.get("online", {}))
    for flag, name in (("k", "k"), ("l", "l"), ("window_hours", "window_hours"), ("eps_lo", "eps_lo"),
                       ("w", "w"), ("distinct_cap", "distinct_cap")):
        value = getattr(args, flag, None)
        if value is not None:
            base[name] = value
    if args.entropy_tier:
        base["entropy_tier"] = True
    det = OnlineDetector(OnlineConfig.from_json(base))
    summary = ParseSummary()
    if args.log in (None, "-"):
        source = sys.stdin
    elif args.follow:
        source = _follow(args.log, args.poll)
    else:
        source = open(args.log, "r", encoding="utf-8", newline="")
    sink = sys.stdout if args.output in (None, "-") else open(args.output, "w", encoding="utf-8", newline="\n")
    summaries: list = []
    late = 0
    try:
        for rec in iter_log(source, summary):
            if not det.in_window(rec.timestamp):
                if det.config.window_of(rec.timestamp) < det.window:
                    late += 1
                    continue
                summaries.append(det.rotate())
            alert = det.process(rec)
            if alert is not None:
                sink.write(json.dumps(alert.to_json(), sort_keys=True) + "\n")
                sink.flush()
    except KeyboardInterrupt:
        pass
    finally:
        if source is not sys.stdin and hasattr(source, "close"):
            source.close()
        if sink is not sys.stdout:
            sink.close()
    summaries.append(det.rotate())
    if late:
        log.warning("skipped %d records older than the current window", late)
    if summary.errors:
        log.warning("skipped %d malformed lines", summary.errors)
    if args.summary:
        _write_json([
            {
                "window": s.window, "total_views": s.total_views, "suspicious": s.suspicious,
                "ips": {ip: v._asdict() for ip, v in s.ips.items()},
            }
            for s in summaries
        ], args.summary)
    return 0


def _read_reports(paths) -> list:
    out = []
    for path in paths:
        with open(path, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise UsageError(f"{path} is not valid JSON: {exc}") from None
        for item in data if isinstance(data, list) else [data]:
            out.append(DetectionReport.from_json(item))
    return out


def _ratio(num: int, den: int) -> Optional[float]:
    return num / den if den else None


def evaluate_report(report: DetectionReport, truth: GroundTruth, visible_ips: Optional[set] = None) -> dict:
    """Metrics of one day's report against simulator ground truth."""
    scope = set(report.video_margins) or set(truth.fake_videos) | report.fake_video_ids
    true_vids = set(truth.fake_videos) & scope
    pred_vids = report.fake_video_ids
    pred_ips = report.fake_ip_set
    true_ips = set(truth.fake_ips)
    out = {
        "day": report.day.isoformat() if report.day else None,
        "video_precision": _ratio(len(pred_vids & true_vids), len(pred_vids)),
        "video_recall": _ratio(len(pred_vids & true_vids), len(true_vids)),
        "ip_precision": _ratio(len(pred_ips & true_ips), len(pred_ips)),
        "ip_recall": _ratio(len(pred_ips & true_ips), len(true_ips)),
        "ip_recall_user_ids": _ratio(len(pred_ips & truth.fake_ips_with_user_ids), len(truth.fake_ips_with_user_ids)),
        "fake_fraction_truth": truth.fake_fraction,
        "fake_fraction_reported": report.fake_view_fraction,
        "fake_fraction_error": report.fake_view_fraction - truth.fake_fraction,
        "auc": None,
    }
    if visible_ips is not None:
        seen = true_ips & visible_ips
        out["ip_recall_visible"] = _ratio(len(pred_ips & seen), len(seen))
    if report.video_margins:
        vids = sorted(report.video_margins)
        labels = [-1 if v in truth.fake_videos else 1 for v in vids]
        try:
            points = roc_curve([report.video_margins[v] for v in vids], labels)
            out["auc"] = auc_from_points(points)
            out["_roc"] = points
        except UndefinedAUCError:
            pass
    return out


def cmd_evaluate(args, cfg: dict) -> int:
    sec = cfg.get("evaluate", {})
    reports = _read_reports([_require_file(p, "--report") for p in args.report])
    truth_dir = _pick(args, sec, "truth_dir")
    per_day = []
    for rep in reports:
        if args.truth:
            flags = _require_file(args.truth, "--truth")
            side = _require_file(args.sidecar or str(Path(flags).with_suffix(".json")), "--sidecar")
        else:
            if not truth_dir or rep.day is None:
                raise UsageError("give --truth/--sidecar or --truth-dir")
            stem = Path(truth_dir) / rep.day.isoformat()
            flags = _require_file(f"{stem}.truth.tsv", "truth flags")
            side = _require_file(f"{stem}.truth.json", "truth sidecar")
        truth = GroundTruth.from_files(flags, side)
        metrics = evaluate_report(rep, truth)
        points = metrics.pop("_roc", None)
        if args.roc and points is not None:
            target = args.roc if len(reports) == 1 else f"{args.roc}.{rep.day.isoformat()}.csv"
            with open(target, "w", encoding="utf-8", newline="\n") as fh:
                write_roc_csv(points, fh)
        per_day.append(metrics)
    result = dict(per_day[0]) if len(per_day) == 1 else {"days": per_day}
    result["provenance"] = {"reports": list(args.report), "version": __version__, **_stamp(args)}
    _write_json(result, args.output)
    return 0


def cmd_report(args, cfg: dict) -> int:
    reports = _read_reports(args.reports)
    sink = sys.stdout if args.output in (None, "-") else open(args.output, "w", encoding="utf-8", newline="")
    try:
        w = csv.writer(sink, lineterminator="\n")
        w.writerow(["day", "total_views", "fake_views", "fake_fraction", "fake_video_count"])
        for day, total, fake, frac, n_vids in weekly_rows(reports):
            w.writerow([day.isoformat() if day else "", total, fake, repr(frac), n_vids])
    finally:
        if sink is not sys.stdout:
            sink.close()
    return 0


# -- parser -------------------------------------------------------------------


def _add_thresholds(p, theta=True) -> None:
    g = p.add_argument_group("detection thresholds")
    g.add_argument("--min-views", type=int, help="IP row filter (default 50)")
    g.add_argument("--report-threshold", type=int, help="videos need this many views to be judged (default 100)")
    g.add_argument("--eps-hi", type=float, help="normal if entropy >= ln(views) - eps_hi (default 0.5)")
    g.add_argument("--eps-lo", type=float, help="fake if entropy <= eps_lo (default 0.3)")
    g.add_argument("--v-min", type=int, help="views needed for a low-entropy fake seed (default 100)")
    if theta:
        g.add_argument("--theta", type=float, help="fake-video share that convicts an IP (default 0.5)")


def build_parser() -> argparse.ArgumentParser:
    # shared options are accepted before or after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON config with one section per subcommand")
    common.add_argument("--reproducible", action="store_true", default=argparse.SUPPRESS,
                        help="leave wall-clock timestamps out of outputs")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS,
                        help="progress messages on stderr")
    parser = argparse.ArgumentParser(
        prog="fakeview", description="Fake-view detection for VoD view logs.", parents=[common],
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.set_defaults(config=None, reproducible=False, verbose=False)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    _sub = sub.add_parser

    def add_parser(name, **kw):
        return _sub(name, parents=[common], **kw)

    sub.add_parser = add_parser

    p = sub.add_parser("generate", help="simulate labeled daily logs")
    p.add_argument("--out-dir", help="directory for logs, metadata and truth files (default .)")
    p.add_argument("--days", type=int, help="number of days (default 1)")
    p.add_argument("--seed", type=int, help="seed for users, catalog and attacks")
    p.add_argument("--preset", choices=sorted(PRESETS), help="workload size (default small)")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--attack", action="append", metavar="SPEC",
                   help="explicit attack method:mode:views:videos[:start:duration], repeatable; "
                        "disables the random scenario attacks")
    g.add_argument("--attack-fraction", type=float, help="share of reportable videos attacked (default 0.05)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("analyze", help="per-entity entropy CSV")
    p.add_argument("logs", nargs="+", help="TSV view logs")
    p.add_argument("--key", choices=["ip", "user", "video"], help="row entity (default ip)")
    p.add_argument("--min-views", type=int, help="drop entities with fewer views (default 50)")
    p.add_argument("--day", help="day to analyze when the log spans several")
    p.add_argument("-o", "--output", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("train", help="train video and IP models from seed labels")
    p.add_argument("logs", nargs="+", help="TSV view logs; every day in them is used")
    p.add_argument("--meta", help="video metadata TSV")
    p.add_argument("--day", help="train on one day only")
    p.add_argument("--day-diff", action="store_true", default=None, help="add the days-since-release feature")
    p.add_argument("--c-labeled", type=float, help="cost on seed labels (default 1)")
    p.add_argument("--c-unlabeled", type=float, help="final cost on unlabeled points (default 1)")
    p.add_argument("--positive-fraction", help="number in (0,1), 'labeled', 'inductive' or 'auto' (default auto)")
    p.add_argument("--max-outer-iters", type=int, help="swap budget per annealing step (default 200)")
    p.add_argument("-o", "--output", help="model JSON path (default stdout)")
    _add_thresholds(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("detect", help="two-phase detection; writes a report per day")
    p.add_argument("logs", nargs="+", help="TSV view logs")
    p.add_argument("--model", help="model JSON from train")
    p.add_argument("--meta", help="video metadata TSV")
    p.add_argument("--day", help="detect on one day only")
    p.add_argument("-o", "--output", help="report JSON path (default stdout)")
    _add_thresholds(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("watch", help="stream a log through the online rule; alerts as JSON lines")
    p.add_argument("log", nargs="?", help="TSV log, '-' or omitted for stdin")
    p.add_argument("--follow", action="store_true", help="keep reading as the file grows")
    p.add_argument("--poll", type=float, default=0.5, help="seconds between reads with --follow")
    p.add_argument("-K", "--k", type=int, help="views threshold (default 300)")
    p.add_argument("-L", "--l", type=int, help="distinct-video threshold (default 10)")
    p.add_argument("--window-hours", type=int, help="tumbling windows of N hours instead of calendar days")
    p.add_argument("--entropy-tier", action="store_true", help="also flag low running entropy")
    p.add_argument("--eps-lo", type=float, help="entropy tier threshold (default 0.3)")
    p.add_argument("-W", "--w", type=int, help="views before the entropy tier may fire (default 300)")
    p.add_argument("--distinct-cap", type=int, help="exact distinct-video tracking limit (default 64)")
    p.add_argument("--summary", help="write per-window counters JSON here")
    p.add_argument("-o", "--output", help="alerts path (default stdout)")
    p.set_defaults(func=cmd_watch)

    p = sub.add_parser("evaluate", help="score reports against simulator truth")
    p.add_argument("--report", action="append", required=True, help="report JSON from detect, repeatable")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--truth", help="truth flags file of a single day")
    g.add_argument("--truth-dir", help="directory written by generate")
    p.add_argument("--sidecar", help="truth sidecar JSON (default: flags path with .json)")
    p.add_argument("--roc", help="write ROC points CSV here")
    p.add_argument("-o", "--output", help="metrics JSON path (default stdout)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="weekly CSV from daily reports")
    p.add_argument("reports", nargs="+", help="report JSON files from detect")
    p.add_argument("-o", "--output", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="fakeview: %(message)s")
    try:
        cfg = _load_config(args.config)
        rc = args.func(args, cfg)
        sys.stdout.flush()
        return rc
    except BrokenPipeError:
        # downstream reader went away (``| head``); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0
    except (UsageError, ConfigError, RateError, SchemaError, TrainError) as exc:
        print(f"fakeview {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, FakeViewError, ValueError) as exc:
        print(f"fakeview {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
