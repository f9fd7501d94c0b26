"""Command-line entry point.

Exit codes: 0 success, 1 input or configuration error, 2 analysis error.
"""
from __future__ import annotations

import argparse
import dataclasses
import functools
import json
import logging
import sys
from pathlib import Path

import yaml

from . import __version__
from .backtest import pipeline_model, run_backtest
from .config import RunConfig
from .earlywarning import run_early_warning
from .forecaster import DyadFilteredError, forecast_applications
from .io import InputError, dyad_panel, ingest
from .ranking import heatmap_matrix, relative_rank
from .report import (
    BACKTEST_COLUMNS,
    EW_COLUMNS,
    TRAFFIC_COLUMNS,
    backtest_rows,
    backtest_svg,
    early_warning_rows,
    heatmap_svg,
    traffic_table,
    write_csv,
    write_json,
)
from .synth import BundleSpec, generate_bundle
from .timeseries import WeekIndex

logger = logging.getLogger("flowcast")

FORECAST_COLUMNS = ["origin", "destination", "as_of", "horizon", "week", "status", "forecast", "benchmark", "chosen_lambda", "active_set"]


class AnalysisError(RuntimeError):
    pass


def _load_config(args) -> RunConfig:
    raw = {}
    if args.config:
        raw = yaml.safe_load(Path(args.config).read_text(encoding="utf-8")) or {}
        if not isinstance(raw, dict):
            raise InputError(f"{args.config}: configuration must be a key/value mapping")
    for item in args.set or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise InputError(f"--set expects KEY=VALUE, got {item!r}")
        raw[key.strip()] = yaml.safe_load(value)
    try:
        cfg = RunConfig.from_mapping(raw)
    except (ValueError, TypeError) as exc:
        raise InputError(f"configuration: {exc}") from None
    changes = {}
    if args.origin:
        changes["origins"] = tuple(args.origin)
    if getattr(args, "dest", None):
        changes["destinations"] = tuple(args.dest)
    if args.out:
        changes["out_dir"] = args.out
    if args.data:
        changes["data_dir"] = args.data
    if args.seed is not None:
        changes["ew"] = dataclasses.replace(cfg.ew, seed=args.seed)
    return cfg.replace(**changes)


def _bundle(cfg: RunConfig):
    if cfg.paths:
        return ingest(dict(cfg.paths))
    if not cfg.data_dir:
        raise InputError("no input data: pass --data DIR or set data_dir/paths in the config")
    return ingest(cfg.data_dir)


def _as_of(args) -> WeekIndex | None:
    if not getattr(args, "as_of", None):
        return None
    try:
        return WeekIndex.parse(args.as_of)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _dyads(bundle, cfg: RunConfig) -> list[tuple[str, str]]:
    pairs = bundle.dyads()
    if cfg.origins:
        pairs = [p for p in pairs if p[0] in cfg.origins]
    if cfg.destinations:
        pairs = [p for p in pairs if p[1] in cfg.destinations]
    if not pairs:
        raise InputError("no dyads match the requested origins/destinations")
    return pairs


def _out(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- commands -------------------------------------------------------------------


def cmd_ingest(args, cfg: RunConfig) -> int:
    bundle = _bundle(cfg)
    summary = {
        "dyads": [f"{o}->{d}" for o, d in bundle.dyads()],
        "rows": {t: (None if getattr(bundle, t) is None else len(getattr(bundle, t))) for t in bundle.TIERS},
    }
    if args.out:
        out = _out(cfg)
        bundle.write(out / "bundle")
        rr = bundle.recognition_rate()
        write_csv(rr.to_dict(orient="records"), out / "recognition_rate.csv", ["month", "origin", "destination", "rate"])
        write_json(summary, out / "ingest.json")
    print(json.dumps(summary, indent=2))
    return 0


def cmd_earlywarn(args, cfg: RunConfig) -> int:
    bundle = _bundle(cfg)
    as_of = _as_of(args)
    origins = list(cfg.origins) or sorted(bundle.applications["origin"].unique())
    out = _out(cfg)
    reports, errors, rows = {}, {}, []
    for o in origins:
        try:
            panel = dyad_panel(bundle, o, None, cfg.topics, as_of)
            rep = run_early_warning(panel, cfg.ew, origin=o)
        except (InputError, ValueError) as exc:
            logger.error("%s: %s", o, exc)
            errors[o] = str(exc)
            continue
        reports[o] = rep.to_dict()
        rows.extend(early_warning_rows(rep))
    write_json({"reports": reports, "errors": errors}, out / "earlywarn.json")
    write_csv(rows, out / "earlywarn.csv", EW_COLUMNS)
    print(f"early warning: {len(reports)} origin(s) analysed, {len(errors)} error(s); reports in {out}")
    if not reports:
        raise AnalysisError("no origin could be analysed")
    return 0


def cmd_forecast(args, cfg: RunConfig) -> int:
    bundle = _bundle(cfg)
    as_of = _as_of(args)
    out = _out(cfg)
    rows = []
    for o, d in _dyads(bundle, cfg):
        base = {"origin": o, "destination": d}
        try:
            panel = dyad_panel(bundle, o, d, cfg.topics, as_of)
            ew = run_early_warning(panel, cfg.ew, origin=o)
            fc = forecast_applications(panel, cfg.fc, ew, origin=o, destination=d)
        except DyadFilteredError:
            rows.append({**base, "as_of": str(panel.end), "status": "filtered"})
            continue
        except (InputError, ValueError, RuntimeError) as exc:
            logger.error("%s->%s: %s", o, d, exc)
            rows.append({**base, "status": "error"})
            continue
        rows.extend({**r, "status": "ok"} for r in fc.rows())
    write_csv(rows, out / "forecasts.csv", FORECAST_COLUMNS)
    write_json(rows, out / "forecasts.json")
    ok = sum(1 for r in rows if r["status"] == "ok")
    print(f"forecast: {ok} row(s) written to {out / 'forecasts.csv'}")
    if not ok and all(r["status"] == "error" for r in rows):
        raise AnalysisError("no dyad could be forecast")
    return 0


def cmd_backtest(args, cfg: RunConfig) -> int:
    bundle = _bundle(cfg)
    out = _out(cfg)
    model = functools.partial(pipeline_model, rank=not args.no_rank)
    week_rows, summaries, importance, errors = [], {}, {}, {}
    for o, d in _dyads(bundle, cfg):
        key = f"{o}->{d}"
        try:
            panel = dyad_panel(bundle, o, d, cfg.topics)
            res = run_backtest(panel, cfg, model)
        except (InputError, ValueError, RuntimeError) as exc:
            logger.error("%s: %s", key, exc)
            errors[key] = str(exc)
            continue
        week_rows.extend(backtest_rows(res, o, d))
        summaries[key] = {**res.summary, "class": res.traffic, "origin": o, "destination": d}
        importance[key] = [{"as_of": str(r.as_of), "active": list(r.active), "importance": r.importance} for r in res.rows]
        if args.plots:
            backtest_svg(panel.target, res, cfg.fc.n_ahead, out / f"backtest_{o}_{d}.svg")
    write_csv(week_rows, out / "backtest_weeks.csv", BACKTEST_COLUMNS)
    write_json({"summaries": summaries, "errors": errors, "seed": cfg.ew.seed}, out / "backtest_summary.json")
    write_json(importance, out / "backtest_importance.json")
    print(f"backtest: {len(summaries)} dyad(s), {len(errors)} error(s); reports in {out}")
    if not summaries:
        raise AnalysisError("no dyad could be back-tested")
    return 0


def cmd_report(args, cfg: RunConfig) -> int:
    src = Path(args.input or cfg.out_dir)
    out = _out(cfg)
    try:
        summary = json.loads((src / "backtest_summary.json").read_text(encoding="utf-8"))
        importance = json.loads((src / "backtest_importance.json").read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise InputError(f"missing backtest output: {exc.filename}") from None
    table = traffic_table({(s["origin"], s["destination"]): s for s in summary["summaries"].values()})
    write_csv(table, out / "traffic_light.csv", TRAFFIC_COLUMNS)
    notes = {}
    for key, steps in importance.items():
        o, d = key.split("->")
        rows = []
        for step in steps:
            raw = step["importance"] or {}
            rows.append(relative_rank(raw, as_of=WeekIndex.parse(step["as_of"])))
        if not rows:
            continue
        scores, mask = heatmap_matrix(rows)
        if scores.shape[1] == 0:
            notes[key] = "no variable selected in any week (intercept-only models)"
        scores.rename_axis("as_of").to_csv(out / f"heatmap_{o}_{d}.csv", float_format="%.6f", lineterminator="\n")
        mask.astype(int).rename_axis("as_of").to_csv(out / f"heatmap_mask_{o}_{d}.csv", lineterminator="\n")
        heatmap_svg(scores, mask, out / f"heatmap_{o}_{d}.svg")
    write_json({"traffic_light": table, "notes": notes}, out / "report.json")
    print(f"report: {len(table)} dyad(s) summarised in {out}")
    return 0


def cmd_synth(args, cfg: RunConfig) -> int:
    kw = {}
    if args.weeks:
        kw["weeks"] = args.weeks
    if args.origin:
        kw["origins"] = tuple(args.origin)
    if getattr(args, "dest", None):
        kw["destinations"] = tuple(args.dest)
    if args.start:
        kw["start"] = WeekIndex.parse(args.start)
    spec = BundleSpec(seed=args.seed if args.seed is not None else 0, **kw)
    paths = generate_bundle(spec, _out(cfg))
    print("synthetic bundle written: " + ", ".join(str(p) for p in paths.values()))
    return 0


COMMANDS = {
    "ingest": cmd_ingest,
    "earlywarn": cmd_earlywarn,
    "forecast": cmd_forecast,
    "backtest": cmd_backtest,
    "report": cmd_report,
    "synth": cmd_synth,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML key/value configuration file")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one configuration key (repeatable)")
    common.add_argument("--data", metavar="DIR", help="directory holding <tier>.csv input files")
    common.add_argument("--origin", action="append", metavar="CC", help="origin country code (repeatable)")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("-v", "--verbose", action="count", default=0)

    dyad = argparse.ArgumentParser(add_help=False)
    dyad.add_argument("--dest", action="append", metavar="CC", help="destination country code (repeatable)")

    parser = argparse.ArgumentParser(prog="flowcast", description="Early warning and forecasting for weekly dyadic flows.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("ingest", parents=[common], help="validate input files")
    p = sub.add_parser("earlywarn", parents=[common], help="early-warning report per origin")
    p.add_argument("--as-of", metavar="DATE", help="last week to use (YYYY-MM-DD or YYYY-Www)")
    p = sub.add_parser("forecast", parents=[common, dyad], help="n-week-ahead forecasts per dyad")
    p.add_argument("--as-of", metavar="DATE", help="last week to use (YYYY-MM-DD or YYYY-Www)")
    p = sub.add_parser("backtest", parents=[common, dyad], help="week-by-week simulated forecasts")
    p.add_argument("--plots", action="store_true", help="also write an SVG per dyad")
    p.add_argument("--no-rank", action="store_true", help="skip the per-week variable ranking")
    p = sub.add_parser("report", parents=[common], help="heatmaps and traffic-light table from backtest output")
    p.add_argument("--input", metavar="DIR", help="backtest output directory (default: --out)")
    p = sub.add_parser("synth", parents=[common, dyad], help="write a synthetic input bundle")
    p.add_argument("--weeks", type=int, help="number of weeks")
    p.add_argument("--start", metavar="WEEK", help="first week (YYYY-Www or date)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = _load_config(args)
        return COMMANDS[args.command](args, cfg)
    except (InputError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - any analysis failure maps to exit 2
        logger.debug("analysis failure", exc_info=True)
        print(f"analysis error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
