"""Command-line front door: ``imbench prepare|synth|run|report|compare``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from .data import DataError, binarize, imbalance_levels, load_csv, make_synthetic, write_csv
from .experiment import ConfigError, ResultTable, load_config, run_grid
from .metrics import MetricKind
from .report import render_pairs, render_ranks
from .stats import Question, StatsError, compare

MANIFEST_SCHEMA = "# imbench-manifest 1"
MANIFEST_COLUMNS = ("rate_percent", "status", "file", "positives", "negatives", "note")

log = logging.getLogger("imbench")


def _rates(text):
    try:
        rates = [float(r) for r in text.split(",") if r.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"rates must be comma-separated percentages, got {text!r}")
    if not rates or any(not 0 < r < 100 for r in rates):
        raise argparse.ArgumentTypeError("each rate must be a percentage in (0, 100)")
    return rates


def _metrics(text):
    try:
        return [MetricKind(m.strip()).value for m in text.split(",") if m.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _rate_tag(pct: float) -> str:
    return f"{pct:g}".replace(".", "p")


def write_manifest(path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(MANIFEST_SCHEMA + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MANIFEST_COLUMNS)
        for r in rows:
            w.writerow([r.get(c, "") for c in MANIFEST_COLUMNS])


def read_manifest(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
        if first != MANIFEST_SCHEMA:
            raise DataError(f"{path}: not a manifest (header {first!r})")
        return list(csv.DictReader(fh))


def cmd_prepare(args) -> int:
    src = Path(args.input)
    if not src.is_file():
        raise DataError(f"{src}: file not found")
    outdir = Path(args.outdir)
    if outdir.resolve() == src.parent.resolve():
        raise DataError("--outdir must differ from the input's directory")
    name = args.name or src.stem
    ds = binarize(load_csv(src, args.label, name=name))
    achieved, skipped = imbalance_levels(ds, [r / 100 for r in args.rates], args.seed)
    outdir.mkdir(parents=True, exist_ok=True)
    rows = []
    for pct in sorted(set(args.rates), reverse=True):
        rate = pct / 100
        if rate in skipped:
            rows.append({"rate_percent": f"{pct:g}", "status": "skipped", "note": skipped[rate]})
            log.warning("rate %g%% skipped: %s", pct, skipped[rate])
            continue
        sub = achieved[rate]
        fname = f"{name}_r{_rate_tag(pct)}.csv"
        write_csv(sub, outdir / fname, args.label)
        rows.append({"rate_percent": f"{pct:g}", "status": "ok", "file": fname,
                     "positives": sub.n_positive, "negatives": sub.n_negative,
                     "note": f"positive={ds.positive_label} achieved={sub.imbalance_rate:.6g}"})
        print(f"{fname}: {sub.n_positive} positives, {sub.n_negative} negatives")
    write_manifest(outdir / "manifest.csv", rows)
    return 0


def cmd_synth(args) -> int:
    ds = make_synthetic(args.family, args.n, args.dim, args.overlap, args.rate, args.seed,
                        Path(args.out).stem)
    write_csv(ds, args.out, args.label)
    print(f"{args.out}: {ds.n_positive} positives, {ds.n_negative} negatives")
    return 0


def cmd_run(args) -> int:
    config = load_config(args.config)
    if args.output:
        config.output_path = Path(args.output).resolve()
    table = run_grid(config, args.jobs)
    failed = [r for r in table if not r.ok]
    if failed:
        log.error("%d cells failed", len(failed))
        return 1
    return 0


def _question(args, metric, group, pair=None):
    return Question(metric, group, pair=pair,
                    rates=[r / 100 for r in args.rates] if args.rates else None,
                    classifiers=args.classifiers.split(",") if args.classifiers else None,
                    alpha=args.alpha)


def cmd_report(args) -> int:
    rt = ResultTable.read_csv(args.results)
    status = 0
    for metric in args.metric:
        try:
            sys.stdout.write(render_ranks(compare(rt, _question(args, metric, args.group))))
        except StatsError as exc:
            sys.stdout.write(f"### {metric}\n\n{exc}\n")
            status = 1
        sys.stdout.write("\n")
    return status


def cmd_compare(args) -> int:
    rt = ResultTable.read_csv(args.results)
    summaries, status = [], 0
    for metric in args.metric:
        try:
            summaries.append(compare(rt, _question(args, metric, "pair", (args.a, args.b))))
        except StatsError as exc:
            sys.stderr.write(f"{metric}: {exc}\n")
            status = 1
    if summaries:
        sys.stdout.write(render_pairs(summaries))
    return status


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="imbench", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("prepare", help="binarize a CSV and write one file per imbalance rate")
    s.add_argument("--input", required=True)
    s.add_argument("--label", required=True, help="label column name")
    s.add_argument("--rates", type=_rates, default=[5, 3, 1, 0.1], help="percentages, e.g. 5,3,1,0.1")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--outdir", required=True)
    s.add_argument("--name", help="dataset name used for output files (default: input stem)")
    s.set_defaults(func=cmd_prepare)

    s = sub.add_parser("synth", help="write a synthetic imbalanced dataset")
    s.add_argument("--family", choices=("gaussians", "clusters"), default="gaussians")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--dim", type=int, required=True)
    s.add_argument("--overlap", type=float, default=1.0)
    s.add_argument("--rate", type=float, required=True, help="positive fraction, e.g. 0.05")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--label", default="class")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("run", help="run an experiment grid from a YAML config")
    s.add_argument("--config", required=True)
    s.add_argument("--jobs", type=int, help="worker processes (default: $IMBENCH_JOBS or 1)")
    s.add_argument("--output", help="override the config's output_path")
    s.set_defaults(func=cmd_run)

    for name, func in (("report", cmd_report), ("compare", cmd_compare)):
        s = sub.add_parser(name, help="rank table per metric" if name == "report"
                           else "paired comparison of two solutions")
        s.add_argument("--results", required=True)
        s.add_argument("--metric", type=_metrics, required=True, help="one or more, comma-separated")
        s.add_argument("--rates", type=_rates, help="restrict to these percentages")
        s.add_argument("--classifiers", help="restrict to these classifier short names")
        s.add_argument("--alpha", type=float, default=0.05)
        if name == "report":
            s.add_argument("--group", choices=("strategies", "combinations"), default="strategies")
        else:
            s.add_argument("--a", required=True, help="solution id, e.g. rf+underbagging")
            s.add_argument("--b", required=True)
        s.set_defaults(func=func)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, DataError, StatsError, OSError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
