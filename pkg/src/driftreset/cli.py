"""Command-line entry point: ``driftreset {run,sweep,summarize,preview-stream,calibrate}``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from driftreset import harness
from driftreset.errors import CalibrationError, ConfigError, InvalidInputError
from driftreset.streamsim import write_preview

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_CALIBRATION = 0, 1, 2, 3


def _common(p, lists=False):
    p.add_argument("--config", help="key = value config file; flags override it")
    p.add_argument("--seed", help="comma-separated seeds")
    p.add_argument("--speed", help="comma-separated transition speeds")
    p.add_argument("--variant", help="policy name" + (" (comma list to sweep)" if lists else ""))
    p.add_argument("--k", help="drift threshold" + (" (comma list to sweep)" if lists else ""))
    p.add_argument("--lambda", dest="lam", help="soft-reset strength" + (" (comma list to sweep)" if lists else ""))
    p.add_argument("--steps", help="stream length in batches")
    p.add_argument("--out", help="output directory")
    p.add_argument("--decimate", help="trace decimation factor")
    p.add_argument("--severity-max", dest="severity_max", help="stream severity_max")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")


def _split(s):
    return [x.strip() for x in s.split(",") if x.strip()]


def _base_config(args, skip=()):
    overrides = {}
    scalar = {"seed": "run.seeds", "steps": "run.steps", "out": "run.out", "decimate": "run.decimate",
              "severity_max": "stream.severity_max", "variant": "variant", "k": "policy.k", "lam": "policy.lambda"}
    for attr, key in scalar.items():
        val = getattr(args, attr, None)
        if val is not None and attr not in skip:
            overrides[key] = val
    if args.config:
        return harness.load_config(args.config, overrides)
    return harness.build_config(overrides)


def cmd_run(args):
    cfg = _base_config(args)
    speeds = _split(args.speed) if args.speed else [cfg.stream.speed]
    cfgs = [harness.build_config({"stream.speed": s}, base=cfg) for s in speeds]
    rows = harness.run_grid(cfgs, jobs=args.jobs)
    for row in rows:
        print(f"{row.label}\tspeed={row.speed}\tmean_accuracy={row.mean_accuracy:.4f}\tresets={row.resets}\tcollapse={row.collapse}")
    return EXIT_OK


def cmd_sweep(args):
    grid = {}
    for attr, key in (("k", "k"), ("lam", "lambda"), ("speed", "speed"), ("variant", "variant")):
        val = getattr(args, attr)
        if val is not None:
            items = _split(val)
            grid[key] = items if key == "variant" else [float(x) for x in items]
    skip = ("k", "lam")
    if len(grid.get("variant", ())) == 1:
        # a single variant is the policy under study, not a sweep axis
        del grid["variant"]
    else:
        skip += ("variant",)
    if not grid:
        raise InvalidInputError("sweep needs at least one of --k, --lambda, --speed, or several --variant values")
    cfg = _base_config(args, skip=skip)
    rows, table = harness.sweep(cfg, grid, jobs=args.jobs)
    keys = sorted(grid)
    name = "ablation_" + "_".join(keys) + ".tsv"
    harness.write_ablation(Path(cfg.out) / name, keys, table)
    for params, acc in table:
        print("  ".join(f"{k}={params[k]}" for k in keys) + f"  mean_accuracy={acc:.4f}")
    return EXIT_OK


def cmd_summarize(args):
    paths = args.results or [str(Path(args.out or "runs") / "results.tsv")]
    speeds, table = harness.summarize(paths)
    text = harness.format_table(speeds, table)
    print(text, end="")
    out = Path(args.out or Path(paths[0]).parent)
    out.mkdir(parents=True, exist_ok=True)
    harness.write_summary(out / "summary.tsv", speeds, table)
    (out / "summary.txt").write_text(text)
    return EXIT_OK


def cmd_preview(args):
    cfg = _base_config(args)
    speed = int(_split(args.speed)[0]) if args.speed else cfg.stream.speed
    stream = replace(cfg.stream, speed=speed)
    out = Path(args.out or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"preview_speed{speed}.jsonl"
    write_preview(path, stream, cfg.steps, every=args.every)
    print(path)
    return EXIT_OK


def cmd_calibrate(args):
    cfg = _base_config(args)
    model = harness.pretrained_model(cfg.stream)
    sev, acc = harness.calibrate_baseline(cfg.stream, model, args.target, probe_steps=args.probe_steps)
    print(f"severity_max={sev:.6g}\tfrozen_accuracy={acc:.4f}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="driftreset", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run one experiment (one row per speed)")
    _common(p)
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("sweep", help="grid over k / lambda / speed / variant")
    _common(p, lists=True)
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser("summarize", help="aggregate results.tsv files into a table")
    p.add_argument("results", nargs="*", help="results.tsv files (default: <out>/results.tsv)")
    p.add_argument("--out", help="directory for summary.tsv / summary.txt")
    p.set_defaults(func=cmd_summarize)
    p = sub.add_parser("preview-stream", help="export the corruption schedule as JSON lines")
    _common(p)
    p.add_argument("--every", type=int, default=10, help="record every N steps")
    p.set_defaults(func=cmd_preview)
    p = sub.add_parser("calibrate", help="find severity_max giving a target frozen accuracy")
    _common(p)
    p.add_argument("--target", type=float, default=0.20)
    p.add_argument("--probe-steps", type=int, default=20000)
    p.set_defaults(func=cmd_calibrate)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print("invalid configuration:", file=sys.stderr)
        for p in exc.problems:
            print(f"  - {p}", file=sys.stderr)
        return EXIT_CONFIG
    except (InvalidInputError, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CalibrationError as exc:
        print(f"calibration failed: {exc} (bracket: {exc.bracket})", file=sys.stderr)
        return EXIT_CALIBRATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
