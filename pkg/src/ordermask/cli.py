"""``ordermask`` command line.

Subcommands: train, sample, eval, verify, order-dist, schedule-curve.
Exit status is 0 on success, 1 when inputs fail validation or a verify
check fails, and 2 on usage errors.  ``ORDERMASK_THREADS`` caps BLAS threads.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import generator, metrics, tabular, verify
from .errors import OrderMaskError
from .orders import empirical_order_distribution, exact_order_distribution
from .schedule import MultivariateSchedule
from .trainer import TrainConfig, load_checkpoint, save_checkpoint, train

log = logging.getLogger("ordermask")

CHECKPOINT_FILE = "checkpoint.json"
SCHEMA_FILE = "schema.json"
HISTORY_FILE = "history.jsonl"
CURVE_POINTS = 101


def _emit(obj, out: str | None) -> None:
    text = json.dumps(obj, indent=2)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def cmd_train(args) -> int:
    config = {}
    if args.config:
        config = json.loads(Path(args.config).read_text())
    if args.seed is not None:
        config["seed"] = args.seed
    cfg = TrainConfig.from_dict(config)
    header, rows = tabular.read_csv(args.data)
    schema = tabular.infer_schema(header, rows, args.bins)
    ds = tabular.encode(rows, schema)
    params, ms, history = train(cfg, ds.rows, schema.vocab_sizes)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out / CHECKPOINT_FILE, params, ms)
    schema.save(out / SCHEMA_FILE)
    (out / HISTORY_FILE).write_text(history.to_jsonl())
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")
    summary = {
        "best_epoch": history.best_epoch,
        "best_val_loss": history.best_val_loss,
        "diverged": history.diverged,
        "schedule_weights": ms.weights.tolist(),
    }
    print(json.dumps(summary))
    return 1 if history.diverged else 0


def _load_run(ckpt: str):
    path = Path(ckpt)
    params, ms = load_checkpoint(path / CHECKPOINT_FILE)
    schema_path = path / SCHEMA_FILE
    schema = tabular.TableSchema.load(schema_path) if schema_path.exists() else None
    return params, ms, schema


def cmd_sample(args) -> int:
    params, ms, schema = _load_run(args.ckpt)
    if schema is None:
        raise OrderMaskError(f"{args.ckpt} has no {SCHEMA_FILE}")
    rng = np.random.default_rng(args.seed)
    if args.sampler == "order":
        header, rows = generator.synthesize_table(params, ms, schema, args.rows, rng)
    else:
        x = generator.generate_ancestral_batch(params, ms, args.steps, args.rows, rng)
        header, rows = schema.names, tabular.decode(tabular.EncodedDataset(schema, x))
    tabular.write_csv(args.out, header, rows)
    return 0


def cmd_eval(args) -> int:
    schema = tabular.TableSchema.load(args.schema)
    real_header, real = tabular.read_csv(args.real)
    synth_header, synth = tabular.read_csv(args.synth)
    for label, header in (("real", real_header), ("synthetic", synth_header)):
        if header != schema.names:
            raise OrderMaskError(f"{label} CSV header {header} does not match the schema")
    _emit(metrics.evaluate(real, synth, schema), args.out)
    return 0


def cmd_verify(args) -> int:
    results = verify.run_suites([args.suite], seed=args.seed)
    failed = [r for r in results if not r.passed]
    _emit({"passed": not failed, "checks": [r.to_dict() for r in results]}, args.out)
    for r in failed:
        print(f"FAIL {r.suite}: {r.name} value={r.value:.6g} target={r.target:.6g} tol={r.tolerance:.3g}", file=sys.stderr)
    return 1 if failed else 0


def _load_schedule(path: str) -> MultivariateSchedule:
    p = Path(path)
    if p.is_dir():
        return load_checkpoint(p / CHECKPOINT_FILE)[1]
    data = json.loads(p.read_text())
    if "schedule" in data:
        data = data["schedule"]
    return MultivariateSchedule.from_dict(data)


def cmd_order_dist(args) -> int:
    ms = _load_schedule(args.schedule)
    if args.exact:
        dist = exact_order_distribution(ms)
        method = "quadrature"
    else:
        dist = empirical_order_distribution(ms, args.samples, np.random.default_rng(args.seed))
        method = f"empirical ({args.samples} samples)"
    orders = [
        {"order": list(o), "generation_order": list(o[::-1]), "probability": p}
        for o, p in sorted(dist.items(), key=lambda kv: -kv[1])
    ]
    _emit({"weights": ms.weights.tolist(), "method": method, "orders": orders}, args.out)
    return 0


def cmd_schedule_curve(args) -> int:
    params, ms, schema = _load_run(args.ckpt)
    names = schema.names if schema is not None else [f"pos{i}" for i in range(len(ms))]
    t = np.linspace(0.0, 1.0, CURVE_POINTS)
    alpha = ms.alpha(t)
    rows = [[tabular.format_number(ti), *(repr(float(a)) for a in row)] for ti, row in zip(t, alpha)]
    tabular.write_csv(args.out, ["t", *(f"alpha_{n}" for n in names)], rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ordermask", description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=None, help="global seed (default 0; train uses the config seed)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train on a CSV table")
    p.add_argument("--data", required=True)
    p.add_argument("--config", help="TrainConfig JSON file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--bins", type=int, default=tabular.DEFAULT_BINS, help="quantile bins per numeric column")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sample", help="write synthetic rows from a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--sampler", choices=("order", "ancestral"), default="order")
    p.add_argument("--steps", type=int, default=256, help="ancestral steps T")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("eval", help="shape and trend scores as JSON")
    p.add_argument("--real", required=True)
    p.add_argument("--synth", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("verify", help="run oracle self-checks")
    p.add_argument("--suite", choices=(*verify.SUITES, "all"), default="all")
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("order-dist", help="decoding-order distribution of a schedule")
    p.add_argument("--schedule", required=True, help="schedule JSON, checkpoint JSON or run directory")
    p.add_argument("--exact", action="store_true", help="quadrature instead of sampling")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--out")
    p.set_defaults(func=cmd_order_dist)

    p = sub.add_parser("schedule-curve", help="alpha_t per column on a 101-point grid")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_schedule_curve)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command != "train" and args.seed is None:
        args.seed = 0
    if getattr(args, "rows", 0) < 0 or getattr(args, "samples", 1) < 1:
        parser.print_usage(sys.stderr)
        print("ordermask: error: --rows must be >= 0 and --samples >= 1", file=sys.stderr)
        return 2
    threads = os.environ.get("ORDERMASK_THREADS")
    try:
        with threadpool_limits(limits=int(threads) if threads else None):
            return args.func(args)
    except (OrderMaskError, ValueError, OSError, KeyError, json.JSONDecodeError) as e:
        print(f"ordermask: error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
