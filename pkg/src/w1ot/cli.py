"""Command-line front end (``w1ot``).

Exit codes: 0 success, 1 numerical failure, 2 usage or validation error.
Machine-readable output goes to the declared files or standard output; log
messages go to standard error.
"""

import argparse
import json
import logging
import os
import sys
import time

import numpy as np

from . import __version__
from .bench import run_bench
from .config import RunConfig, load_checkpoint, save_checkpoint
from .datasets import TOY_DATASETS, atomic_write, generate, load_csv, write_csv
from .dual import train_potential
from .errors import NumericalError, UsageError, W1OTError
from .lipschitz import lipschitz_audit
from .metrics import evaluate, gradient_norm_stats, monotonicity_violation_rate
from .oracle import w1_matching, MAX_MATCHING_N
from .plotting import render_svg
from .stepsize import TransportMap, train_stepsize

logger = logging.getLogger("w1ot")


def _emit(obj):
    sys.stdout.write(json.dumps(obj) + "\n")
    sys.stdout.flush()


def _write_json(path, obj):
    text = json.dumps(obj, indent=2)
    atomic_write(path, lambda fh: fh.write(text + "\n"))


def _same_dim(a, b):
    if a.d != b.d:
        raise UsageError(f"{a.name} has {a.d} columns but {b.name} has {b.d}")


def cmd_toygen(args):
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    src, tgt = generate(args.dataset, args.n, seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    write_csv(src, os.path.join(args.out, "source.csv"))
    write_csv(tgt, os.path.join(args.out, "target.csv"))
    meta = dict(src.meta)
    meta["source_labels"] = None if src.labels is None else src.labels.tolist()
    meta["target_labels"] = None if tgt.labels is None else tgt.labels.tolist()
    _write_json(os.path.join(args.out, "meta.json"), meta)
    logger.info("wrote %s pair (n=%d) to %s", args.dataset, args.n, args.out)
    return 0


def cmd_fit(args):
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    src, tgt = load_csv(args.source), load_csv(args.target)
    _same_dim(src, tgt)
    if args.history:
        os.makedirs(args.history, exist_ok=True)

    t0 = time.perf_counter()
    f, dual_hist = train_potential(src.features, tgt.features, cfg.dual, net=cfg.network)
    t1 = time.perf_counter()
    eta, gan_hist, D = train_stepsize(f, src.features, tgt.features, cfg.gan, return_discriminator=True)
    t2 = time.perf_counter()
    tmap = TransportMap(f, eta, dual_history=dual_hist, gan_history=gan_hist, discriminator=D)
    save_checkpoint(tmap, args.out, cfg)
    if args.history:
        dual_hist.to_csv(os.path.join(args.history, "dual_history.csv"))
        gan_hist.to_csv(os.path.join(args.history, "gan_history.csv"))
    _emit({"dual_estimate": dual_hist.final_dual, "dual_seconds": round(t1 - t0, 3),
           "gan_seconds": round(t2 - t1, 3), "checkpoint": args.out})
    return 0


def cmd_transport(args):
    tmap, _, _ = load_checkpoint(args.model)
    data = load_csv(args.input)
    if data.d != tmap.dim:
        raise UsageError(f"{args.input} has {data.d} columns, the model expects {tmap.dim}")
    write_csv(tmap(data.features), args.out, data.feature_names)
    return 0


def cmd_evaluate(args):
    pred, tgt = load_csv(args.pred), load_csv(args.target)
    _same_dim(pred, tgt)
    scales = [float(s) for s in args.scales.split(",")] if args.scales else None
    kw = {"scales": scales} if scales else {}
    report = evaluate(pred.features, tgt.features, seed=args.seed, **kw).as_dict()
    if args.source:
        src = load_csv(args.source)
        _same_dim(src, tgt)
        report["identity_baseline"] = evaluate(src.features, tgt.features, seed=args.seed, **kw).as_dict()
    _write_json(args.out, report)
    return 0


def cmd_audit(args):
    if args.pairs < 1:
        raise UsageError("--pairs must be >= 1")
    tmap, _, _ = load_checkpoint(args.model)
    data = load_csv(args.data)
    if data.d != tmap.dim:
        raise UsageError(f"{args.data} has {data.d} columns, the model expects {tmap.dim}")
    X = data.features
    lo, hi = X.min(axis=0), X.max(axis=0)
    pad = 0.1 * np.maximum(hi - lo, 1e-6)
    lip = lipschitz_audit(tmap.potential, args.pairs, (lo - pad, hi + pad), seed=args.seed)
    g_mean, g_min, g_max = gradient_norm_stats(tmap.potential, X)
    _emit({
        "lipschitz_max_ratio": lip.max_ratio,
        "lipschitz_pairs": lip.pairs_used,
        "lipschitz_violated": lip.violated,
        "grad_norm_mean": g_mean,
        "grad_norm_min": g_min,
        "grad_norm_max": g_max,
        "monotonicity_violation_rate": monotonicity_violation_rate(tmap, X, args.pairs, args.seed),
        "layer_defects": tmap.potential.layer_defects(),
    })
    return 0


def cmd_oracle(args):
    src, tgt = load_csv(args.source), load_csv(args.target)
    _same_dim(src, tgt)
    X, Y = src.features, tgt.features
    if args.subsample:
        rng = np.random.default_rng(args.seed)
        k = min(args.subsample, len(X), len(Y))
        X = X[np.sort(rng.choice(len(X), k, replace=False))]
        Y = Y[np.sort(rng.choice(len(Y), k, replace=False))]
    if len(X) != len(Y):
        raise UsageError(f"exact matching needs equal row counts ({len(X)} vs {len(Y)}); use --subsample")
    if len(X) > MAX_MATCHING_N:
        raise UsageError(f"{len(X)} rows exceed the exact-matching limit {MAX_MATCHING_N}; use --subsample")
    result = w1_matching(X, Y)
    out = {"w1": result.cost, "n": len(X)}
    if args.model:
        tmap, _, _ = load_checkpoint(args.model)
        if tmap.dim != X.shape[1]:
            raise UsageError(f"model expects {tmap.dim} columns, data has {X.shape[1]}")
        w = tmap.potential.frozen_weights()
        dual = float(tmap.potential.value(X, w).mean() - tmap.potential.value(Y, w).mean())
        out["dual_estimate"] = dual
        out["dual_gap"] = result.cost - dual
    if args.assignment:
        rows = np.column_stack([np.arange(len(X)), result.assignment]).astype(np.float64)
        atomic_write(args.assignment, lambda fh: _int_csv(fh, rows))
    _emit(out)
    return 0


def _int_csv(fh, rows):
    fh.write("source_index,target_index\n")
    for a, b in rows.astype(int):
        fh.write(f"{a},{b}\n")


def cmd_bench(args):
    try:
        dims = [int(d) for d in args.dims.split(",") if d.strip()]
    except ValueError:
        raise UsageError(f"--dims must be a comma-separated list of integers, got {args.dims!r}") from None
    if not dims or any(d < 1 for d in dims) or args.iters < 1:
        raise UsageError("--dims entries and --iters must be positive")
    lines = ["dim,ms_per_1000_iters"]
    for dim, ms in run_bench(dims, args.iters, args.seed):
        logger.info("dim %d: %.1f ms per 1000 iterations", dim, ms)
        lines.append(f"{dim},{ms!r}")
    text = "\n".join(lines) + "\n"
    if args.out:
        atomic_write(args.out, lambda fh: fh.write(text))
    else:
        sys.stdout.write(text)
    return 0


def cmd_plot(args):
    src, tgt = load_csv(args.source), load_csv(args.target)
    pred = load_csv(args.pred).features if args.pred else None
    if args.rays and pred is None:
        raise UsageError("--rays needs --pred")
    svg = render_svg(src.features, tgt.features, pred, rays=args.rays)
    atomic_write(args.out, lambda fh: fh.write(svg))
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="w1ot", description="Wasserstein-1 neural optimal transport.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-q", "--quiet", action="store_true", help="only log warnings and errors")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("toygen", help="generate a toy source/target pair")
    s.add_argument("--dataset", required=True, choices=TOY_DATASETS)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_toygen)

    s = sub.add_parser("fit", help="train potential and step size, write a checkpoint")
    s.add_argument("--source", required=True)
    s.add_argument("--target", required=True)
    s.add_argument("--config", help="RunConfig JSON")
    s.add_argument("--out", required=True, help="checkpoint path")
    s.add_argument("--history", help="directory for dual/GAN history CSVs")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("transport", help="apply a fitted map to a CSV")
    s.add_argument("--model", required=True)
    s.add_argument("--input", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_transport)

    s = sub.add_parser("evaluate", help="MMD / r2 / l2 of predictions against a target")
    s.add_argument("--pred", required=True)
    s.add_argument("--target", required=True)
    s.add_argument("--source", help="also report the identity baseline")
    s.add_argument("--scales", help="comma-separated RBF gammas")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("audit", help="Lipschitz, gradient-norm and monotonicity audit")
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--pairs", type=int, default=10000)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_audit)

    s = sub.add_parser("oracle", help="exact W1 by assignment")
    s.add_argument("--source", required=True)
    s.add_argument("--target", required=True)
    s.add_argument("--model", help="also report the model's dual estimate and gap")
    s.add_argument("--assignment", help="write the optimal matching as CSV")
    s.add_argument("--subsample", type=int, help="match a random subset of this many rows per side")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_oracle)

    s = sub.add_parser("bench", help="time dual training against input dimension")
    s.add_argument("--dims", required=True, help="e.g. 2,48,1000")
    s.add_argument("--iters", type=int, default=10000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", help="CSV path (default: standard output)")
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("plot", help="SVG scatter of source, target and transported points")
    s.add_argument("--source", required=True)
    s.add_argument("--target", required=True)
    s.add_argument("--pred")
    s.add_argument("--rays", action="store_true", help="draw x -> T(x) segments")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_plot)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"w1ot: numerical failure: {exc}", file=sys.stderr)
        return 1
    except (W1OTError, ValueError) as exc:
        print(f"w1ot: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        name = exc.filename or ""
        print(f"w1ot: error: {name}: {exc.strerror or exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
