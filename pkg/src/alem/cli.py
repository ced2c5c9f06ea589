"""Command-line interface.

Subcommands:
  run            execute the configured strategies x seeds grid
  bench-kcenter  time the greedy selector, check its work/memory contract
  eval           recompute tail metrics from stored prediction matrices
  gen-data       emit an oracle dataset in the binary matrix format

Exit codes: 0 success, 2 invalid configuration or arguments, 3 runtime
failure. All file writing lives here; the library modules stay pure.
"""

import argparse
import dataclasses
import json
import sys
import time
import tracemalloc
from pathlib import Path

import numpy as np

from . import io, kernels, metrics, nn, oracles
from .backend import available_backends, resolve_backend
from .coreset import kcenter_greedy
from .io import ConfigError
from .loop import BudgetSchedule, parse_strategy, run_experiment
from .seeding import rng_for, TAG_POOL


def _parse_seeds(text):
    text = text.strip()
    if ".." in text:
        a, _, b = text.partition("..")
        try:
            lo, hi = int(a), int(b)
        except ValueError:
            raise ConfigError(f"seeds {text!r}: expected A..B or a comma list")
        if hi < lo:
            raise ConfigError(f"seeds {text!r}: range is empty")
        return tuple(range(lo, hi + 1))
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"seeds {text!r}: expected A..B or a comma list")


def _load_run_config(args):
    cfg = io.parse_config(args.config) if args.config else io.RunConfig()
    for item in args.set or ():
        if "=" not in item:
            raise ConfigError(f"--set {item!r}: expected section.key=value")
        dotted, value = item.split("=", 1)
        cfg = io.apply_override(cfg, dotted.strip(), value)
    updates = {}
    if args.strategies:
        updates["strategies"] = tuple(
            s.strip() for s in args.strategies.split(",") if s.strip())
    if args.seeds:
        updates["seeds"] = _parse_seeds(args.seeds)
    if args.out:
        updates["out_dir"] = args.out
    if updates:
        cfg = dataclasses.replace(cfg, **updates)
    io.validate_config(cfg)
    return cfg


def _write_job(job_dir, result):
    job_dir.mkdir(parents=True, exist_ok=True)
    io.write_report(job_dir / "report.json", result.report)
    for row, wall in zip(result.report["rounds"], result.round_seconds):
        io.write_round_csv(job_dir / f"round_{row['round']}.csv", {
            "round": row["round"],
            "labeled_count": row["labeled_count"],
            "tail1": row["tail1"],
            "tail5": row["tail5"],
            "tail10": row["tail10"],
            "mean_loss": row["mean_loss"],
            "delta": row["bound"]["delta_feature"],
            "wall_time_s": float(wall),
        })
    plotdir = job_dir / "plotdata"
    plotdir.mkdir(exist_ok=True)
    grid = result.plots["grid"]
    med = result.plots["median"]
    io.write_curve_csv(plotdir / "median.csv", grid, med["truth"],
                       med["prediction"])
    for w in result.plots["worst"]:
        io.write_curve_csv(plotdir / f"worst_{w['rank']:02d}.csv", grid,
                           w["truth"], w["prediction"])


def cmd_run(args):
    cfg = _load_run_config(args)
    oracle = oracles.make_oracle(cfg.oracle_kind, cfg.coeff_seed,
                                 cfg.output_dim, cfg.oracle_noise_std)
    schedule = BudgetSchedule(cfg.budgets)
    train_cfg = nn.TrainConfig(minibatch_size=cfg.minibatch_size,
                               learning_rate=cfg.learning_rate,
                               max_epochs=cfg.max_epochs,
                               patience=cfg.patience)
    dtype = np.float32 if cfg.net_dtype == "float32" else np.float64
    out_root = Path(cfg.out_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    (out_root / "config.ini").write_text(io.serialize_config(cfg))
    (out_root / "coefficients.txt").write_text(oracles.dump_coefficients(oracle))

    for strategy_name in cfg.strategies:
        strategy = parse_strategy(strategy_name, cfg.sp_shrink,
                                  cfg.sp_noise_std)
        for seed in cfg.seeds:
            result = run_experiment(
                oracle, schedule, strategy, net_spec=cfg.net_spec,
                train_cfg=train_cfg, pool_size=cfg.pool_size,
                val_size=cfg.val_size, test_size=cfg.test_size, seed=seed,
                metric=cfg.metric, standardize=cfg.standardize,
                chunk_size=cfg.chunk_size, gamma=cfg.gamma,
                backend=args.backend, net_dtype=dtype)
            _write_job(out_root / strategy_name / str(seed), result)
            fin = result.report["final"]
            print(f"{strategy_name} seed {seed}: mean={fin['mean_loss']:.5f} "
                  f"tail1={fin['tail1']:.5f} "
                  f"({sum(result.round_seconds):.1f}s)", flush=True)
    return 0


def bench_kcenter(n, d, b, chunk_size=4096, seed=0, metric="l1",
                  backend=None):
    """One timed selector run plus the contract checks; returns the numbers.

    The chunk-invariance assertion reruns a reduced instance (the property
    is size-independent) so the benchmark itself stays one full pass.
    """
    feats = rng_for(seed, TAG_POOL).standard_normal((n, d))
    kernels.warmup(backend)
    tracemalloc.start()
    t0 = time.perf_counter()
    state = kcenter_greedy(feats, b, metric=metric, chunk_size=chunk_size,
                           backend=backend)
    wall = time.perf_counter() - t0
    peak = tracemalloc.get_traced_memory()[1]
    tracemalloc.stop()

    if state.n_dist_evals != b * n:
        raise RuntimeError(f"distance evaluations {state.n_dist_evals} != "
                           f"b*n = {b * n}")
    n_small = min(n, 4096)
    b_small = min(b, 64)
    small = feats[:n_small]
    alt = 512 if chunk_size != 512 else 65536
    s1 = kcenter_greedy(small, b_small, metric=metric, chunk_size=chunk_size,
                        backend=backend)
    s2 = kcenter_greedy(small, b_small, metric=metric, chunk_size=alt,
                        backend=backend)
    if not (np.array_equal(s1.added, s2.added) and s1.radius == s2.radius):
        raise RuntimeError(f"selection depends on chunk size "
                           f"({chunk_size} vs {alt})")

    predicted = 8 * (chunk_size * (d + 1) + 3 * n)
    return {
        "backend": resolve_backend(backend),
        "n": n, "d": d, "b": b, "chunk_size": chunk_size,
        "wall_s": wall,
        "evals": state.n_dist_evals,
        "evals_per_s": state.n_dist_evals / wall if wall > 0 else float("inf"),
        "peak_bytes": peak,
        "predicted_bytes": predicted,
        "peak_ratio": peak / predicted,
        "chunk_invariant": True,
        "radius": state.radius,
    }


def cmd_bench(args):
    if min(args.n, args.d) < 1 or args.b < 0 or args.chunk_size < 1:
        raise ConfigError("bench-kcenter: n, d, chunk-size must be positive "
                          "and b nonnegative")
    if args.b > args.n:
        raise ConfigError(f"bench-kcenter: b={args.b} exceeds n={args.n}")
    names = (available_backends() if args.backend == "both"
             else (args.backend,))
    for name in names:
        r = bench_kcenter(args.n, args.d, args.b, args.chunk_size, args.seed,
                          args.metric, None if name == "auto" else name)
        print(f"backend={r['backend']} n={r['n']} d={r['d']} b={r['b']} "
              f"chunk={r['chunk_size']}")
        print(f"  wall {r['wall_s']:.3f}s  evals {r['evals']}"
              f"  ({r['evals_per_s']:.3e}/s)")
        print(f"  peak aux memory {r['peak_bytes'] / 1e6:.2f} MB, predicted "
              f"{r['predicted_bytes'] / 1e6:.2f} MB "
              f"(ratio {r['peak_ratio']:.2f})")
        print(f"  evals == b*n: ok   chunk invariance: ok", flush=True)
    return 0


def cmd_eval(args):
    pred = io.read_matrix(args.pred)
    truth = io.read_matrix(args.truth)
    if pred.shape != truth.shape:
        raise RuntimeError(f"prediction shape {pred.shape} != truth shape "
                           f"{truth.shape}")
    rep = metrics.tail_report(nn.per_sample_l1(pred, truth))
    doc = {"n": rep.n, "mean": rep.mean, "tail1": rep.tail1,
           "tail5": rep.tail5, "tail10": rep.tail10,
           "median_index": rep.median_index}
    text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_gen_data(args):
    if args.n < 1:
        raise ConfigError("gen-data: --n must be >= 1")
    oracle = oracles.make_oracle(args.oracle, args.coeff_seed,
                                 args.output_dim, args.noise_std)
    x = oracles.sample_pool(oracle, args.n, args.seed)
    y = oracles.query_batch(oracle, x)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_matrix(out / "inputs.alem", x)
    io.write_matrix(out / "outputs.alem", y)
    (out / "coefficients.txt").write_text(oracles.dump_coefficients(oracle))
    print(f"{args.oracle}: wrote {x.shape[0]}x{x.shape[1]} inputs and "
          f"{y.shape[0]}x{y.shape[1]} outputs to {out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="alem",
        description="Budget-constrained active learning for simulator "
                    "emulators.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the strategies x seeds grid")
    p.add_argument("--config", help="INI config path (defaults are a "
                                    "complete desk-scale run)")
    p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                   help="override one config setting (repeatable)")
    p.add_argument("--strategies", help="comma list: random,coreset,coreset-sp")
    p.add_argument("--seeds", help="comma list or range, e.g. 0..4")
    p.add_argument("--out", help="output directory root")
    p.add_argument("--backend", choices=("auto", "numba", "numpy"),
                   default=None, help="kernel backend (default: env/auto)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench-kcenter", help="benchmark the greedy selector")
    p.add_argument("--n", type=int, default=50000)
    p.add_argument("--d", type=int, default=128)
    p.add_argument("--b", type=int, default=2000)
    p.add_argument("--chunk-size", type=int, default=4096)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--metric", choices=("l1", "l2"), default="l1")
    p.add_argument("--backend", choices=("auto", "numba", "numpy", "both"),
                   default="both")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("eval", help="tail metrics from stored matrices")
    p.add_argument("--pred", required=True, help="predictions .alem file")
    p.add_argument("--truth", required=True, help="ground-truth .alem file")
    p.add_argument("--out", help="write the JSON report here instead of "
                                 "stdout")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gen-data", help="sample and label an oracle dataset")
    p.add_argument("--oracle", choices=oracles.KINDS, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--coeff-seed", type=int, default=0)
    p.add_argument("--output-dim", type=int, default=128)
    p.add_argument("--noise-std", type=float, default=0.0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_gen_data)
    return parser


def entry(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(entry())
