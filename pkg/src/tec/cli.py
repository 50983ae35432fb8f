"""``tec`` command-line interface.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .datagen import MODELS, SimModelSpec, generate, model_info
from .ensemble import tec_predict_many
from .errors import DataError, TecError
from .harness import DEFAULT_GAMMA_GRID, RunConfig, prepare_samples, run_benchmark, tune
from .io import Dataset, read_dataset, read_model, write_dataset, write_model

log = logging.getLogger("tec")

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4


def _floats(text: str) -> float | tuple[float, ...]:
    vals = tuple(float(v) for v in text.split(","))
    return vals[0] if len(vals) == 1 else vals


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(","))


def _int_range(text: str) -> tuple[int, ...]:
    if ":" in text:
        lo, hi = (int(v) for v in text.split(":"))
        return tuple(range(lo, hi + 1))
    return _ints(text)


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get("TEC_THREADS", "1")))
    except ValueError:
        return 1


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model")
    g.add_argument("--rank", type=int, default=3, help="CP rank used to decompose dense inputs (default 3)")
    g.add_argument("--lambda", dest="lam", type=float, default=1e-2, help="regularization (default 1e-2)")
    g.add_argument("--b", type=int, default=5, help="ensemble size (default 5)")
    g.add_argument("--gamma", type=float, default=0.0, help="voting threshold in [-1, 1] (default 0)")
    g.add_argument("--proj-frac", type=float, default=0.7, help="P_j = floor(frac * I_j) (default 0.7)")
    g.add_argument("--proj-dims", type=_ints, default=None, help="explicit target dims, comma separated")
    g.add_argument("--bandwidth", type=_floats, default=None,
                   help="kernel bandwidth, scalar or one per mode (default: median heuristic)")
    g.add_argument("--scaling", choices=("inv_sqrt_p", "unit_variance"), default="inv_sqrt_p")
    g.add_argument("--seed", type=int, default=0, help="master seed")
    g.add_argument("--threads", type=int, default=_default_threads(), help="worker threads (env TEC_THREADS)")


def _config(args, **extra) -> RunConfig:
    return RunConfig(rank=args.rank, lam=args.lam, b=args.b, gamma=args.gamma, proj_frac=args.proj_frac,
                     proj_dims=args.proj_dims, bandwidth=args.bandwidth, scaling=args.scaling,
                     seed=args.seed, threads=args.threads, **extra)


def _emit(args, payload: dict, table: str) -> None:
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(table)


def cmd_gen(args) -> int:
    spec = SimModelSpec(args.model, args.per_class, args.seed)
    samples, labels = generate(spec)
    info = model_info(args.model)
    meta = {"model": args.model, "per_class": args.per_class, "seed": args.seed,
            "gamma_convention": "shape-rate"}
    write_dataset(args.out, samples, labels, meta)
    print(f"wrote {len(samples)} {info['kind']} samples of {args.model} to {args.out}")
    return 0


def _prepared(data, cfg: RunConfig, seed: int):
    t0 = time.perf_counter()
    prepared = prepare_samples(data.samples, cfg.rank, seed, cfg.als_sweeps, cfg.als_tol)
    return prepared, time.perf_counter() - t0


def cmd_train(args) -> int:
    from .ensemble import tec_train

    cfg = _config(args)
    data = read_dataset(args.data)
    if data.labels is None:
        raise DataError("training data have no labels")
    prepared, t_dec = _prepared(data, cfg, cfg.seed)
    model = tec_train(prepared, data.labels, b=cfg.b, gamma=cfg.gamma, lam=cfg.lam,
                      target_dims=cfg.target_dims(prepared[0].mode_dims), kernel_spec=cfg.kernel_spec(),
                      master_seed=cfg.seed, scaling=cfg.scaling, threads=cfg.threads)
    extra = {"input_kind": data.kind, "rank": cfg.rank, "prep_seed": cfg.seed,
             "als": {"max_sweeps": cfg.als_sweeps, "tol": cfg.als_tol}, "scaling": cfg.scaling}
    write_model(args.out, model, extra)
    print(f"decompose: {t_dec:.3f}s")
    for m, member in enumerate(model.members):
        t = member.timings
        print(f"member {m}: iterations={member.iterations} converged={member.converged} "
              f"project+gram={t['project+gram']:.3f}s solve={t['solve']:.3f}s")
    print(f"wrote model with b={model.b} to {args.out}")
    return 0


def cmd_predict(args) -> int:
    model, manifest = read_model(args.model)
    data = read_dataset(args.data)
    t0 = time.perf_counter()
    prepared = prepare_samples(data.samples, manifest.get("rank", 3), manifest.get("prep_seed", 0),
                               manifest.get("als", {}).get("max_sweeps", 100),
                               manifest.get("als", {}).get("tol", 1e-6))
    if prepared[0].mode_dims != model.mode_dims:
        raise DataError(f"data dims {prepared[0].mode_dims} do not match model dims {model.mode_dims}")
    pred = tec_predict_many(model, prepared, threads=args.threads)
    seconds = time.perf_counter() - t0
    if args.out:
        Path(args.out).write_text("".join(f"{int(p)}\n" for p in pred))
    payload: dict = {"predictions": [int(p) for p in pred], "seconds": seconds}
    lines = [] if args.out else [str(int(p)) for p in pred]
    if data.labels is not None:
        err = 100.0 * float(np.mean(pred != data.labels))
        payload["error_rate"] = err
        lines.append(f"error rate (%): {err:.2f}")
    _emit(args, payload, "\n".join(lines))
    return 0


def _load_for_eval(args):
    if args.data:
        data = read_dataset(args.data)
    else:
        if not args.model:
            raise ValueError("give a dataset path or --model")
        samples, labels = generate(SimModelSpec(args.model, args.per_class, args.data_seed))
        data = Dataset(samples, labels, {"model": args.model})
    if data.labels is None:
        raise DataError("evaluation data have no labels")
    return data


def cmd_benchmark(args) -> int:
    cfg = _config(args, splits=args.splits, train_size=args.train_size, test_size=args.test_size)
    data = _load_for_eval(args)
    prepared, t_dec = _prepared(data, cfg, cfg.seed)
    report = run_benchmark(prepared, data.labels, cfg)
    report.timings["decompose"] = t_dec
    report.seconds += t_dec
    _emit(args, report.to_dict(), report.table())
    return 0


def cmd_tune(args) -> int:
    cfg = _config(args, folds=args.folds)
    data = _load_for_eval(args)
    prepared, _ = _prepared(data, cfg, cfg.seed)
    gammas = DEFAULT_GAMMA_GRID if args.gamma_step == 0.1 else tuple(
        round(g, 10) for g in np.arange(-1.0, 1.0 + 1e-9, args.gamma_step))
    best, rows = tune(prepared, data.labels, cfg, args.b_grid, gammas)
    payload = {"best": {"b": best.b, "gamma": best.gamma}, "cv_table": rows}
    lines = [f"{'stage':>5} {'b':>3} {'gamma':>6} {'cv error (%)':>12}"]
    lines += [f"{r['stage']:>5} {r['b']:>3} {r['gamma']:>6.1f} {r['cv_error']:>12.2f}" for r in rows]
    lines.append(f"best: b={best.b} gamma={best.gamma}")
    _emit(args, payload, "\n".join(lines))
    return 0


def _origin(exc: BaseException) -> str:
    tb = exc.__traceback__
    while tb.tb_next is not None:
        tb = tb.tb_next
    return tb.tb_frame.f_globals.get("__name__", "?")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tec", description="Tensor ensemble classifier")
    parser.add_argument("--version", action="version", version=f"tec {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a simulation dataset")
    p.add_argument("--model", choices=MODELS, required=True)
    p.add_argument("--per-class", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train an ensemble on a dataset archive")
    p.add_argument("data")
    p.add_argument("--out", required=True)
    _add_run_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict labels with a trained model")
    p.add_argument("model")
    p.add_argument("data")
    p.add_argument("--out", help="write one label per line to this file")
    p.add_argument("--threads", type=int, default=_default_threads())
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_predict)

    for name, func, text in (("benchmark", cmd_benchmark, "repeated train/test split evaluation"),
                             ("tune", cmd_tune, "cross-validate b, then gamma")):
        p = sub.add_parser(name, help=text)
        p.add_argument("data", nargs="?", help="dataset archive (or use --model to generate one)")
        p.add_argument("--model", choices=MODELS, help="generate this simulation model in memory")
        p.add_argument("--per-class", type=int, default=100)
        p.add_argument("--data-seed", type=int, default=0, help="seed for --model generation")
        p.add_argument("--json", action="store_true")
        _add_run_flags(p)
        if name == "benchmark":
            p.add_argument("--splits", type=int, default=100)
            p.add_argument("--train-size", type=int, default=140)
            p.add_argument("--test-size", type=int, default=60)
        else:
            p.add_argument("--folds", type=int, default=5)
            p.add_argument("--b-grid", type=_int_range, default=tuple(range(2, 21)),
                           help="ensemble sizes, 'lo:hi' or comma list (default 2:20)")
            p.add_argument("--gamma-step", type=float, default=0.1)
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except TecError as exc:
        origin = (exc.__traceback__ and _origin(exc)) or "tec"
        print(f"tec {args.command}: {type(exc).__name__} in {origin}: {exc}", file=sys.stderr)
        return exc.exit_code if exc.exit_code in (EXIT_DATA, EXIT_NUMERIC) else EXIT_DATA
    except ValueError as exc:
        print(f"tec {args.command}: invalid argument: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"tec {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
