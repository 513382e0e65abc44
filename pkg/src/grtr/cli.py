"""Command line front end.

Subcommands:

* ``synthetic``  planted-model study over one or more seeds
* ``finance``    price-panel forecasting pipeline (real files or the bundled
  planted fixture)
* ``gradcheck``  finite-difference validation of the analytic gradients
* ``inspect``    coefficient, factor and contraction-chain dumps for a saved
  model

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical divergence.
All file outputs are written to a temporary sibling and renamed into place,
so failures never leave partial files.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import harness
from .cpd import CpdFactors, coefficient_at, load_factors, save_factors
from .exceptions import DataError, DivergenceError
from .model import grad_bias, grad_factor, loss, modewise_breakdown, predict_materialized

MODEL_NAMES = ("LR", "L2LR", "TR", "L2TR", "GRTR")


def _sanitize(obj):
    """Replace non-finite floats with None so reports are strict JSON."""
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def _write_json(path, doc) -> None:
    doc = _sanitize(doc)
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parse_models(spec: str) -> list:
    if spec.strip().lower() == "all":
        return list(MODEL_NAMES)
    names = []
    for token in spec.split(","):
        name = token.strip().upper()
        if name not in MODEL_NAMES:
            raise argparse.ArgumentTypeError(
                f"unknown model {token.strip()!r}; choose from {', '.join(MODEL_NAMES)} or 'all'"
            )
        names.append(name)
    if not names:
        raise argparse.ArgumentTypeError("no models selected")
    return names


def _parse_floats(spec: str) -> list:
    try:
        return [float(tok) for tok in str(spec).split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma list of numbers: {spec!r}") from exc


def _parse_ints(spec: str) -> list:
    try:
        return [int(tok) for tok in str(spec).split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma list of integers: {spec!r}") from exc


def _apply_config_file(args, parser) -> None:
    """Merge a JSON config file under the parsed flags (flags win)."""
    if not getattr(args, "config", None):
        return
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            overrides = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read config file {args.config}: {exc}") from exc
    if not isinstance(overrides, dict):
        raise DataError(f"config file {args.config} must hold a JSON object")
    sub = parser._subparser_map[args.command]
    defaults = {a.dest: a.default for a in sub._actions}
    for key, value in overrides.items():
        dest = key.replace("-", "_")
        if dest not in defaults:
            raise DataError(f"config file key {key!r} is not a recognized flag")
        # flags explicitly given on the command line win over the file
        if getattr(args, dest) == defaults.get(dest):
            setattr(args, dest, value)


def _trace_path(output: str, model: str, seed: int) -> str:
    stem, _ = os.path.splitext(output)
    return f"{stem}.trace.{model.lower()}.seed{seed}.csv"


def _write_traces(output: str, traces: dict) -> dict:
    refs = {}
    for (model, seed), trace in sorted(traces.items()):
        path = _trace_path(output, model, seed)
        tmp = path + ".tmp"
        trace.write_csv(tmp)
        os.replace(tmp, path)
        refs[f"{model}:{seed}"] = os.path.basename(path)
    return refs


# ---------------------------------------------------------------------------
# subcommands


def cmd_synthetic(args) -> int:
    spec = harness.SyntheticSpec(
        order=args.order,
        dim=args.dim,
        true_rank=args.true_rank,
        samples=args.samples,
        noise_ratio=args.noise_ratio,
        beta=args.beta,
        seed=args.seed,
    )
    lambdas = _parse_floats(args.lam) if isinstance(args.lam, str) else [float(args.lam)]
    if len(lambdas) == 1:
        grtr_lambdas = lambdas[0]
    elif len(lambdas) == args.order:
        grtr_lambdas = tuple(lambdas)
    else:
        raise DataError(
            f"--lambda needs 1 value or one per mode ({args.order}); got {len(lambdas)}"
        )
    hyper = harness.SyntheticHyper(
        rank=args.rank,
        learning_rate=args.lr,
        tolerance=args.tol,
        max_steps=args.max_steps,
        init_scale=args.init_scale,
        l2lr_lambda=args.l2lr_lambda,
        l2tr_lambda=args.l2tr_lambda,
        grtr_lambdas=grtr_lambdas,
    )
    traces: dict = {}
    report = harness.run_synthetic_experiment(
        spec, models=args.models, hyper=hyper, n_seeds=args.seeds, traces=traces
    )
    report["traces"] = _write_traces(args.output, traces)
    _write_json(args.output, report)
    print(f"synthetic report written to {args.output}")
    for entry in report.get("median", []) or [e for e in report["models"]]:
        name = entry["name"]
        wm = entry.get("weight_mse")
        te = entry.get("test_explained_variance", entry.get("test", {}).get("explained_variance"))
        print(f"  {name:5s} weight_mse={wm:.4f} test_evs={te:.3f}")
    return 0


def cmd_finance(args) -> int:
    stem, _ = os.path.splitext(args.output)
    if args.fixture:
        prices = f"{stem}.fixture_prices.csv"
        sectors = f"{stem}.fixture_sectors.csv"
        harness.generate_financial_fixture(
            prices, sectors, n_stocks=20, n_sectors=4, n_dates=500, window=args.window, seed=args.seed
        )
    else:
        if not args.prices or not args.sectors:
            raise DataError("finance needs --prices and --sectors, or --fixture")
        prices, sectors = args.prices, args.sectors
    panel = harness.ingest_prices(prices, sectors)
    hyper = harness.FinanceHyper(
        ranks=tuple(_parse_ints(args.rank)),
        lambdas=tuple(_parse_floats(args.lam)),
        learning_rate=args.lr,
        tolerance=args.tol,
        max_steps=args.max_steps,
        init_scale=args.init_scale,
        l2lr_lambda=args.l2lr_lambda,
    )
    traces: dict = {}
    report, fitted = harness.run_finance_experiment(
        panel,
        window=args.window,
        models=args.models,
        hyper=hyper,
        seed=args.seed,
        index_ticker=args.index_ticker,
        volume_mode="raw" if args.raw_volume else "log_diff",
        traces=traces,
    )
    report["config"]["beta"] = args.beta
    report["traces"] = _write_traces(args.output, traces)
    if fitted is not None:
        factors, bias, cfg = fitted
        model_path = f"{stem}.model.json"
        save_factors(
            model_path,
            factors,
            bias,
            config={
                "rank": cfg.rank,
                "lambdas": cfg.lambdas,
                "learning_rate": cfg.learning_rate,
                "tolerance": cfg.tolerance,
                "max_steps": cfg.max_steps,
                "seed": cfg.seed,
                "init_scale": cfg.init_scale,
                "bias_update": cfg.bias_update,
            },
        )
        report["model_file"] = os.path.basename(model_path)
    _write_json(args.output, report)
    print(f"finance report written to {args.output}")
    for entry in report["models"]:
        print(
            f"  {entry['name']:5s} params={entry['params']:6d} "
            f"test_acc={entry['test']['directional_accuracy']:.3f} "
            f"test_evs={entry['test']['explained_variance']:.3f}"
        )
    return 0


def cmd_gradcheck(args) -> int:
    rng = np.random.default_rng(args.seed)
    step = args.step
    failures = 0
    worst = 0.0
    for trial in range(args.trials):
        order = int(rng.integers(2, 4))
        shape = tuple(int(s) for s in rng.integers(2, 5, size=order))
        rank = int(rng.integers(1, 4))
        m = int(rng.integers(2, 9))
        lam = float(rng.choice([0.0, 0.5]))
        factors = CpdFactors([rng.normal(size=(s, rank)) for s in shape])
        bias = float(rng.normal())
        X = rng.normal(size=(m,) + shape)
        y = rng.normal(size=m)
        laps = []
        for s in shape:
            a = rng.uniform(0.0, 1.0, size=(s, s))
            a = (a + a.T) / 2.0
            np.fill_diagonal(a, 0.0)
            laps.append(np.diag(a.sum(axis=1)) - a)
        lambdas = [lam] * order

        def loss_at(mats, b):
            return loss(CpdFactors(mats), b, X, y, lambdas, laps)

        trial_worst = 0.0
        fd_bias = (loss_at(factors.factors, bias + step) - loss_at(factors.factors, bias - step)) / (2 * step)
        an_bias = grad_bias(factors, bias, X, y)
        if args.corrupt:
            an_bias += 0.05 * (1.0 + abs(an_bias))
        denom = max(abs(fd_bias), 1e-12)
        trial_worst = max(trial_worst, abs(an_bias - fd_bias) / denom)

        for n in range(1, order + 1):
            u = factors.factors[n - 1]
            fd = np.zeros_like(u)
            for i in range(u.shape[0]):
                for j in range(u.shape[1]):
                    up = [w.copy() for w in factors.factors]
                    um = [w.copy() for w in factors.factors]
                    up[n - 1][i, j] += step
                    um[n - 1][i, j] -= step
                    fd[i, j] = (loss_at(up, bias) - loss_at(um, bias)) / (2 * step)
            an = grad_factor(factors, bias, X, y, n, lambdas, laps)
            if args.corrupt:
                an = an * 1.05 + 0.01
            denom = max(float(np.linalg.norm(fd)), 1e-12)
            rel = float(np.linalg.norm(an - fd)) / denom
            trial_worst = max(trial_worst, rel)

        worst = max(worst, trial_worst)
        ok = trial_worst < args.rel_tol
        if not ok:
            failures += 1
        if args.verbose or not ok:
            print(f"trial {trial:3d}: order={order} shape={shape} rank={rank} "
                  f"m={m} lambda={lam} rel_err={trial_worst:.2e} {'ok' if ok else 'FAIL'}")
    status = "PASS" if failures == 0 else "FAIL"
    print(f"gradcheck {status}: {args.trials - failures}/{args.trials} trials passed, "
          f"worst relative error {worst:.2e} (tolerance {args.rel_tol:g})")
    return 0 if failures == 0 else 1


def _load_input_tensor(path) -> np.ndarray:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read input tensor {path}: {exc}") from exc
    if isinstance(doc, dict):
        try:
            shape = tuple(int(s) for s in doc["shape"])
            data = np.asarray(doc["data"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}: expected {{'shape': [...], 'data': [...]}}") from exc
        if data.size != int(np.prod(shape)):
            raise DataError(f"{path}: data length {data.size} does not fit shape {shape}")
        return data.reshape(shape)
    return np.asarray(doc, dtype=np.float64)


def cmd_inspect(args) -> int:
    try:
        factors, bias, config = load_factors(args.model)
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        raise DataError(f"cannot load model {args.model}: {exc}") from exc
    print(f"model: shape={factors.shape} rank={factors.rank} bias={bias!r}")
    if config:
        print(f"config: {json.dumps(config, sort_keys=True)}")

    for coef in args.coef or []:
        idx = tuple(_parse_ints(coef))
        try:
            value = coefficient_at(factors, idx)
        except ValueError as exc:
            raise DataError(str(exc)) from exc
        print(f"coefficient {','.join(str(i) for i in idx)}: {value!r}")

    if args.factors_dir:
        os.makedirs(args.factors_dir, exist_ok=True)
        for n, u in enumerate(factors.factors, start=1):
            path = os.path.join(args.factors_dir, f"factor_mode{n}.csv")
            tmp = path + ".tmp"
            with open(tmp, "w", encoding="utf-8") as fh:
                fh.write("index," + ",".join(f"col_{r}" for r in range(1, factors.rank + 1)) + "\n")
                for i in range(u.shape[0]):
                    fh.write(str(i + 1) + "," + ",".join(repr(float(v)) for v in u[i]) + "\n")
            os.replace(tmp, path)
        print(f"factor CSVs written to {args.factors_dir}")

    if args.input:
        x = _load_input_tensor(args.input)
        if x.shape != factors.shape:
            raise DataError(f"input shape {x.shape} does not match model {factors.shape}")
        chains = modewise_breakdown(factors, bias, x)
        total = bias
        for r, chain in enumerate(chains, start=1):
            shapes = [getattr(z, "shape", ()) for z in chain]
            scalar = chain[-1]
            total += scalar
            print(f"rank-{r} chain: " + " -> ".join(str(s) for s in shapes) + f" -> {scalar!r}")
        prediction = predict_materialized(factors, bias, x)
        print(f"sum of chain scalars + bias: {total!r}")
        print(f"model prediction:            {prediction!r}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="grtr",
        description="Graph-regularized tensor regression experiments and tools.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_shared(p, default_output):
        p.add_argument("--seed", type=int, default=0, help="base random seed (default 0)")
        p.add_argument("--output", default=default_output, help=f"report path (default {default_output})")
        p.add_argument("--lr", type=float, default=None, help="gradient-descent learning rate")
        p.add_argument("--tol", type=float, default=0.0, help="training MSE stop tolerance (default 0)")
        p.add_argument("--max-steps", type=int, default=None, help="maximum training iterations")
        p.add_argument("--models", type=_parse_models, default=list(MODEL_NAMES), metavar="CSV|all",
                       help="comma list from LR,L2LR,TR,L2TR,GRTR, or 'all' (default all)")
        p.add_argument("--config", default=None, help="JSON file of flag overrides (explicit flags win)")

    syn = sub.add_parser("synthetic", help="planted-model recovery study")
    add_shared(syn, "synthetic_report.json")
    syn.add_argument("--order", type=int, default=4, help="tensor order N (default 4)")
    syn.add_argument("--dim", type=int, default=10, help="mode size I (default 10)")
    syn.add_argument("--true-rank", type=int, default=5, help="planted CPD rank (default 5)")
    syn.add_argument("--samples", type=int, default=125, help="sample count M (default 125)")
    syn.add_argument("--noise-ratio", type=float, default=0.5,
                     help="noise std as a fraction of the noiseless label std (default 0.5)")
    syn.add_argument("--beta", type=float, default=1.0, help="kernel-graph decay rate (default 1.0)")
    syn.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds to run (default 1)")
    syn.add_argument("--rank", type=int, default=5, help="model rank (default 5)")
    syn.add_argument("--lambda", dest="lam", default="75",
                     help="graph penalty for GRTR: one value or one per mode (default 75)")
    syn.add_argument("--l2tr-lambda", type=float, default=10.0, help="L2TR penalty (default 10)")
    syn.add_argument("--l2lr-lambda", type=float, default=100.0, help="L2LR ridge penalty (default 100)")
    syn.add_argument("--init-scale", type=float, default=0.5, help="factor init scale (default 0.5)")
    syn.set_defaults(func=cmd_synthetic, lr_default=3e-4, steps_default=600)

    fin = sub.add_parser("finance", help="price-panel forecasting pipeline")
    add_shared(fin, "finance_report.json")
    fin.add_argument("--prices", default=None, help="long-format prices CSV (date,ticker,adj_close,...)")
    fin.add_argument("--sectors", default=None, help="sector CSV (ticker,sector)")
    fin.add_argument("--fixture", action="store_true",
                     help="generate and use the bundled planted fixture instead of real files")
    fin.add_argument("--window", type=int, default=5, help="rolling window length T (default 5)")
    fin.add_argument("--beta", type=float, default=1.0,
                     help="kernel-graph decay rate; accepted for kernel-graph variants, "
                          "unused by the sector graph (default 1.0)")
    fin.add_argument("--rank", default="1,2", help="comma list of candidate ranks (default 1,2)")
    fin.add_argument("--lambda", dest="lam", default="0,0.1,1,10",
                     help="comma list of candidate penalties (default 0,0.1,1,10)")
    fin.add_argument("--l2lr-lambda", type=float, default=100.0, help="L2LR ridge penalty (default 100)")
    fin.add_argument("--init-scale", type=float, default=0.1, help="factor init scale (default 0.1)")
    fin.add_argument("--index-ticker", default=None,
                     help="ticker whose returns are the label (default: equal-weighted mean)")
    fin.add_argument("--raw-volume", action="store_true",
                     help="keep raw volume levels instead of log differences")
    fin.set_defaults(func=cmd_finance, lr_default=3e-2, steps_default=500)

    gc = sub.add_parser("gradcheck", help="finite-difference gradient validation")
    gc.add_argument("--trials", type=int, default=50, help="number of random instances (default 50)")
    gc.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    gc.add_argument("--step", type=float, default=1e-6, help="finite-difference step (default 1e-6)")
    gc.add_argument("--rel-tol", type=float, default=1e-4, help="relative error tolerance (default 1e-4)")
    gc.add_argument("--verbose", action="store_true", help="print every trial")
    gc.add_argument("--corrupt", action="store_true", help=argparse.SUPPRESS)
    gc.set_defaults(func=cmd_gradcheck)

    ins = sub.add_parser("inspect", help="dump coefficients, factors and contraction chains")
    ins.add_argument("--model", required=True, help="model JSON written by the finance run")
    ins.add_argument("--coef", action="append", metavar="I1,I2,...",
                     help="1-based multi-index whose coefficient to print (repeatable)")
    ins.add_argument("--factors-dir", default=None, help="directory for per-mode factor CSVs")
    ins.add_argument("--input", default=None,
                     help="JSON input tensor ({'shape': [...], 'data': [...]} or nested lists) "
                          "for the contraction-chain breakdown")
    ins.set_defaults(func=cmd_inspect)

    parser._subparser_map = {"synthetic": syn, "finance": fin, "gradcheck": gc, "inspect": ins}
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config_file(args, parser)
        if hasattr(args, "lr") and args.lr is None:
            args.lr = getattr(args, "lr_default", 1e-2)
        if hasattr(args, "max_steps") and args.max_steps is None:
            args.max_steps = getattr(args, "steps_default", 500)
        return args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
