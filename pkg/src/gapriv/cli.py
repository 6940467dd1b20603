"""Command-line front end.

Every subcommand writes into its output directory:

* ``results.json`` - ``{"config": ..., "results": ..., "timing": ...}``
* ``manifest.json`` - resolved options, seed, library versions, wall time
* ``config.cfg`` - the resolved options as a flat config file; rerunning the
  same subcommand with ``--config config.cfg`` reproduces the run
* subcommand-specific CSV and checkpoint files

Exit codes: 0 success, 1 usage or config error, 2 runtime error.
"""

import argparse
import csv
import json
import os
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, fields, replace
from pathlib import Path

import numpy as np
import sklearn

from . import __version__
from ._random import substream
from .config import ConfigError, load_schema, read_flat, write_flat
from .datasets import gen_images, gen_toy, load_csv, normalize, split
from .evaluation import loss_report, ratio_experiment
from .linalg import frob_sq
from .linear import adversary_loss, apply_removal, brute_force, greedy_approx, removal_budget, removal_cost
from .maximin import (
    AlternationConfig,
    Classifier,
    MaximinResult,
    NoiseBudget,
    PrivatizerModel,
    TrainHistory,
    composite_grad_check,
    evaluate_privatization,
    pretrain_protected,
    privatize,
    solve_maximin,
)
from .nn import accuracy, grad_check, serialize
from .nn.presets import GRAD_CHECK_PRESETS, classifier_spec

OUT_ENV = "GAPRIV_OUT"
GRAD_TOLERANCE = 1e-4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _int_list(text):
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _toy_spec(text):
    try:
        parts = dict(kv.split("=", 1) for kv in str(text).split(","))
        return {"m": int(parts["m"]), "n": int(parts["n"])}
    except (KeyError, ValueError):
        raise argparse.ArgumentTypeError(f"expected m=<count>,n=<count>, got {text!r}") from None


def _seed_for(seed, name):
    return int(substream(seed, name).integers(2**32))


# ------------------------------------------------------------------ linear side


def _add_linear_source(p):
    p.add_argument("--toy", type=_toy_spec, help="generate toy data, e.g. m=100,n=5")
    p.add_argument("--csv", help="CSV file to load")
    p.add_argument("--schema", help="schema file or bundled name (beijing, wine)")
    p.add_argument("--private", help="override the private label")
    p.add_argument("--alpha", type=float, default=0.3, help="budget as a fraction of ||X||_F^2")
    p.add_argument("--budget", type=float, help="absolute budget D (overrides --alpha)")
    p.add_argument("--n-remove", type=int, help="budget admitting exactly this many greedy removals")


def _linear_data(args):
    if args.csv:
        if not args.schema:
            raise UsageError("--csv requires --schema")
        ds = load_csv(args.csv, load_schema(args.schema))
        ds, _ = normalize(ds)
    elif args.toy:
        ds = gen_toy(args.toy["m"], args.toy["n"], _seed_for(args.seed, "dataset"))
    else:
        raise UsageError("need a data source: --toy m=..,n=.. or --csv FILE --schema SCHEMA")
    private = args.private or ds.private_label()
    if private not in ds.labels:
        raise UsageError(f"unknown private label {private!r}")
    if args.private:
        roles = {k: ("private" if k == private else "public") for k in ds.labels}
        ds = replace(ds, label_roles=roles)
    if args.n_remove is not None:
        D = removal_budget(ds.X, ds.labels[private], args.n_remove)
    elif args.budget is not None:
        D = args.budget
    else:
        D = args.alpha * frob_sq(ds.X)
    return ds, private, D


def _greedy_summary(ds, y, D):
    R, trace = greedy_approx(ds.X, y, D)
    return R, {
        "removed": R.names(ds.feature_names),
        "removed_indices": list(R.removed),
        "utility": adversary_loss(ds.X, y, R),
        "cost": removal_cost(ds.X, R),
        "trace": [
            {"feature": ds.feature_names[s.index], "utility": s.utility, "cost": s.cost,
             "ratio": s.ratio if np.isfinite(s.ratio) else "inf", "candidates": s.candidates}
            for s in trace.steps
        ],
    }


def cmd_gen_toy(args, out):
    ds = gen_toy(args.m, args.n, _seed_for(args.seed, "dataset"))
    path = out / "toy.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(ds.feature_names) + ["y"])
        for row, yv in zip(ds.X, ds.labels["y"]):
            w.writerow([repr(float(v)) for v in row] + [repr(float(yv))])
    return {"m": ds.m, "n": ds.n, "file": path.name}


def cmd_greedy(args, out):
    ds, private, D = _linear_data(args)
    _, summary = _greedy_summary(ds, ds.labels[private], D)
    return {"private": private, "budget": D, **summary}


def cmd_brute(args, out):
    ds, private, D = _linear_data(args)
    R, u = brute_force(ds.X, ds.labels[private], D)
    return {"private": private, "budget": D, "removed": R.names(ds.feature_names),
            "removed_indices": list(R.removed), "utility": u, "cost": removal_cost(ds.X, R)}


def cmd_compare(args, out):
    ds, private, D = _linear_data(args)
    y = ds.labels[private]
    _, g = _greedy_summary(ds, y, D)
    Rb, ub = brute_force(ds.X, y, D)
    return {
        "private": private,
        "budget": D,
        "greedy": g,
        "brute": {"removed": Rb.names(ds.feature_names), "utility": ub, "cost": removal_cost(ds.X, Rb)},
        "greedy_le_brute": bool(g["utility"] <= ub + 1e-9 * max(1.0, abs(ub))),
        "ratio": g["utility"] / ub if ub > 0 else 1.0,
    }


def cmd_privatize_linear(args, out):
    ds, private, D = _linear_data(args)
    R, summary = _greedy_summary(ds, ds.labels[private], D)
    Xp = apply_removal(ds.X, R)
    with open(out / "privatized.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        names = list(ds.labels)
        w.writerow(list(ds.feature_names) + names)
        for i in range(ds.m):
            w.writerow([repr(float(v)) for v in Xp[i]] + [repr(float(ds.labels[k][i])) for k in names])
    return {"private": private, "budget": D, "file": "privatized.csv", **summary}


def cmd_report(args, out):
    ds, private, D = _linear_data(args)
    R, summary = _greedy_summary(ds, ds.labels[private], D)
    rep = loss_report(ds, R, budget=D)
    rep.to_csv(out / "report.csv")
    return {
        "private": private,
        "budget": D,
        "removal_order": rep.removal_order,
        "losses": [asdict(r) for r in rep.rows],
    }


def cmd_ratio_experiment(args, out):
    executor = ThreadPoolExecutor(args.workers) if args.workers > 1 else None
    try:
        curve = ratio_experiment(args.n, args.m, trials=args.trials, alpha=args.alpha, seed=args.seed,
                                 executor=executor)
    finally:
        if executor is not None:
            executor.shutdown()
    curve.to_csv(out / "ratio.csv")
    return {
        "cells": [{"n": n, "m": m, "fraction": f, "set_match_fraction": s}
                  for (n, m), (f, s) in sorted(curve.cells.items())],
        "file": "ratio.csv",
    }


# ------------------------------------------------------------------- image side

_TRAIN_FIELDS = [f for f in fields(AlternationConfig) if f.name != "seed"]


def _add_image_source(p):
    p.add_argument("--count", type=int, default=2500, help="synthetic images to generate")
    p.add_argument("--size", type=int, default=16)
    p.add_argument("--image-noise", type=float, default=0.05)
    p.add_argument("--test-fraction", type=float, default=0.2)


def _add_training(p):
    defaults = AlternationConfig()
    for f in _TRAIN_FIELDS:
        default = getattr(defaults, f.name)
        p.add_argument("--" + f.name.replace("_", "-"), type=type(default), default=default)


def _image_data(args):
    ds = gen_images(args.count, args.size, _seed_for(args.seed, "dataset"), noise=args.image_noise)
    return split(ds, args.test_fraction, _seed_for(args.seed, "split"))


def _train_config(args):
    return AlternationConfig(seed=args.seed, **{f.name: getattr(args, f.name) for f in _TRAIN_FIELDS})


def cmd_gen_images(args, out):
    ds = gen_images(args.count, args.size, _seed_for(args.seed, "dataset"), noise=args.image_noise)
    np.savez_compressed(out / "images.npz", images=ds.images, **ds.labels)
    return {
        "count": len(ds),
        "size": args.size,
        "label_frequencies": {k: float(np.mean(v)) for k, v in ds.labels.items()},
        "roles": ds.label_roles,
        "file": "images.npz",
    }


def cmd_pretrain(args, out):
    train, test = _image_data(args)
    cfg = _train_config(args)
    model = pretrain_protected(train, cfg)
    serialize.save(out / "protected.bin", model.spec, model.params)
    name = train.label_for("protected")
    return {
        "label": name,
        "train_accuracy": accuracy(model.spec, model.params, train.images, train.labels[name]),
        "test_accuracy": accuracy(model.spec, model.params, test.images, test.labels[name]),
        "file": "protected.bin",
    }


def _save_result(out, result):
    result.history.to_csv(out / "history.csv")
    serialize.save(out / "privatizer.bin", result.privatizer.spec, result.privatizer.params)
    serialize.save(out / "adversary.bin", result.adversary.spec, result.adversary.params)
    serialize.save(out / "protected.bin", result.protected.spec, result.protected.params)


def _history_summary(result):
    h = result.history
    return {
        "iterations": len(h),
        "converged": h.converged,
        "noise_budget_per_image": result.budget.d_per_image,
        "max_noise_sq": max((r["noise_sq_max"] for r in h.records), default=0.0),
        "final": h.records[-1] if h.records else None,
    }


def cmd_maximin(args, out):
    train, _ = _image_data(args)
    result = solve_maximin(train, _train_config(args))
    _save_result(out, result)
    return {**_history_summary(result), "files": ["history.csv", "privatizer.bin", "adversary.bin", "protected.bin"]}


def _load_result(src, train, cfg):
    shape = train.images.shape[1:]
    priv = PrivatizerModel.build(shape, cfg.encoder_arch)
    priv = priv.with_params(serialize.load(src / "privatizer.bin", priv.spec))
    p_name, q_name = train.label_for("private"), train.label_for("protected")
    adv_spec = classifier_spec(cfg.adversary_arch, shape, train.n_classes[p_name])
    pro_spec = classifier_spec(cfg.protected_arch, shape, train.n_classes[q_name])
    return MaximinResult(
        privatizer=priv,
        history=TrainHistory(),
        adversary=Classifier(adv_spec, serialize.load(src / "adversary.bin", adv_spec)),
        protected=Classifier(pro_spec, serialize.load(src / "protected.bin", pro_spec)),
        budget=NoiseBudget.per_image(cfg.noise_budget, len(train)),
    )


def cmd_evaluate(args, out):
    train, test = _image_data(args)
    cfg = _train_config(args)
    if args.from_dir:
        result = _load_result(Path(args.from_dir), train, cfg)
        summary = {"loaded_from": str(args.from_dir)}
    else:
        result = solve_maximin(train, cfg)
        _save_result(out, result)
        summary = _history_summary(result)
    table = evaluate_privatization(result, train, test, cfg)
    table.to_csv(out / "accuracy.csv")
    _, noise = privatize(test.images, result.privatizer, result.budget, return_noise=True)
    return {
        **summary,
        "accuracy": [asdict(r) for r in table.rows],
        "test_max_noise_sq": float(np.max(np.sum(noise * noise, axis=(1, 2, 3)))),
        "file": "accuracy.csv",
    }


def cmd_grad_check(args, out):
    names = list(GRAD_CHECK_PRESETS) + ["composite"] if args.preset == "all" else [args.preset]
    errors = {}
    for name in names:
        if name == "composite":
            err = composite_grad_check(args.seed, eps=args.eps)
        elif name in GRAD_CHECK_PRESETS:
            err = grad_check(GRAD_CHECK_PRESETS[name](), args.seed, eps=args.eps)
        else:
            raise UsageError(f"unknown preset {name!r}; choose from {sorted(GRAD_CHECK_PRESETS) + ['composite', 'all']}")
        errors[name] = err
        print(f"{name}: max relative error {err:.3e}")
    worst = max(errors.values())
    return {"max_relative_error": errors, "tolerance": GRAD_TOLERANCE, "passed": bool(worst < GRAD_TOLERANCE)}


# ------------------------------------------------------------------------ driver

COMMANDS = {
    "gen-toy": (cmd_gen_toy, "generate a uniform toy dataset"),
    "greedy": (cmd_greedy, "greedy feature removal"),
    "brute": (cmd_brute, "exhaustive optimal feature removal"),
    "compare": (cmd_compare, "greedy vs exhaustive on one dataset"),
    "ratio-experiment": (cmd_ratio_experiment, "fraction of toy instances where greedy is optimal"),
    "privatize-linear": (cmd_privatize_linear, "write the feature-removed dataset"),
    "report": (cmd_report, "per-label losses before and after removal"),
    "gen-images": (cmd_gen_images, "generate the synthetic image set"),
    "pretrain": (cmd_pretrain, "train the protected-label model"),
    "maximin": (cmd_maximin, "alternating maximin privatizer training"),
    "evaluate": (cmd_evaluate, "accuracy table for a trained (or freshly trained) privatizer"),
    "grad-check": (cmd_grad_check, "finite-difference gradient checks"),
}


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV}/<command> or runs/<command>)")
    common.add_argument("--config", help="flat key = value file; flags override it")

    parser = _Parser(prog="gapriv", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"gapriv {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text)
        if name == "gen-toy":
            p.add_argument("--m", type=int, default=100)
            p.add_argument("--n", type=int, default=5)
        elif name in ("greedy", "brute", "compare", "privatize-linear", "report"):
            _add_linear_source(p)
        elif name == "ratio-experiment":
            p.add_argument("--n", type=_int_list, default="4")
            p.add_argument("--m", type=_int_list, default="10,100,1000")
            p.add_argument("--trials", type=int, default=100)
            p.add_argument("--alpha", type=float, default=0.3)
            p.add_argument("--workers", type=int, default=1)
        elif name == "gen-images":
            _add_image_source(p)
        elif name == "grad-check":
            p.add_argument("--preset", default="all")
            p.add_argument("--eps", type=float, default=1e-5)
        else:
            _add_image_source(p)
            _add_training(p)
            if name == "evaluate":
                p.add_argument("--from", dest="from_dir", help="directory written by a previous maximin run")
    return parser, sub


def _apply_config(parser, sub, argv):
    """Fold config-file values in as defaults, so explicit flags still win."""
    pre = _Parser(add_help=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config or known.command not in sub.choices:
        return
    values = read_flat(known.config)
    sp = sub.choices[known.command]
    dests = {a.dest: a for a in sp._actions}
    defaults = {}
    for key, value in values.items():
        dest = key.replace("-", "_")
        if dest in ("config", "command"):
            continue
        if dest not in dests:
            raise ConfigError(f"{known.config}: unknown option {key!r} for {known.command}")
        action = dests[dest]
        try:
            defaults[dest] = action.type(value) if action.type else value
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise ConfigError(f"{known.config}: bad value for {key!r}: {exc}") from None
    sp.set_defaults(**defaults)


def _to_config_value(v):
    if isinstance(v, list):
        return ",".join(str(x) for x in v)
    if isinstance(v, dict):
        return ",".join(f"{k}={x}" for k, x in v.items())
    return v


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def run(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, sub = build_parser()
    try:
        _apply_config(parser, sub, argv)
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError(parser.format_usage().strip())
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    out = Path(args.out) if args.out else Path(os.environ.get(OUT_ENV, "runs")) / args.command
    resolved = {k: v for k, v in vars(args).items() if k not in ("command", "config", "out")}
    for key in ("csv", "from_dir"):
        if resolved.get(key):
            resolved[key] = str(Path(resolved[key]).resolve())
    func = COMMANDS[args.command][0]
    start = time.perf_counter()
    try:
        out.mkdir(parents=True, exist_ok=True)
        results = func(args, out)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # surfaced with context, mapped to the runtime-error code
        print(f"error: {args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    elapsed = time.perf_counter() - start

    config = {"command": args.command, **resolved}
    with open(out / "results.json", "w") as fh:
        json.dump({"config": config, "results": results, "timing": {"wall_time_s": elapsed}}, fh,
                  indent=2, default=_json_default)
    manifest = {
        "command": args.command,
        "config": resolved,
        "seed": args.seed,
        "versions": {
            "gapriv": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scikit-learn": sklearn.__version__,
        },
        "wall_time_s": elapsed,
        "rerun": f"gapriv {args.command} --config config.cfg --out <dir>",
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, default=_json_default)
    write_flat(out / "config.cfg", {k: _to_config_value(v) for k, v in resolved.items()})

    if results.get("passed") is False:
        print("error: gradient check exceeded tolerance", file=sys.stderr)
        return 2
    print(f"{args.command}: wrote {out}")
    return 0


def main():
    sys.exit(run())
