"""Command-line entry point.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
Every command that touches data re-derives the same train/test partition
from ``--test-fraction`` and ``--seed``, so models are trained and
constrained on the training part and evaluated on the held-out part.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import kernel_constrained as kc
from . import report as rpt
from . import synthetic
from .data_io import Schema, load_csv, rmse, save_csv, split
from .errors import DataError, GfeError, NumericalError
from .groups import ConstraintSet, bind
from .tree_model import (
    CartParams, apply_gfe, load_model, save_model, train_boosted, train_cart, train_forest,
)
from .tree_model.tree import Ensemble

log = logging.getLogger("fairgfe")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4


class UsageError(GfeError):
    pass


def _load_split(args):
    ds = load_csv(args.data, Schema.load(args.schema))
    return split(ds, args.test_fraction, args.seed)


def _pick(args, train, test):
    part = train if args.split == "train" else test
    if part.n_rows == 0:
        raise UsageError(f"the {args.split} split is empty; adjust --test-fraction")
    return part


def _write(path, text):
    Path(path).write_text(text, encoding="utf-8")


def cmd_train(args) -> int:
    train, test = _load_split(args)
    params = CartParams(args.max_depth, args.min_leaf, args.feature_subsample, args.seed)
    if args.model == "cart":
        model = Ensemble((train_cart(train, params=params),))
    elif args.model == "forest":
        model = train_forest(train, n_trees=args.n_trees, bootstrap=not args.no_bootstrap, params=params)
    else:
        model = train_boosted(train, n_rounds=args.n_rounds, learning_rate=args.learning_rate, params=params)
    save_model(model, args.out)
    print(f"trained {args.model}: {len(model.trees)} trees, "
          f"{sum(t.n_leaves for t in model.trees)} leaves -> {args.out}")
    print(f"training RMSE {rmse(model.predict(train), train.target()):.6g}")
    if test.n_rows:
        print(f"held-out RMSE {rmse(model.predict(test), test.target()):.6g}")
    return EXIT_OK


def cmd_constrain(args) -> int:
    train, test = _load_split(args)
    model = load_model(args.model)
    cs = ConstraintSet.load(args.constraints)
    fair, report = apply_gfe(
        model, train, cs,
        mode=args.mode, weighted=args.weighted, sigma_n_sq=args.sigma_n_sq,
        sv_cutoff=args.sv_cutoff, allow_empty=args.allow_empty_groups,
        holdout=test if test.n_rows else None,
    )
    save_model(fair, args.out)
    text = rpt.format_report(report)
    if args.report:
        _write(args.report, rpt.to_json(report))
        _write(Path(args.report).with_suffix(".txt"), text)
    print(text, end="")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    train, test = _load_split(args)
    part = _pick(args, train, test)
    original, constrained = load_model(args.original), load_model(args.constrained)
    before, after = original.predict(part), constrained.predict(part)
    y = part.target()
    out = {
        "split": args.split,
        "rows": part.n_rows,
        "rmse_original": rmse(before, y),
        "rmse_constrained": rmse(after, y),
    }
    out["cost_of_fairness"] = out["rmse_constrained"] - out["rmse_original"]
    lines = [
        f"{args.split} rows={part.n_rows}",
        f"RMSE original {out['rmse_original']:,.4f}  constrained {out['rmse_constrained']:,.4f}  "
        f"cost of fairness {out['cost_of_fairness']:,.4f}",
    ]
    if args.constraints:
        cs = ConstraintSet.load(args.constraints)
        bound = bind(cs, part, allow_empty=True, small_group=0)
        groups = []
        for name, rows in bound.rows.items():
            groups.append({
                "name": name,
                "support": int(rows.size),
                "mean_original": float(before[rows].mean()) if rows.size else None,
                "mean_constrained": float(after[rows].mean()) if rows.size else None,
            })
        out["groups"] = groups
        gaps = []
        for c, ra, rb in bound.pairs():
            if ra.size and rb.size:
                gaps.append({"a": c.group_a, "b": c.group_b,
                             "gap_original": float(before[ra].mean() - before[rb].mean()),
                             "gap_constrained": float(after[ra].mean() - after[rb].mean())})
        out["constraint_gaps"] = gaps
        rows = [[g["name"], str(g["support"]), rpt.fmt(g["mean_original"]), rpt.fmt(g["mean_constrained"])]
                for g in groups]
        lines += ["", rpt.table(["Group", "Support", "Original", "Constrained"], rows)]
        if args.split != "train":
            lines.append("note: equality is enforced on the training distribution; held-out gaps are informational")
    if args.out:
        _write(args.out, rpt.to_json(out))
    print("\n".join(lines))
    return EXIT_OK


def cmd_histogram(args) -> int:
    train, test = _load_split(args)
    part = _pick(args, train, test)
    original, constrained = load_model(args.original), load_model(args.constrained)
    cs = ConstraintSet.load(args.constraints)
    bound = bind(cs, part, allow_empty=True, small_group=0)
    rows = rpt.histogram_rows(original.predict(part), constrained.predict(part), bound.rows, args.bins)
    _write(args.out, rpt.histogram_csv(rows))
    for r in rows:
        if r["record"] == "mean":
            print(f"{r['group']}: mean {r['before']:,.4f} -> {r['after']:,.4f}")
    return EXIT_OK


def cmd_kernel(args) -> int:
    ds = load_csv(args.data, Schema.load(args.schema))
    train, _ = split(ds, args.test_fraction, args.seed)
    if args.max_rows and train.n_rows > args.max_rows:
        keep = np.sort(np.random.default_rng(args.seed).choice(train.n_rows, args.max_rows, replace=False))
        train = train.take(keep)
    X = train.features()
    mu, sd = X.mean(axis=0), X.std(axis=0)
    sd[sd == 0] = 1.0
    Xs = (X - mu) / sd
    kf = kc.KernelFunction(args.kernel, args.lengthscale, args.variance, args.degree)
    cs = ConstraintSet.load(args.constraints)
    bound = bind(cs, train)
    quads = [kc.QuadratureConstraint(Xs[ra], Xs[rb], f"{c.group_a} vs {c.group_b}") for c, ra, rb in bound.pairs()]
    y = train.target()
    y_mu, y_sd = float(y.mean()), float(y.std()) or 1.0
    ys = (y - y_mu) / y_sd
    plain = kc.fit(Xs, ys, kf, args.sigma_n_sq, ())
    fair = kc.fit(Xs, ys, kf, args.sigma_n_sq, quads)
    for q in quads:
        print(f"{q.name}: gap {y_sd * kc.group_mean_gap(plain, q):.6g} -> {y_sd * kc.group_mean_gap(fair, q):.3e}")
    Xall = (ds.features() - mu) / sd
    if np.isnan(Xall).any():
        raise DataError("missing feature values in kernel prediction rows")
    p0 = y_mu + y_sd * kc.predict(plain, Xall)
    p1 = y_mu + y_sd * kc.predict(fair, Xall)
    lines = ["row,prediction_unconstrained,prediction_constrained"]
    lines += [f"{i},{a!r},{b!r}" for i, (a, b) in enumerate(zip(p0.tolist(), p1.tolist()))]
    _write(args.out, "\n".join(lines) + "\n")
    print(f"wrote {len(p0)} predictions -> {args.out}")
    return EXIT_OK


def cmd_synthesize(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.kind == "salary":
        ds = synthetic.salary_dataset(args.rows, args.seed, args.protected_role)
        constraints = synthetic.salary_constraints()
    else:
        ds = synthetic.compas_dataset(args.rows, args.seed, args.protected_role)
        constraints = synthetic.compas_constraints()
    save_csv(ds, out / "data.csv")
    _write(out / "schema.json", json.dumps(ds.schema.to_config(), indent=2) + "\n")
    _write(out / "constraints.json", json.dumps(constraints, indent=2) + "\n")
    print(f"wrote {ds.n_rows} rows to {out}")
    return EXIT_OK


def _data_args(p, seed=True):
    p.add_argument("--data", required=True, help="CSV file with a header row")
    p.add_argument("--schema", required=True, help="schema JSON mapping columns to kind/role")
    p.add_argument("--test-fraction", type=float, default=0.2)
    if seed:
        p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairgfe", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a cart, forest or boosted model")
    _data_args(p)
    p.add_argument("--model", choices=("cart", "forest", "boosted"), default="forest")
    p.add_argument("--max-depth", type=int, default=8)
    p.add_argument("--min-leaf", type=int, default=5)
    p.add_argument("--feature-subsample", type=float, default=1.0)
    p.add_argument("--n-trees", type=int, default=50)
    p.add_argument("--no-bootstrap", action="store_true")
    p.add_argument("--n-rounds", type=int, default=100)
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("constrain", help="enforce group-mean equality on a trained model")
    _data_args(p)
    p.add_argument("--model", required=True, help="model JSON to constrain")
    p.add_argument("--constraints", required=True)
    p.add_argument("--out", required=True, help="constrained model JSON")
    p.add_argument("--report", help="report JSON path; an aligned-text copy goes next to it as .txt")
    p.add_argument("--mode", choices=("per_tree", "joint"), default="per_tree")
    p.add_argument("--weighted", action="store_true", help="weight leaf perturbations by training counts")
    p.add_argument("--sigma-n-sq", type=float, default=0.0)
    p.add_argument("--sv-cutoff", type=float, default=None)
    p.add_argument("--allow-empty-groups", action="store_true")
    p.set_defaults(func=cmd_constrain)

    p = sub.add_parser("evaluate", help="RMSE and group means of original vs constrained model")
    _data_args(p)
    p.add_argument("--original", required=True)
    p.add_argument("--constrained", required=True)
    p.add_argument("--constraints")
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.add_argument("--out", help="metrics JSON path")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("histogram", help="binned predictions per group before and after")
    _data_args(p)
    p.add_argument("--original", required=True)
    p.add_argument("--constrained", required=True)
    p.add_argument("--constraints", required=True)
    p.add_argument("--split", choices=("train", "test"), default="train")
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--out", required=True, help="histogram CSV path")
    p.set_defaults(func=cmd_histogram)

    p = sub.add_parser("kernel", help="constrained kernel regression on a CSV")
    _data_args(p)
    p.add_argument("--constraints", required=True)
    p.add_argument("--kernel", choices=kc.FAMILIES, default="squared-exponential")
    p.add_argument("--lengthscale", type=float, default=1.0)
    p.add_argument("--variance", type=float, default=1.0)
    p.add_argument("--degree", type=int, default=2)
    p.add_argument("--sigma-n-sq", type=float, default=0.1, help="noise variance in standardised target units")
    p.add_argument("--max-rows", type=int, default=2000, help="subsample the training split (0 = all)")
    p.add_argument("--out", required=True, help="predictions CSV path")
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("synthesize", help="write a synthetic dataset, schema and constraint file")
    p.add_argument("--kind", choices=("salary", "compas"), default="salary")
    p.add_argument("--rows", type=int, default=20_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--protected-role", choices=("feature", "group-only"), default="feature")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synthesize)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    logging.captureWarnings(True)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (GfeError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
