"""``ccc`` command-line tool.

Exit codes: 0 success, 1 runtime or numerical failure, 2 usage error,
3 malformed input data.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import classify, continuum, experiment, tune
from .classify import Kind
from .dataio import (CurveSet, ExperimentConfig, format_float, load_csv, load_model, save_model,
                     threshold_labels)
from .errors import CCCError, DataFormatError
from .simulate import SIM_P_UPPER, SimDesign, run_replicates
from .splines import (SmoothedSample, TimeGrid, build_basis, derivative_coefficients,
                      smooth_curves, smooth_fixed)

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, EXIT_DATA = 0, 1, 2, 3


class UsageError(Exception):
    pass


# --- helpers -------------------------------------------------------------------

def _config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    return cfg.update(seed=args.seed, threads=args.threads, output=args.output)


def _emit(text: str, path: Optional[str]) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _csv_text(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _classifier_list(text: Optional[str], default) -> tuple:
    if text is None:
        return tuple(default)
    try:
        return experiment.normalize_classifiers(text.replace(",", " ").split())
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _smooth(curves: CurveSet, cfg: ExperimentConfig, derivative: int) -> SmoothedSample:
    s = smooth_curves(curves.values, curves.grid, cfg.theta_grid, curves.labels)
    return derivative_coefficients(s, derivative) if derivative else s


def _derivative(args, cfg: ExperimentConfig) -> int:
    return cfg.derivative if args.derivative is None else args.derivative


def _require_labels(curves: CurveSet, what: str) -> None:
    if curves.labels is None:
        raise DataFormatError(f"{what} needs a label in column 2 of every row")


def _maybe_relabel(curves: CurveSet, args) -> CurveSet:
    if getattr(args, "labels_from", None):
        if args.label_column is None or args.threshold is None:
            raise UsageError("--labels-from needs --label-column and --threshold")
        return threshold_labels(curves, args.labels_from, args.label_column, args.threshold)
    return curves


def _grid_text(g: TimeGrid) -> str:
    return f"[{g.t_min:g}, {g.t_max:g}] with {g.M + 1} points"


# --- subcommands ----------------------------------------------------------------

def cmd_smooth(args) -> int:
    cfg = _config(args)
    curves = load_csv(args.input)
    s = _smooth(curves, cfg, _derivative(args, cfg))
    rows = [["id", "label", "theta0"] + [f"c{j + 1}" for j in range(s.basis.L)]]
    for i, rid in enumerate(curves.row_ids()):
        lab = "" if curves.labels is None else str(curves.labels[i])
        rows.append([rid, lab, format_float(s.theta0)] + [format_float(v) for v in s.coef[i]])
    _emit(_csv_text(rows), cfg.output)
    return EXIT_OK


def fit_classifier(train: SmoothedSample, kind: Kind, cfg: ExperimentConfig,
                   p: Optional[int] = None, alpha: Optional[float] = None):
    """Tune (unless ``p`` is given) and fit one classifier on a smoothed sample."""
    design = continuum.center_and_factor(train)
    if p is None:
        pu = cfg.p_upper or tune.p_upper(train)
        if kind.is_ccc:
            alphas = (alpha,) if alpha is not None else (cfg.alphas or tune.DEFAULT_ALPHAS)
            grid = tune.build_grid(pu, alphas, experiment.substream(cfg.seed, "grid", 0))
            p, alpha, _ = tune.gcv_select(train, grid, kind, design)
        else:
            p = tune.cv_select_baseline(train, pu, kind, cfg.folds,
                                        experiment.substream(cfg.seed, "cv", 0))
    if kind.is_ccc:
        if alpha is None:
            raise UsageError(f"{kind.value} with fixed --p also needs --alpha")
        return classify.fit_ccc(train, p, alpha, kind, design)
    if kind is Kind.PCC:
        return classify.fit_pcc(train, p)
    return classify.fit_plcc(train, p, design)


def confusion(y, pred) -> dict:
    y, pred = np.asarray(y), np.asarray(pred)
    return {f"true{a}_pred{b}": int(np.sum((y == a) & (pred == b))) for a in (0, 1) for b in (0, 1)}


def cmd_fit(args) -> int:
    cfg = _config(args)
    if not cfg.output:
        raise UsageError("fit needs --output for the model file")
    curves = _maybe_relabel(load_csv(args.input), args)
    _require_labels(curves, "fit")
    train = _smooth(curves, cfg, _derivative(args, cfg))
    clf = fit_classifier(train, Kind(args.kind), cfg, args.p, args.alpha)
    clf = dataclasses.replace(clf, derivative=_derivative(args, cfg))
    counts = confusion(curves.labels, clf.predict(train.coef))
    clf.diagnostics["training_confusion"] = counts
    save_model(clf, cfg.output)
    alpha = "" if clf.alpha is None else f" alpha={clf.alpha:g}"
    print(f"fitted {clf.kind.value} p={clf.p}{alpha} theta0={clf.theta0:.6g}")
    print("training confusion: " + " ".join(f"{k}={v}" for k, v in counts.items()))
    return EXIT_OK


def smooth_for_model(clf: classify.FittedClassifier, curves: CurveSet) -> SmoothedSample:
    grid = clf.basis.grid
    if curves.grid != grid:
        raise DataFormatError(
            f"data grid {_grid_text(curves.grid)} does not match model grid {_grid_text(grid)}")
    s = smooth_fixed(curves.values, build_basis(grid), clf.theta0, curves.labels)
    return derivative_coefficients(s, clf.derivative) if clf.derivative else s


def cmd_predict(args) -> int:
    cfg = _config(args)
    clf = load_model(args.model)
    curves = load_csv(args.input)
    s = smooth_for_model(clf, curves)
    d = clf.discriminant(s.coef)
    pred = classify.label_from_discriminant(d)
    rows = [["id", "predicted", "discriminant"]]
    rows += [[rid, int(pred[i]), format_float(d[i])] for i, rid in enumerate(curves.row_ids())]
    _emit(_csv_text(rows), cfg.output)
    if curves.labels is not None:
        counts = confusion(curves.labels, pred)
        print("confusion: " + " ".join(f"{k}={v}" for k, v in counts.items()), file=sys.stderr)
    return EXIT_OK


def cmd_tune(args) -> int:
    cfg = _config(args)
    curves = _maybe_relabel(load_csv(args.input), args)
    _require_labels(curves, "tune")
    train = _smooth(curves, cfg, _derivative(args, cfg))
    pu = cfg.p_upper or tune.p_upper(train)
    kinds = [Kind(k) for k in _classifier_list(args.kinds, ("ccc-l", "ccc-q"))]
    if not all(k.is_ccc for k in kinds):
        raise UsageError("tune reports GCV tables for ccc-l / ccc-q only")
    grid = tune.build_grid(pu, cfg.alphas or tune.DEFAULT_ALPHAS,
                           experiment.substream(cfg.seed, "grid", 0))
    tables = tune.gcv_tables(train, grid, kinds)
    text = "".join(t.to_csv() if i == 0 else t.to_csv().split("\n", 1)[1]
                   for i, t in enumerate(tables.values()))
    _emit(text, cfg.output)
    for k, t in tables.items():
        best = t.best()
        print(f"{k.value}: p={best.p} alpha={best.alpha:g} gcv={best.gcv:.6g}", file=sys.stderr)
    return EXIT_OK


def _emit_report(report: experiment.ReplicateReport, fmt: str, path: Optional[str]) -> None:
    _emit(report.to_text() if fmt == "text" else report.to_csv(), path)


def cmd_simulate(args) -> int:
    cfg = _config(args)
    cfg.update(design=args.design, rho=args.rho, pi0=args.pi0, n=args.n, repeats=args.replicates,
               classifiers=_classifier_list(args.classifiers, cfg.classifiers))
    design = SimDesign(cfg.design, cfg.rho, cfg.pi0, cfg.n, seed=cfg.seed)
    report = run_replicates(design, cfg.classifiers, cfg.repeats, cfg.train_fraction,
                            cfg.threads, cfg.alphas or tune.DEFAULT_ALPHAS,
                            cfg.p_upper or SIM_P_UPPER, cfg.folds, cfg.theta_grid)
    _emit_report(report, args.format, cfg.output)
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _config(args)
    cfg.update(repeats=args.repeats, train_fraction=args.fraction, derivative=args.derivative,
               classifiers=_classifier_list(args.classifiers, cfg.classifiers))
    curves = _maybe_relabel(load_csv(args.input), args)
    _require_labels(curves, "eval")
    report = experiment.repeated_split_eval(curves, cfg, name=Path(args.input).stem)
    _emit_report(report, args.format, cfg.output)
    return EXIT_OK


def cmd_inspect(args) -> int:
    cfg = _config(args)
    clf = load_model(args.model)
    st = clf.stats
    doc = {
        "kind": clf.kind.value,
        "p": clf.p,
        "alpha": clf.alpha,
        "basis": clf.basis.describe(),
        "theta0": clf.theta0,
        "derivative": clf.derivative,
        "direction_l2_norm": classify.l2_norm(clf.basis, clf.direction),
        "groups": {"n0": st.n0, "n1": st.n1},
        "projected_means": [st.proj_mean0, st.proj_mean1],
        "projected_variances": {"group0": st.var0, "group1": st.var1, "pooled": st.var_pooled},
        "diagnostics": clf.diagnostics,
    }
    _emit(json.dumps(doc, indent=2) + "\n", cfg.output)
    return EXIT_OK


def cmd_dump_basis(args) -> int:
    cfg = _config(args)
    if args.input:
        grid = load_csv(args.input).grid
    elif args.grid:
        try:
            t_min, t_max, M = args.grid.split(",")
            grid = TimeGrid(float(t_min), float(t_max), int(M))
        except ValueError:
            raise UsageError("--grid expects t_min,t_max,M") from None
    else:
        raise UsageError("dump-basis needs --input or --grid")
    basis = build_basis(grid, args.degree)
    if args.matrix == "none":
        _emit(json.dumps(basis.describe(), indent=2) + "\n", cfg.output)
    else:
        A = {"gram": basis.W, "penalty": basis.Pen, "design": basis.Psi}[args.matrix]
        _emit(_csv_text([[format_float(v) for v in row] for row in A]), cfg.output)
    return EXIT_OK


# --- parser ----------------------------------------------------------------------

def _common(parser: argparse.ArgumentParser, default) -> None:
    parser.add_argument("--seed", type=int, default=default, help="master random seed")
    parser.add_argument("--config", default=default, help="key = value configuration file")
    parser.add_argument("--threads", type=int, default=default, help="worker processes")
    parser.add_argument("--output", "-o", default=default, help="output file (default stdout)")


def _labels_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--labels-from", help="sidecar CSV with an id column")
    p.add_argument("--label-column", help="sidecar column to threshold")
    p.add_argument("--threshold", type=float, help="label 1 when the column is below this")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ccc", description="Continuum centroid classifiers "
                                     "for curves on an equispaced grid.")
    _common(parser, None)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        _common(p, argparse.SUPPRESS)
        p.set_defaults(func=func)
        return p

    p = add("smooth", cmd_smooth, "smooth curves, write spline coefficients")
    p.add_argument("input")
    p.add_argument("--derivative", type=int, choices=(0, 1, 2))

    p = add("fit", cmd_fit, "tune and fit a classifier, write model JSON")
    p.add_argument("input")
    p.add_argument("--kind", default="ccc-q", choices=[k.value for k in Kind])
    p.add_argument("--p", type=int, help="fix the number of components (skips tuning)")
    p.add_argument("--alpha", type=float, help="fix alpha for ccc-l / ccc-q")
    p.add_argument("--derivative", type=int, choices=(0, 1, 2))
    _labels_opts(p)

    p = add("predict", cmd_predict, "classify curves with a saved model")
    p.add_argument("model")
    p.add_argument("input")

    p = add("tune", cmd_tune, "write the GCV table over the random (p, alpha) grid")
    p.add_argument("input")
    p.add_argument("--kinds", help="comma list of ccc-l, ccc-q")
    p.add_argument("--derivative", type=int, choices=(0, 1, 2))
    _labels_opts(p)

    p = add("simulate", cmd_simulate, "replicated runs on a simulated design")
    p.add_argument("--design", choices=("i", "ii"), type=str.lower)
    p.add_argument("--rho", type=float)
    p.add_argument("--pi0", type=float)
    p.add_argument("--n", type=int, help="curves per sample")
    p.add_argument("--replicates", type=int)
    p.add_argument("--classifiers", help="comma list, e.g. ccc-l,ccc-q,plcc,pcc,majority")
    p.add_argument("--format", choices=("csv", "text"), default="csv")

    p = add("eval", cmd_eval, "repeated stratified splits on a labeled curve file")
    p.add_argument("input")
    p.add_argument("--repeats", type=int)
    p.add_argument("--fraction", type=float, help="training fraction")
    p.add_argument("--classifiers", help="comma list")
    p.add_argument("--derivative", type=int, choices=(0, 1, 2))
    p.add_argument("--format", choices=("csv", "text"), default="csv")
    _labels_opts(p)

    p = add("inspect", cmd_inspect, "print model diagnostics")
    p.add_argument("model")

    p = add("dump-basis", cmd_dump_basis, "describe the spline basis or dump its matrices")
    p.add_argument("--input", help="curve CSV whose grid to use")
    p.add_argument("--grid", help="t_min,t_max,M")
    p.add_argument("--degree", type=int, default=3, choices=(1, 2, 3))
    p.add_argument("--matrix", choices=("none", "gram", "penalty", "design"), default="none")
    return parser


def cli_dispatch(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"ccc: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataFormatError as exc:
        print(f"ccc: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (CCCError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"ccc: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"ccc: i/o error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(cli_dispatch())


if __name__ == "__main__":
    main()
