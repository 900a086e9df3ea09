"""Command-line front end for dataset generation, surrogate training,
contour export, similarity/scaling analysis and design optimization.

Every subcommand writes its delimited outputs plus a rendered figure of the
same data into the output directory, together with a manifest echoing the
resolved configuration (the manifest is the only file carrying a timestamp,
so repeated runs with identical flags are byte-identical elsewhere).

Exit codes: 0 ok, 2 usage, 3 I/O failure, 4 data/schema problem,
5 optimization failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import design_space, gpr, nn, optimize, oracle, plots, scaling
from .design_space import DesignPoint, DesignSpaceBounds, format_float
from .fileio import atomic_write_text
from .errors import (
    ConflictingDuplicates,
    DatasetTooSmall,
    DuplicatePoints,
    ExhaustedRejection,
    NoFeasibleStart,
    NonFiniteInput,
    SchemaError,
    ShapeMismatch,
    TooFewSamples,
    ZeroBaseline,
    ZeroWind,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_DATA = 4
EXIT_OPT = 5

_DATA_ERRORS = (
    SchemaError,
    DuplicatePoints,
    ConflictingDuplicates,
    DatasetTooSmall,
    TooFewSamples,
    ShapeMismatch,
    NonFiniteInput,
    ZeroWind,
    ZeroBaseline,
    ValueError,
)
_OPT_ERRORS = (NoFeasibleStart, ExhaustedRejection)


class UsageError(Exception):
    pass


def _write_manifest(out_dir, command, resolved: dict):
    lines = [f"command={command}", f"created_at={datetime.now(timezone.utc).isoformat()}"]
    for k in sorted(resolved):
        lines.append(f"{k}={resolved[k]}")
    atomic_write_text(os.path.join(out_dir, f"{command}_manifest.txt"), "\n".join(lines) + "\n")


def _report(out_dir, name, kv: dict):
    text = "\n".join(f"{k}={v}" for k, v in kv.items()) + "\n"
    atomic_write_text(os.path.join(out_dir, name), text)


def _load_surrogate(path):
    with open(path) as fh:
        first = fh.readline().strip()
    if first == "format=gpr-model-v1":
        return optimize.GprSurrogate(gpr.load_model(path)), "gpr"
    if first == "format=mlp-model-v1":
        return optimize.MlpSurrogate(nn.load_model(path)), "nn"
    raise SchemaError("unrecognized model format", path=path, line=1)


def _parse_fixed(fixed_args) -> DesignPoint:
    point = oracle.REFERENCE_POINT
    for spec in fixed_args or []:
        if "=" not in spec:
            raise UsageError(f"--fixed expects name=value, got {spec!r}")
        name, value = spec.split("=", 1)
        if name not in design_space.POINT_FIELDS:
            raise UsageError(f"unknown design coordinate {name!r}")
        try:
            point = point.replace(**{name: float(value)})
        except ValueError:
            raise UsageError(f"--fixed {name}: {value!r} is not a number") from None
    return point


def _grid_counts(n: int) -> tuple:
    """Split n into (rows, cols) with rows >= cols, rows * cols == n."""
    c = int(np.sqrt(n))
    while c > 1 and n % c != 0:
        c -= 1
    return (n // c, c)


# ---------------------------------------------------------------- generate


def _cmd_generate(args) -> int:
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    bounds = DesignSpaceBounds.preset(args.preset)
    config = oracle.OracleConfig(noise_sigma=args.noise_sigma)
    if args.grid:
        specs = []
        for spec in args.grid:
            parts = spec.split(":")
            if len(parts) != 3 or parts[0] not in design_space.POINT_FIELDS:
                raise UsageError(f"--grid expects AXIS:LO:HI, got {spec!r}")
            specs.append((parts[0], float(parts[1]), float(parts[2])))
        if len(specs) != 2:
            raise UsageError("--grid needs exactly two axis specs")
        counts = _grid_counts(args.n)
        if counts[1] < 2:
            raise UsageError(f"--n {args.n} cannot form a 2-D grid (needs a factor >= 2)")
        dataset = oracle.grid_dataset(
            axes=(specs[0][0], specs[1][0]),
            intervals=((specs[0][1], specs[0][2]), (specs[1][1], specs[1][2])),
            fixed=oracle.REFERENCE_POINT,
            counts=counts,
            config=config,
        )
    else:
        dataset = oracle.generate_dataset(bounds, args.n, args.seed, config)
    csv_path = os.path.join(args.out, "dataset.csv")
    oracle.save_dataset(dataset, csv_path)
    plots.ct_histogram(dataset.y_array(), os.path.join(args.out, "dataset_ct_hist.png"))
    _write_manifest(
        args.out,
        "generate",
        {
            "n": args.n,
            "seed": args.seed,
            "preset": args.preset,
            "noise_sigma": format_float(args.noise_sigma),
            "grid": ";".join(args.grid) if args.grid else "",
            "oracle_config_hash": config.hash(),
            "rows_written": len(dataset),
        },
    )
    print(f"wrote {len(dataset)} rows to {csv_path}")
    return EXIT_OK


# ------------------------------------------------------------------- train


def _mse(pred, actual) -> float:
    return float(np.mean((np.asarray(pred) - np.asarray(actual)) ** 2))


def _cmd_train(args) -> int:
    data = oracle.load_dataset(args.data)
    test = oracle.load_dataset(args.test) if args.test else None
    report = {"model": args.model, "n_train_rows": len(data)}
    manifest = {
        "model": args.model,
        "data": args.data,
        "test": args.test or "",
        "seed": args.seed,
        "preset": args.preset,
    }

    if args.model == "gpr":
        params = gpr.KernelParams(sigma=args.sigma, length_scale=args.length_scale)
        bounds = DesignSpaceBounds.preset(args.preset)
        model = gpr.fit(data, params, bounds)
        model_path = os.path.join(args.out, "gpr.model")
        gpr.save_model(model, model_path)
        train_pred = model.predict_mean(data.points)
        report["train_mse"] = format_float(_mse(train_pred, data.y_array()))
        if test is not None:
            test_pred = model.predict_mean(test.points)
            report["test_mse"] = format_float(_mse(test_pred, test.y_array()))
            plots.predicted_vs_actual(
                test.y_array(), test_pred, os.path.join(args.out, "pred_vs_actual.png"), "GPR"
            )
        manifest.update(sigma=format_float(args.sigma), length_scale=format_float(args.length_scale))
        print(f"gpr model: n={len(data)} train_mse={report['train_mse']}"
              + (f" test_mse={report['test_mse']}" if test is not None else ""))
    elif args.model == "nn":
        if args.grid_search:
            if test is None:
                raise UsageError("--grid-search requires --test")
            best_config, rows = nn.grid_search(
                data, test, epochs=args.epochs, seed=args.seed
            )
            table_lines = ["hidden_layers,width,learning_rate,train_mse,test_mse,epochs_run,diverged"]
            for r in rows:
                table_lines.append(
                    f"{r.config.hidden_layers},{r.config.width},{format_float(r.config.learning_rate)},"
                    f"{format_float(r.report.final_train_mse)},{format_float(r.test_mse)},"
                    f"{r.report.epochs_run},{int(r.report.diverged)}"
                )
            atomic_write_text(
                os.path.join(args.out, "grid_search.csv"), "\n".join(table_lines) + "\n"
            )
            plots.grid_search_mse(rows, os.path.join(args.out, "grid_search_mse.png"))
            print("\n".join(table_lines))
            print(
                f"winner: n={best_config.hidden_layers} w={best_config.width} "
                f"lr={best_config.learning_rate:g}"
            )
            config = best_config
        else:
            config = nn.MlpConfig(
                hidden_layers=args.layers,
                width=args.width,
                learning_rate=args.lr,
                epochs=args.epochs,
                seed=args.seed,
            )
        model, train_report = nn.train(data, config)
        model_path = os.path.join(args.out, "nn.model")
        nn.save_model(model, model_path)
        report.update(
            hidden_layers=config.hidden_layers,
            width=config.width,
            learning_rate=format_float(config.learning_rate),
            epochs_run=train_report.epochs_run,
            diverged=int(train_report.diverged),
            train_mse=format_float(train_report.final_train_mse),
            holdout_mse=format_float(train_report.final_test_mse),
        )
        plots.training_history(model.history, os.path.join(args.out, "training_history.png"))
        if test is not None:
            test_pred = nn.predict_batch(model, test.points)
            report["test_mse"] = format_float(_mse(test_pred, test.y_array()))
            plots.predicted_vs_actual(
                test.y_array(), test_pred, os.path.join(args.out, "pred_vs_actual.png"), "NN"
            )
        manifest.update(
            epochs=args.epochs,
            grid_search=int(args.grid_search),
            hidden_layers=config.hidden_layers,
            width=config.width,
            learning_rate=format_float(config.learning_rate),
        )
        print(f"nn model: train_mse={report['train_mse']} holdout_mse={report['holdout_mse']}"
              + (f" test_mse={report['test_mse']}" if test is not None else ""))
    else:
        raise UsageError(f"unknown model {args.model!r}")

    _report(args.out, "train_report.txt", report)
    _write_manifest(args.out, "train", manifest)
    print(f"model written to {model_path}")
    return EXIT_OK


# ----------------------------------------------------------------- contour


def _cmd_contour(args) -> int:
    surrogate, kind = _load_surrogate(args.model)
    name1, name2 = [a.strip() for a in args.axes.split(",")]
    bounds = DesignSpaceBounds.preset(args.preset)

    def axis_range(spec, name):
        if spec:
            lo, hi = spec.split(":")
            return (float(lo), float(hi))
        if name in ("L_rr", "L_d"):  # contour-study ranges by default
            return getattr(DesignSpaceBounds.extended(), name)
        by_name = dict(zip(design_space.POINT_FIELDS, bounds.coordinate_intervals()))
        return by_name[name]

    intervals = (axis_range(args.range1, name1), axis_range(args.range2, name2))
    fixed = _parse_fixed(args.fixed)
    cells = design_space.grid((name1, name2), intervals, fixed, args.res, bounds)
    lines = [f"{name1},{name2},C_T_pred,feasible"]
    v1, v2, vals, feas = [], [], [], []
    for point, rep in cells:
        pred = surrogate.predict(point)
        a, b = getattr(point, name1), getattr(point, name2)
        v1.append(a)
        v2.append(b)
        vals.append(pred)
        feas.append(rep.feasible)
        lines.append(
            f"{format_float(a)},{format_float(b)},{format_float(pred)},{int(rep.feasible)}"
        )
    csv_path = os.path.join(args.out, "contour.csv")
    atomic_write_text(csv_path, "\n".join(lines) + "\n")
    fixed_label = ", ".join(
        f"{n}={getattr(fixed, n):g}"
        for n in design_space.POINT_FIELDS
        if n not in (name1, name2)
    )
    plots.contour(
        v1, v2, vals, feas, os.path.join(args.out, "contour.png"),
        names=(name1, name2), fixed_label=fixed_label,
    )
    _write_manifest(
        args.out,
        "contour",
        {
            "model": args.model,
            "model_kind": kind,
            "axes": args.axes,
            "res": args.res,
            "preset": args.preset,
            "range1": f"{intervals[0][0]}:{intervals[0][1]}",
            "range2": f"{intervals[1][0]}:{intervals[1][1]}",
            "fixed": fixed_label,
        },
    )
    print(f"wrote {len(cells)} grid rows to {csv_path} (fixed: {fixed_label})")
    return EXIT_OK


# ------------------------------------------------------------------- scale


def _cmd_scale(args) -> int:
    if args.action == "rated":
        report = {}
        for i, path in enumerate(args.curve):
            curve = scaling.read_torque_curve_csv(path)
            rated = scaling.rated_power(curve)
            prefix = f"curve{i}_" if len(args.curve) > 1 else ""
            report[f"{prefix}source"] = path
            report[f"{prefix}rated_power"] = format_float(rated.power)
            report[f"{prefix}omega_at_rated"] = format_float(rated.omega)
            report[f"{prefix}torque_at_rated"] = format_float(rated.torque)
            suffix = f"_{i}" if len(args.curve) > 1 else ""
            plots.torque_curve(curve, rated, os.path.join(args.out, f"torque_curve{suffix}.png"))
            print(f"{path}: rated_power={rated.power:.10g} at omega={rated.omega:.10g}")
        _report(args.out, "scale_rated.txt", report)
        manifest = {"action": "rated", "curves": ";".join(args.curve)}
    elif args.action == "fit":
        points = scaling.read_power_law_csv(args.data)
        if args.quantity == "torque":
            fit = scaling.rated_torque_law(points)
        else:
            fit = scaling.fit_power_law(points)
        report = {
            "quantity": args.quantity,
            "prefactor": format_float(fit.prefactor),
            "exponent_l": format_float(fit.exponent_l),
            "exponent_v": format_float(fit.exponent_v),
            "log_rms_residual": format_float(fit.residual),
            "dropped": ";".join(fit.dropped),
            "negative_indices": ";".join(str(i) for i in fit.negative_indices),
        }
        _report(args.out, "scale_fit.txt", report)
        pts_abs = [(a, b, abs(v)) for a, b, v in points]
        plots.power_law(pts_abs, fit, os.path.join(args.out, "power_law_fit.png"),
                        value_label=f"rated {args.quantity}")
        print(
            f"{args.quantity}: prefactor={fit.prefactor:.6g} "
            f"exponent_l={fit.exponent_l:.6g} exponent_v={fit.exponent_v:.6g} "
            f"residual={fit.residual:.3g}"
        )
        manifest = {"action": "fit", "data": args.data, "quantity": args.quantity}
    elif args.action == "similarity":
        params = scaling.similarity_from_speed(args.lambda_l, args.lambda_v)
        report = {
            "lambda_l": format_float(params.lambda_l),
            "lambda_t": format_float(params.lambda_t),
            "lambda_rho": format_float(params.lambda_rho),
            "lambda_v": format_float(params.lambda_v),
            "viscosity_mismatch": format_float(params.viscosity_mismatch),
        }
        _report(args.out, "scale_similarity.txt", report)
        print(
            f"lambda_t={params.lambda_t:.10g} lambda_rho=1 "
            f"viscosity_mismatch={params.viscosity_mismatch:.10g}"
        )
        manifest = {"action": "similarity", "lambda_l": args.lambda_l, "lambda_v": args.lambda_v}
    elif args.action == "efficiency":
        op = scaling.OperatingPoint(
            torque=args.torque,
            angular_velocity=args.omega,
            wind_speed=args.wind_speed,
            rho=args.rho,
            area=args.area,
        )
        res = scaling.efficiency(op)
        report = {
            "eta": format_float(res.eta),
            "betz_exceeded": int(res.betz_exceeded),
        }
        _report(args.out, "scale_efficiency.txt", report)
        print(f"eta={res.eta:.6g}" + (" BETZ-LIMIT-EXCEEDED" if res.betz_exceeded else ""))
        manifest = {
            "action": "efficiency",
            "torque": args.torque,
            "omega": args.omega,
            "wind_speed": args.wind_speed,
        }
    else:  # pragma: no cover - argparse restricts choices
        raise UsageError(f"unknown scale action {args.action!r}")
    _write_manifest(args.out, "scale", manifest)
    return EXIT_OK


# ---------------------------------------------------------------- optimize


def _cmd_optimize(args) -> int:
    bounds = DesignSpaceBounds.preset(args.preset)
    if args.budget < 100:
        raise UsageError("--budget must be >= 100")
    if args.oracle:
        surrogate, kind = optimize.OracleSurrogate(), "oracle"
    elif args.model:
        surrogate, kind = _load_surrogate(args.model)
    else:
        raise UsageError("provide --model FILE or --oracle")
    result = optimize.maximize(
        surrogate, bounds, budget=args.budget, seed=args.seed, baseline_ct=args.baseline_ct
    )
    verified = None
    if args.verify_oracle:
        verified = oracle.evaluate(result.x_star)
    design_space.write_points_csv(os.path.join(args.out, "x_star.csv"), [result.x_star])
    report = {
        "method": result.method,
        "surrogate": kind,
        "evaluations": result.evaluations,
        "predicted_ct_star": format_float(result.ct_star),
        "baseline_ct": format_float(args.baseline_ct),
        "improvement_vs_baseline": format_float(result.improvement_vs_baseline),
    }
    if verified is not None:
        report["oracle_verified_ct_star"] = format_float(verified)
    _report(args.out, "opt_result.txt", report)
    plots.optimization_summary(
        args.baseline_ct, result.ct_star, verified,
        os.path.join(args.out, "optimization_summary.png"),
    )
    _write_manifest(
        args.out,
        "optimize",
        {
            "surrogate": kind,
            "model": args.model or "",
            "budget": args.budget,
            "seed": args.seed,
            "preset": args.preset,
            "baseline_ct": format_float(args.baseline_ct),
        },
    )
    x = result.x_star
    print("x* = (" + ", ".join(f"{v:.6g}" for v in x.as_array()) + ")")
    print(f"predicted C_T* = {result.ct_star:.6g}")
    if verified is not None:
        print(f"oracle-verified C_T(x*) = {verified:.6g}")
    print(
        f"improvement vs baseline {args.baseline_ct:g}: "
        f"{result.improvement_vs_baseline:.4f}"
    )
    return EXIT_OK


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="RNG seed")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument(
        "--preset", choices=("default", "extended"), default="default",
        help="design-space bounds preset",
    )

    parser = argparse.ArgumentParser(
        prog="vawtopt",
        description="Surrogate-based design optimization toolkit for a twin-rotor VAWT",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="sample an oracle dataset")
    p.add_argument("--n", type=int, required=True, help="number of observations")
    p.add_argument("--noise-sigma", type=float, default=0.0, dest="noise_sigma")
    p.add_argument(
        "--grid", nargs=2, metavar="AXIS:LO:HI",
        help="tensor-grid mode over two axes (e.g. L_rr:0.36:1.6 L_d:0.15:1.35)",
    )
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("train", parents=[common], help="fit a surrogate model")
    p.add_argument("--model", choices=("gpr", "nn"), required=True)
    p.add_argument("--data", required=True, help="training dataset CSV")
    p.add_argument("--test", help="held-out test dataset CSV")
    p.add_argument("--sigma", type=float, default=0.5, help="gpr kernel amplitude")
    p.add_argument("--length-scale", type=float, default=0.5, dest="length_scale")
    p.add_argument("--grid-search", action="store_true", dest="grid_search",
                   help="train all 32 nn configurations")
    p.add_argument("--epochs", type=int, default=20000)
    p.add_argument("--layers", type=int, default=1, help="nn hidden layers")
    p.add_argument("--width", type=int, default=64, help="nn hidden width")
    p.add_argument("--lr", type=float, default=0.01, help="nn learning rate")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("contour", parents=[common], help="export a 2-D prediction grid")
    p.add_argument("--model", required=True, help="trained model file")
    p.add_argument("--axes", default="L_rr,L_d", help="pair of varied coordinates")
    p.add_argument("--res", type=int, default=50, help="grid resolution per axis")
    p.add_argument("--range1", help="first axis range LO:HI")
    p.add_argument("--range2", help="second axis range LO:HI")
    p.add_argument("--fixed", action="append", metavar="NAME=VALUE",
                   help="override a fixed coordinate (repeatable)")
    p.set_defaults(func=_cmd_contour)

    p = sub.add_parser("scale", parents=[common], help="similarity & power-law analysis")
    p.add_argument("action", choices=("rated", "fit", "similarity", "efficiency"))
    p.add_argument("--curve", action="append", default=[], help="torque-curve CSV (repeatable)")
    p.add_argument("--data", help="power-law points CSV (lambda_l,lambda_v,value)")
    p.add_argument("--quantity", choices=("power", "torque"), default="power")
    p.add_argument("--lambda-l", type=float, default=1.0, dest="lambda_l")
    p.add_argument("--lambda-v", type=float, default=1.0, dest="lambda_v")
    p.add_argument("--torque", type=float, help="torque [N m] for efficiency")
    p.add_argument("--omega", type=float, help="rotor speed [rad/s]")
    p.add_argument("--wind-speed", type=float, dest="wind_speed", help="wind speed [m/s]")
    p.add_argument("--rho", type=float, default=1.225)
    p.add_argument("--area", type=float, default=3.0)
    p.set_defaults(func=_cmd_scale)

    p = sub.add_parser("optimize", parents=[common], help="maximize predicted C_T")
    p.add_argument("--model", help="trained model file")
    p.add_argument("--oracle", action="store_true", help="optimize the oracle itself")
    p.add_argument("--budget", type=int, default=10000, help="evaluation budget")
    p.add_argument("--verify-oracle", action="store_true", dest="verify_oracle",
                   help="also report the oracle value at x*")
    p.add_argument("--baseline-ct", type=float, default=optimize.DEFAULT_BASELINE_CT,
                   dest="baseline_ct")
    p.set_defaults(func=_cmd_optimize)
    return parser


def _validate_scale_args(args):
    if args.command != "scale":
        return
    if args.action == "rated" and not args.curve:
        raise UsageError("scale rated requires --curve")
    if args.action == "fit" and not args.data:
        raise UsageError("scale fit requires --data")
    if args.action == "efficiency":
        missing = [
            f"--{n.replace('_', '-')}"
            for n in ("torque", "omega", "wind_speed")
            if getattr(args, n) is None
        ]
        if missing:
            raise UsageError("scale efficiency requires " + ", ".join(missing))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _validate_scale_args(args)
        os.makedirs(args.out, exist_ok=True)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _OPT_ERRORS as exc:
        print(f"optimization failed: {exc}", file=sys.stderr)
        return EXIT_OPT
    except _DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
