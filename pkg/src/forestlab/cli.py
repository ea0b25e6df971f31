"""Command-line entry point tying the modules into reproducible workflows.

Subcommands: ``simulate`` (run the scenario grid), ``scenarios`` (list
it), ``fit`` / ``predict`` / ``evaluate`` (model a user CSV and score
predictions), ``heatmap`` (export probability-grid slices), and
``dgm-check`` (validate the built-in designs' discrimination and event
fraction).

Every command is pure given its arguments and seed: outputs are
byte-identical across invocations except for the timing block of
``simulate``'s metadata file.  Each flag can also be supplied through an
environment variable named ``FORESTLAB_<FLAG>``; precedence is flag,
then environment, then config file, then built-in default.  Exit codes:
0 success, 1 invalid input (the message names the offending key or
column), 2 completed with failures (failed runs, or designs out of
tolerance).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import asdict

import numpy as np

from . import __version__
from .dataspace import compute_grid, export_grid_csv, export_ppm, overlay_cases, slice_from_json
from .forest import ForestParams, fit_forest, load_forest, predict_proba, save_forest
from .glm import GlmFit, fit_binary_logistic, fit_multinomial, load_glm, predict_glm, save_glm
from .harness import (
    DEFAULT_MASTER_SEED,
    SimulationConfig,
    compile_filter,
    effective_min_node_size,
    enumerate_scenarios,
    run_simulation,
)
from .metrics import (
    brier,
    brier_multiclass,
    c_statistic,
    calibration_slope,
    logloss,
    logloss_multiclass,
    pdi,
)
from .rng import derive_seed, make_rng
from .synthetic import builtin_designs, generate_dataset, read_dataset_csv

__all__ = ["main"]

ENV_PREFIX = "FORESTLAB_"


class CliError(Exception):
    """Invalid input; rendered as an error message and exit code 1."""


def _env(name: str) -> str | None:
    return os.environ.get(ENV_PREFIX + name)


def _resolve(flag_value, env_name: str, cast, fallback):
    """flag > environment > fallback (config value or default)."""
    if flag_value is not None:
        return flag_value
    raw = _env(env_name)
    if raw is not None:
        try:
            return cast(raw)
        except (TypeError, ValueError):
            raise CliError(f"invalid value for {ENV_PREFIX}{env_name}: {raw!r}") from None
    return fallback


def _load_model(path: str):
    """A fitted forest (.npz) or GLM (.json), detected by content."""
    try:
        if path.endswith(".npz"):
            return load_forest(path)
        if path.endswith(".json"):
            return load_glm(path)
    except (OSError, ValueError, KeyError) as exc:
        raise CliError(f"cannot load model {path!r}: {exc}") from None
    for loader in (load_forest, load_glm):
        try:
            return loader(path)
        except Exception:
            continue
    raise CliError(f"cannot load model {path!r}: not a saved forest or GLM")


def _model_predict(model, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(model, GlmFit):
        return predict_glm(model, x), np.asarray(model.classes)
    return predict_proba(model, x), np.asarray(model.classes)


def _read_dataset(path: str):
    try:
        return read_dataset_csv(path)
    except OSError as exc:
        raise CliError(f"cannot read {path!r}: {exc}") from None
    except ValueError as exc:
        raise CliError(f"{path}: {exc}") from None


# ---------------------------------------------------------------- simulate


def _cmd_simulate(args) -> int:
    config_path = _resolve(args.config, "CONFIG", str, None)
    mapping: dict = {}
    if config_path is not None:
        try:
            with open(config_path, encoding="utf-8") as fh:
                mapping = json.load(fh)
        except OSError as exc:
            raise CliError(f"cannot read config {config_path!r}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise CliError(f"config file {config_path!r} is not valid JSON: {exc}") from None
        if not isinstance(mapping, dict):
            raise CliError("config must be a JSON object")
    overrides = {
        "master_seed": _resolve(args.seed, "SEED", int, None),
        "r_runs": _resolve(args.runs, "RUNS", int, None),
        "n_test": _resolve(args.test_size, "TEST_SIZE", int, None),
        "filter": _resolve(args.filter, "FILTER", str, None),
        "workers": _resolve(args.workers, "WORKERS", int, None),
        "out_dir": _resolve(args.out, "OUT", str, None),
    }
    for key, value in overrides.items():
        if value is not None:
            mapping[key] = value
    mapping.setdefault("out_dir", ".")
    try:
        config = SimulationConfig.from_mapping(mapping)
    except (TypeError, ValueError) as exc:
        raise CliError(str(exc)) from None
    if not os.path.isdir(config.out_dir):
        raise CliError(f"output directory {config.out_dir!r} does not exist")

    started = time.time()
    result = run_simulation(config, progress=lambda sid: print(sid, file=sys.stderr, flush=True))
    wall = time.time() - started

    metadata = {
        "command": "simulate",
        "config": config.to_mapping(),
        "versions": _versions(),
        "scenarios_run": result.scenarios_run,
        "retries": result.retries,
        "failed_runs": result.n_failed_runs,
        "failures": {
            sid: [asdict(f) for f in fails] for sid, fails in sorted(result.failures.items())
        },
        "timing": {
            "started_unix": started,
            "wall_time_seconds": wall,
        },
    }
    with open(os.path.join(config.out_dir, "metadata.json"), "w", encoding="utf-8") as fh:
        json.dump(metadata, fh, indent=2)
        fh.write("\n")
    print(
        f"{result.scenarios_run} scenarios -> {os.path.join(config.out_dir, 'summary.csv')}"
        + (f" ({result.n_failed_runs} failed runs)" if result.n_failed_runs else "")
    )
    return 2 if result.n_failed_runs else 0


def _versions() -> dict:
    versions = {
        "forestlab": __version__,
        "python": sys.version.split()[0],
        "numpy": np.__version__,
    }
    try:
        import numba

        versions["numba"] = numba.__version__
    except ImportError:
        pass
    return versions


# ---------------------------------------------------------------- scenarios


def _cmd_scenarios(args) -> int:
    pattern = _resolve(args.filter, "FILTER", str, None)
    compiled = compile_filter(pattern) if pattern is not None else None
    mapping = args.node_size_mapping
    for scenario in enumerate_scenarios():
        if compiled is not None and not compiled.match(scenario.scenario_id):
            continue
        if not args.describe:
            print(scenario.scenario_id)
            continue
        d = scenario.design
        effective = effective_min_node_size(scenario.min_node_size, mapping)
        print(
            f"{scenario.scenario_id}\t{d.distribution}\tpredictors={d.n_predictors}"
            f"\tnoise={d.n_noise}\trho={d.correlation}\ttarget_auc={d.target_auc}"
            f"\tstrength={d.strength}\tn_train={scenario.n_train}"
            f"\tnode_size={scenario.min_node_size}(fits {effective})"
        )
    return 0


# ---------------------------------------------------------------- fit


def _split_indices(n: int, test_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic uniform-permutation split; test block first."""
    rng = make_rng(derive_seed(seed, "train-test-split", n))
    perm = rng.permutation(n)
    n_test = int(round(n * test_fraction))
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def _cmd_fit(args) -> int:
    seed = _resolve(args.seed, "SEED", int, DEFAULT_MASTER_SEED)
    test_fraction = _resolve(args.test_size, "TEST_SIZE", float, 0.3)
    if not 0.0 <= test_fraction < 1.0:
        raise CliError("--test-size must be in [0, 1)")
    out = _resolve(args.out, "OUT", str, None)
    if out is None:
        out = "model.npz" if args.model == "forest" else "model.json"
    data = _read_dataset(args.data)
    train_idx, test_idx = _split_indices(data.n_cases, test_fraction, seed)
    if len(train_idx) < 2:
        raise CliError("training split has fewer than 2 cases; lower --test-size")
    x_train, y_train = data.x[train_idx], data.y[train_idx]

    if args.model == "forest":
        params = ForestParams(
            n_tree=args.trees,
            mtry=args.mtry,
            min_node_size=args.min_node_size,
            node_size_rule=args.node_size_rule,
            seed=seed,
        )
        from .synthetic import Dataset

        model = fit_forest(Dataset(x=x_train, y=y_train), params)
        save_forest(model, out)
        probs_train = predict_proba(model, x_train)
        classes = np.asarray(model.classes)
        converged = True
    else:
        if len(np.unique(y_train)) == 2:
            model = fit_binary_logistic(x_train, y_train, ridge=args.ridge)
        else:
            model = fit_multinomial(x_train, y_train, ridge=args.ridge)
        save_glm(model, out)
        probs_train = predict_glm(model, x_train)
        classes = np.asarray(model.classes)
        converged = model.converged

    meta = {
        "command": "fit",
        "model_type": args.model,
        "model_file": out,
        "data": args.data,
        "seed": seed,
        "test_fraction": test_fraction,
        "n_cases": data.n_cases,
        "n_train": int(len(train_idx)),
        "n_test": int(len(test_idx)),
        "classes": [int(c) for c in classes],
        "converged": bool(converged),
        "train_metrics": _metric_block(probs_train, y_train, classes),
    }
    if len(test_idx):
        probs_test, _ = _model_predict(model, data.x[test_idx])
        meta["test_metrics"] = _metric_block(probs_test, data.y[test_idx], classes)
    meta_path = out + ".meta.json"
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
    print(f"saved {args.model} model to {out} (metrics in {meta_path})")
    return 0


def _metric_block(probs: np.ndarray, y: np.ndarray, classes: np.ndarray) -> dict:
    """c-statistic (or PDI), calibration slope, Brier score, log loss."""
    k = len(classes)
    if k == 2:
        p1 = probs[:, 1]
        fit = calibration_slope(p1, y)
        return {
            "n": int(len(y)),
            "c_statistic": c_statistic(p1, y),
            "calibration_slope": None if not fit.converged else fit.slope,
            "slope_converged": bool(fit.converged),
            "brier": brier(p1, y),
            "logloss": logloss(p1, y),
        }
    return {
        "n": int(len(y)),
        "pdi": pdi(probs, y),
        "calibration_slope": None,
        "slope_converged": None,
        "brier": brier_multiclass(probs, y),
        "logloss": logloss_multiclass(probs, y),
    }


# ---------------------------------------------------------------- predict


def _cmd_predict(args) -> int:
    model = _load_model(args.model)
    data = _read_dataset(args.data)
    out = _resolve(args.out, "OUT", str, "predictions.csv")
    try:
        probs, classes = _model_predict(model, data.x)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    header = "id," + ",".join(f"p_class{int(c)}" for c in classes)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        fh.write(header + "\n")
        for i in range(len(probs)):
            fh.write(str(i) + "," + ",".join(format(v, ".17g") for v in probs[i]) + "\n")
    print(f"wrote {len(probs)} predictions to {out}")
    return 0


# ---------------------------------------------------------------- evaluate


def _read_predictions(path: str) -> tuple[np.ndarray, np.ndarray]:
    """Prediction CSV -> (probability matrix, class labels)."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            header = fh.readline().rstrip("\n").split(",")
            if not header or header[0] != "id":
                raise CliError(f"{path}: expected first column 'id', found {header[0]!r}")
            classes = []
            for name in header[1:]:
                if not name.startswith("p_class"):
                    raise CliError(f"{path}: unexpected column {name!r}; expected p_class<label>")
                try:
                    classes.append(int(name[len("p_class"):]))
                except ValueError:
                    raise CliError(f"{path}: unexpected column {name!r}") from None
            if not classes:
                raise CliError(f"{path}: no p_class<label> columns found")
            raw = np.loadtxt(fh, delimiter=",", dtype=np.float64, ndmin=2)
    except OSError as exc:
        raise CliError(f"cannot read {path!r}: {exc}") from None
    if raw.shape[1] != len(classes) + 1:
        raise CliError(f"{path}: rows have {raw.shape[1]} fields, header has {len(classes) + 1}")
    return raw[:, 1:], np.asarray(classes, dtype=np.int64)


def _cmd_evaluate(args) -> int:
    probs, classes = _read_predictions(args.pred)
    data = _read_dataset(args.data)
    if len(probs) != data.n_cases:
        raise CliError(
            f"{args.pred} has {len(probs)} rows but {args.data} has {data.n_cases}"
        )
    present = np.unique(data.y)
    missing = [int(c) for c in present if c not in set(classes.tolist())]
    if missing:
        raise CliError(f"{args.pred}: no p_class{missing[0]} column for observed class {missing[0]}")
    # reorder probabilities to ascending class label before scoring
    order = np.argsort(classes)
    probs = probs[:, order]
    classes = classes[order]
    y = np.searchsorted(classes, data.y)
    block = _metric_block(probs, y, classes)
    text = json.dumps(block, indent=2) + "\n"
    out = _resolve(args.out, "OUT", str, None)
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote metrics to {out}")
    return 0


# ---------------------------------------------------------------- heatmap


def _cmd_heatmap(args) -> int:
    model = _load_model(args.model)
    try:
        with open(args.slice, encoding="utf-8") as fh:
            spec = slice_from_json(fh.read())
    except OSError as exc:
        raise CliError(f"cannot read slice {args.slice!r}: {exc}") from None
    except ValueError as exc:
        raise CliError(str(exc)) from None
    out = _resolve(args.out, "OUT", str, "heatmap")
    try:
        grid = compute_grid(model, spec, scale=args.scale)
        if args.data is not None:
            grid = overlay_cases(grid, _read_dataset(args.data), spec)
    except (TypeError, ValueError) as exc:
        raise CliError(str(exc)) from None
    export_grid_csv(grid, out + ".csv")
    export_ppm(grid, out + ".ppm")
    print(f"wrote {out}.csv and {out}.ppm")
    return 0


# ---------------------------------------------------------------- dgm-check


def _cmd_dgm_check(args) -> int:
    seed = _resolve(args.seed, "SEED", int, DEFAULT_MASTER_SEED)
    pattern = _resolve(args.filter, "FILTER", str, None)
    compiled = compile_filter(pattern) if pattern is not None else None
    rows = []
    worst_c = worst_f = 0.0
    for design in builtin_designs():
        if compiled is not None and not compiled.match(design.label):
            continue
        rng = make_rng(derive_seed(seed, design.seed_label, "dgm-check"))
        data = generate_dataset(design, args.n, rng)
        c = c_statistic(data.true_p, data.y)
        fraction = float(data.y.mean())
        dev_c = abs(c - design.target_auc)
        dev_f = abs(fraction - 0.2)
        worst_c = max(worst_c, dev_c)
        worst_f = max(worst_f, dev_f)
        ok = dev_c <= args.tolerance and dev_f <= args.tolerance
        rows.append(
            {
                "label": design.label,
                "target_auc": design.target_auc,
                "c_statistic": c,
                "event_fraction": fraction,
                "within_tolerance": ok,
            }
        )
        print(
            f"{design.label:28} c={c:.4f} (target {design.target_auc:.2f})"
            f"  event fraction={fraction:.4f}  {'ok' if ok else 'OUT OF TOLERANCE'}"
        )
    if not rows:
        raise CliError(f"no designs match filter {pattern!r}")
    all_ok = all(r["within_tolerance"] for r in rows)
    print(
        f"{len(rows)} designs at n={args.n}: worst |c - target| = {worst_c:.4f}, "
        f"worst |fraction - 0.2| = {worst_f:.4f}"
    )
    out = _resolve(args.out, "OUT", str, None)
    if out is not None:
        payload = {
            "n": args.n,
            "seed": seed,
            "tolerance": args.tolerance,
            "designs": rows,
            "all_within_tolerance": all_ok,
        }
        with open(out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
        print(f"wrote report to {out}")
    return 0 if all_ok else 2


# ---------------------------------------------------------------- parser


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="forestlab",
        description="Probability-forest simulation laboratory.",
    )
    parser.add_argument("--version", action="version", version=f"forestlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the scenario grid and export a summary CSV")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--runs", type=int, help="simulation runs per scenario")
    p.add_argument("--test-size", type=int, help="test cases per design")
    p.add_argument("--filter", help="scenario-id glob (* within a field, ** across)")
    p.add_argument("--workers", type=int, help="threads across runs")
    p.add_argument("--out", help="output directory (must exist)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("scenarios", help="list the built-in scenario grid")
    p.add_argument("--filter", help="scenario-id glob")
    p.add_argument("--describe", action="store_true", help="one descriptive line per scenario")
    p.add_argument(
        "--node-size-mapping",
        choices=("inverted", "literal"),
        default="inverted",
        help="mapping used for the 'fits N' annotation of --describe",
    )
    p.set_defaults(func=_cmd_scenarios)

    p = sub.add_parser("fit", help="fit a forest or GLM on a dataset CSV")
    p.add_argument("--data", required=True, help="CSV with columns x1..xp,y[,true_p]")
    p.add_argument("--model", choices=("forest", "glm"), default="forest")
    p.add_argument("--seed", type=int, help="split and forest seed")
    p.add_argument("--test-size", type=float, help="held-out fraction (default 0.3)")
    p.add_argument("--out", help="model file (.npz for forest, .json for glm)")
    p.add_argument("--trees", type=int, default=500, help="forest: number of trees")
    p.add_argument("--mtry", type=int, help="forest: candidate features per split")
    p.add_argument("--min-node-size", type=int, default=2, help="forest: node size floor")
    p.add_argument(
        "--node-size-rule",
        choices=("child", "parent"),
        default="child",
        help="forest: whether the floor constrains children or the parent",
    )
    p.add_argument("--ridge", type=float, default=0.0, help="glm: L2 penalty")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("predict", help="write class-probability predictions for a CSV")
    p.add_argument("--model", required=True, help="model file from fit")
    p.add_argument("--data", required=True, help="CSV with columns x1..xp[,y][,true_p]")
    p.add_argument("--out", help="prediction CSV (default predictions.csv)")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("evaluate", help="score a prediction CSV against observed outcomes")
    p.add_argument("--pred", required=True, help="prediction CSV from predict")
    p.add_argument("--data", required=True, help="CSV with the observed y column")
    p.add_argument("--out", help="metrics JSON (default: print to stdout)")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("heatmap", help="export a probability heatmap over a 2-D slice")
    p.add_argument("--model", required=True, help="model file from fit")
    p.add_argument("--slice", required=True, help="slice JSON file")
    p.add_argument("--data", help="optional CSV of cases to overlay")
    p.add_argument("--scale", choices=("bounded", "fixed"), default="bounded")
    p.add_argument("--out", help="output prefix (default heatmap)")
    p.set_defaults(func=_cmd_heatmap)

    p = sub.add_parser("dgm-check", help="validate built-in designs' c and event fraction")
    p.add_argument("--n", type=int, default=100_000, help="cases to draw per design")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--filter", help="design-label glob")
    p.add_argument("--tolerance", type=float, default=0.01)
    p.add_argument("--out", help="optional JSON report path")
    p.set_defaults(func=_cmd_dgm_check)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
