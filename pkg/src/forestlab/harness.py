"""Scenario grid and the simulation engine that drives the forest study.

A scenario pairs one synthetic design with a training-set size and a
nominal minimum node size.  Running a scenario repeats the same
experiment over many simulation runs: each run draws a fresh training
set, grows a probability forest, and scores it on a test set shared by
every scenario of that design.  Per-run metrics are aggregated into one
summary row per scenario and exported as CSV.

Every random draw is seeded through 64-bit hash mixing of
(master seed, labels, run index), so any subset of scenarios or runs
reproduces in isolation and results do not depend on execution order or
thread count.  Designs that share a base seed label (a design and its
noise-padded variant) draw identical informative predictors and
outcomes, pinning their comparison to the extra predictors alone.
"""

from __future__ import annotations

import json
import os
import re
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from .forest import ForestParams, fit_forest, predict_proba
from .metrics import (
    MseDecomposition,
    RunMetrics,
    bias_variance,
    brier,
    c_statistic,
    calibration_slope,
    discrimination_loss,
    logloss,
    summarize,
)
from .rng import derive_seed, make_rng
from .synthetic import (
    Dataset,
    LogisticDesign,
    builtin_designs,
    design_by_label,
    generate_dataset,
)

__all__ = [
    "DEFAULT_MASTER_SEED",
    "NODE_SIZE_LABELS",
    "PREDICTION_VALUE_BUDGET",
    "RETRY_CAP",
    "RUN_COLUMNS",
    "SUMMARY_COLUMNS",
    "TRAIN_SIZES",
    "RunFailure",
    "Scenario",
    "ScenarioResult",
    "SimulationConfig",
    "SimulationResult",
    "SummaryRow",
    "compile_filter",
    "effective_min_node_size",
    "enumerate_scenarios",
    "make_test_set",
    "parse_scenario_id",
    "read_summary",
    "run_scenario",
    "run_simulation",
    "select_scenarios",
    "write_run_metrics",
    "write_summary",
]

DEFAULT_MASTER_SEED = 3000
TRAIN_SIZES = (200, 4000)
NODE_SIZE_LABELS = (2, 20)
NODE_SIZE_RULES = ("child", "parent")
NODE_SIZE_MAPPINGS = ("inverted", "literal")

# A failed run (e.g. a single-class training draw) is redrawn with a
# derived retry seed at most this many times before being recorded.
RETRY_CAP = 5

# Largest run-by-observation prediction matrix, in float64 values, held
# in memory; larger scenarios spill to a temporary on-disk buffer.
PREDICTION_VALUE_BUDGET = 200_000_000

_INVERTED_NODE_SIZES = {2: 20, 20: 2}


@dataclass(frozen=True)
class Scenario:
    """One cell of the simulation grid.

    ``min_node_size`` is the nominal value carried in the scenario id;
    the simulation config's ``node_size_mapping`` decides the value the
    forest is actually fitted with.
    """

    design: LogisticDesign
    n_train: int
    min_node_size: int

    def __post_init__(self) -> None:
        if self.n_train < 2:
            raise ValueError("n_train must be >= 2")
        if self.min_node_size < 1:
            raise ValueError("min_node_size must be >= 1")

    @property
    def scenario_id(self) -> str:
        return f"{self.design.label}_{self.min_node_size}_{self.n_train}"


def parse_scenario_id(scenario_id: str) -> Scenario:
    """Inverse of ``Scenario.scenario_id``.

    The last two underscore-separated fields are the nominal minimum
    node size and the training-set size; the rest is a design label.
    """
    parts = scenario_id.rsplit("_", 2)
    if len(parts) != 3:
        raise ValueError(f"malformed scenario id {scenario_id!r}")
    label, mns_text, n_text = parts
    try:
        min_node_size = int(mns_text)
        n_train = int(n_text)
    except ValueError:
        raise ValueError(f"malformed scenario id {scenario_id!r}") from None
    return Scenario(design=design_by_label(label), n_train=n_train, min_node_size=min_node_size)


def enumerate_scenarios() -> list[Scenario]:
    """The full built-in grid: every design crossed with training sizes
    (200, 4000) and nominal node sizes (2, 20).

    Order is deterministic: designs in built-in order, node size varying
    fastest, then training size.
    """
    grid = []
    for design in builtin_designs():
        for n_train in TRAIN_SIZES:
            for min_node_size in NODE_SIZE_LABELS:
                grid.append(Scenario(design=design, n_train=n_train, min_node_size=min_node_size))
    return grid


def effective_min_node_size(nominal: int, mapping: str) -> int:
    """Map a scenario's nominal node size to the value the forest fits.

    ``"inverted"`` swaps the nominal values 2 and 20 and leaves any
    other value unchanged; ``"literal"`` passes everything through.
    """
    if mapping not in NODE_SIZE_MAPPINGS:
        raise ValueError(f"node_size_mapping must be one of {NODE_SIZE_MAPPINGS}")
    if mapping == "inverted":
        return _INVERTED_NODE_SIZES.get(nominal, nominal)
    return nominal


@dataclass(frozen=True)
class SimulationConfig:
    """Knobs for a simulation pass.

    ``filter`` is a glob matched against scenario ids (``*``/``?``
    match within one underscore-separated field, ``**`` across fields);
    None selects the full grid.  ``node_size_mapping`` controls how each
    scenario's nominal node size translates into the fitted forest (see
    ``effective_min_node_size``); the default reproduces the reference
    summaries this laboratory targets.  ``workers`` is the thread count
    used across runs within a scenario; outputs are byte-identical for
    any value.  ``write_runs`` additionally exports per-run metrics next
    to the summary.
    """

    master_seed: int = DEFAULT_MASTER_SEED
    r_runs: int = 100
    n_test: int = 10_000
    n_tree: int = 500
    node_size_rule: str = "parent"
    node_size_mapping: str = "inverted"
    filter: str | None = None
    workers: int = 1
    out_dir: str | None = None
    write_runs: bool = False

    def __post_init__(self) -> None:
        _require_int(self, "master_seed", minimum=0)
        _require_int(self, "r_runs", minimum=1)
        _require_int(self, "n_test", minimum=2)
        _require_int(self, "n_tree", minimum=1)
        _require_int(self, "workers", minimum=1)
        _require_choice(self, "node_size_rule", NODE_SIZE_RULES)
        _require_choice(self, "node_size_mapping", NODE_SIZE_MAPPINGS)
        _require_optional_str(self, "filter")
        _require_optional_str(self, "out_dir")
        if not isinstance(self.write_runs, bool):
            raise ValueError("config key 'write_runs': expected true or false")

    @classmethod
    def from_mapping(cls, mapping: dict) -> "SimulationConfig":
        """Build a config from a JSON-style mapping, rejecting unknown
        keys by name."""
        if not isinstance(mapping, dict):
            raise ValueError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        for key in mapping:
            if key not in known:
                raise ValueError(f"unknown config key {key!r}")
        return cls(**mapping)

    @classmethod
    def from_json(cls, path: str) -> "SimulationConfig":
        with open(path, encoding="utf-8") as fh:
            try:
                mapping = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValueError(f"config file {path!r} is not valid JSON: {exc}") from None
        return cls.from_mapping(mapping)

    def to_mapping(self) -> dict:
        """Plain-dict echo of every knob, for metadata output."""
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _require_int(config: SimulationConfig, name: str, minimum: int) -> None:
    value = getattr(config, name)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError(f"config key {name!r}: expected an integer")
    if value < minimum:
        raise ValueError(f"config key {name!r}: must be >= {minimum}")


def _require_choice(config: SimulationConfig, name: str, choices: tuple[str, ...]) -> None:
    value = getattr(config, name)
    if value not in choices:
        raise ValueError(f"config key {name!r}: must be one of {choices}")


def _require_optional_str(config: SimulationConfig, name: str) -> None:
    value = getattr(config, name)
    if value is not None and not isinstance(value, str):
        raise ValueError(f"config key {name!r}: expected a string or null")


def compile_filter(pattern: str) -> "re.Pattern[str]":
    """Compile a scenario-id glob.

    Scenario ids are underscore-delimited, so the wildcards respect the
    delimiter the way path globs respect ``/``: ``*`` and ``?`` match
    within a single field, ``**`` matches across fields.  A design
    label and its noise-padded variant therefore never match the same
    single-starred pattern.
    """
    out = []
    i = 0
    while i < len(pattern):
        ch = pattern[i]
        if ch == "*":
            if pattern[i + 1 : i + 2] == "*":
                out.append(".*")
                i += 2
            else:
                out.append("[^_]*")
                i += 1
        elif ch == "?":
            out.append("[^_]")
            i += 1
        else:
            out.append(re.escape(ch))
            i += 1
    return re.compile("".join(out) + r"\Z")


def select_scenarios(config: SimulationConfig) -> list[Scenario]:
    """The enumerated grid, narrowed by the config's glob filter."""
    grid = enumerate_scenarios()
    if config.filter is None:
        return grid
    pattern = compile_filter(config.filter)
    return [s for s in grid if pattern.match(s.scenario_id)]


def make_test_set(design: LogisticDesign, config: SimulationConfig) -> Dataset:
    """One fixed test set per design, shared by all of its scenarios.

    The seed derives from the design's base seed label, so a design and
    its noise-padded variant are scored against identical outcomes.
    """
    rng = make_rng(derive_seed(config.master_seed, design.seed_label, "test"))
    return generate_dataset(design, config.n_test, rng)


@dataclass(frozen=True)
class SummaryRow:
    """Aggregate of one scenario's runs.

    Slope medians cover converged calibration fits only;
    ``n_slope_nonconverged`` counts the excluded fits, training and test
    together.  The CSV schema carries every field except that count.
    """

    scenario: str
    median_train_auc: float
    iqr_train_auc: float
    median_test_auc: float
    iqr_test_auc: float
    median_train_slope: float
    iqr_train_slope: float
    median_test_slope: float
    iqr_test_slope: float
    mean_variance: float
    sd_variance: float
    mean_sq_bias: float
    sd_sq_bias: float
    mean_mse: float
    sd_mse: float
    true_auc: float
    discrimination_loss: float
    runs_completed: int
    n_slope_nonconverged: int = 0


SUMMARY_COLUMNS = (
    "scenario",
    "median_train_auc",
    "iqr_train_auc",
    "median_test_auc",
    "iqr_test_auc",
    "median_train_slope",
    "iqr_train_slope",
    "median_test_slope",
    "iqr_test_slope",
    "mean_variance",
    "sd_variance",
    "mean_sq_bias",
    "sd_sq_bias",
    "mean_mse",
    "sd_mse",
    "true_auc",
    "discrimination_loss",
    "runs_completed",
)

RUN_COLUMNS = (
    "run",
    "train_auc",
    "test_auc",
    "train_slope",
    "test_slope",
    "train_logloss",
    "test_logloss",
    "train_brier",
    "test_brier",
    "train_slope_converged",
    "test_slope_converged",
)


@dataclass(frozen=True)
class RunFailure:
    """A run that exhausted its retry budget; recorded, then skipped."""

    run_index: int
    attempts: int
    error: str


@dataclass
class ScenarioResult:
    """Everything run_scenario keeps: the summary row, per-run metrics
    for completed runs (paired with their run indices), recorded
    failures, and the total number of retry redraws."""

    scenario: Scenario
    summary: SummaryRow
    completed: list[tuple[int, RunMetrics]]
    failures: list[RunFailure]
    retries: int
    predictions: np.ndarray | None = None


class _RunGaveUp(RuntimeError):
    pass


def _run_once(
    scenario: Scenario,
    config: SimulationConfig,
    test: Dataset,
    run_index: int,
) -> tuple[RunMetrics, np.ndarray, int]:
    """One simulation run: draw, fit, score.  Returns the metrics, the
    test-set event probabilities, and the number of retries used."""
    effective_mns = effective_min_node_size(scenario.min_node_size, config.node_size_mapping)
    forest_seed = derive_seed(config.master_seed, scenario.scenario_id, "forest", run_index)
    last_error = "no attempt made"
    for attempt in range(RETRY_CAP + 1):
        seed_parts = [
            config.master_seed,
            scenario.design.seed_label,
            scenario.n_train,
            "train",
            run_index,
        ]
        if attempt:
            seed_parts += ["retry", attempt]
        train_rng = make_rng(derive_seed(*seed_parts))
        try:
            train = generate_dataset(scenario.design, scenario.n_train, train_rng)
            params = ForestParams(
                n_tree=config.n_tree,
                min_node_size=effective_mns,
                node_size_rule=config.node_size_rule,
                seed=forest_seed,
            )
            forest = fit_forest(train, params)
        except ValueError as exc:
            last_error = str(exc)
            continue
        train_p = predict_proba(forest, train.x)[:, 1]
        test_p = predict_proba(forest, test.x)[:, 1]
        train_fit = calibration_slope(train_p, train.y)
        test_fit = calibration_slope(test_p, test.y)
        metrics = RunMetrics(
            train_c=c_statistic(train_p, train.y),
            test_c=c_statistic(test_p, test.y),
            train_slope=train_fit.slope,
            test_slope=test_fit.slope,
            train_logloss=logloss(train_p, train.y),
            test_logloss=logloss(test_p, test.y),
            train_brier=brier(train_p, train.y),
            test_brier=brier(test_p, test.y),
            train_slope_converged=train_fit.converged,
            test_slope_converged=test_fit.converged,
        )
        return metrics, test_p, attempt
    raise _RunGaveUp(last_error)


class _PredictionBuffer:
    """Run-by-observation prediction matrix, spilled to a temporary file
    when it would exceed PREDICTION_VALUE_BUDGET float64 values."""

    def __init__(self, n_runs: int, n_obs: int):
        self._path: str | None = None
        if n_runs * n_obs <= PREDICTION_VALUE_BUDGET:
            self.array: np.ndarray | None = np.empty((n_runs, n_obs), dtype=np.float64)
        else:
            fd, path = tempfile.mkstemp(suffix=".predictions.f64")
            os.close(fd)
            self._path = path
            self.array = np.memmap(path, dtype=np.float64, mode="w+", shape=(n_runs, n_obs))

    def close(self) -> None:
        self.array = None
        if self._path is not None:
            os.unlink(self._path)
            self._path = None


def _bias_variance_blocked(predictions: np.ndarray, true_p: np.ndarray) -> MseDecomposition:
    """bias_variance over column blocks, keeping temporaries inside the
    prediction budget when the matrix lives on disk.  Block boundaries
    do not change any value: every statistic is per-column."""
    n_runs, n_obs = predictions.shape
    block = max(1, PREDICTION_VALUE_BUDGET // (4 * n_runs))
    if n_obs <= block:
        return bias_variance(np.asarray(predictions), true_p)
    sq_bias_parts = []
    variance_parts = []
    for start in range(0, n_obs, block):
        stop = min(n_obs, start + block)
        part = bias_variance(np.ascontiguousarray(predictions[:, start:stop]), true_p[start:stop])
        sq_bias_parts.append(part.squared_bias)
        variance_parts.append(part.variance)
    squared_bias = np.concatenate(sq_bias_parts)
    variance = np.concatenate(variance_parts)
    mse = squared_bias + variance

    def sd(a: np.ndarray) -> float:
        return float(np.std(a, ddof=1)) if len(a) > 1 else 0.0

    return MseDecomposition(
        squared_bias=squared_bias,
        variance=variance,
        mse=mse,
        mean_sq_bias=float(squared_bias.mean()),
        sd_sq_bias=sd(squared_bias),
        mean_variance=float(variance.mean()),
        sd_variance=sd(variance),
        mean_mse=float(mse.mean()),
        sd_mse=sd(mse),
    )


def _median_iqr(values: list[float]) -> tuple[float, float]:
    if not values:
        return float("nan"), float("nan")
    stats = summarize(np.asarray(values, dtype=np.float64))
    return stats.median, stats.iqr


def _summary_from_runs(
    scenario: Scenario,
    completed: list[tuple[int, RunMetrics]],
    predictions: np.ndarray | None,
    test: Dataset,
    true_c: float,
) -> SummaryRow:
    nan = float("nan")
    if not completed:
        return SummaryRow(
            scenario=scenario.scenario_id,
            median_train_auc=nan, iqr_train_auc=nan,
            median_test_auc=nan, iqr_test_auc=nan,
            median_train_slope=nan, iqr_train_slope=nan,
            median_test_slope=nan, iqr_test_slope=nan,
            mean_variance=nan, sd_variance=nan,
            mean_sq_bias=nan, sd_sq_bias=nan,
            mean_mse=nan, sd_mse=nan,
            true_auc=true_c, discrimination_loss=nan,
            runs_completed=0, n_slope_nonconverged=0,
        )
    runs = [m for _, m in completed]
    med_train_c, iqr_train_c = _median_iqr([m.train_c for m in runs])
    med_test_c, iqr_test_c = _median_iqr([m.test_c for m in runs])
    med_train_s, iqr_train_s = _median_iqr(
        [m.train_slope for m in runs if m.train_slope_converged]
    )
    med_test_s, iqr_test_s = _median_iqr(
        [m.test_slope for m in runs if m.test_slope_converged]
    )
    n_nonconverged = sum(
        (not m.train_slope_converged) + (not m.test_slope_converged) for m in runs
    )
    decomp = _bias_variance_blocked(predictions, test.true_p)
    loss = discrimination_loss(true_c, np.array([m.test_c for m in runs]))
    return SummaryRow(
        scenario=scenario.scenario_id,
        median_train_auc=med_train_c,
        iqr_train_auc=iqr_train_c,
        median_test_auc=med_test_c,
        iqr_test_auc=iqr_test_c,
        median_train_slope=med_train_s,
        iqr_train_slope=iqr_train_s,
        median_test_slope=med_test_s,
        iqr_test_slope=iqr_test_s,
        mean_variance=decomp.mean_variance,
        sd_variance=decomp.sd_variance,
        mean_sq_bias=decomp.mean_sq_bias,
        sd_sq_bias=decomp.sd_sq_bias,
        mean_mse=decomp.mean_mse,
        sd_mse=decomp.sd_mse,
        true_auc=true_c,
        discrimination_loss=loss,
        runs_completed=len(runs),
        n_slope_nonconverged=n_nonconverged,
    )


def run_scenario(
    scenario: Scenario,
    config: SimulationConfig,
    test: Dataset | None = None,
    keep_predictions: bool = False,
) -> ScenarioResult:
    """Run one scenario: ``r_runs`` independent training draws, each
    scored on a shared test set.

    A failed run (for example a single-class training draw) is redrawn
    with a derived retry seed up to RETRY_CAP times, then recorded and
    skipped.  The per-run test predictions are retained for the
    bias/variance decomposition and discarded afterwards unless
    ``keep_predictions`` asks for them.  Results are identical for any
    ``config.workers`` value.
    """
    if test is None:
        test = make_test_set(scenario.design, config)
    if test.true_p is None:
        raise ValueError("scenario test sets need generating probabilities")
    if test.n_cases != config.n_test:
        raise ValueError("test set size does not match config.n_test")
    true_c = c_statistic(test.true_p, test.y)
    buffer = _PredictionBuffer(config.r_runs, test.n_cases)
    try:

        def job(run_index: int):
            try:
                metrics, test_p, attempts = _run_once(scenario, config, test, run_index)
            except _RunGaveUp as exc:
                return ("failed", str(exc), RETRY_CAP)
            buffer.array[run_index] = test_p
            return ("ok", metrics, attempts)

        indices = range(config.r_runs)
        if config.workers > 1:
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                outcomes = list(pool.map(job, indices))
        else:
            outcomes = [job(r) for r in indices]

        completed: list[tuple[int, RunMetrics]] = []
        failures: list[RunFailure] = []
        retries = 0
        for run_index, (status, payload, attempts) in enumerate(outcomes):
            retries += attempts
            if status == "ok":
                completed.append((run_index, payload))
            else:
                failures.append(
                    RunFailure(run_index=run_index, attempts=RETRY_CAP + 1, error=payload)
                )
        if completed:
            kept = [run_index for run_index, _ in completed]
            if len(kept) == config.r_runs:
                predictions = buffer.array
            else:
                predictions = buffer.array[kept]
        else:
            predictions = None
        summary = _summary_from_runs(scenario, completed, predictions, test, true_c)
        kept_copy = None
        if keep_predictions and predictions is not None:
            kept_copy = np.array(predictions)
    finally:
        buffer.close()
    return ScenarioResult(
        scenario=scenario,
        summary=summary,
        completed=completed,
        failures=failures,
        retries=retries,
        predictions=kept_copy,
    )


@dataclass
class SimulationResult:
    """Outcome of a simulation pass over selected scenarios."""

    rows: list[SummaryRow]
    failures: dict[str, list[RunFailure]]
    retries: int
    scenarios_run: int

    @property
    def n_failed_runs(self) -> int:
        return sum(len(v) for v in self.failures.values())


def run_simulation(config: SimulationConfig, progress=None) -> SimulationResult:
    """Run every scenario selected by the config filter, one summary row
    each.

    Test sets are built once per design and shared across its scenarios.
    When ``out_dir`` is set, writes ``summary.csv`` there, plus
    ``runs_<scenario>.csv`` per scenario when ``write_runs`` is on.
    ``progress`` is called with each scenario id before it runs.
    """
    scenarios = select_scenarios(config)
    if config.out_dir is not None:
        os.makedirs(config.out_dir, exist_ok=True)
    rows: list[SummaryRow] = []
    failures: dict[str, list[RunFailure]] = {}
    retries = 0
    cached: tuple[str, Dataset] | None = None
    for scenario in scenarios:
        if cached is None or cached[0] != scenario.design.label:
            cached = (scenario.design.label, make_test_set(scenario.design, config))
        if progress is not None:
            progress(scenario.scenario_id)
        result = run_scenario(scenario, config, test=cached[1])
        rows.append(result.summary)
        retries += result.retries
        if result.failures:
            failures[scenario.scenario_id] = result.failures
        if config.out_dir is not None and config.write_runs:
            path = os.path.join(config.out_dir, f"runs_{scenario.scenario_id}.csv")
            write_run_metrics(path, result.completed)
    if config.out_dir is not None:
        write_summary(rows, os.path.join(config.out_dir, "summary.csv"))
    return SimulationResult(
        rows=rows, failures=failures, retries=retries, scenarios_run=len(scenarios)
    )


def _format_cell(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".6g")


def write_summary(rows: list[SummaryRow], path: str) -> None:
    """Export summary rows as CSV under the fixed column schema.

    Floats carry 6 significant digits; undefined aggregates (for
    example a slope median with every fit excluded) appear as ``nan``.
    """
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(SUMMARY_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(_format_cell(getattr(row, name)) for name in SUMMARY_COLUMNS))
            fh.write("\n")


def read_summary(path: str) -> list[SummaryRow]:
    """Read a summary CSV back into rows.

    The CSV does not carry the non-converged slope count, so that field
    comes back as its default 0.
    """
    rows: list[SummaryRow] = []
    with open(path, encoding="utf-8", newline="") as fh:
        header = fh.readline().rstrip("\n")
        if tuple(header.split(",")) != SUMMARY_COLUMNS:
            raise ValueError(f"unexpected summary header in {path!r}")
        for line in fh:
            cells = line.rstrip("\n").split(",")
            if len(cells) != len(SUMMARY_COLUMNS):
                raise ValueError(f"malformed summary row in {path!r}")
            kwargs = {}
            for name, cell in zip(SUMMARY_COLUMNS, cells):
                if name == "scenario":
                    kwargs[name] = cell
                elif name == "runs_completed":
                    kwargs[name] = int(cell)
                else:
                    kwargs[name] = float(cell)
            rows.append(SummaryRow(**kwargs))
    return rows


def write_run_metrics(path: str, completed: list[tuple[int, RunMetrics]]) -> None:
    """Export per-run metrics as CSV, one row per completed run."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(RUN_COLUMNS) + "\n")
        for run_index, m in completed:
            cells = [
                run_index,
                m.train_c, m.test_c,
                m.train_slope, m.test_slope,
                m.train_logloss, m.test_logloss,
                m.train_brier, m.test_brier,
                m.train_slope_converged, m.test_slope_converged,
            ]
            fh.write(",".join(_format_cell(c) for c in cells))
            fh.write("\n")
