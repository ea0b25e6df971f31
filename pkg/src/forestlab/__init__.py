"""Probability-estimation random forests and a simulation laboratory around them."""

from __future__ import annotations

__version__ = "0.1.0"

from .forest import (
    Forest,
    ForestParams,
    fit_forest,
    load_forest,
    predict_oob,
    predict_proba,
    save_forest,
)
from .glm import (
    GlmFit,
    fit_binary_logistic,
    fit_multinomial,
    fit_spline_logistic,
    load_glm,
    predict_glm,
    save_glm,
)
from .harness import (
    Scenario,
    SimulationConfig,
    SummaryRow,
    enumerate_scenarios,
    make_test_set,
    parse_scenario_id,
    read_summary,
    run_scenario,
    run_simulation,
    write_summary,
)
from .metrics import (
    RunMetrics,
    bias_variance,
    brier,
    c_statistic,
    calibration_slope,
    discrimination_loss,
    logloss,
    pdi,
    summarize,
)
from .synthetic import (
    Dataset,
    LogisticDesign,
    builtin_designs,
    design_by_label,
    generate_dataset,
    read_dataset_csv,
    write_dataset_csv,
)

__all__ = [
    "Dataset",
    "Forest",
    "ForestParams",
    "GlmFit",
    "LogisticDesign",
    "RunMetrics",
    "Scenario",
    "SimulationConfig",
    "SummaryRow",
    "__version__",
    "bias_variance",
    "brier",
    "builtin_designs",
    "c_statistic",
    "calibration_slope",
    "design_by_label",
    "discrimination_loss",
    "enumerate_scenarios",
    "fit_binary_logistic",
    "fit_forest",
    "fit_multinomial",
    "fit_spline_logistic",
    "generate_dataset",
    "load_forest",
    "load_glm",
    "logloss",
    "make_test_set",
    "parse_scenario_id",
    "pdi",
    "predict_glm",
    "predict_oob",
    "predict_proba",
    "read_dataset_csv",
    "read_summary",
    "run_scenario",
    "run_simulation",
    "save_forest",
    "save_glm",
    "summarize",
    "write_dataset_csv",
    "write_summary",
]
