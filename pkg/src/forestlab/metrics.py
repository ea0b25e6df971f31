"""Discrimination, calibration, and error metrics for probability estimates.

The c-statistic uses the rank-sum form with half credit for ties.  The
polytomous discrimination index (PDI) generalizes it to k classes over
tuples holding one case per class; it is computed exactly in closed
form when the tuple space is small and by Monte Carlo otherwise.

Calibration slope and intercept come from a logistic regression of the
outcome on the logit of the clipped probabilities.  The inner fit is
iteratively reweighted least squares with the classic relative-deviance
stopping rule (tolerance 1e-8, 25 iterations).  Perfectly separated
predictions have no finite maximizer, so they are flagged
non-converged, as are fits that exhaust the iteration cap; aggregation
excludes flagged fits and reports their count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.stats import rankdata

from .rng import make_rng

__all__ = [
    "CalibrationFit",
    "MseDecomposition",
    "RunMetrics",
    "SummaryStats",
    "bias_variance",
    "brier",
    "brier_multiclass",
    "c_statistic",
    "calibration_slope",
    "discrimination_loss",
    "logloss",
    "logloss_multiclass",
    "pdi",
    "summarize",
]

PDI_TUPLE_BUDGET = 10**6


def _check_binary(p: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y)
    if p.ndim != 1 or y.shape != p.shape:
        raise ValueError("p and y must be 1-D arrays of equal length")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("y must contain only 0 and 1")
    return p, y.astype(np.int64)


def c_statistic(p: np.ndarray, y: np.ndarray) -> float:
    """Probability that an event outranks a non-event; ties count half.

    Computed from the rank sum of the events, so runtime is O(n log n)
    with exact tie handling.
    """
    p, y = _check_binary(p, y)
    n1 = int(y.sum())
    n0 = len(y) - n1
    if n0 == 0 or n1 == 0:
        raise ValueError("c-statistic needs both classes present")
    ranks = rankdata(p)
    return float((ranks[y == 1].sum() - n1 * (n1 + 1) / 2.0) / (n0 * n1))


def pdi(
    probs: np.ndarray,
    y: np.ndarray,
    tuples: int = PDI_TUPLE_BUDGET,
    rng: np.random.Generator | None = None,
) -> float:
    """Polytomous discrimination index over one-case-per-class tuples.

    For each class i and each tuple, the class-i case scores 1 when its
    class-i probability is the strict maximum, and splits credit equally
    under ties.  The result averages over classes.  When the number of
    distinct tuples is at most ``tuples`` the expectation is computed in
    closed form (exact); otherwise that many tuples are sampled with the
    given generator (seed 0 by default).  With two classes the index
    equals the c-statistic.
    """
    probs = np.asarray(probs, dtype=np.float64)
    y = np.asarray(y)
    if probs.ndim != 2:
        raise ValueError("probs must be 2-D, one column per class")
    if y.shape != (len(probs),):
        raise ValueError("y must have one label per row of probs")
    k = probs.shape[1]
    if k < 2:
        raise ValueError("pdi needs at least two classes")
    counts = np.array([(y == c).sum() for c in range(k)])
    if counts.min() == 0:
        missing = int(np.flatnonzero(counts == 0)[0])
        raise ValueError(f"class {missing} has no cases")
    n_tuples = math.prod(int(c) for c in counts)
    if n_tuples <= tuples:
        return _pdi_exact(probs, y, k)
    if rng is None:
        rng = make_rng(0)
    return _pdi_monte_carlo(probs, y, k, tuples, rng)


def _pdi_exact(probs: np.ndarray, y: np.ndarray, k: int) -> float:
    # For a class-i case with value v, the tuple-averaged credit is
    # sum over subsets S of the other classes tied at v of
    # P(tie on S) * P(all others below v) / (1 + |S|).
    total = 0.0
    for i in range(k):
        col = probs[:, i]
        values = [np.sort(col[y == c]) for c in range(k)]
        v = col[y == i]
        others = [c for c in range(k) if c != i]
        lower = {}
        tied = {}
        for j in others:
            left = np.searchsorted(values[j], v, side="left")
            right = np.searchsorted(values[j], v, side="right")
            n_j = len(values[j])
            lower[j] = left / n_j
            tied[j] = (right - left) / n_j
        credit = np.zeros(len(v))
        for size in range(len(others) + 1):
            for subset in combinations(others, size):
                term = np.full(len(v), 1.0 / (1 + size))
                for j in others:
                    term = term * (tied[j] if j in subset else lower[j])
                credit += term
        total += credit.mean()
    return float(total / k)


def _pdi_monte_carlo(
    probs: np.ndarray, y: np.ndarray, k: int, tuples: int, rng: np.random.Generator
) -> float:
    class_rows = [np.flatnonzero(y == c) for c in range(k)]
    picks = np.empty((tuples, k), dtype=np.int64)
    for c in range(k):
        picks[:, c] = class_rows[c][rng.integers(len(class_rows[c]), size=tuples)]
    total = 0.0
    for i in range(k):
        vals = probs[picks, i]
        mx = vals.max(axis=1)
        n_at_max = (vals == mx[:, None]).sum(axis=1)
        credit = np.where(vals[:, i] == mx, 1.0 / n_at_max, 0.0)
        total += credit.mean()
    return float(total / k)


@dataclass(frozen=True)
class CalibrationFit:
    """Slope and intercept of outcome regressed on logit of probability."""

    slope: float
    intercept: float
    converged: bool


@dataclass(frozen=True)
class RunMetrics:
    """Per-run evaluation of one fitted model on its training and test data.

    Slopes are NaN when their fit did not converge; the flags let
    aggregation exclude and count those fits.
    """

    train_c: float
    test_c: float
    train_slope: float
    test_slope: float
    train_logloss: float
    test_logloss: float
    train_brier: float
    test_brier: float
    train_slope_converged: bool = True
    test_slope_converged: bool = True


def _logit(p: np.ndarray) -> np.ndarray:
    return np.log(p / (1.0 - p))


def _irls_deviance(design: np.ndarray, y: np.ndarray, max_iter: int = 25, eps: float = 1e-8):
    # Classic IRLS with the relative-deviance stopping rule and a hard
    # iteration cap.  Deviance is computed via logaddexp so saturated
    # fits stay finite.  Converged means the deviance criterion was met
    # with a finite iterate; exhausting the cap reports non-convergence.
    mu = (y + 0.5) / 2.0
    eta = _logit(mu)
    dev = -2.0 * np.sum(y * eta - np.logaddexp(0.0, eta))
    beta = np.zeros(design.shape[1])
    converged = False
    for _ in range(max_iter):
        w = mu * (1.0 - mu)
        z = eta + (y - mu) / w
        wd = design * w[:, None]
        try:
            beta_new = np.linalg.solve(wd.T @ design, wd.T @ z)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(beta_new)):
            break
        beta = beta_new
        eta = design @ beta
        mu = 1.0 / (1.0 + np.exp(-np.clip(eta, -700, 700)))
        mu = np.clip(mu, 1e-300, 1.0 - 1e-16)
        dev_new = -2.0 * np.sum(y * eta - np.logaddexp(0.0, eta))
        if abs(dev_new - dev) / (abs(dev_new) + 0.1) < eps:
            converged = True
            break
        dev = dev_new
    return beta, converged


def calibration_slope(p: np.ndarray, y: np.ndarray, clip: float = 1e-6) -> CalibrationFit:
    """Fit y on logit(p) with probabilities clipped away from 0 and 1.

    Non-convergence is reported as a flagged NaN value rather than an
    exception, so run aggregation can exclude and count such fits.  A
    fit is non-converged when no finite maximizer exists or none was
    reached: constant predictions, a single observed class, perfectly
    separated predictions (every event ranked above every non-event,
    where the likelihood increases without bound and any reported slope
    would only echo the stopping rule), or the 25-iteration cap ending
    before the deviance criterion is met.
    """
    p, y = _check_binary(p, y)
    if not 0 < clip < 0.5:
        raise ValueError("clip must be in (0, 0.5)")
    if y.min() == y.max():
        return CalibrationFit(slope=float("nan"), intercept=float("nan"), converged=False)
    feature = _logit(np.clip(p, clip, 1.0 - clip))
    if feature.max() == feature.min():
        return CalibrationFit(slope=float("nan"), intercept=float("nan"), converged=False)
    if feature[y == 1].min() > feature[y == 0].max():
        return CalibrationFit(slope=float("nan"), intercept=float("nan"), converged=False)
    design = np.column_stack([np.ones(len(feature)), feature])
    beta, converged = _irls_deviance(design, y.astype(np.float64))
    if not converged:
        return CalibrationFit(slope=float("nan"), intercept=float("nan"), converged=False)
    return CalibrationFit(slope=float(beta[1]), intercept=float(beta[0]), converged=True)


def brier(p: np.ndarray, y: np.ndarray) -> float:
    """Mean squared error of the event probability against the 0/1 outcome."""
    p, y = _check_binary(p, y)
    return float(np.mean((p - y) ** 2))


def brier_multiclass(probs: np.ndarray, y: np.ndarray) -> float:
    """Sum over classes of squared probability error, averaged over cases."""
    probs = np.asarray(probs, dtype=np.float64)
    onehot = np.zeros_like(probs)
    onehot[np.arange(len(probs)), np.asarray(y, dtype=np.int64)] = 1.0
    return float(np.mean(np.sum((probs - onehot) ** 2, axis=1)))


def logloss(p: np.ndarray, y: np.ndarray, clip: float = 1e-6) -> float:
    """Negative mean log-likelihood with probabilities clipped away from 0/1."""
    p, y = _check_binary(p, y)
    pc = np.clip(p, clip, 1.0 - clip)
    return float(-np.mean(y * np.log(pc) + (1 - y) * np.log(1.0 - pc)))


def logloss_multiclass(probs: np.ndarray, y: np.ndarray, clip: float = 1e-6) -> float:
    probs = np.asarray(probs, dtype=np.float64)
    picked = probs[np.arange(len(probs)), np.asarray(y, dtype=np.int64)]
    return float(-np.mean(np.log(np.clip(picked, clip, None))))


@dataclass(frozen=True)
class MseDecomposition:
    """Per-observation squared bias and variance of repeated estimates.

    ``squared_bias``, ``variance``, and ``mse`` hold one value per test
    observation; ``mse`` is their exact sum.  Scalar summaries are the
    mean and (n-1)-denominator standard deviation across observations.
    """

    squared_bias: np.ndarray
    variance: np.ndarray
    mse: np.ndarray
    mean_sq_bias: float
    sd_sq_bias: float
    mean_variance: float
    sd_variance: float
    mean_mse: float
    sd_mse: float


def bias_variance(predictions: np.ndarray, true_p: np.ndarray) -> MseDecomposition:
    """Decompose repeated predictions against the generating probabilities.

    ``predictions`` has one row per simulation run and one column per
    test observation.  Variance uses the population form (denominator =
    number of runs) so the identity mse = squared_bias + variance is
    exact per observation.
    """
    predictions = np.asarray(predictions, dtype=np.float64)
    true_p = np.asarray(true_p, dtype=np.float64)
    if predictions.ndim != 2:
        raise ValueError("predictions must be 2-D (runs x observations)")
    if true_p.shape != (predictions.shape[1],):
        raise ValueError("true_p must have one value per prediction column")
    if predictions.shape[0] < 1:
        raise ValueError("need at least one run")
    center = predictions.mean(axis=0)
    squared_bias = (center - true_p) ** 2
    variance = np.mean((predictions - center[None, :]) ** 2, axis=0)
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


def discrimination_loss(true_c: float, test_c_values: np.ndarray) -> float:
    """True c-statistic minus the median test c-statistic across runs."""
    test_c_values = np.asarray(test_c_values, dtype=np.float64)
    if test_c_values.size == 0:
        raise ValueError("need at least one test c-statistic")
    return float(true_c - np.median(test_c_values))


@dataclass(frozen=True)
class SummaryStats:
    median: float
    iqr: float
    mean: float
    sd: float


def summarize(values: np.ndarray) -> SummaryStats:
    """Median, interquartile range, mean, and sd of a sample.

    Quantiles use the linear interpolation rule (type 7); sd uses the
    n-1 denominator and is defined as 0 for a single value.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("cannot summarize an empty sample")
    q25, q50, q75 = np.quantile(values, [0.25, 0.5, 0.75])
    sd = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
    return SummaryStats(median=float(q50), iqr=float(q75 - q25), mean=float(values.mean()), sd=sd)
