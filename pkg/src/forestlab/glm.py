"""Penalized logistic and multinomial regression with spline expansion.

These models serve two roles: a transparent baseline to contrast with
forest probability surfaces, and the inner fit behind calibration
slopes.  Binary fits use iteratively reweighted least squares;
multinomial fits maximize the penalized log-likelihood with an analytic
gradient.  Both flag non-convergence (for example under perfect
separation) instead of raising.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize

__all__ = [
    "GlmFit",
    "RcsBasis",
    "default_knots",
    "expand_columns",
    "fit_binary_logistic",
    "fit_multinomial",
    "fit_spline_logistic",
    "load_glm",
    "predict_glm",
    "rcs_expand",
    "save_glm",
]

GLM_FORMAT_VERSION = 1


@dataclass(frozen=True)
class RcsBasis:
    """Knots of a restricted cubic spline with one nonlinear term."""

    knots: tuple[float, float, float]

    def __post_init__(self) -> None:
        t1, t2, t3 = self.knots
        if not t1 < t2 < t3:
            raise ValueError(f"knots must be strictly increasing, got {self.knots}")


def default_knots(x: np.ndarray, quantiles: tuple[float, float, float] = (0.10, 0.50, 0.90)) -> RcsBasis:
    """Place knots at the given quantiles of the observed values."""
    x = np.asarray(x, dtype=np.float64)
    t1, t2, t3 = (float(q) for q in np.quantile(x, quantiles))
    return RcsBasis(knots=(t1, t2, t3))


def rcs_expand(x: np.ndarray, basis: RcsBasis) -> np.ndarray:
    """Expand one column to [x, C(x)] where C is the restricted cubic term.

    C is zero up to the first knot and linear beyond the last, so the
    fitted effect is linear in both tails.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("rcs_expand takes a single column")
    t1, t2, t3 = basis.knots

    def cube(t: float) -> np.ndarray:
        return np.maximum(x - t, 0.0) ** 3

    c = cube(t1) - cube(t2) * (t3 - t1) / (t3 - t2) + cube(t3) * (t2 - t1) / (t3 - t2)
    c /= (t3 - t1) ** 2
    return np.column_stack([x, c])


def expand_columns(x: np.ndarray, spline_bases: tuple[tuple[int, RcsBasis], ...]) -> np.ndarray:
    """Apply per-column spline expansions, leaving other columns as-is.

    Expanded terms are appended after the original columns in basis
    order, so coefficients stay aligned with a fixed expansion recipe.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("x must be 2-D")
    extra = []
    for col, basis in spline_bases:
        if not 0 <= col < x.shape[1]:
            raise ValueError(f"spline column {col} out of range for {x.shape[1]} features")
        extra.append(rcs_expand(x[:, col], basis)[:, 1:])
    if not extra:
        return x
    return np.column_stack([x] + extra)


@dataclass(frozen=True)
class GlmFit:
    """A fitted (multinomial) logistic model.

    ``coef`` has one row per non-reference class and one column per
    design column, intercept first.  ``classes`` are the original labels
    with the reference class first.  ``spline_bases`` records the
    expansion applied to raw features before the linear predictor, so
    prediction can start from unexpanded data.
    """

    coef: np.ndarray
    classes: np.ndarray
    converged: bool
    n_iter: int
    spline_bases: tuple[tuple[int, RcsBasis], ...] = ()

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return predict_glm(self, x)


def _as_design(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ValueError("x must be at most 2-D")
    return np.column_stack([np.ones(len(x)), x])


def _check_constant_columns(design: np.ndarray) -> None:
    spans = design[:, 1:].max(axis=0) - design[:, 1:].min(axis=0)
    degenerate = np.flatnonzero(spans == 0.0)
    if len(degenerate):
        raise ValueError(f"feature column {int(degenerate[0])} is constant; drop it or add a penalty")


_MAX_COEF = 1e4


def fit_binary_logistic(
    x: np.ndarray,
    y: np.ndarray,
    ridge: float = 0.0,
    max_iter: int = 100,
    tol: float = 1e-10,
) -> GlmFit:
    """Fit P(y=1|x) by IRLS, maximizing the ridge-penalized log-likelihood.

    The intercept is never penalized.  Separated or otherwise divergent
    fits return ``converged=False`` with the last finite iterate rather
    than raising; callers that aggregate slopes use the flag to exclude
    such fits.
    """
    design = _as_design(x)
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1 or len(y) != len(design):
        raise ValueError("y must be 1-D with one label per row of x")
    labels = np.unique(y)
    if not np.all(np.isin(labels, (0.0, 1.0))):
        raise ValueError("binary fit requires labels in {0, 1}")
    if len(labels) < 2:
        raise ValueError("y contains a single class; the model is not identifiable")
    if ridge < 0:
        raise ValueError("ridge must be >= 0")
    if ridge == 0.0:
        _check_constant_columns(design)

    penalty = np.full(design.shape[1], 2.0 * ridge)
    penalty[0] = 0.0
    beta = np.zeros(design.shape[1])
    converged = False
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        eta = design @ beta
        p = _expit(eta)
        grad = design.T @ (y - p) - penalty * beta
        if np.max(np.abs(grad)) < 1e-6:
            converged = True
            break
        w = p * (1.0 - p)
        hess = (design * w[:, None]).T @ design
        hess[np.diag_indices_from(hess)] += penalty
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            break
        beta_new = beta + step
        if not np.all(np.isfinite(beta_new)) or np.max(np.abs(beta_new)) > _MAX_COEF:
            beta = beta_new
            break
        beta = beta_new
        if np.max(np.abs(step)) < tol:
            eta = design @ beta
            p = _expit(eta)
            grad = design.T @ (y - p) - penalty * beta
            converged = bool(np.max(np.abs(grad)) < 1e-6)
            break
    if not np.all(np.isfinite(beta)):
        beta = np.zeros_like(beta)
        converged = False
    if converged and ridge == 0.0 and np.max(np.abs(y - _expit(design @ beta))) < 1e-3:
        # All residuals vanish only when the data are separated, where the
        # likelihood is unbounded and the reported iterate is arbitrary.
        converged = False
    return GlmFit(
        coef=beta[None, :],
        classes=np.array([0, 1], dtype=np.int64),
        converged=converged,
        n_iter=n_iter,
    )


def _expit(eta: np.ndarray) -> np.ndarray:
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    e = np.exp(eta[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _softmax_logits(design: np.ndarray, coef: np.ndarray) -> np.ndarray:
    # Column of zeros for the reference class, then one logit per row of coef.
    logits = np.zeros((len(design), coef.shape[0] + 1))
    logits[:, 1:] = design @ coef.T
    return logits


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def fit_multinomial(
    x: np.ndarray,
    y: np.ndarray,
    ridge: float = 0.0,
    max_iter: int = 500,
) -> GlmFit:
    """Fit a softmax regression with the first observed label as reference.

    Maximizes the ridge-penalized log-likelihood with an analytic
    gradient.  With two classes the result matches
    :func:`fit_binary_logistic` up to optimizer tolerance.
    """
    design = _as_design(x)
    y = np.asarray(y)
    if y.ndim != 1 or len(y) != len(design):
        raise ValueError("y must be 1-D with one label per row of x")
    classes = np.unique(y)
    if len(classes) < 2:
        raise ValueError("y contains a single class; the model is not identifiable")
    if ridge < 0:
        raise ValueError("ridge must be >= 0")
    if ridge == 0.0:
        _check_constant_columns(design)
    k = len(classes)
    n, f = design.shape
    onehot = (y[:, None] == classes[None, :]).astype(np.float64)

    penalty = np.full(f, 2.0 * ridge)
    penalty[0] = 0.0

    def objective(flat: np.ndarray) -> tuple[float, np.ndarray]:
        coef = flat.reshape(k - 1, f)
        probs = _softmax(_softmax_logits(design, coef))
        log_p = np.log(np.clip(probs, 1e-300, None))
        nll = -np.sum(onehot * log_p) + 0.5 * np.sum(penalty * np.sum(coef**2, axis=0))
        grad = (probs[:, 1:] - onehot[:, 1:]).T @ design + penalty * coef
        return nll, grad.ravel()

    def hessian(coef: np.ndarray) -> np.ndarray:
        probs = _softmax(_softmax_logits(design, coef))
        h = np.empty(((k - 1) * f, (k - 1) * f))
        for a in range(1, k):
            for b in range(1, k):
                w = probs[:, a] * ((1.0 if a == b else 0.0) - probs[:, b])
                h[(a - 1) * f : a * f, (b - 1) * f : b * f] = (design * w[:, None]).T @ design
        h[np.diag_indices_from(h)] += np.tile(penalty, k - 1)
        return h

    x0 = np.zeros((k - 1) * f)
    res = minimize(objective, x0, jac=True, method="L-BFGS-B", options={"maxiter": max_iter, "gtol": 1e-8, "ftol": 1e-14})
    flat = res.x
    n_iter = int(res.nit)
    nll, grad = objective(flat)
    # L-BFGS stops on flat objective; polish with Newton steps until the
    # gradient itself is small.  Divergence (separation) exits the loop
    # and is reported through the flag.
    for _ in range(25):
        if not np.all(np.isfinite(flat)) or np.max(np.abs(grad)) < 1e-6:
            break
        try:
            step = np.linalg.solve(hessian(flat.reshape(k - 1, f)), grad)
        except np.linalg.LinAlgError:
            break
        trial = flat - step
        nll_new, grad_new = objective(trial)
        if not np.isfinite(nll_new) or nll_new > nll + 1e-9 or np.max(np.abs(trial)) > _MAX_COEF:
            break
        flat, nll, grad = trial, nll_new, grad_new
        n_iter += 1
    coef = flat.reshape(k - 1, f)
    converged = bool(np.all(np.isfinite(coef)) and np.max(np.abs(grad)) < 1e-6)
    if converged and ridge == 0.0:
        probs = _softmax(_softmax_logits(design, coef))
        if np.max(np.abs(onehot - probs)) < 1e-3:
            converged = False
    return GlmFit(coef=coef, classes=classes.astype(np.int64), converged=converged, n_iter=n_iter)


def fit_spline_logistic(
    x: np.ndarray,
    y: np.ndarray,
    spline_columns: tuple[int, ...] = (),
    ridge: float = 0.0,
) -> GlmFit:
    """Fit a logistic or multinomial model with spline-expanded columns.

    Knots default to the 0.10/0.50/0.90 quantiles of each expanded
    column.  The returned fit remembers the expansion and predicts from
    raw features.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("x must be 2-D")
    bases = tuple((int(c), default_knots(x[:, int(c)])) for c in spline_columns)
    design = expand_columns(x, bases)
    labels = np.unique(y)
    if len(labels) == 2 and set(labels.tolist()) == {0, 1}:
        fit = fit_binary_logistic(design, y, ridge=ridge)
    else:
        fit = fit_multinomial(design, y, ridge=ridge)
    return replace(fit, spline_bases=bases)


def predict_glm(fit: GlmFit, x: np.ndarray) -> np.ndarray:
    """Class probabilities, one column per entry of ``fit.classes``.

    Rows sum to one.  For binary fits column 1 is P(y=1|x).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if fit.spline_bases:
        x = expand_columns(x, fit.spline_bases)
    design = _as_design(x)
    if design.shape[1] != fit.coef.shape[1]:
        raise ValueError(
            f"model expects {fit.coef.shape[1] - 1} design columns, got {design.shape[1] - 1}"
        )
    return _softmax(_softmax_logits(design, fit.coef))


def save_glm(fit: GlmFit, path: str) -> None:
    """Write a fit as JSON; exact float round-trip."""
    payload = {
        "format": "glm",
        "version": GLM_FORMAT_VERSION,
        "coef": [[v.hex() for v in map(float, row)] for row in fit.coef],
        "classes": [int(c) for c in fit.classes],
        "converged": fit.converged,
        "n_iter": fit.n_iter,
        "spline_bases": [
            {"column": col, "knots": [float(t).hex() for t in basis.knots]}
            for col, basis in fit.spline_bases
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def load_glm(path: str) -> GlmFit:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != "glm":
        raise ValueError(f"{path} is not a saved logistic model")
    if payload.get("version") != GLM_FORMAT_VERSION:
        raise ValueError(f"unsupported model version {payload.get('version')}")
    bases = tuple(
        (int(b["column"]), RcsBasis(knots=tuple(float.fromhex(t) for t in b["knots"])))
        for b in payload["spline_bases"]
    )
    return GlmFit(
        coef=np.array([[float.fromhex(v) for v in row] for row in payload["coef"]], dtype=np.float64),
        classes=np.array(payload["classes"], dtype=np.int64),
        converged=bool(payload["converged"]),
        n_iter=int(payload["n_iter"]),
        spline_bases=bases,
    )
