"""Logistic data-generating designs and synthetic dataset sampling.

A design draws correlated predictors (optionally dichotomized), maps
them through a linear predictor and the inverse logit to a true event
probability, and draws Bernoulli outcomes.  The module ships 48
built-in designs spanning predictor distribution, count, correlation,
signal strength pattern, presence of noise predictors, and target
discrimination (true c-statistic 0.75 or 0.90), all tuned to an event
fraction near 0.2.

Sampling is stream-stable by construction: predictors are filled one
feature at a time, so two designs that share a seed and leading
coefficients produce identical leading predictor columns and, when the
true probabilities agree, identical outcomes.  This makes designs that
differ only in appended noise predictors directly comparable run for
run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "BINARIZE_THRESHOLD",
    "TARGET_EVENT_FRACTION",
    "Dataset",
    "LogisticDesign",
    "binarize",
    "builtin_designs",
    "cholesky_lower",
    "design_by_label",
    "draw_outcomes",
    "equicorrelation_matrix",
    "generate_dataset",
    "inverse_logit",
    "linear_predictor",
    "read_dataset_csv",
    "sample_mvn",
    "write_dataset_csv",
]

# Latent draws are dichotomized at the distribution median so binary
# predictors keep 50% prevalence regardless of correlation.
BINARIZE_THRESHOLD = 0.0

# All built-in designs are tuned to this marginal event fraction.
TARGET_EVENT_FRACTION = 0.2

_DISTRIBUTIONS = ("continuous", "binary")
_STRENGTHS = ("balanced", "unbalanced")


@dataclass(frozen=True)
class LogisticDesign:
    """One logistic data-generating design.

    Parameters
    ----------
    distribution:
        ``"continuous"`` keeps the latent normal predictors,
        ``"binary"`` dichotomizes them at ``BINARIZE_THRESHOLD``.
    n_predictors:
        Total number of predictors, informative plus noise.
    n_noise:
        Number of trailing predictors with zero coefficient.
    correlation:
        Common pairwise correlation of the latent normal draws.
    target_auc:
        Discrimination the coefficients were tuned to (true c-statistic).
    strength:
        ``"balanced"`` gives all informative predictors one coefficient;
        ``"unbalanced"`` gives the leading quarter of them a coefficient
        four times larger than the rest.
    intercept, betas:
        Linear predictor coefficients; ``betas`` has one entry per
        predictor, trailing zeros for noise predictors.
    """

    distribution: str
    n_predictors: int
    n_noise: int
    correlation: float
    target_auc: float
    strength: str
    intercept: float
    betas: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.distribution not in _DISTRIBUTIONS:
            raise ValueError(f"unknown distribution {self.distribution!r}")
        if self.strength not in _STRENGTHS:
            raise ValueError(f"unknown strength {self.strength!r}")
        if self.n_predictors < 1:
            raise ValueError("n_predictors must be >= 1")
        if not 0 <= self.n_noise < self.n_predictors:
            raise ValueError("need 0 <= n_noise < n_predictors")
        if len(self.betas) != self.n_predictors:
            raise ValueError(
                f"betas has {len(self.betas)} entries for {self.n_predictors} predictors"
            )
        equicorrelation_matrix(self.n_predictors, self.correlation)
        n_zero = sum(1 for b in self.betas if b == 0.0)
        if self.n_noise > 0 and n_zero != self.n_noise:
            raise ValueError(f"expected exactly {self.n_noise} zero betas, found {n_zero}")
        magnitudes = sorted({abs(b) for b in self.betas if b != 0.0}, reverse=True)
        if self.strength == "balanced" and len(magnitudes) > 1:
            raise ValueError("balanced design must use a single coefficient magnitude")
        if self.strength == "unbalanced" and magnitudes:
            if len(magnitudes) != 2:
                raise ValueError("unbalanced design must use exactly two coefficient magnitudes")
            ratio = magnitudes[0] / magnitudes[1]
            if not 3.5 <= ratio <= 4.5:
                raise ValueError(f"unbalanced magnitude ratio {ratio:.3f} is not close to 4")

    @property
    def n_true(self) -> int:
        return self.n_predictors - self.n_noise

    @property
    def label(self) -> str:
        """Compact design identifier, e.g. ``b_4c_90_4_unb_noise``."""
        dist = "b" if self.distribution == "binary" else "c"
        auc = round(self.target_auc * 100)
        rho = round(self.correlation * 10)
        strength = "bal" if self.strength == "balanced" else "unb"
        noise = "_noise" if self.n_noise else ""
        return f"b_{self.n_true}{dist}_{auc}_{rho}_{strength}{noise}"

    @property
    def seed_label(self) -> str:
        """Label of the coefficient family: the design id without the noise tag.

        Designs that differ only by appended noise predictors share this
        label, and the sampler keys its streams on it, so matched designs
        see identical informative predictors and outcomes.
        """
        return self.label.removesuffix("_noise")


# (distribution, n_true, correlation, auc, strength) -> (intercept, strong beta, weak beta).
# Balanced rows repeat the single magnitude; unbalanced rows give the leading
# quarter of informative predictors the strong value.
_COEFFICIENTS: dict[tuple[str, int, float, float, str], tuple[float, float, float]] = {
    ("continuous", 4, 0.0, 0.75, "balanced"): (-1.6, 0.51, 0.51),
    ("continuous", 4, 0.0, 0.75, "unbalanced"): (-1.65, 0.97, 0.24),
    ("continuous", 4, 0.4, 0.75, "balanced"): (-1.67, 0.35, 0.35),
    ("continuous", 4, 0.4, 0.75, "unbalanced"): (-1.67, 0.74, 0.18),
    ("continuous", 4, 0.0, 0.90, "balanced"): (-2.5, 1.2, 1.2),
    ("continuous", 4, 0.0, 0.90, "unbalanced"): (-2.45, 2.2, 0.55),
    ("continuous", 4, 0.4, 0.90, "balanced"): (-2.55, 0.85, 0.85),
    ("continuous", 4, 0.4, 0.90, "unbalanced"): (-2.5, 1.71, 0.43),
    ("binary", 4, 0.0, 0.75, "balanced"): (-3.9, 1.1, 1.1),
    ("binary", 4, 0.0, 0.75, "unbalanced"): (-3.35, 1.91, 0.48),
    ("binary", 4, 0.4, 0.75, "balanced"): (-3.28, 0.78, 0.78),
    ("binary", 4, 0.4, 0.75, "unbalanced"): (-3.08, 1.59, 0.40),
    ("binary", 4, 0.0, 0.90, "balanced"): (-8.0, 2.64, 2.64),
    ("binary", 4, 0.0, 0.90, "unbalanced"): (-7.45, 5.02, 1.26),
    ("binary", 4, 0.4, 0.90, "balanced"): (-6.4, 1.85, 1.85),
    ("binary", 4, 0.4, 0.90, "unbalanced"): (-7.0, 4.37, 1.09),
    ("continuous", 16, 0.0, 0.75, "balanced"): (-1.66, 0.26, 0.26),
    ("continuous", 16, 0.0, 0.75, "unbalanced"): (-1.66, 0.48, 0.12),
    ("continuous", 16, 0.4, 0.75, "balanced"): (-1.67, 0.10, 0.10),
    ("continuous", 16, 0.4, 0.75, "unbalanced"): (-1.67, 0.22, 0.054),
    ("continuous", 16, 0.0, 0.90, "balanced"): (-2.5, 0.61, 0.61),
    ("continuous", 16, 0.0, 0.90, "unbalanced"): (-2.47, 1.09, 0.27),
    ("continuous", 16, 0.4, 0.90, "balanced"): (-2.51, 0.23, 0.23),
    ("continuous", 16, 0.4, 0.90, "unbalanced"): (-2.5, 0.50, 0.126),
    ("binary", 16, 0.0, 0.75, "balanced"): (-5.8, 0.52, 0.52),
    ("binary", 16, 0.0, 0.75, "unbalanced"): (-4.9, 0.93, 0.23),
    ("binary", 16, 0.4, 0.75, "balanced"): (-3.5, 0.23, 0.23),
    ("binary", 16, 0.4, 0.75, "unbalanced"): (-3.38, 0.50, 0.124),
    ("binary", 16, 0.0, 0.90, "balanced"): (-12.6, 1.25, 1.25),
    ("binary", 16, 0.0, 0.90, "unbalanced"): (-10.1, 2.17, 0.54),
    ("binary", 16, 0.4, 0.90, "balanced"): (-7.0, 0.54, 0.54),
    ("binary", 16, 0.4, 0.90, "unbalanced"): (-6.55, 1.14, 0.28),
}


def _expand_betas(n_true: int, strength: str, strong: float, weak: float) -> tuple[float, ...]:
    n_strong = n_true // 4 if strength == "unbalanced" else n_true
    return (strong,) * n_strong + (weak,) * (n_true - n_strong)


def _make_design(
    distribution: str,
    n_true: int,
    correlation: float,
    target_auc: float,
    strength: str,
    with_noise: bool,
) -> LogisticDesign:
    intercept, strong, weak = _COEFFICIENTS[(distribution, n_true, correlation, target_auc, strength)]
    betas = _expand_betas(n_true, strength, strong, weak)
    n_noise = 12 if with_noise else 0
    return LogisticDesign(
        distribution=distribution,
        n_predictors=n_true + n_noise,
        n_noise=n_noise,
        correlation=correlation,
        target_auc=target_auc,
        strength=strength,
        intercept=intercept,
        betas=betas + (0.0,) * n_noise,
    )


def builtin_designs() -> tuple[LogisticDesign, ...]:
    """All 48 built-in designs.

    The grid crosses predictor distribution (continuous, binary), target
    c-statistic (0.75, 0.90), correlation (0, 0.4), and strength
    (balanced, unbalanced) with three predictor layouts: 4 informative,
    16 informative, and 4 informative plus 12 noise.  Noise designs
    reuse the coefficients of the matching 4-predictor design.
    """
    designs = []
    for n_true, with_noise in ((4, False), (16, False), (4, True)):
        for distribution in _DISTRIBUTIONS:
            for target_auc in (0.75, 0.90):
                for correlation in (0.0, 0.4):
                    for strength in _STRENGTHS:
                        designs.append(
                            _make_design(distribution, n_true, correlation, target_auc, strength, with_noise)
                        )
    return tuple(designs)


def design_by_label(label: str) -> LogisticDesign:
    """Look up a built-in design by its compact identifier."""
    for design in builtin_designs():
        if design.label == label:
            return design
    raise ValueError(f"unknown design label {label!r}")


@dataclass
class Dataset:
    """A predictor matrix with integer class labels.

    ``true_p`` carries the generating event probability per case when
    the data came from a synthetic design; it is None for external data.
    """

    x: np.ndarray
    y: np.ndarray
    true_p: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.x = np.ascontiguousarray(self.x, dtype=np.float64)
        if self.x.ndim != 2:
            raise ValueError("x must be a 2-D array")
        self.y = np.asarray(self.y)
        if self.y.ndim != 1 or len(self.y) != len(self.x):
            raise ValueError("y must be 1-D with one label per row of x")
        if not np.issubdtype(self.y.dtype, np.integer):
            if not np.all(self.y == np.round(self.y)):
                raise ValueError("y must contain integer class labels")
        self.y = self.y.astype(np.int64)
        if len(self.y) and self.y.min() < 0:
            raise ValueError("class labels must be non-negative")
        if self.true_p is not None:
            self.true_p = np.asarray(self.true_p, dtype=np.float64)
            if self.true_p.shape != self.y.shape:
                raise ValueError("true_p must match y in length")
            if np.any(~np.isfinite(self.true_p)) or self.true_p.min() < 0 or self.true_p.max() > 1:
                raise ValueError("true_p entries must lie in [0, 1]")

    @property
    def n_cases(self) -> int:
        return self.x.shape[0]

    @property
    def n_features(self) -> int:
        return self.x.shape[1]

    @property
    def n_classes(self) -> int:
        return int(self.y.max()) + 1 if len(self.y) else 0


def equicorrelation_matrix(p: int, rho: float) -> np.ndarray:
    """Correlation matrix with unit diagonal and constant off-diagonal rho."""
    if p < 1:
        raise ValueError("p must be >= 1")
    lo = -1.0 / (p - 1) if p > 1 else -1.0
    if not lo < rho < 1.0:
        raise ValueError(f"rho={rho} outside positive-definite range ({lo:.4f}, 1) for p={p}")
    m = np.full((p, p), rho, dtype=np.float64)
    np.fill_diagonal(m, 1.0)
    return m


def cholesky_lower(m: np.ndarray) -> np.ndarray:
    """Lower-triangular Cholesky factor of a symmetric positive-definite matrix."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("matrix must be square")
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise ValueError("matrix is not positive definite") from exc


def sample_mvn(n: int, p: int, rho: float, rng: np.random.Generator) -> np.ndarray:
    """Draw n rows from N(0, equicorrelation(p, rho)).

    Standard normal draws are consumed feature by feature and mixed with
    a lower-triangular factor, so with a fixed generator state the
    leading k columns equal the output of a k-predictor draw at the same
    rho.  Row i of the result is one case.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    l = cholesky_lower(equicorrelation_matrix(p, rho))
    z = rng.standard_normal((p, n))
    return np.ascontiguousarray((l @ z).T)


def binarize(x: np.ndarray, threshold: float = BINARIZE_THRESHOLD) -> np.ndarray:
    """Dichotomize to 0.0/1.0 with value 1 strictly above the threshold."""
    return (np.asarray(x) > threshold).astype(np.float64)


def linear_predictor(x: np.ndarray, design: LogisticDesign) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != design.n_predictors:
        raise ValueError(
            f"design {design.label} expects {design.n_predictors} predictors, got shape {x.shape}"
        )
    return design.intercept + x @ np.asarray(design.betas)


def inverse_logit(lp: np.ndarray) -> np.ndarray:
    """Numerically stable expit, exact at extreme linear predictors."""
    lp = np.asarray(lp, dtype=np.float64)
    out = np.empty_like(lp)
    pos = lp >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-lp[pos]))
    e = np.exp(lp[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def draw_outcomes(p: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Independent Bernoulli draws, one uniform per case."""
    p = np.asarray(p, dtype=np.float64)
    if np.any(~np.isfinite(p)) or p.min() < 0 or p.max() > 1:
        raise ValueError("probabilities must lie in [0, 1]")
    return (rng.random(p.shape) < p).astype(np.int64)


def _child_rngs(rng: np.random.Generator, n: int) -> list[np.random.Generator]:
    seed_seq = rng.bit_generator.seed_seq
    if seed_seq is None:
        raise ValueError("generator must be constructed from a SeedSequence (see rng.make_rng)")
    return [np.random.Generator(type(rng.bit_generator)(child)) for child in seed_seq.spawn(n)]


def generate_dataset(design: LogisticDesign, n: int, rng: np.random.Generator) -> Dataset:
    """Sample a dataset of n cases from a design.

    Predictor and outcome draws come from separate child streams of the
    given generator, so two designs with identical true probabilities
    and a shared seed produce identical outcome vectors even when one
    carries extra noise predictors.  Each call spawns fresh children, so
    reusing one generator yields independent datasets.
    """
    rng_x, rng_y = _child_rngs(rng, 2)
    latent = sample_mvn(n, design.n_predictors, design.correlation, rng_x)
    x = binarize(latent) if design.distribution == "binary" else latent
    true_p = inverse_logit(linear_predictor(x, design))
    y = draw_outcomes(true_p, rng_y)
    return Dataset(x=x, y=y, true_p=true_p)


def write_dataset_csv(data: Dataset, path: str) -> None:
    """Write a dataset as CSV with header x1..xp,y[,true_p].

    Floats are written with 17 significant digits so a read-back
    round-trips exactly.
    """
    cols = [f"x{i + 1}" for i in range(data.n_features)] + ["y"]
    if data.true_p is not None:
        cols.append("true_p")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for i in range(data.n_cases):
            parts = [format(v, ".17g") for v in data.x[i]]
            parts.append(str(int(data.y[i])))
            if data.true_p is not None:
                parts.append(format(data.true_p[i], ".17g"))
            fh.write(",".join(parts) + "\n")


def read_dataset_csv(path: str) -> Dataset:
    """Read a dataset written by :func:`write_dataset_csv`.

    Any CSV with columns x1..xp, an integer y column, and an optional
    true_p column is accepted; other headers are rejected by name.
    """
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        names = header.split(",")
        has_true_p = names[-1] == "true_p"
        feature_names = names[:-2] if has_true_p else names[:-1]
        y_name = names[-2] if has_true_p else names[-1]
        if y_name != "y":
            raise ValueError(f"expected a 'y' column, found {y_name!r}")
        expected = [f"x{i + 1}" for i in range(len(feature_names))]
        if feature_names != expected:
            bad = next(n for n, e in zip(feature_names, expected) if n != e)
            raise ValueError(f"unexpected feature column {bad!r}; expected x1..x{len(feature_names)}")
        if not feature_names:
            raise ValueError("no feature columns found")
        raw = np.loadtxt(fh, delimiter=",", dtype=np.float64, ndmin=2)
    if raw.shape[1] != len(names):
        raise ValueError(f"rows have {raw.shape[1]} fields, header has {len(names)}")
    p = len(feature_names)
    ycol = raw[:, p]
    if not np.all(ycol == np.round(ycol)):
        raise ValueError("column 'y' must contain integer class labels")
    true_p = raw[:, p + 1] if has_true_p else None
    return Dataset(x=raw[:, :p], y=ycol.astype(np.int64), true_p=true_p)
