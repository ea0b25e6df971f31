"""Synthetic designs: the built-in grid, sampling, and CSV round trips."""

import numpy as np
import pytest

from forestlab.metrics import c_statistic
from forestlab.rng import derive_seed, make_rng
from forestlab.synthetic import (
    BINARIZE_THRESHOLD,
    Dataset,
    LogisticDesign,
    binarize,
    builtin_designs,
    cholesky_lower,
    design_by_label,
    draw_outcomes,
    equicorrelation_matrix,
    generate_dataset,
    inverse_logit,
    linear_predictor,
    read_dataset_csv,
    sample_mvn,
    write_dataset_csv,
)


# ---------------------------------------------------------------- grid


def test_builtin_grid_shape():
    designs = builtin_designs()
    assert len(designs) == 48
    labels = [d.label for d in designs]
    assert len(set(labels)) == 48
    assert sum(1 for d in designs if d.target_auc == 0.90) == 24
    assert sum(1 for d in designs if d.n_noise > 0) == 16
    for d in designs:
        if d.n_noise:
            assert d.n_predictors == 16 and d.n_noise == 12 and d.n_true == 4
        else:
            assert d.n_predictors in (4, 16)


def test_builtin_coefficient_structure():
    d = design_by_label("b_4b_75_0_bal")
    assert d.intercept == -3.9
    assert d.betas == (1.1, 1.1, 1.1, 1.1)
    noisy = design_by_label("b_4c_75_0_bal_noise")
    assert noisy.betas == (0.51,) * 4 + (0.0,) * 12
    assert noisy.intercept == design_by_label("b_4c_75_0_bal").intercept
    for d in builtin_designs():
        if d.strength == "unbalanced":
            strong = [b for b in d.betas if b != 0][: d.n_true // 4]
            weak = [b for b in d.betas if b != 0][d.n_true // 4 :]
            ratio = strong[0] / weak[0]
            assert 3.5 <= ratio <= 4.5


def test_label_and_seed_label():
    d = design_by_label("b_4c_90_4_unb_noise")
    assert d.distribution == "continuous"
    assert d.correlation == 0.4
    assert d.target_auc == 0.90
    assert d.strength == "unbalanced"
    assert d.seed_label == "b_4c_90_4_unb"
    plain = design_by_label("b_4c_90_4_unb")
    assert plain.seed_label == plain.label


def test_design_by_label_unknown():
    with pytest.raises(ValueError, match="unknown design label"):
        design_by_label("b_5c_75_0_bal")


def test_design_validation():
    with pytest.raises(ValueError, match="zero betas"):
        LogisticDesign(
            distribution="continuous", n_predictors=2, n_noise=1, correlation=0.0,
            target_auc=0.75, strength="balanced", intercept=-1.0, betas=(0.5, 0.5),
        )
    with pytest.raises(ValueError, match="single coefficient magnitude"):
        LogisticDesign(
            distribution="continuous", n_predictors=2, n_noise=0, correlation=0.0,
            target_auc=0.75, strength="balanced", intercept=-1.0, betas=(0.5, 0.9),
        )
    with pytest.raises(ValueError, match="ratio"):
        LogisticDesign(
            distribution="continuous", n_predictors=2, n_noise=0, correlation=0.0,
            target_auc=0.75, strength="unbalanced", intercept=-1.0, betas=(1.0, 0.5),
        )


# ---------------------------------------------------------------- pieces


def test_equicorrelation_matrix():
    assert np.array_equal(equicorrelation_matrix(2, 0.0), np.eye(2))
    m = equicorrelation_matrix(4, 0.4)
    assert np.all(np.diag(m) == 1.0)
    off = m[~np.eye(4, dtype=bool)]
    assert np.all(off == 0.4)
    with pytest.raises(ValueError, match="positive-definite"):
        equicorrelation_matrix(3, -0.6)


def test_cholesky_lower():
    assert np.allclose(cholesky_lower(np.eye(3)), np.eye(3))
    m = np.array([[1.0, 0.4], [0.4, 1.0]])
    l = cholesky_lower(m)
    assert np.allclose(l, [[1.0, 0.0], [0.4, np.sqrt(0.84)]])
    assert np.max(np.abs(l @ l.T - m)) < 1e-10
    with pytest.raises(ValueError, match="not positive definite"):
        cholesky_lower(np.array([[1.0, 1.0], [1.0, 1.0]]))


def test_sample_mvn_moments():
    rng = make_rng(derive_seed(11, "mvn-moments"))
    x = sample_mvn(100_000, 4, 0.4, rng)
    assert np.max(np.abs(x.mean(axis=0))) < 0.02
    corr = np.corrcoef(x.T)
    off = corr[~np.eye(4, dtype=bool)]
    assert np.max(np.abs(off - 0.4)) < 0.02
    x0 = sample_mvn(100_000, 4, 0.0, make_rng(derive_seed(11, "mvn-zero")))
    corr0 = np.corrcoef(x0.T)
    assert np.max(np.abs(corr0[~np.eye(4, dtype=bool)])) < 0.02


def test_sample_mvn_single_draw():
    x = sample_mvn(1, 1, 0.0, make_rng(3))
    assert x.shape == (1, 1)
    assert np.isfinite(x[0, 0])


def test_sample_mvn_prefix_stability():
    # leading columns do not depend on how many more columns are drawn
    a = sample_mvn(50, 4, 0.4, make_rng(21))
    b = sample_mvn(50, 16, 0.4, make_rng(21))
    assert np.array_equal(a, b[:, :4])


def test_binarize():
    assert BINARIZE_THRESHOLD == 0.0
    x = np.array([[-0.1, 0.0, 0.2]])
    assert np.array_equal(binarize(x), [[0.0, 0.0, 1.0]])
    z = np.zeros((3, 2))
    assert np.array_equal(binarize(z, threshold=0.5), z)
    rng = make_rng(derive_seed(11, "binarize"))
    col = rng.standard_normal(100_000)
    assert abs(binarize(col).mean() - 0.5) < 0.01


def test_binarize_preserves_latent_correlation_shape():
    # correlated latent pair: binarized correlation (2/pi) arcsin(rho)
    rng = make_rng(derive_seed(11, "tetrachoric"))
    x = binarize(sample_mvn(100_000, 2, 0.4, rng))
    r = np.corrcoef(x.T)[0, 1]
    assert abs(r - (2 / np.pi) * np.arcsin(0.4)) < 0.01


def test_linear_predictor():
    d = design_by_label("b_4c_75_0_bal")
    row = np.ones((1, 4))
    assert np.allclose(linear_predictor(row, d), -1.6 + 4 * 0.51)
    assert np.allclose(linear_predictor(np.zeros((1, 4)), d), -1.6)
    d9 = design_by_label("b_4b_90_0_bal")
    x = np.array([[1.0, 0.0, 0.0, 0.0]])
    assert np.allclose(linear_predictor(x, d9), -8.0 + 2.64)
    with pytest.raises(ValueError, match="expects 4 predictors"):
        linear_predictor(np.ones((1, 5)), d)


def test_inverse_logit():
    assert inverse_logit(np.array([0.0]))[0] == 0.5
    assert abs(inverse_logit(np.array([-1.6]))[0] - 0.1680) < 5e-5
    tiny = inverse_logit(np.array([-40.0]))[0]
    assert 0.0 <= tiny <= 1e-15
    huge = inverse_logit(np.array([40.0]))[0]
    assert np.isfinite(huge) and huge <= 1.0
    lp = np.linspace(-30, 30, 101)
    p = inverse_logit(lp)
    assert np.allclose(p + inverse_logit(-lp), 1.0, atol=1e-15)


def test_draw_outcomes():
    rng = make_rng(4)
    assert np.array_equal(draw_outcomes(np.zeros(10), rng), np.zeros(10))
    assert np.array_equal(draw_outcomes(np.ones(10), rng), np.ones(10))
    frac = draw_outcomes(np.full(100_000, 0.2), make_rng(derive_seed(4, "bern"))).mean()
    assert abs(frac - 0.2) < 0.005
    with pytest.raises(ValueError):
        draw_outcomes(np.array([1.2]), rng)


# ---------------------------------------------------------------- datasets


def test_generate_dataset_shapes_and_determinism():
    d = design_by_label("b_4c_75_0_bal")
    a = generate_dataset(d, 200, make_rng(99))
    assert a.x.shape == (200, 4)
    assert a.y.shape == (200,)
    assert a.true_p is not None and a.true_p.shape == (200,)
    b = generate_dataset(d, 200, make_rng(99))
    assert np.array_equal(a.x, b.x)
    assert np.array_equal(a.y, b.y)
    assert np.array_equal(a.true_p, b.true_p)


def test_generate_dataset_fresh_children_per_call():
    d = design_by_label("b_4c_75_0_bal")
    rng = make_rng(99)
    a = generate_dataset(d, 100, rng)
    b = generate_dataset(d, 100, rng)
    assert not np.array_equal(a.x, b.x)


def test_generate_dataset_event_probability():
    d = design_by_label("b_4c_75_0_bal")
    data = generate_dataset(d, 100_000, make_rng(derive_seed(12, "meanp")))
    assert abs(float(data.true_p.mean()) - 0.20) < 0.005


def test_generate_dataset_discrimination_on_target():
    d = design_by_label("b_16b_90_4_unb")
    data = generate_dataset(d, 100_000, make_rng(derive_seed(12, "target-c")))
    assert abs(c_statistic(data.true_p, data.y) - 0.90) < 0.01


def test_noise_variant_shares_informative_draws():
    parent = design_by_label("b_4c_90_4_bal")
    noisy = design_by_label("b_4c_90_4_bal_noise")
    rng_seed = derive_seed(3000, parent.seed_label, "test")
    a = generate_dataset(parent, 500, make_rng(rng_seed))
    b = generate_dataset(noisy, 500, make_rng(rng_seed))
    assert np.array_equal(a.x, b.x[:, :4])
    assert np.array_equal(a.y, b.y)
    assert np.array_equal(a.true_p, b.true_p)
    assert b.x.shape == (500, 16)


def test_binary_designs_have_binary_features():
    d = design_by_label("b_16b_75_4_bal")
    data = generate_dataset(d, 5000, make_rng(8))
    assert set(np.unique(data.x)) <= {0.0, 1.0}
    prevalence = data.x.mean(axis=0)
    assert np.max(np.abs(prevalence - 0.5)) < 0.05


def test_dataset_validation():
    with pytest.raises(ValueError, match="2-D"):
        Dataset(x=np.zeros(3), y=np.zeros(3))
    with pytest.raises(ValueError, match="one label per row"):
        Dataset(x=np.zeros((3, 2)), y=np.zeros(2))
    with pytest.raises(ValueError, match="integer class labels"):
        Dataset(x=np.zeros((2, 1)), y=np.array([0.5, 1.0]))
    with pytest.raises(ValueError, match="non-negative"):
        Dataset(x=np.zeros((2, 1)), y=np.array([-1, 1]))
    with pytest.raises(ValueError, match="true_p"):
        Dataset(x=np.zeros((2, 1)), y=np.array([0, 1]), true_p=np.array([0.5]))
    with pytest.raises(ValueError, match=r"\[0, 1\]"):
        Dataset(x=np.zeros((2, 1)), y=np.array([0, 1]), true_p=np.array([0.5, 1.5]))
    data = Dataset(x=np.zeros((2, 3)), y=np.array([0, 2]))
    assert data.n_cases == 2
    assert data.n_features == 3
    assert data.n_classes == 3


def test_csv_round_trip(tmp_path):
    d = design_by_label("b_4b_75_0_unb")
    data = generate_dataset(d, 50, make_rng(31))
    path = tmp_path / "data.csv"
    write_dataset_csv(data, str(path))
    back = read_dataset_csv(str(path))
    assert np.array_equal(back.x, data.x)
    assert np.array_equal(back.y, data.y)
    assert np.array_equal(back.true_p, data.true_p)


def test_csv_round_trip_without_true_p(tmp_path):
    data = Dataset(x=np.array([[1.25, -3.5], [0.0, 2.0]]), y=np.array([1, 0]))
    path = tmp_path / "plain.csv"
    write_dataset_csv(data, str(path))
    back = read_dataset_csv(str(path))
    assert back.true_p is None
    assert np.array_equal(back.x, data.x)


def test_csv_schema_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("x1,outcome\n1.0,0\n")
    with pytest.raises(ValueError, match="'y' column"):
        read_dataset_csv(str(bad))
    bad.write_text("x1,x3,y\n1.0,2.0,0\n")
    with pytest.raises(ValueError, match="'x3'"):
        read_dataset_csv(str(bad))
    bad.write_text("x1,y\n1.0,0.5\n")
    with pytest.raises(ValueError, match="integer class labels"):
        read_dataset_csv(str(bad))
