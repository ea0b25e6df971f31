"""Probability-surface slices: grid evaluation, case overlays, and
image/CSV export."""

import numpy as np
import pytest

from forestlab.dataspace import (
    DEFAULT_COLORMAP,
    HeatmapGrid,
    NONTARGET_COLOR,
    SliceSpec,
    TARGET_COLOR,
    compute_grid,
    export_grid_csv,
    export_ppm,
    overlay_cases,
    read_grid_csv,
    slice_from_json,
    slice_to_json,
)
from forestlab.forest import Forest, ForestParams, fit_forest
from forestlab.glm import GlmFit
from forestlab.rng import derive_seed, make_rng
from forestlab.synthetic import Dataset


def stump_forest():
    """One tree over two features: feature 0 <= 0 predicts (0.8, 0.2),
    otherwise (0.3, 0.7)."""
    return Forest(
        params=ForestParams(n_tree=1, mtry=2, min_node_size=1, seed=0),
        classes=np.array([0, 1]),
        n_features=2,
        feature=np.array([0, -1, -1], dtype=np.int64),
        threshold=np.array([0.0, 0.0, 0.0]),
        left=np.array([1, -1, -1], dtype=np.int64),
        right=np.array([2, -1, -1], dtype=np.int64),
        node_weight=np.array([10, 5, 5], dtype=np.int64),
        node_gain=np.array([0.1, 0.0, 0.0]),
        leaf_prop=np.array([[0.0, 0.0], [0.8, 0.2], [0.3, 0.7]]),
        tree_offsets=np.array([0, 3], dtype=np.int64),
        inbag_counts=np.ones((1, 10), dtype=np.int64),
    )


def spec_2d(**overrides):
    base = dict(
        x_feature=0, y_feature=1, x_range=(-1.0, 1.0), y_range=(-1.0, 1.0),
        resolution=5,
    )
    base.update(overrides)
    return SliceSpec(**base)


def test_stump_grid_is_piecewise_constant():
    grid = compute_grid(stump_forest(), spec_2d())
    assert grid.values.shape == (5, 5)
    assert np.allclose(grid.x_coords, [-1.0, -0.5, 0.0, 0.5, 1.0])
    # split at 0 with <= going left: coordinates up to 0 take the left leaf
    assert np.all(grid.values[:3, :] == 0.2)
    assert np.all(grid.values[3:, :] == 0.7)
    # nothing varies along the unused axis
    assert np.all(grid.values == grid.values[:, :1])
    assert grid.color_min == 0.2 and grid.color_max == 0.7


def test_grid_refinement_is_pointwise_stable():
    data_rng = make_rng(derive_seed(70, "refine"))
    x = data_rng.standard_normal((80, 2))
    y = (data_rng.random(80) < 0.4).astype(int)
    forest = fit_forest(Dataset(x=x, y=y), ForestParams(n_tree=30, seed=2))
    coarse = compute_grid(forest, spec_2d(resolution=5))
    fine = compute_grid(forest, spec_2d(resolution=9))
    # resolution 9 visits every resolution-5 vertex (both include endpoints)
    assert np.allclose(fine.x_coords[::2], coarse.x_coords)
    assert np.allclose(fine.values[::2, ::2], coarse.values, atol=1e-12)


def test_forest_grid_stays_inside_leaf_proportion_hull():
    data_rng = make_rng(derive_seed(70, "hull"))
    x = data_rng.standard_normal((60, 2))
    y = (data_rng.random(60) < 0.3).astype(int)
    y[:2] = (0, 1)
    forest = fit_forest(Dataset(x=x, y=y), ForestParams(n_tree=25, seed=3))
    grid = compute_grid(forest, spec_2d(resolution=12, x_range=(-4, 4), y_range=(-4, 4)))
    leaf_p1 = forest.leaf_prop[forest.feature == -1][:, 1]
    assert grid.values.min() >= leaf_p1.min() - 1e-12
    assert grid.values.max() <= leaf_p1.max() + 1e-12


def test_glm_grid_constant_for_zero_coefficients():
    fit = GlmFit(
        coef=np.zeros((2, 3)), classes=np.array([0, 1, 2]),
        converged=True, n_iter=0, spline_bases=(),
    )
    grid = compute_grid(fit, spec_2d(target_class=2), scale="fixed")
    assert np.allclose(grid.values, 1 / 3)
    assert grid.color_min == 0.0 and grid.color_max == 1.0


def test_compute_grid_validation():
    with pytest.raises(ValueError, match="missing fixed value for feature 2"):
        compute_grid(
            GlmFit(
                coef=np.zeros((1, 4)), classes=np.array([0, 1]),
                converged=True, n_iter=0, spline_bases=(),
            ),
            spec_2d(),
        )
    with pytest.raises(ValueError, match="y_feature=1 is out of range"):
        compute_grid(
            GlmFit(
                coef=np.zeros((1, 2)), classes=np.array([0, 1]),
                converged=True, n_iter=0, spline_bases=(),
            ),
            spec_2d(),
        )
    with pytest.raises(ValueError, match="does not predict class 5"):
        compute_grid(stump_forest(), spec_2d(target_class=5))
    with pytest.raises(ValueError, match='scale must be'):
        compute_grid(stump_forest(), spec_2d(), scale="log")


def test_bounded_scale_attained_on_grid():
    grid = compute_grid(stump_forest(), spec_2d())
    assert np.any(grid.values == grid.color_min)
    assert np.any(grid.values == grid.color_max)


def test_overlay_keeps_exact_fixed_matches():
    spec = SliceSpec(
        x_feature=0, y_feature=1, fixed_values={2: 0.5},
        x_range=(-1, 1), y_range=(-1, 1), resolution=4,
    )
    grid = HeatmapGrid(
        values=np.zeros((4, 4)), x_coords=np.linspace(-1, 1, 4),
        y_coords=np.linspace(-1, 1, 4), color_min=0.0, color_max=1.0,
    )
    x = np.array([
        [0.2, 0.3, 0.5],   # matches the fixed value
        [0.2, 0.3, 0.5001],  # near misses are excluded, not snapped
        [-0.4, 0.9, 0.5],  # matches
        [5.0, -7.0, 0.5],  # matches but lies outside both ranges
    ])
    y = np.array([1, 1, 0, 1])
    decorated = overlay_cases(grid, Dataset(x=x, y=y), spec)
    assert grid.overlay == ()  # input untouched
    assert decorated.overlay == (
        (0.2, 0.3, True),
        (-0.4, 0.9, False),
        (5.0, -7.0, True),
    )
    # no fixed values: every case qualifies
    all_in = overlay_cases(grid, Dataset(x=x[:, :2], y=y), spec_2d(resolution=4))
    assert len(all_in.overlay) == 4
    none_in = overlay_cases(
        grid, Dataset(x=np.array([[0.1, 0.2, 9.0]]), y=np.array([1])), spec
    )
    assert none_in.overlay == ()


def test_ppm_bytes_and_overlay_colors(tmp_path):
    grid = compute_grid(stump_forest(), spec_2d())
    grid = overlay_cases(
        grid,
        Dataset(x=np.array([[-1.0, 1.0], [1.0, -1.0]]), y=np.array([1, 0])),
        spec_2d(),
    )
    path = tmp_path / "surface.ppm"
    export_ppm(grid, str(path))
    raw = path.read_bytes()
    header = b"P6\n5 5\n255\n"
    assert raw.startswith(header)
    payload = raw[len(header):]
    assert len(payload) == 5 * 5 * 3
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(5, 5, 3)
    # largest y renders on top; low x is the left column.  the (x=-1, y=1)
    # target case paints a clamped 2x2 red block in the top-left corner
    assert tuple(pixels[0, 0]) == TARGET_COLOR
    assert tuple(pixels[4, 4]) == NONTARGET_COLOR
    # away from the overlays, the low-probability half renders the low color
    assert tuple(pixels[0, 2]) == DEFAULT_COLORMAP[0]
    # and the high-probability half the high color
    assert tuple(pixels[0, 4]) == DEFAULT_COLORMAP[1]


def test_ppm_degenerate_scale_paints_low_color(tmp_path):
    grid = HeatmapGrid(
        values=np.full((3, 3), 0.4), x_coords=np.linspace(0, 1, 3),
        y_coords=np.linspace(0, 1, 3), color_min=0.4, color_max=0.4,
    )
    path = tmp_path / "flat.ppm"
    export_ppm(grid, str(path))
    payload = path.read_bytes()[len(b"P6\n3 3\n255\n"):]
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(-1, 3)
    assert np.all(pixels == np.array(DEFAULT_COLORMAP[0], dtype=np.uint8))


def test_grid_csv_round_trip(tmp_path):
    grid = compute_grid(stump_forest(), spec_2d())
    path = tmp_path / "grid.csv"
    export_grid_csv(grid, str(path))
    lines = path.read_text().splitlines()
    assert lines[0] == "x,y,prob"
    assert len(lines) == 1 + 25
    table = read_grid_csv(str(path))
    assert table.shape == (25, 3)
    # rows walk x outer, y inner
    assert np.allclose(table[:5, 0], -1.0)
    assert np.allclose(table[:5, 1], grid.y_coords)
    expect = np.array([
        format(v, ".6g") for v in grid.values.ravel()
    ], dtype=np.float64)
    assert np.array_equal(table[:, 2], expect)


def test_grid_csv_read_errors(tmp_path):
    bad_header = tmp_path / "h.csv"
    bad_header.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match="unexpected grid header"):
        read_grid_csv(str(bad_header))
    bad_row = tmp_path / "r.csv"
    bad_row.write_text("x,y,prob\n1,2\n")
    with pytest.raises(ValueError, match="malformed grid row"):
        read_grid_csv(str(bad_row))


def test_slice_spec_validation():
    with pytest.raises(ValueError, match="must differ"):
        SliceSpec(x_feature=0, y_feature=0)
    with pytest.raises(ValueError, match="resolution"):
        SliceSpec(x_feature=0, y_feature=1, resolution=1)
    with pytest.raises(ValueError, match="x_range"):
        SliceSpec(x_feature=0, y_feature=1, x_range=(1.0, 1.0))
    with pytest.raises(ValueError, match="non-negative"):
        SliceSpec(x_feature=-1, y_feature=1)


def test_slice_json_round_trip():
    spec = SliceSpec(
        x_feature=1, y_feature=3, fixed_values={0: 0.5, 2: -1.0},
        x_range=(-2.0, 2.0), y_range=(0.0, 4.0), resolution=33, target_class=0,
    )
    assert slice_from_json(slice_to_json(spec)) == spec
    with pytest.raises(ValueError, match="unknown slice key 'bogus'"):
        slice_from_json('{"x_feature": 0, "y_feature": 1, "bogus": 2}')
