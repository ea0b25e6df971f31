"""Probability heatmaps over 2-D slices of predictor space.

A slice fixes every predictor except two continuous axes, evaluates a
fitted model's target-class probability on a regular grid over those
axes, and optionally superimposes the cases whose fixed predictors
match the slice exactly.  Grids export as CSV (canonical, for
downstream plotting) and as binary P6 PPM images with the overlay
rendered in two reserved colors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .forest import Forest
from .forest import predict_proba as _forest_predict
from .glm import GlmFit, predict_glm

__all__ = [
    "DEFAULT_COLORMAP",
    "NONTARGET_COLOR",
    "TARGET_COLOR",
    "HeatmapGrid",
    "SliceSpec",
    "compute_grid",
    "export_grid_csv",
    "export_ppm",
    "overlay_cases",
    "read_grid_csv",
    "slice_from_json",
    "slice_to_json",
]

# Overlay squares use these; linear colormaps should avoid hitting them.
TARGET_COLOR = (255, 0, 0)
NONTARGET_COLOR = (0, 255, 0)
DEFAULT_COLORMAP = ((255, 255, 255), (0, 0, 160))


@dataclass(frozen=True)
class SliceSpec:
    """A 2-D slice of predictor space.

    ``x_feature`` and ``y_feature`` index the two free axes;
    ``fixed_values`` pins every remaining feature.  ``target_class`` is
    the class label whose probability the grid shows.
    """

    x_feature: int
    y_feature: int
    fixed_values: dict[int, float] = field(default_factory=dict)
    x_range: tuple[float, float] = (0.0, 1.0)
    y_range: tuple[float, float] = (0.0, 1.0)
    resolution: int = 200
    target_class: int = 1

    def __post_init__(self) -> None:
        if self.x_feature < 0 or self.y_feature < 0:
            raise ValueError("axis feature indices must be non-negative")
        if self.x_feature == self.y_feature:
            raise ValueError("x_feature and y_feature must differ")
        if self.resolution < 2:
            raise ValueError("resolution must be >= 2")
        for name, (lo, hi) in (("x_range", self.x_range), ("y_range", self.y_range)):
            if not (np.isfinite(lo) and np.isfinite(hi)) or not lo < hi:
                raise ValueError(f"{name} must be a finite (min, max) pair with min < max")
        for feature in self.fixed_values:
            if feature in (self.x_feature, self.y_feature):
                raise ValueError(f"feature {feature} is an axis and cannot carry a fixed value")
            if feature < 0:
                raise ValueError("fixed_values keys must be non-negative feature indices")


def slice_to_json(spec: SliceSpec) -> str:
    """Serialize a slice as JSON (fixed-value keys become strings)."""
    payload = {
        "x_feature": spec.x_feature,
        "y_feature": spec.y_feature,
        "fixed_values": {str(k): float(v) for k, v in spec.fixed_values.items()},
        "x_range": [float(spec.x_range[0]), float(spec.x_range[1])],
        "y_range": [float(spec.y_range[0]), float(spec.y_range[1])],
        "resolution": spec.resolution,
        "target_class": spec.target_class,
    }
    return json.dumps(payload, indent=2)


def slice_from_json(text: str) -> SliceSpec:
    """Inverse of slice_to_json; rejects unknown keys by name."""
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"slice configuration is not valid JSON: {exc}") from None
    if not isinstance(payload, dict):
        raise ValueError("slice configuration must be a JSON object")
    known = {
        "x_feature", "y_feature", "fixed_values", "x_range", "y_range",
        "resolution", "target_class",
    }
    for key in payload:
        if key not in known:
            raise ValueError(f"unknown slice key {key!r}")
    kwargs = dict(payload)
    if "fixed_values" in kwargs:
        kwargs["fixed_values"] = {int(k): float(v) for k, v in kwargs["fixed_values"].items()}
    for name in ("x_range", "y_range"):
        if name in kwargs:
            lo, hi = kwargs[name]
            kwargs[name] = (float(lo), float(hi))
    return SliceSpec(**kwargs)


@dataclass(frozen=True)
class HeatmapGrid:
    """Evaluated probabilities over a slice.

    ``values[i, j]`` is the probability at ``(x_coords[i], y_coords[j])``.
    ``overlay`` holds (x, y, is_target_class) case points added by
    overlay_cases.  Color bounds equal the value extremes under the
    bounded scale and (0, 1) under the fixed scale.
    """

    values: np.ndarray
    x_coords: np.ndarray
    y_coords: np.ndarray
    color_min: float
    color_max: float
    overlay: tuple[tuple[float, float, bool], ...] = ()


def _model_feature_count(model) -> int:
    if isinstance(model, Forest):
        return model.n_features
    if isinstance(model, GlmFit):
        expanded = model.coef.shape[1] - 1
        return expanded - sum(len(basis.knots) - 2 for _, basis in model.spline_bases)
    raise TypeError(f"cannot compute a grid for {type(model).__name__}")


def _model_predict(model, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Probability matrix and the class labels labelling its columns."""
    if isinstance(model, Forest):
        return _forest_predict(model, x), np.asarray(model.classes)
    return predict_glm(model, x), np.asarray(model.classes)


def compute_grid(model, spec: SliceSpec, scale: str = "bounded") -> HeatmapGrid:
    """Evaluate the model's target-class probability at every vertex of
    the slice grid.

    Axes are linearly spaced over the slice ranges, endpoints included.
    ``scale="bounded"`` sets the color bounds to the grid extremes;
    ``scale="fixed"`` sets them to (0, 1) so several heatmaps share one
    scale.
    """
    if scale not in ("bounded", "fixed"):
        raise ValueError('scale must be "bounded" or "fixed"')
    n_features = _model_feature_count(model)
    for name, axis in (("x_feature", spec.x_feature), ("y_feature", spec.y_feature)):
        if axis >= n_features:
            raise ValueError(f"{name}={axis} is out of range for a {n_features}-feature model")
    for feature in spec.fixed_values:
        if feature >= n_features:
            raise ValueError(
                f"fixed value given for feature {feature}, beyond the model's {n_features}"
            )
    for feature in range(n_features):
        if feature in (spec.x_feature, spec.y_feature):
            continue
        if feature not in spec.fixed_values:
            raise ValueError(f"missing fixed value for feature {feature}")

    res = spec.resolution
    x_coords = np.linspace(spec.x_range[0], spec.x_range[1], res)
    y_coords = np.linspace(spec.y_range[0], spec.y_range[1], res)
    points = np.empty((res * res, n_features), dtype=np.float64)
    for feature, value in spec.fixed_values.items():
        points[:, feature] = value
    points[:, spec.x_feature] = np.repeat(x_coords, res)
    points[:, spec.y_feature] = np.tile(y_coords, res)

    probs, classes = _model_predict(model, points)
    matches = np.nonzero(classes == spec.target_class)[0]
    if len(matches) != 1:
        raise ValueError(f"model does not predict class {spec.target_class}")
    values = probs[:, matches[0]].reshape(res, res)

    if scale == "bounded":
        color_min, color_max = float(values.min()), float(values.max())
    else:
        color_min, color_max = 0.0, 1.0
    return HeatmapGrid(
        values=values,
        x_coords=x_coords,
        y_coords=y_coords,
        color_min=color_min,
        color_max=color_max,
    )


def overlay_cases(grid: HeatmapGrid, data, spec: SliceSpec) -> HeatmapGrid:
    """Add the cases whose non-axis features exactly equal the slice's
    fixed values, marking target-class membership.

    Returns a new grid; the input is unchanged.  Cases outside the axis
    ranges are kept and clamped at render time.
    """
    x = np.asarray(data.x, dtype=np.float64)
    y = np.asarray(data.y)
    keep = np.ones(len(x), dtype=bool)
    for feature, value in spec.fixed_values.items():
        keep &= x[:, feature] == value
    points = list(grid.overlay)
    for i in np.nonzero(keep)[0]:
        points.append(
            (
                float(x[i, spec.x_feature]),
                float(x[i, spec.y_feature]),
                bool(y[i] == spec.target_class),
            )
        )
    return replace(grid, overlay=tuple(points))


def export_grid_csv(grid: HeatmapGrid, path: str) -> None:
    """Write ``x,y,prob`` rows in row-major order (x varies slowest),
    6 significant digits."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("x,y,prob\n")
        for i, x in enumerate(grid.x_coords):
            for j, y in enumerate(grid.y_coords):
                fh.write(
                    f"{format(float(x), '.6g')},{format(float(y), '.6g')},"
                    f"{format(float(grid.values[i, j]), '.6g')}\n"
                )


def read_grid_csv(path: str) -> np.ndarray:
    """Read an export back as an (n, 3) array of x, y, prob rows."""
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        header = fh.readline().rstrip("\n")
        if header != "x,y,prob":
            raise ValueError(f"unexpected grid header in {path!r}")
        for line in fh:
            cells = line.rstrip("\n").split(",")
            if len(cells) != 3:
                raise ValueError(f"malformed grid row in {path!r}")
            rows.append([float(c) for c in cells])
    return np.asarray(rows, dtype=np.float64)


def _nearest_index(value: float, coords: np.ndarray) -> int:
    lo, hi = float(coords[0]), float(coords[-1])
    clamped = min(max(value, lo), hi)
    # uniform spacing, so the nearest vertex is a direct computation
    return int(round((clamped - lo) / (hi - lo) * (len(coords) - 1)))


def export_ppm(
    grid: HeatmapGrid,
    path: str,
    colormap: tuple[tuple[int, int, int], tuple[int, int, int]] = DEFAULT_COLORMAP,
) -> None:
    """Render the grid as a binary P6 pixmap, width = height = resolution.

    Colors interpolate linearly from ``colormap[0]`` at ``color_min`` to
    ``colormap[1]`` at ``color_max``; a degenerate scale paints the low
    color everywhere.  The image row order puts the largest y coordinate
    on top.  Overlay cases are drawn last as 3x3 squares, red for the
    target class and green otherwise, clamped into the frame.
    """
    res = len(grid.x_coords)
    span = grid.color_max - grid.color_min
    if span > 0:
        t = (grid.values - grid.color_min) / span
    else:
        t = np.zeros_like(grid.values)
    t = np.clip(t, 0.0, 1.0)
    low = np.array(colormap[0], dtype=np.float64)
    high = np.array(colormap[1], dtype=np.float64)
    # pixel[row, col] shows (x_coords[col], y_coords[res - 1 - row])
    shade = t.T[::-1, :, None]
    pixels = np.rint(low + (high - low) * shade).astype(np.uint8)

    for x, y, is_target in grid.overlay:
        col = _nearest_index(x, grid.x_coords)
        row = res - 1 - _nearest_index(y, grid.y_coords)
        color = TARGET_COLOR if is_target else NONTARGET_COLOR
        r0, r1 = max(0, row - 1), min(res, row + 2)
        c0, c1 = max(0, col - 1), min(res, col + 2)
        pixels[r0:r1, c0:c1] = color

    with open(path, "wb") as fh:
        fh.write(f"P6\n{res} {res}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())
