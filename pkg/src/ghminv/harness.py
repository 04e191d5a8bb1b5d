"""Experiment drivers: distances, classification, stability metrics, window
scans for template matching, and synthetic data generators."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import (
    BadParamError,
    DegenerateNormalizationError,
    EmptyTrainError,
    KTooLargeError,
    LengthMismatchError,
    WindowTooLargeError,
)
from .features import FeatureVector, normalize_by_sum
from .field import MultiChannelField, apply_outer_affine, rotate_spatial, rotation_2d
from .moments import GhKernelTable, compute_moments
from .polynomials import InvariantSet

CHI_SQUARE_EPS = 1e-12


def _as_values(u) -> np.ndarray:
    return u.values if isinstance(u, FeatureVector) else np.asarray(u, dtype=np.float64)


def chi_square_distance(u, v) -> float:
    """Symmetric chi-square distance: sum (u-v)^2 / (|u| + |v| + eps)."""
    u, v = _as_values(u), _as_values(v)
    if u.shape != v.shape:
        raise LengthMismatchError(f"feature lengths differ: {u.shape} vs {v.shape}")
    return float(np.sum((u - v) ** 2 / (np.abs(u) + np.abs(v) + CHI_SQUARE_EPS)))


def mre(reference_feats, transformed_feats) -> np.ndarray:
    """Per-invariant mean relative error in percent.

    ``transformed_feats[i][j]`` is version j of reference i. Invariants whose
    reference magnitude is below 1e-30 for some i are reported as NaN and
    excluded with a warning.
    """
    refs = np.stack([_as_values(r) for r in reference_feats])
    versions = np.asarray(transformed_feats, dtype=np.float64)
    if versions.shape[0] != refs.shape[0] or versions.shape[2] != refs.shape[1]:
        raise LengthMismatchError("transformed_feats shape does not match references")
    denom = np.abs(refs)[:, None, :]
    bad = np.any(denom < 1e-30, axis=(0, 1))
    if np.any(bad):
        warnings.warn(
            f"{int(bad.sum())} invariant(s) have near-zero reference values; reported as NaN"
        )
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.abs(versions - refs[:, None, :]) / denom
    out = rel.mean(axis=(0, 1)) * 100.0
    out[bad] = np.nan
    return out


def nn_classify(train, test, truth=None):
    """Nearest-neighbor labels by chi-square distance; ties break on the
    lowest training index. Returns (labels, accuracy-or-None)."""
    if not train:
        raise EmptyTrainError("training set is empty")
    train_vals = [(_as_values(f), label) for label, f in train]
    labels = []
    for feat in test:
        v = _as_values(feat)
        dists = [chi_square_distance(v, tv) for tv, _ in train_vals]
        labels.append(train_vals[int(np.argmin(dists))][1])
    accuracy = None
    if truth is not None:
        accuracy = float(np.mean([a == b for a, b in zip(labels, truth)]))
    return labels, accuracy


# ---------------------------------------------------------------------------
# sliding-window template matching

@dataclass
class ScanRaster:
    """Feature vectors of all scanned window centers (row-major order)."""

    rows: np.ndarray
    cols: np.ndarray
    features: np.ndarray  # (centers, D); NaN rows mark degenerate windows
    window: int
    stride: int
    sigma: float


@dataclass
class DetectionResult:
    ranked_points: list[tuple[tuple[int, int], float]]
    window: int
    template_feature: FeatureVector


class _SetEvaluator:
    """Precompiled fast evaluator of an invariant set on window moments."""

    def __init__(self, invset: InvariantSet):
        self.invset = invset
        self.max_order = invset.max_symbol_order()
        self.compiled = []
        for poly in invset.polys:
            coeffs = np.array([float(c) for c in poly.terms.values()])
            idx = [
                tuple(zip(*(((n - 1,) + orders) for n, orders in mono)))
                for mono in poly.terms
            ]
            self.compiled.append((coeffs, idx))

    def raw_values(self, values: np.ndarray) -> np.ndarray:
        out = np.empty(len(self.compiled))
        for i, (coeffs, idx) in enumerate(self.compiled):
            prods = np.array([np.prod(values[ix]) for ix in idx])
            out[i] = float(coeffs @ prods)
        return out


def window_moment_values(
    window_data: np.ndarray, tables: list[np.ndarray], spacing: float
) -> np.ndarray:
    """Separable moments of one window after per-channel mean removal."""
    data = window_data - window_data.reshape(-1, window_data.shape[-1]).mean(axis=0)
    acc = data
    for table in tables:
        acc = np.tensordot(acc, table, axes=([0], [1]))
    return acc * spacing ** len(tables)


def sliding_window_scan(
    field: MultiChannelField,
    invset: InvariantSet,
    window: int,
    sigma: float,
    stride: int = 1,
) -> ScanRaster:
    """Feature vector on every window-sized neighborhood, stride-sampled.

    Windows whose sum-normalization is degenerate get NaN features.
    """
    if window % 2 == 0:
        raise BadParamError("window must be odd")
    if any(window > e for e in field.extent):
        raise WindowTooLargeError(f"window {window} exceeds extent {field.extent}")
    if field.coord_dim != 2:
        raise BadParamError("window scan is implemented for 2D fields")

    half = window // 2
    coords = (np.arange(window) - half) * field.spacing
    tables = [
        GhKernelTable.for_field(
            MultiChannelField(np.zeros((window, window, 1)), field.spacing),
            invset.max_symbol_order(),
            sigma,
        ).values[m]
        for m in range(2)
    ]
    evaluator = _SetEvaluator(invset)
    normalize = invset.normalization == "divide-by-sum"

    rows_out, cols_out, feats = [], [], []
    for r in range(half, field.extent[0] - half, stride):
        for c in range(half, field.extent[1] - half, stride):
            win = field.data[r - half : r + half + 1, c - half : c + half + 1]
            values = window_moment_values(win, tables, field.spacing)
            raw = evaluator.raw_values(values)
            if normalize:
                try:
                    feat = normalize_by_sum(raw)
                except DegenerateNormalizationError:
                    feat = np.full(raw.size - 1, np.nan)
            else:
                feat = raw
            rows_out.append(r)
            cols_out.append(c)
            feats.append(feat)
    return ScanRaster(
        rows=np.array(rows_out),
        cols=np.array(cols_out),
        features=np.array(feats),
        window=window,
        stride=stride,
        sigma=sigma,
    )


def rank_matches(raster: ScanRaster, template_feature: FeatureVector, k: int) -> DetectionResult:
    """Top-k scanned centers by ascending chi-square distance to the template."""
    n = raster.features.shape[0]
    if k > n:
        raise KTooLargeError(f"k={k} exceeds {n} scanned centers")
    tvals = _as_values(template_feature)
    diffs = raster.features - tvals
    with np.errstate(invalid="ignore"):
        dists = np.sum(diffs**2 / (np.abs(raster.features) + np.abs(tvals) + CHI_SQUARE_EPS), axis=1)
    dists = np.where(np.isnan(dists), np.inf, dists)
    order = np.argsort(dists, kind="stable")[:k]  # stable: row-major tie-break
    ranked = [
        ((int(raster.rows[i]), int(raster.cols[i])), float(dists[i])) for i in order
    ]
    tf = template_feature if isinstance(template_feature, FeatureVector) else FeatureVector(
        tvals, sigma=raster.sigma
    )
    return DetectionResult(ranked_points=ranked, window=raster.window, template_feature=tf)


# ---------------------------------------------------------------------------
# synthetic data

def synth_vortex_field(
    extent: tuple[int, int],
    centers: list[tuple[float, float]],
    radii: list[float],
    strengths: list[float],
    orientations: list[float] | None = None,
    affines: list[np.ndarray] | None = None,
    background: tuple[float, float] = (0.0, 0.0),
    rng_seed: int = 0,
) -> MultiChannelField:
    """Superpose Lamb-Oseen-style swirls on a uniform background flow.

    Each swirl has tangential speed ``strength * (1 - exp(-r^2/R^2)) / r``;
    its velocity contribution is rotated by its orientation and optionally
    passed through a per-vortex 2x2 affine to emulate channel variation.
    """
    if len(extent) != 2:
        raise BadParamError("vortex fields are 2D")
    if not (len(centers) == len(radii) == len(strengths)):
        raise BadParamError("centers, radii and strengths must have equal length")
    for cy, cx in centers:
        if not (0 <= cy < extent[0] and 0 <= cx < extent[1]):
            raise BadParamError(f"center ({cy}, {cx}) outside extent {extent}")
    if orientations is None:
        orientations = [0.0] * len(centers)
    yy, xx = np.indices(extent, dtype=np.float64)
    u = np.full(extent, float(background[0]))
    v = np.full(extent, float(background[1]))
    for i, ((cy, cx), radius, strength) in enumerate(zip(centers, radii, strengths)):
        dy = yy - cy
        dx = xx - cx
        r2 = dy**2 + dx**2
        with np.errstate(divide="ignore", invalid="ignore"):
            speed_over_r = strength * (1.0 - np.exp(-r2 / radius**2)) / r2
        speed_over_r = np.where(r2 > 0, speed_over_r, 0.0)
        du = -dy * speed_over_r
        dv = dx * speed_over_r
        rot = rotation_2d(orientations[i])
        du, dv = rot[0, 0] * du + rot[0, 1] * dv, rot[1, 0] * du + rot[1, 1] * dv
        if affines is not None and affines[i] is not None:
            a = np.asarray(affines[i], dtype=np.float64)
            du, dv = a[0, 0] * du + a[0, 1] * dv, a[1, 0] * du + a[1, 1] * dv
        u += du
        v += dv
    return MultiChannelField(np.stack([u, v], axis=-1))


def synth_texture(
    extent: tuple[int, int],
    channels: int = 3,
    rng_seed: int = 0,
    blur_sigma: float = 3.0,
    low: float = 0.15,
    high: float = 0.85,
) -> MultiChannelField:
    """Smooth random multi-channel texture with values inside [low, high]."""
    rng = np.random.default_rng(rng_seed)
    data = np.empty(extent + (channels,))
    for n in range(channels):
        layer = gaussian_filter(rng.standard_normal(extent), blur_sigma)
        lo, hi = layer.min(), layer.max()
        data[..., n] = low + (high - low) * (layer - lo) / (hi - lo)
    return MultiChannelField(data)


def raw_moment_feature(field: MultiChannelField, max_order: int, sigma: float) -> np.ndarray:
    """Plain moment values as a (non-invariant) baseline feature."""
    from .field import subtract_channel_mean

    tensor = compute_moments(subtract_channel_mean(field), max_order, sigma)
    return np.array([v for _, v in tensor.entries()])


def angle_error_study(
    templates: list[MultiChannelField],
    epsilon_list: list[float],
    invset: InvariantSet,
    sigma: float,
    n_versions: int = 12,
) -> dict:
    """Classification accuracy when the channel rotation angle is off by a
    relative mismatch epsilon from the spatial angle.

    Versions use theta_out = (1 + epsilon) * theta_in. Reports accuracy for
    the invariant features and for a raw-moment control that has no
    invariance and is expected to degrade.
    """
    from .features import feature_vector

    train = [(i, feature_vector(t, invset, sigma)) for i, t in enumerate(templates)]
    raw_train = [(i, raw_moment_feature(t, invset.max_symbol_order(), sigma)) for i, t in enumerate(templates)]
    angles = [(j + 1) * 2.0 * np.pi / n_versions for j in range(n_versions)]
    results = {}
    for eps in epsilon_list:
        feats, raw_feats, truth = [], [], []
        for i, template in enumerate(templates):
            for theta in angles:
                version = apply_outer_affine(
                    rotate_spatial(template, theta), rotation_2d((1.0 + eps) * theta)
                )
                feats.append(feature_vector(version, invset, sigma))
                raw_feats.append(raw_moment_feature(version, invset.max_symbol_order(), sigma))
                truth.append(i)
        _, acc = nn_classify(train, feats, truth)
        _, raw_acc = nn_classify(raw_train, raw_feats, truth)
        results[eps] = {"invariant": acc, "raw_moment": raw_acc}
    return results
