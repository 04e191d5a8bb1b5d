"""Numeric evaluation of invariant sets on fields, producing feature vectors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateNormalizationError, DimMismatchError
from .field import MultiChannelField, circular_mask, inscribed_circle_mask, subtract_channel_mean
from .moments import MomentTensor, compute_moments
from .polynomials import InvariantSet, MomentPolynomial

DEGENERATE_SUM = 1e-30


@dataclass
class FeatureVector:
    """Ordered invariant values with provenance metadata."""

    values: np.ndarray
    sigma: float
    normalization: str = "none"
    set_id: str | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)

    def __len__(self) -> int:
        return self.values.size


def evaluate(poly: MomentPolynomial, moments: MomentTensor) -> float:
    """Evaluate one invariant polynomial on a moment tensor."""
    return poly.evaluate(moments)


def evaluate_set(invset: InvariantSet, moments: MomentTensor) -> np.ndarray:
    return np.array([p.evaluate(moments) for p in invset.polys])


def normalize_by_sum(raw: np.ndarray) -> np.ndarray:
    """Divide by the sum and drop the last (linearly dependent) coordinate."""
    total = float(raw.sum())
    if abs(total) < DEGENERATE_SUM:
        raise DegenerateNormalizationError(
            f"invariant sum {total:g} too close to zero for normalization"
        )
    return raw[:-1] / total


def feature_vector(
    field: MultiChannelField,
    invset: InvariantSet,
    sigma: float,
    mask: bool = False,
) -> FeatureVector:
    """Full pipeline: (mask) -> mean removal -> moments -> invariants -> norm.

    With ``mask`` set, the inscribed-circle mask is applied first and the
    channel mean is taken over in-mask samples only.
    """
    if field.coord_dim != invset.coord_dim or field.channel_dim != invset.channel_dim:
        raise DimMismatchError(
            f"field is M={field.coord_dim}, N={field.channel_dim}; set wants "
            f"M={invset.coord_dim}, N={invset.channel_dim}"
        )
    if mask:
        prepared = subtract_channel_mean(circular_mask(field), inscribed_circle_mask(field.extent))
    else:
        prepared = subtract_channel_mean(field)
    moments = compute_moments(prepared, invset.max_symbol_order(), sigma)
    raw = evaluate_set(invset, moments)
    if invset.normalization == "divide-by-sum":
        values = normalize_by_sum(raw)
    else:
        values = raw
    if not np.all(np.isfinite(values)):
        raise DegenerateNormalizationError("non-finite feature values")
    return FeatureVector(values=values, sigma=sigma, normalization=invset.normalization)


def features_to_csv(rows: list[tuple[str, FeatureVector]], path) -> None:
    """One row per field: ``id, v1, ..., vD``."""
    with open(path, "w") as fh:
        for name, feat in rows:
            fh.write(name + "," + ",".join(f"{v:.17g}" for v in feat.values) + "\n")
