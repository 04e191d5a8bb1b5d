"""Grid-sampled multi-channel fields and their spatial/channel transforms.

A field samples F: R^M -> R^N on a regular grid. The grid is centered:
sample index i along axis m maps to the coordinate
``(i - (extent_m - 1) / 2) * spacing``, so the domain is symmetric around 0.
All operations are pure: the input field is never modified.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import ndimage

from .errors import (
    BadParamError,
    BadRangeError,
    DimMismatchError,
    NotRotationError,
    SingularMatrixError,
)

_ORTHO_TOL = 1e-10
_DET_TOL = 1e-12


@dataclass
class MultiChannelField:
    """Dense samples of a multi-channel function on a centered regular grid.

    ``data`` has shape ``extent + (N,)`` with the channel axis last.
    """

    data: np.ndarray
    spacing: float = 1.0

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim < 2:
            raise DimMismatchError("field data needs at least one grid axis plus a channel axis")
        if self.spacing <= 0:
            raise BadParamError(f"spacing must be positive, got {self.spacing}")
        if any(e < 2 for e in self.extent):
            raise DimMismatchError(f"all extents must be >= 2, got {self.extent}")

    @property
    def coord_dim(self) -> int:
        return self.data.ndim - 1

    @property
    def channel_dim(self) -> int:
        return self.data.shape[-1]

    @property
    def extent(self) -> tuple[int, ...]:
        return self.data.shape[:-1]

    def axis_coords(self, m: int) -> np.ndarray:
        """Physical coordinates of the samples along axis ``m``."""
        e = self.extent[m]
        return (np.arange(e) - (e - 1) / 2.0) * self.spacing

    def copy(self) -> "MultiChannelField":
        return MultiChannelField(self.data.copy(), self.spacing)


@dataclass
class RaTransform:
    """A rotation acting on coordinates plus an affine map acting on channels."""

    r_in: np.ndarray
    a_out: np.ndarray
    t_out: np.ndarray = dc_field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.r_in = np.asarray(self.r_in, dtype=np.float64)
        self.a_out = np.asarray(self.a_out, dtype=np.float64)
        n = self.a_out.shape[0]
        if self.t_out is None:
            self.t_out = np.zeros(n)
        self.t_out = np.asarray(self.t_out, dtype=np.float64)
        _check_rotation(self.r_in)
        if abs(np.linalg.det(self.a_out)) <= _DET_TOL:
            raise SingularMatrixError("a_out is singular")
        if self.t_out.shape != (n,):
            raise DimMismatchError("t_out length must match a_out")


def _check_rotation(r: np.ndarray):
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise NotRotationError("rotation matrix must be square")
    if not np.allclose(r @ r.T, np.eye(r.shape[0]), atol=_ORTHO_TOL):
        raise NotRotationError("matrix is not orthogonal")
    if abs(np.linalg.det(r) - 1.0) > 1e-10:
        raise NotRotationError("matrix determinant is not +1")


def rotation_2d(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def subtract_channel_mean(field: MultiChannelField, mask: np.ndarray | None = None) -> MultiChannelField:
    """Remove the per-channel mean; kills any channel translation.

    With a boolean ``mask`` (grid-shaped), the mean is taken over masked-in
    samples and subtracted only there; samples outside the mask stay put.
    """
    data = field.data.copy()
    if mask is None:
        data -= data.reshape(-1, field.channel_dim).mean(axis=0)
    else:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != field.extent:
            raise DimMismatchError("mask shape must equal the grid extent")
        means = data[mask].mean(axis=0)
        data[mask] -= means
    return MultiChannelField(data, field.spacing)


def apply_outer_affine(field: MultiChannelField, a_out: np.ndarray, t_out: np.ndarray | None = None) -> MultiChannelField:
    """Replace every channel vector v by ``a_out @ v + t_out``; geometry untouched."""
    a_out = np.asarray(a_out, dtype=np.float64)
    n = field.channel_dim
    if a_out.shape != (n, n):
        raise DimMismatchError(f"a_out must be {n}x{n}")
    if abs(np.linalg.det(a_out)) <= _DET_TOL:
        raise SingularMatrixError("a_out is singular")
    data = field.data @ a_out.T
    if t_out is not None:
        data = data + np.asarray(t_out, dtype=np.float64)
    return MultiChannelField(data, field.spacing)


def _snap_lattice(r: np.ndarray) -> np.ndarray:
    # Quarter-turn matrices must be exact so lattice rotations permute samples.
    rounded = np.round(r)
    if np.max(np.abs(r - rounded)) < 1e-12:
        return rounded
    return r


def rotate_spatial(field: MultiChannelField, theta_or_matrix, interpolation: str = "bilinear") -> MultiChannelField:
    """Rotate the field about the grid center; samples are pulled via R^T.

    For M=2 an angle is accepted; otherwise an MxM rotation matrix.
    Out-of-domain pulls fill with 0. Channel values are left unchanged.
    """
    m = field.coord_dim
    if np.isscalar(theta_or_matrix):
        if m != 2:
            raise DimMismatchError("an angle is only accepted for 2D fields")
        r = rotation_2d(float(theta_or_matrix))
    else:
        r = np.asarray(theta_or_matrix, dtype=np.float64)
        if r.shape != (m, m):
            raise NotRotationError(f"rotation matrix must be {m}x{m}")
        _check_rotation(r)
    r = _snap_lattice(r)

    if interpolation not in ("nearest", "bilinear"):
        raise BadParamError(f"unknown interpolation {interpolation!r}")
    order = 0 if interpolation == "nearest" else 1

    centers = np.array([(e - 1) / 2.0 for e in field.extent])
    idx = np.indices(field.extent, dtype=np.float64)
    out_coords = idx.reshape(m, -1) - centers[:, None]
    src = r.T @ out_coords + centers[:, None]
    src = src.reshape((m,) + field.extent)

    out = np.empty_like(field.data)
    for n in range(field.channel_dim):
        out[..., n] = ndimage.map_coordinates(
            field.data[..., n], src, order=order, mode="constant", cval=0.0
        )
    return MultiChannelField(out, field.spacing)


def apply_special_tr(field: MultiChannelField, theta: float) -> MultiChannelField:
    """Rotate the grid and the vector values by the same 2D angle."""
    if field.coord_dim != field.channel_dim:
        raise DimMismatchError("special TR needs coord_dim == channel_dim")
    if field.coord_dim != 2:
        raise DimMismatchError("special TR is implemented for 2D vector fields")
    rotated = rotate_spatial(field, theta)
    r = _snap_lattice(rotation_2d(theta))
    return apply_outer_affine(rotated, r)


#: Default parameter intervals for random channel-affine synthesis (3 channels).
DEFAULT_RA_RANGES = {
    "theta_in": (0.0, 0.0),
    "theta_x": (-math.pi / 10, math.pi / 10),
    "theta_y": (-math.pi / 10, math.pi / 10),
    "theta_z": (-math.pi / 10, math.pi / 10),
    "s_x": (0.7, 0.9),
    "s_y": (0.7, 0.9),
    "s_z": (0.7, 0.9),
    "m_1": (-0.1, 0.1),
    "m_2": (-0.1, 0.1),
    "m_3": (-0.1, 0.1),
    "t_1": (-0.1, 0.1),
    "t_2": (-0.1, 0.1),
    "t_3": (-0.1, 0.1),
}


def _rot3(axis: int, theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    r = np.eye(3)
    i, j = [(1, 2), (0, 2), (0, 1)][axis]
    r[i, i] = c
    r[j, j] = c
    r[i, j] = -s if axis != 1 else s
    r[j, i] = s if axis != 1 else -s
    return r


def random_ra_transform(
    ranges: dict | None = None,
    rng_seed: int = 0,
    coord_dim: int = 2,
    channel_dim: int = 3,
) -> RaTransform:
    """Draw a random transform: a_out = R_x R_y R_z U with U upper-triangular.

    Every parameter is sampled uniformly from its interval; ``ranges``
    overrides entries of :data:`DEFAULT_RA_RANGES`. The inner rotation is a
    2D rotation by ``theta_in`` (degenerate [0, 0] by default). For
    channel_dim=2 only ``theta_x``, ``s_x``, ``s_y``, ``m_1``, ``t_1``,
    ``t_2`` are used and a_out = R(theta_x) U.
    """
    if coord_dim != 2:
        raise DimMismatchError("random transforms are generated for 2D grids")
    if channel_dim not in (2, 3):
        raise DimMismatchError("channel_dim must be 2 or 3")
    params = dict(DEFAULT_RA_RANGES)
    if ranges:
        unknown = set(ranges) - set(params)
        if unknown:
            raise BadParamError(f"unknown range keys: {sorted(unknown)}")
        params.update(ranges)
    for key, (lo, hi) in params.items():
        if lo > hi:
            raise BadRangeError(f"empty interval for {key}: [{lo}, {hi}]")

    rng = np.random.default_rng(rng_seed)
    draw = {k: rng.uniform(lo, hi) for k, (lo, hi) in sorted(params.items())}

    r_in = rotation_2d(draw["theta_in"])
    if channel_dim == 3:
        u = np.array(
            [
                [draw["s_x"], draw["m_1"], draw["m_2"]],
                [0.0, draw["s_y"], draw["m_3"]],
                [0.0, 0.0, draw["s_z"]],
            ]
        )
        a_out = _rot3(0, draw["theta_x"]) @ _rot3(1, draw["theta_y"]) @ _rot3(2, draw["theta_z"]) @ u
        t_out = np.array([draw["t_1"], draw["t_2"], draw["t_3"]])
    else:
        u = np.array([[draw["s_x"], draw["m_1"]], [0.0, draw["s_y"]]])
        a_out = rotation_2d(draw["theta_x"]) @ u
        t_out = np.array([draw["t_1"], draw["t_2"]])
    return RaTransform(r_in=r_in, a_out=a_out, t_out=t_out)


def add_gaussian_noise(
    field: MultiChannelField, sigma_g: float, rng_seed: int = 0, clamp: bool = False
) -> MultiChannelField:
    """Add zero-mean Gaussian noise per sample per channel.

    ``clamp`` restricts the result to [0, 1]; use it for image-valued fields
    only (vector fields are unbounded).
    """
    if sigma_g < 0:
        raise BadParamError("sigma_g must be non-negative")
    data = field.data.copy()
    if sigma_g > 0:
        rng = np.random.default_rng(rng_seed)
        data += rng.normal(0.0, sigma_g, size=data.shape)
    if clamp:
        np.clip(data, 0.0, 1.0, out=data)
    return MultiChannelField(data, field.spacing)


def add_salt_pepper(field: MultiChannelField, density_r: float, rng_seed: int = 0) -> MultiChannelField:
    """Set a fraction ``density_r`` of grid samples to all-0 or all-1."""
    if not 0.0 <= density_r <= 1.0:
        raise BadParamError("density_r must lie in [0, 1]")
    rng = np.random.default_rng(rng_seed)
    data = field.data.copy()
    hit = rng.random(field.extent) < density_r
    salt = rng.random(field.extent) < 0.5
    data[hit & salt] = 1.0
    data[hit & ~salt] = 0.0
    return MultiChannelField(data, field.spacing)


def inscribed_circle_mask(extent: tuple[int, int]) -> np.ndarray:
    """Boolean mask of lattice points inside the inscribed circle."""
    if len(extent) != 2:
        raise DimMismatchError("circular mask is defined for 2D grids")
    radius = (min(extent) - 1) / 2.0
    cy, cx = (extent[0] - 1) / 2.0, (extent[1] - 1) / 2.0
    yy, xx = np.indices(extent)
    return (yy - cy) ** 2 + (xx - cx) ** 2 <= radius**2


def circular_mask(field: MultiChannelField) -> MultiChannelField:
    """Zero out samples outside the inscribed circle centered on the grid."""
    mask = inscribed_circle_mask(field.extent)
    data = field.data.copy()
    data[~mask] = 0.0
    return MultiChannelField(data, field.spacing)
