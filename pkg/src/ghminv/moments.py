"""Hermite / Gaussian-Hermite polynomials and separable moment computation.

The moment of channel n with per-axis orders (p_1, ..., p_M) is the
Riemann-sum discretization of the integral of
``prod_m Hhat_{p_m}(x_m; sigma) * f_n(X)`` over the grid, where
``Hhat_p(x; sigma) = (-sigma)^{-p} exp(-x^2 / 2 sigma^2) H_p(x / sigma)``.
The Gaussian-modulated recurrence keeps values bounded for large p.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial, pi, sqrt

import numpy as np
from scipy.integrate import simpson

from .errors import BadParamError, MissingMomentError
from .field import MultiChannelField


def hermite(p: int, x):
    """Plain Hermite polynomial H_p(x) by the two-term recurrence."""
    if p < 0:
        raise BadParamError("order must be non-negative")
    x = np.asarray(x, dtype=np.float64)
    h_prev = np.ones_like(x)
    if p == 0:
        return h_prev if h_prev.ndim else float(h_prev)
    h = 2.0 * x
    for q in range(2, p + 1):
        h, h_prev = 2.0 * x * h - 2.0 * (q - 1) * h_prev, h
    return h if h.ndim else float(h)


def gauss_hermite(p: int, x, sigma: float):
    """Gaussian-modulated Hermite polynomial Hhat_p(x; sigma).

    Uses the folded recurrence
    ``Hhat_p = -(2x / sigma^2) Hhat_{p-1} - (2(p-1) / sigma^2) Hhat_{p-2}``
    so no unmodulated H_p value is ever formed.
    """
    if p < 0:
        raise BadParamError("order must be non-negative")
    if sigma <= 0:
        raise BadParamError("sigma must be positive")
    x = np.asarray(x, dtype=np.float64)
    h_prev = np.exp(-(x**2) / (2.0 * sigma**2))
    if p == 0:
        return h_prev if h_prev.ndim else float(h_prev)
    h = -(2.0 * x / sigma**2) * h_prev
    for q in range(2, p + 1):
        h, h_prev = -(2.0 * x / sigma**2) * h - (2.0 * (q - 1) / sigma**2) * h_prev, h
    return h if h.ndim else float(h)


def gauss_hermite_table(coords: np.ndarray, max_order: int, sigma: float) -> np.ndarray:
    """Matrix [order 0..max_order] x [coordinate] of Hhat_p values."""
    if sigma <= 0:
        raise BadParamError("sigma must be positive")
    coords = np.asarray(coords, dtype=np.float64)
    table = np.empty((max_order + 1, coords.size))
    table[0] = np.exp(-(coords**2) / (2.0 * sigma**2))
    if max_order >= 1:
        table[1] = -(2.0 * coords / sigma**2) * table[0]
    for q in range(2, max_order + 1):
        table[q] = -(2.0 * coords / sigma**2) * table[q - 1] - (2.0 * (q - 1) / sigma**2) * table[q - 2]
    return table


@dataclass
class GhKernelTable:
    """Per-axis Gaussian-Hermite kernels tabulated on a field's grid."""

    sigma: float
    max_order: int
    coords: list[np.ndarray]
    values: list[np.ndarray]

    @classmethod
    def for_field(cls, field: MultiChannelField, max_order: int, sigma: float) -> "GhKernelTable":
        coords = [field.axis_coords(m) for m in range(field.coord_dim)]
        values = [gauss_hermite_table(c, max_order, sigma) for c in coords]
        return cls(sigma=sigma, max_order=max_order, coords=coords, values=values)


def orthogonality_check(
    p1: int, p2: int, sigma: float = 1.0, domain_halfwidth: float = 12.0, step: float = 1e-3
) -> float:
    """Numerically integrate exp(-u^2) H_{p1}(u) H_{p2}(u) du.

    The integrand is assembled from the modulated polynomials (so the check
    also exercises the folded recurrence): with x = sigma * u,
    ``(-sigma)^{p1+p2} Hhat_{p1}(x; sigma) Hhat_{p2}(x; sigma)`` equals
    the weighted product. Composite Simpson rule on a uniform grid.
    """
    if domain_halfwidth <= 0 or step <= 0:
        raise BadParamError("quadrature parameters must be positive")
    npts = int(round(2 * domain_halfwidth / step)) + 1
    u = np.linspace(-domain_halfwidth, domain_halfwidth, npts)
    x = sigma * u
    integrand = (
        (-sigma) ** (p1 + p2) * gauss_hermite(p1, x, sigma) * gauss_hermite(p2, x, sigma)
    )
    return float(simpson(integrand, x=u))


def hermite_norm_squared(p: int) -> float:
    """The exact weighted L2 norm p! 2^p sqrt(pi) of H_p."""
    return factorial(p) * 2.0**p * sqrt(pi)


@dataclass
class MomentTensor:
    """All moments of one field up to a total order, as a dense array.

    ``values`` has shape ``(N,) + (max_order + 1,) * M``; only entries with
    p_1 + ... + p_M <= max_order are part of the tensor's contract.
    Channel indices in the symbol interface are 1-based.
    """

    coord_dim: int
    channel_dim: int
    max_order: int
    sigma: float
    values: np.ndarray

    def get(self, n: int, orders: tuple[int, ...]) -> float:
        if not 1 <= n <= self.channel_dim:
            raise MissingMomentError(f"channel {n} out of range")
        if len(orders) != self.coord_dim or sum(orders) > self.max_order:
            raise MissingMomentError(f"orders {orders} exceed max order {self.max_order}")
        return float(self.values[(n - 1,) + tuple(orders)])

    def entries(self):
        """Yield ((n, orders), value) for every in-contract entry."""
        for n in range(1, self.channel_dim + 1):
            for orders in np.ndindex(*self.values.shape[1:]):
                if sum(orders) <= self.max_order:
                    yield (n, orders), float(self.values[(n - 1,) + orders])


def compute_moments(field: MultiChannelField, max_order: int, sigma: float) -> MomentTensor:
    """Separable moment computation: one kernel contraction per axis."""
    if max_order < 0:
        raise BadParamError("max_order must be non-negative")
    if sigma <= 0:
        raise BadParamError("sigma must be positive")
    table = GhKernelTable.for_field(field, max_order, sigma)
    acc = field.data
    for m in range(field.coord_dim):
        # contract the current leading grid axis; it re-appears as a trailing
        # order axis, so after M steps the layout is (N, p_1, ..., p_M)
        acc = np.tensordot(acc, table.values[m], axes=([0], [1]))
    acc = acc * field.spacing**field.coord_dim
    return MomentTensor(
        coord_dim=field.coord_dim,
        channel_dim=field.channel_dim,
        max_order=max_order,
        sigma=sigma,
        values=np.ascontiguousarray(acc),
    )


def compute_moments_direct(field: MultiChannelField, max_order: int, sigma: float) -> MomentTensor:
    """Non-separable direct sum over the grid; test oracle for compute_moments."""
    table = GhKernelTable.for_field(field, max_order, sigma)
    m, n = field.coord_dim, field.channel_dim
    shape = (n,) + (max_order + 1,) * m
    values = np.zeros(shape)
    for orders in np.ndindex(*shape[1:]):
        kernel = np.ones(field.extent)
        for axis in range(m):
            shp = [1] * m
            shp[axis] = -1
            kernel = kernel * table.values[axis][orders[axis]].reshape(shp)
        for ch in range(n):
            values[(ch,) + orders] = float(np.sum(kernel * field.data[..., ch]))
    values *= field.spacing**m
    return MomentTensor(m, n, max_order, sigma, values)


def moments_to_csv(tensor: MomentTensor, path) -> None:
    with open(path, "w") as fh:
        for (n, orders), value in tensor.entries():
            fh.write(f"{n},{','.join(str(p) for p in orders)},{value:.17g}\n")


def sigma_guidance(extent: tuple[int, ...], sigma: float) -> str | None:
    """Advisory check that sigma sits in [extent/9, extent/3]."""
    size = min(extent)
    if sigma < size / 9:
        return f"sigma={sigma:g} below {size}/9: kernels decay too fast to cover the domain"
    if sigma > size / 3:
        return f"sigma={sigma:g} above {size}/3: kernels extend well past the domain"
    return None
