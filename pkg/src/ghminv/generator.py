"""Enumeration of operator/primitive products and their expansion to moments.

The differential side multiplies two kinds of invariant atoms over points
X_1..X_K: ``phi(a1, a2)``, the dot product of the gradients at points a1 and
a2, and ``psi(b_1 < ... < b_M)``, the determinant of M gradients. The channel
side multiplies ``gamma(c1 < c2)``, the dot product of the channel vectors at
two points, and ``lam(d_1 < ... < d_N)``, the determinant of N channel
vectors, with every point used exactly once.

Expanding both sides and integrating factorizes per point into products of
moments, giving a degree-K polynomial with integer coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, permutations

import numpy as np

from .errors import BadParamError, PointMismatchError
from .polynomials import InvariantSet, Monomial, MomentPolynomial, make_monomial

# ---------------------------------------------------------------------------
# atoms and products

Atom = tuple  # ("phi", a1, a2) | ("psi", pts) | ("gamma", c1, c2) | ("lam", pts)


def _atom_incidence(atom: Atom, num_points: int) -> np.ndarray:
    counts = np.zeros(num_points, dtype=int)
    if atom[0] in ("phi", "gamma"):
        counts[atom[1] - 1] += 1
        counts[atom[2] - 1] += 1
    else:
        for b in atom[1]:
            counts[b - 1] += 1
    return counts


def _atom_str(atom: Atom) -> str:
    if atom[0] in ("phi", "gamma"):
        return f"{atom[0]}({atom[1]},{atom[2]})"
    return f"{atom[0]}({','.join(str(b) for b in atom[1])})"


@dataclass(frozen=True)
class OperatorProduct:
    """A multiset of phi/psi atoms (with exponents) over points 1..num_points."""

    num_points: int
    factors: tuple[tuple[Atom, int], ...]

    def point_orders(self) -> tuple[int, ...]:
        counts = np.zeros(self.num_points, dtype=int)
        for atom, exp in self.factors:
            counts += exp * _atom_incidence(atom, self.num_points)
        return tuple(int(c) for c in counts)

    @property
    def order(self) -> int:
        return max(self.point_orders())

    def __str__(self) -> str:
        return "*".join(
            _atom_str(a) + (f"^{e}" if e > 1 else "") for a, e in self.factors
        )


@dataclass(frozen=True)
class PrimitiveProduct:
    """A partition of points 1..num_points into gamma pairs and lam tuples."""

    num_points: int
    factors: tuple[Atom, ...]

    @property
    def num_lambda(self) -> int:
        return sum(1 for a in self.factors if a[0] == "lam")

    def __str__(self) -> str:
        return "*".join(_atom_str(a) for a in self.factors)


def operator_atoms(num_points: int, coord_dim: int) -> list[Atom]:
    atoms: list[Atom] = [
        ("phi", a1, a2)
        for a1 in range(1, num_points + 1)
        for a2 in range(a1, num_points + 1)
    ]
    atoms += [
        ("psi", pts) for pts in combinations(range(1, num_points + 1), coord_dim)
    ]
    return atoms


def enumerate_operator_products(
    num_points: int, coord_dim: int, max_order: int
) -> list[OperatorProduct]:
    """All atom multisets with per-point differential order <= max_order and
    every point used at least once."""
    if num_points < 1 or max_order < 1:
        raise BadParamError("num_points and max_order must be positive")
    atoms = operator_atoms(num_points, coord_dim)
    incidences = [_atom_incidence(a, num_points) for a in atoms]
    results: list[OperatorProduct] = []
    budget = np.full(num_points, max_order, dtype=int)

    def dfs(i: int, chosen: list[tuple[Atom, int]]):
        if i == len(atoms):
            if np.all(budget < max_order):
                results.append(OperatorProduct(num_points, tuple(chosen)))
            return
        inc = incidences[i]
        touched = inc > 0
        dfs(i + 1, chosen)
        exp = 0
        while np.all(budget[touched] >= inc[touched]):
            budget[touched] -= inc[touched]
            exp += 1
            chosen.append((atoms[i], exp))
            dfs(i + 1, chosen)
            chosen.pop()
        budget[touched] += exp * inc[touched]

    dfs(0, [])
    return results


def enumerate_primitive_products(
    num_points: int, channel_dim: int, model: str
) -> list[PrimitiveProduct]:
    """All partitions of the points into gamma pairs and lam N-tuples.

    Under the RA model gamma atoms are forbidden (they are only invariant
    when the channel transform is a rotation), so the list is empty whenever
    num_points is not a multiple of channel_dim.
    """
    if model not in ("TR", "RA"):
        raise BadParamError(f"unknown model {model!r}")
    allow_gamma = model == "TR"
    results: list[PrimitiveProduct] = []

    def partitions(remaining: tuple[int, ...], chosen: list[Atom]):
        if not remaining:
            results.append(PrimitiveProduct(num_points, tuple(sorted(chosen))))
            return
        first, rest = remaining[0], remaining[1:]
        if allow_gamma:
            for j, other in enumerate(rest):
                chosen.append(("gamma", first, other))
                partitions(rest[:j] + rest[j + 1 :], chosen)
                chosen.pop()
        if channel_dim == 1:
            chosen.append(("lam", (first,)))
            partitions(rest, chosen)
            chosen.pop()
        else:
            for others in combinations(rest, channel_dim - 1):
                chosen.append(("lam", (first,) + others))
                left = tuple(p for p in rest if p not in others)
                partitions(left, chosen)
                chosen.pop()

    partitions(tuple(range(1, num_points + 1)), [])
    return results


# ---------------------------------------------------------------------------
# symbolic expansion

# A differential term maps each point to a per-axis order vector; stored as a
# tuple of per-point tuples. Coefficients are integers throughout.
_DTerm = tuple[tuple[int, ...], ...]


def _dpoly_mul(a: dict[_DTerm, int], b: dict[_DTerm, int]) -> dict[_DTerm, int]:
    out: dict[_DTerm, int] = {}
    for qa, ca in a.items():
        for qb, cb in b.items():
            q = tuple(
                tuple(x + y for x, y in zip(ra, rb)) for ra, rb in zip(qa, qb)
            )
            out[q] = out.get(q, 0) + ca * cb
    return {q: c for q, c in out.items() if c}


def _atom_dpoly(atom: Atom, num_points: int, coord_dim: int) -> dict[_DTerm, int]:
    zero = tuple(tuple(0 for _ in range(coord_dim)) for _ in range(num_points))

    def bump(base: _DTerm, point: int, axis: int) -> _DTerm:
        rows = [list(r) for r in base]
        rows[point - 1][axis] += 1
        return tuple(tuple(r) for r in rows)

    out: dict[_DTerm, int] = {}
    if atom[0] == "phi":
        for m in range(coord_dim):
            q = bump(bump(zero, atom[1], m), atom[2], m)
            out[q] = out.get(q, 0) + 1
    elif atom[0] == "psi":
        pts = atom[1]
        for perm in permutations(range(coord_dim)):
            q = zero
            for j, b in enumerate(pts):
                q = bump(q, b, perm[j])
            out[q] = out.get(q, 0) + _perm_sign(perm)
    else:
        raise BadParamError(f"not a differential atom: {atom}")
    return out


def _perm_sign(perm) -> int:
    sign = 1
    seen = [False] * len(perm)
    for i in range(len(perm)):
        if seen[i]:
            continue
        j = i
        length = 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def expand_operator(product: OperatorProduct, coord_dim: int) -> dict[_DTerm, int]:
    """Expand D into a sum of mixed-partial monomials."""
    zero = tuple(tuple(0 for _ in range(coord_dim)) for _ in range(product.num_points))
    poly: dict[_DTerm, int] = {zero: 1}
    for atom, exp in product.factors:
        atom_poly = _atom_dpoly(atom, product.num_points, coord_dim)
        for _ in range(exp):
            poly = _dpoly_mul(poly, atom_poly)
    return poly


def expand_primitive(product: PrimitiveProduct, channel_dim: int) -> dict[tuple[int, ...], int]:
    """Expand P into channel assignments: point k -> channel (1-based)."""
    assigns: list[tuple[dict[int, int], int]] = [({}, 1)]
    for atom in product.factors:
        new: list[tuple[dict[int, int], int]] = []
        if atom[0] == "gamma":
            choices = [({atom[1]: n, atom[2]: n}, 1) for n in range(1, channel_dim + 1)]
        elif atom[0] == "lam":
            pts = atom[1]
            choices = [
                ({b: perm[j] + 1 for j, b in enumerate(pts)}, _perm_sign(perm))
                for perm in permutations(range(channel_dim))
            ]
        else:
            raise BadParamError(f"not a primitive atom: {atom}")
        for partial, coeff in assigns:
            for extra, sign in choices:
                merged = dict(partial)
                merged.update(extra)
                new.append((merged, coeff * sign))
        assigns = new
    out: dict[tuple[int, ...], int] = {}
    for partial, coeff in assigns:
        key = tuple(partial[k] for k in range(1, product.num_points + 1))
        out[key] = out.get(key, 0) + coeff
    return {k: c for k, c in out.items() if c}


def expand_invariant(
    d: OperatorProduct, p: PrimitiveProduct, coord_dim: int, channel_dim: int,
    model: str | None = None,
) -> MomentPolynomial:
    """Expand the paired product into a degree-K moment polynomial."""
    if d.num_points != p.num_points:
        raise PointMismatchError(
            f"operator uses {d.num_points} points, primitive uses {p.num_points}"
        )
    dterms = expand_operator(d, coord_dim)
    pterms = expand_primitive(p, channel_dim)
    terms: dict[Monomial, Fraction] = {}
    for qmat, cd in dterms.items():
        for channels, cp in pterms.items():
            mono = make_monomial(
                (channels[k], qmat[k]) for k in range(d.num_points)
            )
            terms[mono] = terms.get(mono, Fraction(0)) + cd * cp
    return MomentPolynomial(
        terms,
        coord_dim,
        channel_dim,
        degree=d.num_points,
        order=d.order,
        model=model,
        source=f"{d}|{p}",
        num_lambda=p.num_lambda,
    )


# ---------------------------------------------------------------------------
# generation and pruning

def generate_all(
    coord_dim: int,
    channel_dim: int,
    model: str,
    degree: int,
    order: int,
) -> list[MomentPolynomial]:
    """All nonzero, pairwise non-proportional candidates up to (degree, order).

    For model="RA" only pure-lam primitives are paired (gamma is not
    RA-invariant). For model="TR" candidates whose primitive is pure lam are
    dropped: they are already RA-invariant, and keeping them out makes the
    TR and RA sets disjoint.
    """
    if model not in ("TR", "RA"):
        raise BadParamError(f"unknown model {model!r}")
    candidates: list[MomentPolynomial] = []
    seen: set[frozenset] = set()
    for k in range(1, degree + 1):
        prims = enumerate_primitive_products(k, channel_dim, model)
        if model == "TR":
            prims = [p for p in prims if any(a[0] == "gamma" for a in p.factors)]
        if not prims:
            continue
        ops = enumerate_operator_products(k, coord_dim, order)
        pool = []
        for dprod in ops:
            for pprod in prims:
                poly = expand_invariant(dprod, pprod, coord_dim, channel_dim, model)
                if not poly.is_zero():
                    pool.append(poly)
        pool.sort(key=lambda q: (q.degree, q.order, q.source))
        for poly in pool:
            key = frozenset(poly.content_normalized().terms.items())
            if key not in seen:
                seen.add(key)
                candidates.append(poly)
    candidates.sort(key=lambda q: (q.degree, q.order, q.source))
    return candidates


def independence_filter(
    polys: list[MomentPolynomial],
    coord_dim: int,
    channel_dim: int,
    max_order: int,
    trials: int = 50,
    tolerance: float = 1e-8,
    rng_seed: int = 0,
    model: str | None = None,
) -> InvariantSet:
    """Greedy functional-independence selection by Jacobian rank.

    Each candidate's gradient with respect to all moment symbols is sampled
    at ``trials`` random moment vectors (entries uniform in [-1, 1]). At
    every sample point the gradients of the kept invariants form a Jacobian;
    a candidate is kept iff stacking its gradient raises the numerical rank
    (singular values above ``tolerance`` times the largest) at a majority of
    the sample points. Functionally dependent candidates have everywhere
    linearly dependent gradients, so they never raise the rank.
    """
    degree = max((p.degree for p in polys), default=0)
    model = model or (polys[0].model if polys else "TR")
    if not polys:
        return InvariantSet([], coord_dim, channel_dim, model, degree, max_order)
    trials = max(trials, 2 * len(polys))
    symbols = sorted({s for p in polys for s in p.symbols()})
    index = {s: i for i, s in enumerate(symbols)}
    rng = np.random.default_rng(rng_seed)
    points = rng.uniform(-1.0, 1.0, size=(trials, len(symbols)))

    def numerical_rank(matrix: np.ndarray) -> int:
        svals = np.linalg.svd(matrix, compute_uv=False)
        if svals.size == 0 or svals[0] == 0:
            return 0
        return int(np.sum(svals > tolerance * svals[0]))

    # per-point Jacobians of the kept invariants, one (r x nsyms) block each
    jacobians = [np.empty((0, len(symbols))) for _ in range(trials)]
    ranks = [0] * trials
    kept: list[MomentPolynomial] = []
    for poly in polys:
        grads = [poly.gradient_vector(index, x) for x in points]
        new_ranks = [
            numerical_rank(np.vstack([jac, g]))
            for jac, g in zip(jacobians, grads)
        ]
        raised = sum(nr > r for nr, r in zip(new_ranks, ranks))
        if raised > trials // 2:
            jacobians = [np.vstack([jac, g]) for jac, g in zip(jacobians, grads)]
            ranks = new_ranks
            kept.append(poly)
    return InvariantSet(
        kept, coord_dim, channel_dim, model, degree, max_order,
        metadata={"trials": trials, "tolerance": tolerance, "rng_seed": rng_seed},
    )


def generate_invariant_set(
    coord_dim: int,
    channel_dim: int,
    model: str,
    degree: int,
    order: int,
    trials: int = 50,
    tolerance: float = 1e-8,
    rng_seed: int = 0,
    normalization: str | None = None,
) -> tuple[InvariantSet, dict]:
    """Full pipeline: enumerate, expand, prune, filter. Returns stats too."""
    candidates = generate_all(coord_dim, channel_dim, model, degree, order)
    invset = independence_filter(
        candidates, coord_dim, channel_dim, order,
        trials=trials, tolerance=tolerance, rng_seed=rng_seed, model=model,
    )
    if normalization is None:
        normalization = "divide-by-sum" if model == "RA" else "none"
    invset.normalization = normalization
    stats = {
        "candidates": len(candidates),
        "independent": len(invset),
    }
    return invset, stats
