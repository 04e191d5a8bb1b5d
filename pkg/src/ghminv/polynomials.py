"""Rational-coefficient polynomials in moment symbols, plus set file I/O.

A moment symbol is ``(n, (p_1, ..., p_M))`` with a 1-based channel index n.
A monomial is a sorted tuple of symbols; a polynomial maps monomials to
``Fraction`` coefficients with zero coefficients dropped, so two polynomials
are equal iff their term dicts are equal.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from math import gcd

import numpy as np

from .errors import MissingMomentError, ParseError
from .moments import MomentTensor

Symbol = tuple[int, tuple[int, ...]]
Monomial = tuple[Symbol, ...]


def make_monomial(symbols) -> Monomial:
    return tuple(sorted(symbols))


@dataclass
class MomentPolynomial:
    """A homogeneous degree-K polynomial in moment symbols."""

    terms: dict[Monomial, Fraction]
    coord_dim: int
    channel_dim: int
    degree: int
    order: int
    model: str | None = None
    source: str | None = None
    num_lambda: int | None = None

    def __post_init__(self):
        self.terms = {
            mono: Fraction(c) for mono, c in sorted(self.terms.items()) if c != 0
        }

    def is_zero(self) -> bool:
        return not self.terms

    def symbols(self) -> set[Symbol]:
        return {s for mono in self.terms for s in mono}

    def max_symbol_order(self) -> int:
        return max((sum(s[1]) for mono in self.terms for s in mono), default=0)

    def scaled(self, factor: Fraction) -> "MomentPolynomial":
        return MomentPolynomial(
            {m: c * factor for m, c in self.terms.items()},
            self.coord_dim,
            self.channel_dim,
            self.degree,
            self.order,
            self.model,
            self.source,
            self.num_lambda,
        )

    def content_normalized(self) -> "MomentPolynomial":
        """Divide by the coefficient GCD and make the first coefficient positive.

        Two polynomials that differ by a nonzero rational constant normalize
        to identical term dicts.
        """
        if not self.terms:
            return self
        coeffs = list(self.terms.values())
        num = 0
        den = 1
        for c in coeffs:
            num = gcd(num, c.numerator)
            den = den * c.denominator // gcd(den, c.denominator)
        content = Fraction(num, den)
        first = self.terms[min(self.terms)]
        if first < 0:
            content = -content
        return self.scaled(1 / content)

    def proportional_to(self, other: "MomentPolynomial") -> bool:
        return self.content_normalized().terms == other.content_normalized().terms

    def evaluate(self, tensor: MomentTensor) -> float:
        """Evaluate on a moment tensor; raises if a symbol is out of range."""
        if tensor.coord_dim != self.coord_dim or tensor.channel_dim < self.channel_dim:
            raise MissingMomentError("tensor dimensions do not match the polynomial")
        total = 0.0
        for mono, coeff in self.terms.items():
            prod = float(coeff)
            for n, orders in mono:
                prod *= tensor.get(n, orders)
            total += prod
        return total

    def evaluate_vector(self, index: dict[Symbol, int], x: np.ndarray) -> float:
        """Evaluate on an arbitrary assignment of symbol values (for testing
        functional independence)."""
        total = 0.0
        for mono, coeff in self.terms.items():
            prod = float(coeff)
            for s in mono:
                prod *= x[index[s]]
            total += prod
        return total

    def gradient_vector(self, index: dict[Symbol, int], x: np.ndarray) -> np.ndarray:
        """Analytic gradient with respect to every symbol in ``index`` at x."""
        grad = np.zeros(len(index))
        for mono, coeff in self.terms.items():
            vals = [x[index[s]] for s in mono]
            for i, s in enumerate(mono):
                prod = float(coeff)
                for j, v in enumerate(vals):
                    if j != i:
                        prod *= v
                grad[index[s]] += prod
        return grad

    def format_line(self) -> str:
        parts = []
        for mono, coeff in self.terms.items():
            factors = [f"{coeff.numerator}/{coeff.denominator}"]
            factors += [f"eta[{n};{','.join(str(p) for p in orders)}]" for n, orders in mono]
            parts.append(" * ".join(factors))
        return " + ".join(parts) if parts else "0/1"


def polynomial_sum(polys: list[MomentPolynomial]) -> MomentPolynomial:
    terms: dict[Monomial, Fraction] = {}
    for poly in polys:
        for mono, coeff in poly.terms.items():
            terms[mono] = terms.get(mono, Fraction(0)) + coeff
    first = polys[0]
    return MomentPolynomial(
        terms, first.coord_dim, first.channel_dim, first.degree,
        max(p.order for p in polys), first.model,
    )


@dataclass
class InvariantSet:
    """An ordered list of invariants sharing dimensions and transform model."""

    polys: list[MomentPolynomial]
    coord_dim: int
    channel_dim: int
    model: str
    degree: int
    order: int
    normalization: str = "none"
    metadata: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if self.model not in ("TR", "RA"):
            raise ParseError(f"unknown transform model {self.model!r}")
        if self.normalization not in ("none", "divide-by-sum"):
            raise ParseError(f"unknown normalization {self.normalization!r}")

    def __len__(self) -> int:
        return len(self.polys)

    def max_symbol_order(self) -> int:
        return max((p.max_symbol_order() for p in self.polys), default=0)


_HEADER_RE = re.compile(
    r"^MGHMI-SET v1; M=(\d+); N=(\d+); model=(\w+); K=(\d+); O=(\d+); norm=([\w-]+)$"
)
_TERM_RE = re.compile(r"^(-?\d+)/(\d+)((?: \* eta\[\d+;[\d,]+\])*)$")
_ETA_RE = re.compile(r"eta\[(\d+);([\d,]+)\]")


def save_invariant_set(invset: InvariantSet, path) -> None:
    with open(path, "w") as fh:
        fh.write(
            f"MGHMI-SET v1; M={invset.coord_dim}; N={invset.channel_dim}; "
            f"model={invset.model}; K={invset.degree}; O={invset.order}; "
            f"norm={invset.normalization}\n"
        )
        for poly in invset.polys:
            fh.write(poly.format_line() + "\n")


def load_invariant_set(path) -> InvariantSet:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("empty invariant-set file", line=1)
    match = _HEADER_RE.match(lines[0])
    if not match:
        raise ParseError("bad header", line=1)
    m, n, model, k, o, norm = match.groups()
    m, n, k, o = int(m), int(n), int(k), int(o)
    polys = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        terms: dict[Monomial, Fraction] = {}
        for chunk in line.split(" + "):
            tm = _TERM_RE.match(chunk.strip())
            if not tm:
                raise ParseError(f"bad term {chunk!r}", line=lineno)
            coeff = Fraction(int(tm.group(1)), int(tm.group(2)))
            symbols = []
            for em in _ETA_RE.finditer(tm.group(3)):
                orders = tuple(int(v) for v in em.group(2).split(","))
                if len(orders) != m:
                    raise ParseError(f"symbol has {len(orders)} axes, expected {m}", line=lineno)
                symbols.append((int(em.group(1)), orders))
            if coeff != 0:
                mono = make_monomial(symbols)
                terms[mono] = terms.get(mono, Fraction(0)) + coeff
        poly = MomentPolynomial(
            terms, m, n,
            degree=max((len(mono) for mono in terms), default=k),
            order=max((sum(s[1]) for mono in terms for s in mono), default=0),
            model=model,
        )
        polys.append(poly)
    return InvariantSet(polys, m, n, model, k, o, norm)
