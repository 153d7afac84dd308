#!/usr/bin/env python3
"""
Exact-rational sparse multivariate polynomials

Polynomials are stored as a map from exponent tuples to Fractions and are
immutable once built. Variables are named x1..xs in text form; internally a
variable is just its position in the exponent tuple.

Unused trailing variables do not matter for equality: x1 in one variable and
x1 in three variables compare (and hash) equal. Arithmetic still requires
matching variable counts; with_nvars lifts or trims.

Canonical term order is graded lexicographic: monomials are compared by total
degree first, then by exponent tuple. Everything downstream (basis order,
constraint row order) relies on this order.

Text grammar (whitespace insignificant):
    poly   := ['-'] term (('+'|'-') term)*
    term   := coef ['*' factor ('*' factor)*] | factor ('*' factor)*
    factor := var ['^' int]
    coef   := int ['/' int]
    var    := 'x' int
"""

from fractions import Fraction
from types import MappingProxyType
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from src.core.errors import DimensionError, PolynomialSyntaxError

Monomial = Tuple[int, ...]
Number = Union[int, Fraction]

DIGITS = "0123456789"


def monomial_key(monomial: Monomial) -> Tuple[int, Monomial]:
    """Sort key for the canonical (graded lexicographic) order"""
    return (sum(monomial), monomial)


def monomial_product(a: Monomial, b: Monomial) -> Monomial:
    return tuple(x + y for x, y in zip(a, b))


def _strip_trailing(monomial: Monomial) -> Monomial:
    end = len(monomial)
    while end and not monomial[end - 1]:
        end -= 1
    return monomial[:end]


def monomials_of_degree(nvars: int, degree: int) -> List[Monomial]:
    """All monomials of exactly `degree` in `nvars` variables, canonical order"""
    if nvars < 1:
        raise DimensionError(f"Need at least one variable, got {nvars}")
    if degree < 0:
        return []

    result: List[Monomial] = []

    def _fill(prefix: Tuple[int, ...], remaining: int, slots: int):
        if slots == 1:
            result.append(prefix + (remaining,))
            return
        for e in range(remaining + 1):
            _fill(prefix + (e,), remaining - e, slots - 1)

    _fill((), degree, nvars)
    return sorted(result)


def monomials_up_to(nvars: int, degree: int) -> List[Monomial]:
    """All monomials of degree <= `degree`, canonical order"""
    result: List[Monomial] = []
    for d in range(degree + 1):
        result.extend(monomials_of_degree(nvars, d))
    return result


def format_monomial(monomial: Monomial) -> str:
    factors = []
    for index, exponent in enumerate(monomial, start=1):
        if exponent == 1:
            factors.append(f"x{index}")
        elif exponent > 1:
            factors.append(f"x{index}^{exponent}")
    return "*".join(factors) if factors else "1"


class Polynomial:
    """Immutable sparse polynomial with Fraction coefficients"""

    __slots__ = ("_nvars", "_terms")

    def __init__(self, nvars: int, terms: Optional[Mapping[Monomial, Number]] = None):
        if nvars < 1:
            raise DimensionError(f"Polynomial needs at least one variable, got {nvars}")

        clean: Dict[Monomial, Fraction] = {}
        for monomial, coefficient in (terms or {}).items():
            key = tuple(int(e) for e in monomial)
            if len(key) != nvars:
                raise DimensionError(
                    f"Monomial {monomial} has {len(key)} exponents, expected {nvars}"
                )
            if any(e < 0 for e in key):
                raise ValueError(f"Negative exponent in monomial {monomial}")
            clean[key] = clean.get(key, Fraction(0)) + Fraction(coefficient)

        self._nvars = nvars
        self._terms = {m: c for m, c in clean.items() if c != 0}

    @classmethod
    def zero(cls, nvars: int) -> "Polynomial":
        return cls(nvars)

    @classmethod
    def constant(cls, nvars: int, value: Number) -> "Polynomial":
        return cls(nvars, {(0,) * nvars: value})

    @classmethod
    def _from_clean(cls, nvars: int, terms: Dict[Monomial, Fraction]) -> "Polynomial":
        # Skips validation; terms must already be well formed
        poly = cls.__new__(cls)
        poly._nvars = nvars
        poly._terms = {m: c for m, c in terms.items() if c != 0}
        return poly

    @property
    def nvars(self) -> int:
        return self._nvars

    @property
    def terms(self) -> Mapping[Monomial, Fraction]:
        return MappingProxyType(self._terms)

    @property
    def degree(self) -> int:
        """Maximum total degree; the zero polynomial reports 0"""
        if not self._terms:
            return 0
        return max(sum(m) for m in self._terms)

    @property
    def used_nvars(self) -> int:
        """Largest variable index that occurs (at least 1)"""
        return max((len(_strip_trailing(m)) for m in self._terms), default=0) or 1

    def with_nvars(self, nvars: int) -> "Polynomial":
        """Same polynomial over `nvars` variables (pads or trims unused trailing ones)"""
        if nvars == self._nvars:
            return self
        if nvars < self.used_nvars:
            raise DimensionError(f"Polynomial uses x{self.used_nvars}; cannot drop to {nvars} variables")
        if nvars > self._nvars:
            pad = (0,) * (nvars - self._nvars)
            return Polynomial._from_clean(nvars, {m + pad: c for m, c in self._terms.items()})
        return Polynomial._from_clean(nvars, {m[:nvars]: c for m, c in self._terms.items()})

    def is_zero(self) -> bool:
        return not self._terms

    def is_homogeneous(self) -> bool:
        return len({sum(m) for m in self._terms}) <= 1

    def coefficient(self, monomial: Monomial) -> Fraction:
        return self._terms.get(tuple(monomial), Fraction(0))

    def monomials(self) -> List[Monomial]:
        """Monomials with nonzero coefficient in canonical order"""
        return sorted(self._terms, key=monomial_key)

    def _check_compatible(self, other: "Polynomial"):
        if not isinstance(other, Polynomial):
            raise TypeError(f"Expected Polynomial, got {type(other).__name__}")
        if other._nvars != self._nvars:
            raise DimensionError(
                f"Variable count mismatch: {self._nvars} vs {other._nvars}"
            )

    def __add__(self, other: "Polynomial") -> "Polynomial":
        self._check_compatible(other)
        terms = dict(self._terms)
        for m, c in other._terms.items():
            terms[m] = terms.get(m, Fraction(0)) + c
        return Polynomial._from_clean(self._nvars, terms)

    def __neg__(self) -> "Polynomial":
        return Polynomial._from_clean(self._nvars, {m: -c for m, c in self._terms.items()})

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (-other)

    def scale(self, factor: Number) -> "Polynomial":
        factor = Fraction(factor)
        return Polynomial._from_clean(self._nvars, {m: c * factor for m, c in self._terms.items()})

    def __mul__(self, other: Union["Polynomial", Number]) -> "Polynomial":
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        self._check_compatible(other)
        terms: Dict[Monomial, Fraction] = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                m = monomial_product(m1, m2)
                terms[m] = terms.get(m, Fraction(0)) + c1 * c2
        return Polynomial._from_clean(self._nvars, terms)

    def __rmul__(self, other: Number) -> "Polynomial":
        return self.scale(other)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Polynomial):
            return NotImplemented
        if self._nvars == other._nvars:
            return self._terms == other._terms
        nvars = max(self._nvars, other._nvars)
        return self.with_nvars(nvars)._terms == other.with_nvars(nvars)._terms

    def __hash__(self) -> int:
        return hash(frozenset((_strip_trailing(m), c) for m, c in self._terms.items()))

    def evaluate(self, point: Sequence[Number]) -> Fraction:
        if len(point) != self._nvars:
            raise DimensionError(
                f"Point has {len(point)} coordinates, polynomial has {self._nvars} variables"
            )
        values = [Fraction(v) for v in point]
        total = Fraction(0)
        for monomial, coefficient in self._terms.items():
            term = coefficient
            for value, exponent in zip(values, monomial):
                if exponent:
                    term *= value ** exponent
            total += term
        return total

    def to_string(self) -> str:
        if not self._terms:
            return "0"

        pieces: List[str] = []
        for monomial in sorted(self._terms, key=monomial_key, reverse=True):
            coefficient = self._terms[monomial]
            magnitude = abs(coefficient)
            if sum(monomial) == 0:
                body = str(magnitude)
            elif magnitude == 1:
                body = format_monomial(monomial)
            else:
                body = f"{magnitude}*{format_monomial(monomial)}"

            if not pieces:
                pieces.append(f"-{body}" if coefficient < 0 else body)
            else:
                pieces.append(f" - {body}" if coefficient < 0 else f" + {body}")
        return "".join(pieces)

    def __str__(self) -> str:
        return self.to_string()

    def __repr__(self) -> str:
        return f"Polynomial({self._nvars}, '{self.to_string()}')"


class _PolynomialParser:
    """Recursive-descent parser for the polynomial grammar"""

    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def _skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def _peek(self) -> str:
        self._skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def _error(self, message: str, position: Optional[int] = None):
        raise PolynomialSyntaxError(message, self.pos if position is None else position, self.text)

    def _parse_int(self) -> int:
        self._skip_ws()
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos] in DIGITS:
            self.pos += 1
        if start == self.pos:
            found = repr(self.text[self.pos]) if self.pos < len(self.text) else "end of input"
            self._error(f"Expected integer, found {found}")
        return int(self.text[start:self.pos])

    def _parse_factor(self, exponents: Dict[int, int]):
        self._skip_ws()
        if self._peek() != "x":
            found = repr(self._peek()) if self._peek() else "end of input"
            self._error(f"Expected variable, found {found}")
        self.pos += 1
        index_pos = self.pos
        index = self._parse_int()
        if index < 1:
            self._error("Variable index must be >= 1", index_pos)
        exponent = 1
        if self._peek() == "^":
            self.pos += 1
            exponent = self._parse_int()
        exponents[index] = exponents.get(index, 0) + exponent

    def _parse_term(self) -> Tuple[Dict[int, int], Fraction]:
        exponents: Dict[int, int] = {}
        coefficient = Fraction(1)

        nxt = self._peek()
        if nxt and nxt in DIGITS:
            numerator = self._parse_int()
            denominator = 1
            if self._peek() == "/":
                self.pos += 1
                denom_pos = self.pos
                denominator = self._parse_int()
                if denominator == 0:
                    self._error("Zero denominator in coefficient", denom_pos)
            coefficient = Fraction(numerator, denominator)
            if self._peek() != "*":
                return exponents, coefficient
            self.pos += 1

        self._parse_factor(exponents)
        while self._peek() == "*":
            self.pos += 1
            self._parse_factor(exponents)
        return exponents, coefficient

    def parse(self) -> List[Tuple[Dict[int, int], Fraction]]:
        terms = []
        sign = 1
        if self._peek() == "-":
            self.pos += 1
            sign = -1
        elif self._peek() == "":
            self._error("Empty polynomial")

        while True:
            exponents, coefficient = self._parse_term()
            terms.append((exponents, sign * coefficient))
            nxt = self._peek()
            if nxt == "":
                break
            if nxt not in "+-":
                self._error(f"Unexpected character {nxt!r}")
            sign = 1 if nxt == "+" else -1
            self.pos += 1
        return terms


def parse_polynomial(text: str, nvars: Optional[int] = None) -> Polynomial:
    """
    Parse polynomial text into a canonical Polynomial.

    Args:
        text: Polynomial in the x1..xs grammar
        nvars: Variable count; defaults to the largest index used (at least 1)

    Returns:
        Polynomial

    Raises:
        PolynomialSyntaxError: On malformed text (carries the position)
        DimensionError: If `nvars` is smaller than an index used in the text
    """
    raw_terms = _PolynomialParser(text).parse()
    used = max((max(e) for e, _ in raw_terms if e), default=1)
    if nvars is None:
        nvars = used
    elif nvars < used:
        raise DimensionError(f"Text uses x{used} but nvars={nvars}")

    terms: Dict[Monomial, Fraction] = {}
    for exponents, coefficient in raw_terms:
        monomial = tuple(exponents.get(i, 0) for i in range(1, nvars + 1))
        terms[monomial] = terms.get(monomial, Fraction(0)) + coefficient
    return Polynomial(nvars, terms)


def expand_square_sum(
    factors: Sequence[Polynomial],
    weights: Optional[Sequence[Number]] = None,
) -> Polynomial:
    """
    Expand sum_i w_i * factor_i^2 exactly (w_i = 1 when weights is None).

    Raises:
        DimensionError: If the factors disagree on the variable count or
            the list is empty
    """
    factors = list(factors)
    if not factors:
        raise DimensionError("expand_square_sum needs at least one factor")
    if weights is None:
        weights = [1] * len(factors)
    if len(weights) != len(factors):
        raise DimensionError(f"{len(weights)} weights for {len(factors)} factors")

    nvars = factors[0].nvars
    total: Dict[Monomial, Fraction] = {}
    for factor, weight in zip(factors, weights):
        if factor.nvars != nvars:
            raise DimensionError(f"Factor has {factor.nvars} variables, expected {nvars}")
        weight = Fraction(weight)
        items = list(factor.terms.items())
        for i, (m1, c1) in enumerate(items):
            square = weight * c1 * c1
            m = monomial_product(m1, m1)
            total[m] = total.get(m, Fraction(0)) + square
            for m2, c2 in items[i + 1:]:
                m = monomial_product(m1, m2)
                total[m] = total.get(m, Fraction(0)) + 2 * weight * c1 * c2
    return Polynomial._from_clean(nvars, total)


def eval_poly(f: Polynomial, point: Sequence[Number]) -> Fraction:
    """Exact evaluation of f at a rational point"""
    return f.evaluate(point)
