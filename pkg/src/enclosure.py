"""
Certified numeric values for tsirelson-norms.
An Enclosure is either an exact rational or an interval [lo, hi] whose
endpoints are dyadic rationals rounded outward at a working precision.
Elementary functions (roots, logarithms) are evaluated with gmpy2 under
directed rounding so the true value always lies inside the interval.
"""

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Union

import gmpy2

from src.errors import InputError

Number = Union[int, Fraction, "Enclosure"]

DEFAULT_PRECISION = 64


def parse_rational(value) -> Fraction:
    """Parse "p/q", an integer, or a decimal string into a Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise InputError(f"not a rational: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise InputError(f"not a rational: {value!r}") from exc
    raise InputError(f"not a rational: {value!r}")


def format_rational(q: Fraction) -> str:
    """Serialize a rational as "p/q" (or "p" for integers)."""
    q = Fraction(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def _mpfr_to_fraction(v) -> Fraction:
    num, den = v.as_integer_ratio()
    return Fraction(int(num), int(den))


def _round_mode(down: bool):
    return gmpy2.RoundDown if down else gmpy2.RoundUp


def round_dyadic(q: Fraction, prec: int, down: bool) -> Fraction:
    """Round q to a dyadic rational with prec significant bits."""
    if q == 0:
        return Fraction(0)
    with gmpy2.context(precision=prec, round=_round_mode(down)):
        v = gmpy2.mpfr(gmpy2.mpq(q.numerator, q.denominator))
    return _mpfr_to_fraction(v)


@dataclass(frozen=True)
class Enclosure:
    """Certified value: exact when prec is None, else lo <= true <= hi."""

    lo: Fraction
    hi: Fraction
    prec: Optional[int] = None

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty enclosure [{self.lo}, {self.hi}]")
        if self.prec is None and self.lo != self.hi:
            raise ValueError("exact enclosure with nonzero width")

    @classmethod
    def exact(cls, value) -> "Enclosure":
        q = parse_rational(value) if not isinstance(value, Fraction) else value
        return cls(q, q, None)

    @classmethod
    def interval(cls, lo: Fraction, hi: Fraction, prec: int) -> "Enclosure":
        """Interval rounded outward to prec bits."""
        return cls(round_dyadic(Fraction(lo), prec, True), round_dyadic(Fraction(hi), prec, False), prec)

    @classmethod
    def coerce(cls, value: Number) -> "Enclosure":
        if isinstance(value, Enclosure):
            return value
        return cls.exact(Fraction(value))

    @property
    def is_exact(self) -> bool:
        return self.prec is None

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def mid(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def __float__(self) -> float:
        return float(self.mid)

    def _make(self, other: "Enclosure", lo: Fraction, hi: Fraction) -> "Enclosure":
        if self.prec is None and other.prec is None:
            return Enclosure(lo, hi, None)
        prec = max(p for p in (self.prec, other.prec) if p is not None)
        return Enclosure.interval(lo, hi, prec)

    def __add__(self, other: Number) -> "Enclosure":
        other = Enclosure.coerce(other)
        return self._make(other, self.lo + other.lo, self.hi + other.hi)

    __radd__ = __add__

    def __neg__(self) -> "Enclosure":
        return Enclosure(-self.hi, -self.lo, self.prec)

    def __sub__(self, other: Number) -> "Enclosure":
        other = Enclosure.coerce(other)
        return self._make(other, self.lo - other.hi, self.hi - other.lo)

    def __rsub__(self, other: Number) -> "Enclosure":
        return Enclosure.coerce(other) - self

    def __mul__(self, other: Number) -> "Enclosure":
        other = Enclosure.coerce(other)
        products = (self.lo * other.lo, self.lo * other.hi, self.hi * other.lo, self.hi * other.hi)
        return self._make(other, min(products), max(products))

    __rmul__ = __mul__

    def reciprocal(self) -> "Enclosure":
        if self.lo <= 0 <= self.hi:
            raise ZeroDivisionError("enclosure contains zero")
        if self.prec is None:
            return Enclosure.exact(1 / self.lo)
        return Enclosure.interval(1 / self.hi, 1 / self.lo, self.prec)

    def __truediv__(self, other: Number) -> "Enclosure":
        return self * Enclosure.coerce(other).reciprocal()

    def __rtruediv__(self, other: Number) -> "Enclosure":
        return Enclosure.coerce(other) * self.reciprocal()

    def __pow__(self, k: int) -> "Enclosure":
        if not isinstance(k, int) or k < 0:
            raise ValueError("only nonnegative integer powers")
        result = Enclosure.exact(1)
        for _ in range(k):
            result = result * self
        return result

    def abs(self) -> "Enclosure":
        if self.lo >= 0:
            return self
        if self.hi <= 0:
            return -self
        return Enclosure(Fraction(0), max(-self.lo, self.hi), self.prec)

    def max(self, other: Number) -> "Enclosure":
        other = Enclosure.coerce(other)
        return self._make(other, max(self.lo, other.lo), max(self.hi, other.hi))

    def min(self, other: Number) -> "Enclosure":
        other = Enclosure.coerce(other)
        return self._make(other, min(self.lo, other.lo), min(self.hi, other.hi))

    def certainly_le(self, other: Number) -> bool:
        other = Enclosure.coerce(other)
        return self.hi <= other.lo

    def certainly_lt(self, other: Number) -> bool:
        other = Enclosure.coerce(other)
        return self.hi < other.lo

    def certainly_ge(self, other: Number) -> bool:
        return Enclosure.coerce(other).certainly_le(self)

    def overlaps(self, other: Number) -> bool:
        other = Enclosure.coerce(other)
        return self.lo <= other.hi and other.lo <= self.hi

    def contains(self, value: Number) -> bool:
        value = Enclosure.coerce(value)
        return self.lo <= value.lo and value.hi <= self.hi

    def same_value(self, other: "Enclosure") -> bool:
        """True iff both are exact and equal."""
        return self.is_exact and other.is_exact and self.lo == other.lo

    def to_json(self):
        if self.is_exact:
            return format_rational(self.lo)
        return {"lo": format_rational(self.lo), "hi": format_rational(self.hi), "prec": self.prec}

    @classmethod
    def from_json(cls, data) -> "Enclosure":
        if isinstance(data, Enclosure):
            return data
        if isinstance(data, dict):
            try:
                return cls(parse_rational(data["lo"]), parse_rational(data["hi"]), int(data["prec"]))
            except KeyError as exc:
                raise InputError(f"enclosure missing {exc.args[0]!r}") from exc
        return cls.exact(parse_rational(data))

    def __repr__(self) -> str:
        if self.is_exact:
            return f"Enclosure({format_rational(self.lo)})"
        return f"Enclosure([{float(self.lo)!r}, {float(self.hi)!r}], prec={self.prec})"


def enclosure_sum(values: Iterable[Number]) -> Enclosure:
    total = Enclosure.exact(0)
    for v in values:
        total = total + v
    return total


def enclosure_max(values: Iterable[Number]) -> Enclosure:
    result: Optional[Enclosure] = None
    for v in values:
        v = Enclosure.coerce(v)
        result = v if result is None else result.max(v)
    if result is None:
        raise ValueError("max of empty sequence")
    return result


def _exact_root(q: Fraction, k: int) -> Optional[Fraction]:
    num_root, num_exact = gmpy2.iroot(gmpy2.mpz(q.numerator), k)
    den_root, den_exact = gmpy2.iroot(gmpy2.mpz(q.denominator), k)
    if num_exact and den_exact:
        return Fraction(int(num_root), int(den_root))
    return None


def _directed(fn, q: Fraction, prec: int, down: bool) -> Fraction:
    with gmpy2.context(precision=prec, round=_round_mode(down)):
        v = fn(gmpy2.mpfr(gmpy2.mpq(q.numerator, q.denominator)))
    return _mpfr_to_fraction(v)


def root_enclosure(value: Number, k: int, prec: int = DEFAULT_PRECISION) -> Enclosure:
    """Certified k-th root of a nonnegative value."""
    if k < 1:
        raise ValueError("root order must be positive")
    value = Enclosure.coerce(value)
    if value.lo < 0:
        raise ValueError("root of a negative value")
    if value.is_exact:
        exact = _exact_root(value.lo, k)
        if exact is not None:
            return Enclosure.exact(exact)
    prec = value.prec or prec
    lo = _directed(lambda v: gmpy2.root(v, k), value.lo, prec, True)
    hi = _directed(lambda v: gmpy2.root(v, k), value.hi, prec, False)
    return Enclosure(lo, hi, prec)


def rational_power(value: Number, exponent: Fraction, prec: int = DEFAULT_PRECISION) -> Enclosure:
    """Certified value**exponent for a positive value and rational exponent."""
    exponent = Fraction(exponent)
    value = Enclosure.coerce(value)
    if exponent == 0:
        return Enclosure.exact(1)
    base = value ** abs(exponent.numerator)
    result = root_enclosure(base, exponent.denominator, prec)
    if exponent < 0:
        result = result.reciprocal()
    return result


def _power_of_two_exponent(q: Fraction) -> Optional[int]:
    if q <= 0:
        return None
    num, den = q.numerator, q.denominator
    if den == 1 and num & (num - 1) == 0:
        return num.bit_length() - 1
    if num == 1 and den & (den - 1) == 0:
        return -(den.bit_length() - 1)
    return None


def log2_enclosure(value: Number, prec: int = DEFAULT_PRECISION) -> Enclosure:
    """Certified base-2 logarithm of a positive value."""
    value = Enclosure.coerce(value)
    if value.lo <= 0:
        raise ValueError("log of a nonpositive value")
    if value.is_exact:
        e = _power_of_two_exponent(value.lo)
        if e is not None:
            return Enclosure.exact(e)
    prec = value.prec or prec
    return Enclosure(
        _directed(gmpy2.log2, value.lo, prec, True),
        _directed(gmpy2.log2, value.hi, prec, False),
        prec,
    )


def ln_enclosure(value: Number, prec: int = DEFAULT_PRECISION) -> Enclosure:
    """Certified natural logarithm of a positive value."""
    value = Enclosure.coerce(value)
    if value.lo <= 0:
        raise ValueError("log of a nonpositive value")
    if value.is_exact and value.lo == 1:
        return Enclosure.exact(0)
    prec = value.prec or prec
    return Enclosure(
        _directed(gmpy2.log, value.lo, prec, True),
        _directed(gmpy2.log, value.hi, prec, False),
        prec,
    )


def lr_norm(coeffs: Iterable[Fraction], r, prec: int = DEFAULT_PRECISION) -> Enclosure:
    """Certified l_r norm of a finite coefficient list; r rational >= 1 or "inf"."""
    values = [abs(Fraction(c)) for c in coeffs]
    if not values:
        return Enclosure.exact(0)
    if r == "inf" or r == float("inf"):
        return Enclosure.exact(max(values))
    r = Fraction(r)
    if r < 1:
        raise InputError(f"l_r norm needs r >= 1, got {format_rational(r)}")
    if r == 1:
        return Enclosure.exact(sum(values))
    total = enclosure_sum(rational_power(v, r, prec) for v in values if v)
    if total.hi == 0:
        return Enclosure.exact(0)
    return rational_power(total, 1 / r, prec)
