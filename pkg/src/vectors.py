"""
Finitely supported vectors for tsirelson-norms.
"""

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, Mapping, Sequence, Tuple

from src.enclosure import format_rational, parse_rational
from src.errors import InputError


@dataclass(frozen=True)
class BlockVector:
    """Sparse vector: sorted (index, coefficient) pairs with nonzero coefficients."""

    items: Tuple[Tuple[int, Fraction], ...] = ()

    @classmethod
    def from_mapping(cls, coeffs: Mapping[int, object]) -> "BlockVector":
        items = []
        for key, value in coeffs.items():
            try:
                index = int(key)
            except (TypeError, ValueError) as exc:
                raise InputError(f"bad index {key!r}", field="coeffs") from exc
            if index < 1:
                raise InputError(f"index {index} is not positive", field="coeffs")
            q = parse_rational(value)
            if q:
                items.append((index, q))
        items.sort()
        return cls(tuple(items))

    @classmethod
    def basis(cls, index: int, coefficient=1) -> "BlockVector":
        return cls.from_mapping({index: coefficient})

    @classmethod
    def ones(cls, indices: Iterable[int], coefficient=1) -> "BlockVector":
        return cls.from_mapping({i: coefficient for i in indices})

    @property
    def support(self) -> Tuple[int, ...]:
        return tuple(i for i, _ in self.items)

    @property
    def is_zero(self) -> bool:
        return not self.items

    @property
    def minsupp(self) -> int:
        if not self.items:
            raise ValueError("zero vector has no support")
        return self.items[0][0]

    @property
    def maxsupp(self) -> int:
        if not self.items:
            raise ValueError("zero vector has no support")
        return self.items[-1][0]

    @property
    def range(self) -> Tuple[int, int]:
        return (self.minsupp, self.maxsupp)

    def coefficient(self, index: int) -> Fraction:
        for i, c in self.items:
            if i == index:
                return c
        return Fraction(0)

    def as_dict(self) -> Dict[int, Fraction]:
        return dict(self.items)

    def abs_items(self) -> Tuple[Tuple[int, Fraction], ...]:
        return tuple((i, abs(c)) for i, c in self.items)

    def restrict(self, indices: Iterable[int]) -> "BlockVector":
        keep = set(indices)
        return BlockVector(tuple((i, c) for i, c in self.items if i in keep))

    def scale(self, factor) -> "BlockVector":
        factor = Fraction(factor)
        if not factor:
            return BlockVector()
        return BlockVector(tuple((i, c * factor) for i, c in self.items))

    def __add__(self, other: "BlockVector") -> "BlockVector":
        merged = self.as_dict()
        for i, c in other.items:
            merged[i] = merged.get(i, Fraction(0)) + c
        return BlockVector.from_mapping(merged)

    def linf(self) -> Fraction:
        return max((abs(c) for _, c in self.items), default=Fraction(0))

    def l1(self) -> Fraction:
        return sum((abs(c) for _, c in self.items), Fraction(0))

    def to_json(self) -> dict:
        return {"coeffs": {str(i): format_rational(c) for i, c in self.items}}

    @classmethod
    def from_json(cls, data) -> "BlockVector":
        if not isinstance(data, dict) or "coeffs" not in data:
            raise InputError("expected an object with a 'coeffs' map", field="vector")
        if not isinstance(data["coeffs"], dict):
            raise InputError("'coeffs' must be an object", field="vector")
        return cls.from_mapping(data["coeffs"])


def linear_combination(coefficients: Sequence, vectors: Sequence[BlockVector]) -> BlockVector:
    """Sum of coefficients[i] * vectors[i]."""
    merged: Dict[int, Fraction] = {}
    for a, v in zip(coefficients, vectors):
        a = Fraction(a)
        if not a:
            continue
        for i, c in v.items:
            merged[i] = merged.get(i, Fraction(0)) + a * c
    return BlockVector(tuple(sorted((i, c) for i, c in merged.items() if c)))


def is_block_sequence(vectors: Sequence[BlockVector]) -> bool:
    """True iff the vectors are nonzero and successive (maxsupp < next minsupp)."""
    previous = 0
    for v in vectors:
        if v.is_zero or v.minsupp <= previous:
            return False
        previous = v.maxsupp
    return True
