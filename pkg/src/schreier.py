"""
Schreier families module for tsirelson-norms.
Finite-order Schreier families, the A_k families and their compositions,
admissible/allowable partition checks, partition enumeration, and the
Schreier-constrained maximum-sum optimizer.

Convention: S_0 holds the singletons and the empty set; S_{n+1} holds
unions F_1 < ... < F_k of sets from S_n with k <= min F_1.
"""

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from typing import Dict, Iterable, Iterator, List, Mapping, NamedTuple, Optional, Sequence, Tuple

from src.enclosure import Enclosure
from src.errors import CapExceeded, InputError, MalformedPartition

FiniteSet = Tuple[int, ...]

DEFAULT_CAP_NONMODIFIED = 16
DEFAULT_CAP_MODIFIED = 12


def as_finite_set(values: Iterable[int], field: str = "set") -> FiniteSet:
    """Validate a strictly increasing list of positive integers."""
    result = tuple(int(v) for v in values)
    for a, b in zip(result, result[1:]):
        if a >= b:
            raise InputError("elements must be strictly increasing", field=field)
    if result and result[0] < 1:
        raise InputError("elements must be positive", field=field)
    return result


def parse_set(text: str) -> FiniteSet:
    """Parse "2,3,4" into a FiniteSet."""
    text = text.strip()
    if not text:
        return ()
    try:
        values = [int(part) for part in text.split(",")]
    except ValueError as exc:
        raise InputError(f"cannot parse {text!r}", field="set") from exc
    return as_finite_set(values)


@dataclass(frozen=True)
class FamilySpec:
    """A(k), S(n), or compose(outer, inner) with inner an A family."""

    kind: str
    size: int = 0
    outer: Optional["FamilySpec"] = None
    inner: Optional["FamilySpec"] = None

    @classmethod
    def S(cls, n: int) -> "FamilySpec":
        if n < 0:
            raise InputError(f"S family order must be nonnegative, got {n}")
        return cls("S", n)

    @classmethod
    def A(cls, k: int) -> "FamilySpec":
        if k < 1:
            raise InputError(f"A family size must be positive, got {k}")
        return cls("A", k)

    @classmethod
    def compose(cls, outer: "FamilySpec", inner: "FamilySpec") -> "FamilySpec":
        if outer.kind == "compose" or inner.kind != "A":
            raise InputError("only S_n[A_k] and A_n[A_k] compositions are supported")
        return cls("compose", 0, outer, inner)

    def to_json(self):
        if self.kind == "compose":
            return {"compose": [self.outer.to_json(), self.inner.to_json()]}
        return {self.kind: self.size}

    @classmethod
    def from_json(cls, data) -> "FamilySpec":
        if not isinstance(data, dict) or len(data) != 1:
            raise InputError(f"bad family {data!r}", field="family")
        (tag, value), = data.items()
        if tag == "S":
            return cls.S(int(value))
        if tag == "A":
            return cls.A(int(value))
        if tag == "compose" and isinstance(value, list) and len(value) == 2:
            return cls.compose(cls.from_json(value[0]), cls.from_json(value[1]))
        raise InputError(f"bad family {data!r}", field="family")

    def __str__(self) -> str:
        if self.kind == "compose":
            return f"{self.outer}[{self.inner}]"
        return f"{self.kind}_{self.size}"


# Membership


def _greedy_end(F: FiniteSet, start: int, n: int) -> int:
    """End position of the maximal S_n initial segment of F[start:]."""
    if start >= len(F):
        return start
    if n == 0:
        return start + 1
    pos = start
    for _ in range(F[start]):
        if pos >= len(F):
            break
        pos = _greedy_end(F, pos, n - 1)
    return pos


@lru_cache(maxsize=65536)
def _member_s(F: FiniteSet, n: int) -> bool:
    return _greedy_end(F, 0, n) == len(F)


def _chunk_minima(F: FiniteSet, k: int) -> Iterator[FiniteSet]:
    """Minima of every grouping of F into consecutive chunks of size <= k."""
    if not F:
        yield ()
        return
    for size in range(1, min(k, len(F)) + 1):
        for rest in _chunk_minima(F[size:], k):
            yield (F[0],) + rest


@lru_cache(maxsize=65536)
def _member_compose(F: FiniteSet, outer: FamilySpec, inner_k: int) -> bool:
    return any(member(m, outer) for m in _chunk_minima(F, inner_k))


def member(F: Sequence[int], fam: FamilySpec) -> bool:
    """True iff F belongs to the family (the empty set belongs to all)."""
    F = tuple(F)
    if not F:
        return True
    if fam.kind == "A":
        return len(F) <= fam.size
    if fam.kind == "S":
        return _member_s(F, fam.size)
    return _member_compose(F, fam.outer, fam.inner.size)


def member_exhaustive(F: Sequence[int], fam: FamilySpec) -> bool:
    """Membership by unfolding the recursion over every decomposition."""
    F = tuple(F)
    if not F:
        return True
    if fam.kind == "A":
        return len(F) <= fam.size
    if fam.kind == "compose":
        return any(member_exhaustive(m, fam.outer) for m in _chunk_minima(F, fam.inner.size))

    @lru_cache(maxsize=None)
    def inside(start: int, end: int, level: int) -> bool:
        if level == 0:
            return end - start <= 1
        return splits_within(start, end, F[start], level - 1)

    @lru_cache(maxsize=None)
    def splits_within(start: int, end: int, pieces: int, level: int) -> bool:
        if start == end:
            return True
        if pieces == 0:
            return False
        return any(
            inside(start, cut, level) and splits_within(cut, end, pieces - 1, level)
            for cut in range(start + 1, end + 1)
        )

    return inside(0, len(F), fam.size)


def schreier_rank(F: Sequence[int]) -> Optional[int]:
    """Least n with F in S_n, or None when min F = 1 and #F >= 2."""
    F = tuple(F)
    if len(F) <= 1:
        return 0
    if F[0] == 1:
        return None
    n = 1
    while not _member_s(F, n):
        n += 1
    return n


def composed_rank(F: Sequence[int], inner_k: int = 2) -> Optional[int]:
    """Least n with F in S_n[A_k], or None if no n works."""
    F = tuple(F)
    if len(F) <= inner_k:
        return 0
    for n in range(1, len(F) + 1):
        if _member_compose(F, FamilySpec.S(n), inner_k):
            return n
    return None


def decompose(F: Sequence[int], n: int) -> List[FiniteSet]:
    """Greedy split of F into maximal successive S_n pieces."""
    F = tuple(F)
    pieces = []
    pos = 0
    while pos < len(F):
        end = _greedy_end(F, pos, n)
        pieces.append(F[pos:end])
        pos = end
    return pieces


def split_composed(F: Sequence[int], outer: int, inner: int) -> Optional[List[FiniteSet]]:
    """Split F into successive S_inner pieces whose minima lie in S_outer.

    Tries the greedy split first and falls back to exhaustive search.
    Returns None when F is not in S_outer[S_inner].
    """
    F = tuple(F)
    pieces = decompose(F, inner)
    if member(tuple(p[0] for p in pieces), FamilySpec.S(outer)):
        return pieces

    def search(start: int, minima: FiniteSet) -> Optional[List[FiniteSet]]:
        if start == len(F):
            return [] if member(minima, FamilySpec.S(outer)) else None
        for end in range(len(F), start, -1):
            piece = F[start:end]
            if not member(piece, FamilySpec.S(inner)):
                continue
            rest = search(end, minima + (F[start],))
            if rest is not None:
                return [piece] + rest
        return None

    return search(0, ())


# Partitions


@dataclass(frozen=True)
class Partition:
    """Blocks of a partition; modified partitions need only be disjoint."""

    blocks: Tuple[FiniteSet, ...]
    modified: bool = False

    @property
    def minima(self) -> FiniteSet:
        return tuple(sorted(b[0] for b in self.blocks if b))

    def validate(self) -> None:
        seen = set()
        for block in self.blocks:
            if not block:
                raise MalformedPartition("empty block")
            if list(block) != sorted(set(block)):
                raise MalformedPartition(f"block {list(block)} is not strictly increasing")
            if seen.intersection(block):
                raise MalformedPartition(f"block {list(block)} overlaps an earlier block")
            seen.update(block)
        if not self.modified:
            for left, right in zip(self.blocks, self.blocks[1:]):
                if left[-1] >= right[0]:
                    raise MalformedPartition(f"blocks {list(left)} and {list(right)} are not successive")

    def to_json(self) -> dict:
        return {"blocks": [list(b) for b in self.blocks], "modified": self.modified}


def check_partition(p: Partition, fam: FamilySpec) -> bool:
    """True iff the block minima form a member of fam."""
    p.validate()
    return member(p.minima, fam)


class PartitionInfo(NamedTuple):
    partition: Partition
    rank: Optional[int]
    size: int


def successive_partitions(support: Sequence[int], min_blocks: int = 2) -> Iterator[Tuple[FiniteSet, ...]]:
    """Blocks support ∩ [m_i, m_{i+1}) for every minima subset of size >= min_blocks."""
    support = tuple(support)
    s = len(support)
    for r in range(min_blocks, s + 1):
        for starts in combinations(range(s), r):
            ends = starts[1:] + (s,)
            yield tuple(support[a:b] for a, b in zip(starts, ends))


def set_partitions(elements: Sequence[int], min_blocks: int = 1) -> Iterator[Tuple[FiniteSet, ...]]:
    """Every set partition of elements, blocks ordered by their minima."""
    elements = tuple(elements)

    def build(i: int, blocks: List[List[int]]) -> Iterator[Tuple[FiniteSet, ...]]:
        if i == len(elements):
            if len(blocks) >= min_blocks:
                yield tuple(tuple(b) for b in blocks)
            return
        x = elements[i]
        for b in blocks:
            b.append(x)
            yield from build(i + 1, blocks)
            b.pop()
        blocks.append([x])
        yield from build(i + 1, blocks)
        blocks.pop()

    if elements:
        yield from build(0, [])


def enumerate_partitions(
    support: Sequence[int], modified: bool, cap: Optional[int] = None
) -> Iterator[PartitionInfo]:
    """Stream the partitions (>= 2 blocks) searched by the norm equation."""
    support = as_finite_set(support, field="support")
    if cap is None:
        cap = DEFAULT_CAP_MODIFIED if modified else DEFAULT_CAP_NONMODIFIED
    if len(support) > cap:
        raise CapExceeded(len(support), cap)
    if not modified:
        for blocks in successive_partitions(support):
            p = Partition(blocks, modified=False)
            yield PartitionInfo(p, schreier_rank(p.minima), len(blocks))
        return
    for r in range(2, len(support) + 1):
        for subset in combinations(support, r):
            for blocks in set_partitions(subset, min_blocks=2):
                p = Partition(blocks, modified=True)
                yield PartitionInfo(p, schreier_rank(p.minima), len(blocks))


# Maximum sums over Schreier sets


def _top_k_fenwick(values: List[Fraction]):
    """Fenwick tree answering "sum of the k largest inserted values"."""
    ranked = sorted(set(values), reverse=True)
    rank = {v: i + 1 for i, v in enumerate(ranked)}
    size = len(ranked)
    counts = [0] * (size + 1)
    sums = [Fraction(0)] * (size + 1)
    inserted = [0, Fraction(0)]

    def insert(v: Fraction) -> None:
        i = rank[v]
        inserted[0] += 1
        inserted[1] += v
        while i <= size:
            counts[i] += 1
            sums[i] += v
            i += i & -i

    def top(k: int) -> Fraction:
        if k <= 0:
            return Fraction(0)
        if k >= inserted[0]:
            return inserted[1]
        pos, count, total = 0, 0, Fraction(0)
        step = 1 << (size.bit_length() - 1) if size else 0
        while step:
            nxt = pos + step
            if nxt <= size and count + counts[nxt] < k:
                pos = nxt
                count += counts[nxt]
                total += sums[nxt]
            step >>= 1
        return total + (k - count) * ranked[pos]

    return insert, top


def _max_s1_sum(keys: FiniteSet, weights: List[Fraction]) -> Fraction:
    insert, top = _top_k_fenwick(weights)
    best = Fraction(0)
    for p in range(len(keys) - 1, -1, -1):
        best = max(best, weights[p] + top(keys[p] - 1))
        insert(weights[p])
    return best


def _max_s_sum_dp(keys: FiniteSet, weights: List[Fraction], M: int) -> Fraction:
    m = len(keys)

    @lru_cache(maxsize=None)
    def window(level: int, lo: int, hi: int) -> Fraction:
        if lo > hi:
            return Fraction(0)
        if level == 0:
            return max(weights[lo:hi + 1])
        return max(pieces(level - 1, min(keys[p], hi - p + 1), p, hi) for p in range(lo, hi + 1))

    @lru_cache(maxsize=None)
    def pieces(level: int, j: int, lo: int, hi: int) -> Fraction:
        if j == 0 or lo > hi:
            return Fraction(0)
        j = min(j, hi - lo + 1)
        return max(window(level, lo, e) + pieces(level, j - 1, e + 1, hi) for e in range(lo, hi + 1))

    return window(M, 0, m - 1)


def max_schreier_sum(weights: Mapping[int, object], M: int) -> Enclosure:
    """sup over F in S_M (F within the keys) of the sum of weights on F."""
    if M < 0:
        raise InputError(f"M must be nonnegative, got {M}")
    items = sorted((int(k), Fraction(v)) for k, v in weights.items())
    if any(v < 0 for _, v in items):
        raise InputError("weights must be nonnegative", field="weights")
    if not items:
        return Enclosure.exact(0)
    keys = tuple(k for k, _ in items)
    values = [v for _, v in items]
    if M == 0:
        return Enclosure.exact(max(values))
    if M == 1:
        return Enclosure.exact(_max_s1_sum(keys, values))
    return Enclosure.exact(_max_s_sum_dp(keys, values, M))


def max_schreier_sum_bruteforce(weights: Mapping[int, object], M: int) -> Enclosure:
    """Reference optimizer: enumerate every subset and test membership."""
    items = sorted((int(k), Fraction(v)) for k, v in weights.items())
    keys = tuple(k for k, _ in items)
    value: Dict[int, Fraction] = dict(items)
    best = Fraction(0)
    fam = FamilySpec.S(M)
    for r in range(1, len(keys) + 1):
        for F in combinations(keys, r):
            if member_exhaustive(F, fam):
                best = max(best, sum(value[i] for i in F))
    return Enclosure.exact(best)
