"""
Norm engine for tsirelson-norms.
Computes the mixed (or modified mixed) Tsirelson norm of a finitely
supported vector through its implicit equation

    ||x|| = max(||x||_inf, sup theta_n * sum_i ||E_i x||),

extracts an optimal norming functional with its tree-analysis, and keeps
an exhaustive tree oracle next to the dynamic program for cross-checks.
"""

import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from typing import Dict, List, Optional, Tuple

from src.enclosure import DEFAULT_PRECISION, Enclosure, enclosure_sum
from src.errors import CapExceeded, NonRegularSpec
from src.logging import get_logger
from src.schreier import (
    DEFAULT_CAP_MODIFIED,
    DEFAULT_CAP_NONMODIFIED,
    composed_rank,
    schreier_rank,
    set_partitions,
)
from src.spaces import SpaceSpec
from src.trees import Leaf, Node, NormingTree, TreeNode, enumerate_groupings, valid_indices
from src.vectors import BlockVector

logger = get_logger(__name__)

Items = Tuple[Tuple[int, Fraction], ...]

DEFAULT_MAX_PRECISION = 256


@dataclass(frozen=True)
class _Best:
    """Winning candidate for one restricted vector."""

    value: Enclosure
    key: tuple
    node: TreeNode
    ambiguous: bool = False


@dataclass
class Ambiguity:
    """Two candidates whose enclosures could not be separated."""

    support: Tuple[int, ...]
    chosen: Enclosure
    rival: Enclosure
    precision: int


def _leaf_best(items: Items) -> _Best:
    index, value = items[0]
    for i, c in items[1:]:
        if c > value:
            index, value = i, c
    return _Best(Enclosure.exact(value), (0, (index,), ((index,),)), Leaf(index))


def _structure_key(blocks: Tuple[Tuple[int, ...], ...]) -> tuple:
    return (len(blocks), tuple(b[0] for b in blocks), blocks)


class NormEngine:
    """Memoized solver of the norm equation for one space.

    The memo is keyed on the restricted coefficient map (absolute values),
    so sub-problems are shared across every vector the engine sees.
    """

    def __init__(
        self,
        spec: SpaceSpec,
        cap: Optional[int] = None,
        precision: int = DEFAULT_PRECISION,
        max_precision: int = DEFAULT_MAX_PRECISION,
        regularity_bound: int = 12,
    ):
        self.spec = spec
        default_cap = DEFAULT_CAP_MODIFIED if spec.modified else DEFAULT_CAP_NONMODIFIED
        self.cap = cap if cap is not None else default_cap
        self.precision = precision
        self.max_precision = max(max_precision, precision)
        self.ambiguities: List[Ambiguity] = []
        self._memo: Dict[tuple, _Best] = {}
        self._thetas: Dict[Tuple[int, int], Optional[Enclosure]] = {}
        self._check_regularity(regularity_bound)

    def _check_regularity(self, bound: int) -> None:
        violations = self.spec.regularity_violations(bound, self.precision)
        if violations:
            message = f"{self.spec.label()} is not regular: {violations[0]}"
            logger.warning(message, extra={"instances": len(violations)})
            warnings.warn(message, NonRegularSpec, stacklevel=3)

    # Weights

    def theta(self, n: int, prec: Optional[int] = None) -> Optional[Enclosure]:
        prec = prec or self.precision
        key = (n, prec)
        if key not in self._thetas:
            self._thetas[key] = self.spec.theta(n, prec)
        return self._thetas[key]

    def weight_index(self, minima: Tuple[int, ...], blocks: int) -> Optional[int]:
        """Least admissible weight index for a partition, None if there is none."""
        spec = self.spec
        if spec.family_kind == "A":
            n = spec.least_index(blocks)
        else:
            rank = composed_rank(minima, 2) if spec.compose_inner_A2 else schreier_rank(minima)
            if rank is None:
                return None
            n = spec.least_index(rank)
        if spec.max_index is not None and n > spec.max_index:
            return None
        return n

    # Dynamic program

    def _items(self, x: BlockVector) -> Items:
        items = x.abs_items()
        if len(items) > self.cap:
            raise CapExceeded(len(items), self.cap)
        return items

    def _pick(self, items: Items, candidates: List[_Best], prec: int) -> _Best:
        best = candidates[0]
        for cand in candidates[1:]:
            if self._better(cand, best):
                best = cand
        rival = None
        for cand in candidates:
            if cand is best:
                continue
            if cand.value.hi > best.value.lo and not cand.value.same_value(best.value):
                rival = cand
                break
        if rival is None:
            return best
        self.ambiguities.append(
            Ambiguity(tuple(i for i, _ in items), best.value, rival.value, prec)
        )
        hi = max(c.value.hi for c in candidates)
        value = Enclosure(best.value.lo, hi, best.value.prec or rival.value.prec or prec)
        return _Best(value, best.key, best.node, ambiguous=True)

    @staticmethod
    def _better(a: _Best, b: _Best) -> bool:
        if a.value.lo != b.value.lo:
            return a.value.lo > b.value.lo
        if a.value.hi != b.value.hi:
            return a.value.hi > b.value.hi
        return a.key < b.key

    def _solve(self, items: Items, budget: Optional[int], prec: int) -> _Best:
        key = (items, budget, prec)
        cached = self._memo.get(key)
        if cached is not None:
            return cached
        candidates = [_leaf_best(items)]
        if len(items) >= 2 and (budget is None or budget >= 1):
            if self.spec.modified:
                candidates.extend(self._modified_candidates(items, budget, prec))
            else:
                candidates.extend(self._admissible_candidates(items, budget, prec))
        best = self._pick(items, candidates, prec)
        self._memo[key] = best
        return best

    def _combine(self, blocks: Tuple[Items, ...], budget: Optional[int], prec: int) -> Optional[_Best]:
        minima = tuple(sorted(b[0][0] for b in blocks))
        n = self.weight_index(minima, len(blocks))
        if n is None or (budget is not None and n > budget):
            return None
        theta = self.theta(n, prec)
        if theta is None:
            return None
        child_budget = None if budget is None else budget - n
        subs = [self._solve(b, child_budget, prec) for b in blocks]
        value = theta * enclosure_sum(s.value for s in subs)
        supports = tuple(tuple(i for i, _ in b) for b in blocks)
        return _Best(
            value,
            _structure_key(supports),
            Node(n, tuple(s.node for s in subs)),
            ambiguous=any(s.ambiguous for s in subs),
        )

    def _admissible_candidates(self, items: Items, budget: Optional[int], prec: int):
        s = len(items)
        for r in range(2, s + 1):
            for starts in combinations(range(s), r):
                ends = starts[1:] + (s,)
                cand = self._combine(tuple(items[a:b] for a, b in zip(starts, ends)), budget, prec)
                if cand is not None:
                    yield cand

    def _modified_candidates(self, items: Items, budget: Optional[int], prec: int):
        for drop in range(len(items)):
            sub = self._solve(items[:drop] + items[drop + 1:], budget, prec)
            yield sub
        lookup = dict(items)
        for blocks in set_partitions(tuple(i for i, _ in items), min_blocks=2):
            cand = self._combine(
                tuple(tuple((i, lookup[i]) for i in b) for b in blocks), budget, prec
            )
            if cand is not None:
                yield cand

    # Public API

    def norm(self, x: BlockVector, max_order: Optional[int] = None) -> Enclosure:
        """Certified norm of x; with max_order, the best value over trees whose leaves have order <= max_order."""
        items = self._items(x)
        if not items:
            return Enclosure.exact(0)
        return self._solve(items, max_order, self.precision).value

    def norming_functional(self, x: BlockVector, max_order: Optional[int] = None) -> NormingTree:
        """Optimal norming functional of x with its tree-analysis."""
        items = self._items(x)
        if not items:
            return NormingTree(Leaf(1), self.spec)
        prec = self.precision
        best = self._solve(items, max_order, prec)
        while best.ambiguous and prec < self.max_precision:
            prec = min(prec * 2, self.max_precision)
            logger.debug("refining argmax", extra={"precision": prec, "support": len(items)})
            best = self._solve(items, max_order, prec)
        if best.ambiguous:
            logger.info(
                "argmax not separated at maximal precision",
                extra={"precision": prec, "support": len(items)},
            )
        signs = {i: (-1 if c < 0 else 1) for i, c in x.items}
        return NormingTree(_with_signs(best.node, signs), self.spec)

    def clear(self) -> None:
        self._memo.clear()
        self.ambiguities.clear()


def _with_signs(node: TreeNode, signs: Dict[int, int]) -> TreeNode:
    if isinstance(node, Leaf):
        return Leaf(node.index, signs.get(node.index, 1))
    return Node(node.weight_index, tuple(_with_signs(c, signs) for c in node.children))


@lru_cache(maxsize=64)
def get_engine(
    spec: SpaceSpec,
    cap: Optional[int] = None,
    precision: int = DEFAULT_PRECISION,
    max_precision: int = DEFAULT_MAX_PRECISION,
) -> NormEngine:
    """Shared engine per (space, cap, precision)."""
    return NormEngine(spec, cap=cap, precision=precision, max_precision=max_precision)


def norm(
    x: BlockVector,
    spec: SpaceSpec,
    cap: Optional[int] = None,
    precision: int = DEFAULT_PRECISION,
    max_order: Optional[int] = None,
) -> Enclosure:
    return get_engine(spec, cap, precision).norm(x, max_order=max_order)


def norming_functional(
    x: BlockVector,
    spec: SpaceSpec,
    cap: Optional[int] = None,
    precision: int = DEFAULT_PRECISION,
) -> NormingTree:
    return get_engine(spec, cap, precision).norming_functional(x)


def max_order_norm(x: BlockVector, spec: SpaceSpec, max_order: int, cap: Optional[int] = None) -> Enclosure:
    """Best value over norming functionals whose leaves all have order <= max_order."""
    return get_engine(spec, cap).norm(x, max_order=max_order)


def oracle_norm(
    x: BlockVector,
    spec: SpaceSpec,
    depth: Optional[int] = None,
    horizon: Optional[int] = None,
    precision: int = DEFAULT_PRECISION,
) -> Enclosure:
    """Sup of f(x) over every valid norming tree up to the given depth.

    Unlike the engine this enumerates single-block nodes and every weight
    index up to the horizon, so it checks both shortcuts the engine takes.
    """
    items = x.abs_items()
    if not items:
        return Enclosure.exact(0)
    depth = len(items) if depth is None else depth
    horizon = len(items) + 1 if horizon is None else horizon
    coeffs = dict(items)
    thetas: Dict[int, Optional[Enclosure]] = {}

    def theta(n: int) -> Optional[Enclosure]:
        if n not in thetas:
            thetas[n] = spec.theta(n, precision)
        return thetas[n]

    @lru_cache(maxsize=None)
    def best(points: Tuple[int, ...], depth_left: int) -> Enclosure:
        value = Enclosure.exact(max(coeffs[i] for i in points))
        if depth_left == 0:
            return value
        for blocks in enumerate_groupings(points, spec.modified):
            minima = tuple(sorted(b[0] for b in blocks))
            indices = valid_indices(minima, spec, horizon)
            weights = [t for t in (theta(n) for n in indices) if t is not None]
            if not weights:
                continue
            inner = enclosure_sum(best(b, depth_left - 1) for b in blocks)
            for w in weights:
                value = value.max(w * inner)
        return value

    return best(tuple(i for i, _ in items), depth)


__all__ = [
    "NormEngine",
    "Ambiguity",
    "get_engine",
    "norm",
    "norming_functional",
    "max_order_norm",
    "oracle_norm",
]
