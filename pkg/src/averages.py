"""
Averages module for tsirelson-norms.
(M, eps)-averages and their certificates, averaging trees with weights
N_i^j and errors eps_i^j, the restriction of an averaging tree to a
selection of nodes, and the special / Tsirelson / RIS average checks.
"""

from bisect import bisect_left
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from src.enclosure import DEFAULT_PRECISION, Enclosure, enclosure_sum, format_rational, parse_rational
from src.errors import (
    CapExceeded,
    InputError,
    MalformedDecomposition,
    NonDyadicCoefficient,
    PreconditionFailed,
    SupplyExhausted,
)
from src.logging import get_logger
from src.norm import get_engine
from src.schreier import FamilySpec, as_finite_set, max_schreier_sum, member, schreier_rank, set_partitions
from src.spaces import SpaceSpec, tsirelson
from src.trees import Leaf, Node, NormingTree, TreeNode
from src.vectors import BlockVector, is_block_sequence, linear_combination

logger = get_logger(__name__)

DEFAULT_MAX_LEAVES = 40000
DEFAULT_FAMILY_SUPPORT_CAP = 8


# Certificates


@dataclass(frozen=True)
class AverageCert:
    """x = sum_i a_i x_i claimed to be an (M, eps)-average of the blocks x_i."""

    vectors: Tuple[BlockVector, ...]
    coefficients: Tuple[Fraction, ...]
    M: int
    eps: Fraction

    @property
    def minima(self) -> Tuple[int, ...]:
        return tuple(v.minsupp for v in self.vectors)

    def vector(self) -> BlockVector:
        return linear_combination(self.coefficients, self.vectors)

    def mass_weights(self) -> Dict[int, Fraction]:
        return {v.minsupp: a for v, a in zip(self.vectors, self.coefficients)}

    def witness(self) -> dict:
        """Schreier rank of G and the largest S_{M-1} mass."""
        mass = None if self.M == 0 else max_schreier_sum(self.mass_weights(), self.M - 1)
        return {
            "rank": schreier_rank(self.minima),
            "mass": None if mass is None else mass.to_json(),
        }

    def to_json(self) -> dict:
        return {
            "vectors": [v.to_json() for v in self.vectors],
            "coefficients": [format_rational(a) for a in self.coefficients],
            "M": self.M,
            "eps": format_rational(self.eps),
        }

    @classmethod
    def from_json(cls, data) -> "AverageCert":
        try:
            return cls(
                tuple(BlockVector.from_json(v) for v in data["vectors"]),
                tuple(parse_rational(a) for a in data["coefficients"]),
                int(data["M"]),
                parse_rational(data["eps"]),
            )
        except (KeyError, TypeError) as exc:
            raise InputError(f"bad average certificate: {exc}", field="average") from exc


def check_average(cert: AverageCert) -> bool:
    """True iff cert is an (M, eps)-average of its blocks.

    Raises:
        MalformedDecomposition: blocks are not a successive nonzero sequence
    """
    if len(cert.vectors) != len(cert.coefficients) or not cert.vectors:
        raise MalformedDecomposition("decomposition needs one coefficient per block")
    if not is_block_sequence(cert.vectors):
        raise MalformedDecomposition("decomposition blocks are not successive")
    if cert.M < 0:
        return False
    if any(not 0 < a <= 1 for a in cert.coefficients):
        return False
    if sum(cert.coefficients) != 1:
        return False
    if not member(cert.minima, FamilySpec.S(cert.M)):
        return False
    if cert.M == 0:
        return True
    return max_schreier_sum(cert.mass_weights(), cert.M - 1).hi < cert.eps


def uniform_average(G: Sequence[int], M: int, eps: Optional[Fraction] = None) -> AverageCert:
    """Uniform combination of e_g over G; eps defaults to the S_{M-1} mass plus 1/(2 #G)."""
    G = as_finite_set(G, field="G")
    if not G:
        raise InputError("G must be nonempty", field="G")
    a = Fraction(1, len(G))
    vectors = tuple(BlockVector.basis(g) for g in G)
    if eps is None:
        mass = Fraction(0) if M == 0 else max_schreier_sum({g: a for g in G}, M - 1).hi
        eps = min(mass + a / 2, Fraction(1))
    return AverageCert(vectors, tuple(a for _ in G), M, Fraction(eps))


def maximal_schreier_set(n: int, start: int) -> List[Tuple[int, ...]]:
    """Pieces of the maximal S_n set starting at start, as successive S_{n-1} sets."""
    if n == 0:
        return [(start,)]
    pieces = []
    position = start
    for _ in range(start):
        sub = maximal_schreier_set(n - 1, position)
        piece = tuple(i for p in sub for i in p)
        pieces.append(piece)
        position = piece[-1] + 1
    return pieces


def special_convex_combination(n: int, start: int, repeated: bool = False) -> BlockVector:
    """Combination of e_i over the maximal S_n set starting at start.

    With repeated=False the coefficients are uniform; otherwise each
    S_{n-1} piece gets equal mass recursively (a repeated average).
    """
    if n < 0 or start < 1:
        raise InputError("need n >= 0 and start >= 1")

    def weights(level: int, first: int) -> Dict[int, Fraction]:
        if level == 0:
            return {first: Fraction(1)}
        result: Dict[int, Fraction] = {}
        position = first
        for _ in range(first):
            inner = weights(level - 1, position)
            for i, w in inner.items():
                result[i] = w / first
            position = max(inner) + 1
        return result

    if repeated:
        return BlockVector.from_mapping(weights(n, start))
    indices = [i for piece in maximal_schreier_set(n, start) for i in piece]
    return BlockVector.ones(indices, Fraction(1, len(indices)))


# Supplies


class BasisSupply:
    """Unit vectors e_start, e_{start+1}, ..."""

    def __init__(self, start: int = 1):
        if start < 1:
            raise InputError("supply start must be positive", field="supply_start")
        self.position = start

    def next_block(self, floor: int) -> BlockVector:
        index = max(self.position, floor)
        self.position = index + 1
        return BlockVector.basis(index)


class TranslateSupply:
    """Translates of one normalized pattern, placed at or after the floor."""

    def __init__(self, pattern: BlockVector, start: int = 1):
        if pattern.is_zero:
            raise InputError("pattern must be nonzero", field="pattern")
        self.pattern = pattern
        self.position = start

    def next_block(self, floor: int) -> BlockVector:
        start = max(self.position, floor)
        shift = start - self.pattern.minsupp
        block = BlockVector(tuple((i + shift, c) for i, c in self.pattern.items))
        self.position = block.maxsupp + 1
        return block


class ListSupply:
    """A finite list of blocks; blocks below the floor are skipped."""

    def __init__(self, blocks: Sequence[BlockVector]):
        if not is_block_sequence(blocks):
            raise InputError("supplied blocks must be successive", field="supply")
        self._blocks = iter(blocks)

    def next_block(self, floor: int) -> BlockVector:
        for block in self._blocks:
            if block.minsupp >= floor:
                return block
        raise SupplyExhausted(f"no supplied block starts at or after {floor}")


# Averaging trees


@dataclass
class AveragingNode:
    """x_i^j with weight N_i^j, error eps_i^j and coefficient a_i^j."""

    level: int
    index: int
    vector: BlockVector
    N: Optional[int]
    eps: Optional[Fraction]
    a: Fraction = Fraction(1)
    children: Tuple[int, int] = (0, 0)
    leaves: Tuple[int, int] = (0, 0)
    origin: Optional[Tuple[int, ...]] = None

    @property
    def child_count(self) -> int:
        return self.children[1] - self.children[0] + 1 if self.children[0] else 0

    def to_json(self) -> dict:
        data = {
            "vector": self.vector.to_json(),
            "N": self.N,
            "eps": None if self.eps is None else format_rational(self.eps),
            "a": format_rational(self.a),
            "children": self.child_count,
        }
        if self.origin is not None:
            data["origin"] = list(self.origin)
        return data


@dataclass
class AveragingTree:
    """Levels 0..M of node vectors; levels[M] holds the single root."""

    levels: List[List[AveragingNode]]
    eps: Fraction
    power_of_two: bool = False
    error_factor: Optional[Fraction] = None
    root_exception: bool = False
    source_level: Optional[int] = None
    selection: Optional[Tuple[int, ...]] = None

    @property
    def height(self) -> int:
        return len(self.levels) - 1

    @property
    def root(self) -> AveragingNode:
        return self.levels[-1][0]

    def node(self, level: int, index: int) -> AveragingNode:
        return self.levels[level][index - 1]

    def children_of(self, node: AveragingNode) -> List[AveragingNode]:
        if node.level == 0:
            return []
        first, last = node.children
        return self.levels[node.level - 1][first - 1:last]

    def leaves_of(self, node: AveragingNode) -> List[AveragingNode]:
        first, last = node.leaves
        return self.levels[0][first - 1:last]

    def certificate(self, node: Optional[AveragingNode] = None) -> AverageCert:
        """x_i^j as a (j, eps_i^j)-average of the leaves below it."""
        node = node or self.root
        leaves = self.leaves_of(node)
        scale = 1 / node.a
        eps = node.eps if node.eps is not None else Fraction(1)
        return AverageCert(
            tuple(leaf.vector for leaf in leaves),
            tuple(leaf.a * scale for leaf in leaves),
            node.level,
            eps,
        )

    def to_json(self) -> dict:
        data = {
            "eps": format_rational(self.eps),
            "power_of_two": self.power_of_two,
            "error_factor": None if self.error_factor is None else format_rational(self.error_factor),
            "root_exception": self.root_exception,
            "levels": [[n.to_json() for n in level] for level in self.levels],
        }
        if self.selection is not None:
            data["source_level"] = self.source_level
            data["selection"] = list(self.selection)
        return data

    @classmethod
    def from_json(cls, data) -> "AveragingTree":
        try:
            raw_levels = data["levels"]
            levels: List[List[AveragingNode]] = []
            for j, raw in enumerate(raw_levels):
                nodes = []
                child_pos = 1
                for i, item in enumerate(raw, start=1):
                    count = int(item.get("children", 0))
                    children = (child_pos, child_pos + count - 1) if count else (0, 0)
                    child_pos += count
                    eps = item.get("eps")
                    origin = item.get("origin")
                    nodes.append(
                        AveragingNode(
                            level=j,
                            index=i,
                            vector=BlockVector.from_json(item["vector"]),
                            N=None if item.get("N") is None else int(item["N"]),
                            eps=None if eps is None else parse_rational(eps),
                            a=parse_rational(item["a"]),
                            children=children,
                            origin=None if origin is None else tuple(int(m) for m in origin),
                        )
                    )
                levels.append(nodes)
            factor = data.get("error_factor")
            tree = cls(
                levels=levels,
                eps=parse_rational(data["eps"]),
                power_of_two=bool(data.get("power_of_two", False)),
                error_factor=None if factor is None else parse_rational(factor),
                root_exception=bool(data.get("root_exception", False)),
                source_level=data.get("source_level"),
                selection=None if data.get("selection") is None else tuple(data["selection"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"bad averaging tree: {exc}", field="tree") from exc
        _assign_leaf_ranges(tree)
        return tree


def _assign_leaf_ranges(tree: AveragingTree) -> None:
    for j, level in enumerate(tree.levels):
        for node in level:
            if j == 0:
                node.leaves = (node.index, node.index)
            else:
                first, last = node.children
                node.leaves = (tree.levels[j - 1][first - 1].leaves[0], tree.levels[j - 1][last - 1].leaves[1])


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


def _least_weight(bound: Fraction, power_of_two: bool) -> int:
    """Least integer (power of two) strictly greater than bound."""
    n = int(bound) + 1 if bound >= 0 else 1
    if power_of_two:
        p = 1
        while p <= bound:
            p *= 2
        return p
    return n


class _TreeBuilder:
    def __init__(self, supply, M: int, eps: Fraction, power_of_two: bool, factor: Optional[Fraction], max_leaves: int):
        self.supply = supply
        self.M = M
        self.eps = eps
        self.power_of_two = power_of_two
        self.factor = factor
        self.max_leaves = max_leaves
        self.levels: List[List[AveragingNode]] = [[] for _ in range(M + 1)]
        self.floor = 1

    def next_error(self, level: int) -> Fraction:
        nodes = self.levels[level]
        if not nodes:
            return self.eps if self.factor is None else self.factor * self.eps / 2
        i = len(nodes)
        prev_max = nodes[-1].vector.maxsupp
        if self.factor is None:
            return Fraction(1, 2 ** i * prev_max + 1)
        return self.factor * self.eps / (2 ** i * prev_max)

    def build(self, level: int) -> AveragingNode:
        nodes = self.levels[level]
        if level == 0:
            if len(nodes) >= self.max_leaves:
                raise SupplyExhausted(f"averaging tree needs more than {self.max_leaves} leaves")
            vector = self.supply.next_block(self.floor)
            node = AveragingNode(0, len(nodes) + 1, vector, None, None)
            node.leaves = (node.index, node.index)
            nodes.append(node)
            return node
        eps_i = self.next_error(level)
        prev_max = nodes[-1].vector.maxsupp if nodes else 0
        N = _least_weight(max(2 / eps_i, Fraction(prev_max)), self.power_of_two)
        self.floor = max(self.floor, N)
        children = [self.build(level - 1) for _ in range(N)]
        vector = linear_combination([Fraction(1, N)] * N, [c.vector for c in children])
        if vector.minsupp < N:
            raise SupplyExhausted(f"supply returned a block below the floor {N}")
        node = AveragingNode(
            level,
            len(nodes) + 1,
            vector,
            N,
            eps_i,
            children=(children[0].index, children[-1].index),
            leaves=(children[0].leaves[0], children[-1].leaves[1]),
        )
        nodes.append(node)
        return node


def _assign_coefficients(tree: AveragingTree) -> None:
    tree.root.a = Fraction(1)
    for j in range(tree.height, 0, -1):
        for node in tree.levels[j]:
            for child in tree.children_of(node):
                child.a = node.a / node.N


def build_averaging_tree(
    supply,
    M: int,
    eps,
    power_of_two: bool = False,
    error_space: Optional[SpaceSpec] = None,
    max_leaves: int = DEFAULT_MAX_LEAVES,
    prec: int = DEFAULT_PRECISION,
) -> AveragingTree:
    """Build an averaging tree whose root is an (M, eps)-average of supplied blocks.

    Weights are the least admissible integers (powers of two when asked).
    With error_space the errors are tightened by theta_M of that space:
    eps_1^j = theta_M eps / 2 and eps_{i+1}^j = theta_M eps / (2^i maxsupp x_i^j).

    Raises:
        SupplyExhausted: the tree would exceed max_leaves or the supply ran out
    """
    eps = Fraction(eps)
    if not 0 < eps < 1:
        raise InputError("eps must lie in (0, 1)", field="eps")
    if M < 0:
        raise InputError("M must be nonnegative", field="M")
    factor = None
    if error_space is not None and M >= 1:
        theta = error_space.theta(M, prec)
        if theta is None:
            raise PreconditionFailed(f"theta_{M} is not defined by {error_space.label()}")
        factor = theta.lo
    builder = _TreeBuilder(supply, M, eps, power_of_two, factor, max_leaves)
    builder.build(M)
    tree = AveragingTree(builder.levels, eps, power_of_two, factor)
    _assign_coefficients(tree)
    logger.debug(
        "built averaging tree",
        extra={"instances": len(tree.levels[0]), "support": tree.root.vector.maxsupp},
    )
    return tree


def check_averaging_tree(tree: AveragingTree) -> List[str]:
    """Violations of the averaging-tree conditions and coefficient identities."""
    violations = []
    H = tree.height
    if len(tree.levels[-1]) != 1:
        violations.append(f"level {H} must hold exactly one root")
    for j, level in enumerate(tree.levels):
        if not is_block_sequence([n.vector for n in level]):
            violations.append(f"level {j} is not a block sequence")
        if j + 1 < len(tree.levels) and len(level) < len(tree.levels[j + 1]):
            violations.append(f"level {j} has fewer nodes than level {j + 1}")
    for j in range(1, H + 1):
        expected_child = 1
        for i, node in enumerate(tree.levels[j], start=1):
            label = f"x_{i}^{j}"
            children = tree.children_of(node)
            if not children or node.children[0] != expected_child:
                violations.append(f"{label}: children are not the next interval")
            expected_child = node.children[1] + 1
            is_root_exception = tree.root_exception and j == H
            if not is_root_exception and len(children) != node.N:
                violations.append(f"{label}: {len(children)} children but N = {node.N}")
            if node.N is None or node.eps is None:
                violations.append(f"{label}: missing weight or error")
                continue
            if tree.power_of_two and not _is_power_of_two(node.N):
                violations.append(f"{label}: N = {node.N} is not a power of two")
            expected = linear_combination([Fraction(1, node.N)] * len(children), [c.vector for c in children])
            if expected != node.vector:
                violations.append(f"{label}: vector is not the average of its children")
            if not 0 < node.eps < 1:
                violations.append(f"{label}: error outside (0, 1)")
            elif not 2 / node.eps < node.N:
                violations.append(f"{label}: 2/eps >= N")
            if node.N > node.vector.minsupp:
                violations.append(f"{label}: N > minsupp")
            if i >= 2:
                prev = tree.levels[j][i - 2]
                bound = Fraction(1, 2 ** (i - 1) * prev.vector.maxsupp)
                if not node.eps < bound:
                    violations.append(f"{label}: error not below 1/(2^{i - 1} maxsupp)")
                if not prev.vector.maxsupp < node.N:
                    violations.append(f"{label}: N does not exceed the previous maxsupp")
                if tree.error_factor is not None and node.eps > tree.error_factor * tree.eps * bound:
                    violations.append(f"{label}: error above the tightened bound")
            elif tree.error_factor is not None and node.eps > tree.error_factor * tree.eps / 2:
                violations.append(f"{label}: first error above the tightened bound")
    root_mass = tree.root.a
    if tree.root_exception:
        root_mass = Fraction(tree.root.child_count, tree.root.N) if tree.root.N else root_mass
    for j in range(H):
        total = sum((n.a for n in tree.levels[j]), Fraction(0))
        if total != root_mass:
            violations.append(f"level {j}: coefficients sum to {format_rational(total)}")
    for j in range(1, H + 1):
        for node in tree.levels[j]:
            for child in tree.children_of(node):
                if child.a != node.a / node.N:
                    violations.append(f"x_{child.index}^{child.level}: coefficient is not the ancestor weight product")
            leaf_mass = sum((leaf.a for leaf in tree.leaves_of(node)), Fraction(0))
            expected = node.a if not (tree.root_exception and j == H) else root_mass
            if leaf_mass != expected:
                violations.append(f"x_{node.index}^{j}: coefficient differs from its leaf mass")
    return violations


# Restriction of an averaging tree


def _dyadic(q: Fraction) -> bool:
    return q > 0 and q.numerator == 1 and _is_power_of_two(q.denominator)


def _leaf_ancestors(tree: AveragingTree) -> List[List[int]]:
    """anc[j][m] = index of the level-j node containing leaf m (1-based, slot 0 unused)."""
    count = len(tree.levels[0])
    anc = []
    for level in tree.levels:
        row = [0] * (count + 1)
        for node in level:
            for m in range(node.leaves[0], node.leaves[1] + 1):
                row[m] = node.index
        anc.append(row)
    return anc


def _contains(run: Sequence[int], first: int, last: int) -> bool:
    """True iff the sorted run holds every index first..last."""
    pos = bisect_left(run, first)
    end = pos + (last - first)
    return end < len(run) and run[pos] == first and run[end] == last


def _split_leftmost(run: Sequence[int], masses: Sequence[Fraction], pieces: int, target: Fraction) -> List[Tuple[int, ...]]:
    result = []
    current: List[int] = []
    total = Fraction(0)
    for m in run:
        current.append(m)
        total += masses[m]
        if total == target:
            result.append(tuple(current))
            current, total = [], Fraction(0)
        elif total > target:
            raise PreconditionFailed("coefficient mass cannot be split into equal dyadic pieces")
    if current or len(result) != pieces:
        raise PreconditionFailed(f"expected {pieces} pieces of mass {format_rational(target)}")
    return result


def restrict_average(tree: AveragingTree, I: Sequence[int], level: Optional[int] = None) -> AveragingTree:
    """Represent sum_{i in I} a_i^l x_i^l as the root of a new averaging tree.

    The new tree has height `level`; its root has L = N_{min I} sum a_i
    children of mass 1/N_{min I}, and each lower node y with mass c and
    weight W is split leftmost into W successive pieces of mass c/W.
    Weights below the root are the least weights of the contained source
    nodes; errors are eps_{min I} for first nodes and eps_{i_k + 1} after.

    Raises:
        PreconditionFailed: level or I out of range, or L is not an integer
        NonDyadicCoefficient: a leaf coefficient is not a power of 1/2
    """
    H = tree.height
    if level is None:
        level = H - 1 if H >= 2 else H
    if not 1 <= level <= H:
        raise PreconditionFailed(f"level must lie in 1..{H}, got {level}")
    I = as_finite_set(I, field="I")
    count = len(tree.levels[level])
    if not I or I[-1] > count:
        raise PreconditionFailed(f"I must be a nonempty subset of 1..{count}")
    selected = [tree.node(level, i) for i in I]
    mass = sum((n.a for n in selected), Fraction(0))
    W_root = selected[0].N
    L = W_root * mass
    if L.denominator != 1:
        raise PreconditionFailed(
            f"N_min(I) * sum a_i = {format_rational(L)} is not an integer"
        )
    L = int(L)
    leaves = tree.levels[0]
    run = [m for n in selected for m in range(n.leaves[0], n.leaves[1] + 1)]
    masses = [Fraction(0)] + [leaf.a for leaf in leaves]
    for m in run:
        if not _dyadic(masses[m]):
            raise NonDyadicCoefficient(f"leaf coefficient {format_rational(masses[m])} is not a power of 1/2")
    anc = _leaf_ancestors(tree)
    eps_I = selected[0].eps

    new_levels: List[List[AveragingNode]] = [[] for _ in range(level + 1)]
    # (origin run, mass c, weight W, child count)
    current = [(tuple(run), Fraction(1), W_root, L)]
    for l in range(level, -1, -1):
        nodes = []
        for k, (origin, c, W, _) in enumerate(current, start=1):
            vector = linear_combination([masses[m] / c for m in origin], [leaves[m - 1].vector for m in origin])
            nodes.append(AveragingNode(l, k, vector, W if l else None, None, a=c, origin=origin))
        new_levels[l] = nodes
        if l == 0:
            break
        below = []
        first_child = 1
        for node, (origin, c, W, pieces) in zip(nodes, current):
            node.children = (first_child, first_child + pieces - 1)
            first_child += pieces
            target = c / W
            for piece in _split_leftmost(origin, masses, pieces, target):
                weight = _least_contained_weight(tree, anc, l - 1, piece)
                below.append((piece, target, weight, weight))
        current = below

    for l in range(1, level + 1):
        for k, node in enumerate(new_levels[l], start=1):
            if k == 1:
                node.eps = eps_I
                continue
            prev = new_levels[l][k - 2]
            i_k = max(anc[l][m] for m in prev.origin)
            if i_k + 1 > len(tree.levels[l]):
                raise PreconditionFailed(f"no source node follows x_{i_k}^{l}")
            node.eps = tree.node(l, i_k + 1).eps

    restricted = AveragingTree(
        new_levels,
        eps_I,
        power_of_two=tree.power_of_two,
        error_factor=None,
        root_exception=True,
        source_level=level,
        selection=I,
    )
    _assign_leaf_ranges(restricted)
    logger.debug(
        "restricted averaging tree",
        extra={"instances": len(new_levels[0]), "support": len(run)},
    )
    return restricted


def _least_contained_weight(tree: AveragingTree, anc: List[List[int]], level: int, piece: Tuple[int, ...]) -> Optional[int]:
    if level == 0:
        return None
    weights = []
    for index in sorted({anc[level][m] for m in piece}):
        node = tree.node(level, index)
        if _contains(piece, node.leaves[0], node.leaves[1]):
            weights.append(node.N)
    if not weights:
        raise PreconditionFailed(f"a piece at level {level} contains no whole source node")
    return min(weights)


@dataclass
class RestrictionReport:
    """Outcome of checking a restricted averaging tree against its source."""

    violations: List[str] = field(default_factory=list)
    bundle_norms: List[Enclosure] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def check_restriction(
    source: AveragingTree,
    restricted: AveragingTree,
    spec: Optional[SpaceSpec] = None,
    cap: Optional[int] = None,
    prec: int = DEFAULT_PRECISION,
) -> RestrictionReport:
    """Mass bookkeeping, comparability, weight formula and bundle norms of a restriction."""
    report = RestrictionReport()
    report.violations.extend(check_averaging_tree(restricted))
    leaves = source.levels[0]
    masses = [Fraction(0)] + [leaf.a for leaf in leaves]
    anc = _leaf_ancestors(source)
    level = restricted.height
    for l, nodes in enumerate(restricted.levels):
        for node in nodes:
            label = f"y_{node.index}^{l}"
            origin = node.origin or ()
            mass = sum((masses[m] for m in origin), Fraction(0))
            if l < level and mass != node.a:
                report.violations.append(f"{label}: mass {format_rational(mass)} != c = {format_rational(node.a)}")
            combined = linear_combination([masses[m] for m in origin], [leaves[m - 1].vector for m in origin])
            if node.vector.scale(node.a) != combined:
                report.violations.append(f"{label}: c y differs from the sum of its leaves")
            for j in range(len(source.levels)):
                for index in sorted({anc[j][m] for m in origin}):
                    x = source.node(j, index)
                    inside = _contains(origin, x.leaves[0], x.leaves[1])
                    covers = x.leaves[0] <= origin[0] and origin[-1] <= x.leaves[1]
                    if j == l and not inside:
                        report.violations.append(f"{label}: x_{index}^{j} straddles it")
                    elif not (inside or covers):
                        report.violations.append(f"{label}: x_{index}^{j} is neither above nor below it")
            if l >= 1:
                contained = [
                    source.node(l, index).N
                    for index in sorted({anc[l][m] for m in origin})
                    if _contains(origin, *source.node(l, index).leaves)
                ]
                if not contained or node.N != min(contained):
                    report.violations.append(f"{label}: W is not the least contained weight")
    engine = None if spec is None else get_engine(spec, cap, prec)
    for bundle in restricted.levels[0]:
        origin = bundle.origin or ()
        certificate = sum((masses[m] * leaves[m - 1].vector.l1() for m in origin), Fraction(0)) / bundle.a
        if engine is not None and len(bundle.vector.support) <= engine.cap:
            value = engine.norm(bundle.vector)
        else:
            value = Enclosure.exact(certificate)
        report.bundle_norms.append(value)
        if not value.certainly_le(1):
            report.violations.append(f"y_{bundle.index}^0: norm may exceed 1")
    return report


def antichain_functional(tree: AveragingTree, nodes: Iterable[Tuple[int, int]], theta) -> NormingTree:
    """Sum over (level, index) in nodes of theta^(M - level) e*_{minsupp y} as a T[S_1, theta] functional."""
    chosen = set(nodes)
    M = tree.height
    for level, index in chosen:
        for other_level, other_index in chosen:
            if (level, index) == (other_level, other_index):
                continue
            a, b = tree.node(level, index), tree.node(other_level, other_index)
            if a.leaves[0] <= b.leaves[0] and b.leaves[1] <= a.leaves[1]:
                raise InputError(f"nodes ({level},{index}) and ({other_level},{other_index}) are comparable", field="nodes")

    def grow(node: AveragingNode) -> Optional[TreeNode]:
        if (node.level, node.index) in chosen:
            return Leaf(node.vector.minsupp)
        parts = [g for g in (grow(c) for c in tree.children_of(node)) if g is not None]
        if not parts:
            return None
        return Node(1, tuple(parts))

    root = grow(tree.root)
    return NormingTree(root, tsirelson(Fraction(theta)))


# Special, Tsirelson and RIS averages


@dataclass
class SpecialLevel:
    j: int
    sup: Enclosure
    lower: Enclosure
    upper: Enclosure
    within: bool
    needed_D: Enclosure


@dataclass
class SpecialAverageReport:
    levels: List[SpecialLevel]
    D: Fraction
    empirical_D: Enclosure

    @property
    def ok(self) -> bool:
        return all(level.within for level in self.levels)

    def __bool__(self) -> bool:
        return self.ok


def allowable_split_sup(
    x: BlockVector,
    spec: SpaceSpec,
    j: int,
    cap: int = DEFAULT_FAMILY_SUPPORT_CAP,
    norm_cap: Optional[int] = None,
    prec: int = DEFAULT_PRECISION,
) -> Enclosure:
    """sup of sum_i ||E_i x|| over S_j-allowable families (E_i) inside supp x."""
    support = x.support
    if len(support) > cap:
        raise CapExceeded(len(support), cap)
    engine = get_engine(spec, norm_cap, prec)
    if j == 0:
        return engine.norm(x)
    fam = FamilySpec.S(j)
    best = Enclosure.exact(0)
    for start in range(len(support)):
        for blocks in set_partitions(support[start:]):
            if not member(tuple(sorted(b[0] for b in blocks)), fam):
                continue
            value = enclosure_sum(engine.norm(x.restrict(b)) for b in blocks)
            best = best.max(value)
    return best


def check_special_average(
    cert: AverageCert,
    spec: SpaceSpec,
    D,
    cap: int = DEFAULT_FAMILY_SUPPORT_CAP,
    prec: int = DEFAULT_PRECISION,
    norm_cap: Optional[int] = None,
) -> SpecialAverageReport:
    """Compare allowable-split sups with theta^(M-j) D and theta^(M-j) / D for each j."""
    D = Fraction(D)
    x = cert.vector()
    theta = spec.theta_sup(prec)
    levels = []
    empirical = Enclosure.exact(1)
    for j in range(cert.M + 1):
        sup = allowable_split_sup(x, spec, j, cap, norm_cap, prec)
        scale = theta ** (cert.M - j)
        lower, upper = scale / D, scale * D
        within = lower.certainly_le(sup) and sup.certainly_le(upper)
        needed = (sup / scale).max(scale / sup) if sup.lo > 0 else Enclosure.exact(0)
        empirical = empirical.max(needed)
        levels.append(SpecialLevel(j, sup, lower, upper, within, needed))
    logger.info(
        "special average check",
        extra={"lemma": "special-average", "instances": len(levels), "support": len(x.support)},
    )
    return SpecialAverageReport(levels, D, empirical)


@dataclass
class TsirelsonAverageResult:
    ok: bool
    worst_ratio: Optional[Enclosure]
    witness: Optional[dict] = None

    def __bool__(self) -> bool:
        return self.ok


def check_tsirelson_average(
    blocks: Sequence[BlockVector],
    spec: SpaceSpec,
    M: int,
    G_samples: Sequence[Sequence[int]],
    coeff_samples: Optional[Sequence[Sequence]] = None,
    prec: int = DEFAULT_PRECISION,
    cap: Optional[int] = None,
) -> TsirelsonAverageResult:
    """Check ||sum a_i x_i|| >= 1/4 ||sum a_i ||x_i|| e_{minsupp x_i}|| in T[S_1, theta].

    G_samples index blocks from 1 and must lie in S_M; coeff_samples pairs
    one coefficient list with each G (all ones when omitted).
    """
    if not is_block_sequence(blocks):
        raise MalformedDecomposition("blocks must be successive")
    if coeff_samples is not None and len(coeff_samples) != len(G_samples):
        raise InputError("one coefficient sample per G is required", field="coeff_samples")
    engine = get_engine(spec, cap, prec)
    companion = get_engine(spec.tsirelson_companion(prec), cap, prec)
    block_norms = [engine.norm(b) for b in blocks]
    worst: Optional[Enclosure] = None
    witness = None
    ok = True
    for k, G in enumerate(G_samples):
        G = as_finite_set(G, field="G")
        if not G or G[-1] > len(blocks):
            raise InputError(f"G {list(G)} indexes beyond the blocks", field="G")
        if not member(G, FamilySpec.S(M)):
            raise PreconditionFailed(f"G {list(G)} is not in S_{M}")
        coeffs = [Fraction(1)] * len(G) if coeff_samples is None else [parse_rational(c) for c in coeff_samples[k]]
        if len(coeffs) != len(G):
            raise InputError("coefficient sample length differs from #G", field="coeff_samples")
        left = engine.norm(linear_combination(coeffs, [blocks[i - 1] for i in G]))
        # upper block norms; the companion norm is monotone
        terms = {blocks[i - 1].minsupp: abs(a) * block_norms[i - 1].hi for a, i in zip(coeffs, G)}
        right = companion.norm(BlockVector.from_mapping(terms))
        if right.hi == 0:
            continue
        ratio = left / right
        if worst is None or ratio.lo < worst.lo:
            worst = ratio
            witness = {"G": list(G), "coefficients": [format_rational(a) for a in coeffs]}
        if not (right / 4).certainly_le(left):
            ok = False
    return TsirelsonAverageResult(ok, worst, witness)


def _vector_of(item) -> BlockVector:
    return item.vector() if isinstance(item, AverageCert) else item


def ris_tail_mass(seq: Sequence, n_k: Sequence[int], spec: SpaceSpec, prec: int = DEFAULT_PRECISION) -> List[Tuple[int, Enclosure]]:
    """(k, theta_{l_{k+1}} ||x_k||_l1) for k = 1..len-1 with l_k = floor(n_k / 4), theta_0 = 1."""
    if len(n_k) != len(seq):
        raise InputError("one n_k per average is required", field="n_k")
    result = []
    for k in range(1, len(seq)):
        l_next = n_k[k] // 4
        theta = Enclosure.exact(1) if l_next == 0 else spec.theta(l_next, prec)
        if theta is None:
            raise PreconditionFailed(f"theta_{l_next} is not defined by {spec.label()}")
        result.append((k, theta * _vector_of(seq[k - 1]).l1()))
    return result


def check_ris(seq: Sequence, n_k: Sequence[int], eps, spec: SpaceSpec, prec: int = DEFAULT_PRECISION) -> bool:
    """True iff theta_{l_{k+1}} ||x_k||_l1 <= eps / 2^(k+1) for every k."""
    eps = Fraction(eps)
    vectors = [_vector_of(item) for item in seq]
    if not is_block_sequence(vectors):
        raise MalformedDecomposition("RIS members must be successive")
    for k, tail in ris_tail_mass(seq, n_k, spec, prec):
        if not tail.certainly_le(eps / 2 ** (k + 1)):
            return False
    return True
