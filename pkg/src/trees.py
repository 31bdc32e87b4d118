"""
Norming trees for tsirelson-norms.
A NormingTree is the tree-analysis of a norming functional: internal
nodes carry a weight index n (weight theta_n), leaves carry signed
coordinate functionals.
"""

import random
from dataclasses import dataclass, replace
from itertools import combinations
from typing import Iterator, List, Optional, Sequence, Tuple, Union

from src.enclosure import DEFAULT_PRECISION, Enclosure, enclosure_sum
from src.errors import InputError, InvalidTree
from src.schreier import member, set_partitions
from src.spaces import SpaceSpec
from src.vectors import BlockVector

Path = Tuple[int, ...]


@dataclass(frozen=True)
class Leaf:
    index: int
    sign: int = 1


@dataclass(frozen=True)
class Node:
    weight_index: int
    children: Tuple["TreeNode", ...]


TreeNode = Union[Leaf, Node]


def node_support(node: TreeNode) -> Tuple[int, ...]:
    if isinstance(node, Leaf):
        return (node.index,)
    return tuple(sorted(i for child in node.children for i in node_support(child)))


def node_to_json(node: TreeNode) -> dict:
    if isinstance(node, Leaf):
        return {"leaf": node.index, "sign": node.sign}
    return {"weight_index": node.weight_index, "children": [node_to_json(c) for c in node.children]}


def node_from_json(data) -> TreeNode:
    if not isinstance(data, dict):
        raise InputError(f"bad tree node {data!r}", field="tree")
    if "leaf" in data:
        sign = int(data.get("sign", 1))
        if sign not in (1, -1):
            raise InputError("leaf sign must be 1 or -1", field="tree")
        return Leaf(int(data["leaf"]), sign)
    if "weight_index" in data:
        return Node(int(data["weight_index"]), tuple(node_from_json(c) for c in data.get("children", [])))
    raise InputError("node needs 'leaf' or 'weight_index'", field="tree")


@dataclass(frozen=True)
class NormingTree:
    """Tree-analysis of a norming functional in the given space."""

    root: Optional[TreeNode]
    spec: SpaceSpec

    def walk(self) -> Iterator[Tuple[Path, TreeNode, Tuple[int, ...]]]:
        """Yield (path, node, weight indices of strict ancestors) depth-first."""
        if self.root is None:
            return
        stack = [((), self.root, ())]
        while stack:
            path, node, ancestors = stack.pop()
            yield path, node, ancestors
            if isinstance(node, Node):
                for i in range(len(node.children) - 1, -1, -1):
                    stack.append((path + (i,), node.children[i], ancestors + (node.weight_index,)))

    def leaves(self) -> Iterator[Tuple[Path, Leaf, Tuple[int, ...]]]:
        for path, node, ancestors in self.walk():
            if isinstance(node, Leaf):
                yield path, node, ancestors

    def node_at(self, path: Path) -> TreeNode:
        node = self.root
        for i in path:
            if not isinstance(node, Node):
                raise InputError(f"path {list(path)} runs through a leaf", field="path")
            node = node.children[i]
        return node

    def order(self, path: Path) -> int:
        """Sum of the weight indices of strict ancestors."""
        total = 0
        node = self.root
        for i in path:
            total += node.weight_index
            node = node.children[i]
        return total

    def tag(self, path: Path, prec: int = DEFAULT_PRECISION) -> Enclosure:
        """Product of the weights of strict ancestors."""
        result = Enclosure.exact(1)
        node = self.root
        for i in path:
            result = result * _theta(self.spec, node.weight_index, prec)
            node = node.children[i]
        return result

    def height(self) -> int:
        return max((len(path) for path, _, _ in self.leaves()), default=0)

    def max_order(self) -> int:
        return max((sum(anc) for _, _, anc in self.leaves()), default=0)

    def support(self) -> Tuple[int, ...]:
        return () if self.root is None else node_support(self.root)

    def replace_at(self, path: Path, new: Optional[TreeNode]) -> "NormingTree":
        return replace(self, root=_replace(self.root, path, new))

    def to_json(self) -> dict:
        return {"space": self.spec.model_dump(mode="json"), "root": None if self.root is None else node_to_json(self.root)}

    @classmethod
    def from_json(cls, data, spec: Optional[SpaceSpec] = None) -> "NormingTree":
        if spec is None:
            spec = SpaceSpec.model_validate(data["space"])
        root = data.get("root")
        return cls(None if root is None else node_from_json(root), spec)


def _replace(node: TreeNode, path: Path, new: Optional[TreeNode]) -> Optional[TreeNode]:
    if not path:
        return new
    children = list(node.children)
    updated = _replace(children[path[0]], path[1:], new)
    if updated is None:
        del children[path[0]]
    else:
        children[path[0]] = updated
    return Node(node.weight_index, tuple(children))


def _theta(spec: SpaceSpec, n: int, prec: int) -> Enclosure:
    value = spec.theta(n, prec)
    if value is None:
        raise InvalidTree(f"theta_{n} is not defined by the space")
    return value


def _node_violations(node: Node, spec: SpaceSpec, label: str) -> List[str]:
    violations = []
    if node.weight_index < 1:
        return [f"{label}: weight index {node.weight_index} is not positive"]
    max_index = spec.max_index
    if max_index is not None and node.weight_index > max_index:
        violations.append(f"{label}: theta_{node.weight_index} is not defined by the space")
    if not node.children:
        return violations + [f"{label}: internal node without children"]
    supports = [node_support(c) for c in node.children]
    seen = set()
    for s in supports:
        if seen.intersection(s):
            violations.append(f"{label}: children supports are not pairwise disjoint")
            break
        seen.update(s)
    if not spec.modified:
        for left, right in zip(supports, supports[1:]):
            if left[-1] >= right[0]:
                violations.append(f"{label}: children are not successive")
                break
    minima = tuple(sorted(s[0] for s in supports))
    fam = spec.family(node.weight_index)
    if not member(minima, fam):
        violations.append(f"{label}: minima {list(minima)} not in {fam}")
    return violations


def validate_tree(f: NormingTree, spec: Optional[SpaceSpec] = None) -> List[str]:
    """Violations of the norming-set closure rules; empty iff valid."""
    spec = spec or f.spec
    violations = []
    for path, node, _ in f.walk():
        label = "root" if not path else "node " + ".".join(str(i) for i in path)
        if isinstance(node, Leaf):
            if node.index < 1:
                violations.append(f"{label}: leaf index {node.index} is not positive")
            continue
        violations.extend(_node_violations(node, spec, label))
    return violations


def evaluate(f: NormingTree, x: BlockVector, prec: int = DEFAULT_PRECISION) -> Enclosure:
    """f(x) = sum over leaves of tag * sign * x(index)."""
    violations = validate_tree(f)
    if violations:
        raise InvalidTree(violations)
    coeffs = x.as_dict()
    terms = []
    for path, leaf, _ in f.leaves():
        c = coeffs.get(leaf.index)
        if c:
            terms.append(f.tag(path, prec) * (leaf.sign * c))
    return enclosure_sum(terms)


def leaf_tree(index: int, spec: SpaceSpec, sign: int = 1) -> NormingTree:
    return NormingTree(Leaf(index, sign), spec)


def valid_indices(minima: Sequence[int], spec: SpaceSpec, limit: int) -> List[int]:
    """Weight indices n <= limit for which the minima are admissible."""
    bound = limit if spec.max_index is None else min(limit, spec.max_index)
    return [n for n in range(1, bound + 1) if member(tuple(minima), spec.family(n))]


def sample_tree(
    support: Sequence[int],
    spec: SpaceSpec,
    rng: random.Random,
    depth: int = 3,
    leaf_probability: float = 0.3,
) -> NormingTree:
    """Random valid norming tree whose leaves lie in the support."""
    support = tuple(sorted(support))

    def grow(points: Tuple[int, ...], depth_left: int) -> TreeNode:
        sign = rng.choice((1, -1))
        if depth_left == 0 or len(points) == 1 or rng.random() < leaf_probability:
            return Leaf(rng.choice(points), sign)
        for _ in range(8):
            chosen = tuple(sorted(rng.sample(points, rng.randint(2, len(points)))))
            blocks = _random_blocks(chosen, spec.modified, rng)
            minima = tuple(sorted(b[0] for b in blocks))
            indices = valid_indices(minima, spec, len(points) + 2)
            if indices:
                n = indices[0] if rng.random() < 0.7 else rng.choice(indices)
                return Node(n, tuple(grow(b, depth_left - 1) for b in blocks))
        return Leaf(rng.choice(points), sign)

    return NormingTree(grow(support, depth), spec)


def _random_blocks(points: Tuple[int, ...], modified: bool, rng: random.Random) -> Tuple[Tuple[int, ...], ...]:
    if not modified:
        cuts = sorted(rng.sample(range(1, len(points)), rng.randint(1, len(points) - 1)))
        bounds = [0] + cuts + [len(points)]
        return tuple(points[a:b] for a, b in zip(bounds, bounds[1:]))
    labels = [rng.randint(0, len(points) - 1) for _ in points]
    groups = {}
    for p, label in zip(points, labels):
        groups.setdefault(label, []).append(p)
    blocks = sorted(tuple(g) for g in groups.values())
    if len(blocks) < 2:
        return ((points[0],), points[1:])
    return tuple(blocks)


def enumerate_groupings(points: Sequence[int], modified: bool) -> Iterator[Tuple[Tuple[int, ...], ...]]:
    """Every sequence of (successive or disjoint) nonempty blocks inside points."""
    points = tuple(points)
    if not modified:
        def build(i: int, blocks: List[List[int]], open_block: bool):
            if i == len(points):
                if blocks:
                    yield tuple(tuple(b) for b in blocks)
                return
            yield from build(i + 1, blocks, False)
            if open_block:
                blocks[-1].append(points[i])
                yield from build(i + 1, blocks, True)
                blocks[-1].pop()
            blocks.append([points[i]])
            yield from build(i + 1, blocks, True)
            blocks.pop()

        yield from build(0, [], False)
        return
    for r in range(1, len(points) + 1):
        for subset in combinations(points, r):
            yield from set_partitions(subset)



__all__ = [
    "Leaf",
    "Node",
    "NormingTree",
    "TreeNode",
    "evaluate",
    "validate_tree",
    "leaf_tree",
    "sample_tree",
    "enumerate_groupings",
    "valid_indices",
    "node_support",
]
