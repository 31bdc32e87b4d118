"""
Estimates module for tsirelson-norms.
Executable verifiers for the quantitative upper and lower estimates on
averages, together with the tree transformations their proofs rely on:
pruning low-order terminal nodes and regrouping the successors of a node.
"""

import random
from fractions import Fraction
from itertools import combinations
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

from src.averages import AverageCert, AveragingTree, check_average, check_ris, check_special_average
from src.enclosure import DEFAULT_PRECISION, Enclosure, enclosure_sum, format_rational
from src.errors import InputError, InvalidTree, PreconditionFailed
from src.logging import get_logger
from src.norm import get_engine
from src.reports import SlackTracker, VerifyReport
from src.schreier import FamilySpec, member, set_partitions, split_composed
from src.spaces import SpaceSpec, tsirelson
from src.trees import Leaf, Node, NormingTree, TreeNode, evaluate, node_support, validate_tree
from src.vectors import BlockVector

logger = get_logger(__name__)

Family = Tuple[Tuple[int, ...], ...]


# Tree transformations


def _prune(node: TreeNode, order: int, M: int) -> Optional[TreeNode]:
    if isinstance(node, Leaf):
        return node if order >= M else None
    children = [c for c in (_prune(c, order + node.weight_index, M) for c in node.children) if c is not None]
    if not children:
        return None
    return Node(node.weight_index, tuple(children))


def prune_tree(f: NormingTree, cert: AverageCert, M: Optional[int] = None) -> Tuple[NormingTree, Enclosure]:
    """Drop terminal nodes of order < M and return (f', f(x) - f'(x)).

    For an (M, eps)-average x the loss is at most 2 eps.

    Raises:
        InvalidTree: f violates the norming-set rules
        PreconditionFailed: cert is not an (M, eps)-average
    """
    violations = validate_tree(f)
    if violations:
        raise InvalidTree(violations)
    M = cert.M if M is None else M
    if not check_average(cert):
        raise PreconditionFailed(f"certificate is not an ({cert.M}, {format_rational(cert.eps)})-average")
    pruned = NormingTree(None if f.root is None else _prune(f.root, 0, M), f.spec)
    x = cert.vector()
    loss = evaluate(f, x) - evaluate(pruned, x)
    return pruned, loss


def _theta_or_one(spec: SpaceSpec, n: int, prec: int) -> Enclosure:
    if n == 0:
        return Enclosure.exact(1)
    value = spec.theta(n, prec)
    if value is None:
        raise PreconditionFailed(f"theta_{n} is not defined by {spec.label()}")
    return value


def _regroup_groups(f: NormingTree, path: Tuple[int, ...], k: int) -> Tuple[Node, int, List[List[TreeNode]]]:
    node = f.node_at(path)
    if not isinstance(node, Node):
        raise PreconditionFailed("only internal nodes can be regrouped")
    order = f.order(path)
    r = node.weight_index
    d = k - order
    if not 0 <= d <= r:
        raise PreconditionFailed(f"k must lie in [{order}, {order + r}], got {k}")
    spec = f.spec
    if spec.family_kind != "S" or spec.compose_inner_A2 or spec.exponents is not None:
        raise PreconditionFailed("regrouping needs a space over the families S_n")
    clubsuit = spec.clubsuit_violations(r)
    if clubsuit:
        raise PreconditionFailed(f"{spec.label()} fails the clubsuit condition: {clubsuit[0]}")
    if d == 0:
        return node, d, [list(node.children)]
    if d == r:
        return node, d, [[c] for c in node.children]
    by_min = {node_support(c)[0]: c for c in node.children}
    pieces = split_composed(sorted(by_min), d, r - d)
    if pieces is None:
        raise PreconditionFailed("successor minima do not split into S_k[S_(r-k)] pieces")
    return node, d, [[by_min[m] for m in piece] for piece in pieces]


def regroup_node(f: NormingTree, path: Sequence[int], k: int) -> NormingTree:
    """Insert a layer below the node at path so the tree has a layer at order k.

    The successors (f_s) of a node of weight index r and order o are split
    into groups F_t; each group becomes a node of weight index r - (k - o)
    and the node itself takes weight index k - o.

    Raises:
        PreconditionFailed: k is out of range or the space does not allow it
    """
    path = tuple(path)
    node, d, groups = _regroup_groups(f, path, k)
    if d == 0 or d == node.weight_index:
        return f
    r = node.weight_index
    regrouped = Node(d, tuple(Node(r - d, tuple(g)) for g in groups))
    return f.replace_at(path, regrouped)


def regroup_slack(f: NormingTree, path: Sequence[int], k: int, x: BlockVector, prec: int = DEFAULT_PRECISION) -> Enclosure:
    """theta^k sum_t g_t(x) - t(node) f_node(x), with g_t = theta_(r - (k - o)) sum_{s in F_t} f_s."""
    path = tuple(path)
    node, d, groups = _regroup_groups(f, path, k)
    spec = f.spec
    inner = _theta_or_one(spec, node.weight_index - d, prec)
    theta = spec.theta_sup(prec)
    rhs = theta ** k * enclosure_sum(
        inner * enclosure_sum(evaluate(NormingTree(c, spec), x, prec) for c in group) for group in groups
    )
    lhs = f.tag(path, prec) * evaluate(NormingTree(node, spec), x, prec)
    return rhs - lhs


# Allowable families


def allowable_families(support: Sequence[int], j: int) -> Iterator[Family]:
    """Every S_j-allowable family of nonempty subsets of support."""
    support = tuple(support)
    fam = FamilySpec.S(j)
    for r in range(1, len(support) + 1):
        for subset in combinations(support, r):
            for blocks in set_partitions(subset):
                if member(tuple(sorted(b[0] for b in blocks)), fam):
                    yield blocks


def random_allowable_family(support: Sequence[int], j: int, rng: random.Random, attempts: int = 64) -> Family:
    """A random S_j-allowable family; falls back to one block when draws keep failing."""
    support = tuple(support)
    fam = FamilySpec.S(j)
    for _ in range(attempts):
        chosen = sorted(rng.sample(support, rng.randint(1, len(support))))
        labels = [rng.randint(0, len(chosen) - 1) for _ in chosen]
        groups: Dict[int, List[int]] = {}
        for p, label in zip(chosen, labels):
            groups.setdefault(label, []).append(p)
        blocks = tuple(sorted(tuple(g) for g in groups.values()))
        if member(tuple(b[0] for b in blocks), fam):
            return blocks
    return ((support[-1],),)


def families_within_cap(
    support: Sequence[int],
    j: int,
    family_cap: int,
    rng: random.Random,
    fallback_samples: int,
) -> Tuple[List[Family], bool]:
    """All S_j-allowable families, or a seeded sample once family_cap is passed."""
    families = []
    for fam in allowable_families(support, j):
        families.append(fam)
        if len(families) > family_cap:
            logger.info(
                "family cap reached, sampling",
                extra={"instances": family_cap, "support": len(support)},
            )
            return [random_allowable_family(support, j, rng) for _ in range(fallback_samples)], True
    return families, False


# Verifiers


def _as_certificate(average: Union[AverageCert, AveragingTree]) -> AverageCert:
    return average.certificate() if isinstance(average, AveragingTree) else average


def _ambiguity_count(*engines) -> int:
    return sum(len(engine.ambiguities) for engine in engines)


def _record_ambiguities(tracker: SlackTracker, count: int) -> None:
    # argmax ties left open at max precision; values stay certified
    if count > 0:
        tracker.record("ambiguities", tracker.stats.get("ambiguities", 0) + count)


def verify_theta1(
    average: Union[AverageCert, AveragingTree],
    j: int,
    spec: SpaceSpec,
    family_cap: int = 5000,
    fallback_samples: int = 200,
    seed: int = 0,
    prec: int = DEFAULT_PRECISION,
    cap: Optional[int] = None,
    tracker: Optional[SlackTracker] = None,
) -> VerifyReport:
    """Upper estimate for S_j-allowable splittings of an (M, eps)-average.

    For every S_j-allowable (E_l) checks
    sum_l ||E_l x|| <= theta_1^-1 theta^(M-j-1) sum_l sum_i a_i ||E_l x_i|| + 4 eps / theta_M,
    plus ||x|| <= theta_1^-1 theta^(M-1) + 4 eps / theta_M.
    """
    cert = _as_certificate(average)
    M = cert.M
    if not 0 <= j < M:
        raise PreconditionFailed(f"j must lie in [0, {M}), got {j}")
    if not check_average(cert):
        raise PreconditionFailed("input is not an (M, eps)-average")
    engine = get_engine(spec, cap, prec)
    before = _ambiguity_count(engine)
    theta_1 = _theta_or_one(spec, 1, prec)
    theta_M = _theta_or_one(spec, M, prec)
    theta = spec.theta_sup(prec)
    error = 4 * cert.eps / theta_M
    x = cert.vector()
    tracker = tracker or SlackTracker("theta1")
    rng = random.Random(seed)

    block_norm = [engine.norm(v) for v in cert.vectors]
    bound = (theta ** (M - 1)) / theta_1 * enclosure_sum(a * n for a, n in zip(cert.coefficients, block_norm)) + error
    tracker.add(bound - engine.norm(x), {"family": "full", "j": 0})

    families, sampled = families_within_cap(x.support, j, family_cap, rng, fallback_samples)
    tracker.sampled = tracker.sampled or sampled
    factor = theta ** (M - j - 1) / theta_1
    for family in families:
        lhs = enclosure_sum(engine.norm(x.restrict(E)) for E in family)
        inner = enclosure_sum(
            a * engine.norm(v.restrict(E))
            for E in family
            for a, v in zip(cert.coefficients, cert.vectors)
            if set(E).intersection(v.support)
        )
        tracker.add(factor * inner + error - lhs, {"family": [list(E) for E in family], "j": j})
    _record_ambiguities(tracker, _ambiguity_count(engine) - before)
    logger.info(
        "theta1 verification",
        extra={"lemma": "theta1", "instances": tracker.instances, "support": len(x.support)},
    )
    return tracker.report({"M": M, "j": j, "eps": format_rational(cert.eps), "space": spec.label()}, seed)


def verify_height_fact(
    z: BlockVector,
    M: int,
    theta,
    cap: Optional[int] = None,
    prec: int = DEFAULT_PRECISION,
    tracker: Optional[SlackTracker] = None,
) -> VerifyReport:
    """||z|| <= 2 f(z) for the best f whose tree-analysis has height at most M, in T[S_1, theta].

    Raises:
        PreconditionFailed: supp z is not in S_M
    """
    theta = Fraction(theta)
    if not member(z.support, FamilySpec.S(M)):
        raise PreconditionFailed(f"support {list(z.support)} is not in S_{M}")
    if any(not 0 <= c <= 1 for _, c in z.items):
        raise InputError("coefficients must lie in [0, 1]", field="z")
    engine = get_engine(tsirelson(theta), cap, prec)
    before = _ambiguity_count(engine)
    full = engine.norm(z)
    capped = engine.norm(z, max_order=M)
    tracker = tracker or SlackTracker("height-fact")
    _record_ambiguities(tracker, _ambiguity_count(engine) - before)
    tracker.add(2 * capped - full, {"z": z.to_json(), "full": full.to_json(), "capped": capped.to_json()})
    if capped.lo > 0:
        ratio = full / capped
        previous = tracker.stats.get("max_ratio")
        if previous is None or ratio.hi > Enclosure.from_json(previous).hi:
            tracker.record("max_ratio", ratio)
    return tracker.report({"M": M, "theta": format_rational(theta)})


def verify_x2(
    spec: SpaceSpec,
    samples: Sequence[BlockVector],
    cap: Optional[int] = None,
    prec: int = DEFAULT_PRECISION,
    tracker: Optional[SlackTracker] = None,
) -> VerifyReport:
    """Norm ratios between a modified space and its S_n[A_2] variant lie in [1/3, 3]."""
    if not spec.modified:
        raise PreconditionFailed("the comparison is stated for modified spaces")
    variant = spec.model_copy(update={"compose_inner_A2": True, "name": None})
    base, other = get_engine(spec, cap, prec), get_engine(variant, cap, prec)
    before = _ambiguity_count(base, other)
    tracker = tracker or SlackTracker("x2")
    low: Optional[Enclosure] = None
    high: Optional[Enclosure] = None
    for x in samples:
        if x.is_zero:
            continue
        a, b = base.norm(x), other.norm(x)
        slack = (3 * a - b).min(3 * b - a)
        tracker.add(slack, {"x": x.to_json(), "norm": a.to_json(), "variant": b.to_json()})
        ratio = a / b
        low = ratio if low is None or ratio.lo < low.lo else low
        high = ratio if high is None or ratio.hi > high.hi else high
    if low is not None:
        tracker.record("min_ratio", low)
        tracker.record("max_ratio", high)
    _record_ambiguities(tracker, _ambiguity_count(base, other) - before)
    return tracker.report({"space": spec.label()})


def verify_ave1(
    x: AverageCert,
    spec: SpaceSpec,
    parts: Sequence[AverageCert],
    n_k: Sequence[int],
    ris_eps=None,
    cap: int = 8,
    prec: int = DEFAULT_PRECISION,
    norm_cap: Optional[int] = None,
    tracker: Optional[SlackTracker] = None,
) -> VerifyReport:
    """||x|| <= (D^2 theta^-2 + 5) theta_M for an average of a RIS of special averages.

    parts are the special averages x_k with x_k = parts[k]; D is measured
    on them and reported.

    cap bounds the supports searched for allowable splittings; norm_cap is
    the support cap of the norm engine.
    """
    if len(parts) != len(x.vectors) or any(p.vector() != v for p, v in zip(parts, x.vectors)):
        raise PreconditionFailed("the average must be taken over the given parts")
    ris_eps = x.eps if ris_eps is None else Fraction(ris_eps)
    if not check_ris(parts, n_k, ris_eps, spec, prec):
        raise PreconditionFailed("the parts do not form a RIS")
    D = Enclosure.exact(1)
    for part in parts:
        D = D.max(check_special_average(part, spec, 1, cap=cap, prec=prec, norm_cap=norm_cap).empirical_D)
    theta = spec.theta_sup(prec)
    theta_M = _theta_or_one(spec, max(x.M, 1), prec)
    engine = get_engine(spec, norm_cap, prec)
    before = _ambiguity_count(engine)
    value = engine.norm(x.vector())
    bound = (D * D / (theta * theta) + 5) * theta_M
    tracker = tracker or SlackTracker("ave1")
    tracker.add(bound - value, {"norm": value.to_json(), "D": D.to_json()})
    tracker.record("D", D)
    tracker.record("ratio", value / theta_M)
    tracker.record("average", check_average(x))
    _record_ambiguities(tracker, _ambiguity_count(engine) - before)
    logger.info("ave1 verification", extra={"lemma": "ave1", "instances": len(parts)})
    return tracker.report({"M": x.M, "space": spec.label(), "n_k": list(n_k)})


__all__ = [
    "prune_tree",
    "regroup_node",
    "regroup_slack",
    "allowable_families",
    "families_within_cap",
    "verify_theta1",
    "verify_height_fact",
    "verify_x2",
    "verify_ave1",
]
