"""
Suites module for tsirelson-norms.
Seeded verification suites behind `verify <suite>`. Every suite draws its
instances from one random.Random seeded by (suite, seed) and returns a
VerifyReport whose slack is certainly >= 0 exactly when it passes.
"""

import math
import random
import time
from fractions import Fraction
from typing import Callable, Dict, List, Optional

from src.averages import (
    AverageCert,
    BasisSupply,
    build_averaging_tree,
    check_restriction,
    maximal_schreier_set,
    restrict_average,
    special_convex_combination,
    uniform_average,
)
from src.config import Config, get_default_config
from src.enclosure import Enclosure, format_rational, rational_power
from src.errors import InputError, TsirelsonError
from src.estimates import (
    prune_tree,
    regroup_node,
    regroup_slack,
    verify_ave1,
    verify_height_fact,
    verify_theta1,
    verify_x2,
)
from src.logging import get_logger
from src.norm import get_engine, oracle_norm
from src.reports import SlackTracker, VerifyReport, report_merge
from src.schreier import max_schreier_sum, max_schreier_sum_bruteforce
from src.spaces import SpaceSpec, mixed_schreier, power_law_space, schlumprecht, tsirelson_table, tzafriri
from src.spreading import SpaceClass, classify, delta_estimate, p_space_params
from src.trees import Node, evaluate, sample_tree, validate_tree
from src.vectors import BlockVector

logger = get_logger(__name__)

EXACT_TOLERANCE = Fraction(1, 10 ** 9)


class SuiteContext:
    """Seed, sample count and configuration shared by one suite run."""

    def __init__(self, name: str, config: Config, seed: int, samples: int):
        self.name = name
        self.config = config
        self.seed = seed
        self.samples = samples
        self.rng = random.Random(f"{name}:{seed}")
        self.tracker = SlackTracker(name)
        self.params: Dict[str, object] = {"samples": samples}

    @property
    def precision(self) -> int:
        return self.config.engine.precision

    def cap(self, spec: SpaceSpec) -> int:
        return self.config.cap_for(spec.modified)

    def engine(self, spec: SpaceSpec):
        return get_engine(spec, self.cap(spec), self.precision, self.config.engine.max_precision)

    def report(self) -> VerifyReport:
        return self.tracker.report(self.params, self.seed)


def random_vector(rng: random.Random, max_support: int, max_index: int = 12, positive: bool = False) -> BlockVector:
    size = rng.randint(1, max_support)
    indices = rng.sample(range(1, max_index + 1), size)
    coeffs = {}
    for i in indices:
        c = Fraction(rng.randint(1, 8), 4)
        coeffs[i] = c if positive or rng.random() < 0.5 else -c
    return BlockVector.from_mapping(coeffs)


def _agreement(a: Enclosure, b: Enclosure) -> Enclosure:
    """0 when two values agree (exactly, or by overlapping enclosures), else minus their gap."""
    if a.is_exact and b.is_exact:
        return Enclosure.exact(-abs(a.lo - b.lo))
    if a.overlaps(b):
        return Enclosure.exact(0)
    return Enclosure.exact(-max(a.lo - b.hi, b.lo - a.hi))


def _pass_flag(ok: bool) -> Enclosure:
    return Enclosure.exact(0 if ok else -1)


ORACLE_SPECS = {
    "tsirelson-table": lambda: tsirelson_table(8),
    "mixed-schreier": lambda: mixed_schreier(False),
    "modified-mixed-schreier": lambda: mixed_schreier(True),
    "power-law": lambda: power_law_space(1, 2),
}


ORACLE_MIN_VECTORS = 200
ORACLE_SUPPORT = 7
ORACLE_SUPPORT_MODIFIED = 6


def oracle_vector_count(ctx: SuiteContext) -> int:
    """Vectors drawn per space; at least ORACLE_MIN_VECTORS in total unless params fix 'vectors'."""
    total = int(ctx.params.get("vectors", max(ctx.samples, ORACLE_MIN_VECTORS)))
    return max(1, math.ceil(total / len(ORACLE_SPECS)))


def _oracle_vectors(ctx: SuiteContext, spec: SpaceSpec) -> List[BlockVector]:
    limit = ORACLE_SUPPORT_MODIFIED if spec.modified else ORACLE_SUPPORT
    return [random_vector(ctx.rng, limit) for _ in range(oracle_vector_count(ctx))]


def _oracle_params(ctx: SuiteContext) -> None:
    ctx.params.update(
        {
            "max_support": ORACLE_SUPPORT,
            "max_support_modified": ORACLE_SUPPORT_MODIFIED,
            "spaces": sorted(ORACLE_SPECS),
            "vectors": oracle_vector_count(ctx) * len(ORACLE_SPECS),
        }
    )


def suite_oracle(ctx: SuiteContext) -> None:
    _oracle_params(ctx)
    for label, make in sorted(ORACLE_SPECS.items()):
        spec = make()
        engine = ctx.engine(spec)
        for x in _oracle_vectors(ctx, spec):
            value = engine.norm(x)
            expected = oracle_norm(x, spec, precision=ctx.precision)
            ctx.tracker.add(_agreement(value, expected), {"space": label, "x": x.to_json()})


def suite_duality(ctx: SuiteContext) -> None:
    _oracle_params(ctx)
    for label, make in sorted(ORACLE_SPECS.items()):
        spec = make()
        engine = ctx.engine(spec)
        for x in _oracle_vectors(ctx, spec):
            f = engine.norming_functional(x)
            ctx.tracker.add(_agreement(evaluate(f, x), engine.norm(x)), {"space": label, "x": x.to_json()})


SCC_CASES = [(1, start, False) for start in range(2, 13)] + [(2, 2, False), (2, 2, True)]


def suite_scc(ctx: SuiteContext) -> None:
    spec = mixed_schreier(False)
    engine = ctx.engine(spec)
    ctx.params.update({"space": spec.label(), "cases": [list(case) for case in SCC_CASES]})
    for n, start, repeated in SCC_CASES:
        theta = spec.theta(n)
        value = engine.norm(special_convex_combination(n, start, repeated))
        slack = (value - theta).min(2 * theta - value)
        ctx.tracker.add(slack, {"n": n, "start": start, "repeated": repeated, "norm": value.to_json()})


def suite_lp_identity(ctx: SuiteContext) -> None:
    spec = power_law_space(1, 2)
    engine = ctx.engine(spec)
    ctx.params.update({"space": spec.label(), "tolerance": format_rational(EXACT_TOLERANCE)})
    for m in (1, 2, 4, 8):
        value = engine.norm(BlockVector.ones(range(1, m + 1)))
        target = rational_power(Fraction(m), Fraction(1, 2), ctx.config.engine.precision)
        hull = max(value.hi, target.hi) - min(value.lo, target.lo)
        ctx.tracker.add(Enclosure.exact(EXACT_TOLERANCE - hull), {"m": m, "norm": value.to_json()})


def suite_modified_dominance(ctx: SuiteContext) -> None:
    base, modified = mixed_schreier(False), mixed_schreier(True)
    ctx.params.update({"max_support": ORACLE_SUPPORT})
    for _ in range(ctx.samples):
        x = random_vector(ctx.rng, ORACLE_SUPPORT)
        ctx.tracker.add(ctx.engine(modified).norm(x) - ctx.engine(base).norm(x), {"x": x.to_json()})


X2_SUPPORT = 8


def suite_x2(ctx: SuiteContext) -> None:
    spec = mixed_schreier(True)
    ctx.params.update({"max_support": X2_SUPPORT, "space": spec.label()})
    samples = [random_vector(ctx.rng, X2_SUPPORT) for _ in range(ctx.samples)]
    verify_x2(spec, samples, ctx.cap(spec), ctx.precision, tracker=ctx.tracker)


def _schreier_support(rng: random.Random, M: int, size: int) -> List[int]:
    start = rng.randint(2, 4)
    pool = [i for piece in maximal_schreier_set(M, start) for i in piece] if M else [start]
    chosen = sorted(rng.sample(pool, min(size, len(pool))))
    return chosen


def suite_height_fact(ctx: SuiteContext) -> None:
    M = int(ctx.params.get("M", 2))
    theta = Fraction(1, 2)
    ctx.params.update({"M": M, "theta": format_rational(theta), "max_support": 8})
    for _ in range(ctx.samples):
        support = _schreier_support(ctx.rng, M, ctx.rng.randint(1, 8))
        z = BlockVector.from_mapping({i: Fraction(ctx.rng.randint(1, 4), 4) for i in support})
        verify_height_fact(z, M, theta, ctx.config.cap_for(False), ctx.precision, tracker=ctx.tracker)


# Built trees of height >= 2 carry hundreds of leaves, beyond any norm cap,
# so the averages whose norms are taken come from height-one trees and from
# uniform averages of height two and three.
THETA1_TREE_EPS = (Fraction(3, 4), Fraction(1, 2), Fraction(1, 3))


def _theta1_averages() -> List[AverageCert]:
    certs = [build_averaging_tree(BasisSupply(1), 1, eps).certificate() for eps in THETA1_TREE_EPS]
    certs.append(uniform_average(range(2, 8), 2))
    certs.append(uniform_average(range(2, 9), 3))
    return certs


def _prune_averages() -> List[AverageCert]:
    tree = build_averaging_tree(BasisSupply(1), 2, Fraction(99, 100))
    return _theta1_averages() + [tree.certificate()]


def suite_theta1(ctx: SuiteContext) -> None:
    spec = mixed_schreier(True)
    verify = ctx.config.verify
    ctx.params.update(
        {
            "space": spec.label(),
            "family_cap": verify.family_cap,
            "tree_eps": [format_rational(eps) for eps in THETA1_TREE_EPS],
        }
    )
    for cert in _theta1_averages():
        for j in range(cert.M):
            verify_theta1(
                cert,
                j,
                spec,
                family_cap=verify.family_cap,
                fallback_samples=verify.fallback_samples,
                seed=ctx.rng.randrange(2 ** 32),
                prec=ctx.precision,
                cap=ctx.cap(spec),
                tracker=ctx.tracker,
            )


_RESTRICT_TREES: Dict[tuple, object] = {}


def _restrict_tree(M: int, eps: Fraction, max_leaves: int):
    key = (M, eps, max_leaves)
    if key not in _RESTRICT_TREES:
        _RESTRICT_TREES[key] = build_averaging_tree(BasisSupply(1), M, eps, power_of_two=True, max_leaves=max_leaves)
    return _RESTRICT_TREES[key]


def suite_restrict(ctx: SuiteContext) -> None:
    spec = mixed_schreier(False)
    max_leaves = ctx.config.averages.max_leaves
    trees = [_restrict_tree(1, Fraction(1, 2), max_leaves), _restrict_tree(2, Fraction(3, 4), max_leaves)]
    ctx.params.update({"trees": ["M=1,eps=1/2", "M=2,eps=3/4"], "power_of_two": True, "space": spec.label()})
    for _ in range(ctx.samples):
        tree = ctx.rng.choice(trees)
        level = ctx.rng.randint(1, tree.height)
        count = len(tree.levels[level])
        I = sorted(ctx.rng.sample(range(1, count + 1), ctx.rng.randint(1, count)))
        try:
            restricted = restrict_average(tree, I, level)
        except TsirelsonError as exc:
            ctx.tracker.add(Enclosure.exact(-1), {"M": tree.height, "I": I, "level": level, "error": str(exc)})
            continue
        result = check_restriction(tree, restricted, spec, ctx.cap(spec), ctx.precision)
        ctx.tracker.add(_pass_flag(result.ok), {"M": tree.height, "I": I, "level": level, "violations": result.violations[:5]})


def suite_mss(ctx: SuiteContext) -> None:
    ctx.params.update({"max_support": 10, "exhaustive_support": 6, "M": [0, 1, 2, 3]})
    for _ in range(ctx.samples):
        size = ctx.rng.randint(1, 10)
        keys = ctx.rng.sample(range(1, 15), size)
        weights = {k: Fraction(ctx.rng.randint(0, 8), 8) for k in keys}
        M = ctx.rng.randint(0, 3)
        ctx.tracker.add(
            _agreement(max_schreier_sum(weights, M), max_schreier_sum_bruteforce(weights, M)),
            {"weights": {str(k): format_rational(w) for k, w in weights.items()}, "M": M},
        )
    for mask in range(1, 2 ** 6):
        keys = [i for i in range(1, 7) if mask >> (i - 1) & 1]
        weights = {k: Fraction(ctx.rng.randint(1, 8), 8) for k in keys}
        for M in range(4):
            ctx.tracker.add(_agreement(max_schreier_sum(weights, M), max_schreier_sum_bruteforce(weights, M)), {"keys": keys, "M": M})


def suite_delta(ctx: SuiteContext) -> None:
    spec = mixed_schreier(False)
    mesh = ctx.config.spreading.grid_mesh
    tolerance = Fraction(1, 2 ** mesh)
    ctx.params.update({"space": spec.label(), "tailN": 4, "capF": 4, "grid_mesh": mesh})
    basis = [BlockVector.basis(i) for i in range(1, 9)]
    for n in (1, 2):
        theta = spec.theta(n)
        estimate = delta_estimate(
            basis, n, 4, 4, spec, mesh, ctx.config.spreading.coarse_mesh, prec=ctx.precision, cap=ctx.cap(spec)
        )
        slack = (estimate.value - theta).min(2 * theta + tolerance - estimate.value)
        if estimate.lower is not None:
            slack = slack.min(estimate.lower - theta)
        ctx.tracker.add(slack, {"n": n, "estimate": estimate.to_json()})


def suite_classify(ctx: SuiteContext) -> None:
    spreading = ctx.config.spreading
    ctx.params.update({"horizon": spreading.horizon})
    expected = {"tzafriri": (tzafriri(), SpaceClass.CLASS1), "schlumprecht": (schlumprecht(), SpaceClass.CLASS2)}
    for label, (spec, want) in sorted(expected.items()):
        params = p_space_params(spec, spreading.horizon, ctx.config.engine.precision)
        got = classify(
            params,
            spreading.trend_low,
            spreading.trend_high,
            spreading.inf_threshold,
            spreading.oscillation_factor,
        )
        ctx.tracker.add(_pass_flag(got == want), {"space": label, "class": got.value})


def suite_prune(ctx: SuiteContext) -> None:
    spec = mixed_schreier(True)
    certs = _prune_averages()
    ctx.params.update({"space": spec.label()})
    for _ in range(ctx.samples):
        cert = ctx.rng.choice(certs)
        f = sample_tree(cert.vector().support, spec, ctx.rng)
        _, loss = prune_tree(f, cert)
        ctx.tracker.add(2 * cert.eps - loss, {"M": cert.M, "loss": loss.to_json()})


def suite_regroup(ctx: SuiteContext) -> None:
    spec = mixed_schreier(True)
    engine = ctx.engine(spec)
    ctx.params.update({"space": spec.label(), "max_support": 6})
    for _ in range(ctx.samples):
        x = random_vector(ctx.rng, 6, positive=True)
        f = engine.norming_functional(x)
        for path, node, _ in list(f.walk()):
            if not isinstance(node, Node):
                continue
            order = f.order(path)
            for k in range(order, order + node.weight_index + 1):
                regrouped = regroup_node(f, path, k)
                violations = validate_tree(regrouped)
                slack = regroup_slack(f, path, k, x)
                if violations:
                    slack = slack.min(Enclosure.exact(-1))
                ctx.tracker.add(slack, {"x": x.to_json(), "path": list(path), "k": k})


def suite_ave1(ctx: SuiteContext) -> None:
    spec = mixed_schreier(False)
    ctx.params.update({"space": spec.label(), "ris_eps": "1/2"})
    for _ in range(max(1, ctx.samples // 5)):
        first = ctx.rng.randint(2, 3)
        part1 = uniform_average(range(first, 2 * first), 1)
        start2 = 2 * first
        size2 = ctx.rng.randint(1, min(start2, 4))
        part2 = uniform_average(range(start2, start2 + size2), 1)
        parts = [part1, part2]
        x = AverageCert(tuple(p.vector() for p in parts), (Fraction(1, 2), Fraction(1, 2)), 1, Fraction(3, 4))
        verify_ave1(
            x, spec, parts, [1, 12], Fraction(1, 2), prec=ctx.precision, norm_cap=ctx.cap(spec), tracker=ctx.tracker
        )


SUITES: Dict[str, Callable[[SuiteContext], None]] = {
    "oracle": suite_oracle,
    "duality": suite_duality,
    "scc": suite_scc,
    "lp-identity": suite_lp_identity,
    "modified-dominance": suite_modified_dominance,
    "x2": suite_x2,
    "height-fact": suite_height_fact,
    "theta1": suite_theta1,
    "restrict": suite_restrict,
    "mss": suite_mss,
    "delta": suite_delta,
    "classify": suite_classify,
    "prune": suite_prune,
    "regroup": suite_regroup,
    "ave1": suite_ave1,
}


def run_suite(
    name: str,
    config: Optional[Config] = None,
    seed: Optional[int] = None,
    samples: Optional[int] = None,
    params: Optional[Dict[str, object]] = None,
) -> VerifyReport:
    """Run one named suite.

    Args:
        name: Suite name from SUITES
        config: Configuration (defaults when omitted)
        seed: Seed override
        samples: Sample count override
        params: Extra suite parameters (for example M for height-fact)

    Returns:
        VerifyReport of the suite
    """
    if name not in SUITES:
        raise InputError(f"unknown suite {name!r}; choose from {', '.join(sorted(SUITES))}", field="suite")
    config = config or get_default_config()
    seed = config.verify.seed if seed is None else seed
    samples = config.verify.samples if samples is None else samples
    ctx = SuiteContext(name, config, seed, samples)
    ctx.params.update(params or {})
    started = time.monotonic()
    SUITES[name](ctx)
    report = ctx.report()
    logger.info(
        f"suite {name} {'passed' if report.passed else 'failed'}",
        extra={
            "suite": name,
            "instances": report.instances,
            "seed": seed,
            "duration_ms": round((time.monotonic() - started) * 1000),
        },
    )
    return report


def run_all(config: Optional[Config] = None, seed: Optional[int] = None, samples: Optional[int] = None) -> dict:
    """Run every suite and merge the reports."""
    return report_merge([run_suite(name, config, seed, samples) for name in SUITES])
