"""
Spreading module for tsirelson-norms.
p-space parameters and the Class 1 / Class 2 heuristic, C-l_r-average
checks, the finite-level delta_n spreading-model index, strong domination
and the inequality bounding norms of block combinations by Schreier sums.
"""

import random
import warnings
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from itertools import combinations, product
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.enclosure import (
    DEFAULT_PRECISION,
    Enclosure,
    enclosure_max,
    format_rational,
    ln_enclosure,
    lr_norm,
    parse_rational,
    rational_power,
)
from src.errors import CapExceeded, DivergenceWarning, InputError, MalformedDecomposition, PreconditionFailed
from src.logging import get_logger
from src.norm import get_engine
from src.reports import SlackTracker, VerifyReport
from src.schreier import FamilySpec, max_schreier_sum, member
from src.spaces import LogReciprocal, PowerLaw, SpaceSpec, Table, ThetaGen
from src.trees import Leaf, Node, NormingTree, evaluate
from src.vectors import BlockVector, is_block_sequence, linear_combination

logger = get_logger(__name__)

MAX_EXHAUSTIVE_SIGNS = 10
MAX_SUBSET_SUPPORT = 10
NORMALIZATION_TOLERANCE = Fraction(1, 10 ** 9)


@dataclass
class CheckResult:
    """Boolean outcome with the worst instance seen."""

    ok: bool
    witness: Optional[dict] = None
    worst: Optional[Enclosure] = None
    instances: int = 0

    def __bool__(self) -> bool:
        return self.ok


# p-space parameters and classification


@dataclass
class PSpaceParams:
    """q_n from theta_n = 1/n^(1/q_n), q = sup q_n, 1/p + 1/q = 1, and c_n."""

    horizon: int
    q_n: Dict[int, Optional[Enclosure]]
    c_n: Dict[int, Enclosure]
    q: Optional[Enclosure]
    p: Optional[Enclosure]
    method: str
    is_p_space: bool
    settled: bool = True

    @property
    def p_is_one(self) -> bool:
        return self.q is None

    def to_json(self) -> dict:
        return {
            "horizon": self.horizon,
            "method": self.method,
            "is_p_space": self.is_p_space,
            "settled": self.settled,
            "p": None if self.p is None else self.p.to_json(),
            "q": "inf" if self.q is None else self.q.to_json(),
            "c_n": {str(n): c.to_json() for n, c in self.c_n.items()},
        }


def _generator(thetas: Union[SpaceSpec, ThetaGen]) -> ThetaGen:
    return thetas.thetas if isinstance(thetas, SpaceSpec) else thetas


def p_space_params(thetas: Union[SpaceSpec, ThetaGen], horizon: int = 1024, prec: int = DEFAULT_PRECISION) -> PSpaceParams:
    """p-space parameters of theta_1..theta_horizon.

    Power laws c/n^(1/q) and 1/log2(n+1) use their closed forms; other
    generators take q as the max of q_n over the horizon and warn with
    DivergenceWarning when q_n is still growing at its end.
    """
    gen = _generator(thetas)
    if isinstance(gen, Table):
        horizon = min(horizon, len(gen.values))
    if horizon < 2:
        raise InputError("horizon must be at least 2", field="horizon")
    theta = {n: gen.value(n, prec) for n in range(1, horizon + 1)}
    q_n: Dict[int, Optional[Enclosure]] = {}
    for n in range(2, horizon + 1):
        if theta[n].lo >= 1:
            q_n[n] = None
            continue
        q_n[n] = ln_enclosure(Fraction(n), prec) / ln_enclosure(theta[n].reciprocal(), prec)

    if isinstance(gen, PowerLaw):
        c_n = {n: Enclosure.exact(gen.c) for n in theta}
        if gen.q == 1:
            return PSpaceParams(horizon, q_n, c_n, Enclosure.exact(1), None, "closed-form", False)
        p = Enclosure.exact(gen.q / (gen.q - 1))
        return PSpaceParams(horizon, q_n, c_n, Enclosure.exact(gen.q), p, "closed-form", True)
    if isinstance(gen, LogReciprocal):
        return PSpaceParams(horizon, q_n, dict(theta), None, Enclosure.exact(1), "closed-form", True)

    finite = {n: v for n, v in q_n.items() if v is not None}
    if not finite:
        return PSpaceParams(horizon, q_n, dict(theta), None, None, "numeric", False)
    q = enclosure_max(finite.values())
    ordered = [finite[n] for n in sorted(finite)]
    tail = ordered[-max(1, len(ordered) // 8):]
    settled = not (tail[-1].lo >= q.lo and tail[-1].mid > tail[0].mid * Fraction(101, 100))
    if not settled:
        message = f"q_n is still growing at horizon {horizon}"
        logger.warning(message, extra={"instances": horizon})
        warnings.warn(message, DivergenceWarning, stacklevel=2)
    if q.hi <= 1:
        return PSpaceParams(horizon, q_n, dict(theta), q, None, "numeric", False, settled)
    p = q / (q - 1)
    exponent = Fraction(1) / Fraction(q.hi).limit_denominator(10 ** 6)
    c_n = {n: theta[n] * rational_power(Fraction(n), exponent, prec) for n in theta}
    return PSpaceParams(horizon, q_n, c_n, q, p, "numeric", True, settled)


class SpaceClass(str, Enum):
    CLASS1 = "Class1"
    CLASS2 = "Class2"
    UNKNOWN = "Unknown"


def quarter_medians(values: Sequence[float]) -> np.ndarray:
    chunks = np.array_split(np.asarray(values, dtype=float), 4)
    return np.array([np.median(chunk) for chunk in chunks])


def classify(
    params: PSpaceParams,
    trend_low: float = 0.9,
    trend_high: float = 0.95,
    inf_threshold: float = 0.001,
    oscillation_factor: float = 2.0,
) -> SpaceClass:
    """Finite-horizon heuristic for the dichotomy: inf c_n > 0 versus c_n -> 0."""
    if not params.is_p_space or len(params.c_n) < 4:
        return SpaceClass.UNKNOWN
    values = np.array([float(params.c_n[n]) for n in sorted(params.c_n)])
    medians = quarter_medians(values)
    if medians[0] <= 0:
        return SpaceClass.UNKNOWN
    ratio = medians[-1] / medians[0]
    monotone = bool(np.all(np.diff(medians) <= 0))
    spread = medians.max() / max(medians.min(), np.finfo(float).tiny)
    if not monotone and spread >= oscillation_factor:
        result = SpaceClass.UNKNOWN
    elif values.min() >= inf_threshold and ratio >= trend_high:
        result = SpaceClass.CLASS1
    elif monotone and ratio <= trend_low:
        result = SpaceClass.CLASS2
    else:
        result = SpaceClass.UNKNOWN
    logger.info(
        f"classified as {result.value}",
        extra={"instances": len(values)},
    )
    return result


# l_r averages


def _check_normalized(blocks: Sequence[BlockVector], engine) -> None:
    for i, block in enumerate(blocks, start=1):
        value = engine.norm(block)
        if value.hi < 1 - NORMALIZATION_TOLERANCE or value.lo > 1 + NORMALIZATION_TOLERANCE:
            raise PreconditionFailed(f"block {i} is not normalized: norm {value!r}")


def _sign_patterns(m: int) -> List[Tuple[int, ...]]:
    return [(1,) + signs for signs in product((1, -1), repeat=m - 1)]


def lr_average_check(
    blocks: Sequence[BlockVector],
    r,
    C,
    spec: SpaceSpec,
    samples: int = 0,
    seed: int = 0,
    prec: int = DEFAULT_PRECISION,
    cap: Optional[int] = None,
) -> CheckResult:
    """True iff ||sum a_i x_i|| is within factor C of ||(a_i)||_r on the tested patterns.

    Patterns are every sign vector when there are at most ten blocks, or
    the all-ones vector otherwise, plus `samples` random coefficient vectors.
    """
    if not blocks or not is_block_sequence(blocks):
        raise MalformedDecomposition("blocks must be a nonempty successive sequence")
    C = Fraction(C)
    engine = get_engine(spec, cap, prec)
    support = sum(len(b.support) for b in blocks)
    if support > engine.cap:
        raise CapExceeded(support, engine.cap)
    _check_normalized(blocks, engine)
    m = len(blocks)
    patterns: List[Tuple[Fraction, ...]] = []
    if m <= MAX_EXHAUSTIVE_SIGNS:
        patterns.extend(tuple(Fraction(s) for s in signs) for signs in _sign_patterns(m))
    else:
        patterns.append(tuple(Fraction(1) for _ in range(m)))
    rng = random.Random(seed)
    for _ in range(samples):
        pattern = tuple(Fraction(rng.randint(-8, 8), 8) for _ in range(m))
        if any(pattern):
            patterns.append(pattern)

    worst: Optional[Enclosure] = None
    witness = None
    ok = True
    for pattern in patterns:
        value = engine.norm(linear_combination(pattern, blocks))
        reference = lr_norm(pattern, r, prec)
        slack = (C * reference - value).min(C * value - reference)
        if worst is None or slack.lo < worst.lo:
            worst, witness = slack, {"coefficients": [format_rational(a) for a in pattern]}
        if slack.lo < 0:
            ok = False
    return CheckResult(ok, witness, worst, len(patterns))


# Spreading-model index


@dataclass
class DeltaEstimate:
    """Finite-level surrogate for delta_n of a sequence."""

    n: int
    tail_start: int
    cap: int
    value: Enclosure
    lower: Optional[Enclosure] = None
    minimizer: Optional[Dict[int, Fraction]] = None
    candidates: int = 0
    method: Dict[str, object] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "tail_start": self.tail_start,
            "cap": self.cap,
            "value": self.value.to_json(),
            "lower": None if self.lower is None else self.lower.to_json(),
            "minimizer": None if self.minimizer is None else {str(i): format_rational(a) for i, a in self.minimizer.items()},
            "candidates": self.candidates,
            "method": self.method,
        }


def maximal_candidates(count: int, n: int, tail_start: int, cap: int) -> List[Tuple[int, ...]]:
    """Inclusion-maximal F in S_n with min F >= tail_start, #F <= cap, F within 1..count."""
    fam = FamilySpec.S(n)
    pool = range(max(tail_start, 1), count + 1)
    found: List[Tuple[int, ...]] = []
    for size in range(min(cap, len(pool)), 0, -1):
        for F in combinations(pool, size):
            if not member(F, fam):
                continue
            if any(set(F) < set(G) for G in found):
                continue
            found.append(F)
    return found


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def _simplex_minimum(
    vectors: Sequence[BlockVector],
    engine,
    coarse_mesh: int,
    grid_mesh: int,
) -> Tuple[Enclosure, Tuple[Fraction, ...]]:
    k = len(vectors)
    cache: Dict[Tuple[Fraction, ...], Enclosure] = {}

    def value(weights: Tuple[Fraction, ...]) -> Enclosure:
        if weights not in cache:
            cache[weights] = engine.norm(linear_combination(weights, vectors))
        return cache[weights]

    steps = 2 ** coarse_mesh
    best_point: Optional[Tuple[Fraction, ...]] = None
    best: Optional[Enclosure] = None
    for comp in _compositions(steps, k):
        point = tuple(Fraction(c, steps) for c in comp)
        v = value(point)
        if best is None or v.mid < best.mid:
            best, best_point = v, point

    for level in range(coarse_mesh + 1, grid_mesh + 1):
        step = Fraction(1, 2 ** level)
        improved = True
        while improved:
            improved = False
            for i in range(k):
                for j in range(k):
                    if i == j or best_point[i] < step:
                        continue
                    moved = list(best_point)
                    moved[i] -= step
                    moved[j] += step
                    candidate = tuple(moved)
                    v = value(candidate)
                    if v.mid < best.mid:
                        best, best_point, improved = v, candidate, True
    return best, best_point


def _is_basis(v: BlockVector) -> bool:
    return len(v.items) == 1 and v.items[0][1] == 1


def delta_estimate(
    vectors: Sequence[BlockVector],
    n: int,
    tailN: int,
    capF: int,
    spec: SpaceSpec,
    grid_mesh: int = 6,
    coarse_mesh: int = 3,
    prec: int = DEFAULT_PRECISION,
    cap: Optional[int] = None,
) -> DeltaEstimate:
    """min over maximal F in S_n of the smallest ||sum_{i in F} a_i x_i|| over the simplex.

    The value is a grid estimate from above. On unit-vector input a lower
    certificate is attached: the least theta_m sum_{i in F} e_i* over every
    candidate F, each of which bounds its whole simplex from below.
    """
    if not vectors or not is_block_sequence(vectors):
        raise MalformedDecomposition("vectors must be a nonempty successive sequence")
    if n < 0 or capF < 1:
        raise InputError("need n >= 0 and capF >= 1")
    engine = get_engine(spec, cap, prec)
    if capF * max(len(v.support) for v in vectors) > engine.cap:
        raise CapExceeded(capF * max(len(v.support) for v in vectors), engine.cap)
    candidates = maximal_candidates(len(vectors), n, tailN, capF)
    if not candidates:
        raise PreconditionFailed(f"no F in S_{n} with min F >= {tailN} within {len(vectors)} vectors")
    best: Optional[Enclosure] = None
    minimizer: Optional[Dict[int, Fraction]] = None
    for F in candidates:
        chosen = [vectors[i - 1] for i in F]
        v, point = _simplex_minimum(chosen, engine, min(coarse_mesh, grid_mesh), grid_mesh)
        if best is None or v.mid < best.mid:
            best = v
            minimizer = {i: a for i, a in zip(F, point)}

    lower = None
    if n >= 1 and all(_is_basis(v) for v in vectors):
        bounds = [_basis_lower_bound(vectors, F, n, spec, prec) for F in candidates]
        if all(b is not None for b in bounds):
            lower = min(bounds, key=lambda b: b.lo)
    logger.debug(
        "delta estimate",
        extra={"instances": len(candidates), "support": len(minimizer)},
    )
    return DeltaEstimate(
        n=n,
        tail_start=tailN,
        cap=capF,
        value=best,
        lower=lower,
        minimizer=minimizer,
        candidates=len(candidates),
        method={"grid_mesh": grid_mesh, "coarse_mesh": coarse_mesh, "space": spec.label()},
    )


def _basis_lower_bound(
    vectors: Sequence[BlockVector],
    F: Tuple[int, ...],
    n: int,
    spec: SpaceSpec,
    prec: int,
) -> Optional[Enclosure]:
    minima = tuple(vectors[i - 1].minsupp for i in F)
    if len(minima) == 1:
        return Enclosure.exact(1)
    index = next((m for m in range(1, n + 1) if member(minima, spec.family(m))), None)
    if index is None:
        return None
    functional = NormingTree(Node(index, tuple(Leaf(i) for i in minima)), spec)
    # the functional takes the same value at every point of the simplex
    x = linear_combination([Fraction(1, len(F))] * len(F), [vectors[i - 1] for i in F])
    return evaluate(functional, x, prec)


# Domination and the Schreier-sum inequality


Norm = Callable[[Sequence[Fraction]], object]


def strong_domination_check(
    u_norm: Norm,
    v_norm: Norm,
    deltas: Sequence,
    samples: Sequence[Sequence],
) -> CheckResult:
    """||sum a_i v_i|| <= max_n delta_n max_{#F <= n} ||sum_{i in F} a_i u_i|| on every sample.

    Norms take a coefficient list indexed from 1 and return a number or
    an Enclosure.
    """
    deltas = [Enclosure.coerce(d if isinstance(d, Enclosure) else parse_rational(d)) for d in deltas]
    if not deltas or any(d.hi <= 0 for d in deltas):
        raise InputError("deltas must be positive", field="deltas")
    for a, b in zip(deltas, deltas[1:]):
        if b.lo > a.hi:
            raise InputError("deltas must be nonincreasing", field="deltas")
    ok = True
    worst: Optional[Enclosure] = None
    witness = None
    for sample in samples:
        coeffs = [parse_rational(c) for c in sample]
        support = [i for i, c in enumerate(coeffs) if c]
        if len(support) > MAX_SUBSET_SUPPORT:
            raise CapExceeded(len(support), MAX_SUBSET_SUPPORT)
        by_size: Dict[int, Enclosure] = {}
        for size in range(1, len(support) + 1):
            for F in combinations(support, size):
                restricted = [c if i in F else Fraction(0) for i, c in enumerate(coeffs)]
                value = Enclosure.coerce(u_norm(restricted))
                by_size[size] = value if size not in by_size else by_size[size].max(value)
        running = Enclosure.exact(0)
        prefix = []
        for size in range(1, len(deltas) + 1):
            if size in by_size:
                running = running.max(by_size[size])
            prefix.append(running)
        rhs = enclosure_max(d * m for d, m in zip(deltas, prefix))
        lhs = Enclosure.coerce(v_norm(coeffs))
        slack = rhs - lhs
        if worst is None or slack.lo < worst.lo:
            worst, witness = slack, {"coefficients": [format_rational(c) for c in coeffs]}
        if not lhs.certainly_le(rhs):
            ok = False
    return CheckResult(ok, witness, worst, len(samples))


def eq3_check(
    x_vectors: Sequence[BlockVector],
    alpha_seq: Sequence[int],
    delta_seq: Sequence,
    coeff_samples: Sequence[Sequence],
    spec: SpaceSpec,
    cap: Optional[int] = None,
    prec: int = DEFAULT_PRECISION,
    tracker: Optional[SlackTracker] = None,
) -> VerifyReport:
    """||sum a_i x_i|| <= 4 sum_k delta_(alpha_(k-1)) max_{F in S_(alpha_k), min F >= k} sum_{i in F} |a_i|."""
    if not is_block_sequence(x_vectors):
        raise MalformedDecomposition("x_vectors must be successive")
    if len(delta_seq) != len(alpha_seq) or len(alpha_seq) < 2:
        raise InputError("need matching alpha_seq and delta_seq of length >= 2", field="alpha_seq")
    if any(b <= a for a, b in zip(alpha_seq, alpha_seq[1:])):
        raise InputError("alpha_seq must be increasing", field="alpha_seq")
    deltas = [parse_rational(d) for d in delta_seq]
    if any(d <= 0 for d in deltas):
        raise InputError("delta_seq must be positive", field="delta_seq")
    engine = get_engine(spec, cap, prec)
    tracker = tracker or SlackTracker("eq3")
    K = len(alpha_seq) - 1
    for sample in coeff_samples:
        coeffs = [parse_rational(c) for c in sample]
        if len(coeffs) > len(x_vectors):
            raise InputError("more coefficients than vectors", field="coeff_samples")
        lhs = engine.norm(linear_combination(coeffs, x_vectors[: len(coeffs)]))
        rhs = Enclosure.exact(0)
        for k in range(1, K + 1):
            tail = {i: abs(c) for i, c in enumerate(coeffs, start=1) if i >= k and c}
            if not tail:
                continue
            rhs = rhs + deltas[k - 1] * max_schreier_sum(tail, alpha_seq[k])
        tracker.add(4 * rhs - lhs, {"coefficients": [format_rational(c) for c in coeffs]})
    return tracker.report(
        {
            "alpha": list(alpha_seq),
            "delta": [format_rational(d) for d in deltas],
            "space": spec.label(),
        }
    )


__all__ = [
    "CheckResult",
    "PSpaceParams",
    "SpaceClass",
    "p_space_params",
    "classify",
    "lr_average_check",
    "DeltaEstimate",
    "delta_estimate",
    "strong_domination_check",
    "eq3_check",
]
