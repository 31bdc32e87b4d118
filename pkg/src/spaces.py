"""
Space specifications for tsirelson-norms.
A SpaceSpec fixes the family kind (A_{k_n} or S_{k_n}), the weight
sequence theta_n, and whether splittings are admissible or allowable.
"""

from fractions import Fraction
from typing import Annotated, List, Literal, Optional, Tuple, Union

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    PlainSerializer,
    PlainValidator,
    WithJsonSchema,
    field_validator,
    model_validator,
)

from src.enclosure import (
    DEFAULT_PRECISION,
    Enclosure,
    format_rational,
    log2_enclosure,
    parse_rational,
    rational_power,
    root_enclosure,
)
from src.errors import PreconditionFailed
from src.schreier import FamilySpec

Rational = Annotated[
    Fraction,
    PlainValidator(parse_rational),
    PlainSerializer(format_rational, return_type=str),
    WithJsonSchema({"type": "string", "pattern": r"^-?\d+(/\d+)?$"}),
]


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True, extra="forbid")


class Geometric(_Frozen):
    """theta_n = theta**n."""

    kind: Literal["geometric"] = "geometric"
    theta: Rational

    @field_validator("theta")
    @classmethod
    def _in_unit_interval(cls, v: Fraction) -> Fraction:
        if not 0 < v < 1:
            raise ValueError("theta must lie in (0, 1)")
        return v

    def value(self, n: int, prec: int) -> Optional[Enclosure]:
        return Enclosure.exact(self.theta ** n)


class PowerLaw(_Frozen):
    """theta_n = c / n**(1/q)."""

    kind: Literal["power_law"] = "power_law"
    c: Rational
    q: Rational

    @model_validator(mode="after")
    def _check(self) -> "PowerLaw":
        if not 0 < self.c <= 1:
            raise ValueError("c must lie in (0, 1]")
        if self.q < 1:
            raise ValueError("q must be at least 1")
        return self

    def value(self, n: int, prec: int) -> Optional[Enclosure]:
        return Enclosure.exact(self.c) * rational_power(Fraction(n), -1 / self.q, prec)


class LogReciprocal(_Frozen):
    """theta_n = 1 / log2(n + 1)."""

    kind: Literal["log_reciprocal"] = "log_reciprocal"

    def value(self, n: int, prec: int) -> Optional[Enclosure]:
        return log2_enclosure(Fraction(n + 1), prec).reciprocal()


class Table(_Frozen):
    """Explicit theta_1 .. theta_L; larger indices are unavailable."""

    kind: Literal["table"] = "table"
    values: Tuple[Rational, ...]

    @field_validator("values")
    @classmethod
    def _check_values(cls, values):
        if not values:
            raise ValueError("table must not be empty")
        for v in values:
            if not 0 < v < 1:
                raise ValueError("table values must lie in (0, 1)")
        for a, b in zip(values, values[1:]):
            if b > a:
                raise ValueError("table values must be nonincreasing")
        return values

    def value(self, n: int, prec: int) -> Optional[Enclosure]:
        if n > len(self.values):
            return None
        return Enclosure.exact(self.values[n - 1])


ThetaGen = Annotated[
    Union[Geometric, PowerLaw, LogReciprocal, Table],
    Field(discriminator="kind"),
]


class SpaceSpec(_Frozen):
    """Mixed (or modified mixed) Tsirelson space T[(M_{k_n}, theta_n)_n]."""

    family_kind: Literal["A", "S"] = "S"
    exponents: Optional[Tuple[int, ...]] = Field(
        default=None, description="k_1, k_2, ...; defaults to k_n = n"
    )
    thetas: ThetaGen
    modified: bool = False
    compose_inner_A2: bool = False
    name: Optional[str] = None

    @field_validator("exponents")
    @classmethod
    def _check_exponents(cls, v):
        if v is None:
            return v
        if not v or v[0] < 1:
            raise ValueError("exponents must be positive")
        for a, b in zip(v, v[1:]):
            if b < a:
                raise ValueError("exponents must be nondecreasing")
        return v

    @model_validator(mode="after")
    def _check_compose(self) -> "SpaceSpec":
        if self.compose_inner_A2 and self.family_kind != "S":
            raise ValueError("the S_n[A_2] variant needs family_kind S")
        return self

    def k(self, n: int) -> int:
        """Family index k_n used with weight index n."""
        if self.exponents is None:
            return n
        if n <= len(self.exponents):
            return self.exponents[n - 1]
        last = len(self.exponents)
        return n + self.exponents[-1] - last

    def family(self, n: int) -> FamilySpec:
        if self.family_kind == "A":
            return FamilySpec.A(self.k(n))
        if self.compose_inner_A2:
            return FamilySpec.compose(FamilySpec.S(self.k(n)), FamilySpec.A(2))
        return FamilySpec.S(self.k(n))

    def least_index(self, rank: int) -> int:
        """Least weight index n >= 1 with k_n >= rank."""
        n = 1
        while self.k(n) < rank:
            n += 1
        return n

    def theta(self, n: int, prec: int = DEFAULT_PRECISION) -> Optional[Enclosure]:
        """theta_n, or None when the generator does not define it."""
        if n < 1:
            raise ValueError("weight index must be positive")
        return self.thetas.value(n, prec)

    @property
    def is_exact(self) -> bool:
        return isinstance(self.thetas, (Geometric, Table))

    @property
    def max_index(self) -> Optional[int]:
        if isinstance(self.thetas, Table):
            return len(self.thetas.values)
        return None

    def theta_sup(self, prec: int = DEFAULT_PRECISION) -> Enclosure:
        """theta = sup_n theta_n**(1/n)."""
        gen = self.thetas
        if isinstance(gen, Geometric):
            return Enclosure.exact(gen.theta)
        if isinstance(gen, Table):
            best = None
            for n, v in enumerate(gen.values, start=1):
                r = root_enclosure(v, n, prec)
                best = r if best is None else best.max(r)
            return best
        return Enclosure.exact(1)

    def regularity_violations(self, bound: int, prec: int = DEFAULT_PRECISION) -> List[str]:
        """Pairs where supermultiplicativity certainly fails, up to bound."""
        violations = []
        for n in range(1, bound + 1):
            for m in range(n, bound + 1):
                joint = n * m if self.family_kind == "A" else n + m
                t_joint = self.theta(joint, prec)
                t_n, t_m = self.theta(n, prec), self.theta(m, prec)
                if t_joint is None or t_n is None or t_m is None:
                    continue
                if t_joint.certainly_lt(t_n * t_m):
                    op = "*" if self.family_kind == "A" else "+"
                    violations.append(f"theta_({n}{op}{m}) < theta_{n} theta_{m}")
        return violations

    def clubsuit_violations(self, bound: int, prec: int = DEFAULT_PRECISION) -> List[str]:
        """Pairs where theta_(n+m) <= theta_n theta**m certainly fails, up to bound."""
        theta = self.theta_sup(prec)
        violations = []
        for n in range(1, bound + 1):
            for m in range(1, bound + 1):
                t_joint, t_n = self.theta(n + m, prec), self.theta(n, prec)
                if t_joint is None or t_n is None:
                    continue
                if (t_n * theta ** m).certainly_lt(t_joint):
                    violations.append(f"theta_({n}+{m}) > theta_{n} theta^{m}")
        return violations

    def tsirelson_companion(self, prec: int = DEFAULT_PRECISION) -> "SpaceSpec":
        """T[S_1, theta] for this space's theta (upper end of its enclosure).

        Raises:
            PreconditionFailed: theta is 1, as for the power-law and log-reciprocal weights
        """
        theta = self.theta_sup(prec).hi
        if theta >= 1:
            raise PreconditionFailed(f"{self.label()} has theta = 1; no Tsirelson companion exists")
        return tsirelson(theta)

    def label(self) -> str:
        if self.name:
            return self.name
        gen = self.thetas
        if isinstance(gen, Geometric):
            weights = f"{format_rational(gen.theta)}^n"
        elif isinstance(gen, PowerLaw):
            weights = f"{format_rational(gen.c)}/n^(1/{format_rational(gen.q)})"
        elif isinstance(gen, LogReciprocal):
            weights = "1/log2(n+1)"
        else:
            weights = "table"
        family = f"{self.family_kind}_n" + ("[A_2]" if self.compose_inner_A2 else "")
        prefix = "T_M" if self.modified else "T"
        return f"{prefix}[({family}, {weights})]"


def tsirelson(theta=Fraction(1, 2)) -> SpaceSpec:
    """T[S_1, theta], realized as T[(S_n, theta**n)]."""
    return SpaceSpec(family_kind="S", thetas=Geometric(theta=Fraction(theta)), name=f"T[S_1,{format_rational(Fraction(theta))}]")


def tsirelson_table(length: int = 8, theta=Fraction(1, 2)) -> SpaceSpec:
    theta = Fraction(theta)
    return SpaceSpec(family_kind="S", thetas=Table(values=tuple(theta ** n for n in range(1, length + 1))))


def mixed_schreier(modified: bool = False, compose_inner_A2: bool = False) -> SpaceSpec:
    """T[(S_n, 2^-n)] and its modified / S_n[A_2] variants."""
    return SpaceSpec(
        family_kind="S",
        thetas=Geometric(theta=Fraction(1, 2)),
        modified=modified,
        compose_inner_A2=compose_inner_A2,
    )


def power_law_space(c=Fraction(1), q=Fraction(2)) -> SpaceSpec:
    """T[(A_n, c / n^(1/q))]; c = 1/2, q = 2 is the Tzafriri space."""
    return SpaceSpec(family_kind="A", thetas=PowerLaw(c=Fraction(c), q=Fraction(q)))


def schlumprecht() -> SpaceSpec:
    return SpaceSpec(family_kind="A", thetas=LogReciprocal(), name="S")


def tzafriri(c=Fraction(1, 2)) -> SpaceSpec:
    return power_law_space(c, Fraction(2))


PRESETS = {
    "tsirelson": tsirelson,
    "tsirelson-table": tsirelson_table,
    "mixed-schreier": lambda: mixed_schreier(False),
    "modified-mixed-schreier": lambda: mixed_schreier(True),
    "modified-mixed-schreier-a2": lambda: mixed_schreier(True, True),
    "power-law": power_law_space,
    "schlumprecht": schlumprecht,
    "tzafriri": tzafriri,
}
