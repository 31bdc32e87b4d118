"""Test space specifications and theta generators."""

from fractions import Fraction

import pytest
from pydantic import ValidationError

from src.enclosure import Enclosure
from src.errors import PreconditionFailed
from src.schreier import FamilySpec
from src.spaces import (
    PRESETS,
    Geometric,
    LogReciprocal,
    PowerLaw,
    SpaceSpec,
    Table,
    mixed_schreier,
    power_law_space,
    schlumprecht,
    tsirelson,
    tsirelson_table,
    tzafriri,
)


class TestThetaGenerators:
    """Tests for theta generators."""

    def test_geometric(self):
        """Test theta_n = theta**n exactly."""
        spec = tsirelson(Fraction(1, 2))
        assert spec.theta(3).same_value(Enclosure.exact(Fraction(1, 8)))
        assert spec.theta_sup().same_value(Enclosure.exact(Fraction(1, 2)))
        assert spec.is_exact

    def test_power_law(self):
        """Test theta_n = c / n**(1/q) is certified."""
        spec = power_law_space(1, 2)
        assert spec.theta(4).same_value(Enclosure.exact(Fraction(1, 2)))
        t2 = spec.theta(2)
        assert not t2.is_exact
        assert t2.lo * t2.lo <= Fraction(1, 2) <= t2.hi * t2.hi
        assert spec.theta_sup().same_value(Enclosure.exact(1))
        assert not spec.is_exact

    def test_log_reciprocal(self):
        """Test theta_n = 1 / log2(n + 1)."""
        spec = schlumprecht()
        assert spec.theta(1).same_value(Enclosure.exact(1))
        assert spec.theta(3).same_value(Enclosure.exact(Fraction(1, 2)))
        t2 = spec.theta(2)
        assert Fraction(63, 100) < t2.lo and t2.hi < Fraction(64, 100)

    def test_table(self):
        """Test table values are defined up to their length."""
        spec = tsirelson_table(3)
        assert spec.theta(2).same_value(Enclosure.exact(Fraction(1, 4)))
        assert spec.theta(4) is None
        assert spec.max_index == 3
        assert spec.theta_sup().contains(Fraction(1, 2))

    def test_invalid_generators(self):
        """Test out-of-range parameters are rejected."""
        with pytest.raises(ValidationError):
            Geometric(theta=Fraction(3, 2))
        with pytest.raises(ValidationError):
            PowerLaw(c=Fraction(1), q=Fraction(1, 2))
        with pytest.raises(ValidationError):
            Table(values=(Fraction(1, 4), Fraction(1, 2)))
        with pytest.raises(ValidationError):
            Table(values=())

    def test_weights_exclude_one(self):
        """Test theta = 1 is rejected for geometric and table weights."""
        with pytest.raises(ValidationError):
            Geometric(theta=Fraction(1))
        with pytest.raises(ValidationError):
            Table(values=(Fraction(1), Fraction(1, 2)))
        with pytest.raises(ValidationError):
            tsirelson(1)

    def test_power_law_allows_unit_first_weight(self):
        """Test c = 1 stays valid so theta_1 = 1 for n^(-1/q) weights."""
        assert power_law_space(1, 2).theta(1).contains(1)

    def test_weight_index_must_be_positive(self):
        """Test theta_0 is not a weight."""
        with pytest.raises(ValueError):
            tsirelson().theta(0)


class TestSpaceSpec:
    """Tests for SpaceSpec."""

    def test_default_exponents(self):
        """Test k_n = n by default and families follow the kind."""
        spec = mixed_schreier(False)
        assert spec.k(3) == 3
        assert spec.family(2) == FamilySpec.S(2)
        assert power_law_space().family(3) == FamilySpec.A(3)

    def test_custom_exponents(self):
        """Test exponents extend past their length with slope 1."""
        spec = SpaceSpec(family_kind="A", exponents=(2, 4), thetas=Geometric(theta="1/2"))
        assert spec.k(1) == 2
        assert spec.k(2) == 4
        assert spec.k(5) == 7
        assert spec.least_index(3) == 2

    def test_invalid_exponents(self):
        """Test decreasing exponents are rejected."""
        with pytest.raises(ValidationError):
            SpaceSpec(exponents=(3, 2), thetas=Geometric(theta="1/2"))

    def test_composed_variant(self):
        """Test the S_n[A_2] variant composes with A_2 and needs S-kind."""
        spec = mixed_schreier(True, True)
        assert spec.family(1) == FamilySpec.compose(FamilySpec.S(1), FamilySpec.A(2))
        with pytest.raises(ValidationError):
            SpaceSpec(family_kind="A", compose_inner_A2=True, thetas=Geometric(theta="1/2"))

    def test_json_round_trip(self):
        """Test rationals serialize as strings and specs re-parse equal."""
        spec = mixed_schreier(True)
        data = spec.model_dump(mode="json")
        assert data["thetas"] == {"kind": "geometric", "theta": "1/2"}
        assert SpaceSpec.model_validate(data) == spec

    def test_rejects_unknown_fields(self):
        """Test extra keys are rejected."""
        with pytest.raises(ValidationError):
            SpaceSpec.model_validate({"thetas": {"kind": "geometric", "theta": "1/2"}, "colour": 1})

    def test_labels(self):
        """Test labels name the family and weights."""
        assert mixed_schreier(False).label() == "T[(S_n, 1/2^n)]"
        assert mixed_schreier(True).label() == "T_M[(S_n, 1/2^n)]"
        assert schlumprecht().label() == "S"
        assert tsirelson().label() == "T[S_1,1/2]"

    def test_companion(self):
        """Test the companion Tsirelson space uses theta_sup."""
        assert mixed_schreier().tsirelson_companion().theta(2).same_value(Enclosure.exact(Fraction(1, 4)))

    def test_companion_needs_theta_below_one(self):
        """Test spaces with theta = 1 have no Tsirelson companion."""
        with pytest.raises(PreconditionFailed):
            tzafriri().tsirelson_companion()
        with pytest.raises(PreconditionFailed):
            schlumprecht().tsirelson_companion()

    def test_presets(self):
        """Test every preset builds a SpaceSpec."""
        for name, make in PRESETS.items():
            assert isinstance(make(), SpaceSpec), name


class TestDiagnostics:
    """Tests for regularity and clubsuit diagnostics."""

    def test_geometric_is_regular(self):
        """Test geometric weights are regular and satisfy clubsuit."""
        spec = mixed_schreier()
        assert spec.regularity_violations(6) == []
        assert spec.clubsuit_violations(6) == []

    def test_irregular_table(self):
        """Test a table with a sharp drop fails supermultiplicativity."""
        spec = SpaceSpec(thetas=Table(values=("1/2", "1/4", "1/100")))
        violations = spec.regularity_violations(3)
        assert violations
        assert "theta_(1+2)" in violations[0]

    def test_schlumprecht_is_regular(self):
        """Test 1/log2(n+1) is supermultiplicative for products."""
        assert schlumprecht().regularity_violations(6) == []
