"""Test the norm engine."""

import random
from fractions import Fraction

import pytest

from src.enclosure import DEFAULT_PRECISION, Enclosure
from src.errors import CapExceeded, NonRegularSpec
from src.norm import NormEngine, get_engine, max_order_norm, norm, norming_functional, oracle_norm
from src.spaces import SpaceSpec, Table, mixed_schreier, power_law_space, tsirelson, tsirelson_table
from src.trees import Leaf, evaluate, validate_tree
from src.vectors import BlockVector


def random_vector(rng, max_support, max_index=12):
    indices = rng.sample(range(1, max_index + 1), rng.randint(1, max_support))
    return BlockVector.from_mapping({i: Fraction(rng.choice([-1, 1]) * rng.randint(1, 8), 4) for i in indices})


class TestNorm:
    """Tests for norm values."""

    def test_tsirelson_flat(self):
        """Test ||e_3 + e_4 + e_5|| = 3/2 in Tsirelson's space."""
        assert norm(BlockVector.ones([3, 4, 5]), tsirelson()).same_value(Enclosure.exact(Fraction(3, 2)))

    def test_signs_do_not_matter(self):
        """Test the norm is unconditional."""
        x = BlockVector.from_mapping({3: 1, 4: -1, 5: -1})
        assert norm(x, tsirelson()).same_value(Enclosure.exact(Fraction(3, 2)))

    def test_basis_and_zero(self):
        """Test unit vectors have norm 1 and the zero vector norm 0."""
        assert norm(BlockVector.basis(7, -3), mixed_schreier()).same_value(Enclosure.exact(3))
        assert norm(BlockVector(), mixed_schreier()).same_value(Enclosure.exact(0))

    def test_sup_norm_wins_on_small_minima(self):
        """Test ||e_2 + e_3|| = 1 since theta_1 * 2 = 1."""
        assert norm(BlockVector.ones([2, 3]), tsirelson()).same_value(Enclosure.exact(1))

    def test_power_law_identity(self):
        """Test ||e_1 + ... + e_4|| = 2 in T[(A_n, n^(-1/2))]."""
        value = norm(BlockVector.ones(range(1, 5)), power_law_space(1, 2))
        assert value.contains(2)
        assert value.width <= Fraction(1, 2 ** (DEFAULT_PRECISION - 8))

    def test_max_order(self):
        """Test an order cap of 0 leaves only coordinate functionals."""
        x = BlockVector.ones([3, 4, 5])
        assert max_order_norm(x, tsirelson(), 0).same_value(Enclosure.exact(1))
        assert max_order_norm(x, tsirelson(), 1).same_value(Enclosure.exact(Fraction(3, 2)))

    def test_cap_exceeded(self):
        """Test supports beyond the cap raise CapExceeded."""
        with pytest.raises(CapExceeded) as info:
            get_engine(tsirelson(), cap=3).norm(BlockVector.ones(range(1, 5)))
        assert info.value.size == 4
        assert info.value.cap == 3

    def test_non_regular_spec_warns(self):
        """Test engines warn on spaces failing supermultiplicativity."""
        spec = SpaceSpec(thetas=Table(values=("1/2", "1/4", "1/100")))
        with pytest.warns(NonRegularSpec):
            NormEngine(spec)

    def test_table_limits_weights(self):
        """Test a one-entry table still evaluates with theta_1 only."""
        value = norm(BlockVector.ones([3, 4, 5]), tsirelson_table(1))
        assert value.same_value(Enclosure.exact(Fraction(3, 2)))


class TestOracle:
    """Tests against the exhaustive tree oracle."""

    @pytest.mark.parametrize(
        "spec,max_support",
        [
            (tsirelson_table(8), 5),
            (mixed_schreier(False), 5),
            (mixed_schreier(True), 4),
            (power_law_space(1, 2), 4),
        ],
    )
    def test_engine_matches_oracle(self, spec, max_support):
        """Test the dynamic program equals the tree oracle on random vectors."""
        rng = random.Random(5)
        engine = get_engine(spec)
        for _ in range(12):
            x = random_vector(rng, max_support)
            value, expected = engine.norm(x), oracle_norm(x, spec)
            if value.is_exact and expected.is_exact:
                assert value.same_value(expected), x
            else:
                assert value.overlaps(expected), x

    def test_modified_dominates(self):
        """Test the modified norm is at least the admissible norm."""
        rng = random.Random(8)
        for _ in range(20):
            x = random_vector(rng, 5)
            assert norm(x, mixed_schreier(True)).certainly_ge(norm(x, mixed_schreier(False)))


class TestNormingFunctional:
    """Tests for norming_functional."""

    def test_tie_prefers_leaf(self):
        """Test e_2 + e_3 is normed by e_2*."""
        f = norming_functional(BlockVector.ones([2, 3]), tsirelson())
        assert f.root == Leaf(2)

    def test_duality(self):
        """Test f(x) = ||x|| and f is valid on random vectors."""
        rng = random.Random(13)
        for spec in (tsirelson(), mixed_schreier(False), mixed_schreier(True)):
            engine = get_engine(spec)
            for _ in range(10):
                x = random_vector(rng, 6)
                f = engine.norming_functional(x)
                assert validate_tree(f) == []
                assert evaluate(f, x).same_value(engine.norm(x))

    def test_signs_follow_coefficients(self):
        """Test leaves carry the sign of their coefficient."""
        x = BlockVector.from_mapping({3: 1, 4: -1, 5: -1})
        f = norming_functional(x, tsirelson())
        signs = {leaf.index: leaf.sign for _, leaf, _ in f.leaves()}
        assert signs == {3: 1, 4: -1, 5: -1}
        assert evaluate(f, x).same_value(Enclosure.exact(Fraction(3, 2)))

    def test_zero_vector_functional(self):
        """Test the zero vector gets a coordinate functional."""
        f = norming_functional(BlockVector(), tsirelson())
        assert evaluate(f, BlockVector()).same_value(Enclosure.exact(0))
