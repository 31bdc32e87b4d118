"""Test upper and lower estimate verifiers and tree transformations."""

import random
from fractions import Fraction

import pytest

from src.averages import AverageCert, uniform_average
from src.enclosure import Enclosure
from src.errors import InputError, InvalidTree, PreconditionFailed
from src.estimates import (
    allowable_families,
    families_within_cap,
    prune_tree,
    random_allowable_family,
    regroup_node,
    regroup_slack,
    verify_ave1,
    verify_height_fact,
    verify_theta1,
    verify_x2,
)
from src.schreier import FamilySpec, member
from src.spaces import mixed_schreier, power_law_space, tsirelson
from src.trees import Leaf, Node, NormingTree, evaluate
from src.vectors import BlockVector


def _two_level_tree():
    leaves = tuple(Leaf(i) for i in range(3, 9))
    return NormingTree(Node(2, leaves), tsirelson())


class TestPruneTree:
    """Tests for pruning low-order terminal nodes."""

    def test_keeps_deep_leaves(self):
        """Test leaves of order >= M survive."""
        f = NormingTree(Node(1, (Leaf(2), Leaf(3))), tsirelson())
        pruned, loss = prune_tree(f, uniform_average([2, 3], 1))
        assert pruned.root == f.root
        assert loss.same_value(Enclosure.exact(0))

    def test_drops_root_leaf(self):
        """Test an order-0 leaf is removed and the loss stays below 2 eps."""
        cert = uniform_average([2, 3], 1)
        pruned, loss = prune_tree(NormingTree(Leaf(2), tsirelson()), cert)
        assert pruned.root is None
        assert loss.same_value(Enclosure.exact(Fraction(1, 2)))
        assert loss.certainly_le(2 * cert.eps)

    def test_invalid_tree(self):
        """Test a functional outside the norming set is rejected."""
        f = NormingTree(Node(1, (Leaf(1), Leaf(2))), tsirelson())
        with pytest.raises(InvalidTree):
            prune_tree(f, uniform_average([2, 3], 1))

    def test_needs_an_average(self):
        """Test a certificate that fails the average check is rejected."""
        f = NormingTree(Node(1, (Leaf(2), Leaf(3))), tsirelson())
        with pytest.raises(PreconditionFailed):
            prune_tree(f, uniform_average([2, 3, 4], 1))


class TestRegroup:
    """Tests for regroup_node and regroup_slack."""

    def test_inserts_layer(self):
        """Test a weight-2 node splits into two weight-1 groups."""
        regrouped = regroup_node(_two_level_tree(), (), 1)
        assert regrouped.root == Node(
            1,
            (
                Node(1, (Leaf(3), Leaf(4), Leaf(5))),
                Node(1, (Leaf(6), Leaf(7), Leaf(8))),
            ),
        )

    def test_value_preserved_in_tsirelson(self):
        """Test regrouping keeps the functional value when theta_n = theta^n."""
        f = _two_level_tree()
        x = BlockVector.ones(range(3, 9))
        regrouped = regroup_node(f, (), 1)
        assert evaluate(regrouped, x).same_value(evaluate(f, x))
        assert regroup_slack(f, (), 1, x).same_value(Enclosure.exact(0))

    def test_trivial_orders(self):
        """Test k at either end of the range leaves the tree unchanged."""
        f = _two_level_tree()
        assert regroup_node(f, (), 0) is f
        assert regroup_node(f, (), 2) is f

    def test_out_of_range(self):
        """Test k beyond the node's order range is rejected."""
        with pytest.raises(PreconditionFailed):
            regroup_node(_two_level_tree(), (), 3)

    def test_leaf_path(self):
        """Test a leaf cannot be regrouped."""
        with pytest.raises(PreconditionFailed):
            regroup_node(_two_level_tree(), (0,), 1)

    def test_needs_schreier_families(self):
        """Test spaces over A_n are rejected."""
        f = NormingTree(Node(2, (Leaf(3), Leaf(4))), power_law_space())
        with pytest.raises(PreconditionFailed):
            regroup_node(f, (), 1)


class TestAllowableFamilies:
    """Tests for allowable family enumeration and sampling."""

    def test_enumeration(self):
        """Test the S_1- and S_0-allowable families of {2, 3}."""
        s1 = set(allowable_families([2, 3], 1))
        assert s1 == {((2,),), ((3,),), ((2, 3),), ((2,), (3,))}
        s0 = set(allowable_families([2, 3], 0))
        assert s0 == {((2,),), ((3,),), ((2, 3),)}

    def test_random_family_is_allowable(self):
        """Test random families have minima in S_j."""
        rng = random.Random(3)
        for _ in range(20):
            family = random_allowable_family(range(3, 9), 1, rng)
            assert member(tuple(b[0] for b in family), FamilySpec.S(1))

    def test_cap_switches_to_sampling(self):
        """Test passing the cap returns a seeded sample."""
        families, sampled = families_within_cap([2, 3], 1, 2, random.Random(0), 5)
        assert sampled
        assert len(families) == 5
        families, sampled = families_within_cap([2, 3], 1, 100, random.Random(0), 5)
        assert not sampled
        assert len(families) == 4


class TestVerifyTheta1:
    """Tests for the upper estimate on allowable splittings."""

    def test_small_average_passes(self):
        """Test (e_2 + e_3)/2 in T[(S_n, 2^-n)] with j = 0."""
        report = verify_theta1(uniform_average([2, 3], 1), 0, mixed_schreier(), seed=5)
        assert report.passed
        assert report.instances == 4
        assert report.lemma == "theta1"
        assert report.seed == 5
        assert report.params["j"] == 0

    def test_j_range(self):
        """Test j must be below M."""
        with pytest.raises(PreconditionFailed):
            verify_theta1(uniform_average([2, 3], 1), 1, mixed_schreier())

    def test_needs_an_average(self):
        """Test non-averages are rejected."""
        with pytest.raises(PreconditionFailed):
            verify_theta1(uniform_average([2, 3, 4], 1), 0, mixed_schreier())


class TestVerifyHeightFact:
    """Tests for the bounded-height comparison in T[S_1, theta]."""

    def test_pair(self):
        """Test e_2 + e_3 has slack 1 at height 1."""
        report = verify_height_fact(BlockVector.ones([2, 3]), 1, Fraction(1, 2))
        assert report.passed
        assert report.worst_slack == "1"
        assert report.stats["max_ratio"] == "1"

    def test_support_outside_family(self):
        """Test the support must lie in S_M."""
        with pytest.raises(PreconditionFailed):
            verify_height_fact(BlockVector.ones([2, 3, 4]), 1, Fraction(1, 2))

    def test_coefficients_in_unit_interval(self):
        """Test coefficients above 1 are rejected."""
        with pytest.raises(InputError):
            verify_height_fact(BlockVector.basis(2, 2), 1, Fraction(1, 2))


class TestVerifyX2:
    """Tests for the modified versus S_n[A_2] comparison."""

    def test_modified_space(self):
        """Test small vectors keep the ratio within [1/3, 3]."""
        samples = [BlockVector.basis(3), BlockVector.ones([3, 4])]
        report = verify_x2(mixed_schreier(modified=True), samples)
        assert report.passed
        assert report.instances == 2
        assert "min_ratio" in report.stats

    def test_requires_modified(self):
        """Test non-modified spaces are rejected."""
        with pytest.raises(PreconditionFailed):
            verify_x2(mixed_schreier(), [BlockVector.basis(3)])


class TestVerifyAve1:
    """Tests for averages of RIS of special averages."""

    def _parts(self):
        return [uniform_average([2, 3], 1), uniform_average(range(4, 8), 1)]

    def test_two_part_average(self):
        """Test the bound holds with D = 1."""
        parts = self._parts()
        x = AverageCert(tuple(p.vector() for p in parts), (Fraction(1, 2), Fraction(1, 2)), 1, Fraction(3, 4))
        report = verify_ave1(x, mixed_schreier(), parts, [1, 12])
        assert report.passed
        assert report.stats["D"] == "1"
        assert report.stats["average"] is True

    def test_parts_must_match(self):
        """Test the average must be taken over the given parts."""
        parts = self._parts()
        x = uniform_average([2, 4], 1)
        with pytest.raises(PreconditionFailed):
            verify_ave1(x, mixed_schreier(), parts, [1, 12])

    def test_parts_must_form_ris(self):
        """Test a too small n_2 breaks the RIS condition."""
        parts = self._parts()
        x = AverageCert(tuple(p.vector() for p in parts), (Fraction(1, 2), Fraction(1, 2)), 1, Fraction(3, 4))
        with pytest.raises(PreconditionFailed):
            verify_ave1(x, mixed_schreier(), parts, [1, 4])
