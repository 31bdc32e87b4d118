"""Test p-space parameters, classification, l_r averages and the spreading index."""

from fractions import Fraction

import pytest

from src.enclosure import Enclosure, lr_norm, rational_power
from src.errors import (
    CapExceeded,
    DivergenceWarning,
    InputError,
    MalformedDecomposition,
    PreconditionFailed,
)
from src.spaces import SpaceSpec, Table, mixed_schreier, power_law_space, schlumprecht, tsirelson
from src.spreading import (
    SpaceClass,
    classify,
    delta_estimate,
    eq3_check,
    lr_average_check,
    maximal_candidates,
    p_space_params,
    quarter_medians,
    strong_domination_check,
)
from src.vectors import BlockVector


def _l1(coeffs):
    return sum(abs(c) for c in coeffs)


def _linf(coeffs):
    return max(abs(c) for c in coeffs)


class TestPSpaceParams:
    """Tests for p_space_params."""

    def test_power_law_closed_form(self):
        """Test theta_n = 1/sqrt(n) gives p = q = 2."""
        params = p_space_params(power_law_space(), horizon=16)
        assert params.method == "closed-form"
        assert params.is_p_space
        assert params.q.same_value(Enclosure.exact(2))
        assert params.p.same_value(Enclosure.exact(2))
        assert all(c.same_value(Enclosure.exact(1)) for c in params.c_n.values())

    def test_power_law_q_one(self):
        """Test theta_n = 1/n is not a p-space."""
        params = p_space_params(power_law_space(q=1), horizon=16)
        assert not params.is_p_space
        assert params.p is None

    def test_schlumprecht_has_p_one(self):
        """Test 1/log2(n+1) gives p = 1 and q = infinity."""
        params = p_space_params(schlumprecht(), horizon=16)
        assert params.p_is_one
        assert params.p.same_value(Enclosure.exact(1))
        assert params.to_json()["q"] == "inf"

    def test_geometric_is_not_p_space(self):
        """Test theta_n = 2^-n keeps q below 1."""
        params = p_space_params(mixed_schreier(), horizon=32)
        assert params.method == "numeric"
        assert not params.is_p_space
        assert params.settled

    def test_growing_q_warns(self):
        """Test a constant table keeps q_n = log2 n growing and warns."""
        spec = SpaceSpec(thetas=Table(values=tuple(Fraction(1, 2) for _ in range(32))))
        with pytest.warns(DivergenceWarning):
            params = p_space_params(spec)
        assert not params.settled
        assert params.horizon == 32
        assert params.q.contains(5)

    def test_horizon_too_small(self):
        """Test a horizon below 2 is rejected."""
        with pytest.raises(InputError):
            p_space_params(power_law_space(), horizon=1)


class TestClassify:
    """Tests for the Class 1 / Class 2 heuristic."""

    def test_quarter_medians(self):
        """Test medians of four chunks."""
        assert list(quarter_medians([1, 2, 3, 4, 5, 6, 7, 8])) == [1.5, 3.5, 5.5, 7.5]

    def test_constant_c_is_class1(self):
        """Test c_n = 1 is Class 1."""
        assert classify(p_space_params(power_law_space(), horizon=64)) == SpaceClass.CLASS1

    def test_decaying_c_is_class2(self):
        """Test 1/log2(n+1) decays and is Class 2."""
        assert classify(p_space_params(schlumprecht(), horizon=256)) == SpaceClass.CLASS2

    def test_not_p_space_is_unknown(self):
        """Test non-p-spaces are left unclassified."""
        assert classify(p_space_params(power_law_space(q=1), horizon=64)) == SpaceClass.UNKNOWN

    def test_value_is_json_label(self):
        """Test the enum values are the emitted labels."""
        assert SpaceClass.CLASS2.value == "Class2"


class TestLrAverageCheck:
    """Tests for C-l_r-average checks."""

    def test_basis_is_linf_average(self):
        """Test three unit vectors in T are a 1-l_inf-average."""
        blocks = [BlockVector.basis(i) for i in (2, 3, 4)]
        result = lr_average_check(blocks, "inf", 1, tsirelson())
        assert result.ok
        assert result.instances == 4

    def test_basis_is_not_l1_average(self):
        """Test the same blocks fail against l_1 with C = 2."""
        blocks = [BlockVector.basis(i) for i in (2, 3, 4)]
        assert not lr_average_check(blocks, 1, 2, tsirelson()).ok
        assert lr_average_check(blocks, 1, 3, tsirelson()).ok

    def test_random_samples_are_added(self):
        """Test extra random coefficient vectors are tested."""
        blocks = [BlockVector.basis(i) for i in (2, 3)]
        result = lr_average_check(blocks, "inf", 1, tsirelson(), samples=6, seed=1)
        assert result.instances > 2

    def test_blocks_must_be_normalized(self):
        """Test a block of norm 2 is rejected."""
        with pytest.raises(PreconditionFailed):
            lr_average_check([BlockVector.basis(3, 2)], "inf", 1, tsirelson())

    def test_blocks_must_be_successive(self):
        """Test overlapping blocks are rejected."""
        with pytest.raises(MalformedDecomposition):
            lr_average_check([BlockVector.basis(3), BlockVector.basis(2)], "inf", 1, tsirelson())


class TestDeltaEstimate:
    """Tests for the finite-level spreading index."""

    def test_maximal_candidates(self):
        """Test only inclusion-maximal sets are kept."""
        found = maximal_candidates(6, 1, 2, 3)
        assert (3, 4, 5) in found
        assert (2, 3) in found
        assert (3, 4) not in found
        assert len(found) == 8

    def test_unit_vectors_in_tsirelson(self):
        """Test delta_1 of the basis is theta = 1/2 with a matching lower certificate."""
        vectors = [BlockVector.basis(i) for i in range(1, 7)]
        estimate = delta_estimate(vectors, 1, 2, 3, tsirelson())
        assert estimate.value.same_value(Enclosure.exact(Fraction(1, 2)))
        assert estimate.lower.same_value(Enclosure.exact(Fraction(1, 2)))
        assert estimate.candidates == 8
        assert sum(estimate.minimizer.values()) == 1

    def test_order_zero(self):
        """Test delta_0 of the basis is 1."""
        vectors = [BlockVector.basis(i) for i in range(1, 5)]
        estimate = delta_estimate(vectors, 0, 1, 1, tsirelson())
        assert estimate.value.same_value(Enclosure.exact(1))
        assert estimate.lower is None

    def test_no_candidates(self):
        """Test a tail start beyond the sequence is rejected."""
        vectors = [BlockVector.basis(i) for i in range(1, 5)]
        with pytest.raises(PreconditionFailed):
            delta_estimate(vectors, 1, 10, 3, tsirelson())

    def test_cap(self):
        """Test oversized candidate sets raise CapExceeded."""
        vectors = [BlockVector.basis(i) for i in range(1, 5)]
        with pytest.raises(CapExceeded):
            delta_estimate(vectors, 1, 1, 40, tsirelson())

    @pytest.mark.parametrize("n", [1, 2])
    @pytest.mark.parametrize("tailN,capF", [(1, 2), (2, 3), (3, 4)])
    def test_lower_certificate_below_value(self, n, tailN, capF):
        """Test the lower certificate never exceeds the minimum over every candidate F."""
        vectors = [BlockVector.basis(i) for i in range(1, 7)]
        estimate = delta_estimate(vectors, n, tailN, capF, mixed_schreier(), grid_mesh=3, coarse_mesh=1)
        assert estimate.lower is not None
        assert estimate.lower.lo <= estimate.value.hi


class TestStrongDomination:
    """Tests for strong_domination_check."""

    def test_linf_dominates_itself(self):
        """Test l_inf is dominated by l_inf with delta = 1."""
        result = strong_domination_check(_linf, _linf, [1], [[1, 1], [Fraction(1, 2), -2]])
        assert result.ok
        assert result.instances == 2

    def test_l1_not_dominated_by_linf(self):
        """Test l_1 is not dominated by l_inf."""
        assert not strong_domination_check(_linf, _l1, [1], [[1, 1]]).ok

    def test_l1_dominated_by_subsets(self):
        """Test subsets of size two dominate l_1 on pairs."""
        assert strong_domination_check(_l1, _l1, [1, 1], [[1, 1]]).ok

    def test_l2_by_l1_with_root_deltas(self):
        """Test delta_n = n^(-1/2) dominates l_2 by l_1 on flat vectors only."""
        deltas = [rational_power(n, Fraction(-1, 2)) for n in range(1, 5)]

        def l2(coeffs):
            return lr_norm(coeffs, 2)

        assert strong_domination_check(_l1, l2, deltas, [[1, 1, 1, 1]]).ok
        assert not strong_domination_check(_l1, l2, deltas, [[2, 1]]).ok

    def test_bad_deltas(self):
        """Test nonpositive or increasing deltas are rejected."""
        with pytest.raises(InputError):
            strong_domination_check(_l1, _l1, [0], [[1]])
        with pytest.raises(InputError):
            strong_domination_check(_l1, _l1, ["1/2", 1], [[1]])


class TestEq3Check:
    """Tests for the Schreier-sum bound on block combinations."""

    def test_basis_in_tsirelson(self):
        """Test unit vectors satisfy the bound."""
        vectors = [BlockVector.basis(i) for i in range(2, 6)]
        report = eq3_check(vectors, [0, 1], [1, 1], [[1, 1, 1, 1], [1, -1]], tsirelson())
        assert report.passed
        assert report.instances == 2
        assert report.lemma == "eq3"

    def test_alpha_must_increase(self):
        """Test alpha_seq must be increasing."""
        vectors = [BlockVector.basis(i) for i in range(2, 6)]
        with pytest.raises(InputError):
            eq3_check(vectors, [1, 1], [1, 1], [[1]], tsirelson())

    def test_lengths_must_match(self):
        """Test alpha_seq and delta_seq pair up."""
        vectors = [BlockVector.basis(i) for i in range(2, 6)]
        with pytest.raises(InputError):
            eq3_check(vectors, [0, 1], [1], [[1]], tsirelson())
