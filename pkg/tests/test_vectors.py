"""Test finitely supported vectors."""

from fractions import Fraction

import pytest

from src.errors import InputError
from src.vectors import BlockVector, is_block_sequence, linear_combination


class TestBlockVector:
    """Tests for BlockVector."""

    def test_from_mapping_sorts_and_drops_zeros(self):
        """Test entries are sorted by index and zeros are dropped."""
        x = BlockVector.from_mapping({"5": "1/2", 3: 1, 4: 0})
        assert x.items == ((3, Fraction(1)), (5, Fraction(1, 2)))
        assert x.support == (3, 5)
        assert x.minsupp == 3
        assert x.maxsupp == 5
        assert x.range == (3, 5)

    def test_rejects_bad_indices(self):
        """Test nonpositive or non-integer indices raise InputError."""
        with pytest.raises(InputError):
            BlockVector.from_mapping({0: 1})
        with pytest.raises(InputError):
            BlockVector.from_mapping({"a": 1})

    def test_zero_vector(self):
        """Test the zero vector has no support."""
        x = BlockVector()
        assert x.is_zero
        assert x.l1() == 0
        assert x.linf() == 0
        with pytest.raises(ValueError):
            x.minsupp

    def test_norms_and_restrict(self):
        """Test l1, linf, restrict and coefficient lookup."""
        x = BlockVector.from_mapping({2: -3, 4: 1, 7: Fraction(1, 2)})
        assert x.l1() == Fraction(9, 2)
        assert x.linf() == 3
        assert x.restrict([4, 7, 9]).support == (4, 7)
        assert x.coefficient(2) == -3
        assert x.coefficient(3) == 0
        assert x.abs_items()[0] == (2, Fraction(3))

    def test_scale_and_add(self):
        """Test scaling and addition cancel coefficients."""
        x = BlockVector.ones([1, 2])
        y = BlockVector.basis(2, -1)
        assert (x + y) == BlockVector.basis(1)
        assert x.scale(0).is_zero
        assert x.scale(Fraction(1, 2)).as_dict() == {1: Fraction(1, 2), 2: Fraction(1, 2)}

    def test_json(self):
        """Test JSON uses string indices and rational strings."""
        x = BlockVector.from_mapping({3: Fraction(1, 3)})
        assert x.to_json() == {"coeffs": {"3": "1/3"}}
        assert BlockVector.from_json(x.to_json()) == x

    def test_from_json_rejects_other_shapes(self):
        """Test non-object input raises InputError."""
        with pytest.raises(InputError):
            BlockVector.from_json([1, 2])
        with pytest.raises(InputError):
            BlockVector.from_json({"coeffs": [1]})


class TestSequences:
    """Tests for linear combinations and block sequences."""

    def test_linear_combination(self):
        """Test coefficients multiply their vectors."""
        z = linear_combination([2, Fraction(1, 2)], [BlockVector.basis(1), BlockVector.ones([2, 3])])
        assert z.as_dict() == {1: 2, 2: Fraction(1, 2), 3: Fraction(1, 2)}

    def test_block_sequence(self):
        """Test successive nonzero vectors form a block sequence."""
        a, b = BlockVector.ones([1, 2]), BlockVector.ones([3])
        assert is_block_sequence([a, b])
        assert not is_block_sequence([b, a])
        assert not is_block_sequence([a, BlockVector()])
        assert not is_block_sequence([a, BlockVector.ones([2, 5])])
