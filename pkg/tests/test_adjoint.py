"""Adjoint matrices, the published-table audit and the optimal system."""

import math
import random
from fractions import Fraction

import numpy as np
import pytest

from viscosym.adjoint import (AdjointSeriesError, _exp_series, adjoint_matrices,
                              adjoint_matrix, adjoint_table, apply_adjoint,
                              audit_adjoint_table, equivalent, normalize)
from viscosym.expr import Num, ZERO, ONE, diff_atom, func, mul, sub, substitute
from viscosym.spaces import s
from viscosym.vector_fields import commutator_table


@pytest.fixture(scope="module")
def matrices():
    return adjoint_matrices()


class TestMatrices:
    def test_rotation_block(self, matrices):
        m4 = matrices[3].entries
        assert m4[0][0] == func("cos", s)
        assert m4[0][1] == func("sin", s)
        assert m4[1][0] == mul(Num(Fraction(-1)), func("sin", s))
        assert m4[1][1] == func("cos", s)
        for i in range(2, 5):
            for j in range(5):
                assert m4[i][j] == (ONE if i == j else ZERO)

    def test_central_elements_are_identity(self, matrices):
        for index in (2, 4):   # X3 and X5
            for i in range(5):
                for j in range(5):
                    assert matrices[index].entries[i][j] == (ONE if i == j else ZERO)

    def test_translation_matrices_nilpotent(self, matrices):
        m1 = matrices[0].entries
        assert m1[1][3] == s            # Ad(exp(s X1)) X4 = X4 + s X2
        m2 = matrices[1].entries
        assert m2[0][3] == mul(Num(Fraction(-1)), s)   # X4 - s X1
        for m in (m1, m2):
            others = [(i, j) for i in range(5) for j in range(5)
                      if (i, j) not in ((1, 3), (0, 3))]
            for i, j in others:
                assert m[i][j] == (ONE if i == j else ZERO)

    def test_derivative_at_zero_is_minus_ad(self, matrices):
        constants = commutator_table()
        for m in matrices:
            ad = constants.adjoint_action(m.t)
            for i in range(5):
                for j in range(5):
                    slope = substitute(diff_atom(m.entries[i][j], s), {s: ZERO})
                    assert slope == Num(-ad[i][j])

    def test_rotation_block_is_orthogonal(self, matrices):
        # M4^T * M4 = I as a symbolic identity (sin^2 + cos^2 rewrite)
        m4 = matrices[3].entries
        for i in range(5):
            for j in range(5):
                dot = ZERO
                for k in range(5):
                    dot = dot + mul(m4[k][i], m4[k][j])
                assert dot == (ONE if i == j else ZERO)

    def test_series_error_for_hyperbolic_pattern(self):
        # A^3 = +A (eigenvalues 0, +-1) is outside nilpotent and rotation forms
        boost = [[Fraction(0), Fraction(1)], [Fraction(1), Fraction(0)]]
        with pytest.raises(AdjointSeriesError):
            _exp_series(boost, s)

    def test_bad_index(self):
        with pytest.raises(Exception, match="out of range"):
            adjoint_matrix(6)


class TestAudit:
    def test_exact_mismatch_set(self):
        audit = audit_adjoint_table()
        mismatched = {(cell.t, cell.r) for cell in audit if not cell.match}
        assert mismatched == {(1, 2), (1, 4), (2, 1), (2, 4)}

    def test_rotation_row_matches(self):
        audit = {(cell.t, cell.r): cell for cell in audit_adjoint_table()}
        assert audit[(4, 1)].match
        assert audit[(4, 1)].expected_from_series == "cos(s)*X1 - sin(s)*X2"
        assert audit[(4, 2)].expected_from_series == "sin(s)*X1 + cos(s)*X2"

    def test_table_rendering(self):
        table = adjoint_table()
        assert table[2] == ["X1", "X2", "X3", "X4", "X5"]
        assert table[0][3] == "s*X2 + X4"


class TestApplyAdjoint:
    def test_quarter_turn(self, matrices):
        moved = apply_adjoint([(4, math.pi / 2)], (1, 0, 0, 0, 0), matrices)
        assert np.allclose(moved, (0, -1, 0, 0, 0), atol=1e-12)

    def test_empty_word_is_identity(self, matrices):
        v = (1.0, 2.0, 3.0, 4.0, 5.0)
        assert apply_adjoint([], v, matrices) == v

    def test_inverse_word(self, matrices):
        v = (1.0, -2.0, 0.5, 3.0, 4.0)
        moved = apply_adjoint([(1, 0.7), (1, -0.7)], v, matrices)
        assert np.allclose(moved, v, atol=1e-12)

    def test_word_is_left_to_right_matrix_product(self, matrices):
        # [(4, pi/2), (1, 1.0)] means M4(pi/2) @ M1(1.0) @ v
        v = (0.0, 0.0, 0.0, 1.0, 0.0)
        step = apply_adjoint([(1, 1.0)], v, matrices)         # X4 + X2
        expected = apply_adjoint([(4, math.pi / 2)], step, matrices)
        combined = apply_adjoint([(4, math.pi / 2), (1, 1.0)], v, matrices)
        assert np.allclose(combined, expected, atol=1e-12)

    def test_nonfinite_parameter_rejected(self, matrices):
        with pytest.raises(Exception, match="finite"):
            apply_adjoint([(1, math.inf)], (1, 0, 0, 0, 0), matrices)


class TestNormalize:
    def test_rotation_class_representative(self, matrices):
        result = normalize((0, 0, 2, 1, 3), matrices)
        assert result.cls.class_id == 3
        assert result.word == ()
        assert result.cls.c1 == pytest.approx(2.0)
        assert result.cls.c2 == pytest.approx(3.0)

    def test_plane_rotation_case(self, matrices):
        result = normalize((3, 4, 0, 0, 0), matrices)
        assert result.cls.class_id == 2
        assert result.word == ((4, -math.atan2(3, 4)),)
        assert result.scale == pytest.approx(1 / 5)
        assert result.cls.representative == pytest.approx((0, 1, 0, 0, 0))

    def test_center_class(self, matrices):
        result = normalize((0, 0, 7, 0, 2), matrices)
        assert result.cls.class_id == 4 and result.cls.label == "4"
        assert result.cls.c1 == pytest.approx(2 / 7)

    def test_scaling_only_subcase(self, matrices):
        result = normalize((0, 0, 0, 0, -4), matrices)
        assert result.cls.label == "4b"
        assert result.cls.representative == (0, 0, 0, 0, 1)

    def test_rotation_beats_translations(self, matrices):
        result = normalize((1, 1, 0, 1, 0), matrices)
        assert result.cls.class_id == 3
        moved = apply_adjoint(result.word, (1, 1, 0, 1, 0), matrices)
        rep = tuple(result.scale * c for c in moved)
        assert np.allclose(rep, result.cls.representative, atol=1e-12)

    def test_zero_vector_rejected(self, matrices):
        with pytest.raises(Exception, match="zero"):
            normalize((0, 0, 0, 0, 0), matrices)

    def test_idempotent(self, matrices):
        rng = np.random.default_rng(3)
        for _ in range(50):
            v = tuple(rng.uniform(-2, 2, size=5))
            result = normalize(v, matrices)
            again = normalize(result.cls.representative, matrices)
            assert again.word == ()
            assert again.cls.label == result.cls.label
            assert np.allclose(again.cls.representative, result.cls.representative,
                               atol=1e-12)


class TestEquivalence:
    def test_scalar_multiples(self, matrices):
        assert equivalent((1, 2, 0, 3, 4), (2, 4, 0, 6, 8), matrices=matrices)
        assert equivalent((1, 2, 0, 3, 4), (-1, -2, 0, -3, -4), matrices=matrices)

    def test_rotation_family_merges_classes_1_and_2(self, matrices):
        assert equivalent((1, 0, 0, 0, 0), (0, 1, 0, 0, 0), matrices=matrices)
        assert equivalent((1, 0, 2, 0, 1), (0, 1, 2, 0, 1), matrices=matrices)

    def test_distinct_classes(self, matrices):
        assert not equivalent((1, 0, 0, 0, 0), (0, 0, 1, 0, 0), matrices=matrices)
        assert not equivalent((0, 0, 1, 1, 0), (0, 0, 2, 1, 0), matrices=matrices)
        assert not equivalent((0, 0, 1, 0, 0), (0, 0, 0, 0, 1), matrices=matrices)

    def test_zero_vector_rejected(self, matrices):
        with pytest.raises(Exception, match="zero"):
            equivalent((0, 0, 0, 0, 0), (1, 0, 0, 0, 0), matrices=matrices)

    def test_orbit_invariance(self, matrices):
        rng = np.random.default_rng(17)
        for _ in range(40):
            v = tuple(rng.uniform(-2, 2, size=5))
            word = [(int(rng.integers(1, 6)), float(rng.uniform(-2, 2)))
                    for _ in range(3)]
            scale = float(rng.uniform(0.2, 3.0)) * (1 if rng.random() < 0.5 else -1)
            moved = tuple(scale * c for c in apply_adjoint(word, v, matrices))
            assert equivalent(v, moved, matrices=matrices, tol=1e-7)
