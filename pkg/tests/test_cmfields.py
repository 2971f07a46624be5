"""
Tests for quadratic field arithmetic, class groups, coset systems and local lattices
"""

import pytest
from sympy import Rational

from src.core.errors import CaseMismatch, Falsified, HypothesisViolated, InvalidD, SingularBasis
from src.heegner.cmfields import (INERT, P_DIVIDES_C, ImagQuadField, PadicLatticeBasis, QuadFormClass,
                                  check_case, class_number, conductor_raise_cosets, cosets_distinct_check,
                                  lattice_equal_at_p, prime_splitting, ramification_profile, reduced_forms,
                                  verify_sj_lattices)


class TestImagQuadField:
    """Test field construction and element arithmetic"""

    def test_discriminants(self):
        assert ImagQuadField(-2).dK == -8
        assert ImagQuadField(-7).dK == -7
        assert ImagQuadField(-1).dK == -4

    def test_invalid_d(self):
        with pytest.raises(InvalidD):
            ImagQuadField(5)
        with pytest.raises(InvalidD):
            ImagQuadField(-4)

    def test_theta_minimal_polynomials(self, q_sqrt_m2, q_sqrt_m7):
        assert q_sqrt_m2.theta_minpoly() == (1, 0, 2)
        assert q_sqrt_m7.theta_minpoly() == (1, 1, 2)
        theta = q_sqrt_m7.theta
        assert theta * theta + theta + 2 == q_sqrt_m7.element(0)

    def test_element_arithmetic(self, q_sqrt_m2):
        t = q_sqrt_m2.tau_k
        assert t * t == q_sqrt_m2.element(-2)
        assert (t + 1).norm() == 3
        assert ((t + 1) / (t + 1)) == q_sqrt_m2.element(1)
        assert (t / 3).is_integral() is False

    def test_numeric_embedding(self, q_sqrt_m7):
        value = q_sqrt_m7.theta.to_big(200)
        assert (value * value + value + 2).is_zero(slack=4)


class TestSplittingAndForms:
    """Test prime decomposition and class numbers"""

    def test_prime_splitting(self, q_sqrt_m2):
        assert prime_splitting(5, q_sqrt_m2) == "inert"
        assert prime_splitting(3, q_sqrt_m2) == "split"
        assert prime_splitting(2, q_sqrt_m2) == "ramified"

    def test_splitting_needs_prime(self, q_sqrt_m2):
        with pytest.raises(ValueError):
            prime_splitting(9, q_sqrt_m2)

    def test_reduced_forms(self):
        forms = reduced_forms(-20)
        assert forms == [QuadFormClass(1, 0, 5), QuadFormClass(2, 2, 3)]
        assert forms[0].is_principal()

    def test_class_numbers(self):
        assert class_number(-8) == 1
        assert class_number(-7) == 1
        assert class_number(-8, 3) == 2
        assert class_number(-8, 5) == 6
        assert class_number(-23) == 3

    def test_bad_discriminant(self):
        with pytest.raises(ValueError):
            reduced_forms(-6)


class TestCosets:
    """Test coset representatives and their distinctness"""

    def test_inert_cosets_for_sqrt_minus_two(self, q_sqrt_m2):
        reps = conductor_raise_cosets(q_sqrt_m2, 1, 5, INERT, q_sqrt_m2.tau_k)
        report = cosets_distinct_check(reps, 5, INERT)
        assert report["verdict"] == "verified"
        assert report["classes"] == 6
        assert report["quotient_order"] == 6

    def test_inert_cosets_for_minus_seven(self, q_sqrt_m7):
        reps = conductor_raise_cosets(q_sqrt_m7, 1, 3, INERT, q_sqrt_m7.tau_k)
        report = cosets_distinct_check(reps, 3, INERT)
        assert report["verdict"] == "verified"
        assert report["classes"] == 4

    def test_p_divides_c_cosets(self, q_sqrt_m2):
        tau_prime = q_sqrt_m2.tau_k / 3
        reps = conductor_raise_cosets(q_sqrt_m2, 3, 3, P_DIVIDES_C, tau_prime)
        report = cosets_distinct_check(reps, 3, P_DIVIDES_C, c=3)
        assert report["verdict"] == "verified"
        assert report["classes"] == 3
        assert report["in_order_p_n"]

    def test_repeated_representative_is_falsified(self, q_sqrt_m2):
        reps = conductor_raise_cosets(q_sqrt_m2, 1, 5, INERT, q_sqrt_m2.tau_k)
        reps[1] = reps[0] * 2
        assert cosets_distinct_check(reps, 5, INERT)["verdict"] == "falsified"

    def test_case_mismatch(self, q_sqrt_m2):
        with pytest.raises(CaseMismatch):
            check_case(q_sqrt_m2, 1, 3, INERT)
        with pytest.raises(CaseMismatch):
            check_case(q_sqrt_m2, 1, 5, P_DIVIDES_C)
        # N(1 + tauK) = 3
        with pytest.raises(CaseMismatch):
            check_case(q_sqrt_m2, 3, 3, P_DIVIDES_C, a=1)

    def test_tau_prime_conductor_must_match(self, q_sqrt_m2):
        with pytest.raises(CaseMismatch):
            conductor_raise_cosets(q_sqrt_m2, 3, 5, INERT, q_sqrt_m2.tau_k)


class TestLocalLattices:
    """Test the s_j lattice identities"""

    def test_equal_at_p(self):
        B1 = PadicLatticeBasis([[1, 0], [0, 1]], 5)
        B2 = PadicLatticeBasis([[2, 0], [0, 3]], 5)
        B3 = PadicLatticeBasis([[5, 0], [0, 1]], 5)
        assert lattice_equal_at_p(B1, B2)
        assert not lattice_equal_at_p(B1, B3)

    def test_singular_basis(self):
        with pytest.raises(SingularBasis):
            PadicLatticeBasis([[1, 2], [2, 4]], 5)

    def test_inert_identities(self, q_sqrt_m2):
        report = verify_sj_lattices(q_sqrt_m2, 1, 0, 5, INERT, N=4)
        assert report["verdict"] == "verified"
        assert len(report["records"]) == 6

    def test_p_divides_c_identities(self, q_sqrt_m2):
        report = verify_sj_lattices(q_sqrt_m2, 3, 0, 3, P_DIVIDES_C)
        assert report["verdict"] == "verified"
        assert len(report["records"]) == 3

    def test_wrong_multiplier_fails(self, q_sqrt_m2):
        report = verify_sj_lattices(q_sqrt_m2, 1, 0, 5, INERT, N=4, multiplier="tau")
        assert report["verdict"] == "falsified"
        assert report["failed_j"]

    def test_wrong_multiplier_strict(self, q_sqrt_m2):
        with pytest.raises(Falsified):
            verify_sj_lattices(q_sqrt_m2, 1, 0, 5, INERT, N=4, multiplier="tau", strict=True)

    def test_index_condition_recorded(self, q_sqrt_m2):
        # 5 is not 1 mod 3
        report = verify_sj_lattices(q_sqrt_m2, 1, 0, 5, INERT, N=3)
        assert report["records"][-1]["index_fixed_mod_N"] is False
        assert report["verdict"] == "falsified"


class TestRamification:
    """Test splitting in the ring class field of level N"""

    def test_degree_of_raise(self, q_sqrt_m2):
        assert ramification_profile(q_sqrt_m2, 1, 5, 4) == (True, 6)
        assert ramification_profile(q_sqrt_m2, 1, 13, 4) == (True, 14)

    def test_split_prime_rejected(self, q_sqrt_m2):
        with pytest.raises(HypothesisViolated):
            ramification_profile(q_sqrt_m2, 1, 3, 4)

    def test_prime_not_one_mod_n_rejected(self, q_sqrt_m2):
        with pytest.raises(HypothesisViolated):
            ramification_profile(q_sqrt_m2, 1, 7, 4)

    def test_rational_valuation_helpers(self):
        from src.heegner.cmfields import p_valuation
        assert p_valuation(Rational(25, 3), 5) == 2
        assert p_valuation(Rational(2, 125), 5) == -3
