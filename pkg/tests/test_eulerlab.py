"""
Tests for CM point evaluation, T_p fibers and the distribution checks
"""

import random

import pytest
from mpmath import mp, mpc
from sympy import Poly

from src.core.errors import (CaseMismatch, DegenerateLevel, HypothesisViolated, InsufficientPrecision,
                             MissingBetaQ)
from src.heegner.cmfields import INERT, P_DIVIDES_C
from src.heegner.eulerlab import (X, CMPointSpec, DistributionInstance, algebraicity_evidence, build_instance,
                                  degree_bound, diamond_point, elementary_symmetric, eval_point, fiber_targets,
                                  gamma1_invariance_check, j_consistency, min_poly_guess, tp_fiber,
                                  verify_distribution)
from src.heegner.numkernel import BigComplex, j_invariant, working_precision

B = 200


class TestCMPointSpec:
    """Test CM point specs and distribution instances"""

    def test_tau_prime(self):
        spec = CMPointSpec(-2, 3, 1, 4)
        assert spec.tau_prime == (spec.field.tau_k + 1) / 3
        assert spec.cache_key(300) == (-2, 4, 3, 1, 300)

    def test_degenerate_level(self):
        with pytest.raises(DegenerateLevel):
            CMPointSpec(-2, 1, 0, 3)

    def test_conductor_prime_to_level(self):
        with pytest.raises(HypothesisViolated):
            CMPointSpec(-2, 2, 0, 4)

    def test_case_inference(self):
        assert build_instance(-2, 4, 3, 0, 3).case_tag == P_DIVIDES_C
        assert build_instance(-2, 4, 1, 0, 5).case_tag == INERT

    def test_inert_needs_p_one_mod_n(self):
        with pytest.raises(CaseMismatch):
            DistributionInstance(CMPointSpec(-2, 1, 0, 4), 3, INERT)
        with pytest.raises(CaseMismatch):
            build_instance(-2, 7, 1, 0, 5, INERT)

    def test_p_divides_c_excludes_level(self):
        # 3 | N
        with pytest.raises(HypothesisViolated):
            build_instance(-2, 6, 3, 0, 3)
        with pytest.raises(CaseMismatch):
            build_instance(-7, 4, 7, 0, 7)

    def test_fiber_sizes(self):
        assert build_instance(-2, 4, 1, 0, 5).fiber_size == 6
        assert build_instance(-2, 4, 3, 0, 3).fiber_size == 3

    def test_degree_bound(self, q_sqrt_m2):
        assert degree_bound(q_sqrt_m2, 1, 4) == 8


class TestEvalPoint:
    """Test P_tau and the raw-form residual"""

    def test_level_eleven_lies_on_model(self):
        point = eval_point(CMPointSpec(-7, 1, 0, 11), 300)
        assert point.residual.distance_log2(0) < -200
        assert point.err_exp < -250

    def test_error_radius_covers_higher_precision(self):
        low = eval_point(CMPointSpec(-7, 1, 0, 11), 300)
        high = eval_point(CMPointSpec(-7, 1, 0, 11), 600)
        assert low.b_val.distance_log2(high.b_val) <= low.b_val.err_exp
        assert low.c_val.distance_log2(high.c_val) <= low.c_val.err_exp

    def test_level_four_has_c_zero(self):
        point = eval_point(CMPointSpec(-2, 1, 0, 4), B)
        assert point.c_val.is_zero(slack=16)
        assert not point.b_val.is_zero()

    def test_distance_to_itself(self):
        point = eval_point(CMPointSpec(-2, 1, 0, 4), B)
        assert point.distance_log2(point) == float("-inf")
        assert point.distance_log2(point) < -(B - 60)

    def test_translation_invariance(self, q_sqrt_m2):
        tau = q_sqrt_m2.tau_k
        first = eval_point(tau, B, N=5)
        second = eval_point(tau + 1, B, N=5)
        assert first.agrees_with(second, slack=16)

    def test_bare_tau_needs_level(self, q_sqrt_m2):
        with pytest.raises(ValueError):
            eval_point(q_sqrt_m2.tau_k, B)

    def test_level_beyond_cap_has_no_residual(self):
        point = eval_point(CMPointSpec(-2, 1, 0, 5), B, max_level=4)
        assert point.residual is None

    def test_diamond_identity(self):
        spec = CMPointSpec(-2, 1, 0, 5)
        assert diamond_point(spec, 1, B).agrees_with(eval_point(spec, B), slack=8)
        # <-1> acts trivially on (E, P)
        assert diamond_point(spec, 4, B).agrees_with(eval_point(spec, B), slack=8)

    def test_diamond_needs_unit(self):
        with pytest.raises(HypothesisViolated):
            diamond_point(CMPointSpec(-2, 1, 0, 4), 2, B)

    def test_j_consistency(self):
        spec = CMPointSpec(-7, 1, 0, 5)
        point = eval_point(spec, B)
        assert j_consistency(point, spec.tau_prime, B)["verdict"] == "verified"


class TestFiber:
    """Test T_p fibers"""

    def test_inert_fiber(self):
        fiber = tp_fiber(build_instance(-2, 4, 1, 0, 5), B)
        assert len(fiber) == 6
        assert fiber.diamond is None
        assert all(pt.residual.is_zero(slack=16) for pt in fiber.points)

    def test_p_divides_c_fiber(self):
        instance = build_instance(-2, 4, 3, 0, 3)
        targets = fiber_targets(instance)
        assert targets[-1][1] == (0, 3)
        fiber = tp_fiber(instance, B)
        assert len(fiber) == 3
        assert fiber.diamond is not None
        assert len(fiber.all_points()) == 4


class TestMinPolyGuess:
    """Test integer-relation recognition"""

    def test_golden_ratio(self):
        with working_precision(600):
            phi = (1 + mp.sqrt(5)) / 2
        poly = min_poly_guess(BigComplex.exact(phi, 600), 4)
        assert poly == Poly(X ** 2 - X - 1, X)

    def test_rational_j_invariant(self):
        with working_precision(664):
            theta = mpc(-0.5, 0) + mpc(0, mp.sqrt(7)) / 2
        j = j_invariant(theta, 600)
        assert min_poly_guess(j, 2) == Poly(X + 3375, X)

    def test_pi_is_not_recognized(self):
        with working_precision(600):
            value = BigComplex.exact(mp.pi, 600)
        assert min_poly_guess(value, 4) is None

    def test_zero(self):
        assert min_poly_guess(BigComplex.exact(0, 600), 4) == Poly(X, X)

    def test_insufficient_precision(self):
        with pytest.raises(InsufficientPrecision):
            min_poly_guess(BigComplex(mpc("1.5"), -100, 300), 4)

    def test_evidence_reports_insufficient_precision(self, q_sqrt_m2):
        report = algebraicity_evidence(eval_point(q_sqrt_m2.tau_k, B, N=5), 8, B)
        assert report["verdict"] == "inconclusive"
        assert report["attempts"][0]["records"][0]["status"] == "insufficient-precision"

    def test_elementary_symmetric(self):
        values = [BigComplex.exact(v, 200) for v in (1, 2, 3)]
        e1, e2, e3 = elementary_symmetric(values)
        assert e1.agrees_with(6) and e2.agrees_with(11) and e3.agrees_with(6)


class TestInvariance:
    """Test Gamma1(N) invariance with a negative control"""

    def test_gamma1_matrices(self):
        report = gamma1_invariance_check(5, [mpc("0.1", "1.2")], [((1, 1), (0, 1)), ((6, 1), (5, 1))], B)
        assert report["verdict"] == "verified"
        assert all(r["inGamma1"] for r in report["records"])

    @pytest.mark.parametrize("N", [4, 5, 7, 11])
    def test_level_generators(self, N):
        rng = random.Random(N)
        taus = [mpc(rng.uniform(-0.5, 0.5), rng.uniform(0.7, 1.5)) for _ in range(5)]
        report = gamma1_invariance_check(N, taus, [((1, 1), (0, 1)), ((1, 0), (N, 1))], 300)
        assert report["verdict"] == "verified"
        assert report["maxMatchError"] < -200

    def test_gamma0_element_moves_the_point(self):
        report = gamma1_invariance_check(5, [mpc("0.1", "1.2")], [((2, 1), (5, 3))], B)
        assert report["verdict"] == "falsified"
        assert not report["records"][0]["inGamma1"]

    def test_inversion_is_not_invariant(self):
        report = gamma1_invariance_check(5, [mpc("0.1", "1.2")], [((0, -1), (1, 0))], B)
        assert report["verdict"] == "falsified"
        assert not report["records"][0]["inGamma1"]


class TestVerifyDistribution:
    """Test the layered distribution relation check"""

    def test_p_divides_c_record_mode(self):
        report = verify_distribution(build_instance(-2, 4, 3, 0, 3), B, escalation=())
        assert report["verdict"] == "verified"
        assert report["fiberSize"] == 3
        assert report["diamondPoint"] is not None
        assert report["layers"]["lattice"]["verdict"] == "verified"
        assert report["layers"]["cosets"]["count_matches"]
        assert report["layers"]["divisor"]["mode"] == "record"

    def test_orbit_mode_needs_beta_data(self):
        with pytest.raises(MissingBetaQ):
            verify_distribution(build_instance(-7, 4, 1, 0, 5), B, mode="orbit", escalation=())

    def test_orbit_mode_supports_discriminant_minus_eight(self):
        with pytest.raises(MissingBetaQ) as exc:
            verify_distribution(build_instance(-2, 4, 1, 0, 5), B, mode="orbit", escalation=())
        assert exc.value.details["form"]["a"] > 1

    def test_orbit_mode_hypotheses(self):
        with pytest.raises(HypothesisViolated):
            verify_distribution(build_instance(-3, 4, 1, 0, 5), B, mode="orbit", escalation=())
        with pytest.raises(HypothesisViolated):
            verify_distribution(build_instance(-7, 4, 3, 0, 5), B, mode="orbit", escalation=())

    @pytest.mark.slow
    def test_inert_symmetric_mode(self):
        report = verify_distribution(build_instance(-2, 4, 1, 0, 5), 300)
        divisor = report["layers"]["divisor"]
        assert report["verdict"] == "verified"
        assert divisor["precBits"] == 2400
        assert divisor["heightBits"] == 160
        assert all(r["status"] == "recognized" and r["degree"] <= 8 for r in divisor["records"])
        e1 = next(r for r in divisor["records"] if r["name"] == "e1(b)")
        assert e1["degree"] == 4
        assert divisor["member"]["status"] == "not-recognized"

    @pytest.mark.slow
    def test_symmetric_mode_at_height_two_to_the_64(self):
        report = verify_distribution(build_instance(-2, 4, 1, 0, 5), 1200, height_bound=2 ** 64, escalation=())
        divisor = report["layers"]["divisor"]
        assert divisor["verdict"] == "falsified"
        e1 = next(r for r in divisor["records"] if r["name"] == "e1(b)")
        assert e1["status"] == "not-recognized"

    @pytest.mark.slow
    def test_replaced_point_is_falsified(self):
        report = verify_distribution(build_instance(-2, 4, 1, 0, 5), 300, replace_position=2)
        assert report["verdict"] == "falsified"
        assert report["layers"]["divisor"]["verdict"] == "falsified"
