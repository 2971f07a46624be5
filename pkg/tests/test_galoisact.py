"""
Tests for the matrix-level Galois action on (b, c)
"""

import json

import pytest

from src.core.errors import CaseMismatch, HypothesisViolated, InvalidC, MissingBetaQ, UsageError
from src.heegner.cmfields import ImagQuadField, QuadFormClass
from src.heegner.galoisact import (FrickeIndex, GaloisElement, WMatrix, act_index, composition_check, galois_orbit,
                                   is_g_n_type, load_beta_data, match_points, orbit_stability_check,
                                   point_under_matrix, vienna_act, w_group)
from src.heegner.points import tate_parameters

B = 200


class TestWGroup:
    """Test W_{N,theta} modulo +-1"""

    def test_order_for_level_three(self, q_sqrt_m2):
        group = w_group(3, q_sqrt_m2)
        assert len(group) == 2
        assert group[0].is_identity()

    def test_keys_for_level_four(self, q_sqrt_m2):
        keys = [m.key() for m in w_group(4, q_sqrt_m2)]
        assert keys == [(1, 0), (1, 1), (1, 2), (1, 3)]

    def test_closed_under_products(self, q_sqrt_m7):
        group = w_group(5, q_sqrt_m7)
        # 5 is inert in Q(sqrt -7): F_25^x / {+-1}
        assert len(group) == 12
        keys = {m.key() for m in group}
        for m1 in group:
            for m2 in group:
                product = m1 * m2
                assert product.is_invertible()
                assert product.key() in keys

    def test_matrix_is_multiplication_by_element(self, q_sqrt_m7):
        m = WMatrix(2, 1, 5, q_sqrt_m7)
        assert m.element() == q_sqrt_m7.element(2) + q_sqrt_m7.theta
        assert act_index(FrickeIndex(0, 1, 5), m).as_tuple() == (1, 2)
        assert not is_g_n_type(m)
        assert is_g_n_type(WMatrix(3, 0, 5, q_sqrt_m7))

    def test_sign_classes_are_equal(self, q_sqrt_m7):
        assert WMatrix(2, 1, 5, q_sqrt_m7) == WMatrix(3, 4, 5, q_sqrt_m7)

    def test_level_too_small(self, q_sqrt_m7):
        with pytest.raises(ValueError):
            w_group(1, q_sqrt_m7)


class TestIndexAction:
    """Test the right action on (1/N)Z^2 / Z^2"""

    def test_identity_fixes_index(self):
        r = FrickeIndex(2, 3, 7)
        assert act_index(r, ((1, 0), (0, 1))) == r

    def test_action_is_compatible_with_products(self):
        r = FrickeIndex(1, 4, 7)
        m1 = ((2, 1), (1, 1))
        m2 = ((3, 5), (1, 2))
        product = ((2 * 3 + 1 * 1, 2 * 5 + 1 * 2), (1 * 3 + 1 * 1, 1 * 5 + 1 * 2))
        assert act_index(act_index(r, m1), m2) == act_index(r, product)

    def test_singular_matrix_rejected(self):
        with pytest.raises(ValueError):
            act_index(FrickeIndex(0, 1, 6), ((2, 0), (0, 1)))


class TestGaloisElement:
    """Test (alpha, Q) pairs and beta_Q data"""

    def test_non_principal_form_needs_beta(self):
        field = ImagQuadField(-23)
        g = GaloisElement(WMatrix(1, 0, 5, field), QuadFormClass(2, 1, 3))
        with pytest.raises(MissingBetaQ):
            g.combined_matrix()

    def test_beta_is_composed_after_alpha(self):
        field = ImagQuadField(-23)
        g = GaloisElement(WMatrix(1, 0, 5, field), QuadFormClass(2, 1, 3), beta_q=((1, 1), (0, 1)))
        assert g.combined_matrix() == ((1, 1), (0, 1))

    def test_form_must_match_field(self, q_sqrt_m7):
        with pytest.raises(ValueError):
            GaloisElement(WMatrix(1, 0, 5, q_sqrt_m7), QuadFormClass(2, 1, 3))

    def test_load_beta_data(self, tmp_path):
        path = tmp_path / "beta.json"
        path.write_text(json.dumps({"lift": [[1, 0], [0, 1]],
                                    "classes": [{"form": [2, 1, 3], "matrix": [[1, 2], [0, 1]]}]}))
        data = load_beta_data(path, 5)
        assert data == {"2,1,3": ((1, 2), (0, 1))}

    def test_malformed_beta_data(self, tmp_path):
        path = tmp_path / "beta.json"
        path.write_text(json.dumps({"classes": [{"matrix": [[1, 0], [0, 1]]}]}))
        with pytest.raises(UsageError):
            load_beta_data(path, 5)
        with pytest.raises(UsageError):
            load_beta_data(tmp_path / "missing.json", 5)


class TestPointUnderMatrix:
    """Test numeric evaluation of the action at theta"""

    def test_small_discriminants_rejected(self):
        for D in (-1, -3):
            field = ImagQuadField(D)
            with pytest.raises(HypothesisViolated):
                point_under_matrix(GaloisElement(WMatrix(1, 0, 5, field)), 5, B)

    def test_discriminant_minus_eight_is_supported(self, q_sqrt_m2):
        point = point_under_matrix(GaloisElement(WMatrix(1, 1, 4, q_sqrt_m2)), 4, B)
        b_val, c_val = tate_parameters(q_sqrt_m2.theta, 4, B, (1, 1))
        assert point.index == (1, 1)
        assert point.b_val.agrees_with(b_val, slack=8)

    def test_only_theta_is_accepted(self, q_sqrt_m7):
        with pytest.raises(CaseMismatch):
            point_under_matrix(GaloisElement(WMatrix(1, 0, 5, q_sqrt_m7)), 5, B, tau=q_sqrt_m7.tau_k * 2)

    def test_identity_is_the_base_point(self, q_sqrt_m7):
        point = point_under_matrix(GaloisElement(WMatrix(1, 0, 5, q_sqrt_m7)), 5, B)
        b_val, c_val = tate_parameters(q_sqrt_m7.theta, 5, B)
        assert point.b_val.agrees_with(b_val, slack=8)
        assert point.c_val.agrees_with(c_val, slack=8)

    def test_vienna_matches_matrix_action(self, q_sqrt_m7):
        C = q_sqrt_m7.element(2) + q_sqrt_m7.theta
        by_element = vienna_act(C, q_sqrt_m7.theta, 5, B)
        by_matrix = point_under_matrix(GaloisElement(WMatrix(2, 1, 5, q_sqrt_m7)), 5, B)
        assert by_element.distance_log2(by_matrix) < -(B - 60)

    def test_vienna_trivial_class(self, q_sqrt_m7):
        base = vienna_act(q_sqrt_m7.element(1), q_sqrt_m7.theta, 5, B)
        shifted = vienna_act(q_sqrt_m7.theta * 5 + 1, q_sqrt_m7.theta, 5, B)
        assert base.agrees_with(shifted, slack=16)

    def test_vienna_invalid_c(self, q_sqrt_m7):
        theta = q_sqrt_m7.theta
        with pytest.raises(InvalidC):
            vienna_act(theta / 2, theta, 5, B)
        with pytest.raises(InvalidC):
            vienna_act(q_sqrt_m7.element(5), theta, 5, B)
        with pytest.raises(InvalidC):
            vienna_act(q_sqrt_m7.tau_k, theta, 5, B, conductor=2)

    def test_vienna_on_scalar_elements(self, q_sqrt_m2):
        theta = q_sqrt_m2.theta
        for m in w_group(4, q_sqrt_m2):
            if not is_g_n_type(m):
                continue
            point = vienna_act(q_sqrt_m2.element(m.t), theta, 4, 300)
            b_val, c_val = tate_parameters(theta, 4, 300, (0, m.t))
            assert point.b_val.distance_log2(b_val) < -240

    def test_vienna_against_matrix_action_level_four(self, q_sqrt_m2):
        theta = q_sqrt_m2.theta
        for t in (1, 3):
            by_element = vienna_act(q_sqrt_m2.element(t), theta, 4, 300)
            by_matrix = point_under_matrix(GaloisElement(WMatrix(t, 0, 4, q_sqrt_m2)), 4, 300)
            assert by_element.distance_log2(by_matrix) < -240
        identity = vienna_act(q_sqrt_m2.element(5), theta, 4, 300)
        base = point_under_matrix(GaloisElement(WMatrix(1, 0, 4, q_sqrt_m2)), 4, 300)
        assert identity.distance_log2(base) < -240

    def test_composition(self, q_sqrt_m7):
        report = composition_check(WMatrix(2, 1, 5, q_sqrt_m7), WMatrix(1, 1, 5, q_sqrt_m7), B)
        assert report["verdict"] == "verified"
        assert report["indexEqual"]


class TestOrbit:
    """Test orbit stability and matching"""

    def test_orbit_is_stable_and_distinct(self, q_sqrt_m7):
        report = orbit_stability_check(q_sqrt_m7, 4, B)
        assert report["verdict"] == "verified"
        assert report["orbitSize"] == 2
        assert report["pairwiseDistinct"]

    def test_orbit_over_q_sqrt_m2(self, q_sqrt_m2):
        report = orbit_stability_check(q_sqrt_m2, 4, B)
        assert report["verdict"] == "verified"
        assert report["orbitSize"] == 4
        assert report["pairwiseDistinct"]

    def test_orbit_order(self, q_sqrt_m7):
        orbit = galois_orbit(q_sqrt_m7, 4, B)
        assert orbit[0][0].is_identity()

    def test_size_mismatch(self, q_sqrt_m7):
        orbit = [pt for _, pt in galois_orbit(q_sqrt_m7, 4, B)]
        result = match_points(orbit, orbit[:1], -60)
        assert not result["matched"]
        assert result["reason"] == "size mismatch"
