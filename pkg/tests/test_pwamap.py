"""Map construction, branch evaluation, fixed points, and classification."""

import numpy as np
import pytest

from helpers import pentagon_map, random_map, PENTAGON_TEXT
from lenschain import smallmat
from lenschain.pwamap import (
    BorderCollisionClass,
    ContinuityError,
    PwaMap,
    UnitMultiplierError,
    apply_branch,
    classify_border_collision,
    evaluate,
    fixed_point,
    format_map_config,
    is_homeomorphism,
    parse_map_config,
    parse_number,
    rho,
)


class TestConstruction:
    def test_continuity_enforced_exactly(self):
        a_l = np.array([[1.0, 2.0], [3.0, 4.0]])
        a_r = np.array([[9.0, 2.0 + 1e-14], [3.0, 4.0]])
        with pytest.raises(ContinuityError):
            PwaMap(a_l, a_r, np.zeros(2))

    def test_identical_shared_columns_accepted(self):
        a_l = np.array([[1.0, 2.0], [3.0, 4.0]])
        a_r = np.array([[9.0, 2.0], [-1.0, 4.0]])
        pwa = PwaMap(a_l, a_r, np.zeros(2))
        assert pwa.N == 2

    def test_shape_checks(self):
        with pytest.raises(ValueError):
            PwaMap(np.eye(2), np.eye(3), np.zeros(2))
        with pytest.raises(ValueError):
            PwaMap(np.eye(2), np.eye(2), np.zeros(3))


class TestEvaluate:
    def test_branches_agree_on_manifold(self):
        rng = np.random.default_rng(20)
        for _ in range(30):
            pwa = random_map(rng, 3)
            x = rng.normal(size=3)
            x[0] = 0.0
            left = apply_branch(pwa, 1.0, "L", x)
            right = apply_branch(pwa, 1.0, "R", x)
            assert np.array_equal(left, right)

    def test_zero_matrices(self):
        pwa = PwaMap(np.zeros((2, 2)), np.zeros((2, 2)), np.array([2.0, -1.0]))
        assert np.array_equal(evaluate(pwa, 0.5, np.array([3.0, 4.0])),
                              np.array([1.0, -0.5]))

    def test_scaling_symmetry(self):
        rng = np.random.default_rng(21)
        for lam in (0.5, 2.0, 10.0):
            for _ in range(20):
                pwa = random_map(rng, 3)
                mu = float(rng.normal())
                x = rng.normal(size=3)
                lhs = evaluate(pwa, lam * mu, lam * x)
                rhs = lam * evaluate(pwa, mu, x)
                assert np.allclose(lhs, rhs, rtol=1e-14, atol=1e-14)

    def test_forced_branch_matches_evaluate_on_correct_side(self):
        rng = np.random.default_rng(22)
        pwa = random_map(rng, 2)
        x = np.array([-1.0, 0.3])
        assert np.array_equal(apply_branch(pwa, 1.0, "L", x),
                              evaluate(pwa, 1.0, x))
        assert not np.array_equal(apply_branch(pwa, 1.0, "R", x),
                                  evaluate(pwa, 1.0, x))


class TestRho:
    def test_zero_matrices_give_first_basis_vector(self):
        pwa = PwaMap(np.zeros((3, 3)), np.zeros((3, 3)), np.zeros(3))
        assert np.allclose(rho(pwa), np.array([1.0, 0.0, 0.0]))

    def test_two_by_two_cofactor_formula(self):
        # first row of adj(I - A) for A = [[a, b], [c, d]] is (1 - d, b)
        a, b, c, d = 0.3, -0.7, 0.2, 0.5
        a_l = np.array([[a, b], [c, d]])
        a_r = a_l.copy()
        a_r[:, 0] = [1.1, -0.4]
        pwa = PwaMap(a_l, a_r, np.array([1.0, 0.0]))
        assert np.allclose(rho(pwa), np.array([1.0 - d, b]), atol=1e-14)

    def test_shared_between_branches(self):
        rng = np.random.default_rng(23)
        for _ in range(100):
            pwa = random_map(rng, int(rng.integers(2, 6)))
            eye = np.eye(pwa.N)
            row_l = smallmat.adjugate(eye - pwa.A_L)[0]
            row_r = smallmat.adjugate(eye - pwa.A_R)[0]
            scale = max(1.0, np.max(np.abs(row_l)))
            assert np.max(np.abs(row_l - row_r)) <= 1e-10 * scale


class TestFixedPoint:
    def test_zero_matrix_unit_offset(self):
        pwa = PwaMap(np.zeros((2, 2)), np.zeros((2, 2)), np.array([1.0, 0.0]))
        rep_r = fixed_point(pwa, 1.0, "R")
        assert np.allclose(rep_r.point, [1.0, 0.0])
        assert rep_r.s_star == pytest.approx(1.0)
        assert rep_r.admissible
        rep_l = fixed_point(pwa, 1.0, "L")
        assert not rep_l.admissible

    def test_two_expressions_for_s_agree(self):
        rng = np.random.default_rng(24)
        count = 0
        while count < 100:
            pwa = random_map(rng, int(rng.integers(2, 6)))
            mu = float(rng.normal())
            eye = np.eye(pwa.N)
            for side in ("L", "R"):
                a = pwa.branch(side)
                if smallmat.is_singular(eye - a):
                    continue
                rep = fixed_point(pwa, mu, side)
                direct = mu * float(rho(pwa) @ pwa.b) / rep.det_IminusA
                assert abs(rep.s_star - direct) <= 1e-10 * max(1.0, abs(direct))
                count += 1

    def test_mu_zero_collapses_to_origin(self):
        rng = np.random.default_rng(25)
        pwa = random_map(rng, 3)
        rep = fixed_point(pwa, 0.0, "L")
        assert np.allclose(rep.point, 0.0)
        assert not rep.admissible

    def test_unit_multiplier_error(self):
        pwa = PwaMap(np.eye(2), np.eye(2), np.array([1.0, 0.0]))
        with pytest.raises(UnitMultiplierError):
            fixed_point(pwa, 1.0, "L")


class TestClassification:
    def test_contracting_pair_persists(self):
        pwa = PwaMap(np.zeros((2, 2)), np.zeros((2, 2)), np.array([1.0, 0.0]))
        assert classify_border_collision(pwa) is BorderCollisionClass.PERSISTENCE

    def test_single_expanding_multiplier_folds(self):
        a_l = np.array([[2.0, 0.0], [0.0, 0.0]])
        a_r = np.zeros((2, 2))
        pwa = PwaMap(a_l, a_r, np.array([1.0, 0.0]))
        assert classify_border_collision(pwa) is BorderCollisionClass.NONSMOOTH_FOLD

    def test_two_expanding_multipliers_persist(self):
        # companion matrix with multipliers 2 and 3 on the left branch
        a_l = np.array([[5.0, -6.0], [1.0, 0.0]])
        a_r = np.array([[0.0, -6.0], [0.0, 0.0]])
        pwa = PwaMap(a_l, a_r, np.array([1.0, 0.0]))
        assert classify_border_collision(pwa) is BorderCollisionClass.PERSISTENCE

    def test_degenerate_when_rho_b_vanishes(self):
        a_l = np.zeros((2, 2))
        pwa = PwaMap(a_l, a_l, np.array([0.0, 1.0]))  # rho.b = 0
        assert classify_border_collision(pwa) is BorderCollisionClass.DEGENERATE

    def test_admissibility_pattern_at_both_signs(self):
        # fold: both fixed points admissible for one sign of mu, neither for
        # the other; persistence: exactly one admissible at each sign
        rng = np.random.default_rng(26)
        checked = {BorderCollisionClass.PERSISTENCE: 0,
                   BorderCollisionClass.NONSMOOTH_FOLD: 0}
        while min(checked.values()) < 25:
            pwa = random_map(rng, int(rng.integers(2, 5)))
            verdict = classify_border_collision(pwa)
            if verdict is BorderCollisionClass.DEGENERATE:
                continue
            eye = np.eye(pwa.N)
            if smallmat.is_singular(eye - pwa.A_L) or \
               smallmat.is_singular(eye - pwa.A_R):
                continue
            pattern = {}
            for mu in (1.0, -1.0):
                adm = {side: fixed_point(pwa, mu, side).admissible
                       for side in "LR"}
                pattern[mu] = (adm["L"], adm["R"])
            if verdict is BorderCollisionClass.NONSMOOTH_FOLD:
                combined = sorted([pattern[1.0], pattern[-1.0]])
                assert combined == [(False, False), (True, True)]
            else:
                for mu in (1.0, -1.0):
                    assert sorted(pattern[mu]) == [False, True]
            checked[verdict] += 1


class TestHomeomorphism:
    def test_predicate_matches_constructed_collisions(self):
        # when branch determinants have opposite signs, a two-preimage
        # target can be constructed through the branch inverses
        rng = np.random.default_rng(27)
        seen_fold = 0
        seen_homeo = 0
        for _ in range(200):
            pwa = random_map(rng, 2)
            det_l = smallmat.det(pwa.A_L)
            det_r = smallmat.det(pwa.A_R)
            if abs(det_l) < 1e-6 or abs(det_r) < 1e-6:
                continue
            collision = None
            for _ in range(200):
                z = rng.normal(size=2) * 2.0
                x = np.linalg.solve(pwa.A_L, z - pwa.b)
                y = np.linalg.solve(pwa.A_R, z - pwa.b)
                if x[0] < -1e-9 and y[0] > 1e-9:
                    collision = (x, y)
                    break
            if is_homeomorphism(pwa):
                assert collision is None
                seen_homeo += 1
            elif collision is not None:
                x, y = collision
                assert np.allclose(evaluate(pwa, 1.0, x), evaluate(pwa, 1.0, y),
                                   atol=1e-9)
                seen_fold += 1
        assert seen_homeo >= 50 and seen_fold >= 20


class TestConfigFormat:
    def test_fractions(self):
        assert parse_number("28/87") == 28.0 / 87.0
        assert parse_number("-23/14") == -23.0 / 14.0
        assert parse_number("1.5") == 1.5

    def test_reference_map_round_trips_exactly(self):
        pwa, mu = parse_map_config(PENTAGON_TEXT)
        assert mu == 1.0
        reference = pentagon_map()
        assert np.array_equal(pwa.A_L, reference.A_L)
        assert np.array_equal(pwa.A_R, reference.A_R)
        text = format_map_config(pwa, mu)
        again, mu2 = parse_map_config(text)
        assert mu2 == mu
        assert np.array_equal(again.A_L, pwa.A_L)
        assert np.array_equal(again.A_R, pwa.A_R)
        assert np.array_equal(again.b, pwa.b)

    def test_missing_key(self):
        with pytest.raises(ValueError):
            parse_map_config("N = 2\nA_L = 1,0,0,1\n")
