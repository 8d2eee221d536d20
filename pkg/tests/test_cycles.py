"""Cycle solving, admissibility, the solution-nature grid, and the
identities the rest of the package leans on."""

import numpy as np
import pytest

from helpers import random_map, random_word, tune_entry
from lenschain import smallmat
from lenschain.cycles import (
    Admissibility,
    SingularSystemError,
    NatureCell,
    admissibility,
    affine_family,
    bc_matrix,
    nth_iterate_map,
    orbit_under,
    solution_nature,
    solve_cycle,
    stability_matrix,
    stacked_system,
)
from lenschain.pwamap import PwaMap, evaluate, fixed_point
from lenschain.symseq import SymbolSequence, cyclic, flip, rotational


class TestStabilityMatrix:
    def test_single_symbol(self):
        rng = np.random.default_rng(30)
        pwa = random_map(rng, 3)
        assert np.array_equal(stability_matrix(pwa, "L"), pwa.A_L)
        assert np.array_equal(stability_matrix(pwa, "R"), pwa.A_R)

    def test_ordered_product(self):
        rng = np.random.default_rng(31)
        pwa = random_map(rng, 2)
        m = stability_matrix(pwa, "LR")  # A_{S_1} A_{S_0} = A_R A_L
        assert np.allclose(m, pwa.A_R @ pwa.A_L)

    def test_det_invariant_under_rotation(self):
        rng = np.random.default_rng(32)
        for _ in range(60):
            pwa = random_map(rng, int(rng.integers(2, 5)))
            word = SymbolSequence(random_word(rng, int(rng.integers(2, 9))))
            eye = np.eye(pwa.N)
            base = smallmat.det(eye - stability_matrix(pwa, word))
            for i in range(len(word)):
                rotated = smallmat.det(eye - stability_matrix(pwa, cyclic(word, i)))
                assert abs(rotated - base) <= 1e-8 * max(1.0, abs(base))

    def test_det_invariance_with_singular_branch(self):
        # singular left matrix: the similarity argument degenerates but the
        # determinant identity survives
        rng = np.random.default_rng(33)
        for _ in range(40):
            pwa = random_map(rng, 3)
            a_l = pwa.A_L.copy()
            a_l[:, 0] = 0.0  # det(A_L) = 0
            pwa = PwaMap(a_l, pwa.A_R, pwa.b)
            word = SymbolSequence(random_word(rng, 6))
            eye = np.eye(3)
            base = smallmat.det(eye - stability_matrix(pwa, word))
            for i in range(6):
                rotated = smallmat.det(eye - stability_matrix(pwa, cyclic(word, i)))
                assert abs(rotated - base) <= 1e-8 * max(1.0, abs(base))

    def test_first_flip_changes_only_first_column(self):
        rng = np.random.default_rng(34)
        for _ in range(40):
            pwa = random_map(rng, int(rng.integers(2, 5)))
            word = SymbolSequence(random_word(rng, int(rng.integers(1, 8))))
            m = stability_matrix(pwa, word)
            m_flip = stability_matrix(pwa, flip(word, 0))
            assert np.array_equal(m[:, 1:], m_flip[:, 1:])


class TestBorderCollisionMatrix:
    def test_single_symbol_is_identity(self):
        rng = np.random.default_rng(35)
        pwa = random_map(rng, 3)
        assert np.array_equal(bc_matrix(pwa, "L"), np.eye(3))

    def test_independent_of_first_symbol_bit_exact(self):
        rng = np.random.default_rng(36)
        for _ in range(60):
            pwa = random_map(rng, int(rng.integers(2, 5)))
            word = SymbolSequence(random_word(rng, int(rng.integers(2, 9))))
            assert np.array_equal(bc_matrix(pwa, word),
                                  bc_matrix(pwa, flip(word, 0)))

    def test_scalar_branch(self):
        a = 0.37
        pwa = PwaMap(a * np.eye(2), a * np.eye(2), np.array([1.0, 0.0]))
        assert np.allclose(bc_matrix(pwa, "LL"), (1 + a) * np.eye(2))


class TestSolveCycle:
    def test_reference_point(self, pentagon):
        sol = solve_cycle(pentagon, 1.0, "RRRLR")
        assert np.allclose(sol.points[0], [0.0, -1.0, 1.5], atol=1e-9)
        assert sol.wrap_residual <= 1e-12

    def test_single_symbol_is_fixed_point(self):
        rng = np.random.default_rng(37)
        count = 0
        while count < 20:
            pwa = random_map(rng, 3, scale=0.4)
            if smallmat.is_singular(np.eye(3) - pwa.A_L):
                continue
            sol = solve_cycle(pwa, 1.0, "L")
            rep = fixed_point(pwa, 1.0, "L")
            assert np.allclose(sol.points[0], rep.point, atol=1e-10)
            count += 1

    def test_against_stacked_system(self):
        rng = np.random.default_rng(38)
        count = 0
        while count < 60:
            pwa = random_map(rng, 2)
            word = SymbolSequence(random_word(rng, int(rng.integers(2, 7))))
            mu = 1.0
            eye = np.eye(2)
            if smallmat.is_singular(eye - stability_matrix(pwa, word)):
                continue
            sol = solve_cycle(pwa, mu, word)
            a, rhs = stacked_system(pwa, mu, word)
            stacked = np.linalg.solve(a, rhs).reshape(len(word), 2)
            scale = max(1.0, np.max(np.abs(stacked)))
            assert np.max(np.abs(sol.points - stacked)) <= 1e-8 * scale
            count += 1

    def test_singular_system_raises_with_diagnostics(self, pentagon):
        word = rotational(2, 2, 5)
        with pytest.raises(SingularSystemError) as err:
            solve_cycle(pentagon, 1.0, word)
        assert abs(err.value.det_IminusM) <= 1e-9
        assert abs(err.value.det_P) <= 1e-9

    def test_on_manifold_base_point_iff_singular_bc_matrix(self):
        # both directions of the border-collision dichotomy on tuned corpora
        rng = np.random.default_rng(39)
        on_count = off_count = 0
        while on_count < 12 or off_count < 12:
            pwa = random_map(rng, 2)
            word = SymbolSequence(random_word(rng, 5))
            eye = np.eye(2)
            if smallmat.is_singular(eye - stability_matrix(pwa, word)):
                continue
            if off_count < 12 and not smallmat.is_singular(bc_matrix(pwa, word)):
                sol = solve_cycle(pwa, 1.0, word)
                assert 0 not in sol.admissibility.boundary_indices
                off_count += 1
            tuned, residual = tune_entry(
                pwa, 0, lambda mp: smallmat.det(bc_matrix(mp, word)))
            if tuned is None or residual > 1e-9:
                continue
            if smallmat.is_singular(np.eye(2) - stability_matrix(tuned, word)):
                continue
            sol = solve_cycle(tuned, 1.0, word)
            assert abs(sol.s_values[0]) <= 1e-6 * max(1.0, np.linalg.norm(sol.points[0]))
            assert smallmat.is_singular(bc_matrix(tuned, word), tol=1e-6)
            on_count += 1


class TestOrbit:
    def test_periodic_wrap(self, pentagon):
        sol = solve_cycle(pentagon, 1.0, "RRRLR")
        pts = orbit_under(pentagon, 1.0, "RRRLR", sol.points[0])
        assert np.allclose(pts[-1], pts[0], atol=1e-12)

    def test_admissible_orbit_matches_plain_iteration(self):
        rng = np.random.default_rng(40)
        found = 0
        while found < 15:
            pwa = random_map(rng, 2, scale=0.5)
            word = SymbolSequence(random_word(rng, 4))
            eye = np.eye(2)
            if smallmat.is_singular(eye - stability_matrix(pwa, word)):
                continue
            sol = solve_cycle(pwa, 1.0, word)
            if sol.admissibility.kind is not Admissibility.ADMISSIBLE:
                continue
            x = sol.points[0]
            for i in range(len(word)):
                x = evaluate(pwa, 1.0, x)
                assert np.allclose(x, sol.points[(i + 1) % len(word)], atol=1e-9)
            found += 1

    def test_zero_matrix_collapses(self):
        pwa = PwaMap(np.zeros((2, 2)), np.zeros((2, 2)), np.array([1.0, 0.0]))
        pts = orbit_under(pwa, 2.0, "LL", np.array([5.0, 5.0]))
        assert np.allclose(pts[1], [2.0, 0.0])
        assert np.allclose(pts[2], [2.0, 0.0])


class TestAdmissibility:
    def test_reference_orbit_boundary(self, pentagon):
        sol = solve_cycle(pentagon, 1.0, "RRRLR")
        report = sol.admissibility
        assert report.kind is Admissibility.BOUNDARY
        assert set(report.boundary_indices) == {0, 1}
        assert report.violating_indices == ()

    def test_virtual_verdict_lists_indices(self):
        points = np.array([[-1.0, 0.0], [1.0, 0.0]])
        report = admissibility(points, "LL")
        assert report.kind is Admissibility.VIRTUAL
        assert report.violating_indices == (1,)

    def test_clean_admissible(self):
        points = np.array([[-1.0, 0.0], [2.0, 0.0]])
        report = admissibility(points, "LR")
        assert report.kind is Admissibility.ADMISSIBLE
        assert report.margin == pytest.approx(1.0)


class TestNthIterateMap:
    def test_agrees_with_forced_iteration(self):
        rng = np.random.default_rng(41)
        for _ in range(10):
            pwa = random_map(rng, 3)
            word = SymbolSequence(random_word(rng, 5))
            mu = float(rng.normal())
            composite = nth_iterate_map(pwa, mu, word)
            for _ in range(10):
                x = rng.normal(size=3)
                forced = flip(word, 0) if (x[0] <= 0) == (word[0] == "R") else word
                expected = orbit_under(pwa, mu, forced, x)[-1]
                assert np.allclose(evaluate(composite, mu, x), expected,
                                   rtol=1e-10, atol=1e-10)

    def test_single_step_reproduces_map(self):
        rng = np.random.default_rng(42)
        pwa = random_map(rng, 2)
        composite = nth_iterate_map(pwa, 1.0, "L")
        assert np.array_equal(composite.A_L, pwa.A_L)
        assert np.array_equal(composite.A_R, pwa.A_R)
        assert np.allclose(composite.b, pwa.b)

    def test_composite_is_continuous(self):
        # constructor revalidates the shared columns, so building suffices
        rng = np.random.default_rng(43)
        for _ in range(20):
            pwa = random_map(rng, 4)
            word = SymbolSequence(random_word(rng, 6))
            nth_iterate_map(pwa, 1.0, word)


class TestSolutionNature:
    def test_reference_affine_family(self, pentagon):
        nature = solution_nature(pentagon, 1.0, rotational(2, 2, 5))
        assert nature.cell is NatureCell.AFFINE_FAMILY

    def test_generic_unique_off_manifold(self):
        rng = np.random.default_rng(44)
        found = 0
        while found < 20:
            pwa = random_map(rng, 3)
            word = SymbolSequence(random_word(rng, 5))
            nature = solution_nature(pwa, 1.0, word)
            if nature.cell is NatureCell.UNIQUE_OFF_MANIFOLD:
                found += 1

    def test_tuned_unique_on_manifold(self):
        rng = np.random.default_rng(45)
        found = 0
        while found < 8:
            pwa = random_map(rng, 2)
            word = SymbolSequence(random_word(rng, 5))
            tuned, residual = tune_entry(
                pwa, 0, lambda mp: smallmat.det(bc_matrix(mp, word)))
            if tuned is None or residual > 1e-10:
                continue
            eye = np.eye(2)
            if smallmat.is_singular(eye - stability_matrix(tuned, word)):
                continue
            nature = solution_nature(tuned, 1.0, word, tol_sing=1e-7)
            assert nature.cell is NatureCell.UNIQUE_ON_MANIFOLD
            sol = solve_cycle(tuned, 1.0, word)
            assert abs(sol.s_values[0]) <= 1e-6 * max(1.0, np.linalg.norm(sol.points[0]))
            found += 1

    def test_degenerate_when_mu_zero(self):
        rng = np.random.default_rng(46)
        pwa = random_map(rng, 2)
        nature = solution_nature(pwa, 0.0, "LR")
        assert nature.cell is NatureCell.DEGENERATE


class TestSystemIdentities:
    def test_flip_system_shares_on_manifold_solutions(self):
        # when point i of the cycle sits on the manifold, the same points
        # solve the system with the i-th symbol flipped
        rng = np.random.default_rng(47)
        found = 0
        while found < 10:
            pwa = random_map(rng, 2)
            word = SymbolSequence(random_word(rng, 5))
            index = int(rng.integers(0, 5))
            rotated = cyclic(word, index)
            tuned, residual = tune_entry(
                pwa, 0, lambda mp: smallmat.det(bc_matrix(mp, rotated)))
            if tuned is None or residual > 1e-10:
                continue
            eye = np.eye(2)
            if smallmat.is_singular(eye - stability_matrix(tuned, word)):
                continue
            sol = solve_cycle(tuned, 1.0, word)
            if abs(sol.s_values[index]) > 1e-7:
                continue
            flipped = flip(word, index)
            scale = max(1.0, np.max(np.abs(sol.points)))
            for k in range(len(word)):
                step = tuned.branch(flipped[k]) @ sol.points[k] + tuned.b
                assert np.max(np.abs(step - sol.points[(k + 1) % len(word)])) \
                    <= 1e-6 * scale
            found += 1

    def test_flip_determinant_pairing(self):
        # det(I - M_S) s_0 = det(I - M_{S flipped at 0}) s_0-hat
        rng = np.random.default_rng(48)
        count = 0
        while count < 200:
            pwa = random_map(rng, int(rng.integers(2, 6)))
            word = SymbolSequence(random_word(rng, int(rng.integers(2, 10))))
            flipped = flip(word, 0)
            eye = np.eye(pwa.N)
            d1 = smallmat.det(eye - stability_matrix(pwa, word))
            d2 = smallmat.det(eye - stability_matrix(pwa, flipped))
            if smallmat.is_singular(eye - stability_matrix(pwa, word)) or \
               smallmat.is_singular(eye - stability_matrix(pwa, flipped)):
                continue
            s1 = solve_cycle(pwa, 1.0, word).s_values[0]
            s2 = solve_cycle(pwa, 1.0, flipped).s_values[0]
            lhs, rhs = d1 * s1, d2 * s2
            assert abs(lhs - rhs) <= 1e-8 * max(1.0, abs(lhs), abs(rhs))
            count += 1

    def test_no_solution_when_stability_system_singular(self):
        # singular I - M_S with nonsingular P_S leaves the stacked system
        # inconsistent: bounded-away least-squares residual
        rng = np.random.default_rng(49)
        found = 0
        while found < 10:
            pwa = random_map(rng, 2)
            word = SymbolSequence(random_word(rng, 4))
            eye = np.eye(2)
            tuned, residual = tune_entry(
                pwa, 0,
                lambda mp: smallmat.det(eye - stability_matrix(mp, word)))
            if tuned is None or residual > 1e-9:
                continue
            if smallmat.is_singular(bc_matrix(tuned, word), tol=1e-7):
                continue
            rho_b = abs(float(np.array([1.0, 0.0]) @ tuned.b))
            if rho_b < 1e-2:
                continue
            a, rhs = stacked_system(tuned, 1.0, word)
            _, res, *_ = np.linalg.lstsq(a, rhs, rcond=None)
            lstsq_residual = np.sqrt(res[0]) if len(res) else \
                np.linalg.norm(a @ np.linalg.lstsq(a, rhs, rcond=None)[0] - rhs)
            assert lstsq_residual > 1e-4
            found += 1

    def test_affine_family_parametrization(self, pentagon):
        word = rotational(2, 2, 5)
        x0, basis = affine_family(pentagon, 1.0, word)
        assert basis.shape[0] >= 1
        eye = np.eye(3)
        m = stability_matrix(pentagon, word)
        p = bc_matrix(pentagon, word)
        for coeff in (-0.5, 0.0, 1.2):
            x = x0 + coeff * basis[0]
            assert np.allclose((eye - m) @ x, p @ pentagon.b, atol=1e-8)


class TestCsvSerialization:
    def test_round_trip_readable(self, pentagon):
        sol = solve_cycle(pentagon, 1.0, "RRRLR")
        text = sol.to_csv()
        lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
        header = lines[0].split(",")
        assert header == ["index", "s", "x1", "x2", "x3"]
        for i, line in enumerate(lines[1:]):
            fields = line.split(",")
            assert int(fields[0]) == i
            values = [float(v) for v in fields[1:]]
            assert values[0] == pytest.approx(sol.s_values[i])
            assert np.allclose(values[1:], sol.points[i])
