import numpy as np
import pytest

import lqturnpike as lt
from lqturnpike.dae_riccati import (_enumerate_fast_candidates, gare_residual,
                                    gdre_fd_residual)
from lqturnpike.errors import AssumptionViolation

from conftest import SQRT2

TAU_GRID = np.array([0.0, 0.5, 1.0, 2.0, 5.0, 10.0])


def _closed_form_p1(tau):
    """Scalar reference solution of the reduced backward Riccati flow."""
    decay = np.exp(-2.0 * SQRT2 * tau)
    return 1.0 + SQRT2 - 2.0 * SQRT2 * decay / (1.0 + decay)


class TestFastBlock:
    def test_stabilizing_branch(self):
        p2 = lt.solve_fast_block([[-1.0]], [[1.0]], [[0.0]])
        assert p2[0, 0] == pytest.approx(0.0, abs=1e-12)

    def test_branch_enumeration(self):
        cands = _enumerate_fast_candidates(
            np.array([[-1.0]]), np.array([[1.0]]), np.array([[0.0]]),
            lt.Tolerances())
        vals = sorted(c[0, 0] for c in cands)
        assert np.allclose(vals, [-2.0, 0.0], atol=1e-9)

    def test_lyapunov_type(self):
        p2 = lt.solve_fast_block([[-1.0]], [[0.0]], [[1.0]])
        assert p2[0, 0] == pytest.approx(0.5, abs=1e-12)

    def test_definiteness_failure(self):
        with pytest.raises(AssumptionViolation) as err:
            lt.solve_fast_block([[-1.0]], [[2.0]], [[1.0]])
        assert err.value.assumption == "definiteness"

    def test_no_valid_k2(self):
        # A22 = 0 with no control on the fast block leaves K2 singular
        with pytest.raises(AssumptionViolation):
            lt.solve_fast_block([[0.0]], [[0.0]], [[0.0]])

    def test_empty_block(self):
        assert lt.solve_fast_block(np.zeros((0, 0)), np.zeros((0, 1)),
                                   np.zeros((1, 0))).shape == (0, 0)


class TestReducedCoefficients:
    def test_reference_values(self, gare_ref):
        red = gare_ref.reduced
        assert red.A_t[0, 0] == pytest.approx(1.0, abs=1e-14)
        assert red.R_t[0, 0] == pytest.approx(1.0, abs=1e-14)
        assert red.Q_t[0, 0] == pytest.approx(1.0, abs=1e-14)

    def test_normal_form_psd(self):
        # impulse-free normal form with contraction |C2 B2| <= 1 keeps the
        # reduced state weight positive semidefinite
        rng = np.random.default_rng(41)
        for _ in range(8):
            d, n2, m, k = 2, 2, 2, 2
            b2 = rng.standard_normal((n2, m))
            c2 = rng.standard_normal((k, n2))
            sv = np.linalg.svd(c2 @ b2, compute_uv=False)[0]
            c2 *= 0.95 / max(sv, 1e-9)
            part = lt.SemiExplicitPartition(
                d=d, A11=rng.standard_normal((d, d)),
                A12=rng.standard_normal((d, n2)),
                A21=np.zeros((n2, d)), A22=-np.eye(n2),
                B1=rng.standard_normal((d, m)), B2=b2,
                C1=rng.standard_normal((k, d)), C2=c2,
                S1=np.zeros((d, d)), F1=np.zeros((k, d)))
            p2 = lt.solve_fast_block(part.A22, part.B2, part.C2)
            red = lt.reduced_coefficients(part, p2)
            assert lt.min_eig_sym(red.Q_t) >= -1e-9

    def test_indefinite_weight_rejected(self):
        part = lt.SemiExplicitPartition(
            d=1, A11=np.array([[0.0]]), A12=np.array([[0.0]]),
            A21=np.array([[0.0]]), A22=np.array([[-1.0]]),
            B1=np.array([[0.0]]), B2=np.array([[2.0]]),
            C1=np.array([[1.0]]), C2=np.array([[1.0]]),
            S1=np.array([[0.0]]), F1=np.array([[0.0]]))
        # deliberately inconsistent fast-block choice makes Qt indefinite
        with pytest.raises(AssumptionViolation):
            lt.reduced_coefficients(part, np.array([[0.0]]))


class TestSolveGare:
    def test_reference_solution(self, ref_dae, gare_ref):
        expect_p = np.diag([1.0 + SQRT2, 0.0])
        assert np.abs(gare_ref.P_plus - expect_p).max() < 1e-9
        expect_ap = np.array([[-SQRT2, 0.0], [-1.0 - SQRT2, -1.0]])
        assert np.abs(gare_ref.A_plus - expect_ap).max() < 1e-9
        assert gare_ref.A_bar[0, 0] == pytest.approx(-SQRT2, abs=1e-9)
        assert gare_ref.B_bar[0, 0] == pytest.approx(1.0, abs=1e-12)
        assert gare_ref.C_bar[0, 0] == pytest.approx(1.0, abs=1e-12)
        assert gare_ref.lambda_bar == pytest.approx(-SQRT2, abs=1e-9)
        assert gare_ref.residual <= 1e-10
        assert np.abs(gare_ref.K2 - gare_ref.A_p2.T).max() < 1e-12

    def test_assembled_residual_and_symmetry(self, ref_dae, gare_ref):
        assert gare_residual(ref_dae, gare_ref.P_plus) <= 1e-10
        ep = ref_dae.E.T @ gare_ref.P_plus
        assert np.abs(ep - ep.T).max() < 1e-12

    def test_identity_descriptor_reduces(self, abc_fperp, are_abc):
        gare = lt.solve_gare(lt.wrap_standard(abc_fperp))
        assert np.abs(gare.P_plus - are_abc.P_plus).max() < 1e-10
        assert gare.lambda_bar == pytest.approx(are_abc.lam, abs=1e-8)
        assert np.abs(gare.A_bar - are_abc.A_plus).max() < 1e-10

    def test_terminal_incompatibility_rejected(self):
        plant = lt.DescriptorPlant(
            E=np.diag([1.0, 0.0]), A=np.diag([1.0, -1.0]),
            B=np.array([[1.0], [1.0]]), C=np.array([[1.0, 0.0]]),
            F=np.array([[0.0, 1.0]]))
        with pytest.raises(AssumptionViolation) as err:
            lt.solve_gare(plant)
        assert err.value.assumption == "terminal-compatibility"

    def test_impulse_uncontrollable_rejected(self):
        plant = lt.DescriptorPlant(
            E=np.diag([1.0, 0.0]), A=np.array([[0.0, 1.0], [1.0, 0.0]]),
            B=np.zeros((2, 1)), C=np.array([[1.0, 0.0]]), F=np.zeros((1, 2)))
        with pytest.raises(AssumptionViolation) as err:
            lt.solve_gare(plant)
        assert err.value.assumption == "impulse-controllability"

    def test_randomized_reduction_identities(self):
        # on every solvable random instance the reduced closed loop must be
        # the Schur complement of the assembled one
        rng = np.random.default_rng(71)
        solved = 0
        for _ in range(25):
            d, n2, m, k = 2, 2, 2, 2
            n = d + n2
            e = np.zeros((n, n))
            e[:d, :d] = np.eye(d)
            a = rng.standard_normal((n, n))
            a[d:, d:] -= 1.5 * np.eye(n2)
            b = rng.standard_normal((n, m))
            c = np.hstack([rng.standard_normal((k, d)),
                           0.2 * rng.standard_normal((k, n2))])
            f = np.hstack([rng.standard_normal((k, d)), np.zeros((k, n2))])
            plant = lt.DescriptorPlant(E=e, A=a, B=b, C=c, F=f)
            try:
                gare = lt.solve_gare(plant)
            except (AssumptionViolation, lt.NumericalError):
                continue
            solved += 1
            red = gare.reduced
            scale = 1.0 + np.abs(gare.A_bar).max()
            assert np.abs(gare.A_bar
                          - (red.A_t - red.R_t @ gare.P1)).max() < 1e-10 * scale
            assert np.abs(gare.B_bar @ gare.B_bar.T
                          - red.R_t).max() < 1e-10 * scale
            assert np.abs(gare.K2 - gare.A_p2.T).max() < 1e-10 * scale
        assert solved >= 8


class TestSolveGdre:
    def test_scalar_closed_form(self, ref_dae):
        gdre = lt.solve_gdre(ref_dae, 10.0)
        tau = 10.0 - gdre.grid
        err = np.abs(gdre.P1[:, 0, 0] - _closed_form_p1(tau)).max()
        assert err < 1e-7
        assert np.abs(gdre.P21).max() == 0.0

    def test_equilibrium(self, ref_dae, gare_ref):
        f_eq = np.array([[np.sqrt(1.0 + SQRT2), 0.0]])
        plant = lt.DescriptorPlant(E=ref_dae.E, A=ref_dae.A, B=ref_dae.B,
                                   C=ref_dae.C, F=f_eq)
        gdre = lt.solve_gdre(plant, 10.0)
        assert np.abs(gdre.P1 - gare_ref.P1).max() < 1e-8

    def test_terminal_weight_exact(self, ref_dae):
        gdre = lt.solve_gdre(ref_dae, 10.0)
        p_end = gdre.assemble(len(gdre.grid) - 1)
        assert np.array_equal(ref_dae.E.T @ p_end,
                              ref_dae.F.T @ ref_dae.F)

    def test_fd_residual_within_bound(self, ref_dae):
        gdre = lt.solve_gdre(ref_dae, 10.0)
        resid, bound = gdre_fd_residual(gdre, ref_dae)
        assert resid <= bound

    def test_structural_invariants(self, ref_dae, gare_ref):
        gdre = lt.solve_gdre(ref_dae, 10.0)
        bbt = ref_dae.B @ ref_dae.B.T
        for i in range(len(gdre.grid)):
            p = gdre.assemble(i)
            ep = ref_dae.E.T @ p
            assert np.abs(ep - ep.T).max() < 1e-10
            # closed-loop fast block stays pinned at its algebraic value
            cl = ref_dae.A - bbt @ p
            assert np.abs(cl[1:, 1:] - gare_ref.A_p2).max() < 1e-10


class TestStructuredDelta:
    def test_terminal_value(self, gare_ref):
        delta = lt.structured_delta(gare_ref, gare_ref.partition.S1)
        got = delta.delta1(10.0, 10.0)[0, 0]
        assert got == pytest.approx(-SQRT2, abs=1e-12)

    def test_convergence_bracket(self, gare_ref):
        delta = lt.structured_delta(gare_ref, gare_ref.partition.S1)
        wbar = delta.gram_bar.W[0, 0]
        assert wbar == pytest.approx(1.0 / (2.0 * SQRT2), abs=1e-12)
        bracket = 1.0 + wbar * (1.0 - (1.0 + SQRT2))
        assert bracket == pytest.approx(0.5, abs=1e-12)

    def test_matches_integrated_gdre(self, ref_dae, gare_ref):
        gdre = lt.solve_gdre(ref_dae, 10.0)
        delta = lt.structured_delta(gare_ref, gare_ref.partition.S1)
        err = max(
            abs(delta.delta1(t, 10.0)[0, 0] - (p1[0, 0] - gare_ref.P1[0, 0]))
            for t, p1 in zip(gdre.grid, gdre.P1))
        assert err < 1e-7

    def test_block_structure(self, gare_ref):
        delta = lt.structured_delta(gare_ref, gare_ref.partition.S1)
        full = delta.full(3.0, 10.0)
        assert np.abs(full[:, 1]).max() == 0.0
        coupling = delta.coupling()
        d1 = delta.delta1(3.0, 10.0)
        assert np.abs(full[1:, :1] - coupling @ d1).max() < 1e-10

    def test_sliding_monotone_on_reduced_system(self, gare_ref):
        delta = lt.structured_delta(gare_ref, gare_ref.partition.S1)
        tol = lt.Tolerances()
        vals = [delta.sliding.at(tau) for tau in TAU_GRID]
        for older, newer in zip(vals, vals[1:]):
            assert lt.min_eig_sym(older - newer) >= -tol.psd_slack
        wnorm = np.linalg.norm(delta.gram_bar.W, 2)
        for tau in TAU_GRID:
            assert np.linalg.norm(delta.gram_bar.at(tau), 2) <= wnorm + 1e-12

    def test_nonconvergent_terminal_rejected(self, gare_ref):
        # synthetic terminal block on the singular bracket branch
        s1_bad = np.array([[1.0 - SQRT2]])
        with pytest.raises(AssumptionViolation):
            lt.structured_delta(gare_ref, s1_bad)


class TestDecoupledClosedLoop:
    def test_equilibrium(self, gare_ref):
        delta = lt.structured_delta(gare_ref, gare_ref.P1)
        dcl = lt.decoupled_closed_loop(gare_ref, delta)
        for t in (0.0, 4.0, 10.0):
            assert np.abs(dcl.A1_hat(t, 10.0) - gare_ref.A_bar).max() < 1e-12
            expect = -np.linalg.solve(gare_ref.A_p2, gare_ref.A_p21)
            assert np.abs(dcl.A2_hat(t, 10.0) - expect).max() < 1e-12

    def test_reference_formula(self, gare_ref):
        delta = lt.structured_delta(gare_ref, gare_ref.partition.S1)
        dcl = lt.decoupled_closed_loop(gare_ref, delta)
        for t in (0.0, 5.0, 10.0):
            expect = -(1.0 + SQRT2) - delta.delta1(t, 10.0)[0, 0]
            assert dcl.A2_hat(t, 10.0)[0, 0] == pytest.approx(expect, abs=1e-12)

    def test_simulated_decoupling(self, ref_dae, gare_ref):
        delta = lt.structured_delta(gare_ref, gare_ref.partition.S1)
        dcl = lt.decoupled_closed_loop(gare_ref, delta)
        traj = lt.dae_optimal_trajectory(ref_dae, [1.0, 0.0], [0.0], [0.0],
                                         10.0)
        err = max(
            np.abs(traj.x2[i] - dcl.A2_hat(t, 10.0) @ traj.x1[i]).max()
            for i, t in enumerate(traj.grid))
        assert err < 1e-7
