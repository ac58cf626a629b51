import numpy as np
import pytest

import lqturnpike as lt
from conftest import SQRT3, U_S_ABC, W_S_ABC, X_S_ABC


class TestSteadyState:
    def test_zero_target(self, abc_fperp, are_abc):
        st = lt.steady_state(abc_fperp, are_abc, [0.0])
        assert np.abs(st.x_s).max() == 0.0
        assert np.abs(st.u_s).max() == 0.0
        assert np.abs(st.w_s).max() == 0.0

    def test_reference_values(self, abc_fperp, are_abc):
        st = lt.steady_state(abc_fperp, are_abc, [1.0])
        assert np.abs(st.x_s - X_S_ABC).max() < 1e-10
        assert np.abs(st.u_s - U_S_ABC).max() < 1e-10
        assert np.abs(st.w_s - W_S_ABC).max() < 1e-10
        assert st.kkt_residual <= 1e-10

    def test_adjoint_equation_residual(self, abc_fperp, are_abc):
        st = lt.steady_state(abc_fperp, are_abc, [1.0])
        r = (abc_fperp.A.T @ st.lambda_s
             + abc_fperp.C.T @ (abc_fperp.C @ st.x_s - np.array([1.0])))
        assert np.abs(r).max() < 1e-10

    def test_random_instances(self):
        rng = np.random.default_rng(31)
        for _ in range(6):
            n, m, k = 3, 2, 2
            a = rng.standard_normal((n, n))
            b = rng.standard_normal((n, m))
            c = rng.standard_normal((k, n))
            plant = lt.LtiPlant(A=a, B=b, C=c, F=np.zeros((1, n)))
            are = lt.stabilizing_solution(plant)
            y_c = rng.standard_normal(k)
            st = lt.steady_state(plant, are, y_c)
            scale = 1.0 + max(np.linalg.norm(st.x_s), np.linalg.norm(y_c))
            assert st.kkt_residual <= 1e-10 * scale


class TestFeedforward:
    def test_zero_targets(self, abc_fperp, are_abc, gram_abc):
        st = lt.sliding_terminal(abc_fperp.terminal_weight, are_abc, gram_abc)
        ff = lt.feedforward(abc_fperp, are_abc, gram_abc, st, [0.0], [0.0], 10.0)
        assert np.abs(ff.w).max() < 1e-12

    def test_terminal_condition(self, abc_fperp, are_abc, gram_abc):
        st = lt.sliding_terminal(abc_fperp.terminal_weight, are_abc, gram_abc)
        ff = lt.feedforward(abc_fperp, are_abc, gram_abc, st, [0.0], [1.0], 10.0)
        assert np.abs(ff.w[-1] - [-SQRT3, 0.0]).max() < 1e-12

    def test_closed_form_matches_integration(self, abc_fperp, are_abc, gram_abc):
        st = lt.sliding_terminal(abc_fperp.terminal_weight, are_abc, gram_abc)
        for y_c, y_e in ([0.0, 1.0], [1.0, 1.0], [1.0, 0.0]):
            ff = lt.feedforward(abc_fperp, are_abc, gram_abc, st,
                                [y_c], [y_e], 10.0)
            assert ff.max_discrepancy < 1e-6
            assert np.abs(ff.w - (ff.w_h + ff.w_p)).max() < 1e-14

    def test_closed_form_multi_output(self):
        # exercises the closed forms with k = 2, l = 2, m = 2 shapes
        rng = np.random.default_rng(3)
        a = rng.standard_normal((3, 3))
        plant = lt.LtiPlant(A=a, B=rng.standard_normal((3, 2)),
                            C=rng.standard_normal((2, 3)),
                            F=rng.standard_normal((2, 3)))
        are = lt.stabilizing_solution(plant)
        gram = lt.gramians(are, plant.B)
        st = lt.sliding_terminal(plant.terminal_weight, are, gram)
        ff = lt.feedforward(plant, are, gram, st, [0.4, -0.2], [1.0, 0.3], 6.0)
        assert ff.max_discrepancy < 1e-6


class TestOptimalTrajectory:
    def test_feedback_identity(self, abc_fperp):
        traj = lt.optimal_trajectory(abc_fperp, [1.0, 1.0], [0.0], [1.0], 10.0)
        recon = -np.einsum("ij,tj->ti", abc_fperp.B.T,
                           np.einsum("tij,tj->ti", traj.P, traj.x) + traj.w)
        assert np.abs(traj.u - recon).max() < 1e-12

    def test_initial_condition_and_output(self, abc_fperp):
        traj = lt.optimal_trajectory(abc_fperp, [1.0, 1.0], [0.0], [1.0], 10.0)
        assert np.array_equal(traj.x[0], [1.0, 1.0])
        assert np.abs(traj.y - traj.x @ abc_fperp.C.T).max() == 0.0

    def test_bad_x0_size(self, abc_fperp):
        with pytest.raises(ValueError):
            lt.optimal_trajectory(abc_fperp, [1.0], [0.0], [1.0], 10.0)


class TestDecomposeState:
    def test_homogeneous_case(self, abc_fperp, are_abc, gram_abc):
        steady = lt.steady_state(abc_fperp, are_abc, [0.0])
        traj = lt.optimal_trajectory(abc_fperp, [1.0, 1.0], [0.0], [0.0], 10.0)
        dec = lt.decompose_state(traj, are_abc, gram_abc,
                                 abc_fperp.terminal_weight, steady)
        assert np.abs(traj.x - dec.x_h).max() < 1e-8
        assert np.abs(dec.g).max() < 1e-8

    def test_zero_time_identity(self, abc_fperp, are_abc, gram_abc):
        steady = lt.steady_state(abc_fperp, are_abc, [1.0])
        traj = lt.optimal_trajectory(abc_fperp, [1.0, 1.0], [1.0], [1.0], 10.0)
        dec = lt.decompose_state(traj, are_abc, gram_abc,
                                 abc_fperp.terminal_weight, steady)
        # transient(0) = x_s, so the remainder vanishes at t = 0
        assert np.abs(dec.transient[0] - steady.x_s).max() < 1e-12
        assert np.abs(dec.g[0]).max() < 1e-12

    def test_horizon_doubling_decay(self, abc_fperp, are_abc, gram_abc):
        steady = lt.steady_state(abc_fperp, are_abc, [1.0])
        peaks = {}
        for t1 in (10.0, 20.0):
            traj = lt.optimal_trajectory(abc_fperp, [1.0, 1.0], [1.0], [1.0],
                                         t1, grid=201)
            dec = lt.decompose_state(traj, are_abc, gram_abc,
                                     abc_fperp.terminal_weight, steady)
            mask = dec.grid <= 5.0
            peaks[t1] = np.max(np.linalg.norm(dec.g[mask], axis=1))
        assert peaks[20.0] <= 1e-4 * peaks[10.0]


class TestTurnpikeReport:
    def test_synthetic_on_turnpike(self, abc_fperp, are_abc):
        steady = lt.steady_state(abc_fperp, are_abc, [1.0])

        class Synthetic:
            grid = np.linspace(0.0, 10.0, 101)
            x = np.tile(steady.x_s, (101, 1))
            u = np.tile(steady.u_s, (101, 1))

        rep = lt.turnpike_report(Synthetic(), steady, lam=-2.0)
        assert rep.envelope_holds
        assert rep.C_hat == 0.0

    def test_affine_reference(self, abc_fperp, are_abc):
        steady = lt.steady_state(abc_fperp, are_abc, [0.0])
        traj = lt.optimal_trajectory(abc_fperp, [1.0, 1.0], [0.0], [1.0], 10.0)
        rep = lt.turnpike_report(traj, steady, lam=are_abc.lam)
        assert -2.2 <= rep.lambda_hat <= -1.8
        assert rep.envelope_holds
        assert rep.max_violation <= 0.0
        assert np.all(np.maximum(rep.dist_x, rep.dist_u)
                      <= rep.envelope + 1e-12)

    def test_homogeneous_reference(self, abc_fperp, are_abc):
        steady = lt.steady_state(abc_fperp, are_abc, [0.0])
        traj = lt.optimal_trajectory(abc_fperp, [1.0, 1.0], [0.0], [0.0], 10.0)
        rep = lt.turnpike_report(traj, steady, lam=are_abc.lam)
        assert -2.2 <= rep.lambda_hat <= -1.8
        assert rep.envelope_holds

    def test_failure_case(self, abc_fc, are_abc):
        # terminal weight along the output: the state escapes
        class SteadyZero:
            x_s = np.zeros(2)
            u_s = np.zeros(1)

        traj = lt.optimal_trajectory(abc_fc, [1.0, 1.0], [0.0], [1.0], 10.0)
        for lam in (-2.0, -1.0, -0.5, None):
            rep = lt.turnpike_report(traj, SteadyZero(), lam=lam)
            assert not rep.envelope_holds
        assert lt.turnpike_report(traj, SteadyZero()).lambda_hat > 0.0

    def test_coarse_grid_rejected(self, abc_fperp, are_abc):
        steady = lt.steady_state(abc_fperp, are_abc, [0.0])

        class Tiny:
            grid = np.linspace(0.0, 10.0, 8)
            x = np.ones((8, 2))
            u = np.ones((8, 1))

        with pytest.raises(ValueError):
            lt.turnpike_report(Tiny(), steady)

    def test_horizon_sweep_constants(self, abc_fperp, are_abc):
        # the envelope constant must not grow with the horizon, while the
        # interior dip deepens exponentially
        steady = lt.steady_state(abc_fperp, are_abc, [0.0])
        c_hats, dips = [], []
        for t1 in (6.0, 10.0, 14.0):
            traj = lt.optimal_trajectory(abc_fperp, [1.0, 1.0], [0.0], [1.0],
                                         t1, grid=141)
            rep = lt.turnpike_report(traj, steady, lam=are_abc.lam)
            assert rep.envelope_holds
            c_hats.append(rep.C_hat)
            middle = (traj.grid > t1 / 4.0) & (traj.grid < 3.0 * t1 / 4.0)
            dips.append(np.linalg.norm(traj.x[middle], axis=1).min())
        assert max(c_hats) <= 3.0 * min(c_hats)
        assert dips[1] < 0.05 * dips[0]
        assert dips[2] < 0.05 * dips[1]
