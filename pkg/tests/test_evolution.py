"""Evolution-driver tests: fixed points, history monotonicity, initial-data
regularization, self-convergence and the history-floor sweep."""

import numpy as np
import pytest

import cohesim.evolution as evolution
from cohesim.evolution import (
    EvolutionError,
    Scenario,
    eps_continuation,
    regularize_initial_data,
    run,
)
from cohesim.step import ConvexityError, StepSolverError

from scenarios import mild_ramp, rest_scenario, small_ramp, standard_ramp


@pytest.fixture(scope="module")
def ramp_record():
    return run(small_ramp(), snapshot_stride=1)


class TestRun:
    def test_rest_state_stays_at_rest(self):
        rec = run(rest_scenario())
        assert np.all(rec.E == 0.0)
        assert np.all(rec.K == 0.0)
        assert np.all(rec.Psi_s == 0.0)
        assert np.all(rec.D_cum == 0.0)
        assert np.all(rec.P_cum == 0.0)
        assert np.allclose(rec.final_state.u, 0.0)
        # history stays at the regularization floor
        assert np.all(rec.xis == rec.xis[0])

    def test_record_lengths_are_n_plus_one(self, ramp_record):
        n = ramp_record.n_steps
        for arr in (ramp_record.ts, ramp_record.E, ramp_record.K, ramp_record.Psi,
                    ramp_record.D_cum, ramp_record.P_cum, ramp_record.v_h1):
            assert arr.shape[0] == n + 1

    def test_history_monotone_and_admissible(self, ramp_record):
        assert np.all(np.diff(ramp_record.xis, axis=0) >= 0.0)
        assert np.all(np.abs(ramp_record.jumps) <= ramp_record.xis)

    def test_dissipated_energy_monotone(self, ramp_record):
        assert np.all(np.diff(ramp_record.Psi_d) >= -1e-15)
        assert np.all(np.diff(ramp_record.D_cum) >= 0.0)

    def test_velocity_interpolant_identity(self, ramp_record):
        tau = ramp_record.tau
        for k in range(1, ramp_record.n_steps + 1):
            du = ramp_record.us[k] - ramp_record.us[k - 1]
            scale = max(1.0, np.abs(du).max())
            assert np.allclose(du, tau * ramp_record.vs[k], atol=1e-15 * scale)

    def test_snapshot_stride_thins_fields_not_scalars(self):
        rec = run(mild_ramp(n=20), snapshot_stride=5)
        assert rec.snapshot_steps == [0, 5, 10, 15, 20]
        assert set(rec.us) == {0, 5, 10, 15, 20}
        assert rec.E.shape[0] == 21  # scalars recorded every step

    def test_callback_sees_every_step(self):
        seen = []
        run(rest_scenario(n=7), callbacks=lambda state, res: seen.append(state.k))
        assert seen == list(range(1, 8))

    def test_convexity_guard_failure_raises(self):
        sc = standard_ramp(n=2, n_x=4, n_y=2, T=2e6)  # tau = 1e6
        with pytest.raises(ConvexityError, match="time step"):
            run(sc)

    def test_step_failure_attaches_partial_trajectory(self, monkeypatch):
        calls = {"k": 0}
        real = evolution.solve_step

        def flaky(prob, tol=1e-10):
            calls["k"] += 1
            if calls["k"] >= 4:
                raise StepSolverError("forced failure", u_last=prob.u_prev,
                                      grad_norm=1.0)
            return real(prob, tol=tol)

        monkeypatch.setattr(evolution, "solve_step", flaky)
        with pytest.raises(EvolutionError) as err:
            run(mild_ramp(n=10))
        assert err.value.step == 4
        assert err.value.partial is not None
        assert err.value.partial.ts.shape[0] == 4  # steps 0..3 retained


class TestSelfConvergence:
    def test_final_state_is_first_order_in_tau(self):
        # elastic-floor regime (no opening): smooth trajectory
        sols = {}
        for n in (50, 100, 200, 400):
            sc = mild_ramp(n=n, amplitude=10.0)
            rec = run(sc, snapshot_stride=n)
            sols[n] = (rec.final_state.u, rec.ops)
        diffs = []
        for n in (50, 100, 200):
            u_c, ops = sols[n]
            u_f, _ = sols[2 * n]
            diffs.append(ops.l2_norm(u_c - u_f))
        ratios = [b / a for a, b in zip(diffs, diffs[1:])]
        assert all(0.3 <= r <= 0.8 for r in ratios), ratios


class TestRegularizeInitialData:
    def test_floor_applies_where_xi0_small(self):
        sc = rest_scenario(eps_bar=0.01)
        _, _, xi_eff = regularize_initial_data(sc)
        assert np.all(xi_eff == 0.01)

    def test_floor_inert_where_xi0_large(self):
        sc = small_ramp(n=4, n_x=4, n_y=2, xi0=0.5, eps_bar=1e-3)
        _, _, xi_eff = regularize_initial_data(sc)
        assert np.array_equal(xi_eff, sc.xi0)

    def test_regularity_recompute_is_zero_for_symmetric_zero_load(self):
        sc = small_ramp(n=4, n_x=4, n_y=2, regularity_mode=True)
        u0_eff, v0_eff, xi_eff = regularize_initial_data(sc)
        # f(0) = 0, v0 = w0 = 0: the unique minimizer of the even energy is 0
        assert np.allclose(u0_eff, 0.0, atol=1e-12)
        assert np.all(v0_eff == 0.0)
        assert np.all(xi_eff == sc.eps_bar)

    def test_missing_w0_rejected(self):
        sc = small_ramp(n=4, n_x=4, n_y=2)
        with pytest.raises(ValueError, match="w0"):
            Scenario(sc.mesh, sc.materials, sc.law, sc.loads, sc.T, sc.n,
                     sc.u0, sc.v0, sc.xi0, sc.eps_bar,
                     regularity_mode=True, w0=None)

    def test_jumping_initial_velocity_rejected_in_regularity_mode(self):
        sc = small_ramp(n=4, n_x=4, n_y=2)
        v0 = np.zeros(sc.mesh.n_nodes)
        v0[sc.mesh.interface_pairs[1, 0]] = 0.1  # plus side only
        with pytest.raises(ValueError, match="jump-free"):
            Scenario(sc.mesh, sc.materials, sc.law, sc.loads, sc.T, sc.n,
                     sc.u0, v0, sc.xi0, sc.eps_bar,
                     regularity_mode=True, w0=np.zeros(sc.mesh.n_nodes))

    def test_inadmissible_initial_opening_rejected(self):
        sc = small_ramp(n=4, n_x=4, n_y=2)
        u0 = np.zeros(sc.mesh.n_nodes)
        u0[sc.mesh.interface_pairs[1, 0]] = 0.5
        with pytest.raises(ValueError, match=r"\[u0\]"):
            Scenario(sc.mesh, sc.materials, sc.law, sc.loads, sc.T, sc.n,
                     u0, sc.v0, sc.xi0, sc.eps_bar)


class TestEpsContinuation:
    def test_inert_when_xi0_dominates(self):
        sc = mild_ramp(n=10, xi0=0.3)
        res = eps_continuation(sc, [0.2, 0.05, 0.01])
        assert res.all_succeeded
        assert all(d == 0.0 for d in res.distances)

    def test_zero_xi0_reports_finite_distances(self):
        sc = mild_ramp(n=20)
        res = eps_continuation(sc, [1e-1, 1e-2, 1e-3])
        assert res.all_succeeded
        assert all(d is not None and np.isfinite(d) for d in res.distances)

    def test_non_decreasing_eps_list_rejected(self):
        sc = small_ramp(n=4, n_x=4, n_y=2)
        with pytest.raises(ValueError, match="decreasing"):
            eps_continuation(sc, [1e-2, 1e-1])
