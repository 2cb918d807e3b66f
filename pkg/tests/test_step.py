"""Step-solver tests: 2-DOF oracle equivalence, KKT exactness, energy
monotonicity, convexity guard."""

import numpy as np
import pytest
import scipy.sparse as sp

from cohesim.assembly import DiscreteOperators, Materials, assemble
from cohesim.law import CohesiveLaw, PrototypeEnvelope, TabulatedEnvelope
from cohesim.mesh import build_rectangle_mesh, scaled
from cohesim.step import (
    StepProblem,
    StepWorkspace,
    convexity_guard,
    incremental_energy,
    solve_step,
    solve_static,
)

M_DIAG = (0.8, 1.2)
ETA_DIAG = (0.5, 0.7)
MU_DIAG = (2.0, 1.5)
PAIR_WEIGHT = 0.6


def toy_ops(weight=PAIR_WEIGHT):
    """Two free DOFs joined by a single interface pair."""
    M = sp.csr_matrix(np.diag(M_DIAG))
    A_eta = sp.csr_matrix(np.diag(ETA_DIAG))
    A_mu = sp.csr_matrix(np.diag(MU_DIAG))
    B = sp.csr_matrix(np.array([[1.0, -1.0]]))
    eye = sp.identity(2, format="csr")
    return DiscreteOperators(mesh=None, materials=None, M=M, A_mu=A_mu, A_eta=A_eta,
                             M_unit=eye, A_unit=eye, B=B,
                             weights=np.array([weight]), free_dofs=np.arange(2))


def toy_problem(tau, f, xi_prev, u_prev=(0.0, 0.0), u_prev2=(0.0, 0.0), law=None):
    law = law or CohesiveLaw(PrototypeEnvelope(1.0, 1.0))
    return StepProblem(tau=tau, u_prev=np.asarray(u_prev, float),
                       u_prev2=np.asarray(u_prev2, float),
                       xi_prev=np.array([xi_prev]), f_k=np.asarray(f, float),
                       ops=toy_ops(), law=law)


# --- independent scalar oracle of the incremental functional ---------------

def psi_scalar(w, xi, gc=1.0, xc=1.0):
    def val(s):
        s = min(s, xc)
        return gc * (s / xc) * (2.0 - s / xc)

    def slope(s):
        return 2.0 * (gc / xc) * (1.0 - s / xc) if s <= xc else 0.0

    aw = abs(w)
    if aw >= xi:
        return val(aw)
    return val(xi) - slope(xi) * (xi * xi - w * w) / (2.0 * xi)


def toy_energy_scalar(x, y, prob):
    tau = prob.tau
    u1, u2 = prob.u_prev, prob.u_prev2
    m1, m2 = M_DIAG
    e1, e2 = ETA_DIAG
    a1, a2 = MU_DIAG
    px, py = 2.0 * u1[0] - u2[0], 2.0 * u1[1] - u2[1]
    out = 0.5 / tau**2 * (m1 * (x - px) ** 2 + m2 * (y - py) ** 2)
    out += 0.5 / tau * (e1 * (x - u1[0]) ** 2 + e2 * (y - u1[1]) ** 2)
    out += 0.5 * (a1 * x * x + a2 * y * y) - prob.f_k[0] * x - prob.f_k[1] * y
    out += PAIR_WEIGHT * psi_scalar(x - y, prob.xi_prev[0])
    return out


def golden_scalar(f, a, b, tol=1e-13):
    invphi = (5.0**0.5 - 1.0) / 2.0
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = f(x2)
    return 0.5 * (a + b)


def oracle_minimize(prob, span=6.0, sweeps=200):
    """Coordinate descent with golden-section line minimizations."""
    x = y = 0.0
    for _ in range(sweeps):
        x_new = golden_scalar(lambda s: toy_energy_scalar(s, y, prob), -span, span)
        y_new = golden_scalar(lambda s: toy_energy_scalar(x_new, s, prob), -span, span)
        if abs(x_new - x) + abs(y_new - y) < 1e-12:
            x, y = x_new, y_new
            break
        x, y = x_new, y_new
    return np.array([x, y])


class TestIncrementalEnergy:
    def test_rest_value_is_dissipated_offset(self):
        prob = toy_problem(0.1, f=(0.0, 0.0), xi_prev=0.5)
        # [u] = 0: only w * psi_d(xi) remains;  psi_d(0.5) = 0.5 for g_c = xi_c = 1
        assert incremental_energy(np.zeros(2), prob) == pytest.approx(
            PAIR_WEIGHT * 0.5, abs=1e-15)

    def test_zero_everything(self):
        prob = toy_problem(0.1, f=(0.0, 0.0), xi_prev=1e-9)
        val = incremental_energy(np.zeros(2), prob)
        assert val == pytest.approx(0.0, abs=1e-9)

    def test_matches_scalar_arithmetic(self):
        prob = toy_problem(0.2, f=(0.7, -0.3), xi_prev=0.4,
                           u_prev=(0.05, -0.02), u_prev2=(0.01, 0.0))
        rng = np.random.default_rng(2)
        for _ in range(20):
            x, y = rng.uniform(-1, 1, 2)
            assert incremental_energy(np.array([x, y]), prob) == pytest.approx(
                toy_energy_scalar(x, y, prob), abs=1e-14)

    def test_dimension_mismatch_rejected(self):
        prob = toy_problem(0.1, f=(0.0, 0.0), xi_prev=0.5)
        with pytest.raises(ValueError, match="size"):
            incremental_energy(np.zeros(3), prob)


class TestSolveStep:
    def test_rest_state_is_fixed_point(self):
        prob = toy_problem(0.1, f=(0.0, 0.0), xi_prev=0.3)
        res = solve_step(prob, tol=1e-12)
        assert np.allclose(res.u_new, 0.0, atol=1e-14)
        assert np.array_equal(res.xi_new, prob.xi_prev)

    def test_oracle_equivalence_randomized(self):
        rng = np.random.default_rng(123)
        for _ in range(50):
            prob = toy_problem(
                tau=rng.uniform(0.05, 0.5),
                f=rng.uniform(-3.0, 3.0, 2),
                xi_prev=rng.uniform(0.05, 1.5),
                u_prev=rng.uniform(-0.2, 0.2, 2),
                u_prev2=rng.uniform(-0.2, 0.2, 2),
            )
            res = solve_step(prob, tol=1e-12)
            ref = oracle_minimize(prob)
            assert np.all(np.abs(res.u_new - ref) <= 1e-8)

    def test_history_grows_only_where_jump_exceeds(self):
        prob = toy_problem(0.1, f=(8.0, -8.0), xi_prev=0.05)
        res = solve_step(prob)
        jump = float(res.u_new[0] - res.u_new[1])
        assert abs(jump) > 0.05
        assert res.xi_new[0] == abs(jump)

    def test_kkt_conditions_exact(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            prob = toy_problem(
                tau=rng.uniform(0.05, 0.3),
                f=rng.uniform(-6.0, 6.0, 2),
                xi_prev=rng.uniform(0.02, 1.0),
            )
            res = solve_step(prob)
            jump = res.u_new[0] - res.u_new[1]
            assert abs(jump) <= res.xi_new[0]
            assert (res.xi_new[0] - prob.xi_prev[0]) * (abs(jump) - res.xi_new[0]) == 0.0
            jump_prev = prob.u_prev[0] - prob.u_prev[1]
            assert (abs(res.xi_new[0] - prob.xi_prev[0])
                    <= abs(jump - jump_prev) + 1e-15)

    def test_energy_decreases_along_iterations(self):
        prob = toy_problem(0.1, f=(5.0, -4.0), xi_prev=0.1)
        trail = []
        solve_step(prob, trace=trail)
        assert len(trail) >= 2
        # monotone descent; strict until the energy rounding floor is reached
        floor = 1e-13 * max(1.0, abs(trail[-1]))
        assert all(b <= a + floor for a, b in zip(trail, trail[1:]))
        assert trail[-1] < trail[0]
        strict = [b < a for a, b in zip(trail, trail[1:])]
        assert strict[0] and all(strict[: strict.index(False)] if False in strict else strict)

    def test_first_order_stationarity_random_directions(self):
        prob = toy_problem(0.15, f=(2.0, -1.0), xi_prev=0.2)
        res = solve_step(prob, tol=1e-12)
        J0 = incremental_energy(res.u_new, prob)
        rng = np.random.default_rng(5)
        h = 1e-7
        for _ in range(20):
            phi = rng.normal(size=2)
            J1 = incremental_energy(res.u_new + h * phi, prob)
            assert (J1 - J0) / h >= -1e-6 * np.linalg.norm(phi)

    def test_aposteriori_residual_small(self):
        prob = toy_problem(0.1, f=(6.0, -6.0), xi_prev=0.05)
        res = solve_step(prob, tol=1e-10)
        assert res.el_residual <= 10.0 * 1e-10 * (1.0 + np.abs(prob.f_k).max())

    def test_nonpositive_history_rejected(self):
        prob = toy_problem(0.1, f=(0.0, 0.0), xi_prev=0.0)
        with pytest.raises(ValueError, match="positive"):
            solve_step(prob)

    def test_workspace_reuse_matches_fresh_solve(self):
        prob_a = toy_problem(0.1, f=(1.0, -2.0), xi_prev=0.3)
        ws = StepWorkspace(prob_a.ops, prob_a.tau)
        prob_b = toy_problem(0.1, f=(1.0, -2.0), xi_prev=0.3)
        prob_b.workspace = ws
        res_a = solve_step(prob_a, tol=1e-12)
        res_b = solve_step(prob_b, tol=1e-12)
        assert np.allclose(res_a.u_new, res_b.u_new, atol=1e-14)


class TestSolveStatic:
    def test_zero_load_gives_zero(self):
        ops = toy_ops()
        law = CohesiveLaw(PrototypeEnvelope(1.0, 1.0))
        u = solve_static(ops, law, np.array([0.2]), np.zeros(2))
        assert np.allclose(u, 0.0, atol=1e-14)

    def test_stationarity_of_static_minimizer(self):
        ops = toy_ops()
        law = CohesiveLaw(PrototypeEnvelope(1.0, 1.0))
        f = np.array([1.5, -0.5])
        xi = np.array([0.4])
        u = solve_static(ops, law, xi, f, tol=1e-12)
        jumps = ops.B @ u
        g = ops.A_mu @ u - f + ops.B.T @ (ops.weights * law.dpsi_dw(jumps, xi))
        assert np.abs(g).max() <= 1e-11


class TestConvexityGuard:
    def test_tiny_beta_always_convex(self):
        grid = np.linspace(0.0, 1.0, 11)
        eps = 1e-6
        law = CohesiveLaw(TabulatedEnvelope(grid, grid - 0.5 * eps * grid**2,
                                            1.0 - eps * grid))
        for tau in (1e-3, 1.0, 1e6):
            prob = toy_problem(tau, f=(0.0, 0.0), xi_prev=0.5, law=law)
            assert convexity_guard(prob)

    def test_rectangle_prototype_small_tau(self):
        mesh = build_rectangle_mesh(1.0, 4, 4)
        ops = assemble(mesh, Materials.constant(1.0, 1.0, 1.0))
        law = CohesiveLaw(PrototypeEnvelope(1.0, 1.0))
        prob = StepProblem(1e-3, np.zeros(ops.n_nodes), np.zeros(ops.n_nodes),
                           np.full(mesh.n_pairs, 0.1), np.zeros(ops.n_nodes), ops, law)
        assert convexity_guard(prob)

    def test_large_tau_with_violated_coercivity(self):
        mesh = build_rectangle_mesh(1.0, 4, 4)
        ops = assemble(mesh, Materials.constant(1.0, 1.0, 1.0))
        law = CohesiveLaw(PrototypeEnvelope(1.0, 0.2))  # beta = 50
        assert ops.materials.mu_min * ops.trace_constant() < law.beta
        prob = StepProblem(1e3, np.zeros(ops.n_nodes), np.zeros(ops.n_nodes),
                           np.full(mesh.n_pairs, 0.1), np.zeros(ops.n_nodes), ops, law)
        assert not convexity_guard(prob)
        # eigenvalue oracle confirms indefiniteness
        free = ops.free_dofs
        B_f = ops.B[:, free]
        C = (ops.A_eta[np.ix_(free, free)] / 1e3 + ops.A_mu[np.ix_(free, free)]
             - law.beta * (B_f.T @ sp.diags(ops.weights) @ B_f))
        lam_min = np.linalg.eigvalsh(C.toarray())[0]
        assert lam_min < 0.0

    def test_coercivity_route_on_small_domain(self):
        mesh = scaled(build_rectangle_mesh(1.0, 4, 4), 0.05)
        ops = assemble(mesh, Materials.constant(1.0, 1.0, 1.0))
        law = CohesiveLaw(PrototypeEnvelope(1.0, 1.0))  # beta = 2
        assert ops.materials.mu_min * ops.trace_constant() > law.beta
        prob = StepProblem(1e6, np.zeros(ops.n_nodes), np.zeros(ops.n_nodes),
                           np.full(mesh.n_pairs, 0.1), np.zeros(ops.n_nodes), ops, law)
        assert convexity_guard(prob)
