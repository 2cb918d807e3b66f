"""Time loop: initial-data regularization, step iteration, trajectory record.

Given initial data ``(u0, v0, xi0)``, the history variable is floored at
``eps_bar > 0`` so the cohesive energy is differentiable along the whole
evolution, and the scheme

    u_{-1} = u0 - tau v0,   u_k = argmin J_k,   xi_k = max(xi_{k-1}, |[u_k]|)

is run for ``k = 1..n`` with ``tau = T/n`` and ``v_k = (u_k - u_{k-1})/tau``.

In ``regularity_mode`` (bounded-acceleration setting: ``[v0] = 0``, no
surface loads, and an initial acceleration field ``w0``) the initial
displacement is recomputed as the minimizer of the static energy augmented
by the viscous and inertial pairings of ``(v0, w0)``, which restores the
initial equilibrium condition for the floored history variable.

Per-step scalar diagnostics (energies, dissipation and work increments, KKT
violations, solver stats, velocity/acceleration norms) are recorded at every
step; full field snapshots are kept every ``snapshot_stride`` steps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assembly import DiscreteOperators, LoadModel, Materials, assemble, load_vector
from .law import CohesiveLaw
from .mesh import InterfaceMesh
from .step import (
    ConvexityError,
    StepProblem,
    StepSolverError,
    StepWorkspace,
    convexity_guard,
    solve_static,
    solve_step,
)

__all__ = [
    "Scenario",
    "EvolutionState",
    "TrajectoryRecord",
    "EvolutionError",
    "EpsContinuationResult",
    "regularize_initial_data",
    "run",
    "eps_continuation",
]


class EvolutionError(RuntimeError):
    """Aborted run; carries the partial trajectory accumulated so far."""

    def __init__(self, message: str, partial: "TrajectoryRecord | None" = None,
                 step: int = -1):
        super().__init__(message)
        self.partial = partial
        self.step = step


@dataclass
class Scenario:
    """Complete problem description for one evolution."""

    mesh: InterfaceMesh
    materials: Materials
    law: CohesiveLaw
    loads: LoadModel
    T: float
    n: int
    u0: np.ndarray
    v0: np.ndarray
    xi0: np.ndarray
    eps_bar: float
    regularity_mode: bool = False
    w0: np.ndarray | None = None

    def __post_init__(self):
        if self.T <= 0.0 or self.n < 1:
            raise ValueError("time horizon must be positive with n >= 1 steps")
        if self.eps_bar <= 0.0:
            raise ValueError("history floor eps_bar must be positive")
        N, P = self.mesh.n_nodes, self.mesh.n_pairs
        self.u0 = np.asarray(self.u0, dtype=float)
        self.v0 = np.asarray(self.v0, dtype=float)
        self.xi0 = np.asarray(self.xi0, dtype=float)
        if self.u0.shape != (N,) or self.v0.shape != (N,):
            raise ValueError("u0 and v0 must be nodal vectors")
        if self.xi0.shape != (P,):
            raise ValueError("xi0 must have one value per interface pair")
        if np.any(self.xi0 < 0.0):
            raise ValueError("xi0 must be nonnegative")
        scale = max(1.0, float(np.abs(self.u0).max(initial=0.0)))
        dnodes = self.mesh.dirichlet_nodes
        if np.abs(self.u0[dnodes]).max(initial=0.0) > 1e-12 * scale:
            raise ValueError("u0 must vanish on the Dirichlet boundary")
        if np.abs(self.v0[dnodes]).max(initial=0.0) > 1e-12 * scale:
            raise ValueError("v0 must vanish on the Dirichlet boundary")
        jumps0 = self.mesh.jump_operator() @ self.u0
        if np.any(np.abs(jumps0) > self.xi0 + 1e-12 * max(1.0, scale)):
            raise ValueError("initial data violate |[u0]| <= xi0")
        if self.regularity_mode:
            if self.w0 is None:
                raise ValueError("regularity_mode requires the initial acceleration w0")
            self.w0 = np.asarray(self.w0, dtype=float)
            if self.w0.shape != (N,):
                raise ValueError("w0 must be a nodal vector")
            jv = self.mesh.jump_operator() @ self.v0
            if np.abs(jv).max(initial=0.0) > 1e-12 * max(1.0, np.abs(self.v0).max()):
                raise ValueError("regularity_mode requires a jump-free initial velocity")
            if not self.loads.surface_is_zero:
                raise ValueError("regularity_mode requires vanishing surface loads")

    @property
    def tau(self) -> float:
        return self.T / self.n

    def with_eps(self, eps_bar: float) -> "Scenario":
        return Scenario(self.mesh, self.materials, self.law, self.loads, self.T,
                        self.n, self.u0, self.v0, self.xi0, eps_bar,
                        self.regularity_mode, self.w0)


@dataclass
class EvolutionState:
    t: float
    u: np.ndarray
    v: np.ndarray
    xi: np.ndarray
    k: int


@dataclass
class TrajectoryRecord:
    """Per-step diagnostics of one run; all arrays have length ``n + 1``."""

    ts: np.ndarray
    E: np.ndarray
    K: np.ndarray
    Psi: np.ndarray
    Psi_s: np.ndarray
    Psi_d: np.ndarray
    D_cum: np.ndarray
    P_cum: np.ndarray
    kkt_admissibility: np.ndarray
    kkt_complementarity: np.ndarray
    kkt_slope: np.ndarray
    newton_iters: np.ndarray
    grad_norms: np.ndarray
    el_residuals: np.ndarray
    v_h1: np.ndarray
    a_l2: np.ndarray
    xis: np.ndarray          # (n+1, n_pairs)
    jumps: np.ndarray        # (n+1, n_pairs)
    snapshot_steps: list
    us: dict
    vs: dict
    ops: DiscreteOperators
    law: CohesiveLaw
    loads: LoadModel
    tau: float
    final_state: EvolutionState | None = None
    initial_data: tuple | None = None   # (u0_eff, v0_eff, xi0_eff) actually used

    @property
    def n_steps(self) -> int:
        return self.ts.size - 1

    def state(self, k: int) -> EvolutionState:
        """Reconstruct the state at a snapshot step."""
        if k not in self.us:
            raise KeyError(f"step {k} was not snapshot (stride too large)")
        return EvolutionState(t=float(self.ts[k]), u=self.us[k], v=self.vs[k],
                              xi=self.xis[k], k=k)


def regularize_initial_data(scenario: Scenario, ops: DiscreteOperators | None = None,
                            tol: float = 1e-10):
    """Floor the history variable and, in regularity mode, recompute ``u0``.

    Returns ``(u0_eff, v0_eff, xi0_eff)``.  With ``regularity_mode`` the
    effective displacement minimizes
    ``F(0, u, xi_hat) + (A_eta v0) . u + (M w0) . u`` and the history is
    re-floored at the resulting jump; the stationarity of the recomputed
    triple is asserted.
    """
    xi_hat = np.maximum(scenario.eps_bar, scenario.xi0)
    if not scenario.regularity_mode:
        return scenario.u0.copy(), scenario.v0.copy(), xi_hat
    if ops is None:
        ops = assemble(scenario.mesh, scenario.materials)
    f0 = load_vector(scenario.loads, 0.0)
    f_eff = f0 - ops.A_eta @ scenario.v0 - ops.M @ scenario.w0
    u0_eff = solve_static(ops, scenario.law, xi_hat, f_eff, tol=tol)
    xi0_eff = np.maximum(xi_hat, np.abs(ops.B @ u0_eff))
    # equilibrium of the recomputed triple (history replaced a posteriori)
    jumps = ops.B @ u0_eff
    r = (ops.A_mu @ u0_eff - f0 + ops.A_eta @ scenario.v0 + ops.M @ scenario.w0
         + ops.B.T @ (ops.weights * scenario.law.dpsi_dw(jumps, xi0_eff)))
    res = float(np.abs(r[ops.free_dofs]).max(initial=0.0))
    tol_abs = 10.0 * tol * (1.0 + float(np.abs(f_eff).max(initial=0.0)))
    if res > tol_abs:
        raise EvolutionError(
            f"recomputed initial data are not stationary (residual {res:.3e})")
    return u0_eff, scenario.v0.copy(), xi0_eff


def run(scenario: Scenario, callbacks=None, tol: float = 1e-10,
        snapshot_stride: int = 1, ops: DiscreteOperators | None = None) -> TrajectoryRecord:
    """Execute the full time loop and return the trajectory record."""
    if snapshot_stride < 1:
        raise ValueError("snapshot_stride must be >= 1")
    if ops is None:
        ops = assemble(scenario.mesh, scenario.materials)
    law = scenario.law
    tau = scenario.tau
    n = scenario.n

    u0, v0, xi0 = regularize_initial_data(scenario, ops, tol=tol)
    u_prev = u0.copy()
    u_prev2 = u0 - tau * v0
    xi = xi0.copy()

    ws = StepWorkspace(ops, tau)
    f1 = load_vector(scenario.loads, tau)
    first = StepProblem(tau, u_prev, u_prev2, xi, f1, ops, law, ws)
    if not convexity_guard(first):
        raise ConvexityError(
            "incremental functional not provably convex; reduce the time step tau")

    P = scenario.mesh.n_pairs
    rec = TrajectoryRecord(
        ts=np.arange(n + 1) * tau,
        E=np.zeros(n + 1), K=np.zeros(n + 1), Psi=np.zeros(n + 1),
        Psi_s=np.zeros(n + 1), Psi_d=np.zeros(n + 1),
        D_cum=np.zeros(n + 1), P_cum=np.zeros(n + 1),
        kkt_admissibility=np.zeros(n + 1), kkt_complementarity=np.zeros(n + 1),
        kkt_slope=np.zeros(n + 1),
        newton_iters=np.zeros(n + 1, dtype=int), grad_norms=np.zeros(n + 1),
        el_residuals=np.zeros(n + 1), v_h1=np.zeros(n + 1), a_l2=np.zeros(n + 1),
        xis=np.zeros((n + 1, P)), jumps=np.zeros((n + 1, P)),
        snapshot_steps=[], us={}, vs={},
        ops=ops, law=law, loads=scenario.loads, tau=tau,
        initial_data=(u0, v0, xi0),
    )

    weights = ops.weights

    def record_scalars(k, u, v, xi_now):
        rec.E[k] = 0.5 * (u @ (ops.A_mu @ u))
        rec.K[k] = 0.5 * (v @ (ops.M @ v))
        jumps = ops.B @ u
        psi_s, psi_d = law.split(jumps, xi_now)
        rec.Psi[k] = weights @ (psi_s + psi_d)
        rec.Psi_s[k] = weights @ psi_s
        rec.Psi_d[k] = weights @ psi_d
        rec.xis[k] = xi_now
        rec.jumps[k] = jumps
        rec.v_h1[k] = ops.h1_norm(v)

    record_scalars(0, u0, v0, xi0)
    if scenario.regularity_mode:
        rec.a_l2[0] = ops.l2_norm(scenario.w0)
    rec.snapshot_steps.append(0)
    rec.us[0], rec.vs[0] = u0.copy(), v0.copy()

    v_prev = v0.copy()
    for k in range(1, n + 1):
        t_k = k * tau
        f_k = load_vector(scenario.loads, min(t_k, scenario.loads.t_final))
        prob = StepProblem(tau, u_prev, u_prev2, xi, f_k, ops, law, ws)
        try:
            res = solve_step(prob, tol=tol)
        except StepSolverError as exc:
            _truncate(rec, k - 1)
            raise EvolutionError(f"step {k} failed: {exc}", partial=rec,
                                 step=k) from exc
        u_k = res.u_new
        v_k = (u_k - u_prev) / tau
        xi_k = res.xi_new

        record_scalars(k, u_k, v_k, xi_k)
        rec.D_cum[k] = rec.D_cum[k - 1] + tau * (v_k @ (ops.A_eta @ v_k))
        rec.P_cum[k] = rec.P_cum[k - 1] + tau * (f_k @ v_k)
        jumps_k, jumps_prev = rec.jumps[k], rec.jumps[k - 1]
        rec.kkt_admissibility[k] = max(0.0, float((np.abs(jumps_k) - xi_k).max()))
        rec.kkt_complementarity[k] = float(
            np.abs((xi_k - xi) * (np.abs(jumps_k) - xi_k)).max())
        rec.kkt_slope[k] = max(0.0, float(
            (np.abs(xi_k - xi) - np.abs(jumps_k - jumps_prev)).max()))
        rec.newton_iters[k] = res.newton_iters
        rec.grad_norms[k] = res.grad_norm
        rec.el_residuals[k] = res.el_residual
        rec.a_l2[k] = ops.l2_norm((v_k - v_prev) / tau)

        if k % snapshot_stride == 0 or k == n:
            rec.snapshot_steps.append(k)
            rec.us[k], rec.vs[k] = u_k.copy(), v_k.copy()

        state = EvolutionState(t=t_k, u=u_k, v=v_k, xi=xi_k, k=k)
        if callbacks is not None:
            for cb in np.atleast_1d(callbacks):
                cb(state, res)

        u_prev2, u_prev = u_prev, u_k
        v_prev = v_k
        xi = xi_k

    rec.final_state = EvolutionState(t=n * tau, u=u_prev, v=v_prev, xi=xi, k=n)
    return rec


def _truncate(rec: TrajectoryRecord, last_k: int):
    for name in ("ts", "E", "K", "Psi", "Psi_s", "Psi_d", "D_cum", "P_cum",
                 "kkt_admissibility", "kkt_complementarity", "kkt_slope",
                 "newton_iters", "grad_norms", "el_residuals", "v_h1", "a_l2",
                 "xis", "jumps"):
        setattr(rec, name, getattr(rec, name)[: last_k + 1])


@dataclass
class EpsContinuationResult:
    """Records and pairwise trajectory distances of a history-floor sweep."""

    eps_list: list
    records: list            # TrajectoryRecord or None per entry
    errors: list             # exception or None per entry
    distances: list = field(default_factory=list)  # d(eps_i, eps_{i+1}) or None

    @property
    def all_succeeded(self) -> bool:
        return all(e is None for e in self.errors)


def eps_continuation(scenario: Scenario, eps_list, tol: float = 1e-10) -> EpsContinuationResult:
    """Run the evolution once per history floor and report Cauchy distances.

    ``eps_list`` must be decreasing and positive.  The distance between
    consecutive entries is ``max_k || u^i_k - u^j_k ||_L2``; failed runs are
    recorded and skipped in the distance list.
    """
    eps_list = [float(e) for e in eps_list]
    if any(e <= 0.0 for e in eps_list):
        raise ValueError("history floors must be positive")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing")

    records, errors = [], []
    for eps in eps_list:
        try:
            records.append(run(scenario.with_eps(eps), tol=tol, snapshot_stride=1))
            errors.append(None)
        except Exception as exc:  # keep sweeping; mark the entry failed
            records.append(None)
            errors.append(exc)

    result = EpsContinuationResult(eps_list, records, errors)
    ops = None
    for ra, rb in zip(records, records[1:]):
        if ra is None or rb is None:
            result.distances.append(None)
            continue
        ops = ra.ops
        d = 0.0
        for k in range(ra.n_steps + 1):
            d = max(d, ops.l2_norm(ra.us[k] - rb.us[k]))
        result.distances.append(d)
    return result
