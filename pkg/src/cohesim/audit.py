"""Per-run verification: energy balance, complementarity, weak residual and
interface traction recovery.

The discrete energy ledger tracks, step by step,

    R_k = [E + Psi + K]_k - [E + Psi + K]_0 - P_cum,k + D_cum,k ,

which vanishes for the continuous evolution; its discrete magnitude measures
the time-discretization error and must shrink under step refinement.  The
split form replaces ``Psi`` by its stored part and books the interface
dissipation increments explicitly; the two residual families agree
algebraically.

Tractions are recovered by discrete Neumann extraction: interface hat
functions have one-sided support (duplicated DOFs), so pairing the bulk
residual ``M a + A_eta v + A_mu u - f`` with them isolates the boundary term
of one body, and dividing by the interface weight gives the nodal traction.
By the step's Euler-Lagrange equation this must match the cohesive traction
``dpsi_dw([u], xi)`` up to solver tolerance, with equal values from both
sides (transmission) and magnitude below the activation threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import DiscreteOperators
from .evolution import EvolutionState, TrajectoryRecord
from .law import CohesiveLaw

__all__ = [
    "EnergyLedger",
    "KKTReport",
    "TractionField",
    "energy_ledger",
    "kkt_report",
    "weak_residual",
    "traction_extraction",
    "regularity_norms",
]


@dataclass
class EnergyLedger:
    """Energy bookkeeping of one trajectory (arrays over steps 0..n)."""

    ts: np.ndarray
    E: np.ndarray
    K: np.ndarray
    Psi: np.ndarray
    Psi_s: np.ndarray
    Psi_d: np.ndarray
    D_cum: np.ndarray
    P_cum: np.ndarray
    R: np.ndarray
    R_split: np.ndarray

    @property
    def max_residual(self) -> float:
        return float(np.abs(self.R).max())

    @property
    def max_split_gap(self) -> float:
        return float(np.abs(self.R - self.R_split).max())


def energy_ledger(traj: TrajectoryRecord) -> EnergyLedger:
    """Assemble both energy-balance residual families from the recording."""
    total0 = traj.E[0] + traj.Psi[0] + traj.K[0]
    R = (traj.E + traj.Psi + traj.K) - total0 - traj.P_cum + traj.D_cum
    # split form: stored energies plus explicitly booked interface dissipation
    diss_increments = np.zeros_like(traj.Psi_d)
    diss_increments[1:] = np.diff(traj.Psi_d)
    diss_cum = np.cumsum(diss_increments)
    stored0 = traj.E[0] + traj.Psi_s[0] + traj.K[0]
    R_split = ((traj.E + traj.Psi_s + traj.K) - stored0
               - traj.P_cum + traj.D_cum + diss_cum)
    return EnergyLedger(ts=traj.ts, E=traj.E, K=traj.K, Psi=traj.Psi,
                        Psi_s=traj.Psi_s, Psi_d=traj.Psi_d,
                        D_cum=traj.D_cum, P_cum=traj.P_cum, R=R, R_split=R_split)


@dataclass
class KKTReport:
    """Max violations per step of the three discrete complementarity
    conditions plus the history slope bound."""

    ts: np.ndarray
    admissibility: np.ndarray      # max(0, |[u_k]| - xi_k)
    complementarity: np.ndarray    # max |(xi_k - xi_{k-1})(|[u_k]| - xi_k)|
    slope: np.ndarray              # max(0, |xi_k - xi_{k-1}| - |[u_k] - [u_{k-1}]|)
    xi_monotone: np.ndarray        # max(0, xi_{k-1} - xi_k)

    @property
    def max_violation(self) -> float:
        return float(max(self.admissibility.max(), self.complementarity.max(),
                         self.slope.max()))


def kkt_report(traj: TrajectoryRecord) -> KKTReport:
    xi_drop = np.zeros(traj.ts.size)
    if traj.ts.size > 1:
        xi_drop[1:] = np.maximum(0.0, (traj.xis[:-1] - traj.xis[1:]).max(axis=1))
    return KKTReport(ts=traj.ts,
                     admissibility=traj.kkt_admissibility.copy(),
                     complementarity=traj.kkt_complementarity.copy(),
                     slope=traj.kkt_slope.copy(),
                     xi_monotone=xi_drop)


def _bulk_residual(prev: EvolutionState, state: EvolutionState,
                   ops: DiscreteOperators, f_k: np.ndarray) -> np.ndarray:
    tau = state.t - prev.t
    if tau <= 0.0:
        raise ValueError("states must be consecutive in time")
    accel = (state.v - prev.v) / tau
    return ops.M @ accel + ops.A_eta @ state.v + ops.A_mu @ state.u - f_k


def weak_residual(prev: EvolutionState, state: EvolutionState,
                  ops: DiscreteOperators, law: CohesiveLaw,
                  f_k: np.ndarray) -> float:
    """Sup-norm of the discrete Euler-Lagrange defect at ``(u_k, v_k, xi_k)``."""
    r = _bulk_residual(prev, state, ops, f_k)
    r += ops.B.T @ (ops.weights * law.dpsi_dw(ops.B @ state.u, state.xi))
    return float(np.abs(r[ops.free_dofs]).max(initial=0.0))


@dataclass
class TractionField:
    """Nodal interface tractions recovered from the bulk residual."""

    sigma_plus: np.ndarray
    sigma_minus: np.ndarray
    cohesive: np.ndarray             # dpsi_dw([u]_j, xi_j)
    transmission_defect: np.ndarray  # |sigma_plus - sigma_minus|
    cohesive_defect: np.ndarray      # |sigma_plus - cohesive|
    interior: np.ndarray             # mask; endpoints of K excluded from checks
    bound: float                     # activation threshold psi_hat'(0)

    def max_interior(self, values: np.ndarray) -> float:
        if not np.any(self.interior):
            return 0.0
        return float(np.abs(values[self.interior]).max())


def traction_extraction(prev: EvolutionState, state: EvolutionState,
                        ops: DiscreteOperators, law: CohesiveLaw,
                        f_k: np.ndarray) -> TractionField:
    """Discrete Neumann extraction of ``sigma nu`` on both sides of K."""
    r = _bulk_residual(prev, state, ops, f_k)
    pairs = ops.mesh.interface_pairs
    w = ops.weights
    sigma_plus = -r[pairs[:, 0]] / w
    sigma_minus = r[pairs[:, 1]] / w
    cohesive = law.dpsi_dw(ops.B @ state.u, state.xi)
    return TractionField(
        sigma_plus=sigma_plus,
        sigma_minus=sigma_minus,
        cohesive=cohesive,
        transmission_defect=np.abs(sigma_plus - sigma_minus),
        cohesive_defect=np.abs(sigma_plus - cohesive),
        interior=~ops.mesh.interface_endpoint,
        bound=law.psi_prime_0,
    )


def regularity_norms(traj: TrajectoryRecord) -> tuple:
    """Sup over steps of ``|v_k|_H1`` and ``|(v_k - v_{k-1})/tau|_L2``."""
    return float(traj.v_h1.max()), float(traj.a_l2.max())
