"""Sparse P1 finite-element operators and time-dependent load vectors.

All bilinear forms carry the physical factor-1/2 convention of the energies:
``u' A_mu u = 2 E(u)`` (elastic), ``v' M v = 2 K(v)`` (kinetic) and
``v' A_eta v = D(v)`` (viscous dissipation rate, no 1/2).

Assembly is vectorized over elements; the resulting operators are immutable.
Dirichlet conditions are homogeneous and handled by restriction to the free
DOF set (no penalty terms).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .mesh import InterfaceMesh, MeshError

__all__ = [
    "Materials",
    "DiscreteOperators",
    "LoadModel",
    "assemble",
    "stiffness_matrix",
    "mass_matrix",
    "load_vector",
]

# degree-2 exact triangle rule (edge midpoints)
_TRI_QP = np.array([[0.5, 0.0], [0.5, 0.5], [0.0, 0.5]])
_TRI_QW = np.array([1.0, 1.0, 1.0]) / 3.0
# 2-point Gauss on [0, 1]
_EDGE_QP = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])
_EDGE_QW = np.array([0.5, 0.5])


@dataclass(frozen=True)
class Materials:
    """Constant-per-body density, shear modulus and Kelvin-Voigt viscosity."""

    rho_plus: float
    rho_minus: float
    mu_plus: float
    mu_minus: float
    eta_plus: float
    eta_minus: float

    def __post_init__(self):
        for name in ("rho_plus", "rho_minus", "mu_plus", "mu_minus", "eta_plus", "eta_minus"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"material parameter {name} must be positive")

    @classmethod
    def constant(cls, rho: float, mu: float, eta: float) -> "Materials":
        return cls(rho, rho, mu, mu, eta, eta)

    def field_values(self, which: str, tri_side: np.ndarray) -> np.ndarray:
        plus = getattr(self, which + "_plus")
        minus = getattr(self, which + "_minus")
        return np.where(tri_side > 0, plus, minus)

    @property
    def mu_min(self) -> float:
        return min(self.mu_plus, self.mu_minus)


def _coefficients(mesh: InterfaceMesh, coef) -> np.ndarray:
    """Per-triangle coefficient: None -> 1, Materials field pair, or array."""
    if coef is None:
        return np.ones(mesh.triangles.shape[0])
    if isinstance(coef, tuple) and len(coef) == 2:
        return np.where(mesh.tri_side > 0, coef[0], coef[1])
    c = np.asarray(coef, dtype=float)
    if c.shape != (mesh.triangles.shape[0],):
        raise ValueError("coefficient array must have one value per triangle")
    return c


def _geometry(mesh: InterfaceMesh):
    p = mesh.nodes[mesh.triangles]            # (M, 3, 2)
    v1 = p[:, 1] - p[:, 0]
    v2 = p[:, 2] - p[:, 0]
    area = 0.5 * (v1[:, 0] * v2[:, 1] - v2[:, 0] * v1[:, 1])
    bad = np.flatnonzero(area <= 0.0)
    if bad.size:
        raise MeshError(f"degenerate (zero-area) triangle {int(bad[0])}")
    # gradients of the three barycentric shape functions
    grads = np.empty((p.shape[0], 3, 2))
    for i in range(3):
        e = p[:, (i + 2) % 3] - p[:, (i + 1) % 3]
        grads[:, i, 0] = -e[:, 1]
        grads[:, i, 1] = e[:, 0]
    grads /= (2.0 * area)[:, None, None]
    return p, area, grads


def stiffness_matrix(mesh: InterfaceMesh, coef=None) -> sp.csr_matrix:
    """Assemble ``sum_T coef_T  int_T grad phi_i . grad phi_j``."""
    c = _coefficients(mesh, coef)
    _, area, grads = _geometry(mesh)
    local = np.einsum("tik,tjk->tij", grads, grads) * (c * area)[:, None, None]
    return _scatter(mesh, local)


def mass_matrix(mesh: InterfaceMesh, coef=None, lumped: bool = False) -> sp.csr_matrix:
    """Assemble ``sum_T coef_T int_T phi_i phi_j`` (consistent or lumped)."""
    c = _coefficients(mesh, coef)
    _, area, _ = _geometry(mesh)
    if lumped:
        local = np.zeros((area.size, 3, 3))
        local[:, [0, 1, 2], [0, 1, 2]] = (c * area / 3.0)[:, None]
    else:
        base = (np.ones((3, 3)) + np.eye(3)) / 12.0
        local = base[None, :, :] * (c * area)[:, None, None]
    return _scatter(mesh, local)


def _scatter(mesh: InterfaceMesh, local: np.ndarray) -> sp.csr_matrix:
    tris = mesh.triangles
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    A = sp.coo_matrix((local.ravel(), (rows, cols)),
                      shape=(mesh.n_nodes, mesh.n_nodes)).tocsr()
    A.sum_duplicates()
    return A


@dataclass
class DiscreteOperators:
    """Assembled operators of one (mesh, materials) pair.

    M            rho-weighted consistent mass (SPD)
    A_mu         mu-weighted stiffness (symmetric PSD, kernel = constants per body)
    A_eta        eta-weighted stiffness
    M_unit       unit-density mass, used for L2 norms and consistent loads
    A_unit       unit-coefficient stiffness, used for H1 norms and the trace constant
    B            jump operator (n_pairs x n_nodes)
    weights      interface quadrature weights w_j
    free_dofs    non-Dirichlet node indices
    """

    mesh: InterfaceMesh
    materials: Materials
    M: sp.csr_matrix
    A_mu: sp.csr_matrix
    A_eta: sp.csr_matrix
    M_unit: sp.csr_matrix
    A_unit: sp.csr_matrix
    B: sp.csr_matrix
    weights: np.ndarray
    free_dofs: np.ndarray
    _trace_constant: float | None = field(default=None, repr=False)

    @property
    def n_nodes(self) -> int:
        return self.M.shape[0]

    def trace_constant(self) -> float:
        """Cached unit-coefficient trace constant of the mesh."""
        if self._trace_constant is None:
            from .mesh import estimate_trace_constant
            self._trace_constant = estimate_trace_constant(self.mesh)
        return self._trace_constant

    def l2_norm(self, u: np.ndarray) -> float:
        return float(np.sqrt(max(u @ (self.M_unit @ u), 0.0)))

    def h1_norm(self, u: np.ndarray) -> float:
        q = u @ (self.A_unit @ u) + u @ (self.M_unit @ u)
        return float(np.sqrt(max(q, 0.0)))


def assemble(mesh: InterfaceMesh, materials: Materials, lumped_mass: bool = False) -> DiscreteOperators:
    """Build all sparse operators for the given mesh and materials."""
    M = mass_matrix(mesh, (materials.rho_plus, materials.rho_minus), lumped=lumped_mass)
    A_mu = stiffness_matrix(mesh, (materials.mu_plus, materials.mu_minus))
    A_eta = stiffness_matrix(mesh, (materials.eta_plus, materials.eta_minus))
    return DiscreteOperators(
        mesh=mesh,
        materials=materials,
        M=M,
        A_mu=A_mu,
        A_eta=A_eta,
        M_unit=mass_matrix(mesh),
        A_unit=stiffness_matrix(mesh),
        B=mesh.jump_operator(),
        weights=mesh.interface_weights.copy(),
        free_dofs=mesh.free_nodes,
    )


def _assemble_bulk_load(mesh: InterfaceMesh, fn, t: float) -> np.ndarray:
    p, area, _ = _geometry(mesh)
    F = np.zeros(mesh.n_nodes)
    for (l1, l2), wq in zip(_TRI_QP, _TRI_QW):
        lam = np.array([1.0 - l1 - l2, l1, l2])
        xq = np.einsum("i,tij->tj", lam, p)
        fv = np.asarray(fn(xq[:, 0], xq[:, 1], t), dtype=float)
        fv = np.broadcast_to(fv, (area.size,))
        contrib = (wq * area * fv)[:, None] * lam[None, :]
        np.add.at(F, mesh.triangles.ravel(), contrib.ravel())
    return F


def _assemble_surface_load(mesh: InterfaceMesh, fn, t: float) -> np.ndarray:
    F = np.zeros(mesh.n_nodes)
    if mesh.neumann_edges.size == 0:
        return F
    a = mesh.nodes[mesh.neumann_edges[:, 0]]
    b = mesh.nodes[mesh.neumann_edges[:, 1]]
    lengths = np.linalg.norm(b - a, axis=1)
    for s, wq in zip(_EDGE_QP, _EDGE_QW):
        xq = (1.0 - s) * a + s * b
        fv = np.asarray(fn(xq[:, 0], xq[:, 1], t), dtype=float)
        fv = np.broadcast_to(fv, (lengths.size,))
        common = wq * lengths * fv
        np.add.at(F, mesh.neumann_edges[:, 0], common * (1.0 - s))
        np.add.at(F, mesh.neumann_edges[:, 1], common * s)
    return F


class LoadModel:
    """External load sampled in time with piecewise-affine reconstruction.

    Consistent load vectors are assembled at the sample instants (bulk
    3-point rule per triangle, surface 2-point Gauss per Neumann edge, both
    exact against the P1 test space for affine data); between samples the
    assembled vectors are interpolated affinely, which commutes with the
    (linear) assembly.
    """

    def __init__(self, times: np.ndarray, vectors: np.ndarray, surface_is_zero: bool):
        times = np.asarray(times, dtype=float)
        vectors = np.asarray(vectors, dtype=float)
        if times.ndim != 1 or times.size < 1 or np.any(np.diff(times) <= 0.0):
            raise ValueError("load sample times must be strictly increasing")
        if vectors.shape[0] != times.size:
            raise ValueError("one assembled load vector per sample time required")
        self.times = times
        self.vectors = vectors
        self.surface_is_zero = bool(surface_is_zero)

    @classmethod
    def from_functions(cls, mesh: InterfaceMesh, times, bulk=None, surface=None) -> "LoadModel":
        """Sample ``bulk(x, y, t)`` and ``surface(x, y, t)`` on the given times."""
        times = np.asarray(times, dtype=float)
        F = np.zeros((times.size, mesh.n_nodes))
        for i, t in enumerate(times):
            if bulk is not None:
                F[i] += _assemble_bulk_load(mesh, bulk, float(t))
            if surface is not None:
                F[i] += _assemble_surface_load(mesh, surface, float(t))
        return cls(times, F, surface_is_zero=surface is None)

    @classmethod
    def zero(cls, mesh: InterfaceMesh, t_final: float) -> "LoadModel":
        return cls(np.array([0.0, t_final]), np.zeros((2, mesh.n_nodes)), surface_is_zero=True)

    @property
    def t_final(self) -> float:
        return float(self.times[-1])

    def at(self, t: float) -> np.ndarray:
        ts = self.times
        eps = 1e-12 * max(1.0, abs(self.t_final))
        if t < ts[0] - eps or t > ts[-1] + eps:
            raise ValueError(f"load requested at t={t} outside [{ts[0]}, {ts[-1]}]")
        t = min(max(t, ts[0]), ts[-1])
        k = int(np.searchsorted(ts, t, side="right") - 1)
        if k >= ts.size - 1:
            return self.vectors[-1].copy()
        theta = (t - ts[k]) / (ts[k + 1] - ts[k])
        return (1.0 - theta) * self.vectors[k] + theta * self.vectors[k + 1]


def load_vector(loads: LoadModel, t: float) -> np.ndarray:
    """Consistent nodal load at time ``t`` (affine between samples)."""
    return loads.at(t)
