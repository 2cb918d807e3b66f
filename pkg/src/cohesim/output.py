"""CSV ledgers and legacy-ASCII VTK frames.

All numbers are written with shortest round-trip ``repr``, so identical runs
produce bit-identical files.  Headers are part of the public contract:

energies.csv   step,t,E,K,Psi,Psi_s,Psi_d,D_cum,P_cum,R,R_split
kkt.csv        step,t,admissibility,complementarity,slope,xi_monotone
tractions.csv  step,t,max_abs_sigma_plus,max_abs_sigma_minus,
               max_transmission_defect,max_cohesive_defect,traction_bound
               (maxima over interior interface nodes; endpoints excluded)
study.csv      level,parameter,status,max_energy_residual,max_kkt_violation,
               distance_to_next,order
"""

from __future__ import annotations

import os

import numpy as np

from .audit import EnergyLedger, KKTReport, TractionField

__all__ = [
    "ENERGY_HEADER",
    "KKT_HEADER",
    "TRACTION_HEADER",
    "STUDY_HEADER",
    "write_energy_csv",
    "write_kkt_csv",
    "write_traction_csv",
    "write_study_csv",
    "write_vtk_frame",
]

ENERGY_HEADER = "step,t,E,K,Psi,Psi_s,Psi_d,D_cum,P_cum,R,R_split"
KKT_HEADER = "step,t,admissibility,complementarity,slope,xi_monotone"
TRACTION_HEADER = ("step,t,max_abs_sigma_plus,max_abs_sigma_minus,"
                   "max_transmission_defect,max_cohesive_defect,traction_bound")
STUDY_HEADER = ("level,parameter,status,max_energy_residual,max_kkt_violation,"
                "distance_to_next,order")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_rows(path, header: str, rows) -> None:
    with open(path, "w") as f:
        f.write(header + "\n")
        for row in rows:
            f.write(",".join(_fmt(v) for v in row) + "\n")


def write_energy_csv(path, ledger: EnergyLedger) -> None:
    rows = zip(range(ledger.ts.size), ledger.ts, ledger.E, ledger.K, ledger.Psi,
               ledger.Psi_s, ledger.Psi_d, ledger.D_cum, ledger.P_cum,
               ledger.R, ledger.R_split)
    _write_rows(path, ENERGY_HEADER, rows)


def write_kkt_csv(path, report: KKTReport) -> None:
    rows = zip(range(report.ts.size), report.ts, report.admissibility,
               report.complementarity, report.slope, report.xi_monotone)
    _write_rows(path, KKT_HEADER, rows)


def write_traction_csv(path, rows) -> None:
    """``rows``: iterable of (step, t, TractionField)."""
    table = []
    for step, t, tf in rows:
        table.append((step, t,
                      tf.max_interior(tf.sigma_plus),
                      tf.max_interior(tf.sigma_minus),
                      tf.max_interior(tf.transmission_defect),
                      tf.max_interior(tf.cohesive_defect),
                      tf.bound))
    _write_rows(path, TRACTION_HEADER, table)


def write_study_csv(path, rows) -> None:
    _write_rows(path, STUDY_HEADER, rows)


def write_vtk_frame(path, mesh, point_fields: dict) -> None:
    """Legacy ASCII unstructured-grid frame with nodal scalar fields."""
    tris = mesh.triangles
    with open(path, "w") as f:
        f.write("# vtk DataFile Version 2.0\n")
        f.write("cohesim fields\n")
        f.write("ASCII\n")
        f.write("DATASET UNSTRUCTURED_GRID\n")
        f.write(f"POINTS {mesh.n_nodes} double\n")
        for x, y in mesh.nodes:
            f.write(f"{_fmt(x)} {_fmt(y)} 0\n")
        f.write(f"CELLS {tris.shape[0]} {4 * tris.shape[0]}\n")
        for a, b, c in tris:
            f.write(f"3 {a} {b} {c}\n")
        f.write(f"CELL_TYPES {tris.shape[0]}\n")
        for _ in range(tris.shape[0]):
            f.write("5\n")
        f.write(f"POINT_DATA {mesh.n_nodes}\n")
        for name, values in point_fields.items():
            f.write(f"SCALARS {name} double\n")
            f.write("LOOKUP_TABLE default\n")
            for v in values:
                f.write(_fmt(v) + "\n")


def interface_field_on_nodes(mesh, values: np.ndarray) -> np.ndarray:
    """Scatter a per-pair interface field onto both paired nodes (0 elsewhere)."""
    out = np.zeros(mesh.n_nodes)
    out[mesh.interface_pairs[:, 0]] = values
    out[mesh.interface_pairs[:, 1]] = values
    return out


def ensure_dir(path) -> str:
    os.makedirs(path, exist_ok=True)
    return path
