"""Command-line front end.

    cohesim run <config.json> --out <dir> [--jobs N]
    cohesim study <study.json> --out <dir> [--jobs N]
    cohesim check-law <config.json>

Exit codes: 0 ok, 2 configuration, 3 solver, 4 I/O.  The environment
variable COHESIM_THREADS caps the number of concurrent study levels.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import sys

import numpy as np

from .audit import energy_ledger, kkt_report, traction_extraction
from .config import (
    ConfigError,
    ScenarioConfig,
    load_scenario_file,
    load_study_file,
    parse_scenario,
)
from .evolution import (
    EvolutionError,
    EvolutionState,
    eps_continuation,
    regularize_initial_data,
    run,
)
from .mesh import estimate_trace_constant
from .output import (
    ensure_dir,
    interface_field_on_nodes,
    write_energy_csv,
    write_kkt_csv,
    write_study_csv,
    write_traction_csv,
    write_vtk_frame,
)
from .step import ConvexityError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_IO = 4


class _TractionCollector:
    """Streams per-step traction summaries through the on_step callback."""

    def __init__(self, scenario, ops):
        self.scenario = scenario
        self.ops = ops
        self.prev = None
        self.rows = []

    def prime(self, u0, v0, xi0):
        self.prev = EvolutionState(t=0.0, u=u0, v=v0, xi=xi0, k=0)

    def __call__(self, state, step_result):
        f_k = self.scenario.loads.at(min(state.t, self.scenario.loads.t_final))
        tf = traction_extraction(self.prev, state, self.ops, self.scenario.law, f_k)
        self.rows.append((state.k, state.t, tf))
        self.prev = state


def _execute_run(cfg: ScenarioConfig, out_dir: str, write_vtk: bool | None = None):
    """Run one scenario and write its artifacts; returns (record, summary)."""
    from .assembly import assemble

    ensure_dir(out_dir)
    scenario = cfg.scenario
    ops = assemble(scenario.mesh, scenario.materials)
    collector = _TractionCollector(scenario, ops)
    collector.prime(*regularize_initial_data(scenario, ops))
    record = run(scenario, callbacks=collector, ops=ops,
                 snapshot_stride=cfg.output.snapshot_stride)

    ledger = energy_ledger(record)
    report = kkt_report(record)
    write_energy_csv(os.path.join(out_dir, "energies.csv"), ledger)
    write_kkt_csv(os.path.join(out_dir, "kkt.csv"), report)
    write_traction_csv(os.path.join(out_dir, "tractions.csv"), collector.rows)
    if write_vtk if write_vtk is not None else cfg.output.vtk:
        for frame, k in enumerate(record.snapshot_steps):
            fields = {
                "u": record.us[k],
                "v": record.vs[k],
                "xi": interface_field_on_nodes(scenario.mesh, record.xis[k]),
            }
            write_vtk_frame(os.path.join(out_dir, f"fields_{frame:04d}.vtk"),
                            scenario.mesh, fields)
    summary = (f"steps={record.n_steps} "
               f"max_energy_residual={ledger.max_residual:.6e} "
               f"max_kkt_violation={report.max_violation:.6e}")
    return record, summary


def cmd_run(args) -> int:
    try:
        cfg = load_scenario_file(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    out_dir = args.out or cfg.output.directory
    if not out_dir:
        print("config error: no output directory (use --out or output.dir)",
              file=sys.stderr)
        return EXIT_CONFIG
    try:
        _, summary = _execute_run(cfg, out_dir)
    except ConvexityError as exc:
        print(f"solver failure at step 1: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except EvolutionError as exc:
        print(f"solver failure at step {exc.step}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"ok: {summary}")
    return EXIT_OK


def _study_levels(spec):
    """Expand a study into per-level (label, parameter, ScenarioConfig)."""
    base_doc = spec.base.raw
    if spec.kind == "single":
        return [("level_00", spec.base.scenario.n, spec.base)]
    levels = []
    if spec.kind == "tau_refinement":
        for i in range(spec.levels):
            doc = json.loads(json.dumps(base_doc))
            doc["time"]["n"] = base_doc["time"]["n"] * 2**i
            levels.append((f"level_{i:02d}", doc["time"]["n"], parse_scenario(doc)))
    elif spec.kind == "h_refinement":
        if "path" in base_doc.get("mesh", {}):
            raise ConfigError("h_refinement requires an inline rectangle mesh")
        for i in range(spec.levels):
            doc = json.loads(json.dumps(base_doc))
            doc["mesh"]["n_x"] = base_doc["mesh"]["n_x"] * 2**i
            doc["mesh"]["n_y"] = base_doc["mesh"]["n_y"] * 2**i
            levels.append((f"level_{i:02d}", doc["mesh"]["n_x"], parse_scenario(doc)))
    return levels


def _node_injection(coarse_mesh, fine_mesh) -> np.ndarray:
    """Index of the fine node coincident (same body) with each coarse node."""
    from scipy.spatial import cKDTree

    def side_of_nodes(mesh):
        side = np.zeros(mesh.n_nodes, dtype=int)
        for s in (1, -1):
            side[np.unique(mesh.triangles[mesh.tri_side == s])] = s
        return side

    cs, fs = side_of_nodes(coarse_mesh), side_of_nodes(fine_mesh)
    out = np.zeros(coarse_mesh.n_nodes, dtype=int)
    tol = 1e-9 * max(1.0, np.abs(fine_mesh.nodes).max())
    for s in (1, -1):
        fine_idx = np.flatnonzero(fs == s)
        tree = cKDTree(fine_mesh.nodes[fine_idx])
        coarse_idx = np.flatnonzero(cs == s)
        dist, nearest = tree.query(coarse_mesh.nodes[coarse_idx])
        if dist.max() > tol:
            raise ConfigError("meshes are not nested; cannot compare levels")
        out[coarse_idx] = fine_idx[nearest]
    return out


def _run_level(label, cfg, out_root):
    try:
        record, _ = _execute_run(cfg, os.path.join(out_root, label))
        ledger = energy_ledger(record)
        report = kkt_report(record)
        return {"record": record, "ok": True,
                "max_R": ledger.max_residual, "max_kkt": report.max_violation}
    except (ConvexityError, EvolutionError) as exc:
        return {"record": None, "ok": False, "error": str(exc),
                "max_R": None, "max_kkt": None}


def _tau_distance(coarse_rec, fine_rec) -> float:
    ops = coarse_rec.ops
    d = 0.0
    for k in coarse_rec.snapshot_steps:
        t = coarse_rec.ts[k]
        kf = int(round(t / fine_rec.tau))
        if kf in fine_rec.us:
            d = max(d, ops.l2_norm(coarse_rec.us[k] - fine_rec.us[kf]))
    return d


def _h_distance(coarse_rec, fine_rec, injection) -> float:
    ops = coarse_rec.ops
    d = 0.0
    for k in coarse_rec.snapshot_steps:
        if k in fine_rec.us:
            d = max(d, ops.l2_norm(coarse_rec.us[k] - fine_rec.us[k][injection]))
    return d


def cmd_study(args) -> int:
    try:
        spec = load_study_file(args.study)
        levels = _study_levels(spec)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read study: {exc}", file=sys.stderr)
        return EXIT_IO
    out_root = ensure_dir(args.out)
    jobs = max(1, args.jobs)
    cap = os.environ.get("COHESIM_THREADS")
    if cap:
        jobs = min(jobs, max(1, int(cap)))

    if spec.kind == "eps_continuation":
        return _study_eps(spec, out_root)

    # snapshot strides that align comparison times across levels
    for i, (label, param, cfg) in enumerate(levels):
        if spec.kind == "tau_refinement":
            cfg.output.snapshot_stride = 2**i
        else:
            cfg.output.snapshot_stride = 1

    if jobs == 1:
        results = [_run_level(label, cfg, out_root) for label, _, cfg in levels]
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_level, label, cfg, out_root)
                       for label, _, cfg in levels]
            results = [f.result() for f in futures]

    distances = [None] * len(levels)
    for i in range(len(levels) - 1):
        ra, rb = results[i], results[i + 1]
        if not (ra["ok"] and rb["ok"]):
            continue
        if spec.kind == "tau_refinement":
            distances[i] = _tau_distance(ra["record"], rb["record"])
        elif spec.kind == "h_refinement":
            inj = _node_injection(levels[i][2].scenario.mesh,
                                  levels[i + 1][2].scenario.mesh)
            distances[i] = _h_distance(ra["record"], rb["record"], inj)

    rows = []
    for i, (label, param, _cfg) in enumerate(levels):
        res = results[i]
        order = None
        if (i + 1 < len(levels) and distances[i] not in (None, 0.0)
                and i + 1 < len(distances) and distances[i + 1] not in (None, 0.0)):
            order = float(np.log2(distances[i] / distances[i + 1]))
        rows.append((i, param, "ok" if res["ok"] else "failed",
                     res["max_R"], res["max_kkt"], distances[i], order))
    write_study_csv(os.path.join(out_root, "study.csv"), rows)

    ok = all(r["ok"] for r in results)
    print(f"{'ok' if ok else 'partial failure'}: {len(levels)} levels, "
          f"results in {out_root}/study.csv")
    return EXIT_OK if ok else EXIT_SOLVER


def _study_eps(spec, out_root) -> int:
    scenario = spec.base.scenario
    result = eps_continuation(scenario, list(spec.eps_list))
    rows = []
    for i, eps in enumerate(result.eps_list):
        rec, err = result.records[i], result.errors[i]
        if rec is not None:
            ledger = energy_ledger(rec)
            report = kkt_report(rec)
            max_r, max_k = ledger.max_residual, report.max_violation
        else:
            max_r = max_k = None
        dist = result.distances[i] if i < len(result.distances) else None
        order = None
        if (i + 1 < len(result.distances)
                and dist not in (None, 0.0)
                and result.distances[i + 1] not in (None, 0.0)):
            order = float(np.log2(dist / result.distances[i + 1]))
        rows.append((i, eps, "ok" if err is None else "failed",
                     max_r, max_k, dist, order))
    write_study_csv(os.path.join(out_root, "study.csv"), rows)
    ok = result.all_succeeded
    print(f"{'ok' if ok else 'partial failure'}: {len(result.eps_list)} levels, "
          f"results in {out_root}/study.csv")
    return EXIT_OK if ok else EXIT_SOLVER


def cmd_check_law(args) -> int:
    try:
        cfg = load_scenario_file(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    scenario = cfg.scenario
    law = scenario.law
    c = law.constants
    c_hat = estimate_trace_constant(scenario.mesh)
    margin = scenario.materials.mu_min * c_hat - c.beta
    print(f"law kind: {scenario.law.env.kind}")
    print(f"beta = {c.beta!r}")
    print(f"psi_prime_0 = {c.psi_prime_0!r}")
    print(f"lambda_conv = {c.lambda_conv!r}")
    print(f"H3 (concave slope): {'holds' if c.h3_holds else 'does not hold'}")
    print(f"c_hat = {c_hat!r}")
    print(f"H4 margin (mu*c_hat - beta) = {margin!r} "
          f"({'holds' if margin > 0 else 'does not hold'})")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cohesim",
        description="Cohesive-interface visco-elastodynamics simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario and write CSV/VTK artifacts")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--jobs", type=int, default=1)
    p_run.set_defaults(fn=cmd_run)

    p_study = sub.add_parser("study", help="run a refinement or continuation study")
    p_study.add_argument("study")
    p_study.add_argument("--out", required=True)
    p_study.add_argument("--jobs", type=int, default=1)
    p_study.set_defaults(fn=cmd_study)

    p_check = sub.add_parser("check-law", help="validate the law and report constants")
    p_check.add_argument("config")
    p_check.set_defaults(fn=cmd_check_law)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
