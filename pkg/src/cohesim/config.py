"""Scenario and study configuration files (JSON), schema-checked by hand.

Unknown keys are rejected everywhere; every diagnostic names the offending
``section.field``.  The scenario document has sections

    mesh            {"kind": "rectangle", "L", "n_x", "n_y", ["scale"]}
                    or {"path": "<mesh.json>"}
    materials       {"rho", "mu", "eta"} or the six per-body values
                    ("rho_plus", "rho_minus", ...)
    law             {"kind": "prototype", "g_c", "xi_c"} or
                    {"kind": "tabulated", "w": [...], "psi": [...], "dpsi": [...]}
    loads           {"bulk": expr|number, "surface": expr|number, ["samples"]}
    time            {"T", "n"}
    initial         {"u0", "v0", "xi0", ["w0"]}   (expressions in x, y)
    regularization  {"eps_bar", "regularity_mode"}
    output          {["dir"], ["snapshot_stride"], ["vtk"]}

and a study document is {"kind": ..., "base": <scenario>, ...} with kinds
``single``, ``tau_refinement``/``h_refinement`` (+ ``levels``) and
``eps_continuation`` (+ ``eps_list``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .assembly import LoadModel, Materials
from .evolution import Scenario
from .expressions import ExpressionError, compile_expression
from .law import CohesiveLaw, HypothesisError, PrototypeEnvelope, TabulatedEnvelope
from .mesh import InterfaceMesh, MeshError, build_rectangle_mesh, load_mesh, scaled

__all__ = ["ConfigError", "OutputOptions", "ScenarioConfig", "StudySpec",
           "load_scenario_file", "load_study_file", "parse_scenario", "parse_study"]


class ConfigError(ValueError):
    """Schema violation; the message names the offending field."""


def _section(doc: dict, name: str, required=(), optional=()) -> dict:
    if name not in doc:
        raise ConfigError(f"missing section '{name}'")
    sec = doc[name]
    if not isinstance(sec, dict):
        raise ConfigError(f"section '{name}' must be an object")
    allowed = set(required) | set(optional)
    for key in sec:
        if key not in allowed:
            raise ConfigError(f"unknown key '{name}.{key}'")
    for key in required:
        if key not in sec:
            raise ConfigError(f"missing key '{name}.{key}'")
    return sec


def _positive(sec: dict, section: str, key: str) -> float:
    val = sec[key]
    if not isinstance(val, (int, float)) or isinstance(val, bool) or val <= 0:
        raise ConfigError(f"'{section}.{key}' must be a positive number")
    return float(val)


def _expr(sec: dict, section: str, key: str, variables, default=None):
    if key not in sec:
        if default is None:
            raise ConfigError(f"missing key '{section}.{key}'")
        return compile_expression(default, variables)
    try:
        return compile_expression(sec[key], variables)
    except ExpressionError as exc:
        raise ConfigError(f"'{section}.{key}': {exc}") from exc


@dataclass
class OutputOptions:
    directory: str | None
    snapshot_stride: int
    vtk: bool


@dataclass
class ScenarioConfig:
    """Parsed scenario: a built :class:`Scenario` plus output options."""

    scenario: Scenario
    output: OutputOptions
    raw: dict


def _build_mesh(doc: dict) -> InterfaceMesh:
    sec = doc["mesh"]
    if not isinstance(sec, dict):
        raise ConfigError("section 'mesh' must be an object")
    if "path" in sec:
        extra = set(sec) - {"path"}
        if extra:
            raise ConfigError(f"unknown key 'mesh.{sorted(extra)[0]}'")
        try:
            return load_mesh(sec["path"])
        except FileNotFoundError as exc:
            raise ConfigError(f"'mesh.path': cannot read {sec['path']}") from exc
        except MeshError as exc:
            raise ConfigError(f"'mesh.path': {exc}") from exc
    sec = _section(doc, "mesh", required=("kind", "L", "n_x", "n_y"), optional=("scale",))
    if sec["kind"] != "rectangle":
        raise ConfigError("'mesh.kind' must be 'rectangle' (or use mesh.path)")
    L = _positive(sec, "mesh", "L")
    n_x, n_y = sec["n_x"], sec["n_y"]
    if not (isinstance(n_x, int) and isinstance(n_y, int) and n_x >= 1 and n_y >= 1):
        raise ConfigError("'mesh.n_x' and 'mesh.n_y' must be integers >= 1")
    try:
        mesh = build_rectangle_mesh(L, n_x, n_y)
    except MeshError as exc:
        raise ConfigError(f"mesh: {exc}") from exc
    if "scale" in sec:
        mesh = scaled(mesh, _positive(sec, "mesh", "scale"))
    return mesh


def _build_materials(doc: dict) -> Materials:
    sec = doc.get("materials")
    if not isinstance(sec, dict):
        raise ConfigError("missing section 'materials'")
    if "rho" in sec or "mu" in sec or "eta" in sec:
        sec = _section(doc, "materials", required=("rho", "mu", "eta"))
        try:
            return Materials.constant(_positive(sec, "materials", "rho"),
                                      _positive(sec, "materials", "mu"),
                                      _positive(sec, "materials", "eta"))
        except ValueError as exc:
            raise ConfigError(f"materials: {exc}") from exc
    keys = ("rho_plus", "rho_minus", "mu_plus", "mu_minus", "eta_plus", "eta_minus")
    sec = _section(doc, "materials", required=keys)
    try:
        return Materials(*[_positive(sec, "materials", k) for k in keys])
    except ValueError as exc:
        raise ConfigError(f"materials: {exc}") from exc


def build_law(doc: dict) -> CohesiveLaw:
    """Build and validate the cohesive law from the 'law' section."""
    sec = doc.get("law")
    if not isinstance(sec, dict) or "kind" not in sec:
        raise ConfigError("missing section 'law' with a 'kind'")
    if sec["kind"] == "prototype":
        sec = _section(doc, "law", required=("kind", "g_c", "xi_c"))
        env = PrototypeEnvelope(_positive(sec, "law", "g_c"),
                                _positive(sec, "law", "xi_c"))
    elif sec["kind"] == "tabulated":
        sec = _section(doc, "law", required=("kind", "w", "psi", "dpsi"),
                       optional=("d2psi",))
        env = TabulatedEnvelope(np.asarray(sec["w"], float),
                                np.asarray(sec["psi"], float),
                                np.asarray(sec["dpsi"], float),
                                None if "d2psi" not in sec
                                else np.asarray(sec["d2psi"], float))
    else:
        raise ConfigError("'law.kind' must be 'prototype' or 'tabulated'")
    return CohesiveLaw(env)


def parse_scenario(doc: dict) -> ScenarioConfig:
    """Validate a scenario document and construct the runnable Scenario."""
    if not isinstance(doc, dict):
        raise ConfigError("scenario document must be a JSON object")
    known = {"mesh", "materials", "law", "loads", "time", "initial",
             "regularization", "output"}
    for key in doc:
        if key not in known:
            raise ConfigError(f"unknown section '{key}'")

    mesh = _build_mesh(doc)
    materials = _build_materials(doc)
    try:
        law = build_law(doc)
    except HypothesisError as exc:
        raise ConfigError(f"law: {exc}") from exc

    tsec = _section(doc, "time", required=("T", "n"))
    T = _positive(tsec, "time", "T")
    n = tsec["n"]
    if not isinstance(n, int) or n < 1:
        raise ConfigError("'time.n' must be an integer >= 1")

    lsec = _section(doc, "loads", required=(), optional=("bulk", "surface", "samples"))
    bulk = _expr(lsec, "loads", "bulk", ("x", "y", "t"), default=0.0)
    surface = _expr(lsec, "loads", "surface", ("x", "y", "t"), default=0.0)
    samples = lsec.get("samples", n + 1)
    if not isinstance(samples, int) or samples < 2:
        raise ConfigError("'loads.samples' must be an integer >= 2")
    surface_zero = "surface" not in lsec or lsec["surface"] == 0
    times = np.linspace(0.0, T, samples)
    loads = LoadModel.from_functions(
        mesh, times,
        bulk=None if "bulk" not in lsec else
        (lambda x, y, t: bulk(x=x, y=y, t=t)),
        surface=None if surface_zero else
        (lambda x, y, t: surface(x=x, y=y, t=t)))

    isec = _section(doc, "initial", required=(), optional=("u0", "v0", "xi0", "w0"))
    xs, ys = mesh.nodes[:, 0], mesh.nodes[:, 1]
    u0 = np.asarray(_expr(isec, "initial", "u0", ("x", "y"), default=0.0)(x=xs, y=ys))
    v0 = np.asarray(_expr(isec, "initial", "v0", ("x", "y"), default=0.0)(x=xs, y=ys))
    px = mesh.nodes[mesh.interface_pairs[:, 0]]
    xi0 = np.asarray(_expr(isec, "initial", "xi0", ("x", "y"), default=0.0)(
        x=px[:, 0], y=px[:, 1]))
    w0 = None
    if "w0" in isec:
        w0 = np.asarray(_expr(isec, "initial", "w0", ("x", "y"))(x=xs, y=ys))

    rsec = _section(doc, "regularization", required=("eps_bar",),
                    optional=("regularity_mode",))
    eps_bar = _positive(rsec, "regularization", "eps_bar")
    reg_mode = rsec.get("regularity_mode", False)
    if not isinstance(reg_mode, bool):
        raise ConfigError("'regularization.regularity_mode' must be a boolean")

    osec = _section(doc, "output", required=(),
                    optional=("dir", "snapshot_stride", "vtk")) if "output" in doc else {}
    stride = osec.get("snapshot_stride", 1)
    if not isinstance(stride, int) or stride < 1:
        raise ConfigError("'output.snapshot_stride' must be an integer >= 1")
    vtk = osec.get("vtk", False)
    if not isinstance(vtk, bool):
        raise ConfigError("'output.vtk' must be a boolean")
    out = OutputOptions(directory=osec.get("dir"), snapshot_stride=stride, vtk=vtk)

    try:
        scenario = Scenario(mesh, materials, law, loads, T, n, u0, v0, xi0,
                            eps_bar, regularity_mode=reg_mode, w0=w0)
    except ValueError as exc:
        raise ConfigError(f"initial data: {exc}") from exc
    return ScenarioConfig(scenario=scenario, output=out, raw=doc)


@dataclass
class StudySpec:
    kind: str
    base: ScenarioConfig
    levels: int = 0
    eps_list: tuple = ()


def parse_study(doc: dict) -> StudySpec:
    if not isinstance(doc, dict):
        raise ConfigError("study document must be a JSON object")
    for key in doc:
        if key not in {"kind", "base", "levels", "eps_list"}:
            raise ConfigError(f"unknown key '{key}'")
    kind = doc.get("kind")
    if kind not in {"single", "tau_refinement", "eps_continuation", "h_refinement"}:
        raise ConfigError("'kind' must be one of single, tau_refinement, "
                          "eps_continuation, h_refinement")
    if "base" not in doc:
        raise ConfigError("missing key 'base'")
    base = parse_scenario(doc["base"])
    levels = 0
    eps_list: tuple = ()
    if kind in ("tau_refinement", "h_refinement"):
        levels = doc.get("levels")
        if not isinstance(levels, int) or levels < 2:
            raise ConfigError("'levels' must be an integer >= 2 for refinement studies")
    if kind == "eps_continuation":
        eps_list = tuple(doc.get("eps_list", ()))
        if len(eps_list) < 2 or any(not isinstance(e, (int, float)) or e <= 0
                                    for e in eps_list):
            raise ConfigError("'eps_list' must hold >= 2 positive numbers")
        if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
            raise ConfigError("'eps_list' must be strictly decreasing")
    if kind == "single" and ("levels" in doc or "eps_list" in doc):
        raise ConfigError("'single' studies take no levels/eps_list")
    return StudySpec(kind=kind, base=base, levels=levels, eps_list=eps_list)


def load_scenario_file(path) -> ScenarioConfig:
    with open(path) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}")
    return parse_scenario(doc)


def load_study_file(path) -> StudySpec:
    with open(path) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}")
    return parse_study(doc)
