"""Finite-element simulator for two visco-elastic bodies coupled across a
cohesive interface (anti-plane shear): implicit incremental time stepping
with a history-variable complementarity update and a full energy audit."""

from .assembly import DiscreteOperators, LoadModel, Materials, assemble, load_vector
from .audit import (
    EnergyLedger,
    KKTReport,
    TractionField,
    energy_ledger,
    kkt_report,
    regularity_norms,
    traction_extraction,
    weak_residual,
)
from .evolution import (
    EpsContinuationResult,
    EvolutionError,
    EvolutionState,
    Scenario,
    TrajectoryRecord,
    eps_continuation,
    regularize_initial_data,
    run,
)
from .law import (
    CohesiveLaw,
    HypothesisError,
    LawConstants,
    PrototypeEnvelope,
    TabulatedEnvelope,
    law_constants,
)
from .mesh import (
    InterfaceMesh,
    MeshError,
    build_rectangle_mesh,
    estimate_trace_constant,
    load_mesh,
    save_mesh,
    scaled,
)
from .step import (
    ConvexityError,
    StepProblem,
    StepResult,
    StepSolverError,
    StepWorkspace,
    convexity_guard,
    incremental_energy,
    solve_static,
    solve_step,
)

__version__ = "0.1.0"
