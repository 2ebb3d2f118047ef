"""parax: hierarchical paraxial field solver and PIC transport for
non-relativistic charged beams in the co-moving frame."""

from .config import RunConfig, parse_config, serialize_config
from .elliptic import (
    BoundarySpec,
    FaceBC,
    IncompatibleDataError,
    SolverError,
    SolverSettings,
    solve_anisotropic_poisson_3d,
    solve_divcurl_2d,
    solve_poisson_2d,
)
from .fields import ScalarField, VectorField2, read_field_csv, write_field_csv
from .hierarchy import (
    ExternalField,
    FieldHierarchy,
    FieldHistory,
    FieldOrder,
    HierarchySolver,
    SourceTerms,
    solve_hierarchy,
)
from .mesh import Mesh, build_mesh
from .pic import (
    ForceSample,
    ParticleEnsemble,
    SourceMoments,
    assemble_force,
    check_charge_conservation,
    deposit_sources,
    push_particles,
    run_pic,
    sample_initial_distribution,
)
from .scaling import (
    BeamFramePoint,
    PhysicalConstants,
    ScalingParameters,
    compute_scaling,
    from_beam_frame,
    nondimensionalize,
    redimensionalize,
    to_beam_frame,
)
from .verify import (
    ConvergenceReport,
    QuasiStaticMode,
    ResidualReport,
    convergence_study,
    eta_scaling_study,
    maxwell_residual,
    mms_case,
)

__version__ = "0.1.0"
