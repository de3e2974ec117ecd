"""Numerical conformal geometry of space-like hypersurfaces in Lorentzian space forms.

The library computes the conformal metric, the conformal form, the
Blaschke tensor and the conformal second fundamental form of regular
space-like hypersurface patches, verifies the structural identities these
invariants satisfy, and classifies hypersurfaces with parallel Blaschke
tensor into the branches of the underlying classification.
"""

from . import catalog as catalog  # populates the chart-template registry
from .chart import (
    AmbientForm,
    Box,
    ImmersionChart,
    RegularityReport,
    ShapeBatch,
    ShapeData,
    chart_from_dict,
    chart_to_dict,
    grid_points,
    load_chart,
    save_chart,
    shape_batch,
    shape_data,
    validate_regularity,
)
from .classifier import (
    ClassificationReport,
    EigenStructure,
    check_bibj,
    classify,
    classify_field,
    eigen_structure,
    gate_parallel,
    gate_phi,
)
from .config import FDConfig, NumericsConfig, DEFAULT
from .conformal_atlas import (
    ConformalMapTag,
    ProjectivePoint,
    compose_maps,
    conformality_witness,
    embed,
    lift_chart,
    projective_equal,
    psi,
    t_swap,
)
from .errors import (
    ChartDomainError,
    ComputationError,
    ConfGeoError,
    ConsistencyError,
    ConstructionError,
    DimensionMismatchError,
    DomainError,
    InputError,
    RegularityError,
    ValidationError,
)
from .invariants import (
    ConformalFrame,
    FrameRoute,
    InvariantField,
    InvariantTensors,
    TensorDerivatives,
    blaschke_and_b,
    conformal_frame,
    conformal_metric,
    conformal_position,
    covariant_derivatives,
    curvature_of_g,
    evaluate_field,
    field_report,
    field_report_csv,
    frame_route,
    identity_residuals,
)
from .pseudo_linalg import (
    PseudoVector,
    Signature,
    SymMatrix,
    cluster_eigenvalues,
    gram_schmidt_spacelike,
    inner,
    is_lightlike,
    sym_eigen,
)

__version__ = "0.1.0"
