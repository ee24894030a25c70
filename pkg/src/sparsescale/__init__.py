"""Scale-of-sparseness laboratory for periodic Navier-Stokes flows.

Simulate a Kida-vortex flow, extract regions of intense vorticity from the
component super-level sets, measure the largest inscribed sphere over them
and regress that scale against the diffusion scale.
"""

__version__ = "0.1.0"

from .field import GridSpec, curl, divergence, gradient, max_norm, transform_roundtrip
from .solver import SolverConfig, SolverState, kida_initial_condition, simulate, step
from .levelsets import (
    Riv,
    ZAlphaParams,
    component_parts,
    connected_components,
    sparseness_ratio,
    superlevel_mask,
    z_alpha_check,
)
from .geometry import (
    AabbTree,
    InscribedSphereResult,
    TriangleMesh,
    extract_isosurface,
    inside_test,
    max_inscribed_radius,
    max_radius_over_rivs,
    unsigned_distance,
    voxel_distance_oracle,
)
from .analysis import (
    RegressionResult,
    SparsenessRecord,
    assemble_timeseries,
    diffusion_scale,
    filter_cyclic,
    ingest_external_series,
    loglog_regression,
)
from .estimators import CyclicFilter, PowerLawRegressor, SparsenessScaleTransformer
