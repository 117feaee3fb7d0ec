//! Static Hamilton-Jacobi-Bellman solvers on closed surfaces, posed on a
//! Cartesian narrow band around the surface.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod band;
pub mod export;
pub mod geometry;
pub mod hamiltonian;
pub mod metrics;
pub mod paths;
pub mod pointcloud;
pub mod solver_sweep;
pub mod solver_weno;
pub mod spatial;

pub use band::{
    BandError, BandNode, CartesianGrid, GhostClosure, GhostDepth, NarrowBand, NodeClass,
    DEFAULT_TARGET_RADIUS_CELLS,
};
pub use geometry::{
    b_tensor, closest_point, projection_jacobian, AnalyticSurface, ClosestPointMap,
    ClosestPointRecord, GeometryError, Point3, Vec3,
};
pub use hamiltonian::{
    hamiltonian_value, normal_curvature, speed, ControlDisc, CostModel, HamiltonianError,
    HamiltonianModel, ScalarField, SpeedModel,
};
pub use metrics::{ErrorReport, MetricsError};
pub use paths::{
    belt_sort, trace_anisotropic, trace_isotropic, PathConfig, PathError, SurfacePath, Termination,
};
pub use pointcloud::{CloudError, CloudSurface, LocalPatch, Orientation, PointCloud};
pub use solver_sweep::{sweep_solve, SolutionField, SolveError, SweepConfig};
pub use solver_weno::{steady_state_solve, TimeMarchConfig};
