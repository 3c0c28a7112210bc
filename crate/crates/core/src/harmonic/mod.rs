//! Harmonic maps into the target families: surfaces on the glued mesh and closed
//! geodesic representatives for circle domains.

pub mod circle;
pub mod surface;
pub mod target;
pub mod trace;

pub use surface::{solve, HarmonicMap, QuadState, SolverOptions, SurfaceDomain, SurfaceEnergy, SurfaceTarget};
pub use target::{PointEval, TargetKind};
pub use circle::{geodesic_representative, shorten_curve, CircleDomain, CircleTarget, ClosedGeodesic};
pub use trace::{grid_parameters, EnergyTrace, GridKind, TracePoint};
