//! Hyperbolic geometry of the octagon group.

pub mod group;
pub mod moebius;
pub mod series;

pub use group::{FuchsianGroup, GroupElement, RELATOR, SIDES};
pub use moebius::{Axis, Moebius};
pub use series::{automorphy_defect, automorphy_profile, octagon_samples, PoincareSeries, QuadraticDifferential, Seed};
