pub mod error;
pub mod family;
pub mod fem;
pub mod fuchsian;
pub mod harmonic;
pub mod jet;
pub mod mesh;
pub mod metric;
pub mod par;
pub mod scalar;
pub mod sparse;
pub mod variation;
pub mod wp;

pub use error::{LabError, Result};
pub use scalar::Real;

/// Double-precision complex number.
pub type C64 = num_complex::Complex<f64>;
pub type MoebiusMap = fuchsian::Moebius<f64>;
pub type OctagonGroup = fuchsian::FuchsianGroup<f64>;
pub type QuadDiff = fuchsian::QuadraticDifferential<f64>;
