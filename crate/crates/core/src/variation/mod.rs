//! Analytic first and second variations of harmonic-map energies and lengths, and
//! certificates comparing them with finite differences of sampled energies.

pub mod certify;
pub mod circle;
pub mod surface;

/// Constant relating the Beltrami slice parameter to the holomorphic coordinate in the
/// first-variation integrals. Fixed once from a single measurement and shared by every
/// domain, class and differential.
pub const SLICE_CALIBRATION: f64 = 0.5;

pub use certify::{log_sum_check, psh_certificate, remark_correction_check, LogSumCheck, PshCertificate, RemarkCheck};
pub use circle::{
    circle_first_variation, circle_second_variation, hodge_check, loop_energy_first_variation, raw_loop_variation,
    CircleSecondVariation, HodgeCheck, LoopSamples,
};
pub use surface::{
    c_phi_solve, c_term, first_variation, kodaira_spencer, raw_first_variation, second_variation, solve_w, CPhi,
    KsReport, MapData, SecondVariation, WSolution,
};
