//! Length variations of closed geodesics along Beltrami deformations of the target.
//!
//! At `z = 0` the harmonic map from the circle of length `ℓ₀` is the constant-speed
//! axis `u(t)`, with `φ₀ |u_t|² = 2`. In the unit frame `e = u_t ∂_v` the pulled-back
//! Kodaira–Spencer form becomes the periodic function `f = ν(u) ū_t / u_t`.

use crate::error::Result;
use crate::fem::{phi0, Fem};
use crate::fuchsian::{FuchsianGroup, QuadraticDifferential};
use crate::harmonic::CircleDomain;
use crate::C64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

/// Base geodesic sampled at `N` equally spaced parameters `t_k = k ℓ₀ / N`.
#[derive(Clone, Debug)]
pub struct LoopSamples {
    pub period: f64,
    pub u: Vec<C64>,
    pub ut: Vec<C64>,
}

impl LoopSamples {
    pub fn new(dom: &CircleDomain) -> Self {
        let n = dom.n;
        let period = dom.base_length();
        let u: Vec<C64> = dom.base[..n].to_vec();
        // hyperbolic speed √2 and Euclidean speed (1-|u|²)/2 per unit hyperbolic length
        let ut = (0..n).map(|k| dom.axis.tangent(dom.arclength[k]) * (std::f64::consts::SQRT_2 * 0.5 * (1.0 - u[k].norm_sqr()))).collect();
        LoopSamples { period, u, ut }
    }

    pub fn dt(&self) -> f64 {
        self.period / self.u.len() as f64
    }

    /// `f = ν(u) ū_t / u_t`.
    pub fn frame_form(&self, qd: &QuadraticDifferential<f64>) -> Vec<C64> {
        self.u.iter().zip(&self.ut).map(|(&u, &ut)| qd.value(u).conj() / phi0(u) * ut.conj() / ut).collect()
    }
}

/// Uncalibrated loop integral `∫ q̄(u) ū_t² dt`.
pub fn raw_loop_variation(ls: &LoopSamples, qd: &QuadraticDifferential<f64>) -> C64 {
    ls.u.iter().zip(&ls.ut).map(|(&u, &ut)| qd.value(u).conj() * ut.conj() * ut.conj()).sum::<C64>() * ls.dt()
}

/// `⟨A, du⟩ = κ ∫ q̄(u) ū_t² dt`, the first variation of the loop energy.
pub fn loop_energy_first_variation(ls: &LoopSamples, qd: &QuadraticDifferential<f64>) -> C64 {
    raw_loop_variation(ls, qd) * super::SLICE_CALIBRATION
}

/// `∂ℓ/∂z = ½ ⟨A, du⟩`.
pub fn circle_first_variation(ls: &LoopSamples, qd: &QuadraticDifferential<f64>) -> C64 {
    loop_energy_first_variation(ls, qd) * 0.5
}

/// Multiplies the Fourier coefficients of a periodic sample vector by `m(ω)`.
pub fn fourier_multiplier(f: &[C64], period: f64, m: impl Fn(f64) -> f64) -> Vec<C64> {
    let n = f.len();
    let mut planner = FftPlanner::new();
    let mut buf = f.to_vec();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, b) in buf.iter_mut().enumerate() {
        let j = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        *b *= m(std::f64::consts::TAU * j / period) / n as f64;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CircleSecondVariation {
    /// `½ ∫ c(u) dt`.
    pub c_term: f64,
    /// `½ ∫ f̄ (2 - ∂_t²)⁻¹ f dt`.
    pub resolvent_term: f64,
    pub total: f64,
}

/// `∂∂̄ℓ` with `c` a P1 field on the octagon mesh.
pub fn circle_second_variation(ls: &LoopSamples, qd: &QuadraticDifferential<f64>, group: &FuchsianGroup<f64>, fem: &Fem, c: &[f64]) -> Result<CircleSecondVariation> {
    let dt = ls.dt();
    let mut c_term = 0.0;
    for &u in &ls.u {
        c_term += CircleDomain::field_at(group, fem, c, u)?;
    }
    c_term *= 0.5 * dt;
    let f = ls.frame_form(qd);
    let rf = fourier_multiplier(&f, ls.period, |w| 1.0 / (2.0 + w * w));
    let resolvent_term = 0.5 * dt * f.iter().zip(&rf).map(|(a, b)| (a.conj() * b).re).sum::<f64>();
    Ok(CircleSecondVariation { c_term, resolvent_term, total: c_term + resolvent_term })
}

/// Harmonic projection of the frame form against `du`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HodgeCheck {
    /// `max |f - Δ⁻¹Δ f - ⟨f, e⟩/ℓ₀|` relative to `max |f|`.
    pub residual: f64,
    /// `‖ℍA‖² = ℓ₀ |mean f|²`.
    pub harmonic_norm2: f64,
}

pub fn hodge_check(ls: &LoopSamples, qd: &QuadraticDifferential<f64>) -> HodgeCheck {
    let f = ls.frame_form(qd);
    let lap = fourier_multiplier(&f, ls.period, |w| w * w);
    let back = fourier_multiplier(&lap, ls.period, |w| if w == 0.0 { 0.0 } else { 1.0 / (w * w) });
    let mean = f.iter().sum::<C64>() / f.len() as f64;
    let scale = f.iter().fold(0.0f64, |m, x| m.max(x.norm())).max(f64::MIN_POSITIVE);
    let residual = f.iter().zip(&back).map(|(a, b)| (a - b - mean).norm()).fold(0.0, f64::max) / scale;
    HodgeCheck { residual, harmonic_norm2: ls.period * mean.norm_sqr() }
}
