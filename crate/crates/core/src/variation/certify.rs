//! Finite-difference certificates read off energy traces.
//!
//! Every certificate takes a trace at step `h` and optionally one at `h/2`; the
//! Richardson difference between the two is the stencil noise that widens tolerances.

use crate::harmonic::trace::{richardson, EnergyTrace, TracePoint};
use serde::{Deserialize, Serialize};

/// Relative tolerance of the plurisubharmonicity margin.
pub const PSH_SLACK: f64 = 0.03;
/// Relative tolerance of the length/energy correction identity.
pub const REMARK_TOL: f64 = 0.03;

fn ddbar_estimate(h: &EnergyTrace, h2: Option<&EnergyTrace>, g: impl Fn(&TracePoint) -> f64 + Copy) -> (f64, f64) {
    let coarse = h.ddbar(g);
    match h2 {
        Some(t) => richardson(coarse, t.ddbar(g)),
        None => (coarse, 0.0),
    }
}

/// `m1 = ∂∂̄ log E` by finite differences against `m2 = ∫c|du|²/‖du‖²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PshCertificate {
    pub m1: f64,
    pub m2: f64,
    pub noise: f64,
    pub tol: f64,
    /// `m2` vanishes: the family is infinitesimally trivial and the pass is vacuous.
    pub degenerate: bool,
    pub pass: bool,
}

/// `c_term = ½∫c|du|²` and `‖du‖² = 2E` give `m2 = c_term/E(0)`.
pub fn psh_certificate(h: &EnergyTrace, h2: Option<&EnergyTrace>, c_term: f64) -> PshCertificate {
    let (m1, noise) = ddbar_estimate(h, h2, |p| p.energy.ln());
    let m2 = c_term / h.centre().energy;
    let degenerate = m2.abs() <= 1e-14;
    let tol = (PSH_SLACK * m2.abs()).max(noise);
    let pass = degenerate || (m2 > 0.0 && m1 >= m2 - tol);
    PshCertificate { m1, m2, noise, tol, degenerate, pass }
}

/// `∂∂̄ log(E₁ + E₂) ≥ −noise`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogSumCheck {
    pub value: f64,
    pub noise: f64,
    pub pass: bool,
}

pub fn log_sum_check(a: (&EnergyTrace, Option<&EnergyTrace>), b: (&EnergyTrace, Option<&EnergyTrace>)) -> LogSumCheck {
    let sum = |x: &EnergyTrace, y: &EnergyTrace| -> EnergyTrace {
        let mut s = x.clone();
        for (p, q) in s.points.iter_mut().zip(&y.points) {
            p.energy += q.energy;
        }
        s
    };
    let h = sum(a.0, b.0);
    let h2 = match (a.1, b.1) {
        (Some(x), Some(y)) => Some(sum(x, y)),
        _ => None,
    };
    let (value, noise) = ddbar_estimate(&h, h2.as_ref(), |p| p.energy.ln());
    LogSumCheck { value, noise, pass: value >= -noise }
}

/// `∂∂̄ℓ` against `½∂∂̄E − |∂E/∂z|²/(4ℓ₀)` on a loop trace, and the same identity with
/// the correction dropped as a regression guard.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemarkCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub wrong_rhs: f64,
    pub rel_err: f64,
    pub wrong_rel_err: f64,
    pub pass: bool,
    /// The uncorrected formula is rejected at the same tolerance.
    pub guard: bool,
}

pub fn remark_correction_check(h: &EnergyTrace, h2: Option<&EnergyTrace>, ell0: f64) -> RemarkCheck {
    let ell = |p: &TracePoint| p.ell.expect("loop trace carries lengths");
    let (lhs, _) = ddbar_estimate(h, h2, ell);
    let (e2, _) = ddbar_estimate(h, h2, EnergyTrace::energy);
    let de = match h2 {
        Some(t) => (t.dz(EnergyTrace::energy) * 4.0 - h.dz(EnergyTrace::energy)) / 3.0,
        None => h.dz(EnergyTrace::energy),
    };
    let rhs = 0.5 * e2 - de.norm_sqr() / (4.0 * ell0);
    let wrong_rhs = 0.5 * e2;
    let scale = lhs.abs().max(f64::MIN_POSITIVE);
    let rel_err = (lhs - rhs).abs() / scale;
    let wrong_rel_err = (lhs - wrong_rhs).abs() / scale;
    let trivial = lhs.abs() < 1e-14 && rhs.abs() < 1e-14;
    RemarkCheck {
        lhs,
        rhs,
        wrong_rhs,
        rel_err,
        wrong_rel_err,
        pass: trivial || rel_err <= REMARK_TOL,
        guard: trivial || wrong_rel_err > REMARK_TOL,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonic::trace::{grid_parameters, GridKind};
    use crate::C64;

    fn trace(h: f64, f: impl Fn(C64) -> (f64, Option<f64>)) -> EnergyTrace {
        let pts = grid_parameters(GridKind::Z, h, 3)
            .unwrap()
            .into_iter()
            .map(|z| {
                let (e, l) = f(z);
                TracePoint { p1: z.re, p2: z.im, energy: e, ell: l, residual: 0.0, iterations: 0 }
            })
            .collect();
        EnergyTrace::from_points(GridKind::Z, h, 3, pts).unwrap()
    }

    #[test]
    fn constant_family_is_degenerate() {
        let t = trace(0.02, |_| (5.0, None));
        let c = psh_certificate(&t, None, 0.0);
        assert!(c.degenerate && c.pass && c.m1.abs() < 1e-12);
    }

    #[test]
    fn log_of_exp_quadratic_is_certified() {
        // E = exp(a|z|² + Re(bz)), log E has ∂∂̄ = a
        let e = |z: C64| (0.7 * z.norm_sqr() + (C64::new(0.3, 0.2) * z).re).exp();
        let (t1, t2) = (trace(0.02, |z| (e(z), None)), trace(0.01, |z| (e(z), None)));
        let c = psh_certificate(&t1, Some(&t2), 0.69 * e(C64::new(0.0, 0.0)));
        assert!((c.m1 - 0.7).abs() < 1e-6 && c.pass, "{c:?}");
        let c = psh_certificate(&t1, Some(&t2), 0.8);
        assert!(!c.pass);
        let s = log_sum_check((&t1, Some(&t2)), (&t1, Some(&t2)));
        assert!(s.pass && (s.value - 0.7).abs() < 1e-6);
    }

    #[test]
    fn remark_identity_on_an_exact_length_family() {
        // ℓ(z) = ℓ₀ + Re(a z) + b|z|², E = ℓ²/ℓ₀
        let l0 = 2.0;
        let ell = |z: C64| l0 + (C64::new(0.4, -0.1) * z).re + 0.3 * z.norm_sqr();
        let f = |z: C64| (ell(z) * ell(z) / l0, Some(ell(z)));
        let r = remark_correction_check(&trace(0.02, f), Some(&trace(0.01, f)), l0);
        assert!(r.pass && r.guard, "{r:?}");
        assert!(r.rel_err < 1e-6);
    }
}
