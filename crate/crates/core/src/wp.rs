//! Energy along second-order Weil–Petersson rays: first-derivative identity, convexity
//! lower bounds, the power sweep `E^c`, and the curve-system energy demo.

use crate::error::Result;
use crate::family::{FamilySetup, Sweep};
use crate::fem::phi0;
use crate::harmonic::trace::{EnergyTrace, GridKind, TracePoint};
use crate::metric::wolf_threshold;
use crate::variation::MapData;
use serde::{Deserialize, Serialize};

/// Default spacing of the t-grid as a fraction of the positivity threshold.
pub const T_STEP_FRACTION: f64 = 0.02;
/// Default number of t samples.
pub const T_COUNT: usize = 9;
/// Relative tolerance of the first-derivative identity.
pub const FIRST_DERIVATIVE_TOL: f64 = 0.02;
/// Slack on the convexity lower bound.
pub const CONVEXITY_SLACK: f64 = 0.03;
/// Slack on `(dE/dt)² ≤ 6E d²E/dt²`.
pub const CAUCHY_SCHWARZ_SLACK: f64 = 0.05;
/// Smallest exponent with guaranteed convexity.
pub const CRITICAL_POWER: f64 = 5.0 / 6.0;

/// `dE/dt|₀ = Re ∫ g^{ij} u_i u_j q(u) dμ` at the base harmonic map.
pub fn wolf_slope(md: &MapData) -> f64 {
    let quad = &md.domain.fem.quad;
    md.st.iter().enumerate().map(|(i, s)| quad.points[i].weight * (md.q[i] * s.kuu2(&md.domain.kdom[i])).re).sum()
}

/// `Tr_g(u*Φ₀)` at quadrature point `i`.
pub fn trace_density(md: &MapData, i: usize) -> f64 {
    let s = &md.st[i];
    phi0(s.u) * s.kuu(&md.domain.kdom[i])
}

/// `∫ f(i) Tr_g(u*Φ₀) dμ`.
fn trace_integral(md: &MapData, f: impl Fn(usize) -> f64) -> f64 {
    let quad = &md.domain.fem.quad;
    (0..md.st.len()).map(|i| quad.points[i].weight * f(i) * trace_density(md, i)).sum()
}

/// `∫ α(u) Tr_g(u*Φ₀) dμ`, the lower bound for `d²E/dt²|₀`.
pub fn alpha_trace_bound(md: &MapData, alpha: &[f64]) -> f64 {
    trace_integral(md, |i| md.field_at_image(alpha, i))
}

/// `∫ |q|²/(3φ₀²) Tr_g(u*Φ₀) dμ`, the pointwise bound on `α` carried through the trace.
pub fn q_trace_bound(md: &MapData) -> f64 {
    trace_integral(md, |i| (md.q[i].norm() / phi0(md.st[i].u)).powi(2) / 3.0)
}

/// One ray with finite-difference derivatives at `t = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WpRay {
    pub label: String,
    pub threshold: f64,
    pub trace: EnergyTrace,
    pub energy: f64,
    pub d1: f64,
    /// `|D(s) − D(2s)|` for the first derivative.
    pub d1_noise: f64,
    pub d2: f64,
    pub d2_noise: f64,
    /// Third-derivative estimate, reported to show smoothness.
    pub d3: f64,
}

impl WpRay {
    pub fn from_trace(label: &str, threshold: f64, trace: EnergyTrace) -> Self {
        assert_eq!(trace.kind, GridKind::T);
        let e = EnergyTrace::energy;
        let d1 = trace.dt(e, 1);
        let d1_noise = if trace.max_t_spacing() >= 2 { (d1 - trace.dt(e, 2)).abs() } else { 0.0 };
        let (d2, d2_noise) = trace.d2t_with_noise(e);
        WpRay { label: label.into(), threshold, energy: trace.centre().energy, d1, d1_noise, d2, d2_noise, d3: trace.d3t(e), trace }
    }

    fn with_energy(&self, g: impl Fn(&TracePoint) -> f64) -> (f64, f64) {
        self.trace.d2t_with_noise(g)
    }
}

/// Samples `E(t)` on the symmetric grid `t = k·fraction·threshold` for every domain of
/// `setup`.
pub fn wp_energy_curve(setup: &FamilySetup, fraction: f64, count: usize, threads: usize) -> Result<(f64, Sweep)> {
    let threshold = wolf_threshold(setup.qd.sup_nu());
    let sweep = setup.sweep(GridKind::T, fraction * threshold, count, threads)?;
    Ok((threshold, sweep))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FirstDerivativeReport {
    pub fd: f64,
    pub analytic: f64,
    pub tol: f64,
    pub pass: bool,
}

/// FD `dE/dt|₀` against the analytic slope within 2% (absolute `1e-5·E` near zero).
pub fn first_derivative_check(ray: &WpRay, analytic: f64) -> FirstDerivativeReport {
    let tol = (FIRST_DERIVATIVE_TOL * analytic.abs()).max(1e-5 * ray.energy);
    FirstDerivativeReport { fd: ray.d1, analytic, tol, pass: (ray.d1 - analytic).abs() <= tol }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub d2: f64,
    pub noise: f64,
    pub alpha_bound: f64,
    pub q_bound: f64,
    /// `d2 − (1 − slack)·alpha_bound`.
    pub margin: f64,
    /// Zero differential: both sides vanish.
    pub degenerate: bool,
    pub pass: bool,
    /// `alpha_bound ≥ (1 − slack)·q_bound`.
    pub chain_pass: bool,
}

pub fn convexity_check(ray: &WpRay, alpha_bound: f64, q_bound: f64) -> ConvexityReport {
    let degenerate = alpha_bound.abs() <= 1e-14 && ray.d2.abs() <= ray.d2_noise.max(1e-12 * ray.energy);
    let margin = ray.d2 - (1.0 - CONVEXITY_SLACK) * alpha_bound;
    ConvexityReport {
        d2: ray.d2,
        noise: ray.d2_noise,
        alpha_bound,
        q_bound,
        margin,
        degenerate,
        pass: degenerate || (ray.d2 > 0.0 && margin >= 0.0),
        chain_pass: alpha_bound >= (1.0 - CONVEXITY_SLACK) * q_bound,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CauchySchwarzReport {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// `(dE/dt)² ≤ 6E d²E/dt²` with 5% slack.
pub fn cauchy_schwarz_check(ray: &WpRay) -> CauchySchwarzReport {
    let lhs = ray.d1 * ray.d1;
    let rhs = 6.0 * ray.energy * ray.d2;
    CauchySchwarzReport { lhs, rhs, pass: lhs <= (1.0 + CAUCHY_SCHWARZ_SLACK) * rhs + 1e-12 * ray.energy }
}

/// Rays for `q` and `s·q` sample the same metrics once the step shrinks by `s`, so the
/// derivatives scale by `s` and `s²` and the inequality is preserved.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub factor: f64,
    pub d1_ratio: f64,
    pub d2_ratio: f64,
    pub preserved: bool,
    pub pass: bool,
}

pub fn scaling_check(base: &WpRay, scaled: &WpRay, factor: f64) -> ScalingReport {
    let d1_ratio = if base.d1.abs() > 1e-12 * base.energy { scaled.d1 / base.d1 } else { factor };
    let d2_ratio = scaled.d2 / base.d2;
    let preserved = cauchy_schwarz_check(base).pass == cauchy_schwarz_check(scaled).pass;
    let ok = |r: f64, e: f64| (r / e - 1.0).abs() <= 1e-3;
    ScalingReport { factor, d1_ratio, d2_ratio, preserved, pass: preserved && ok(d1_ratio, factor) && ok(d2_ratio, factor * factor) }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerEntry {
    pub c: f64,
    /// `d²(E^c)/dt²|₀`.
    pub d2: f64,
    pub noise: f64,
    /// `d²(E^c)/(c E^{c−1}) = E'' + (c−1)E'²/E`, comparable across exponents.
    pub normalized: f64,
    /// Below the critical exponent nothing is claimed.
    pub asserted: bool,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerSweep {
    pub entries: Vec<PowerEntry>,
    /// Normalized margins increase with `c` over the asserted exponents.
    pub monotone: bool,
    pub pass: bool,
}

pub fn power_convexity_sweep(ray: &WpRay, cs: &[f64]) -> PowerSweep {
    let tiny = 1e-9;
    let mut entries: Vec<PowerEntry> = cs
        .iter()
        .map(|&c| {
            let (d2, noise) = ray.with_energy(|p| p.energy.powf(c));
            let normalized = d2 / (c * ray.energy.powf(c - 1.0));
            let asserted = c >= CRITICAL_POWER - tiny;
            let pass = if c > CRITICAL_POWER + tiny {
                d2 > 0.0
            } else if asserted {
                d2 >= -noise - 1e-12 * ray.energy.powf(c)
            } else {
                true
            };
            PowerEntry { c, d2, noise, normalized, asserted, pass }
        })
        .collect();
    let mut asserted: Vec<&PowerEntry> = entries.iter().filter(|e| e.asserted).collect();
    asserted.sort_by(|a, b| a.c.total_cmp(&b.c));
    let monotone = asserted.windows(2).all(|w| w[1].normalized >= w[0].normalized - w[0].noise.max(w[1].noise));
    let pass = monotone && entries.iter().all(|e| e.pass);
    entries.sort_by(|a, b| a.c.total_cmp(&b.c));
    PowerSweep { entries, monotone, pass }
}

/// `Σ ℓ_i²/ℓ_i(0)`.
pub fn curve_system_energy(lengths: &[f64], base: &[f64]) -> f64 {
    lengths.iter().zip(base).map(|(l, l0)| l * l / l0).sum()
}

/// Curve-system energies along a t-grid, summed from the per-class loop traces.
pub fn curve_system_trace(loops: &[EnergyTrace]) -> Vec<f64> {
    let n = loops[0].points.len();
    (0..n).map(|k| loops.iter().map(|t| t.points[k].energy).sum()).collect()
}

/// Discrete minimizer on a uniform grid with a convexity audit along the grid line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridMinimum {
    pub index: usize,
    pub argmin: f64,
    pub value: f64,
    /// Smallest second difference divided by `h²`.
    pub min_second_difference: f64,
    pub tol: f64,
    pub convex: bool,
}

/// `tol` bounds the second differences that count as convex; it should cover the solve
/// noise `~ rel_noise · E / h²`.
pub fn grid_minimize(params: &[f64], values: &[f64], tol: f64) -> GridMinimum {
    assert!(params.len() == values.len() && params.len() >= 3);
    let index = (0..values.len()).min_by(|&a, &b| values[a].total_cmp(&values[b])).expect("non-empty grid");
    let h = params[1] - params[0];
    let min_second_difference = values
        .windows(3)
        .map(|w| (w[0] - 2.0 * w[1] + w[2]) / (h * h))
        .fold(f64::INFINITY, f64::min);
    GridMinimum { index, argmin: params[index], value: values[index], min_second_difference, tol, convex: min_second_difference >= -tol }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonic::trace::grid_parameters;

    fn ray(step: f64, f: impl Fn(f64) -> f64) -> WpRay {
        let pts = grid_parameters(GridKind::T, step, 9)
            .unwrap()
            .into_iter()
            .map(|t| TracePoint { p1: t.re, p2: 0.0, energy: f(t.re), ell: None, residual: 0.0, iterations: 0 })
            .collect();
        WpRay::from_trace("test", 1.0, EnergyTrace::from_points(GridKind::T, step, 9, pts).unwrap())
    }

    #[test]
    fn constant_energy_is_degenerate() {
        let r = ray(0.01, |_| 12.0);
        let c = convexity_check(&r, 0.0, 0.0);
        assert!(c.degenerate && c.pass);
        assert!(cauchy_schwarz_check(&r).pass);
        assert!(first_derivative_check(&r, 0.0).pass);
    }

    #[test]
    fn quadratic_ray_derivatives() {
        let r = ray(0.01, |t| 12.0 + 0.5 * t + 7.0 * t * t);
        assert!((r.d1 - 0.5).abs() < 1e-9 && (r.d2 - 14.0).abs() < 1e-7);
        let c = convexity_check(&r, 7.0, 2.0);
        assert!(c.pass && c.chain_pass && c.margin > 0.0);
        assert!(!convexity_check(&r, 15.0, 2.0).pass);
        let cs = cauchy_schwarz_check(&r);
        assert!(cs.pass && cs.lhs < cs.rhs);
        assert!(first_derivative_check(&r, 0.505).pass);
        assert!(!first_derivative_check(&r, 0.6).pass);
    }

    #[test]
    fn power_sweep_follows_the_chain_rule() {
        let e = |t: f64| 12.0 + 3.0 * t + 7.0 * t * t;
        let r = ray(0.01, e);
        let sweep = power_convexity_sweep(&r, &[0.5, CRITICAL_POWER, 0.9, 1.0]);
        assert!(sweep.pass && sweep.monotone);
        let one = sweep.entries.iter().find(|x| x.c == 1.0).unwrap();
        assert!((one.d2 - r.d2).abs() < 1e-9);
        let c56 = sweep.entries.iter().find(|x| x.c == CRITICAL_POWER).unwrap();
        let exact = CRITICAL_POWER * 12f64.powf(-1.0 / 6.0) * (14.0 - 9.0 / (6.0 * 12.0));
        assert!((c56.d2 - exact).abs() < 1e-6);
        assert!(!sweep.entries[0].asserted);
    }

    #[test]
    fn power_sweep_flags_concavity_above_the_critical_exponent() {
        // E'' < E'²/(6E) makes E^{5/6} concave
        let r = ray(0.01, |t| 1.0 + 3.0 * t + 0.1 * t * t);
        let sweep = power_convexity_sweep(&r, &[CRITICAL_POWER, 1.0]);
        assert!(!sweep.pass);
        assert!(!cauchy_schwarz_check(&r).pass);
    }

    #[test]
    fn scaling_of_a_reparametrized_ray() {
        let e = |t: f64| 12.0 + 0.5 * t + 7.0 * t * t + t.powi(3);
        let base = ray(0.01, e);
        let scaled = ray(0.005, |t| e(2.0 * t));
        let s = scaling_check(&base, &scaled, 2.0);
        assert!(s.pass, "{s:?}");
    }

    #[test]
    fn grid_minimum_of_a_parabola() {
        let ts: Vec<f64> = (-4..=4).map(|k| k as f64 * 0.1).collect();
        let vals: Vec<f64> = ts.iter().map(|t| (t - 0.12).powi(2) + 3.0).collect();
        let m = grid_minimize(&ts, &vals, 1e-9);
        assert_eq!(m.index, 5);
        assert!(m.convex && (m.min_second_difference - 2.0).abs() < 1e-9);
        let single = curve_system_energy(&[2.5], &[2.5]);
        assert_eq!(single, 2.5);
    }
}
