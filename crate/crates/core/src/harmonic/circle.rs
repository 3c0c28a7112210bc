//! Closed geodesic representatives of a free homotopy class, as the harmonic maps
//! from a circle of the base length.
//!
//! The loop is sampled at `N` points `c_k = p_k + η_k n_k` displaced from the base axis
//! along its Euclidean normal, with `c_N = γ(c_0)`. Each chart chord `[c_k, c_{k+1}]`
//! is measured in the target metric with two-point Gauss quadrature. The first node
//! uses the scalar-field model of sample `k` and the second that of sample `k+1`, so
//! the discrete length is smooth in `η`. Lengths are reported in the normalization
//! `ℓ = ℓ_hyp/√2`, which makes the constant-speed energy `E = ℓ²/ℓ₀` exactly.

use super::target::{self, PointEval, TargetKind};
use crate::error::{LabError, Result};
use crate::fem::Fem;
use crate::fuchsian::{Axis, FuchsianGroup, Moebius, QuadraticDifferential};
use crate::C64;
use serde::{Deserialize, Serialize};

pub const DEFAULT_SAMPLES: usize = 512;
const GAUSS2: [f64; 2] = [0.211_324_865_405_187_1, 0.788_675_134_594_812_9];

/// A P1 field read back on the target through reduction into the octagon.
#[derive(Clone, Copy, Debug)]
struct FieldChart {
    map: Moebius<f64>,
    tri: usize,
}

/// Sampled base axis of a hyperbolic class.
#[derive(Clone, Debug)]
pub struct CircleDomain {
    pub class: Moebius<f64>,
    pub axis: Axis<f64>,
    pub n: usize,
    /// Base points `p_0 … p_N` with `p_N = γ(p_0)`.
    pub base: Vec<C64>,
    /// Unit Euclidean normals at the base points.
    pub normals: Vec<C64>,
    /// Arclength positions of the samples along the axis.
    pub arclength: Vec<f64>,
    charts: Vec<FieldChart>,
}

impl CircleDomain {
    /// Samples the axis of `class` at `n` points; `fem` enables P1 field evaluation.
    pub fn new(group: &FuchsianGroup<f64>, class: Moebius<f64>, n: usize, fem: Option<&Fem>) -> Result<Self> {
        if n < 8 || n % 4 != 0 {
            return Err(LabError::config("samples", "must be a multiple of 4 and at least 8"));
        }
        let axis = class.axis()?;
        let len = axis.length;
        // one period centred on the point nearest the origin keeps samples well inside
        // the radius where the compressed series is valid
        let arclength: Vec<f64> = (0..=n).map(|k| len * (k as f64 / n as f64 - 0.5)).collect();
        let mut base: Vec<C64> = arclength.iter().map(|&s| axis.point(s)).collect();
        base[n] = class.apply(base[0]);
        let mut normals: Vec<C64> = arclength.iter().map(|&s| axis.tangent(s) * C64::i()).collect();
        let t0 = class.deriv(base[0]) * normals[0];
        normals[n] = t0 / t0.norm();
        let mut charts = Vec::new();
        if let Some(fem) = fem {
            for &p in &base {
                let (x, map) = group.reduce(p)?;
                let (tri, _) = fem.mesh.locate(x).ok_or_else(|| LabError::PointLocation(format!("{x}")))?;
                charts.push(FieldChart { map, tri });
            }
        }
        Ok(CircleDomain { class, axis, n, base, normals, arclength, charts })
    }

    /// Base length `ℓ₀ = ℓ_hyp/√2`.
    pub fn base_length(&self) -> f64 {
        self.axis.length / std::f64::consts::SQRT_2
    }

    /// Sample positions for the displacements `eta` (`N + 1` points).
    pub fn points(&self, eta: &[f64]) -> Vec<C64> {
        let mut c: Vec<C64> = (0..self.n).map(|k| self.base[k] + self.normals[k] * eta[k]).collect();
        c.push(self.class.apply(c[0]));
        c
    }

    /// `∂c_N/∂η_0`.
    fn last_normal(&self, eta: &[f64]) -> C64 {
        self.class.deriv(self.base[0] + self.normals[0] * eta[0]) * self.normals[0]
    }

    /// Sum of hyperbolic distances between consecutive samples, normalized by `1/√2`.
    pub fn polyline_length(&self, eta: &[f64]) -> f64 {
        let c = self.points(eta);
        c.windows(2).map(|w| hyperbolic_distance(w[0], w[1])).sum::<f64>() / std::f64::consts::SQRT_2
    }

    /// P1 field `f` and `∂_v f` at `x` through the chart of sample `k`.
    fn field(&self, fem: &Fem, f: &[f64], k: usize, x: C64) -> (f64, C64) {
        let ch = self.charts[k];
        let y = ch.map.apply(x);
        let g = fem.gradient(f, ch.tri);
        let df = C64::new(0.5 * g[0], -0.5 * g[1]) * ch.map.deriv(x);
        (fem.eval_affine(f, ch.tri, y), df)
    }

    /// P1 field at `x`, located exactly in the mesh after reduction.
    pub fn field_at(group: &FuchsianGroup<f64>, fem: &Fem, f: &[f64], x: C64) -> Result<f64> {
        let (y, _) = group.reduce(x)?;
        let (tri, _) = fem.mesh.locate(y).ok_or_else(|| LabError::PointLocation(format!("{y}")))?;
        Ok(fem.eval_affine(f, tri, y))
    }
}

pub fn hyperbolic_distance(a: C64, b: C64) -> f64 {
    let t = ((a - b) / (C64::new(1.0, 0.0) - a.conj() * b)).norm();
    2.0 * t.atanh()
}

/// Target family for loops.
#[derive(Clone, Copy, Debug)]
pub struct CircleTarget<'a> {
    pub kind: TargetKind,
    pub qd: Option<&'a QuadraticDifferential<f64>>,
    /// `w` or `α` with the mesh it lives on.
    pub field: Option<(&'a Fem<'a>, &'a [f64])>,
}

impl<'a> CircleTarget<'a> {
    pub fn base() -> Self {
        CircleTarget { kind: TargetKind::Scaled { s: 0.0 }, qd: None, field: None }
    }

    fn eval(&self, dom: &CircleDomain, k: usize, x: C64) -> PointEval {
        let (q, dq) = match self.qd {
            Some(qd) => {
                let j = qd.jet(x);
                (j[0], j[1])
            }
            None => (C64::new(0.0, 0.0), C64::new(0.0, 0.0)),
        };
        let (f, df) = match self.field {
            Some((fem, f)) => dom.field(fem, f, k, x),
            None => (0.0, C64::new(0.0, 0.0)),
        };
        target::eval(self.kind, x, q, dq, f, df)
    }
}

/// Converged loop.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClosedGeodesic {
    pub eta: Vec<f64>,
    /// `ℓ = ℓ_hyp/√2` of the discrete loop.
    pub length: f64,
    /// `max_k |∂ℓ/∂η_k|`.
    pub residual: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
}

/// Discrete length (normalized) and its gradient in `η`.
pub fn length_and_gradient(dom: &CircleDomain, tg: &CircleTarget, eta: &[f64], want_grad: bool) -> (f64, Vec<f64>) {
    let n = dom.n;
    let c = dom.points(eta);
    let nn = dom.last_normal(eta);
    let norm = 1.0 / std::f64::consts::SQRT_2;
    let mut len = 0.0;
    let mut g = vec![0.0; if want_grad { n } else { 0 }];
    for k in 0..n {
        let d = c[k + 1] - c[k];
        let (nk, nk1) = (dom.normals[k], if k + 1 == n { nn } else { dom.normals[k + 1] });
        for (gi, &tau) in GAUSS2.iter().enumerate() {
            let x = c[k] + d * tau;
            let pe = tg.eval(dom, k + gi, x);
            let h = pe.norm_sq(d);
            let sq = h.max(0.0).sqrt();
            len += 0.5 * sq;
            if want_grad && sq > 0.0 {
                let dhx = pe.ds * d.norm_sqr() + pe.dqq * d * d + pe.dqq_bar.conj() * d.conj() * d.conj();
                let dhd = d.conj() * pe.s + pe.qq * d * 2.0;
                let coef = 0.5 / (2.0 * sq) * 2.0;
                let da = (dhx * (1.0 - tau) - dhd) * nk;
                let db = (dhx * tau + dhd) * nk1;
                g[k] += coef * da.re;
                g[(k + 1) % n] += coef * db.re;
            }
        }
    }
    (len * norm, g.into_iter().map(|x| x * norm).collect())
}

/// Newton iteration with a colored finite-difference Hessian.
pub fn shorten_curve(dom: &CircleDomain, tg: &CircleTarget, start: Option<&[f64]>) -> Result<ClosedGeodesic> {
    let n = dom.n;
    let mut eta = start.map_or_else(|| vec![0.0; n], |s| s.to_vec());
    let (mut len, mut g) = length_and_gradient(dom, tg, &eta, true);
    let mut history = vec![len];
    let tol = 1e-11 * len;
    for it in 0..60 {
        let res = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if res <= tol {
            return Ok(ClosedGeodesic { eta, length: len, residual: res, iterations: it, history });
        }
        let hess = colored_hessian(dom, tg, &eta);
        let step = solve_dense(hess, g.iter().map(|x| -x).collect())?;
        let slope: f64 = step.iter().zip(&g).map(|(a, b)| a * b).sum();
        let mut lambda = 1.0;
        let mut done = false;
        for _ in 0..30 {
            let trial: Vec<f64> = eta.iter().zip(&step).map(|(e, s)| e + lambda * s).collect();
            let (lt, gt) = length_and_gradient(dom, tg, &trial, true);
            let rt = gt.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if lt <= len + 1e-4 * lambda * slope || ((lt - len).abs() <= 1e-14 * len && rt < res) {
                eta = trial;
                len = lt;
                g = gt;
                done = true;
                break;
            }
            lambda *= 0.5;
        }
        if !done {
            let res = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            // stalled at roundoff: accept when already within a loose tolerance
            if res <= 1e-10 * len {
                return Ok(ClosedGeodesic { eta, length: len, residual: res, iterations: it, history });
            }
            return Err(LabError::LineSearchFailed(30));
        }
        history.push(len);
    }
    let res = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Err(LabError::NotConverged { what: "curve shortening".into(), iterations: 60, residual: res })
}

/// Cyclic tridiagonal Hessian from four colored gradient differences.
fn colored_hessian(dom: &CircleDomain, tg: &CircleTarget, eta: &[f64]) -> Vec<Vec<f64>> {
    let n = dom.n;
    let h = 1e-6;
    let mut hess = vec![vec![0.0; n]; n];
    for color in 0..4 {
        let mut ep = eta.to_vec();
        let mut em = eta.to_vec();
        for j in (color..n).step_by(4) {
            ep[j] += h;
            em[j] -= h;
        }
        let (_, gp) = length_and_gradient(dom, tg, &ep, true);
        let (_, gm) = length_and_gradient(dom, tg, &em, true);
        for j in (color..n).step_by(4) {
            for i in [(j + n - 1) % n, j, (j + 1) % n] {
                hess[i][j] = (gp[i] - gm[i]) / (2.0 * h);
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (hess[i][j] + hess[j][i]);
            hess[i][j] = s;
            hess[j][i] = s;
        }
    }
    hess
}

/// Gaussian elimination with partial pivoting.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap()).unwrap();
        if a[piv][col].abs() < 1e-300 {
            return Err(LabError::SingularSystem(format!("column {col}")));
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Ok(x)
}

/// Loop length from the straight axis; the geodesic of the base metric.
pub fn geodesic_representative(dom: &CircleDomain, tg: &CircleTarget) -> Result<ClosedGeodesic> {
    shorten_curve(dom, tg, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fuchsian::Seed;

    fn class() -> (FuchsianGroup<f64>, Moebius<f64>) {
        let g = FuchsianGroup::octagon();
        let m = g.word(&[0]);
        (g, m)
    }

    #[test]
    fn base_axis_has_the_translation_length() {
        let (g, m) = class();
        let dom = CircleDomain::new(&g, m, 64, None).unwrap();
        let (l, grad) = length_and_gradient(&dom, &CircleTarget::base(), &vec![0.0; 64], true);
        let exact = m.translation_length().unwrap() / std::f64::consts::SQRT_2;
        // two-point Gauss on 64 chords; the error decays like N⁻⁴
        assert!((l - exact).abs() < 1e-7 * exact, "{l} {exact}");
        assert!((dom.polyline_length(&vec![0.0; 64]) - exact).abs() < 1e-12);
        assert!(grad.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (g, m) = class();
        let qd = QuadraticDifferential::poincare(Seed::real(1.0, 0.0, 0.0), 3, true).unwrap();
        let dom = CircleDomain::new(&g, m, 32, None).unwrap();
        let tg = CircleTarget { kind: TargetKind::Beltrami { z: C64::new(0.2, -0.1) }, qd: Some(&qd), field: None };
        let eta: Vec<f64> = (0..32).map(|k| 0.01 * (k as f64).sin()).collect();
        let (_, grad) = length_and_gradient(&dom, &tg, &eta, true);
        for k in [0, 5, 31] {
            let mut p = eta.clone();
            let mut q = eta.clone();
            p[k] += 1e-6;
            q[k] -= 1e-6;
            let fd = (length_and_gradient(&dom, &tg, &p, false).0 - length_and_gradient(&dom, &tg, &q, false).0) / 2e-6;
            assert!((fd - grad[k]).abs() < 1e-7, "{k}: {fd} {}", grad[k]);
        }
    }

    #[test]
    fn shortening_decreases_length_monotonically() {
        let (g, m) = class();
        let qd = QuadraticDifferential::poincare(Seed::real(1.0, 0.0, 0.0), 3, true).unwrap();
        let dom = CircleDomain::new(&g, m, 64, None).unwrap();
        let tg = CircleTarget { kind: TargetKind::Beltrami { z: C64::new(0.2, 0.0) }, qd: Some(&qd), field: None };
        let geo = geodesic_representative(&dom, &tg).unwrap();
        assert!(geo.history.windows(2).all(|w| w[1] <= w[0] + 1e-14 * w[0]));
        assert!(geo.residual <= 1e-10 * geo.length);
    }
}
