//! Base hyperbolic metric, Beltrami deformations, Liouville uniformization and the
//! second-order Wolf family.
//!
//! Weight conventions: `φ_vv̄ = 2/(1-|v|²)²` satisfies `∂_v∂_v̄ log φ_vv̄ = φ_vv̄`, and the
//! Riemannian density is `φ₀ = 2 φ_vv̄`. Real metrics are written `P|dv|² + 2Re(Q dv²)`.

use crate::error::{LabError, Result};
use crate::fem::{phi0, Fem, MetricField};
use crate::fuchsian::QuadraticDifferential;
use crate::jet::{brioschi, Jet2};
use crate::sparse::{self, Ldlt};
use crate::C64;

/// Largest admissible `|z|·sup|ν|` for the Beltrami slice.
pub const BELTRAMI_LIMIT: f64 = 0.5;

/// `φ_vv̄(v) = 2/(1-|v|²)²`.
pub fn phi_vvbar(v: C64) -> f64 {
    0.5 * phi0(v)
}

/// `φ_v = ∂_v log φ_vv̄ = 2v̄/(1-|v|²)`, the Christoffel symbol of the base metric.
pub fn phi_v(v: C64) -> C64 {
    v.conj() * (2.0 / (1.0 - v.norm_sqr()))
}

/// `∂_v φ₀ = φ₀ φ_v`.
pub fn dphi0(v: C64) -> C64 {
    phi_v(v) * phi0(v)
}

/// Harmonic Beltrami differential `ν = q̄/φ₀` of a quadratic differential.
#[derive(Clone, Debug)]
pub struct BeltramiField<'a> {
    pub qd: &'a QuadraticDifferential<f64>,
    pub sup: f64,
}

impl<'a> BeltramiField<'a> {
    pub fn new(qd: &'a QuadraticDifferential<f64>) -> Self {
        BeltramiField { qd, sup: qd.sup_nu() }
    }

    pub fn nu(&self, v: C64) -> C64 {
        self.qd.value(v).conj() / phi0(v)
    }
}

/// Metric families evaluated in closed form from `q` and its derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Family {
    /// `φ₀|dv + zν dv̄|²`.
    Beltrami { z: C64 },
    /// `e^{2s} φ₀|dv|²`.
    Scaled { s: f64 },
}

impl Family {
    /// `(P, Q)` at `v` with `q` derivatives `d`.
    pub fn pq(&self, v: C64, q: C64) -> (f64, C64) {
        let p0 = phi0(v);
        match *self {
            Family::Beltrami { z } => (p0 + z.norm_sqr() * q.norm_sqr() / p0, z.conj() * q),
            Family::Scaled { s } => ((2.0 * s).exp() * p0, C64::new(0.0, 0.0)),
        }
    }

    /// Jets of `E, F, G` at `v`.
    pub fn efg_jets(&self, v: C64, d: &[C64; 4]) -> [Jet2<f64>; 3] {
        let (x, y) = (Jet2::var_x(v.re), Jet2::var_y(v.im));
        let one = Jet2::constant(1.0);
        let s = one - (x * x + y * y);
        let p0 = Jet2::constant(4.0) / (s * s);
        let (p, qre, qim) = match *self {
            Family::Beltrami { z } => {
                let (qr, qi) = Jet2::holomorphic(&d[..3]);
                let p = p0 + (qr * qr + qi * qi).scale(z.norm_sqr()) / p0;
                // z̄ q
                let re = qr.scale(z.re) + qi.scale(z.im);
                let im = qi.scale(z.re) - qr.scale(z.im);
                (p, re, im)
            }
            Family::Scaled { s } => (p0.scale((2.0 * s).exp()), Jet2::constant(0.0), Jet2::constant(0.0)),
        };
        let two = 2.0;
        [p + qre.scale(two), qim.scale(-two), p - qre.scale(two)]
    }

    pub fn curvature(&self, v: C64, d: &[C64; 4]) -> f64 {
        let [e, f, g] = self.efg_jets(v, d);
        brioschi(&e, &f, &g)
    }
}

/// `g_z = φ₀|dv + zν dv̄|²` at the quadrature points.
pub fn beltrami_metric(fem: &Fem, nu: &BeltramiField, z: C64) -> Result<MetricField> {
    let product = z.norm() * nu.sup;
    if product > BELTRAMI_LIMIT {
        return Err(LabError::DeformationTooLarge { product, limit: BELTRAMI_LIMIT });
    }
    let fam = Family::Beltrami { z };
    let metric = MetricField::from_fn(&fem.quad, |v| {
        let (p, q) = fam.pq(v, nu.qd.value(v));
        MetricField::from_pq(p, q)
    });
    metric.validate()?;
    Ok(metric)
}

/// Gauss curvature of a family at the quadrature points (Brioschi on exact jets).
pub fn gauss_curvature(fem: &Fem, qd: Option<&QuadraticDifferential<f64>>, fam: Family) -> Vec<f64> {
    let zero = [C64::new(0.0, 0.0); 4];
    fem.quad
        .points
        .iter()
        .map(|q| {
            let d = qd.map_or(zero, |qd| qd.jet(q.pos));
            fam.curvature(q.pos, &d)
        })
        .collect()
}

/// Conformal factor `w` with `e^{2w} g` hyperbolic, plus the Newton history.
#[derive(Clone, Debug)]
pub struct LiouvilleSolution {
    pub w: Vec<f64>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

/// Solves `Δ_g w = K_g + e^{2w}` (analyst's Laplacian) in the weak form
/// `S w + M(K_g + e^{2w}) = 0` by damped Newton from `w = 0`.
pub fn solve_liouville(fem: &Fem, metric: &MetricField, k_g: &[f64]) -> Result<LiouvilleSolution> {
    const TOL: f64 = 1e-10;
    const MAX_IT: usize = 50;
    let s = fem.stiffness(metric)?;
    let n = fem.n();
    let scale = fem.area(metric);
    let residual = |w: &[f64]| -> Vec<f64> {
        let wq = fem.interpolate(w);
        let f: Vec<f64> = k_g.iter().zip(&wq).map(|(k, w)| k + (2.0 * w).exp()).collect();
        let b = fem.load(metric, &f);
        s.mul_vec(w).iter().zip(&b).map(|(a, b)| a + b).collect()
    };
    let mut w = vec![0.0; n];
    let mut r = residual(&w);
    let mut rn = sparse::norm(&r) / scale;
    let mut history = vec![rn];
    for it in 0..MAX_IT {
        if rn <= TOL {
            return Ok(LiouvilleSolution { w, residuals: history, iterations: it });
        }
        let wq = fem.interpolate(&w);
        let rho: Vec<f64> = wq.iter().map(|w| 2.0 * (2.0 * w).exp()).collect();
        let jac = s.add_scaled(1.0, &fem.weighted_mass(metric, Some(&rho))?);
        let step = Ldlt::factor(&jac)?.solve(&r);
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = w.iter().zip(&step).map(|(w, d)| w - lambda * d).collect();
            let rt = residual(&trial);
            let rtn = sparse::norm(&rt) / scale;
            if rtn < rn || lambda < 1e-4 {
                if !(rtn < rn) {
                    return Err(LabError::NotConverged { what: "Liouville Newton (damping exhausted)".into(), iterations: it, residual: rn });
                }
                w = trial;
                r = rt;
                rn = rtn;
                break;
            }
            lambda *= 0.5;
        }
        history.push(rn);
    }
    if rn <= TOL {
        return Ok(LiouvilleSolution { w, residuals: history, iterations: MAX_IT });
    }
    Err(LabError::NotConverged { what: "Liouville Newton".into(), iterations: MAX_IT, residual: rn })
}

/// Curvature of `e^{2w} g` at quadrature points: `e^{-2w}(K_g + Δ_g w)` with the
/// nonnegative Laplacian recovered by a consistent-mass projection.
pub fn curvature_audit(fem: &Fem, metric: &MetricField, k_g: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    let s = fem.stiffness(metric)?;
    let m = fem.mass(metric)?;
    let lap = sparse::solve_spd(&m, &s.mul_vec(w))?;
    let lq = fem.interpolate(&lap);
    let wq = fem.interpolate(w);
    Ok(k_g.iter().zip(&lq).zip(&wq).map(|((k, l), w)| (-2.0 * w).exp() * (k + l)).collect())
}

/// `|ν|² = |q|²/φ₀²` at the quadrature points.
pub fn nu_sq(fem: &Fem, qd: &QuadraticDifferential<f64>) -> Vec<f64> {
    fem.quad.points.iter().map(|q| (qd.value(q.pos).norm() / phi0(q.pos)).powi(2)).collect()
}

/// `α = (Δ + 2)⁻¹ 2|q|²/φ₀²` on the base metric, with the nonnegative Laplacian.
pub fn wolf_alpha(fem: &Fem, qd: &QuadraticDifferential<f64>) -> Result<Vec<f64>> {
    let g = MetricField::base(&fem.quad);
    let rhs: Vec<f64> = nu_sq(fem, qd).iter().map(|x| 2.0 * x).collect();
    let b = fem.load(&g, &rhs);
    crate::fem::solve_spd(&fem.stiffness(&g)?, &fem.mass(&g)?, 2.0, &b)
}

/// Half-width of the `t` range on which the first-order family `φ₀|dv|² + 2Re(tq dv²)`
/// stays positive: `1/(2 sup|ν|)`.
pub fn wolf_threshold(sup_nu: f64) -> f64 {
    0.5 / sup_nu
}

/// `Φ_t`: `P = φ₀(1 + t²(|ν|² + α))`, `Q = t q`, at the quadrature points.
pub fn wolf_metric(fem: &Fem, qd: &QuadraticDifferential<f64>, alpha: &[f64], t: f64) -> Result<MetricField> {
    let sup = qd.sup_nu();
    let limit = wolf_threshold(sup);
    if t.abs() > limit {
        return Err(LabError::DeformationTooLarge { product: t.abs() * sup, limit: 0.5 });
    }
    let aq = fem.interpolate(alpha);
    let metric = MetricField {
        efg: fem
            .quad
            .points
            .iter()
            .zip(&aq)
            .map(|(q, a)| {
                let p0 = phi0(q.pos);
                let qv = qd.value(q.pos);
                let p = p0 * (1.0 + t * t * ((qv.norm() / p0).powi(2) + a));
                MetricField::from_pq(p, qv * t)
            })
            .collect(),
    };
    metric.validate()?;
    Ok(metric)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fuchsian::Seed;
    use crate::mesh::Mesh;
    use std::sync::OnceLock;

    fn qd() -> &'static QuadraticDifferential<f64> {
        static Q: OnceLock<QuadraticDifferential<f64>> = OnceLock::new();
        Q.get_or_init(|| QuadraticDifferential::poincare(Seed::real(1.0, 0.0, 0.0), 3, true).unwrap())
    }

    #[test]
    fn weight_satisfies_liouville_identity() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let v = C64::from_polar(rng.gen_range(0.0..0.9), rng.gen_range(0.0..6.3));
            // ∂_v∂_v̄ log φ_vv̄ = ∂_v (2v/(1-|v|²)) = 2/(1-|v|²)²
            let h = 1e-4;
            let dlog = |p: C64| -> C64 {
                // ∂_v̄ log φ_vv̄ by central differences
                let f = |p: C64| phi_vvbar(p).ln();
                C64::new((f(p + h) - f(p - h)) / (2.0 * h), (f(p + C64::i() * h) - f(p - C64::i() * h)) / (2.0 * h)) * 0.5
            };
            let lap = (dlog(v + h) - dlog(v - h)) / (2.0 * h) - C64::i() * (dlog(v + C64::i() * h) - dlog(v - C64::i() * h)) / (2.0 * h);
            let lap = lap * 0.5;
            assert!((lap.re - phi_vvbar(v)).abs() < 1e-5 * phi_vvbar(v), "{lap} {}", phi_vvbar(v));
            // exact closed form of φ_v
            let exact = (2.0 * v.conj()) / (1.0 - v.norm_sqr());
            assert!((phi_v(v) - exact).norm() < 1e-14);
        }
    }

    #[test]
    fn beltrami_metric_determinant_and_limit() {
        let mesh = Mesh::octagon(1).unwrap();
        let fem = Fem::new(&mesh);
        let nu = BeltramiField::new(qd());
        let base = beltrami_metric(&fem, &nu, C64::new(0.0, 0.0)).unwrap();
        assert_eq!(base, MetricField::base(&fem.quad));
        let z = C64::new(0.3, 0.0);
        let g = beltrami_metric(&fem, &nu, z).unwrap();
        for (m, q) in g.efg.iter().zip(&fem.quad.points) {
            let det = m[0] * m[2] - m[1] * m[1];
            let p0 = phi0(q.pos);
            let expect = (p0 * (1.0 - (z * nu.nu(q.pos)).norm_sqr())).powi(2);
            assert!((det - expect).abs() < 1e-10 * expect);
        }
        let too_big = C64::new(0.6 / nu.sup, 0.0);
        assert!(matches!(beltrami_metric(&fem, &nu, too_big), Err(LabError::DeformationTooLarge { .. })));
    }

    #[test]
    fn curvature_of_base_and_deformed() {
        let mesh = Mesh::octagon(2).unwrap();
        let fem = Fem::new(&mesh);
        let k0 = gauss_curvature(&fem, Some(qd()), Family::Beltrami { z: C64::new(0.0, 0.0) });
        assert!(k0.iter().all(|k| (k + 1.0).abs() < 1e-9));
        let kz = gauss_curvature(&fem, Some(qd()), Family::Beltrami { z: C64::new(0.05, 0.0) });
        assert!(kz.iter().any(|k| (k + 1.0).abs() > 1e-3));
        let ks = gauss_curvature(&fem, None, Family::Scaled { s: 0.3 });
        assert!(ks.iter().all(|k| (k + (-0.6f64).exp()).abs() < 1e-9));
    }

    #[test]
    fn liouville_identities() {
        let mesh = Mesh::octagon(3).unwrap();
        let fem = Fem::new(&mesh);
        let base = MetricField::base(&fem.quad);
        let k = gauss_curvature(&fem, None, Family::Scaled { s: 0.0 });
        let sol = solve_liouville(&fem, &base, &k).unwrap();
        assert!(sol.w.iter().all(|w| w.abs() <= 1e-8));
        let s: f64 = 0.2;
        let scaled = base.scaled(&vec![(2.0 * s).exp(); fem.quad.len()]);
        let ks = gauss_curvature(&fem, None, Family::Scaled { s });
        let sol = solve_liouville(&fem, &scaled, &ks).unwrap();
        assert!(sol.w.iter().all(|w| (w + s).abs() <= 1e-8));
    }

    #[test]
    fn alpha_bound_and_round_trip() {
        let mesh = Mesh::octagon(3).unwrap();
        let fem = Fem::new(&mesh);
        let alpha = wolf_alpha(&fem, qd()).unwrap();
        let aq = fem.interpolate(&alpha);
        for (a, n2) in aq.iter().zip(nu_sq(&fem, qd())) {
            assert!(*a >= n2 / 3.0 - 1e-8 && *a > 0.0);
        }
    }

    #[test]
    fn wolf_metric_parity_and_derivative() {
        let mesh = Mesh::octagon(1).unwrap();
        let fem = Fem::new(&mesh);
        let alpha = wolf_alpha(&fem, qd()).unwrap();
        assert_eq!(wolf_metric(&fem, qd(), &alpha, 0.0).unwrap(), MetricField::base(&fem.quad));
        let t = 0.1;
        let (gp, gm) = (wolf_metric(&fem, qd(), &alpha, t).unwrap(), wolf_metric(&fem, qd(), &alpha, -t).unwrap());
        for ((p, m), q) in gp.efg.iter().zip(&gm.efg).zip(&fem.quad.points) {
            let qv = qd().value(q.pos);
            // even part is the diagonal P, odd part 2Re(tq dv²)
            assert!(((p[0] + p[2]) - (m[0] + m[2])).abs() < 1e-12 * p[0]);
            assert!((p[1] + m[1]).abs() < 1e-12 * p[0]);
            assert!(((p[0] - p[2]) - 4.0 * t * qv.re).abs() < 1e-10 * p[0]);
        }
        let h = 1e-4;
        let (gp, gm) = (wolf_metric(&fem, qd(), &alpha, h).unwrap(), wolf_metric(&fem, qd(), &alpha, -h).unwrap());
        for ((p, m), q) in gp.efg.iter().zip(&gm.efg).zip(&fem.quad.points) {
            let qv = qd().value(q.pos);
            let d = [(p[0] - m[0]) / (2.0 * h), (p[1] - m[1]) / (2.0 * h), (p[2] - m[2]) / (2.0 * h)];
            let expect = MetricField::from_pq(0.0, qv);
            for k in 0..3 {
                assert!((d[k] - expect[k]).abs() < 1e-6 * (1.0 + qv.norm()));
            }
        }
    }
}
