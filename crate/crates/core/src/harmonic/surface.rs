//! Harmonic maps from the glued octagon mesh to a target family, in the homotopy
//! class of the identity.
//!
//! Unknowns are the complex images `U_d` of the degree-of-freedom vertices. A slave
//! vertex `v` has image `γ_v(U_{dof(v)})` where `γ_v` is its owner transition, so the
//! map is equivariant by construction. The discrete energy is
//! `½ Σ_q w_q K^{ij}(s Re(u_i ū_j) + 2 Re(qq u_i u_j))` with `K` the densitized inverse
//! of the domain metric and `(s, qq)` the target evaluated at the image point.
//!
//! `q` enters through a cubic Taylor model about per-point centres that are moved to
//! the current image whenever it drifts by more than `RECENTRE`. At convergence the
//! centres coincide with the images, so the converged energy uses the exact `q`.

use super::target::{self, PointEval, TargetKind};
use crate::error::{LabError, Result};
use crate::fem::{phi0, Fem, MetricField};
use crate::fuchsian::QuadraticDifferential;
use crate::sparse::{dot, to_complex, to_real, Csr, Ldlt, Triplets};
use crate::C64;
use serde::{Deserialize, Serialize};

/// Image drift that triggers re-expansion of the `q` model.
pub const RECENTRE: f64 = 1e-3;
/// Weight of the hyperbolic mass term in the preconditioner.
const PRECOND_SHIFT: f64 = 0.5;

/// Domain conformal structure plus the fixed preconditioner used for every target.
pub struct SurfaceDomain<'a> {
    pub fem: &'a Fem<'a>,
    pub metric: MetricField,
    /// Densitized inverse `√det g · g⁻¹` per quadrature point.
    pub kdom: Vec<[f64; 3]>,
    precond: Ldlt,
}

impl<'a> SurfaceDomain<'a> {
    pub fn new(fem: &'a Fem<'a>, metric: MetricField) -> Result<Self> {
        metric.validate()?;
        let kdom: Vec<[f64; 3]> = metric.efg.iter().map(MetricField::densitized_inverse).collect();
        let precond = Ldlt::factor(&preconditioner(fem, &kdom))?;
        Ok(SurfaceDomain { fem, metric, kdom, precond })
    }

    pub fn n(&self) -> usize {
        self.fem.n()
    }

    /// Images of the identity map.
    pub fn identity(&self) -> Vec<C64> {
        let m = self.fem.mesh;
        m.dof_vertex.iter().map(|&v| m.vertices[v]).collect()
    }

    /// Images of every mesh vertex.
    pub fn images(&self, dofs: &[C64]) -> Vec<C64> {
        let m = self.fem.mesh;
        m.owners.iter().enumerate().map(|(v, o)| o.map.apply(dofs[m.dof[v]])).collect()
    }

    /// Per-quadrature image point and the chart gradient `(u_x, u_y)` on its triangle.
    pub fn pullback(&self, dofs: &[C64]) -> Vec<QuadState> {
        let img = self.images(dofs);
        let q = &self.fem.quad;
        q.points
            .iter()
            .map(|p| {
                let tri = self.fem.mesh.triangles[p.tri];
                let g = &q.grads[p.tri];
                let ua = tri.map(|v| img[v]);
                let mut du = [C64::new(0.0, 0.0); 2];
                let mut u = C64::new(0.0, 0.0);
                for a in 0..3 {
                    du[0] += ua[a] * g[a][0];
                    du[1] += ua[a] * g[a][1];
                    u += ua[a] * p.bary[a];
                }
                QuadState { u, du }
            })
            .collect()
    }

    /// Preconditioned dual norm `√(gᵀ P⁻¹ g)` of a real gradient.
    pub fn dual_norm(&self, g: &[f64]) -> f64 {
        dot(g, &self.precond.solve(g)).max(0.0).sqrt()
    }

    pub fn precondition(&self, g: &[f64]) -> Vec<f64> {
        self.precond.solve(g)
    }
}

/// Image and gradient of the map at one quadrature point.
#[derive(Clone, Copy, Debug)]
pub struct QuadState {
    pub u: C64,
    pub du: [C64; 2],
}

impl QuadState {
    /// `K^{ij} u_i ū_j` (real).
    pub fn kuu(&self, k: &[f64; 3]) -> f64 {
        let [x, y] = self.du;
        k[0] * x.norm_sqr() + 2.0 * k[1] * (x * y.conj()).re + k[2] * y.norm_sqr()
    }

    /// `K^{ij} u_i u_j`.
    pub fn kuu2(&self, k: &[f64; 3]) -> C64 {
        let [x, y] = self.du;
        x * x * k[0] + x * y * (2.0 * k[1]) + y * y * k[2]
    }

    /// `K^{ij} ū_i ū_j`.
    pub fn kubub(&self, k: &[f64; 3]) -> C64 {
        self.kuu2(k).conj()
    }
}

/// Hermitian twisted Laplacian plus hyperbolic mass at the identity, in interleaved
/// real form.
fn preconditioner(fem: &Fem, kdom: &[[f64; 3]]) -> Csr {
    let m = fem.mesh;
    let n = fem.n();
    let theta: Vec<C64> = m.owners.iter().map(|o| o.map.deriv(m.vertices[o.master])).collect();
    let mut t = Triplets::new(2 * n);
    for (i, q) in fem.quad.points.iter().enumerate() {
        let tri = m.triangles[q.tri];
        let g = &fem.quad.grads[q.tri];
        let k = &kdom[i];
        let s = phi0(q.pos);
        for a in 0..3 {
            for b in 0..3 {
                let st = k[0] * g[a][0] * g[b][0] + k[1] * (g[a][0] * g[b][1] + g[a][1] * g[b][0]) + k[2] * g[a][1] * g[b][1];
                let v = q.weight * s * (st + PRECOND_SHIFT * q.bary[a] * q.bary[b]);
                let (va, vb) = (tri[a], tri[b]);
                t.push_complex(m.dof[va], m.dof[vb], theta[va].conj() * theta[vb] * v);
            }
        }
    }
    t.build()
}

/// Target family with its scalar field (Liouville factor or Wolf correction).
#[derive(Clone, Debug)]
pub struct SurfaceTarget<'a> {
    pub kind: TargetKind,
    pub qd: Option<&'a QuadraticDifferential<f64>>,
    /// Degree-of-freedom values of `w` (Beltrami) or `α` (Wolf).
    pub field: Option<Vec<f64>>,
}

impl<'a> SurfaceTarget<'a> {
    pub fn base() -> Self {
        SurfaceTarget { kind: TargetKind::Scaled { s: 0.0 }, qd: None, field: None }
    }

    fn needs_q(&self) -> bool {
        self.qd.is_some()
            && match self.kind {
                TargetKind::Beltrami { z } => z.norm() > 0.0,
                TargetKind::Wolf { t } => t != 0.0,
                TargetKind::Scaled { .. } => false,
            }
    }
}

/// Energy functional for one domain and one target.
pub struct SurfaceEnergy<'d, 'a> {
    pub domain: &'d SurfaceDomain<'a>,
    pub target: SurfaceTarget<'a>,
    /// Field value at the source quadrature point.
    f_x: Vec<f64>,
    /// `∂_v f` per triangle.
    df: Vec<C64>,
    centres: Vec<C64>,
    jets: Vec<[C64; 4]>,
}

impl<'d, 'a> SurfaceEnergy<'d, 'a> {
    pub fn new(domain: &'d SurfaceDomain<'a>, target: SurfaceTarget<'a>) -> Self {
        let fem = domain.fem;
        let nt = fem.mesh.triangles.len();
        let (f_x, df) = match &target.field {
            Some(f) => {
                let fx = fem.interpolate(f);
                let df = (0..nt)
                    .map(|t| {
                        let g = fem.gradient(f, t);
                        C64::new(0.5 * g[0], -0.5 * g[1])
                    })
                    .collect();
                (fx, df)
            }
            None => (vec![0.0; fem.quad.len()], vec![C64::new(0.0, 0.0); nt]),
        };
        let mut e = SurfaceEnergy { domain, target, f_x, df, centres: Vec::new(), jets: Vec::new() };
        if e.target.needs_q() {
            let pos: Vec<C64> = fem.quad.points.iter().map(|p| p.pos).collect();
            e.recentre(&pos);
        }
        e
    }

    /// Re-expands `q` about the given image points.
    pub fn recentre(&mut self, centres: &[C64]) {
        let qd = self.target.qd.expect("recentre requires q");
        self.jets = centres.iter().map(|&c| qd.jet(c)).collect();
        self.centres = centres.to_vec();
    }

    /// Largest distance between an image point and its expansion centre.
    pub fn drift(&self, st: &[QuadState]) -> f64 {
        self.centres.iter().zip(st).map(|(c, s)| (s.u - c).norm()).fold(0.0, f64::max)
    }

    /// Target at quadrature point `i` with image `u`.
    pub fn eval(&self, i: usize, u: C64) -> PointEval {
        let p = &self.domain.fem.quad.points[i];
        let df = self.df[p.tri];
        let f = self.f_x[i] + 2.0 * (df * (u - p.pos)).re;
        let (q, dq) = if self.jets.is_empty() {
            (C64::new(0.0, 0.0), C64::new(0.0, 0.0))
        } else {
            target::taylor(&self.jets[i], self.centres[i], u)
        };
        target::eval(self.target.kind, u, q, dq, f, df)
    }

    pub fn energy(&self, dofs: &[C64]) -> f64 {
        let st = self.domain.pullback(dofs);
        self.energy_of(&st)
    }

    pub fn energy_of(&self, st: &[QuadState]) -> f64 {
        let quad = &self.domain.fem.quad;
        let mut e = 0.0;
        for (i, s) in st.iter().enumerate() {
            let k = &self.domain.kdom[i];
            let pe = self.eval(i, s.u);
            e += 0.5 * quad.points[i].weight * (pe.s * s.kuu(k) + 2.0 * (pe.qq * s.kuu2(k)).re);
        }
        e
    }

    /// Energy and `G_d = 2 ∂E/∂Ū_d`, so that `dE = Re Σ Ḡ_d dU_d`.
    pub fn gradient(&self, dofs: &[C64]) -> (f64, Vec<C64>) {
        let fem = self.domain.fem;
        let m = fem.mesh;
        let st = self.domain.pullback(dofs);
        let mut gv = vec![C64::new(0.0, 0.0); m.vertices.len()];
        let mut e = 0.0;
        for (i, s) in st.iter().enumerate() {
            let p = &fem.quad.points[i];
            let k = &self.domain.kdom[i];
            let g = &fem.quad.grads[p.tri];
            let pe = self.eval(i, s.u);
            let kuu = s.kuu(k);
            let kuu2 = s.kuu2(k);
            e += 0.5 * p.weight * (pe.s * kuu + 2.0 * (pe.qq * kuu2).re);
            let ku = [s.du[0] * k[0] + s.du[1] * k[1], s.du[0] * k[1] + s.du[1] * k[2]];
            let zeroth = pe.ds.conj() * kuu + pe.dqq_bar * kuu2 + pe.dqq.conj() * kuu2.conj();
            let tri = m.triangles[p.tri];
            for a in 0..3 {
                let kd = ku[0] * g[a][0] + ku[1] * g[a][1];
                gv[tri[a]] += (zeroth * p.bary[a] + kd * pe.s + pe.qq.conj() * kd.conj() * 2.0) * p.weight;
            }
        }
        let mut gd = vec![C64::new(0.0, 0.0); m.n_dofs()];
        for (v, o) in m.owners.iter().enumerate() {
            let d = m.dof[v];
            gd[d] += o.map.deriv(dofs[d]).conj() * gv[v];
        }
        (e, gd)
    }
}

/// Descent schedule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Stop when the dual-norm residual is below `tol · E`.
    pub tol: f64,
    /// Reject the result when the final residual exceeds `gate · E`.
    pub gate: f64,
    pub max_iter: usize,
    /// Switch from preconditioned descent to Newton–Krylov below `newton_switch · E`.
    pub newton_switch: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-10, gate: 1e-6, max_iter: 200, newton_switch: 1e-3 }
    }
}

/// Converged harmonic map.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HarmonicMap {
    pub dofs: Vec<C64>,
    pub energy: f64,
    /// Dual-norm residual of the Euler–Lagrange equation.
    pub residual: f64,
    pub iterations: usize,
    /// Energy after every accepted step.
    pub history: Vec<f64>,
}

impl HarmonicMap {
    /// Largest increase along the history (zero for a monotone run).
    pub fn max_increase(&self) -> f64 {
        self.history.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }
}

fn axpy(x: &[f64], a: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(x, d)| x + a * d).collect()
}

/// Minimizes the energy from `start` (the identity when `None`).
pub fn solve(energy: &mut SurfaceEnergy, start: Option<&[C64]>, opts: &SolverOptions) -> Result<HarmonicMap> {
    let domain = energy.domain;
    let mut x = to_real(&start.map_or_else(|| domain.identity(), |s| s.to_vec()));
    let grad = |en: &SurfaceEnergy, x: &[f64]| {
        let (e, g) = en.gradient(&to_complex(x));
        (e, to_real(&g))
    };
    let (mut e, mut g) = grad(energy, &x);
    let mut history = vec![e];
    let mut step = 1.0f64;
    let mut iterations = 0;
    loop {
        if energy.target.needs_q() {
            let st = domain.pullback(&to_complex(&x));
            if energy.drift(&st) > RECENTRE {
                let c: Vec<C64> = st.iter().map(|s| s.u).collect();
                energy.recentre(&c);
                (e, g) = grad(energy, &x);
            }
        }
        let pg = domain.precondition(&g);
        let res = dot(&g, &pg).max(0.0).sqrt();
        if res <= opts.tol * e.max(1.0) || iterations >= opts.max_iter {
            if res > opts.gate * e.max(1.0) {
                return Err(LabError::ResidualGate { residual: res, gate: opts.gate * e.max(1.0) });
            }
            return Ok(HarmonicMap { dofs: to_complex(&x), energy: e, residual: res, iterations, history });
        }
        iterations += 1;
        let newton = res < opts.newton_switch * e.max(1.0);
        let d: Vec<f64> = if newton {
            newton_direction(energy, &x, &g, res)
        } else {
            pg.iter().map(|v| -v).collect()
        };
        let slope = dot(&g, &d);
        let mut lambda = if newton { 1.0 } else { (2.0 * step).min(1.0) };
        let mut accepted = false;
        for _ in 0..40 {
            let xn = axpy(&x, lambda, &d);
            let en = energy.energy(&to_complex(&xn));
            let roundoff = 1e-14 * e.abs();
            if en <= e + 1e-4 * lambda * slope || (en - e).abs() <= roundoff {
                let (en, gn) = grad(energy, &xn);
                // near roundoff the energy cannot certify progress, so require a smaller residual
                if en > e + 1e-4 * lambda * slope && domain.dual_norm(&gn) >= res {
                    lambda *= 0.5;
                    continue;
                }
                x = xn;
                e = en;
                g = gn;
                step = lambda;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(LabError::LineSearchFailed(40));
        }
        history.push(e);
    }
}

/// Inexact Newton step by preconditioned CG with finite-difference Hessian products.
fn newton_direction(energy: &SurfaceEnergy, x: &[f64], g: &[f64], res: f64) -> Vec<f64> {
    let domain = energy.domain;
    let hv = |v: &[f64]| {
        let vmax = v.iter().fold(0.0f64, |m, a| m.max(a.abs())).max(1e-300);
        let eps = 1e-6 / vmax;
        let (_, gp) = energy.gradient(&to_complex(&axpy(x, eps, v)));
        let (_, gm) = energy.gradient(&to_complex(&axpy(x, -eps, v)));
        to_real(&gp).iter().zip(to_real(&gm)).map(|(a, b)| (a - b) / (2.0 * eps)).collect::<Vec<f64>>()
    };
    let n = x.len();
    let mut d = vec![0.0; n];
    let mut r: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut z = domain.precondition(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let rz0 = rz;
    let eta = (res.sqrt()).min(0.1).max(1e-6);
    for it in 0..60 {
        let hp = hv(&p);
        let php = dot(&p, &hp);
        if php <= 0.0 {
            if it == 0 {
                return z;
            }
            break;
        }
        let a = rz / php;
        for i in 0..n {
            d[i] += a * p[i];
            r[i] -= a * hp[i];
        }
        z = domain.precondition(&r);
        let rz_new = dot(&r, &z);
        if rz_new <= eta * eta * rz0 {
            break;
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fuchsian::Seed;
    use crate::mesh::Mesh;

    #[test]
    fn gradient_matches_finite_differences() {
        let mesh = Mesh::octagon(1).unwrap();
        let fem = Fem::new(&mesh);
        let dom = SurfaceDomain::new(&fem, MetricField::base(&fem.quad)).unwrap();
        let qd = QuadraticDifferential::poincare(Seed::real(1.0, 0.0, 0.5), 3, true).unwrap();
        let field: Vec<f64> = fem.nodal(|v| 0.1 * v.re - 0.2 * v.im * v.im);
        let target = SurfaceTarget { kind: TargetKind::Beltrami { z: C64::new(0.2, 0.1) }, qd: Some(&qd), field: Some(field) };
        let en = SurfaceEnergy::new(&dom, target);
        let mut u = dom.identity();
        for (i, x) in u.iter_mut().enumerate() {
            *x += C64::new((i as f64 * 0.7).sin(), (i as f64 * 1.3).cos()) * 0.01;
        }
        let (_, g) = en.gradient(&u);
        let h = 1e-6;
        for d in [0, 3, g.len() - 1] {
            for dir in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)] {
                let mut up = u.clone();
                let mut um = u.clone();
                up[d] += dir * h;
                um[d] -= dir * h;
                let fd = (en.energy(&up) - en.energy(&um)) / (2.0 * h);
                let an = (g[d].conj() * dir).re;
                assert!((fd - an).abs() < 1e-6 * (1.0 + an.abs()), "{d}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn identity_is_harmonic_for_the_base_target() {
        let mesh = Mesh::octagon(2).unwrap();
        let fem = Fem::new(&mesh);
        let dom = SurfaceDomain::new(&fem, MetricField::base(&fem.quad)).unwrap();
        let mut en = SurfaceEnergy::new(&dom, SurfaceTarget::base());
        let map = solve(&mut en, None, &SolverOptions::default()).unwrap();
        let area = fem.area(&MetricField::base(&fem.quad));
        // E(id) equals the hyperbolic area; the discrete minimizer sits just below it
        assert!(map.energy <= area && map.energy > area * (1.0 - 1e-3), "{} {area}", map.energy);
        assert!(map.max_increase() <= 1e-12 * area);
    }
}
