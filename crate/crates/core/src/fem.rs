//! P1 finite elements on the glued octagon mesh for arbitrary metric fields.
//!
//! Metrics are sampled at three interior quadrature points per triangle
//! (barycentric `(2/3, 1/6, 1/6)` and permutations). Stiffness uses the densitized
//! inverse `K = √det g · g⁻¹`, so conformal metrics give the Euclidean stiffness exactly.

use crate::error::{LabError, Result};
use crate::mesh::Mesh;
use crate::sparse::{self, Csr, Triplets};
use crate::C64;
use serde::{Deserialize, Serialize};

pub const QUAD_BARY: [[f64; 3]; 3] = [
    [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
    [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
    [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
];

/// Riemannian density of the Poincaré disk, `φ₀ = 4/(1-|v|²)²`.
pub fn phi0(v: C64) -> f64 {
    let s = 1.0 - v.norm_sqr();
    4.0 / (s * s)
}

#[derive(Clone, Copy, Debug)]
pub struct QuadPoint {
    pub tri: usize,
    pub bary: [f64; 3],
    pub pos: C64,
    /// Euclidean chart weight (one third of the triangle area).
    pub weight: f64,
}

/// Quadrature points and constant P1 gradients, indexed `3·t + k`.
#[derive(Clone, Debug)]
pub struct Quadrature {
    pub points: Vec<QuadPoint>,
    /// Gradients of the three barycentric functions of each triangle.
    pub grads: Vec<[[f64; 2]; 3]>,
    pub areas: Vec<f64>,
}

impl Quadrature {
    pub fn new(mesh: &Mesh) -> Self {
        let nt = mesh.triangles.len();
        let mut points = Vec::with_capacity(3 * nt);
        let mut grads = Vec::with_capacity(nt);
        let mut areas = Vec::with_capacity(nt);
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let p = tri.map(|i| mesh.vertices[i]);
            let d = ((p[1] - p[0]).conj() * (p[2] - p[0])).im;
            let area = 0.5 * d;
            // ∇λ_k = J(p_{k+2} - p_{k+1}) / d with J the rotation by +π/2
            let g: [[f64; 2]; 3] = std::array::from_fn(|k| {
                let e = p[(k + 2) % 3] - p[(k + 1) % 3];
                [-e.im / d, e.re / d]
            });
            for b in QUAD_BARY {
                let pos = p[0] * b[0] + p[1] * b[1] + p[2] * b[2];
                points.push(QuadPoint { tri: t, bary: b, pos, weight: area / 3.0 });
            }
            grads.push(g);
            areas.push(area);
        }
        Quadrature { points, grads, areas }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Symmetric tensor `E dx² + 2F dx dy + G dy²` at every quadrature point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricField {
    pub efg: Vec<[f64; 3]>,
}

impl MetricField {
    pub fn from_fn(quad: &Quadrature, f: impl Fn(C64) -> [f64; 3]) -> Self {
        MetricField { efg: quad.points.iter().map(|q| f(q.pos)).collect() }
    }

    pub fn euclidean(quad: &Quadrature) -> Self {
        Self::from_fn(quad, |_| [1.0, 0.0, 1.0])
    }

    /// Base hyperbolic metric `φ₀ |dv|²`.
    pub fn base(quad: &Quadrature) -> Self {
        Self::from_fn(quad, |v| {
            let p = phi0(v);
            [p, 0.0, p]
        })
    }

    /// Real form of `P |dv|² + 2 Re(Q dv²)`.
    pub fn from_pq(p: f64, q: C64) -> [f64; 3] {
        [p + 2.0 * q.re, -2.0 * q.im, p - 2.0 * q.re]
    }

    pub fn scaled(&self, factor: &[f64]) -> Self {
        MetricField { efg: self.efg.iter().zip(factor).map(|(m, s)| m.map(|x| x * s)).collect() }
    }

    pub fn min_eigenvalue(m: &[f64; 3]) -> f64 {
        let tr = m[0] + m[2];
        let det = m[0] * m[2] - m[1] * m[1];
        let disc = ((m[0] - m[2]).powi(2) + 4.0 * m[1] * m[1]).sqrt();
        if tr > 0.0 {
            // stable smaller root
            2.0 * det / (tr + disc)
        } else {
            0.5 * (tr - disc)
        }
    }

    /// Rejects samples whose smallest eigenvalue is not above `1e-12`.
    pub fn validate(&self) -> Result<()> {
        for (i, m) in self.efg.iter().enumerate() {
            let e = Self::min_eigenvalue(m);
            if !(e > 1e-12) {
                return Err(LabError::DegenerateMetric { sample: i, eig: e });
            }
        }
        Ok(())
    }

    pub fn sqrt_det(m: &[f64; 3]) -> f64 {
        (m[0] * m[2] - m[1] * m[1]).sqrt()
    }

    /// `√det g · g⁻¹` as `[K¹¹, K¹², K²²]`.
    pub fn densitized_inverse(m: &[f64; 3]) -> [f64; 3] {
        let s = Self::sqrt_det(m);
        [m[2] / s, -m[1] / s, m[0] / s]
    }
}

/// Assembly context: mesh plus quadrature.
#[derive(Clone, Debug)]
pub struct Fem<'a> {
    pub mesh: &'a Mesh,
    pub quad: Quadrature,
}

impl<'a> Fem<'a> {
    pub fn new(mesh: &'a Mesh) -> Self {
        Fem { mesh, quad: Quadrature::new(mesh) }
    }

    pub fn n(&self) -> usize {
        self.mesh.n_dofs()
    }

    fn dofs(&self, t: usize) -> [usize; 3] {
        self.mesh.triangles[t].map(|v| self.mesh.dof[v])
    }

    /// Mass matrix with an extra density `rho` at quadrature points.
    pub fn weighted_mass(&self, metric: &MetricField, rho: Option<&[f64]>) -> Result<Csr> {
        metric.validate()?;
        let mut t = Triplets::new(self.n());
        for (i, q) in self.quad.points.iter().enumerate() {
            let w = q.weight * MetricField::sqrt_det(&metric.efg[i]) * rho.map_or(1.0, |r| r[i]);
            let d = self.dofs(q.tri);
            for a in 0..3 {
                for b in 0..3 {
                    t.push(d[a], d[b], w * q.bary[a] * q.bary[b]);
                }
            }
        }
        Ok(t.build())
    }

    pub fn mass(&self, metric: &MetricField) -> Result<Csr> {
        self.weighted_mass(metric, None)
    }

    /// Dirichlet form `∫ g^{ij} ∂_i f ∂_j h dμ_g`; positive semidefinite, constants in the kernel.
    pub fn stiffness(&self, metric: &MetricField) -> Result<Csr> {
        metric.validate()?;
        let mut t = Triplets::new(self.n());
        for (i, q) in self.quad.points.iter().enumerate() {
            let k = MetricField::densitized_inverse(&metric.efg[i]);
            let g = &self.quad.grads[q.tri];
            let d = self.dofs(q.tri);
            for a in 0..3 {
                for b in 0..3 {
                    let v = k[0] * g[a][0] * g[b][0] + k[1] * (g[a][0] * g[b][1] + g[a][1] * g[b][0]) + k[2] * g[a][1] * g[b][1];
                    t.push(d[a], d[b], q.weight * v);
                }
            }
        }
        Ok(t.build())
    }

    /// Load vector `∫ f λ_a dμ_g` for `f` sampled at quadrature points.
    pub fn load(&self, metric: &MetricField, f: &[f64]) -> Vec<f64> {
        let mut b = vec![0.0; self.n()];
        for (i, q) in self.quad.points.iter().enumerate() {
            let w = q.weight * MetricField::sqrt_det(&metric.efg[i]) * f[i];
            for (a, d) in self.dofs(q.tri).into_iter().enumerate() {
                b[d] += w * q.bary[a];
            }
        }
        b
    }

    /// `∫ f dμ_g` for `f` at quadrature points.
    pub fn integrate(&self, metric: &MetricField, f: &[f64]) -> f64 {
        self.quad.points.iter().enumerate().map(|(i, q)| q.weight * MetricField::sqrt_det(&metric.efg[i]) * f[i]).sum()
    }

    pub fn area(&self, metric: &MetricField) -> f64 {
        self.integrate(metric, &vec![1.0; self.quad.len()])
    }

    /// P1 interpolation of a scalar field at the quadrature points.
    pub fn interpolate(&self, u: &[f64]) -> Vec<f64> {
        self.quad
            .points
            .iter()
            .map(|q| {
                let d = self.dofs(q.tri);
                (0..3).map(|a| q.bary[a] * u[d[a]]).sum()
            })
            .collect()
    }

    /// Constant chart gradient of a P1 scalar field on triangle `t`.
    pub fn gradient(&self, u: &[f64], t: usize) -> [f64; 2] {
        let d = self.dofs(t);
        let g = &self.quad.grads[t];
        let mut out = [0.0; 2];
        for a in 0..3 {
            out[0] += g[a][0] * u[d[a]];
            out[1] += g[a][1] * u[d[a]];
        }
        out
    }

    /// P1 field evaluated at an arbitrary chart point by affine extension from triangle `t`.
    pub fn eval_affine(&self, u: &[f64], t: usize, p: C64) -> f64 {
        let l = self.mesh.barycentric(t, p);
        let d = self.dofs(t);
        (0..3).map(|a| l[a] * u[d[a]]).sum()
    }

    /// Nodal values at degree-of-freedom vertices.
    pub fn nodal(&self, f: impl Fn(C64) -> f64) -> Vec<f64> {
        self.mesh.dof_vertex.iter().map(|&v| f(self.mesh.vertices[v])).collect()
    }
}

/// Solves `(S + shift·M) x = b` for SPD systems; relative residual gate `1e-10`.
pub fn solve_spd(stiffness: &Csr, mass: &Csr, shift: f64, b: &[f64]) -> Result<Vec<f64>> {
    let a = if shift == 0.0 { stiffness.clone() } else { stiffness.add_scaled(shift, mass) };
    sparse::solve_spd(&a, b)
}
