//! First and second variation of the harmonic-map energy along Beltrami deformations
//! of the target, at a converged map into the base metric.
//!
//! Along the map the Kodaira–Spencer class pulls back to the `u*T`-valued form
//! `A_i = ν(u) ū_i` with `ν = q̄/φ₀`. The Hessian correction `W` is the minimizer of the
//! Hermitian block form below, with unknowns `w` (a `∂_v` section) and `y` (a `∂_v̄`
//! section) coupled through `G = K^{ij} u_i u_j`.

use crate::error::{LabError, Result};
use crate::fem::{phi0, Fem, MetricField};
use crate::fuchsian::QuadraticDifferential;
use crate::harmonic::{HarmonicMap, QuadState, SurfaceDomain};
use crate::metric::{nu_sq, phi_v, phi_vvbar};
use crate::sparse::{dot, norm, relative_residual, to_complex, to_real, Csr, Ldlt, Triplets};
use crate::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub(crate) const GAUSS5: [(f64, f64); 5] = [
    (0.046_910_077_030_668_0, 0.118_463_442_528_094_5),
    (0.230_765_344_947_158_5, 0.239_314_335_249_683_2),
    (0.5, 0.284_444_444_444_444_4),
    (0.769_234_655_052_841_5, 0.239_314_335_249_683_2),
    (0.953_089_922_969_332_0, 0.118_463_442_528_094_5),
];

/// `∂_v̄ f` from sixteen samples on a circle of radius `h`; for holomorphic `f` the
/// only error is the aliased degree-15 Taylor term.
pub fn dbar_circle(f: impl Fn(C64) -> C64, v: C64, h: f64) -> C64 {
    const N: usize = 16;
    (0..N)
        .map(|k| {
            let w = C64::from_polar(1.0, std::f64::consts::TAU * k as f64 / N as f64);
            f(v + w * h) * w
        })
        .sum::<C64>()
        / (N as f64 * h)
}

/// Converged map data at the quadrature points.
pub struct MapData<'d, 'a> {
    pub domain: &'d SurfaceDomain<'a>,
    pub qd: &'d QuadraticDifferential<f64>,
    pub dofs: Vec<C64>,
    pub st: Vec<QuadState>,
    /// `q(u)` at every quadrature point.
    pub q: Vec<C64>,
}

impl<'d, 'a> MapData<'d, 'a> {
    pub fn new(domain: &'d SurfaceDomain<'a>, qd: &'d QuadraticDifferential<f64>, map: &HarmonicMap) -> Self {
        let st = domain.pullback(&map.dofs);
        let q = st.iter().map(|s| qd.value(s.u)).collect();
        MapData { domain, qd, dofs: map.dofs.clone(), st, q }
    }

    fn fem(&self) -> &Fem<'a> {
        self.domain.fem
    }

    fn weight(&self, i: usize) -> f64 {
        self.fem().quad.points[i].weight
    }

    /// `ν(u)` at quadrature point `i`.
    pub fn nu(&self, i: usize) -> C64 {
        self.q[i].conj() / phi0(self.st[i].u)
    }

    /// `A_i = ν ū_i`.
    pub fn a_form(&self, i: usize) -> [C64; 2] {
        let nu = self.nu(i);
        let du = self.st[i].du;
        [nu * du[0].conj(), nu * du[1].conj()]
    }

    /// `½ |du|² dμ` density per unit chart weight: `φ_vv̄ K^{ij} u_i ū_j`.
    pub fn half_energy_density(&self, i: usize) -> f64 {
        phi_vvbar(self.st[i].u) * self.st[i].kuu(&self.domain.kdom[i])
    }

    /// P1 field evaluated at the image of quadrature point `i` by affine extension
    /// from the source triangle, the same model the target family uses.
    pub fn field_at_image(&self, f: &[f64], i: usize) -> f64 {
        let p = &self.fem().quad.points[i];
        self.fem().eval_affine(f, p.tri, self.st[i].u)
    }
}

/// Uncalibrated slice integral `∫ g^{ij} q̄(u) ū_i ū_j dμ`.
pub fn raw_first_variation(md: &MapData) -> C64 {
    md.st
        .iter()
        .enumerate()
        .map(|(i, s)| md.q[i].conj() * s.kubub(&md.domain.kdom[i]) * md.weight(i))
        .sum()
}

/// `∂E/∂z = κ ∫ g^{ij} q̄(u) ū_i ū_j dμ = ⟨A, du⟩` with the frozen slice calibration `κ`.
pub fn first_variation(md: &MapData) -> C64 {
    raw_first_variation(md) * super::SLICE_CALIBRATION
}

/// Kodaira–Spencer diagnostics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KsReport {
    /// `⟨A, A⟩` as a pairing of `u*T`-valued one-forms.
    pub aa_pairing: f64,
    /// `∫ |ν|² · ½|du|² dμ` from the fiber norm.
    pub aa_fiber: f64,
    /// Worst per-triangle `|∮ ½ q̄(u) dū| / ∮ |½ q̄(u) dū|`.
    pub circulation: f64,
    /// Worst `|∂_v̄ q| / (|q| + |q'|)` from a circle stencil.
    pub antiholomorphy: f64,
}

pub fn kodaira_spencer(md: &MapData) -> KsReport {
    let fem = md.fem();
    let mut aa_pairing = 0.0;
    let mut aa_fiber = 0.0;
    for i in 0..md.st.len() {
        let k = &md.domain.kdom[i];
        let a = md.a_form(i);
        let u = md.st[i].u;
        let pair = k[0] * a[0].norm_sqr() + 2.0 * k[1] * (a[0] * a[1].conj()).re + k[2] * a[1].norm_sqr();
        aa_pairing += md.weight(i) * phi_vvbar(u) * pair;
        let nu = md.qd.nu_abs(u);
        let [x, y] = md.st[i].du;
        let du2 = phi0(u) * (k[0] * x.norm_sqr() + 2.0 * k[1] * (x.re * y.re + x.im * y.im) + k[2] * y.norm_sqr());
        aa_fiber += md.weight(i) * nu * nu * 0.5 * du2;
    }
    let img = md.domain.images(&md.dofs);
    let mut circulation = 0.0f64;
    for tri in &fem.mesh.triangles {
        let mut sum = C64::new(0.0, 0.0);
        let mut abs = 0.0;
        for e in 0..3 {
            let (p, r) = (img[tri[e]], img[tri[(e + 1) % 3]]);
            let d = r - p;
            for (t, w) in GAUSS5 {
                let term = md.qd.value(p + d * t).conj() * d.conj() * (0.5 * w);
                sum += term;
                abs += term.norm();
            }
        }
        if abs > 0.0 {
            circulation = circulation.max(sum.norm() / abs);
        }
    }
    let mut antiholomorphy = 0.0f64;
    for s in md.st.iter().step_by(97) {
        let j = md.qd.jet(s.u);
        let dbar = dbar_circle(|v| md.qd.value(v), s.u, 1e-2);
        antiholomorphy = antiholomorphy.max(dbar.norm() / (j[0].norm() + j[1].norm()));
    }
    KsReport { aa_pairing, aa_fiber, circulation, antiholomorphy }
}

/// `c(φ)` from `(□ + 1) c = |A|²` on the base metric, `□ = ½Δ`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CPhi {
    pub c: Vec<f64>,
    pub residual: f64,
    pub sup_a2: f64,
    pub min_c: f64,
    pub max_c: f64,
}

pub fn c_phi_solve(fem: &Fem, qd: &QuadraticDifferential<f64>) -> Result<CPhi> {
    let g = MetricField::base(&fem.quad);
    let a2 = nu_sq(fem, qd);
    let op = fem.stiffness(&g)?.add_scaled(2.0, &fem.mass(&g)?);
    // (½S + M) c = b  ⇔  (S + 2M) c = 2b
    let b: Vec<f64> = fem.load(&g, &a2).iter().map(|x| 2.0 * x).collect();
    let c = crate::sparse::solve_spd(&op, &b)?;
    let residual = relative_residual(&op, &c, &b);
    let sup_a2 = a2.iter().copied().fold(0.0, f64::max);
    let min_c = c.iter().copied().fold(f64::INFINITY, f64::min);
    let max_c = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(CPhi { c, residual, sup_a2, min_c, max_c })
}

/// Solution of the block system with its audits.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WSolution {
    pub w: Vec<C64>,
    pub y: Vec<C64>,
    /// `⟨A, ∇W⟩ = -ζᴴ B ζ`.
    pub hessian_term: f64,
    pub relative_residual: f64,
    /// `max |⟨Bx, y⟩ - ⟨x, By⟩| / (‖B‖ ‖x‖ ‖y‖)` over random pairs.
    pub symmetry: f64,
    /// `‖L' y + Ḡ w‖ / ‖Ḡ w‖` for the second block row.
    pub second_row: f64,
    /// Smallest normalized `⟨(L - G L'⁻¹ Ḡ) e, e⟩ / ⟨L e, e⟩` over random `e`.
    pub schur_min: f64,
    /// Smallest normalized `⟨(½|du|² - G L'⁻¹ Ḡ) e, e⟩ / ⟨½|du|² e, e⟩` over random `e`.
    pub mass_schur_min: f64,
}

struct Blocks {
    lw: Csr,
    ly: Csr,
    cyw: Csr,
    mass: Csr,
    full: Csr,
    rhs: Vec<f64>,
}

fn assemble(md: &MapData) -> Blocks {
    let fem = md.fem();
    let m = fem.mesh;
    let n = fem.n();
    let theta: Vec<C64> = m.owners.iter().enumerate().map(|(v, o)| o.map.deriv(md.dofs[m.dof[v]])).collect();
    let mut lw = Triplets::new(2 * n);
    let mut ly = Triplets::new(2 * n);
    let mut cyw = Triplets::new(2 * n);
    let mut mass = Triplets::new(2 * n);
    let mut full = Triplets::new(4 * n);
    let mut rhs = vec![C64::new(0.0, 0.0); 2 * n];
    for (i, s) in md.st.iter().enumerate() {
        let p = &fem.quad.points[i];
        let w = p.weight;
        let k = &md.domain.kdom[i];
        let g = &fem.quad.grads[p.tri];
        let tri = m.triangles[p.tri];
        let pvv = phi_vvbar(s.u);
        let pv = phi_v(s.u);
        let kuu = s.kuu(k);
        let gd = s.kuu2(k);
        let a = md.a_form(i);
        // covariant derivatives of the weighted basis functions
        let dw: [[C64; 2]; 3] = std::array::from_fn(|c| {
            let th = theta[tri[c]];
            [(pv * s.du[0] * p.bary[c] + g[c][0]) * th, (pv * s.du[1] * p.bary[c] + g[c][1]) * th]
        });
        let dy: [[C64; 2]; 3] = std::array::from_fn(|c| {
            let th = theta[tri[c]].conj();
            [(pv.conj() * s.du[0].conj() * p.bary[c] + g[c][0]) * th, (pv.conj() * s.du[1].conj() * p.bary[c] + g[c][1]) * th]
        });
        let pair = |x: &[C64; 2], y: &[C64; 2]| {
            x[0] * y[0].conj() * k[0] + (x[0] * y[1].conj() + x[1] * y[0].conj()) * k[1] + x[1] * y[1].conj() * k[2]
        };
        for b in 0..3 {
            let db = m.dof[tri[b]];
            let tb = theta[tri[b]];
            rhs[db] -= pair(&a, &dw[b]) * (w * pvv);
            for c in 0..3 {
                let dc = m.dof[tri[c]];
                let tc = theta[tri[c]];
                let ll = p.bary[b] * p.bary[c];
                let zeroth = w * pvv * pvv * kuu * ll;
                let eww = pair(&dw[c], &dw[b]) * (w * pvv) + tc * tb.conj() * zeroth;
                let eyy = pair(&dy[c], &dy[b]) * (w * pvv) + tc.conj() * tb * zeroth;
                // row y_b, column w_c
                let eyw = -(gd.conj() * tc * tb * (w * pvv * pvv * ll));
                let ewy = -(gd * tc.conj() * tb.conj() * (w * pvv * pvv * ll));
                lw.push_complex(db, dc, eww);
                ly.push_complex(db, dc, eyy);
                cyw.push_complex(db, dc, eyw);
                mass.push_complex(db, dc, tc * tb.conj() * zeroth);
                full.push_complex(db, dc, eww);
                full.push_complex(n + db, n + dc, eyy);
                full.push_complex(n + db, dc, eyw);
                full.push_complex(db, n + dc, ewy);
            }
        }
    }
    Blocks { lw: lw.build(), ly: ly.build(), cyw: cyw.build(), mass: mass.build(), full: full.build(), rhs: to_real(&rhs) }
}

/// Solves for `W` and runs the symmetry and Schur audits with `samples` random vectors.
pub fn solve_w(md: &MapData, samples: usize, seed: u64) -> Result<WSolution> {
    let bl = assemble(md);
    let n = md.fem().n();
    let fact = Ldlt::factor(&bl.full).map_err(|e| LabError::SingularSystem(e.to_string()))?;
    let mut x = fact.solve(&bl.rhs);
    let r: Vec<f64> = bl.rhs.iter().zip(bl.full.mul_vec(&x)).map(|(b, a)| b - a).collect();
    for (xi, di) in x.iter_mut().zip(fact.solve(&r)) {
        *xi += di;
    }
    let rel = relative_residual(&bl.full, &x, &bl.rhs);
    let hessian_term = -dot(&x, &bl.full.mul_vec(&x));
    let (wr, yr) = x.split_at(2 * n);
    let gw = bl.cyw.mul_vec(wr);
    let row2: Vec<f64> = bl.ly.mul_vec(yr).iter().zip(&gw).map(|(a, b)| a + b).collect();
    let second_row = norm(&row2) / norm(&gw).max(f64::MIN_POSITIVE);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bnorm = bl.full.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let ly = Ldlt::factor(&bl.ly).map_err(|e| LabError::SingularSystem(e.to_string()))?;
    let mut symmetry = 0.0f64;
    let mut schur_min = f64::INFINITY;
    let mut mass_schur_min = f64::INFINITY;
    for _ in 0..samples {
        let a: Vec<f64> = (0..4 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..4 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let lhs = dot(&bl.full.mul_vec(&a), &b);
        let rhs = dot(&a, &bl.full.mul_vec(&b));
        symmetry = symmetry.max((lhs - rhs).abs() / (bnorm * norm(&a) * norm(&b)));
        let e = &a[..2 * n];
        let ge = bl.cyw.mul_vec(e);
        let coupling = dot(&ge, &ly.solve(&ge));
        let le = dot(e, &bl.lw.mul_vec(e));
        let me = dot(e, &bl.mass.mul_vec(e));
        schur_min = schur_min.min((le - coupling) / le);
        mass_schur_min = mass_schur_min.min((me - coupling) / me);
    }
    let z = to_complex(&x);
    Ok(WSolution {
        w: z[..n].to_vec(),
        y: z[n..].to_vec(),
        hessian_term,
        relative_residual: rel,
        symmetry,
        second_row,
        schur_min,
        mass_schur_min,
    })
}

/// Terms of `∂∂̄E = ½∫c|du|² + ⟨A, A⟩ + ⟨A, ∇W⟩`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SecondVariation {
    pub c_term: f64,
    pub aa: f64,
    pub hessian_term: f64,
    pub total: f64,
}

/// `½ ∫ c(u) |du|² dμ` with `c` a P1 field on the target.
pub fn c_term(md: &MapData, c: &[f64]) -> f64 {
    (0..md.st.len()).map(|i| md.weight(i) * md.field_at_image(c, i) * md.half_energy_density(i)).sum()
}

pub fn second_variation(md: &MapData, c: &[f64], ks: &KsReport, w: &WSolution) -> SecondVariation {
    let ct = c_term(md, c);
    SecondVariation { c_term: ct, aa: ks.aa_pairing, hessian_term: w.hessian_term, total: ct + ks.aa_pairing + w.hessian_term }
}
