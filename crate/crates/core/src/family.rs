//! Deformation families evaluated on a fixed mesh: each parameter value yields the
//! uniformized target, the harmonic map from the surface domain and the closed geodesics
//! of the tracked classes.

use crate::error::{LabError, Result};
use crate::fem::Fem;
use crate::harmonic::trace::{grid_parameters, EnergyTrace, GridKind, TracePoint};
use crate::harmonic::{
    geodesic_representative, shorten_curve, solve, CircleDomain, CircleTarget, ClosedGeodesic, HarmonicMap,
    SolverOptions, SurfaceDomain, SurfaceEnergy, SurfaceTarget, TargetKind,
};
use crate::metric::{self, BeltramiField};
use crate::par::par_map;
use crate::{OctagonGroup, QuadDiff, C64};

/// Liouville factor `w` making `e^{2w} g_z` hyperbolic.
pub fn liouville_factor(fem: &Fem, qd: &QuadDiff, z: C64) -> Result<Vec<f64>> {
    let g = metric::beltrami_metric(fem, &BeltramiField::new(qd), z)?;
    let k = metric::gauss_curvature(fem, Some(qd), metric::Family::Beltrami { z });
    Ok(metric::solve_liouville(fem, &g, &k)?.w)
}

/// A free-homotopy class with its sampled axis and base geodesic.
#[derive(Clone, Debug)]
pub struct ClassLoop {
    pub word: Vec<usize>,
    pub domain: CircleDomain,
    pub base: ClosedGeodesic,
}

impl ClassLoop {
    pub fn new(group: &OctagonGroup, fem: &Fem, word: &[usize], samples: usize) -> Result<Self> {
        if word.is_empty() || word.iter().any(|&k| k >= crate::fuchsian::SIDES) {
            return Err(LabError::config("classes", format!("invalid word {word:?}")));
        }
        let domain = CircleDomain::new(group, group.word(word), samples, Some(fem))?;
        let base = geodesic_representative(&domain, &CircleTarget::base())?;
        Ok(ClassLoop { word: word.to_vec(), domain, base })
    }

    /// `ℓ₀`, the discrete base length.
    pub fn base_length(&self) -> f64 {
        self.base.length
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Deformation {
    /// Point `z` of the Beltrami slice, uniformized by a Liouville solve.
    Beltrami(C64),
    /// Parameter `t` of the second-order Wolf ray.
    Wolf(f64),
}

impl Deformation {
    fn param(&self) -> C64 {
        match *self {
            Deformation::Beltrami(z) => z,
            Deformation::Wolf(t) => C64::new(t, 0.0),
        }
    }
}

/// Everything evaluated at one parameter value.
#[derive(Clone, Debug)]
pub struct FamilyPoint {
    pub param: C64,
    pub surface: Option<HarmonicMap>,
    pub loops: Vec<ClosedGeodesic>,
}

/// Traces of a grid sweep: one for the surface (if any) and one per loop.
#[derive(Clone, Debug)]
pub struct Sweep {
    pub surface: Option<EnergyTrace>,
    pub loops: Vec<EnergyTrace>,
    pub points: Vec<FamilyPoint>,
}

/// Fixed data of a family: mesh, differential, domains and solver schedule.
pub struct FamilySetup<'s, 'a> {
    pub fem: &'s Fem<'a>,
    pub qd: &'s QuadDiff,
    /// Surface domain and the base harmonic map used as warm start.
    pub surface: Option<(&'s SurfaceDomain<'a>, &'s HarmonicMap)>,
    pub loops: &'s [ClassLoop],
    /// Wolf correction `α`; required for Wolf parameters.
    pub alpha: Option<&'s [f64]>,
    pub opts: SolverOptions,
}

impl<'s, 'a> FamilySetup<'s, 'a> {
    fn field(&self, d: Deformation) -> Result<(TargetKind, Vec<f64>)> {
        match d {
            Deformation::Beltrami(z) => Ok((TargetKind::Beltrami { z }, liouville_factor(self.fem, self.qd, z)?)),
            Deformation::Wolf(t) => {
                let alpha = self.alpha.ok_or_else(|| LabError::config("alpha", "Wolf ray needs the correction field"))?;
                let limit = metric::wolf_threshold(self.qd.sup_nu());
                if t.abs() > limit {
                    return Err(LabError::DeformationTooLarge { product: t.abs() * self.qd.sup_nu(), limit: 0.5 });
                }
                Ok((TargetKind::Wolf { t }, alpha.to_vec()))
            }
        }
    }

    /// Solves every tracked domain at one parameter value.
    pub fn evaluate(&self, d: Deformation) -> Result<FamilyPoint> {
        let wrap = |e: LabError| {
            let p = d.param();
            LabError::GridPoint { p1: p.re, p2: p.im, source: Box::new(e) }
        };
        let (kind, field) = self.field(d).map_err(wrap)?;
        let surface = match self.surface {
            Some((dom, start)) => {
                let target = SurfaceTarget { kind, qd: Some(self.qd), field: Some(field.clone()) };
                let mut en = SurfaceEnergy::new(dom, target);
                Some(solve(&mut en, Some(&start.dofs), &self.opts).map_err(wrap)?)
            }
            None => None,
        };
        let loops = self
            .loops
            .iter()
            .map(|cl| {
                let tg = CircleTarget { kind, qd: Some(self.qd), field: Some((self.fem, &field)) };
                shorten_curve(&cl.domain, &tg, Some(&cl.base.eta))
            })
            .collect::<Result<Vec<_>>>()
            .map_err(wrap)?;
        Ok(FamilyPoint { param: d.param(), surface, loops })
    }

    /// Evaluates the full grid and assembles the traces (loop energies are `ℓ²/ℓ₀`).
    pub fn sweep(&self, kind: GridKind, step: f64, n: usize, threads: usize) -> Result<Sweep> {
        let params = grid_parameters(kind, step, n)?;
        let results = par_map(&params, threads, |&p| {
            let d = match kind {
                GridKind::Z => Deformation::Beltrami(p),
                GridKind::T => Deformation::Wolf(p.re),
            };
            self.evaluate(d)
        });
        let points = results.into_iter().collect::<Result<Vec<_>>>()?;
        let surface = match self.surface {
            Some(_) => {
                let pts = points
                    .iter()
                    .map(|fp| {
                        let m = fp.surface.as_ref().expect("surface solved");
                        TracePoint { p1: fp.param.re, p2: fp.param.im, energy: m.energy, ell: None, residual: m.residual, iterations: m.iterations }
                    })
                    .collect();
                Some(EnergyTrace::from_points(kind, step, n, pts)?)
            }
            None => None,
        };
        let loops = self
            .loops
            .iter()
            .enumerate()
            .map(|(c, cl)| {
                let l0 = cl.base_length();
                let pts = points
                    .iter()
                    .map(|fp| {
                        let g = &fp.loops[c];
                        TracePoint {
                            p1: fp.param.re,
                            p2: fp.param.im,
                            energy: g.length * g.length / l0,
                            ell: Some(g.length),
                            residual: g.residual,
                            iterations: g.iterations,
                        }
                    })
                    .collect();
                EnergyTrace::from_points(kind, step, n, pts)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Sweep { surface, loops, points })
    }
}
