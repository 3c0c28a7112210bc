//! Data reused across the harmonic, variation and wp suites: target differentials, the two
//! surface domains with their base maps, the tracked loops and memoized z-sweeps.

use super::{seed_of, Lab};
use std::cell::RefCell;
use std::collections::BTreeMap;
use std::rc::Rc;
use teichlab::family::{ClassLoop, FamilySetup, Sweep};
use teichlab::fem::{Fem, MetricField};
use teichlab::harmonic::{solve, GridKind, HarmonicMap, SolverOptions, SurfaceDomain, SurfaceEnergy, SurfaceTarget};
use teichlab::metric::{beltrami_metric, BeltramiField};
use teichlab::{QuadDiff, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Dom {
    /// Base hyperbolic metric on the domain: the family starts at the identity.
    Identity,
    /// Domain carrying a fixed Beltrami deformation, so the base map is not conformal.
    Deformed,
}

impl Dom {
    pub fn label(self) -> &'static str {
        match self {
            Dom::Identity => "identity",
            Dom::Deformed => "deformed",
        }
    }
}

pub struct Shared<'a> {
    pub fem: &'a Fem<'a>,
    pub qds: Vec<QuadDiff>,
    pub domain_qd: QuadDiff,
    pub zeta: C64,
    identity: SurfaceDomain<'a>,
    identity_map: HarmonicMap,
    deformed: SurfaceDomain<'a>,
    deformed_map: HarmonicMap,
    pub loops: Vec<ClassLoop>,
    z_sweeps: RefCell<BTreeMap<(usize, u64), Rc<Sweep>>>,
}

fn base_map(dom: &SurfaceDomain) -> Result<HarmonicMap> {
    let mut en = SurfaceEnergy::new(dom, SurfaceTarget::base());
    solve(&mut en, None, &SolverOptions::default())
}

impl<'a> Shared<'a> {
    pub fn new(lab: &Lab, fem: &'a Fem<'a>) -> Result<Self> {
        let cfg = lab.cfg;
        let depth = cfg.depth as usize;
        let qds = cfg
            .seeds
            .iter()
            .map(|s| QuadDiff::poincare(seed_of(s), depth, cfg.normalize))
            .collect::<Result<Vec<_>>>()?;
        let domain_qd = QuadDiff::poincare(seed_of(&cfg.domain_seed), depth, cfg.normalize)?;
        let zeta = C64::new(cfg.domain_z[0], cfg.domain_z[1]) / domain_qd.sup_nu();
        let identity = SurfaceDomain::new(fem, MetricField::base(&fem.quad))?;
        let identity_map = base_map(&identity)?;
        let deformed = SurfaceDomain::new(fem, beltrami_metric(fem, &BeltramiField::new(&domain_qd), zeta)?)?;
        let deformed_map = base_map(&deformed)?;
        let loops = cfg
            .classes
            .iter()
            .map(|w| ClassLoop::new(&lab.group, fem, w, cfg.circle_samples as usize))
            .collect::<Result<Vec<_>>>()?;
        Ok(Shared { fem, qds, domain_qd, zeta, identity, identity_map, deformed, deformed_map, loops, z_sweeps: RefCell::new(BTreeMap::new()) })
    }

    pub fn domain(&self, d: Dom) -> (&SurfaceDomain<'a>, &HarmonicMap) {
        match d {
            Dom::Identity => (&self.identity, &self.identity_map),
            Dom::Deformed => (&self.deformed, &self.deformed_map),
        }
    }

    pub fn setup<'s>(&'s self, qd: &'s QuadDiff, d: Option<Dom>, loops: &'s [ClassLoop], alpha: Option<&'s [f64]>) -> FamilySetup<'s, 'a> {
        FamilySetup { fem: self.fem, qd, surface: d.map(|d| self.domain(d)), loops, alpha, opts: SolverOptions::default() }
    }

    /// z-grid step for seed `k` in absolute units.
    pub fn z_step(&self, k: usize, units: f64) -> f64 {
        units / self.qds[k].sup_nu()
    }

    /// Deformed-domain z-sweep with all tracked loops for seed `k`, computed once.
    pub fn z_sweep(&self, lab: &Lab, k: usize, units: f64) -> Result<Rc<Sweep>> {
        let key = (k, units.to_bits());
        if let Some(s) = self.z_sweeps.borrow().get(&key) {
            return Ok(s.clone());
        }
        let setup = self.setup(&self.qds[k], Some(Dom::Deformed), &self.loops, None);
        let sweep = Rc::new(setup.sweep(GridKind::Z, self.z_step(k, units), lab.cfg.grid_size as usize, lab.threads)?);
        self.z_sweeps.borrow_mut().insert(key, sweep.clone());
        Ok(sweep)
    }
}
