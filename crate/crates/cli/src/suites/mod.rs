//! Verification suites. Each suite appends checks to the shared report; failures inside a
//! suite become failed checks instead of aborting the run.

mod fem;
mod fuchsian;
mod harmonic;
mod metric;
mod shared;
mod variation;
mod wp;

use crate::config::ExperimentConfig;
use crate::report::{CheckSpec, ReportBuilder, VerificationReport};
use crate::svg::{line_chart, Series};
use std::collections::BTreeMap;
use std::time::Instant;
use teichlab::fem::Fem;
use teichlab::fuchsian::Seed;
use teichlab::harmonic::{EnergyTrace, GridKind};
use teichlab::mesh::Mesh;
use teichlab::{OctagonGroup, Result};

pub use shared::Shared;

/// Named output artefact.
pub struct Artifact {
    pub file: String,
    pub contents: String,
}

pub struct RunOutput {
    pub report: VerificationReport,
    pub runtimes: BTreeMap<String, f64>,
    pub artifacts: Vec<Artifact>,
}

/// Mutable run state shared by the suites.
pub struct Lab<'c> {
    pub cfg: &'c ExperimentConfig,
    pub threads: usize,
    pub group: OctagonGroup,
    pub rep: ReportBuilder,
    artifacts: Vec<Artifact>,
    suite: String,
}

impl<'c> Lab<'c> {
    fn new(cfg: &'c ExperimentConfig, threads: usize) -> Self {
        Lab { cfg, threads, group: OctagonGroup::octagon(), rep: ReportBuilder::default(), artifacts: Vec::new(), suite: String::new() }
    }

    fn begin(&mut self, suite: &str) {
        self.suite = suite.to_string();
        self.rep.begin_suite(suite);
    }

    /// Check names are `suite.name`.
    pub fn spec(&self, name: &str, anchor: &str) -> CheckSpec {
        self.rep.spec(&format!("{}.{name}", self.suite), anchor)
    }

    pub fn push(&mut self, spec: CheckSpec, passed: bool) {
        self.rep.push(spec, passed);
    }

    /// Runs one group of checks, timing it and recording an error as a failed check.
    pub fn section(&mut self, name: &str, anchor: &str, f: impl FnOnce(&mut Self) -> Result<()>) {
        let t = Instant::now();
        if let Err(e) = f(self) {
            let n = format!("{}.{name}.error", self.suite);
            self.rep.push_error(&n, anchor, &e);
        }
        let key = format!("{}.{name}", self.suite);
        self.rep.record_runtime(&key, t.elapsed().as_secs_f64());
    }

    /// Stores a trace as CSV (and as an SVG chart when enabled).
    pub fn emit_trace(&mut self, label: &str, trace: &EnergyTrace) {
        let stem = format!("{}_{label}", self.suite);
        self.artifacts.push(Artifact { file: format!("{stem}.csv"), contents: trace.to_csv() });
        if self.cfg.svg {
            let (x_label, points): (&str, Vec<(f64, f64)>) = match trace.kind {
                GridKind::T => ("t", trace.points.iter().map(|p| (p.p1, p.energy)).collect()),
                GridKind::Z => {
                    let m = (trace.n / 2) as i64;
                    ("Re z (Im z = 0)", (-m..=m).map(|i| trace.at(i, 0)).map(|p| (p.p1, p.energy)).collect())
                }
            };
            let chart = line_chart(&stem, x_label, &[Series { label: "E".into(), points }]);
            self.artifacts.push(Artifact { file: format!("{stem}.svg"), contents: chart });
        }
    }
}

pub fn seed_of(c: &[f64; 3]) -> Seed {
    Seed::real(c[0], c[1], c[2])
}

/// Executes every suite selected by the configuration.
pub fn run(cfg: &ExperimentConfig, threads: usize) -> Result<RunOutput> {
    cfg.validate()?;
    let mut lab = Lab::new(cfg, threads);
    if cfg.runs("fuchsian") {
        lab.begin("fuchsian");
        fuchsian::run(&mut lab);
    }
    let mesh = Mesh::octagon(cfg.refine as usize)?;
    let fem = Fem::new(&mesh);
    if cfg.runs("fem") {
        lab.begin("fem");
        fem::run(&mut lab, &fem);
    }
    if cfg.runs("metric") {
        lab.begin("metric");
        metric::run(&mut lab, &fem);
    }
    if cfg.runs("harmonic") || cfg.runs("variation") || cfg.runs("wp") {
        lab.begin("setup");
        let t = Instant::now();
        let shared = Shared::new(&lab, &fem);
        lab.rep.record_runtime("setup", t.elapsed().as_secs_f64());
        match shared {
            Ok(sh) => {
                if cfg.runs("harmonic") {
                    lab.begin("harmonic");
                    harmonic::run(&mut lab, &sh);
                }
                if cfg.runs("variation") {
                    lab.begin("variation");
                    variation::run(&mut lab, &sh);
                }
                if cfg.runs("wp") {
                    lab.begin("wp");
                    wp::run(&mut lab, &sh);
                }
            }
            Err(e) => lab.rep.push_error("setup.error", "shared surface data", &e),
        }
    }
    let Lab { rep, artifacts, .. } = lab;
    let (report, runtimes) = rep.finish(cfg.clone());
    Ok(RunOutput { report, runtimes, artifacts })
}
