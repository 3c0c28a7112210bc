//! Implementations of the `lab` subcommands. Each returns whether its checks passed.

use crate::config::ExperimentConfig;
use crate::report::write_text;
use crate::suites::{self, seed_of, RunOutput};
use serde::Serialize;
use std::path::{Path, PathBuf};
use teichlab::family::{ClassLoop, FamilySetup};
use teichlab::fem::{Fem, MetricField};
use teichlab::fuchsian::{octagon_samples, FuchsianGroup};
use teichlab::harmonic::{solve, GridKind, SolverOptions, SurfaceDomain, SurfaceEnergy, SurfaceTarget};
use teichlab::mesh::Mesh;
use teichlab::metric::{beltrami_metric, curvature_audit, gauss_curvature, wolf_alpha, BeltramiField, Family};
use teichlab::{LabError, QuadDiff, Result, C64};

fn out_path(cfg: &ExperimentConfig, file: &str) -> PathBuf {
    Path::new(&cfg.out_dir).join(file)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
    write_text(path, &(text + "\n"))
}

fn ensure_dir(cfg: &ExperimentConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| LabError::Io(format!("{}: {e}", cfg.out_dir)))
}

/// Writes the mesh with its side pairings as JSON.
pub fn build_surface(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<PathBuf> {
    cfg.validate()?;
    let mesh = Mesh::octagon(cfg.refine as usize)?;
    let path = out.map(Path::to_path_buf).unwrap_or_else(|| out_path(cfg, "mesh.json"));
    if out.is_none() {
        ensure_dir(cfg)?;
    }
    write_json(&path, &mesh.to_file())?;
    Ok(path)
}

#[derive(Serialize)]
struct QdSample {
    v: [f64; 2],
    q: [f64; 2],
    nu_abs: f64,
}

#[derive(Serialize)]
struct QdReport {
    seed: [f64; 3],
    depth: i64,
    sup_nu: f64,
    automorphy_defect: f64,
    samples: Vec<QdSample>,
}

/// Automorphy defect of the compressed Taylor form, the object the solvers evaluate, over
/// images that stay inside the disc where the Taylor form is accurate.
fn compressed_defect(q: &QuadDiff, pts: &[C64]) -> f64 {
    let group = FuchsianGroup::<f64>::octagon();
    let mut worst: f64 = 0.0;
    for &v in pts {
        let qv = q.value(v);
        for g in &group.generators {
            let w = g.apply(v);
            if w.norm() > 0.9 {
                continue;
            }
            let d = g.deriv(v);
            worst = worst.max((q.value(w) * d * d - qv).norm() / (1.0 + qv.norm()));
        }
    }
    worst
}

/// Evaluates every configured differential at fixed sample points.
pub fn qd(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<PathBuf> {
    cfg.validate()?;
    let pts = octagon_samples(32, cfg.random_seed);
    let reports = cfg
        .seeds
        .iter()
        .map(|s| {
            let q = QuadDiff::poincare(seed_of(s), cfg.depth as usize, cfg.normalize)?;
            let samples = pts
                .iter()
                .map(|&v| {
                    let val = q.value(v);
                    QdSample { v: [v.re, v.im], q: [val.re, val.im], nu_abs: q.nu_abs(v) }
                })
                .collect();
            let defect = compressed_defect(&q, &pts);
            Ok(QdReport { seed: *s, depth: cfg.depth, sup_nu: q.sup_nu(), automorphy_defect: defect, samples })
        })
        .collect::<Result<Vec<_>>>()?;
    let path = out.map(Path::to_path_buf).unwrap_or_else(|| out_path(cfg, "qd.json"));
    if out.is_none() {
        ensure_dir(cfg)?;
    }
    write_json(&path, &reports)?;
    Ok(path)
}

#[derive(Serialize)]
struct LiouvilleReport {
    seed: [f64; 3],
    z: [f64; 2],
    iterations: usize,
    residuals: Vec<f64>,
    w_sup: f64,
    curvature_deviation: f64,
}

/// Uniformizes the Beltrami metric of the domain differential at `domain_z`.
pub fn liouville(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<PathBuf> {
    cfg.validate()?;
    let mesh = Mesh::octagon(cfg.refine as usize)?;
    let fem = Fem::new(&mesh);
    let q = QuadDiff::poincare(seed_of(&cfg.domain_seed), cfg.depth as usize, cfg.normalize)?;
    let z = C64::new(cfg.domain_z[0], cfg.domain_z[1]) / q.sup_nu();
    let g = beltrami_metric(&fem, &BeltramiField::new(&q), z)?;
    let k = gauss_curvature(&fem, Some(&q), Family::Beltrami { z });
    let sol = teichlab::metric::solve_liouville(&fem, &g, &k)?;
    let audit = curvature_audit(&fem, &g, &k, &sol.w)?;
    let report = LiouvilleReport {
        seed: cfg.domain_seed,
        z: [z.re, z.im],
        iterations: sol.iterations,
        residuals: sol.residuals.clone(),
        w_sup: sol.w.iter().fold(0.0f64, |m, x| m.max(x.abs())),
        curvature_deviation: audit.iter().fold(0.0f64, |m, x| m.max((x + 1.0).abs())),
    };
    let path = out.map(Path::to_path_buf).unwrap_or_else(|| out_path(cfg, "liouville.json"));
    if out.is_none() {
        ensure_dir(cfg)?;
    }
    write_json(&path, &report)?;
    Ok(path)
}

/// Energy sweep of the first configured differential from the base surface domain; one CSV per
/// tracked domain. Returns the written files.
pub fn sweep(cfg: &ExperimentConfig, kind: GridKind, threads: usize) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let mesh = Mesh::octagon(cfg.refine as usize)?;
    let fem = Fem::new(&mesh);
    let group = FuchsianGroup::octagon();
    let q = QuadDiff::poincare(seed_of(&cfg.seeds[0]), cfg.depth as usize, cfg.normalize)?;
    let dom = SurfaceDomain::new(&fem, MetricField::base(&fem.quad))?;
    let map = solve(&mut SurfaceEnergy::new(&dom, SurfaceTarget::base()), None, &SolverOptions::default())?;
    let loops = cfg
        .classes
        .iter()
        .map(|w| ClassLoop::new(&group, &fem, w, cfg.circle_samples as usize))
        .collect::<Result<Vec<_>>>()?;
    let alpha = match kind {
        GridKind::T => Some(wolf_alpha(&fem, &q)?),
        GridKind::Z => None,
    };
    let setup = FamilySetup { fem: &fem, qd: &q, surface: Some((&dom, &map)), loops: &loops, alpha: alpha.as_deref(), opts: SolverOptions::default() };
    let (tag, sw) = match kind {
        GridKind::Z => ("z", setup.sweep(kind, cfg.grid_step / q.sup_nu(), cfg.grid_size as usize, threads)?),
        GridKind::T => ("t", teichlab::wp::wp_energy_curve(&setup, cfg.t_step, cfg.t_count as usize, threads)?.1),
    };
    ensure_dir(cfg)?;
    let mut files = Vec::new();
    let traces = sw.surface.iter().map(|t| ("surface".to_string(), t)).chain(sw.loops.iter().enumerate().map(|(c, t)| (format!("loop{c}"), t)));
    for (label, t) in traces {
        let path = out_path(cfg, &format!("sweep_{tag}_{label}.csv"));
        write_text(&path, &t.to_csv())?;
        files.push(path);
    }
    Ok(files)
}

/// Runs the selected suites and writes the report, its runtime sidecar and all artefacts.
pub fn verify(cfg: &ExperimentConfig, threads: usize, report: Option<&Path>) -> Result<RunOutput> {
    let out = suites::run(cfg, threads)?;
    ensure_dir(cfg)?;
    for a in &out.artifacts {
        write_text(&out_path(cfg, &a.file), &a.contents)?;
    }
    let path = report.map(Path::to_path_buf).unwrap_or_else(|| out_path(cfg, "report.json"));
    write_text(&path, &out.report.to_json())?;
    let mut side = path.clone().into_os_string();
    side.push(".runtime.json");
    write_json(Path::new(&side), &out.runtimes)?;
    Ok(out)
}
