//! Harmonic maps from the surface domains and closed geodesics of the tracked classes.

use super::shared::{Dom, Shared};
use super::Lab;
use std::f64::consts::PI;
use teichlab::family::Deformation;
use teichlab::fem::MetricField;
use teichlab::harmonic::circle::hyperbolic_distance;
use teichlab::harmonic::{
    geodesic_representative, shorten_curve, solve, CircleTarget, EnergyTrace, SolverOptions, SurfaceDomain, SurfaceEnergy,
    SurfaceTarget, TargetKind,
};
use teichlab::sparse::to_real;
use teichlab::C64;

const AREA_TOL: f64 = 0.01;
const SCALE_S: f64 = 0.25;
const SLOPE_RANGE: (f64, f64) = (0.8, 1.2);
const SLOPE_Z: [f64; 3] = [0.01, 0.02, 0.04];
const SCHEDULE_Z: f64 = 0.04;
const SCHEDULE_TOL: f64 = 1e-8;
/// Relative change of a first derivative under step halving.
const RICHARDSON_TOL: f64 = 1e-2;

pub fn run(lab: &mut Lab, sh: &Shared) {
    lab.section("identity", "harmonic map energy", |lab| identity(lab, sh));
    lab.section("scaling", "harmonic map energy", |lab| scaling(lab, sh));
    lab.section("linear_response", "harmonic map energy", |lab| linear_response(lab, sh));
    lab.section("schedule", "harmonic map energy", |lab| schedule(lab, sh));
    lab.section("loops", "closed geodesics of the tracked classes", |lab| loops(lab, sh));
    lab.section("smoothness", "smooth dependence on the complex structure", |lab| smoothness(lab, sh));
}

fn identity(lab: &mut Lab, sh: &Shared) -> teichlab::Result<()> {
    let (_, m) = sh.domain(Dom::Identity);
    let rel = (m.energy / (4.0 * PI) - 1.0).abs();
    let spec = lab
        .spec("identity_energy", "harmonic map energy")
        .value("energy", m.energy)
        .value("relative_area_error", rel)
        .value("relative_residual", m.residual / m.energy)
        .value("max_increase", m.max_increase())
        .value("iterations", m.iterations as f64)
        .tolerance(AREA_TOL);
    lab.push(spec, rel <= AREA_TOL && m.residual <= 1e-6 * m.energy && m.max_increase() <= 1e-12 * m.energy);
    let (_, md) = sh.domain(Dom::Deformed);
    let spec = lab
        .spec("deformed_domain_energy", "harmonic map energy")
        .value("energy", md.energy)
        .value("relative_residual", md.residual / md.energy)
        .value("max_increase", md.max_increase())
        .value("iterations", md.iterations as f64)
        .tolerance(1e-6);
    lab.push(spec, md.residual <= 1e-6 * md.energy && md.max_increase() <= 1e-12 * md.energy && md.energy > 4.0 * PI * (1.0 - AREA_TOL));
    Ok(())
}

fn identity_state(en: &SurfaceEnergy, dom: &SurfaceDomain) -> (f64, f64) {
    let (e, g) = en.gradient(&dom.identity());
    (e, dom.dual_norm(&to_real(&g)))
}

fn scaling(lab: &mut Lab, sh: &Shared) -> teichlab::Result<()> {
    let (dom, base_map) = sh.domain(Dom::Identity);
    let base = SurfaceEnergy::new(dom, SurfaceTarget::base());
    let scaled = SurfaceEnergy::new(dom, SurfaceTarget { kind: TargetKind::Scaled { s: SCALE_S }, qd: None, field: None });
    let f = (2.0 * SCALE_S).exp();
    let (e0, r0) = identity_state(&base, dom);
    let (e1, r1) = identity_state(&scaled, dom);
    let mut en = SurfaceEnergy::new(dom, SurfaceTarget { kind: TargetKind::Scaled { s: SCALE_S }, qd: None, field: None });
    let m = solve(&mut en, Some(&base_map.dofs), &SolverOptions::default())?;
    let spec = lab
        .spec("scaled_target", "harmonic map energy")
        .value("identity_energy_ratio_error", (e1 / (f * e0) - 1.0).abs())
        .value("identity_relative_residual_base", r0 / e0)
        .value("identity_relative_residual_scaled", r1 / e1)
        .value("minimum_ratio_error", (m.energy / (f * base_map.energy) - 1.0).abs())
        .value("area_ratio_error", (e1 / (f * 4.0 * PI) - 1.0).abs())
        .tolerance(1e-8);
    let ok = (e1 / (f * e0) - 1.0).abs() <= 1e-12
        && ((r1 / e1) - (r0 / e0)).abs() <= 1e-12 * (1.0 + r0 / e0)
        && r1 <= 1e-2 * e1
        && (m.energy / (f * base_map.energy) - 1.0).abs() <= 1e-8
        && (e1 / (f * 4.0 * PI) - 1.0).abs() <= AREA_TOL;
    lab.push(spec, ok);

    // doubling the domain metric leaves the two-dimensional energy unchanged
    let doubled = SurfaceDomain::new(sh.fem, MetricField::base(&sh.fem.quad).scaled(&vec![2.0; sh.fem.quad.len()]))?;
    let (ed, _) = identity_state(&SurfaceEnergy::new(&doubled, SurfaceTarget::base()), &doubled);
    let spec = lab.spec("conformal_domain", "harmonic map energy").value("relative_change", (ed / e0 - 1.0).abs()).tolerance(1e-12);
    lab.push(spec, (ed / e0 - 1.0).abs() <= 1e-12);
    Ok(())
}

fn linear_response(lab: &mut Lab, sh: &Shared) -> teichlab::Result<()> {
    let qd = &sh.qds[0];
    let setup = sh.setup(qd, Some(Dom::Identity), &[], None);
    // measured from the discrete base map, which differs from the identity by discretization error
    let (_, base) = sh.domain(Dom::Identity);
    let id = &base.dofs;
    let mut pts = Vec::new();
    let mut spec = lab.spec("linear_response", "harmonic map energy");
    for &s in &SLOPE_Z {
        let fp = setup.evaluate(Deformation::Beltrami(C64::new(s / qd.sup_nu(), 0.0)))?;
        let m = fp.surface.expect("surface solved");
        let dev = m.dofs.iter().zip(id).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        spec = spec.value(&format!("deviation_{s}"), dev);
        pts.push((s.ln(), dev.ln()));
    }
    // least-squares slope of log deviation against log |z|
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let spec = spec.value("slope", slope).tolerance(SLOPE_RANGE.1 - 1.0);
    lab.push(spec, (SLOPE_RANGE.0..=SLOPE_RANGE.1).contains(&slope));
    Ok(())
}

fn schedule(lab: &mut Lab, sh: &Shared) -> teichlab::Result<()> {
    let qd = &sh.qds[0];
    let z = C64::new(SCHEDULE_Z / qd.sup_nu(), 0.0);
    let (dom, _) = sh.domain(Dom::Deformed);
    let field = teichlab::family::liouville_factor(sh.fem, qd, z)?;
    let target = || SurfaceTarget { kind: TargetKind::Beltrami { z }, qd: Some(qd), field: Some(field.clone()) };
    let default = solve(&mut SurfaceEnergy::new(dom, target()), None, &SolverOptions::default())?;
    let descent = SolverOptions { tol: 1e-7, gate: 1e-6, max_iter: 5000, newton_switch: 0.0 };
    let pgd = solve(&mut SurfaceEnergy::new(dom, target()), None, &descent)?;
    let diff = (default.energy - pgd.energy).abs() / default.energy;
    let spec = lab
        .spec("schedule_independence", "harmonic map energy")
        .value("energy_default", default.energy)
        .value("energy_descent_only", pgd.energy)
        .value("relative_difference", diff)
        .value("iterations_default", default.iterations as f64)
        .value("iterations_descent_only", pgd.iterations as f64)
        .tolerance(SCHEDULE_TOL);
    lab.push(spec, diff <= SCHEDULE_TOL);
    Ok(())
}

fn loops(lab: &mut Lab, sh: &Shared) -> teichlab::Result<()> {
    for (c, cl) in sh.loops.iter().enumerate() {
        let dom = &cl.domain;
        let exact = dom.class.translation_length()?;
        let trace = 2.0 * (dom.class.trace().abs() / 2.0).acosh();
        let l0 = exact / std::f64::consts::SQRT_2;
        let n = dom.n;
        let eta = &cl.base.eta;
        let pts = dom.points(eta);
        let chords: Vec<f64> = pts.windows(2).map(|w| hyperbolic_distance(w[0], w[1])).collect();
        let mean = chords.iter().sum::<f64>() / n as f64;
        let speed = chords.iter().map(|d| (d / mean - 1.0).abs()).fold(0.0, f64::max);
        let off_axis = eta.iter().map(|e| e.abs()).fold(0.0, f64::max);
        let s = 0.2;
        let homothety = shorten_curve(dom, &CircleTarget { kind: TargetKind::Scaled { s }, qd: None, field: None }, None)?;
        let again = geodesic_representative(dom, &CircleTarget::base())?;
        let spec = lab
            .spec(&format!("loop{c}_base"), "closed geodesics of the tracked classes")
            .value("translation_length", exact)
            .value("trace_formula_error", (trace - exact).abs())
            .value("discrete_length_error", (cl.base_length() - l0).abs() / l0)
            .value("polyline_length_error", (dom.polyline_length(eta) - l0).abs() / l0)
            .value("speed_variation", speed)
            .value("max_normal_offset", off_axis)
            .value("base_iterations", again.iterations as f64)
            .value("homothety_error", (homothety.length / (s.exp() * cl.base_length()) - 1.0).abs())
            .tolerance(1e-6);
        let ok = (trace - exact).abs() <= 1e-10
            && (cl.base_length() - l0).abs() <= 1e-6 * l0
            && (dom.polyline_length(eta) - l0).abs() <= 1e-6 * l0
            && speed <= 1e-8
            && off_axis <= 1e-8
            && again.iterations == 0
            && (homothety.length / (s.exp() * cl.base_length()) - 1.0).abs() <= 1e-8;
        lab.push(spec, ok);
    }
    Ok(())
}

fn smoothness(lab: &mut Lab, sh: &Shared) -> teichlab::Result<()> {
    let h = lab.cfg.grid_step;
    let coarse = sh.z_sweep(lab, 0, h)?;
    let fine = sh.z_sweep(lab, 0, 0.5 * h)?;
    let mut traces: Vec<(String, &EnergyTrace, &EnergyTrace, bool)> = Vec::new();
    if let (Some(a), Some(b)) = (&coarse.surface, &fine.surface) {
        traces.push(("surface".into(), a, b, false));
    }
    for (c, (a, b)) in coarse.loops.iter().zip(&fine.loops).enumerate() {
        traces.push((format!("loop{c}"), a, b, true));
    }
    let mut emitted = Vec::new();
    for (label, a, b, is_loop) in traces {
        let e = EnergyTrace::energy;
        let (d1, d2) = (a.dz(e), b.dz(e));
        let change = (d1 - d2).norm() / d2.norm().max(1e-12 * b.centre().energy);
        let (s1, s2) = (a.max_second_difference(e), b.max_second_difference(e));
        let (m1, m2) = (a.mixed(e), b.mixed(e));
        let mixed_change = (m1 - m2).abs() / s2.max(1e-12);
        let converged = a.points.iter().chain(&b.points).all(|p| p.residual <= if is_loop { 1e-10 * p.energy } else { 1e-6 * p.energy });
        let spec = lab
            .spec(&format!("{label}_richardson"), "smooth dependence on the complex structure")
            .value("dz_change", change)
            .value("second_difference_h", s1)
            .value("second_difference_h2", s2)
            .value("mixed_h", m1)
            .value("mixed_h2", m2)
            .value("mixed_change", mixed_change)
            .tolerance(RICHARDSON_TOL);
        let bounded = s2 <= 2.0 * s1 + 1e-9 * b.centre().energy && s1 <= 2.0 * s2 + 1e-9 * b.centre().energy;
        lab.push(spec, change <= RICHARDSON_TOL && bounded && mixed_change <= RICHARDSON_TOL && converged);
        emitted.push((label, a.clone(), b.clone()));
    }
    for (label, a, b) in emitted {
        lab.emit_trace(&format!("seed0_{label}_h"), &a);
        lab.emit_trace(&format!("seed0_{label}_h2"), &b);
    }
    Ok(())
}
