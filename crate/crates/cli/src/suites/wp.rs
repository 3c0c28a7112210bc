//! Energy along second-order Weil–Petersson rays on both surface domains, the power
//! sweep, symmetry checks of the ray, and the curve-system energy demo.

use super::shared::{Dom, Shared};
use super::Lab;
use teichlab::family::ClassLoop;
use teichlab::harmonic::{EnergyTrace, TracePoint};
use teichlab::metric::wolf_alpha;
use teichlab::variation::MapData;
use teichlab::wp::{
    alpha_trace_bound, cauchy_schwarz_check, convexity_check, curve_system_trace, first_derivative_check, grid_minimize,
    power_convexity_sweep, q_trace_bound, scaling_check, wolf_slope, wp_energy_curve, WpRay,
};
use teichlab::{QuadDiff, C64};

const RAY: &str = "energy along Weil-Petersson rays";
const POWER: &str = "convexity of energy powers";
const DEMO: &str = "curve-system energy along a ray";
/// Relative agreement of rays related by a rotation of the differential.
const ROTATION_TOL: f64 = 1e-3;
/// Agreement of loop-energy and length derivatives; the discrete chain rule holds up to O(h²ℓ'²).
const CHAIN_TOL: f64 = 1e-4;
/// Curve-system grid: half-width as a fraction of the positivity threshold.
const DEMO_RANGE: f64 = 0.15;
const DEMO_COARSE: usize = 9;
const DEMO_FINE: usize = 17;

pub fn run(lab: &mut Lab, sh: &Shared) {
    for k in 0..sh.qds.len() {
        for d in [Dom::Identity, Dom::Deformed] {
            lab.section(&format!("seed{k}_{}", d.label()), RAY, |lab| ray(lab, sh, k, d));
        }
    }
    lab.section("symmetry", RAY, |lab| symmetry(lab, sh));
    lab.section("curve_system", DEMO, |lab| curve_system(lab, sh));
}

/// t-sweep for `qd` on domain `d`; loops are tracked on the deformed domain only.
fn sweep(lab: &Lab, sh: &Shared, qd: &QuadDiff, d: Dom, alpha: &[f64]) -> teichlab::Result<(WpRay, Vec<WpRay>)> {
    let loops: &[ClassLoop] = if d == Dom::Deformed { &sh.loops } else { &[] };
    let setup = sh.setup(qd, Some(d), loops, Some(alpha));
    let (thr, sw) = wp_energy_curve(&setup, lab.cfg.t_step, lab.cfg.t_count as usize, lab.threads)?;
    let surface = WpRay::from_trace(d.label(), thr, sw.surface.expect("surface sweep"));
    let loops = sw.loops.into_iter().enumerate().map(|(c, t)| WpRay::from_trace(&format!("loop{c}"), thr, t)).collect();
    Ok((surface, loops))
}

fn ray(lab: &mut Lab, sh: &Shared, k: usize, d: Dom) -> teichlab::Result<()> {
    let qd = &sh.qds[k];
    let alpha = wolf_alpha(sh.fem, qd)?;
    let (dom, map) = sh.domain(d);
    let md = MapData::new(dom, qd, map);
    let (r, loop_rays) = sweep(lab, sh, qd, d, &alpha)?;
    let p = format!("seed{k}_{}", d.label());

    let fd = first_derivative_check(&r, wolf_slope(&md));
    let spec = lab
        .spec(&format!("{p}_first_derivative"), RAY)
        .value("fd", fd.fd)
        .value("analytic", fd.analytic)
        .value("fd_noise", r.d1_noise)
        .value("energy", r.energy)
        .tolerance(fd.tol);
    lab.push(spec, fd.pass);

    let cv = convexity_check(&r, alpha_trace_bound(&md, &alpha), q_trace_bound(&md));
    let spec = lab
        .spec(&format!("{p}_convexity"), RAY)
        .value("d2", cv.d2)
        .value("d2_noise", cv.noise)
        .value("alpha_bound", cv.alpha_bound)
        .value("q_bound", cv.q_bound)
        .value("margin", cv.margin)
        .tolerance(teichlab::wp::CONVEXITY_SLACK);
    lab.push(spec, cv.pass && cv.chain_pass && !cv.degenerate);

    let cs = cauchy_schwarz_check(&r);
    let spec = lab
        .spec(&format!("{p}_cauchy_schwarz"), RAY)
        .value("slope_squared", cs.lhs)
        .value("six_e_d2", cs.rhs)
        .tolerance(teichlab::wp::CAUCHY_SCHWARZ_SLACK);
    lab.push(spec, cs.pass);

    let ps = power_convexity_sweep(&r, &lab.cfg.powers);
    for e in &ps.entries {
        let mut spec = lab
            .spec(&format!("{p}_power_{:.4}", e.c), POWER)
            .value("exponent", e.c)
            .value("d2", e.d2)
            .value("noise", e.noise)
            .value("normalized", e.normalized)
            .tolerance(e.noise);
        if !e.asserted {
            spec = spec.exploratory();
        }
        lab.push(spec, e.pass);
    }
    let spec = lab.spec(&format!("{p}_power_monotone"), POWER).value("asserted_count", ps.entries.iter().filter(|e| e.asserted).count() as f64);
    lab.push(spec, ps.monotone);

    let spec = lab
        .spec(&format!("{p}_third_derivative"), RAY)
        .value("d3", r.d3)
        .value("d2", r.d2)
        .value("threshold", r.threshold)
        .exploratory();
    lab.push(spec, r.d3.is_finite());

    // loop energies ℓ²/ℓ₀ against the chain rule applied to the sampled lengths
    for (c, lr) in loop_rays.iter().enumerate() {
        let l0 = sh.loops[c].base_length();
        let ell = |p: &TracePoint| p.ell.expect("loop trace carries lengths");
        let t = &lr.trace;
        let (d1l, d2l) = (t.dt(ell, 1), t.d2t(ell, 1));
        let chain = 2.0 * (d1l * d1l + t.centre().energy.sqrt() * l0.sqrt() * d2l) / l0;
        let d2e = t.d2t(EnergyTrace::energy, 1);
        let err = (chain - d2e).abs() / d2e.abs().max(1e-12 * l0);
        let spec = lab
            .spec(&format!("{p}_loop{c}_chain_rule"), RAY)
            .value("d2_energy", d2e)
            .value("d2_from_lengths", chain)
            .value("loop_d2", lr.d2)
            .value("loop_d2_noise", lr.d2_noise)
            .value("relative_error", err)
            .tolerance(CHAIN_TOL);
        lab.push(spec, err <= CHAIN_TOL || (chain - d2e).abs() <= 1e-9 * l0);
    }
    lab.emit_trace(&format!("{p}_energy"), &r.trace);
    Ok(())
}

/// Rotating the differential by `i` and doubling it on the deformed domain of seed 0.
fn symmetry(lab: &mut Lab, sh: &Shared) -> teichlab::Result<()> {
    let qd = &sh.qds[0];
    let alpha = wolf_alpha(sh.fem, qd)?;
    let (base, _) = sweep(lab, sh, qd, Dom::Deformed, &alpha)?;

    // α depends on |q| only, so the rotated ray shares it
    let iq = qd.scaled(C64::new(0.0, 1.0));
    let (dom, map) = sh.domain(Dom::Deformed);
    let md = MapData::new(dom, &iq, map);
    let (rot, _) = sweep(lab, sh, &iq, Dom::Deformed, &alpha)?;
    let fd = first_derivative_check(&rot, wolf_slope(&md));
    let cv = convexity_check(&rot, alpha_trace_bound(&md, &alpha), q_trace_bound(&md));
    let q_rel = (q_trace_bound(&md) / q_trace_bound(&MapData::new(dom, qd, map)) - 1.0).abs();
    let spec = lab
        .spec("rotated_differential", RAY)
        .value("d1", rot.d1)
        .value("d1_base", base.d1)
        .value("d2", rot.d2)
        .value("d2_base", base.d2)
        .value("q_bound_relative_change", q_rel)
        .tolerance(ROTATION_TOL);
    lab.push(spec, fd.pass && cv.pass && cauchy_schwarz_check(&rot).pass && q_rel <= 1e-12);

    let q2 = qd.scaled(C64::new(2.0, 0.0));
    let alpha2 = wolf_alpha(sh.fem, &q2)?;
    let (dbl, _) = sweep(lab, sh, &q2, Dom::Deformed, &alpha2)?;
    let sc = scaling_check(&base, &dbl, 2.0);
    let spec = lab
        .spec("doubled_differential", RAY)
        .value("d1_ratio", sc.d1_ratio)
        .value("d2_ratio", sc.d2_ratio)
        .value("base_step", base.trace.step)
        .value("doubled_step", dbl.trace.step)
        .tolerance(1e-3);
    lab.push(spec, sc.pass);
    Ok(())
}

fn curve_system(lab: &mut Lab, sh: &Shared) -> teichlab::Result<()> {
    let qd = &sh.qds[0];
    let alpha = wolf_alpha(sh.fem, qd)?;
    let loops = lab
        .cfg
        .curve_system
        .iter()
        .map(|w| ClassLoop::new(&lab.group, sh.fem, w, lab.cfg.circle_samples as usize))
        .collect::<teichlab::Result<Vec<_>>>()?;
    let setup = sh.setup(qd, None, &loops, Some(&alpha));
    let mut minima = Vec::new();
    for (label, count) in [("coarse", DEMO_COARSE), ("fine", DEMO_FINE)] {
        let fraction = DEMO_RANGE / (count / 2) as f64;
        let (thr, sw) = wp_energy_curve(&setup, fraction, count, lab.threads)?;
        let values = curve_system_trace(&sw.loops);
        let params: Vec<f64> = sw.points.iter().map(|p| p.param.re).collect();
        let scale = values.iter().copied().fold(0.0, f64::max);
        let h = params[1] - params[0];
        let m = grid_minimize(&params, &values, 1e-9 * scale / (h * h));
        let single = &sw.loops[0].centre();
        let spec = lab
            .spec(&format!("{label}_grid"), DEMO)
            .value("argmin_over_threshold", m.argmin / thr)
            .value("minimum", m.value)
            .value("min_second_difference", m.min_second_difference)
            .value("single_class_gap", (single.energy - single.ell.unwrap_or(f64::NAN)).abs())
            .tolerance(m.tol);
        lab.push(spec, m.convex && (single.energy - single.ell.unwrap_or(f64::NAN)).abs() <= 1e-10 * single.energy);
        minima.push((m, h));
        for (c, t) in sw.loops.iter().enumerate() {
            lab.emit_trace(&format!("{label}_class{c}"), t);
        }
    }
    let (a, ha) = &minima[0];
    let (b, _) = &minima[1];
    let spec = lab
        .spec("argmin_stability", DEMO)
        .value("coarse_argmin", a.argmin)
        .value("fine_argmin", b.argmin)
        .value("coarse_step", *ha)
        .tolerance(*ha);
    lab.push(spec, (a.argmin - b.argmin).abs() <= *ha + 1e-15);
    Ok(())
}
