//! Analytic first and second variations against finite differences of the z-sweeps, on the
//! deformed surface domain and on the tracked loops.

use super::shared::{Dom, Shared};
use super::Lab;
use teichlab::harmonic::trace::{richardson, richardson_c};
use teichlab::harmonic::{EnergyTrace, TracePoint};
use teichlab::variation::{
    c_phi_solve, circle_first_variation, circle_second_variation, first_variation, hodge_check, kodaira_spencer,
    log_sum_check, loop_energy_first_variation, psh_certificate, raw_first_variation, remark_correction_check,
    second_variation, solve_w, LoopSamples, MapData, SLICE_CALIBRATION,
};

const FIRST_TOL: f64 = 0.01;
const FIRST_ABS: f64 = 1e-5;
const SECOND_TOL: f64 = 0.03;
const CIRCLE_SECOND_TOL: f64 = 0.02;
const HODGE_TOL: f64 = 1e-6;
const HODGE_NORM_TOL: f64 = 1e-4;
const C_FLOOR: f64 = 1e-10;
const C_CEIL: f64 = 1e-8;
const ROUND_TRIP: f64 = 1e-9;
const SYMMETRY_TOL: f64 = 1e-10;
const SCHUR_TOL: f64 = 1e-9;
const CIRCULATION_TOL: f64 = 1e-4;
const ANTIHOLOMORPHY_TOL: f64 = 1e-6;
const AA_TOL: f64 = 1e-6;

const FIRST: &str = "first variation of the energy";
const SECOND: &str = "second variation of the energy";
const CIRCLE: &str = "variation of closed geodesic length";
const PSH: &str = "plurisubharmonicity of the energy";
const CPHI: &str = "geodesic curvature form of the fibration";
const OPS: &str = "operator structure of the second variation";

pub fn run(lab: &mut Lab, sh: &Shared) {
    for k in 0..sh.qds.len() {
        lab.section(&format!("seed{k}"), FIRST, |lab| seed(lab, sh, k));
    }
}

fn ell(p: &TracePoint) -> f64 {
    p.ell.expect("loop trace carries lengths")
}

fn seed(lab: &mut Lab, sh: &Shared, k: usize) -> teichlab::Result<()> {
    let qd = &sh.qds[k];
    let h = lab.cfg.grid_step;
    let coarse = sh.z_sweep(lab, k, h)?;
    let fine = sh.z_sweep(lab, k, 0.5 * h)?;
    let (s, s2) = (coarse.surface.as_ref().expect("surface sweep"), fine.surface.as_ref().expect("surface sweep"));
    let (dom, map) = sh.domain(Dom::Deformed);
    let md = MapData::new(dom, qd, map);
    let e0 = map.energy;
    let p = format!("seed{k}");

    // first variation, with the calibration measured from the same data
    let analytic = first_variation(&md);
    let raw = raw_first_variation(&md);
    let (fd, noise) = richardson_c(s.dz(EnergyTrace::energy), s2.dz(EnergyTrace::energy));
    let tol = (FIRST_TOL * analytic.norm()).max(FIRST_ABS * e0);
    let measured = if raw.norm() > FIRST_ABS * e0 { (fd * raw.conj()).re / raw.norm_sqr() } else { SLICE_CALIBRATION };
    let spec = lab
        .spec(&format!("{p}_surface_first"), FIRST)
        .value("analytic_re", analytic.re)
        .value("analytic_im", analytic.im)
        .value("fd_re", fd.re)
        .value("fd_im", fd.im)
        .value("fd_noise", noise)
        .value("error", (fd - analytic).norm())
        .value("measured_calibration", measured)
        .value("energy", e0)
        .tolerance(tol);
    let cal_ok = (measured / SLICE_CALIBRATION - 1.0).abs() <= FIRST_TOL;
    lab.push(spec, (fd - analytic).norm() <= tol && cal_ok);

    // second variation and its chain
    let ks = kodaira_spencer(&md);
    let cp = c_phi_solve(sh.fem, qd)?;
    let w = solve_w(&md, lab.cfg.w_samples as usize, lab.cfg.random_seed + k as u64)?;
    let sv = second_variation(&md, &cp.c, &ks, &w);
    let (fd2, noise2) = richardson(s.ddbar(EnergyTrace::energy), s2.ddbar(EnergyTrace::energy));
    let rel = (fd2 - sv.total).abs() / sv.total.abs().max(f64::MIN_POSITIVE);
    let spec = lab
        .spec(&format!("{p}_surface_second"), SECOND)
        .value("analytic", sv.total)
        .value("c_term", sv.c_term)
        .value("aa", sv.aa)
        .value("hessian_term", sv.hessian_term)
        .value("fd", fd2)
        .value("fd_noise", noise2)
        .value("relative_error", rel)
        .tolerance(SECOND_TOL);
    lab.push(spec, rel <= SECOND_TOL && sv.total >= sv.c_term - 1e-8);

    let psh = psh_certificate(s, Some(s2), sv.c_term);
    let spec = lab
        .spec(&format!("{p}_psh"), PSH)
        .value("log_ddbar_fd", psh.m1)
        .value("c_ratio", psh.m2)
        .value("noise", psh.noise)
        .tolerance(psh.tol);
    lab.push(spec, psh.pass && !psh.degenerate && psh.m2 > 0.0);

    let spec = lab
        .spec(&format!("{p}_c_phi"), CPHI)
        .value("min_c", cp.min_c)
        .value("max_c", cp.max_c)
        .value("sup_a2", cp.sup_a2)
        .value("round_trip", cp.residual)
        .tolerance(ROUND_TRIP);
    lab.push(spec, cp.min_c >= -C_FLOOR && cp.max_c <= cp.sup_a2 + C_CEIL && cp.residual <= ROUND_TRIP);

    let spec = lab
        .spec(&format!("{p}_block_system"), OPS)
        .value("symmetry", w.symmetry)
        .value("schur_min", w.schur_min)
        .value("mass_schur_min", w.mass_schur_min)
        .value("relative_residual", w.relative_residual)
        .value("second_row", w.second_row)
        .value("samples", lab.cfg.w_samples as f64)
        .tolerance(SYMMETRY_TOL);
    let ok = w.symmetry <= SYMMETRY_TOL
        && w.schur_min >= -SCHUR_TOL
        && w.mass_schur_min >= -SCHUR_TOL
        && w.relative_residual <= ROUND_TRIP
        && w.second_row <= ROUND_TRIP;
    lab.push(spec, ok);

    let aa_rel = (ks.aa_pairing - ks.aa_fiber).abs() / ks.aa_pairing.abs().max(f64::MIN_POSITIVE);
    let spec = lab
        .spec(&format!("{p}_kodaira_spencer"), OPS)
        .value("circulation", ks.circulation)
        .value("antiholomorphy", ks.antiholomorphy)
        .value("aa_pairing", ks.aa_pairing)
        .value("aa_fiber", ks.aa_fiber)
        .value("aa_relative_difference", aa_rel)
        .tolerance(CIRCULATION_TOL);
    lab.push(spec, ks.circulation <= CIRCULATION_TOL && ks.antiholomorphy <= ANTIHOLOMORPHY_TOL && aa_rel <= AA_TOL);

    // closed geodesics
    for (c, cl) in sh.loops.iter().enumerate() {
        let (l, l2) = (&coarse.loops[c], &fine.loops[c]);
        let l0 = cl.base_length();
        let ls = LoopSamples::new(&cl.domain);
        let first = circle_first_variation(&ls, qd);
        let (fd_l, _) = richardson_c(l.dz(ell), l2.dz(ell));
        let first_tol = (FIRST_TOL * first.norm()).max(FIRST_ABS * l0);
        let efirst = loop_energy_first_variation(&ls, qd);
        let (fd_e, _) = richardson_c(l.dz(EnergyTrace::energy), l2.dz(EnergyTrace::energy));
        let efirst_tol = (FIRST_TOL * efirst.norm()).max(FIRST_ABS * l0);
        let spec = lab
            .spec(&format!("{p}_loop{c}_first"), CIRCLE)
            .value("analytic_re", first.re)
            .value("analytic_im", first.im)
            .value("fd_re", fd_l.re)
            .value("fd_im", fd_l.im)
            .value("error", (fd_l - first).norm())
            .value("energy_error", (fd_e - efirst).norm())
            .value("base_length", l0)
            .tolerance(first_tol);
        lab.push(spec, (fd_l - first).norm() <= first_tol && (fd_e - efirst).norm() <= efirst_tol);

        let csv = circle_second_variation(&ls, qd, &lab.group, sh.fem, &cp.c)?;
        let (fd2_l, noise_l) = richardson(l.ddbar(ell), l2.ddbar(ell));
        let rel = (fd2_l - csv.total).abs() / csv.total.abs().max(f64::MIN_POSITIVE);
        let spec = lab
            .spec(&format!("{p}_loop{c}_second"), CIRCLE)
            .value("analytic", csv.total)
            .value("c_term", csv.c_term)
            .value("resolvent_term", csv.resolvent_term)
            .value("fd", fd2_l)
            .value("fd_noise", noise_l)
            .value("relative_error", rel)
            .tolerance(CIRCLE_SECOND_TOL);
        lab.push(spec, rel <= CIRCLE_SECOND_TOL && csv.c_term >= 0.0 && csv.resolvent_term >= 0.0);

        let hc = hodge_check(&ls, qd);
        let expected = efirst.norm_sqr() / l0;
        let norm_rel = (hc.harmonic_norm2 - expected).abs() / expected.max(f64::MIN_POSITIVE);
        let spec = lab
            .spec(&format!("{p}_loop{c}_hodge"), CIRCLE)
            .value("residual", hc.residual)
            .value("harmonic_norm2", hc.harmonic_norm2)
            .value("first_variation_norm2", expected)
            .value("relative_difference", norm_rel)
            .tolerance(HODGE_TOL);
        lab.push(spec, hc.residual <= HODGE_TOL && (expected <= 1e-14 * l0 || norm_rel <= HODGE_NORM_TOL));

        let rc = remark_correction_check(l, Some(l2), l0);
        let spec = lab
            .spec(&format!("{p}_loop{c}_length_correction"), CIRCLE)
            .value("lhs", rc.lhs)
            .value("rhs", rc.rhs)
            .value("uncorrected_rhs", rc.wrong_rhs)
            .value("relative_error", rc.rel_err)
            .value("uncorrected_relative_error", rc.wrong_rel_err)
            .tolerance(teichlab::variation::certify::REMARK_TOL);
        lab.push(spec, rc.pass && rc.guard);
    }

    let mut pairs: Vec<(String, (&EnergyTrace, &EnergyTrace), (&EnergyTrace, &EnergyTrace))> = Vec::new();
    if coarse.loops.len() >= 2 {
        pairs.push(("loops".into(), (&coarse.loops[0], &fine.loops[0]), (&coarse.loops[1], &fine.loops[1])));
    }
    if !coarse.loops.is_empty() {
        pairs.push(("surface_loop0".into(), (s, s2), (&coarse.loops[0], &fine.loops[0])));
    }
    for (label, a, b) in pairs {
        let ls = log_sum_check((a.0, Some(a.1)), (b.0, Some(b.1)));
        let spec = lab
            .spec(&format!("{p}_log_sum_{label}"), PSH)
            .value("log_ddbar_fd", ls.value)
            .value("noise", ls.noise)
            .tolerance(ls.noise);
        lab.push(spec, ls.pass);
    }
    Ok(())
}
