//! Closed-form metric weights, Beltrami families, Liouville uniformization and the Wolf
//! expansion.

use super::{seed_of, Lab};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use teichlab::fem::{phi0, Fem, MetricField};
use teichlab::fuchsian::series::{octagon_samples, VALID_RADIUS};
use teichlab::jet::Jet2;
use teichlab::metric::{
    beltrami_metric, curvature_audit, gauss_curvature, nu_sq, phi_vvbar, solve_liouville, wolf_alpha, wolf_metric, BeltramiField, Family,
};
use teichlab::sparse::relative_residual;
use teichlab::{LabError, QuadDiff, C64};

/// Curvature tolerance of the uniformized deformed metric.
const CURVATURE_TOL: f64 = 2e-2;
/// Slice point used for the Liouville audit, in units of `1/sup|ν|`.
const AUDIT_Z: f64 = 0.05;
/// Smallest accepted Newton convergence order.
const MIN_ORDER: f64 = 1.8;
const NEWTON_REGIME: f64 = 1e-2;
/// Residuals below this sit at the rounding floor and carry no order information.
const RESIDUAL_FLOOR: f64 = 1e-16;

pub fn run(lab: &mut Lab, fem: &Fem) {
    lab.section("weight", "curvature -1 of the Poincare weight", weight);
    let qds = match lab.cfg.seeds.iter().map(|s| QuadDiff::poincare(seed_of(s), lab.cfg.depth as usize, lab.cfg.normalize)).collect::<teichlab::Result<Vec<_>>>() {
        Ok(q) => q,
        Err(e) => {
            lab.rep.push_error("metric.setup.error", "Poincare series of weight four", &e);
            return;
        }
    };
    lab.section("beltrami", "Beltrami deformation of the base metric", |lab| beltrami(lab, fem, &qds[0]));
    lab.section("tensor", "Beltrami differential as a (-1,1)-tensor", |lab| tensor(lab, &qds));
    lab.section("curvature", "closed-form Gauss curvature", |lab| curvature(lab, fem, &qds[0]));
    lab.section("liouville", "hyperbolic metric in a conformal class", |lab| liouville(lab, fem, &qds[0]));
    lab.section("alpha", "Wolf correction lower bound", |lab| alpha(lab, fem, &qds));
    lab.section("wolf", "second-order Weil-Petersson expansion", |lab| wolf(lab, fem, &qds[0]));
}

fn weight(lab: &mut Lab) -> teichlab::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(lab.cfg.random_seed);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let v = C64::from_polar(rng.gen_range(0.0f64..0.95).sqrt(), rng.gen_range(0.0..std::f64::consts::TAU));
        let (x, y) = (Jet2::var_x(v.re), Jet2::var_y(v.im));
        let s = Jet2::constant(1.0) - (x * x + y * y);
        let w = Jet2::constant(2.0) / (s * s);
        let l = w.ln();
        let ddbar = 0.25 * (l.xx + l.yy);
        let p = phi_vvbar(v);
        worst = worst.max((ddbar - p).abs() / p);
        worst = worst.max((phi0(v) - 2.0 * p).abs() / p);
    }
    let spec = lab.spec("liouville_weight", "curvature -1 of the Poincare weight").value("max_relative_error", worst).tolerance(1e-9);
    lab.push(spec, worst <= 1e-9);
    Ok(())
}

fn beltrami(lab: &mut Lab, fem: &Fem, qd: &QuadDiff) -> teichlab::Result<()> {
    let nu = BeltramiField::new(qd);
    let base = MetricField::base(&fem.quad);
    let g0 = beltrami_metric(fem, &nu, C64::new(0.0, 0.0))?;
    let zero_diff = g0.efg.iter().zip(&base.efg).map(|(a, b)| (0..3).map(|k| (a[k] - b[k]).abs()).fold(0.0, f64::max)).fold(0.0, f64::max);
    let dx2 = fem.quad.points.iter().zip(&g0.efg).map(|(q, m)| (m[0] - phi0(q.pos)).abs()).fold(0.0, f64::max);
    let z = C64::new(0.3 / nu.sup, 0.0);
    let gz = beltrami_metric(fem, &nu, z)?;
    let mut det = 0.0f64;
    for (q, m) in fem.quad.points.iter().zip(&gz.efg) {
        let p = phi0(q.pos);
        let a = (z * nu.nu(q.pos)).norm_sqr();
        let expect = p * p * (1.0 - a) * (1.0 - a);
        det = det.max((m[0] * m[2] - m[1] * m[1] - expect).abs() / expect);
    }
    let too_large = matches!(beltrami_metric(fem, &nu, C64::new(0.6 / nu.sup, 0.0)), Err(LabError::DeformationTooLarge { .. }));
    let spec = lab
        .spec("beltrami_metric", "Beltrami deformation of the base metric")
        .value("z0_difference", zero_diff)
        .value("dx2_coefficient_error", dx2)
        .value("determinant_error", det)
        .tolerance(1e-10);
    lab.push(spec, zero_diff == 0.0 && dx2 == 0.0 && det <= 1e-10 && too_large);
    Ok(())
}

fn tensor(lab: &mut Lab, qds: &[QuadDiff]) -> teichlab::Result<()> {
    let samples = octagon_samples(64, lab.cfg.random_seed);
    let mut worst = 0.0f64;
    let mut count = 0usize;
    for qd in qds {
        let nu = BeltramiField::new(qd);
        for &v in &samples {
            for g in &lab.group.generators {
                let gv = g.apply(v);
                if gv.norm() > VALID_RADIUS - 0.02 {
                    continue;
                }
                let d = g.deriv(v);
                let pulled = nu.nu(gv) * d.conj() / d;
                worst = worst.max((pulled - nu.nu(v)).norm());
                count += 1;
            }
        }
    }
    let spec = lab.spec("nu_transformation", "Beltrami differential as a (-1,1)-tensor").value("max_defect", worst).value("pairs", count as f64).tolerance(1e-2);
    lab.push(spec, worst <= 1e-2 && count > 0);
    Ok(())
}

fn curvature(lab: &mut Lab, fem: &Fem, qd: &QuadDiff) -> teichlab::Result<()> {
    let base = gauss_curvature(fem, Some(qd), Family::Beltrami { z: C64::new(0.0, 0.0) });
    let base_err = base.iter().map(|k| (k + 1.0).abs()).fold(0.0, f64::max);
    let s: f64 = 0.3;
    let scaled = gauss_curvature(fem, None, Family::Scaled { s });
    let scaled_err = scaled.iter().map(|k| (k + (-2.0 * s).exp()).abs()).fold(0.0, f64::max);
    let one = Jet2::constant(1.0f64);
    let flat = teichlab::jet::brioschi(&one, &Jet2::constant(0.0), &one).abs();
    let z = C64::new(AUDIT_Z / qd.sup_nu(), 0.0);
    let dev = gauss_curvature(fem, Some(qd), Family::Beltrami { z }).iter().map(|k| (k + 1.0).abs()).fold(0.0, f64::max);
    let spec = lab
        .spec("gauss_curvature", "closed-form Gauss curvature")
        .value("base_error", base_err)
        .value("scaled_error", scaled_err)
        .value("euclidean", flat)
        .value("deformed_max_deviation", dev)
        .tolerance(1e-6);
    lab.push(spec, base_err <= 1e-6 && scaled_err <= 1e-6 && flat <= 1e-8 && dev > 1e-3);
    Ok(())
}

fn liouville(lab: &mut Lab, fem: &Fem, qd: &QuadDiff) -> teichlab::Result<()> {
    let base = MetricField::base(&fem.quad);
    let k0 = gauss_curvature(fem, None, Family::Scaled { s: 0.0 });
    let w0 = solve_liouville(fem, &base, &k0)?;
    let w0_sup = w0.w.iter().map(|w| w.abs()).fold(0.0, f64::max);
    let spec = lab.spec("liouville_base", "hyperbolic metric in a conformal class").value("w_sup", w0_sup).value("iterations", w0.iterations as f64).tolerance(1e-8);
    lab.push(spec, w0_sup <= 1e-8);

    let s: f64 = 0.3;
    let scaled = MetricField::from_fn(&fem.quad, |v| [(2.0 * s).exp() * phi0(v), 0.0, (2.0 * s).exp() * phi0(v)]);
    let ks = gauss_curvature(fem, None, Family::Scaled { s });
    let ws = solve_liouville(fem, &scaled, &ks)?;
    let shift = ws.w.iter().map(|w| (w + s).abs()).fold(0.0, f64::max);
    let spec = lab.spec("liouville_constant_shift", "hyperbolic metric in a conformal class").value("max_error", shift).value("s", s).tolerance(1e-8);
    lab.push(spec, shift <= 1e-8);

    let nu = BeltramiField::new(qd);
    let z = C64::new(AUDIT_Z / nu.sup, 0.0);
    let g = beltrami_metric(fem, &nu, z)?;
    let kz = gauss_curvature(fem, Some(qd), Family::Beltrami { z });
    let sol = solve_liouville(fem, &g, &kz)?;
    let audit = curvature_audit(fem, &g, &kz, &sol.w)?;
    let worst = audit.iter().map(|k| (k + 1.0).abs()).fold(0.0, f64::max);
    let spec = lab
        .spec("liouville_deformed", "hyperbolic metric in a conformal class")
        .value("curvature_error", worst)
        .value("z_sup_nu", AUDIT_Z)
        .value("iterations", sol.iterations as f64)
        .tolerance(CURVATURE_TOL);
    lab.push(spec, worst <= CURVATURE_TOL);

    // convergence order p ≈ log(r₂/r₁)/log(r₁/r₀) over consecutive residuals in the Newton regime
    let mut spec = lab.spec("liouville_quadratic", "hyperbolic metric in a conformal class").tolerance(MIN_ORDER);
    for (k, r) in sol.residuals.iter().enumerate() {
        spec = spec.value(&format!("residual{k}"), *r);
    }
    let orders: Vec<f64> = sol
        .residuals
        .windows(3)
        .filter(|w| w[0] < NEWTON_REGIME && w[2] > RESIDUAL_FLOOR)
        .map(|w| (w[2] / w[1]).ln() / (w[1] / w[0]).ln())
        .collect();
    let order = orders.iter().copied().fold(f64::INFINITY, f64::min);
    spec = spec.value("min_order", order).value("order_samples", orders.len() as f64);
    lab.push(spec, !orders.is_empty() && order >= MIN_ORDER);
    Ok(())
}

fn alpha(lab: &mut Lab, fem: &Fem, qds: &[QuadDiff]) -> teichlab::Result<()> {
    let g = MetricField::base(&fem.quad);
    let op = fem.stiffness(&g)?.add_scaled(2.0, &fem.mass(&g)?);
    for (k, qd) in qds.iter().enumerate() {
        let a = wolf_alpha(fem, qd)?;
        let aq = fem.interpolate(&a);
        let margin = aq.iter().zip(nu_sq(fem, qd)).map(|(a, n)| a - n / 3.0).fold(f64::INFINITY, f64::min);
        let b = fem.load(&g, &nu_sq(fem, qd).iter().map(|x| 2.0 * x).collect::<Vec<_>>());
        let res = relative_residual(&op, &a, &b);
        let min_alpha = a.iter().copied().fold(f64::INFINITY, f64::min);
        let spec = lab
            .spec(&format!("alpha_bound_seed{k}"), "Wolf correction lower bound")
            .value("min_margin", margin)
            .value("min_alpha", min_alpha)
            .value("round_trip_residual", res)
            .tolerance(1e-8);
        lab.push(spec, margin >= -1e-8 && min_alpha > 0.0 && res <= 1e-9);
    }
    let zero = QuadDiff::from_coefficients(seed_of(&lab.cfg.seeds[0]), 1, 1.0, vec![C64::new(0.0, 0.0)]);
    let a0 = wolf_alpha(fem, &zero)?;
    let sup = a0.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let spec = lab.spec("alpha_zero_differential", "Wolf correction lower bound").value("alpha_sup", sup);
    lab.push(spec, sup == 0.0);
    Ok(())
}

fn wolf(lab: &mut Lab, fem: &Fem, qd: &QuadDiff) -> teichlab::Result<()> {
    let alpha = wolf_alpha(fem, qd)?;
    let base = MetricField::base(&fem.quad);
    let m0 = wolf_metric(fem, qd, &alpha, 0.0)?;
    let at_zero = m0.efg.iter().zip(&base.efg).map(|(a, b)| (0..3).map(|k| (a[k] - b[k]).abs()).fold(0.0, f64::max)).fold(0.0, f64::max);
    let t = 0.3 * teichlab::metric::wolf_threshold(qd.sup_nu());
    let (mp, mm) = (wolf_metric(fem, qd, &alpha, t)?, wolf_metric(fem, qd, &alpha, -t)?);
    let mut parity = 0.0f64;
    for (a, b) in mp.efg.iter().zip(&mm.efg) {
        // trace part even, trace-free part odd
        parity = parity.max(((a[0] + a[2]) - (b[0] + b[2])).abs()).max(((a[0] - a[2]) + (b[0] - b[2])).abs()).max((a[1] + b[1]).abs());
    }
    let h = 1e-4;
    let (fp, fm) = (wolf_metric(fem, qd, &alpha, h)?, wolf_metric(fem, qd, &alpha, -h)?);
    let mut deriv = 0.0f64;
    for ((q, a), b) in fem.quad.points.iter().zip(&fp.efg).zip(&fm.efg) {
        let qv = qd.value(q.pos);
        let expect = [2.0 * qv.re, -2.0 * qv.im, -2.0 * qv.re];
        for k in 0..3 {
            deriv = deriv.max(((a[k] - b[k]) / (2.0 * h) - expect[k]).abs() / (1.0 + qv.norm()));
        }
    }
    let too_large = matches!(wolf_metric(fem, qd, &alpha, 1.01 * teichlab::metric::wolf_threshold(qd.sup_nu())), Err(LabError::DeformationTooLarge { .. }));
    let spec = lab
        .spec("wolf_metric", "second-order Weil-Petersson expansion")
        .value("t0_difference", at_zero)
        .value("parity_defect", parity)
        .value("derivative_error", deriv)
        .tolerance(1e-8);
    lab.push(spec, at_zero == 0.0 && parity <= 1e-8 && deriv <= 1e-8 && too_large);
    Ok(())
}
