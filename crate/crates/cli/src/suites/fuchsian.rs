//! Octagon group geometry and the Poincaré-series differentials.

use super::{seed_of, Lab};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use teichlab::fuchsian::series::{automorphy_profile, octagon_samples, DEFAULT_CAP};
use teichlab::fuchsian::{automorphy_defect, Moebius, PoincareSeries, Seed, RELATOR, SIDES};
use teichlab::harmonic::circle::hyperbolic_distance;
use teichlab::variation::surface::dbar_circle;
use teichlab::{LabError, OctagonGroup, QuadDiff, C64};

const EXACT: f64 = 1e-10;
const DEFECT_LIMIT: f64 = 1e-2;
const PROFILE_DEPTH: usize = 8;
/// Allowed relative increase between consecutive depths of the defect profile.
const PROFILE_NOISE: f64 = 0.10;

pub fn run(lab: &mut Lab) {
    lab.section("relation", "surface-group relation", relation);
    lab.section("side_pairing", "side pairings of the regular octagon", side_pairing);
    lab.section("octagon", "regular octagon with vertex angle pi/4", octagon);
    lab.section("enumeration", "word enumeration", enumeration);
    lab.section("translation_length", "translation length from the trace", translation_length);
    lab.section("arithmetic", "group composition and inverses", arithmetic);
    lab.section("axis", "axes of hyperbolic elements", axis);
    lab.section("differentials", "Poincare series of weight four", differentials);
    lab.section("profile", "automorphy defect against truncation depth", profile);
}

fn random_word(rng: &mut ChaCha8Rng, max: usize) -> Vec<usize> {
    let n = rng.gen_range(1..=max);
    (0..n).map(|_| rng.gen_range(0..SIDES)).collect()
}

fn relation(lab: &mut Lab) -> teichlab::Result<()> {
    let d = lab.group.word(&RELATOR).distance(&Moebius::identity());
    let spec = lab.spec("relation_word", "surface-group relation").value("distance_to_identity", d).tolerance(EXACT);
    lab.push(spec, d <= EXACT);
    Ok(())
}

fn side_pairing(lab: &mut Lab) -> teichlab::Result<()> {
    type G = OctagonGroup;
    let mut worst = 0.0f64;
    let mut paired = 0;
    for g in &lab.group.generators {
        // the generator carries exactly one side onto another, endpoints and midpoint included
        let mut best = f64::INFINITY;
        for j in 0..SIDES {
            let (a, b) = (G::vertex(j), G::vertex((j + 1) % SIDES));
            let (ga, gb) = (g.apply(a), g.apply(b));
            let mid = teichlab::mesh::hyperbolic_midpoint(a, b);
            for k in 0..SIDES {
                let (c, d) = (G::vertex(k), G::vertex((k + 1) % SIDES));
                let e = ((ga - c).norm() + (gb - d).norm()).min((ga - d).norm() + (gb - c).norm())
                    + (g.apply(mid) - teichlab::mesh::hyperbolic_midpoint(c, d)).norm();
                best = best.min(e);
            }
        }
        if best <= EXACT {
            paired += 1;
        }
        worst = worst.max(best);
    }
    let spec = lab
        .spec("side_pairing", "side pairings of the regular octagon")
        .value("max_endpoint_error", worst)
        .value("paired_generators", paired as f64)
        .tolerance(EXACT);
    lab.push(spec, paired == SIDES && worst <= EXACT);
    Ok(())
}

fn octagon(lab: &mut Lab) -> teichlab::Result<()> {
    type G = OctagonGroup;
    let o = C64::new(0.0, 0.0);
    let cot = 1.0 / (PI / 8.0).tan();
    let mut r_err = 0.0f64;
    let mut rho_err = 0.0f64;
    let mut angle_err = 0.0f64;
    let mut angle_sum = 0.0;
    for j in 0..SIDES {
        let v = G::vertex(j);
        r_err = r_err.max((hyperbolic_distance(o, v).cosh() - cot * cot).abs());
        let (a, b) = (v, G::vertex((j + 1) % SIDES));
        let mid = teichlab::mesh::hyperbolic_midpoint(a, b);
        rho_err = rho_err.max((hyperbolic_distance(o, mid).cosh() - cot).abs());
        // tangents of sides j-1 and j at vertex j, each pointing along its side
        let tangent = |side: usize, other: C64| {
            let (c, _) = G::side_circle(side);
            let t = C64::i() * (v - c);
            if (t.conj() * (other - v)).re < 0.0 {
                -t
            } else {
                t
            }
        };
        let t1 = tangent(j, G::vertex((j + 1) % SIDES));
        let t0 = tangent((j + SIDES - 1) % SIDES, G::vertex((j + SIDES - 1) % SIDES));
        let angle = (t1 / t0).arg().abs();
        angle_err = angle_err.max((angle - PI / 4.0).abs());
        angle_sum += angle;
    }
    let spec = lab
        .spec("octagon_radii", "regular octagon with vertex angle pi/4")
        .value("cosh_circumradius_error", r_err)
        .value("cosh_inradius_error", rho_err)
        .value("cosh_circumradius", G::circumradius().cosh())
        .value("cot_pi_8_squared", cot * cot)
        .tolerance(EXACT);
    lab.push(spec, r_err <= EXACT && rho_err <= EXACT);
    let spec = lab
        .spec("octagon_angles", "regular octagon with vertex angle pi/4")
        .value("max_angle_error", angle_err)
        .value("angle_sum", angle_sum)
        .value("angle_sum_error", (angle_sum - 2.0 * PI).abs())
        .tolerance(EXACT);
    lab.push(spec, angle_err <= EXACT && (angle_sum - 2.0 * PI).abs() <= 8.0 * EXACT);
    Ok(())
}

fn enumeration(lab: &mut Lab) -> teichlab::Result<()> {
    let g = &lab.group;
    let counts: Vec<usize> = (0..=2).map(|l| g.enumerate(l, 1000).map(|e| e.len())).collect::<teichlab::Result<_>>()?;
    // brute force over all products of at most two letters, deduplicated by matrix distance
    let mut distinct: Vec<Moebius<f64>> = vec![Moebius::identity()];
    let letters: Vec<Vec<usize>> = (0..SIDES).map(|k| vec![k]).chain((0..SIDES * SIDES).map(|k| vec![k / SIDES, k % SIDES])).collect();
    for w in &letters {
        let m = g.word(w);
        if !distinct.iter().any(|d| d.distance(&m) < 1e-9) {
            distinct.push(m);
        }
    }
    let enumerated = g.enumerate(2, 1000)?;
    let all_found = enumerated.iter().all(|e| distinct.iter().any(|d| d.distance(&e.map) < 1e-9));
    let cap_error = matches!(g.enumerate(3, 100), Err(LabError::MemoryCap { cap: 100 }));
    let spec = lab
        .spec("enumeration_counts", "word enumeration")
        .value("depth0", counts[0] as f64)
        .value("depth1", counts[1] as f64)
        .value("depth2", counts[2] as f64)
        .value("brute_force_depth2", distinct.len() as f64);
    lab.push(spec, counts == [1, 9, 65] && distinct.len() == 65 && all_found && cap_error);
    Ok(())
}

fn translation_length(lab: &mut Lab) -> teichlab::Result<()> {
    let t: Moebius<f64> = Moebius::translation(2.0, 0.3);
    let err = (t.translation_length()? - 2.0).abs() + (t.trace() - 2.0 * 1f64.cosh()).abs();
    let parabolic = Moebius::new(C64::new(1.0, 1.0), C64::new(0.0, 1.0));
    let rejects = matches!(parabolic.translation_length(), Err(LabError::NotHyperbolic { .. }))
        && matches!(Moebius::<f64>::rotation(0.4).translation_length(), Err(LabError::NotHyperbolic { .. }));
    let spec = lab
        .spec("translation_length_cases", "translation length from the trace")
        .value("trace_two_cosh_one_error", err)
        .value("parabolic_trace", parabolic.trace())
        .tolerance(1e-12);
    lab.push(spec, err <= 1e-12 && rejects);

    // generators translate by twice the inradius
    let expect = 2.0 * OctagonGroup::inradius();
    let gen_err = lab.group.generators.iter().map(|g| g.translation_length().map(|l| (l - expect).abs())).try_fold(0.0f64, |m, e| e.map(|e| m.max(e)))?;
    let mut rng = ChaCha8Rng::seed_from_u64(lab.cfg.random_seed);
    let mut conj = 0.0f64;
    for _ in 0..50 {
        let g = lab.group.word(&random_word(&mut rng, 4));
        // the conjugate's entries carry rounding of order ε·(|a|² + |b|²)² of the conjugator
        let cond = (g.a.norm_sqr() + g.b.norm_sqr()).powi(2);
        for m in &lab.group.generators {
            let c = g.compose(m).compose(&g.inverse());
            conj = conj.max((c.translation_length()? - m.translation_length()?).abs() / cond);
        }
    }
    let spec = lab
        .spec("translation_length_invariance", "translation length from the trace")
        .value("generator_error", gen_err)
        .value("conjugation_error_over_conditioning", conj)
        .tolerance(EXACT);
    lab.push(spec, gen_err <= EXACT && conj <= EXACT);
    Ok(())
}

fn arithmetic(lab: &mut Lab) -> teichlab::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(lab.cfg.random_seed ^ 0x5eed);
    let mut comp = 0.0f64;
    let mut inv = 0.0f64;
    for _ in 0..100 {
        let a = lab.group.word(&random_word(&mut rng, 4));
        let b = lab.group.word(&random_word(&mut rng, 4));
        let v = C64::from_polar(rng.gen_range(0.0..0.9), rng.gen_range(0.0..2.0 * PI));
        comp = comp.max((a.compose(&b).apply(v) - a.apply(b.apply(v))).norm());
        inv = inv.max((a.inverse().apply(a.apply(v)) - v).norm());
    }
    let spec = lab
        .spec("group_arithmetic", "group composition and inverses")
        .value("composition_error", comp)
        .value("inverse_error", inv)
        .tolerance(EXACT);
    lab.push(spec, comp <= EXACT && inv <= EXACT);
    Ok(())
}

fn axis(lab: &mut Lab) -> teichlab::Result<()> {
    let mut on_circle = 0.0f64;
    let mut fixed = 0.0f64;
    let mut shift = 0.0f64;
    let mut swap = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(lab.cfg.random_seed ^ 0xa415);
    let mut maps: Vec<Moebius<f64>> = lab.group.generators.to_vec();
    maps.extend((0..8).map(|_| lab.group.word(&random_word(&mut rng, 3))).filter(|m| m.translation_length().is_ok()));
    for m in &maps {
        let ax = m.axis()?;
        let (p, q) = (ax.repelling, ax.attracting);
        on_circle = on_circle.max((p.norm() - 1.0).abs()).max((q.norm() - 1.0).abs());
        fixed = fixed.max((m.apply(p) - p).norm()).max((m.apply(q) - q).norm());
        for s in [-0.5, 0.0, 0.7] {
            shift = shift.max((m.apply(ax.point(s)) - ax.point(s + ax.length)).norm());
        }
        let back = m.inverse().axis()?;
        swap = swap.max((back.repelling - q).norm()).max((back.attracting - p).norm());
    }
    let diameter = Moebius::translation(1.2, 0.0).axis()?;
    let diam_err = (diameter.repelling + 1.0).norm() + (diameter.attracting - 1.0).norm() + diameter.centre.norm();
    let spec = lab
        .spec("axis", "axes of hyperbolic elements")
        .value("fixed_points_off_circle", on_circle)
        .value("fixed_point_error", fixed)
        .value("translation_along_axis_error", shift)
        .value("inverse_swap_error", swap)
        .value("diameter_axis_error", diam_err)
        .value("elements", maps.len() as f64)
        .tolerance(1e-9);
    lab.push(spec, on_circle.max(fixed).max(shift).max(swap).max(diam_err) <= 1e-9);
    Ok(())
}

fn differentials(lab: &mut Lab) -> teichlab::Result<()> {
    let depth = lab.cfg.depth as usize;
    let samples = octagon_samples(32, lab.cfg.random_seed);
    for (k, s) in lab.cfg.seeds.iter().enumerate() {
        let seed = seed_of(s);
        let series = PoincareSeries::new(&lab.group, seed, depth, DEFAULT_CAP)?;
        let qd = QuadDiff::from_series(&series, lab.cfg.normalize)?;
        let defect = automorphy_defect(&series, &samples, qd.scale);
        let spec = lab
            .spec(&format!("automorphy_seed{k}"), "Poincare series of weight four")
            .value("defect", defect)
            .value("depth", depth as f64)
            .value("elements", series.len() as f64)
            .tolerance(DEFECT_LIMIT);
        lab.push(spec, defect <= DEFECT_LIMIT);

        // holomorphy of the compressed form and its derivative against differences
        let mut cr = 0.0f64;
        let mut dq = 0.0f64;
        let h = 1e-5;
        for &v in &samples {
            let j = qd.jet(v);
            let scale = j[0].norm() + j[1].norm();
            cr = cr.max(dbar_circle(|x| qd.value(x), v, 1e-3).norm() / scale);
            let fd = (qd.value(v + h) - qd.value(v - h)) / (2.0 * h);
            dq = dq.max((fd - j[1]).norm() / (1.0 + j[1].norm()));
        }
        let spec = lab
            .spec(&format!("holomorphy_seed{k}"), "Poincare series of weight four")
            .value("cauchy_riemann_residual", cr)
            .value("derivative_error", dq)
            .value("sup_nu", qd.sup_nu())
            .tolerance(1e-6);
        lab.push(spec, cr <= 1e-6 && dq <= 1e-6);
    }
    let zero = QuadDiff::poincare(Seed::real(0.0, 0.0, 0.0), 2, true);
    let odd = QuadDiff::poincare(Seed::real(0.0, 1.0, 0.0), 2, true);
    let spec = lab.spec("degenerate_seeds", "Poincare series of weight four");
    lab.push(spec, matches!(zero, Err(LabError::ZeroDifferential(_))) && matches!(odd, Err(LabError::ZeroDifferential(_))));
    Ok(())
}

fn profile(lab: &mut Lab) -> teichlab::Result<()> {
    let seed = seed_of(&lab.cfg.seeds[0]);
    let series = PoincareSeries::layered(&lab.group, seed, PROFILE_DEPTH, DEFAULT_CAP)?;
    let scale = QuadDiff::poincare(seed, lab.cfg.depth as usize, true)?.scale;
    let defects = automorphy_profile(&series, &octagon_samples(12, lab.cfg.random_seed), scale);
    let mut spec = lab.spec("defect_profile", "automorphy defect against truncation depth").tolerance(PROFILE_NOISE);
    let mut monotone = true;
    for l in 2..=PROFILE_DEPTH {
        spec = spec.value(&format!("depth{l}"), defects[l]);
        if l > 2 && defects[l] > (1.0 + PROFILE_NOISE) * defects[l - 1] {
            monotone = false;
        }
    }
    lab.push(spec, monotone && defects[6] <= DEFECT_LIMIT);
    Ok(())
}
