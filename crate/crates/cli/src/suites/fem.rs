//! Mesh topology, assembly identities and the shifted solves.

use super::Lab;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use teichlab::fem::{solve_spd, Fem, MetricField};
use teichlab::mesh::Mesh;
use teichlab::sparse::{dot, relative_residual, Csr, Ldlt};
use teichlab::{LabError, C64};

const AREA_TOL: f64 = 0.01;
const AREA_RATIO: f64 = 0.35;
const MIN_ANGLE: f64 = 15.0;
const EIGEN_STABILITY: f64 = 0.05;

pub fn run(lab: &mut Lab, fem: &Fem) {
    lab.section("topology", "genus-two fundamental octagon", |lab| topology(lab, fem));
    lab.section("area", "Gauss-Bonnet area", area);
    lab.section("assembly", "conformally invariant Dirichlet form", |lab| assembly(lab, fem));
    lab.section("solves", "shifted Laplacian solves", |lab| solves(lab, fem));
    lab.section("gluing", "continuity across glued sides", |lab| gluing(lab, fem));
    lab.section("spectrum", "first Laplace eigenvalue", eigenvalue);
}

fn topology(lab: &mut Lab, fem: &Fem) -> teichlab::Result<()> {
    let r = lab.cfg.refine as usize;
    let coarse = Mesh::octagon(0)?;
    let mesh = fem.mesh;
    let oriented = (0..mesh.triangles.len()).all(|t| mesh.orientation(t) > 0.0);
    let file = mesh.to_file();
    let mut transition = 0.0f64;
    for g in &file.gluing {
        let m = teichlab::fuchsian::Moebius::new(
            C64::new(g.transition[0][0], g.transition[0][1]),
            C64::new(g.transition[1][0], g.transition[1][1]),
        );
        let p = |v: usize| C64::new(file.vertices[v][0], file.vertices[v][1]);
        let (a, b) = (m.apply(p(g.edge[0])), m.apply(p(g.edge[1])));
        let (c, d) = (p(g.partner[0]), p(g.partner[1]));
        transition = transition.max(((a - c).norm().max((b - d).norm())).min((a - d).norm().max((b - c).norm())));
    }
    let spec = lab
        .spec("mesh_invariants", "genus-two fundamental octagon")
        .value("refine", r as f64)
        .value("triangles", mesh.triangles.len() as f64)
        .value("euler_characteristic", mesh.euler_characteristic() as f64)
        .value("coarse_triangles", coarse.triangles.len() as f64)
        .value("coarse_euler_characteristic", coarse.euler_characteristic() as f64)
        .value("min_angle_deg", mesh.min_angle_deg())
        .value("gluing_defect", mesh.gluing_defect())
        .value("transition_defect", transition)
        .value("glue_pairs", file.gluing.len() as f64)
        .tolerance(1e-9);
    let ok = mesh.triangles.len() == 8 << (2 * r)
        && mesh.euler_characteristic() == -2
        && coarse.triangles.len() == 8
        && coarse.euler_characteristic() == -2
        && mesh.min_angle_deg() >= MIN_ANGLE
        && mesh.gluing_defect() <= 1e-9
        && transition <= 1e-9
        && 2 * file.gluing.len() == mesh.boundary.len()
        && oriented;
    lab.push(spec, ok);
    let deep = matches!(Mesh::octagon(9), Err(LabError::RefinementTooDeep { .. }));
    let spec = lab.spec("refinement_cap", "genus-two fundamental octagon");
    lab.push(spec, deep);
    Ok(())
}

fn area(lab: &mut Lab) -> teichlab::Result<()> {
    let top = lab.cfg.refine as usize;
    let levels: Vec<usize> = (top.saturating_sub(3).max(1)..=top).collect();
    let mut errs = Vec::new();
    for &r in &levels {
        let mesh = Mesh::octagon(r)?;
        let fem = Fem::new(&mesh);
        errs.push((fem.area(&MetricField::base(&fem.quad)) - 4.0 * PI).abs());
    }
    let mut spec = lab.spec("gauss_bonnet_area", "Gauss-Bonnet area").tolerance(AREA_TOL);
    let mut ratios_ok = true;
    for (k, (&r, e)) in levels.iter().zip(&errs).enumerate() {
        spec = spec.value(&format!("error_r{r}"), *e);
        if k > 0 {
            let ratio = e / errs[k - 1];
            spec = spec.value(&format!("ratio_r{r}"), ratio);
            ratios_ok &= ratio <= AREA_RATIO;
        }
    }
    let rel = errs.last().copied().unwrap_or(f64::NAN) / (4.0 * PI);
    spec = spec.value("relative_error", rel).value("max_ratio", AREA_RATIO);
    lab.push(spec, rel <= AREA_TOL && ratios_ok);
    Ok(())
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn max_entry_diff(a: &Csr, b: &Csr) -> f64 {
    let n = a.n;
    let mut worst = 0.0f64;
    for i in 0..n {
        for (j, v) in a.row(i) {
            worst = worst.max((v - b.get(i, j)).abs());
        }
        for (j, v) in b.row(i) {
            worst = worst.max((v - a.get(i, j)).abs());
        }
    }
    worst
}

fn assembly(lab: &mut Lab, fem: &Fem) -> teichlab::Result<()> {
    let base = MetricField::base(&fem.quad);
    let euclid = MetricField::euclidean(&fem.quad);
    let s = fem.stiffness(&base)?;
    let se = fem.stiffness(&euclid)?;
    let scale = max_abs(&s.data);
    let kernel = max_abs(&s.mul_vec(&vec![1.0; fem.n()])) / scale;
    let conformal = max_entry_diff(&s, &se) / scale;
    let m = fem.mass(&base)?;
    let ones = vec![1.0; fem.n()];
    let mass_area = dot(&ones, &m.mul_vec(&ones));
    let spec = lab
        .spec("stiffness_identities", "conformally invariant Dirichlet form")
        .value("constant_kernel", kernel)
        .value("base_vs_euclidean", conformal)
        .value("symmetry", s.asymmetry())
        .value("mass_row_sum_area_error", (mass_area - fem.area(&base)).abs() / mass_area)
        .tolerance(1e-12);
    lab.push(spec, kernel <= 1e-12 && conformal <= 1e-12 && s.asymmetry() <= 1e-12 && (mass_area - fem.area(&base)).abs() <= 1e-12 * mass_area);

    // one triangle with the Euclidean metric: quadrature weights sum to its area
    let mut worst = 0.0f64;
    for t in 0..fem.mesh.triangles.len() {
        let w: f64 = fem.quad.points.iter().filter(|q| q.tri == t).map(|q| q.weight).sum();
        let a = 0.5 * fem.mesh.orientation(t);
        worst = worst.max((w - a).abs() / a);
    }
    let degenerate = MetricField::from_fn(&fem.quad, |_| [1.0, 0.0, 0.0]);
    let rejects = matches!(fem.mass(&degenerate), Err(LabError::DegenerateMetric { .. }));
    let spec = lab.spec("euclidean_triangle_mass", "conformally invariant Dirichlet form").value("relative_error", worst).tolerance(1e-12);
    lab.push(spec, worst <= 1e-12 && rejects);

    let mut rng = ChaCha8Rng::seed_from_u64(lab.cfg.random_seed);
    let f: Vec<f64> = (0..fem.quad.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let f2: Vec<f64> = f.iter().map(|x| 2.0 * x).collect();
    let one = fem.integrate(&base, &vec![1.0; fem.quad.len()]);
    let zero = fem.integrate(&base, &vec![0.0; fem.quad.len()]);
    let lin = fem.integrate(&base, &f2) - 2.0 * fem.integrate(&base, &f);
    let spec = lab
        .spec("integration", "Gauss-Bonnet area")
        .value("integral_of_one", one)
        .value("integral_of_zero", zero)
        .value("linearity_defect", lin)
        .tolerance(AREA_TOL);
    lab.push(spec, (one / (4.0 * PI) - 1.0).abs() <= AREA_TOL && zero == 0.0 && lin == 0.0);
    Ok(())
}

fn solves(lab: &mut Lab, fem: &Fem) -> teichlab::Result<()> {
    let g = MetricField::base(&fem.quad);
    let s = fem.stiffness(&g)?;
    let m = fem.mass(&g)?;
    // (□ + 1)u = 1 with □ = ½Δ, i.e. (S + 2M)u = 2M·1
    let b: Vec<f64> = m.mul_vec(&vec![1.0; fem.n()]).iter().map(|x| 2.0 * x).collect();
    let u = solve_spd(&s, &m, 2.0, &b)?;
    let const_err = u.iter().fold(0.0f64, |w, x| w.max((x - 1.0).abs()));
    let mut rng = ChaCha8Rng::seed_from_u64(lab.cfg.random_seed ^ 1);
    let r: Vec<f64> = (0..fem.n()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let op = s.add_scaled(2.0, &m);
    let x = solve_spd(&s, &m, 2.0, &r)?;
    let res = relative_residual(&op, &x, &r);
    let back = op.mul_vec(&x);
    let round = back.iter().zip(&r).fold(0.0f64, |w, (a, b)| w.max((a - b).abs())) / max_abs(&r);
    let spec = lab
        .spec("shifted_solves", "shifted Laplacian solves")
        .value("box_plus_one_constant_error", const_err)
        .value("delta_plus_two_residual", res)
        .value("round_trip_error", round)
        .tolerance(1e-10);
    lab.push(spec, const_err <= 1e-10 && res <= 1e-10 && round <= 1e-9);
    Ok(())
}

fn gluing(lab: &mut Lab, fem: &Fem) -> teichlab::Result<()> {
    let mesh = fem.mesh;
    let g = MetricField::base(&fem.quad);
    // zero-mean load concentrated near side 0
    let centre = teichlab::mesh::hyperbolic_midpoint(teichlab::OctagonGroup::vertex(0), teichlab::OctagonGroup::vertex(1));
    let bump: Vec<f64> = fem.quad.points.iter().map(|q| (-(q.pos - centre).norm_sqr() / 0.01).exp()).collect();
    let mean = fem.integrate(&g, &bump) / fem.area(&g);
    let f: Vec<f64> = bump.iter().map(|b| b - mean).collect();
    // Δu = f on a closed surface: solve with a tiny shift and remove the mean drift
    let s = fem.stiffness(&g)?;
    let m = fem.mass(&g)?;
    let u = Ldlt::factor(&s.add_scaled(1e-8, &m))?.solve(&fem.load(&g, &f));
    let find = |a: usize, b: usize| {
        mesh.triangles.iter().position(|t| t.contains(&a) && t.contains(&b)).expect("boundary edge has a triangle")
    };
    let mut jump = 0.0f64;
    for gp in &mesh.to_file().gluing {
        let [a, b] = gp.edge;
        let [c, d] = gp.partner;
        let here = fem.eval_affine(&u, find(a, b), 0.5 * (mesh.vertices[a] + mesh.vertices[b]));
        let there = fem.eval_affine(&u, find(c, d), 0.5 * (mesh.vertices[c] + mesh.vertices[d]));
        jump = jump.max((here - there).abs());
    }
    let unorm = max_abs(&u);
    let spec = lab.spec("glued_continuity", "continuity across glued sides").value("jump", jump).value("u_sup", unorm).tolerance(1e-6);
    lab.push(spec, jump <= 1e-6 * unorm);
    Ok(())
}

/// Smallest nonzero eigenvalue of `S x = λ M x` by inverse iteration on `(S + M)⁻¹ M`
/// with the constants projected out.
fn first_eigenvalue(fem: &Fem, seed: u64) -> teichlab::Result<f64> {
    let g = MetricField::base(&fem.quad);
    let s = fem.stiffness(&g)?;
    let m = fem.mass(&g)?;
    let fact = Ldlt::factor(&s.add_scaled(1.0, &m))?;
    let ones = vec![1.0; fem.n()];
    let m1 = m.mul_vec(&ones);
    let total = dot(&ones, &m1);
    let project = |x: &mut Vec<f64>| {
        let c = dot(x, &m1) / total;
        x.iter_mut().for_each(|v| *v -= c);
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..fem.n()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut lambda = f64::NAN;
    for _ in 0..200 {
        project(&mut x);
        let mx = m.mul_vec(&x);
        let norm = dot(&x, &mx).sqrt();
        x.iter_mut().for_each(|v| *v /= norm);
        let next = dot(&x, &s.mul_vec(&x));
        if (next - lambda).abs() <= 1e-12 * next {
            return Ok(next);
        }
        lambda = next;
        x = fact.solve(&m.mul_vec(&x));
    }
    Ok(lambda)
}

fn eigenvalue(lab: &mut Lab) -> teichlab::Result<()> {
    let r = (lab.cfg.refine as usize).max(1);
    let mut lams = Vec::new();
    for level in [r - 1, r] {
        let mesh = Mesh::octagon(level)?;
        lams.push(first_eigenvalue(&Fem::new(&mesh), lab.cfg.random_seed)?);
    }
    let change = (lams[1] - lams[0]).abs() / lams[1];
    let spec = lab
        .spec("first_eigenvalue", "first Laplace eigenvalue")
        .value("coarse", lams[0])
        .value("fine", lams[1])
        .value("relative_change", change)
        .tolerance(EIGEN_STABILITY);
    lab.push(spec, change <= EIGEN_STABILITY && lams[1] > 0.0);
    Ok(())
}
