//! Property tests of the geometric and numerical invariants the solvers rely on.

use proptest::prelude::*;
use teichlab::fem::{Fem, MetricField};
use teichlab::fuchsian::{FuchsianGroup, Moebius, QuadraticDifferential, Seed};
use teichlab::harmonic::circle::hyperbolic_distance;
use teichlab::harmonic::trace::{grid_parameters, EnergyTrace, GridKind, TracePoint};
use teichlab::jet::{brioschi, Jet2};
use teichlab::mesh::Mesh;
use teichlab::wp::{curve_system_energy, grid_minimize};
use teichlab::C64;

fn disc_point() -> impl Strategy<Value = C64> {
    (0.0..0.9f64, 0.0..std::f64::consts::TAU).prop_map(|(r, t)| C64::from_polar(r, t))
}

fn isometry() -> impl Strategy<Value = Moebius<f64>> {
    (0.0..2.0f64, 0.0..std::f64::consts::TAU, 0.0..std::f64::consts::TAU)
        .prop_map(|(d, th, rot)| Moebius::translation(d, th).compose(&Moebius::rotation(rot)))
}

fn word() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0usize..8, 1..4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn isometries_preserve_distance(m in isometry(), a in disc_point(), b in disc_point()) {
        let d0 = hyperbolic_distance(a, b);
        let d1 = hyperbolic_distance(m.apply(a), m.apply(b));
        prop_assert!((d0 - d1).abs() <= 1e-9 * (1.0 + d0));
    }

    #[test]
    fn inverse_undoes_the_map(m in isometry(), v in disc_point()) {
        prop_assert!((m.inverse().apply(m.apply(v)) - v).norm() <= 1e-11);
        prop_assert!(m.compose(&m.inverse()).distance(&Moebius::identity()) <= 1e-11);
    }

    #[test]
    fn translation_length_is_a_class_function(w in word(), c in word()) {
        let g = FuchsianGroup::<f64>::octagon();
        let x = g.word(&w);
        let h = g.word(&c);
        // the trace is a small real part of large entries, so rounding scales with |a|² + |b|²
        // of the conjugate; lengths would add acosh's conditioning near the parabolic boundary
        let conj = h.compose(&x).compose(&h.inverse());
        let size = conj.a.norm_sqr() + conj.b.norm_sqr();
        prop_assert!((conj.trace().abs() - x.trace().abs()).abs() <= 1e-12 * size);
    }

    #[test]
    fn distance_satisfies_the_triangle_inequality(a in disc_point(), b in disc_point(), c in disc_point()) {
        let (ab, bc, ac) = (hyperbolic_distance(a, b), hyperbolic_distance(b, c), hyperbolic_distance(a, c));
        prop_assert!(ac <= ab + bc + 1e-12);
        prop_assert!((ab - hyperbolic_distance(b, a)).abs() <= 1e-12);
    }

    #[test]
    fn reduction_lands_in_the_octagon(v in (0.0..0.97f64, 0.0..std::f64::consts::TAU).prop_map(|(r, t)| C64::from_polar(r, t))) {
        let g = FuchsianGroup::<f64>::octagon();
        let (w, m) = g.reduce(v).unwrap();
        prop_assert!(FuchsianGroup::<f64>::contains(w, 1e-9));
        prop_assert!((m.apply(v) - w).norm() <= 1e-9);
    }

    #[test]
    fn scaled_differential_is_linear(re in -2.0..2.0f64, im in -2.0..2.0f64, v in disc_point()) {
        let q = QuadraticDifferential::from_coefficients(Seed::real(1.0, 0.0, 0.0), 1, 1.0, vec![C64::new(0.3, 0.1), C64::new(0.0, 0.0), C64::new(-0.2, 0.05)]);
        let c = C64::new(re, im);
        let s = q.scaled(c);
        prop_assert!((s.value(v) - c * q.value(v)).norm() <= 1e-13 * (1.0 + q.value(v).norm()));
        prop_assert!((s.nu_abs(v) - c.norm() * q.nu_abs(v)).abs() <= 1e-13);
    }

    #[test]
    fn jet_product_rule(a in -2.0..2.0f64, b in -2.0..2.0f64, x in -0.5..0.5f64, y in -0.5..0.5f64) {
        // f = (a + x)(b + y) has f_xy = 1 and vanishing pure second derivatives
        let f = (Jet2::var_x(x) + Jet2::constant(a)) * (Jet2::var_y(y) + Jet2::constant(b));
        prop_assert!((f.v - (a + x) * (b + y)).abs() <= 1e-14);
        prop_assert!((f.xy - 1.0).abs() <= 1e-14 && f.xx.abs() <= 1e-14 && f.yy.abs() <= 1e-14);
        let g = f.exp().ln();
        prop_assert!((g.x - f.x).abs() <= 1e-12 && (g.xy - f.xy).abs() <= 1e-12);
    }

    #[test]
    fn conformal_metrics_have_brioschi_curvature(x in -0.6..0.6f64, y in -0.6..0.6f64) {
        // φ = 4/(1 − |v|²)² has curvature −1
        let r2 = Jet2::var_x(x) * Jet2::var_x(x) + Jet2::var_y(y) * Jet2::var_y(y);
        let s = Jet2::constant(1.0) - r2;
        let phi = Jet2::constant(4.0) / (s * s);
        let k = brioschi(&phi, &Jet2::constant(0.0), &phi);
        prop_assert!((k + 1.0).abs() <= 1e-10);
    }

    #[test]
    fn quadratic_traces_have_exact_stencils(c in prop::array::uniform6(-3.0..3.0f64), h in 0.001..0.05f64) {
        // E = c0 + c1 x + c2 y + c3 x² + c4 xy + c5 y²: ∂E/∂z = (c1 − i c2)/2, ∂∂̄E = (c3 + c5)/2
        let e = |z: C64| 20.0 + c[0] + c[1] * z.re + c[2] * z.im + c[3] * z.re * z.re + c[4] * z.re * z.im + c[5] * z.im * z.im;
        let pts = grid_parameters(GridKind::Z, h, 3)
            .unwrap()
            .into_iter()
            .map(|z| TracePoint { p1: z.re, p2: z.im, energy: e(z), ell: None, residual: 0.0, iterations: 0 })
            .collect();
        let t = EnergyTrace::from_points(GridKind::Z, h, 3, pts).unwrap();
        let dz = t.dz(EnergyTrace::energy);
        prop_assert!((dz - C64::new(c[1], -c[2]) * 0.5).norm() <= 1e-9);
        prop_assert!((t.ddbar(EnergyTrace::energy) - 0.5 * (c[3] + c[5])).abs() <= 1e-7);
    }

    #[test]
    fn grid_minimum_brackets_the_vertex(v in -0.3..0.3f64, a in 0.5..5.0f64) {
        let ts: Vec<f64> = (-8..=8).map(|k| k as f64 * 0.05).collect();
        let vals: Vec<f64> = ts.iter().map(|t| a * (t - v).powi(2) + 1.0).collect();
        let m = grid_minimize(&ts, &vals, 1e-9);
        prop_assert!((m.argmin - v).abs() <= 0.025 + 1e-12);
        prop_assert!(m.convex && (m.min_second_difference - 2.0 * a).abs() <= 1e-6 * a);
    }

    #[test]
    fn curve_system_energy_at_base_is_total_length(ls in prop::collection::vec(0.5..5.0f64, 1..6)) {
        let e = curve_system_energy(&ls, &ls);
        prop_assert!((e - ls.iter().sum::<f64>()).abs() <= 1e-12 * e);
    }
}

#[test]
fn meshes_are_closed_genus_two_surfaces() {
    for r in 0..=3 {
        let m = Mesh::octagon(r).unwrap();
        assert_eq!(m.triangles.len(), 8 << (2 * r));
        assert_eq!(m.euler_characteristic(), -2);
        assert!(m.gluing_defect() <= 1e-9);
        assert!((0..m.triangles.len()).all(|t| m.orientation(t) > 0.0));
    }
}

#[test]
fn glue_transitions_carry_edges_onto_partners() {
    for r in 0..=3 {
        let m = Mesh::octagon(r).unwrap();
        let file = m.to_file();
        assert_eq!(file.gluing.len(), 4 << r);
        for g in &file.gluing {
            let t = Moebius::new(C64::new(g.transition[0][0], g.transition[0][1]), C64::new(g.transition[1][0], g.transition[1][1]));
            for i in 0..2 {
                let img = t.apply(m.vertices[g.edge[i]]);
                assert!((img - m.vertices[g.partner[i]]).norm() <= 1e-9, "r={r} edge {:?} partner {:?}", g.edge, g.partner);
            }
            // the partner edge is itself an edge of the triangulation
            assert!(m.triangles.iter().any(|t| t.contains(&g.partner[0]) && t.contains(&g.partner[1])));
        }
    }
}

#[test]
fn mass_matrix_integrates_constants_to_the_area() {
    let m = Mesh::octagon(3).unwrap();
    let fem = Fem::new(&m);
    let g = MetricField::base(&fem.quad);
    let mass = fem.mass(&g).unwrap();
    let ones = vec![1.0; fem.n()];
    let total: f64 = mass.mul_vec(&ones).iter().sum();
    assert!((total - fem.area(&g)).abs() <= 1e-10 * total);
    let s = fem.stiffness(&g).unwrap();
    assert!(s.mul_vec(&ones).iter().all(|x| x.abs() <= 1e-10));
}
