//! Sampled energies over a centred parameter grid and the finite-difference stencils
//! read off them.
//!
//! z-grids are square with odd side `n`, stored row-major with `p2 = Im z` as the slow
//! index. t-grids are symmetric with an odd number of points and `p2 = 0`.

use crate::error::{LabError, Result};
use crate::C64;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GridKind {
    Z,
    T,
}

/// One converged solve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub p1: f64,
    pub p2: f64,
    pub energy: f64,
    pub ell: Option<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Values of the family at every grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyTrace {
    pub kind: GridKind,
    pub step: f64,
    /// Points per side.
    pub n: usize,
    pub points: Vec<TracePoint>,
}

/// Row-major parameter list for a grid, matching [`EnergyTrace::points`].
pub fn grid_parameters(kind: GridKind, step: f64, n: usize) -> Result<Vec<C64>> {
    let min = if kind == GridKind::Z { 3 } else { 5 };
    if n < min || n % 2 == 0 {
        return Err(LabError::config("grid_size", format!("must be odd and at least {min}")));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(LabError::config("grid_step", "must be positive"));
    }
    let m = (n / 2) as i64;
    let coord = |k: i64| k as f64 * step;
    Ok(match kind {
        GridKind::Z => (-m..=m).flat_map(|j| (-m..=m).map(move |i| C64::new(coord(i), coord(j)))).collect(),
        GridKind::T => (-m..=m).map(|i| C64::new(coord(i), 0.0)).collect(),
    })
}

impl EnergyTrace {
    /// Assembles a trace from per-point results in [`grid_parameters`] order.
    pub fn from_points(kind: GridKind, step: f64, n: usize, points: Vec<TracePoint>) -> Result<Self> {
        let expect = if kind == GridKind::Z { n * n } else { n };
        if points.len() != expect {
            return Err(LabError::config("grid_size", format!("expected {expect} points, got {}", points.len())));
        }
        if let Some(p) = points.iter().find(|p| !(p.energy > 0.0)) {
            return Err(LabError::config("trace", format!("non-positive energy at ({}, {})", p.p1, p.p2)));
        }
        Ok(EnergyTrace { kind, step, n, points })
    }

    fn half(&self) -> i64 {
        (self.n / 2) as i64
    }

    /// Point at integer offsets from the centre.
    pub fn at(&self, i: i64, j: i64) -> &TracePoint {
        let m = self.half();
        assert!(i.abs() <= m && j.abs() <= m, "offset outside the grid");
        match self.kind {
            GridKind::Z => &self.points[((j + m) * self.n as i64 + i + m) as usize],
            GridKind::T => {
                assert_eq!(j, 0);
                &self.points[(i + m) as usize]
            }
        }
    }

    pub fn centre(&self) -> &TracePoint {
        self.at(0, 0)
    }

    /// `∂_z g = ½(∂_x − i∂_y)` from the 4-point cross.
    pub fn dz(&self, g: impl Fn(&TracePoint) -> f64) -> C64 {
        let h = self.step;
        let dx = (g(self.at(1, 0)) - g(self.at(-1, 0))) / (2.0 * h);
        let dy = (g(self.at(0, 1)) - g(self.at(0, -1))) / (2.0 * h);
        C64::new(0.5 * dx, -0.5 * dy)
    }

    /// `∂²g/∂z∂z̄ = ¼(∂²_x + ∂²_y)` from the 5-point Laplacian.
    pub fn ddbar(&self, g: impl Fn(&TracePoint) -> f64) -> f64 {
        let h = self.step;
        let s = g(self.at(1, 0)) + g(self.at(-1, 0)) + g(self.at(0, 1)) + g(self.at(0, -1));
        0.25 * (s - 4.0 * g(self.centre())) / (h * h)
    }

    /// `∂²g/∂x∂y` from the four corners.
    pub fn mixed(&self, g: impl Fn(&TracePoint) -> f64) -> f64 {
        let h = self.step;
        (g(self.at(1, 1)) + g(self.at(-1, -1)) - g(self.at(1, -1)) - g(self.at(-1, 1))) / (4.0 * h * h)
    }

    /// Largest second difference along grid lines, scaled by `1/h²`.
    pub fn max_second_difference(&self, g: impl Fn(&TracePoint) -> f64) -> f64 {
        let m = self.half();
        let h2 = self.step * self.step;
        let mut worst: f64 = 0.0;
        let js: Vec<i64> = if self.kind == GridKind::Z { (-m..=m).collect() } else { vec![0] };
        for &j in &js {
            for i in -m + 1..m {
                worst = worst.max((g(self.at(i + 1, j)) - 2.0 * g(self.at(i, j)) + g(self.at(i - 1, j))).abs() / h2);
            }
        }
        if self.kind == GridKind::Z {
            for i in -m..=m {
                for j in -m + 1..m {
                    worst = worst.max((g(self.at(i, j + 1)) - 2.0 * g(self.at(i, j)) + g(self.at(i, j - 1))).abs() / h2);
                }
            }
        }
        worst
    }

    /// Smallest second difference along the t-line, scaled by `1/h²`.
    pub fn min_second_difference(&self, g: impl Fn(&TracePoint) -> f64) -> f64 {
        let m = self.half();
        let h2 = self.step * self.step;
        (-m + 1..m)
            .map(|i| (g(self.at(i + 1, 0)) - 2.0 * g(self.at(i, 0)) + g(self.at(i - 1, 0))) / h2)
            .fold(f64::INFINITY, f64::min)
    }

    /// `dg/dt` by the 5-point central stencil at spacing `k·step`.
    pub fn dt(&self, g: impl Fn(&TracePoint) -> f64, k: i64) -> f64 {
        let h = k as f64 * self.step;
        (-g(self.at(2 * k, 0)) + 8.0 * g(self.at(k, 0)) - 8.0 * g(self.at(-k, 0)) + g(self.at(-2 * k, 0))) / (12.0 * h)
    }

    /// `d²g/dt²` by the 5-point central stencil at spacing `k·step`.
    pub fn d2t(&self, g: impl Fn(&TracePoint) -> f64, k: i64) -> f64 {
        let h = k as f64 * self.step;
        (-g(self.at(2 * k, 0)) + 16.0 * g(self.at(k, 0)) - 30.0 * g(self.centre()) + 16.0 * g(self.at(-k, 0))
            - g(self.at(-2 * k, 0)))
            / (12.0 * h * h)
    }

    /// `d³g/dt³` from the second-order central stencil.
    pub fn d3t(&self, g: impl Fn(&TracePoint) -> f64) -> f64 {
        let h = self.step;
        (g(self.at(2, 0)) - 2.0 * g(self.at(1, 0)) + 2.0 * g(self.at(-1, 0)) - g(self.at(-2, 0))) / (2.0 * h * h * h)
    }

    /// Largest usable spacing multiple for the 5-point t stencils.
    pub fn max_t_spacing(&self) -> i64 {
        self.half() / 2
    }

    /// `d²g/dt²` at spacing `step` with the halving-noise estimate `|D(step) − D(2·step)|`
    /// (zero noise estimate when the grid only supports one spacing).
    pub fn d2t_with_noise(&self, g: impl Fn(&TracePoint) -> f64) -> (f64, f64) {
        let fine = self.d2t(&g, 1);
        let noise = if self.max_t_spacing() >= 2 { (fine - self.d2t(&g, 2)).abs() } else { 0.0 };
        (fine, noise)
    }

    pub fn energy(p: &TracePoint) -> f64 {
        p.energy
    }

    /// CSV text with header `p1,p2,E,ell,residual,iterations`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("p1,p2,E,ell,residual,iterations\n");
        for p in &self.points {
            let ell = p.ell.map(|l| format!("{l:e}")).unwrap_or_default();
            let _ = writeln!(s, "{:e},{:e},{:e},{},{:e},{}", p.p1, p.p2, p.energy, ell, p.residual, p.iterations);
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))
    }
}

/// Richardson pair: `(extrapolated, |D(h/2) − D(h)|)` for a second-order stencil.
pub fn richardson(coarse: f64, fine: f64) -> (f64, f64) {
    ((4.0 * fine - coarse) / 3.0, (fine - coarse).abs())
}

pub fn richardson_c(coarse: C64, fine: C64) -> (C64, f64) {
    ((fine * 4.0 - coarse) / 3.0, (fine - coarse).norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(kind: GridKind, step: f64, n: usize, f: impl Fn(C64) -> f64) -> EnergyTrace {
        let pts = grid_parameters(kind, step, n)
            .unwrap()
            .into_iter()
            .map(|z| TracePoint { p1: z.re, p2: z.im, energy: f(z), ell: None, residual: 0.0, iterations: 0 })
            .collect();
        EnergyTrace::from_points(kind, step, n, pts).unwrap()
    }

    #[test]
    fn z_stencils_on_a_quadratic() {
        // E = 3 + x − 2y + x² + 3y² + xy: ∂_z = ½(1 + 2i), ∂∂̄ = 2, ∂xy = 1
        let tr = sample(GridKind::Z, 0.1, 3, |z| 3.0 + z.re - 2.0 * z.im + z.re * z.re + 3.0 * z.im * z.im + z.re * z.im);
        let d = tr.dz(EnergyTrace::energy);
        assert!((d - C64::new(0.5, 1.0)).norm() < 1e-12);
        assert!((tr.ddbar(EnergyTrace::energy) - 2.0).abs() < 1e-10);
        assert!((tr.mixed(EnergyTrace::energy) - 1.0).abs() < 1e-10);
        assert_eq!(tr.at(1, -1).p1, 0.1);
        assert_eq!(tr.at(1, -1).p2, -0.1);
    }

    #[test]
    fn t_stencils_are_fourth_order() {
        let tr = sample(GridKind::T, 0.05, 9, |t| t.re.exp());
        // truncation h⁴/30 ≈ 2e-7
        assert!((tr.dt(EnergyTrace::energy, 1) - 1.0).abs() < 1e-6);
        let (d2, noise) = tr.d2t_with_noise(EnergyTrace::energy);
        assert!((d2 - 1.0).abs() < 1e-6 && noise < 1e-5);
        assert!((tr.d3t(EnergyTrace::energy) - 1.0).abs() < 1e-2);
        assert!(tr.min_second_difference(EnergyTrace::energy) > 0.0);
    }

    #[test]
    fn constant_family_has_zero_derivatives() {
        let tr = sample(GridKind::Z, 0.02, 3, |_| 4.0);
        assert_eq!(tr.dz(EnergyTrace::energy), C64::new(0.0, 0.0));
        assert_eq!(tr.ddbar(EnergyTrace::energy), 0.0);
    }

    #[test]
    fn csv_rows_follow_the_grid() {
        let tr = sample(GridKind::Z, 0.5, 3, |z| 1.0 + z.norm_sqr());
        let csv = tr.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 10);
        assert_eq!(lines[0], "p1,p2,E,ell,residual,iterations");
        assert!(lines[1].starts_with("-5e-1,-5e-1,"));
        assert_eq!(csv, tr.to_csv());
    }

    #[test]
    fn bad_grids_are_rejected() {
        assert!(grid_parameters(GridKind::Z, 0.1, 4).is_err());
        assert!(grid_parameters(GridKind::T, 0.1, 3).is_err());
        assert!(grid_parameters(GridKind::Z, -0.1, 3).is_err());
    }

    #[test]
    fn richardson_removes_the_leading_error() {
        let f = |h: f64| 2.0 + 0.3 * h * h;
        let (x, noise) = richardson(f(0.1), f(0.05));
        assert!((x - 2.0).abs() < 1e-14);
        assert!(noise > 0.0);
    }
}
