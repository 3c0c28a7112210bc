//! Poincaré series of weight four and their compressed Taylor form.
//!
//! For a seed polynomial `P` of degree ≤ 2 the truncated series
//! `q_L(v) = Σ_{|γ| ≤ L} γ'(v)² P(γ v)` is a finite sum of functions holomorphic on a
//! neighbourhood of the closed disk. It is stored as its Taylor expansion at the origin,
//! obtained by an FFT on the circle `|v| = ρ`, which is exact to rounding on `|v| ≤ 0.92`.

use crate::error::{LabError, Result};
use crate::fuchsian::group::{FuchsianGroup, GroupElement};
use crate::fuchsian::moebius::Moebius;
use crate::scalar::Real;
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{FftNum, FftPlanner};
use serde::{Deserialize, Serialize};

/// Sampling radius for the Taylor coefficients.
pub const FFT_RADIUS: f64 = 0.96;
/// Number of FFT samples.
pub const FFT_SAMPLES: usize = 2048;
/// Largest radius at which the compressed form is trusted.
pub const VALID_RADIUS: f64 = 0.92;

/// Seed polynomial `c0 + c1 v + c2 v²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Seed {
    pub coeffs: [[f64; 2]; 3],
}

impl Seed {
    pub fn real(c0: f64, c1: f64, c2: f64) -> Self {
        Seed { coeffs: [[c0, 0.0], [c1, 0.0], [c2, 0.0]] }
    }

    pub fn complex<T: Real>(&self) -> [Complex<T>; 3] {
        self.coeffs.map(|[re, im]| Complex::new(T::lit(re), T::lit(im)))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c[0] == 0.0 && c[1] == 0.0)
    }

    /// The involution `v ↦ -v` lies in the normalizer of the group and fixes every
    /// quadratic differential of the genus-2 surface, so the odd part of a seed
    /// contributes nothing in the limit.
    pub fn even_part_is_zero(&self) -> bool {
        [0, 2].iter().all(|&i| self.coeffs[i][0] == 0.0 && self.coeffs[i][1] == 0.0)
    }
}

/// Truncated Poincaré series evaluated term by term.
#[derive(Clone, Debug)]
pub struct PoincareSeries<T> {
    pub depth: usize,
    pub seed: Seed,
    elements: Vec<Moebius<T>>,
    c: [Complex<T>; 3],
    /// Start offsets of each word length, filled by `layered`.
    layers: Vec<usize>,
}

impl<T: Real> PoincareSeries<T> {
    pub fn new(group: &FuchsianGroup<T>, seed: Seed, depth: usize, cap: usize) -> Result<Self> {
        if seed.is_zero() {
            return Err(LabError::ZeroDifferential("seed polynomial is zero".into()));
        }
        if seed.even_part_is_zero() {
            return Err(LabError::ZeroDifferential(
                "odd seeds give a series that vanishes identically on this surface".into(),
            ));
        }
        let elements = group.enumerate(depth, cap)?.into_iter().map(|e: GroupElement<T>| e.map).collect();
        Ok(PoincareSeries { depth, seed, elements, c: seed.complex(), layers: Vec::new() })
    }

    /// Like `new`, keeping the offsets where each word length starts so that every
    /// shorter truncation can be evaluated from the same element list.
    pub fn layered(group: &FuchsianGroup<T>, seed: Seed, depth: usize, cap: usize) -> Result<Self> {
        let mut s = Self::new(group, seed, 0, cap)?;
        let all = group.enumerate(depth, cap)?;
        let mut layers = vec![0; depth + 2];
        for e in &all {
            layers[e.len() + 1] += 1;
        }
        for l in 1..layers.len() {
            layers[l] += layers[l - 1];
        }
        s.depth = depth;
        s.elements = all.into_iter().map(|e| e.map).collect();
        s.layers = layers;
        Ok(s)
    }

    /// `[q_0(v), q_1(v), …, q_depth(v)]` from a layered series.
    pub fn truncations(&self, v: Complex<T>) -> Vec<Complex<T>> {
        assert!(!self.layers.is_empty(), "series was not built with `layered`");
        let mut acc = Complex::new(T::zero(), T::zero());
        let mut out = Vec::with_capacity(self.depth + 1);
        for w in self.layers.windows(2) {
            for m in &self.elements[w[0]..w[1]] {
                acc += self.term(m, v);
            }
            out.push(acc);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    fn term(&self, m: &Moebius<T>, v: Complex<T>) -> Complex<T> {
        let [c0, c1, c2] = self.c;
        let inv = (m.b.conj() * v + m.a.conj()).inv();
        let gv = (m.a * v + m.b) * inv;
        let i2 = inv * inv;
        i2 * i2 * (c0 + gv * (c1 + gv * c2))
    }

    /// `q_L(v)`.
    pub fn value(&self, v: Complex<T>) -> Complex<T> {
        self.elements.iter().fold(Complex::new(T::zero(), T::zero()), |acc, m| acc + self.term(m, v))
    }

    /// `[q, q', q'', q''']` by termwise differentiation.
    pub fn jet(&self, v: Complex<T>) -> [Complex<T>; 4] {
        let [c0, c1, c2] = self.c;
        let z = Complex::new(T::zero(), T::zero());
        let mut acc = [z; 4];
        for m in &self.elements {
            // expansions in ε = v' - v, truncated after ε³
            let bc = m.b.conj();
            let inv0 = (bc * v + m.a.conj()).inv();
            let r = -bc * inv0;
            let inv = [inv0, inv0 * r, inv0 * r * r, inv0 * r * r * r];
            let num = [m.a * v + m.b, m.a, z, z];
            let gv = mul4(&num, &inv);
            let p = add4(&[c0, z, z, z], &mul4(&gv, &add4(&[c1, z, z, z], &scale4(&gv, c2))));
            let i2 = mul4(&inv, &inv);
            let t = mul4(&mul4(&i2, &i2), &p);
            for k in 0..4 {
                acc[k] += t[k];
            }
        }
        [acc[0], acc[1], acc[2] * T::lit(2.0), acc[3] * T::lit(6.0)]
    }
}

fn mul4<T: Real>(a: &[Complex<T>; 4], b: &[Complex<T>; 4]) -> [Complex<T>; 4] {
    std::array::from_fn(|k| (0..=k).fold(Complex::new(T::zero(), T::zero()), |s, i| s + a[i] * b[k - i]))
}

fn add4<T: Real>(a: &[Complex<T>; 4], b: &[Complex<T>; 4]) -> [Complex<T>; 4] {
    std::array::from_fn(|k| a[k] + b[k])
}

fn scale4<T: Real>(a: &[Complex<T>; 4], s: Complex<T>) -> [Complex<T>; 4] {
    std::array::from_fn(|k| a[k] * s)
}

/// Holomorphic quadratic differential `q(v) dv²` in compressed Taylor form.
#[derive(Clone, Debug)]
pub struct QuadraticDifferential<T> {
    pub seed: Seed,
    pub depth: usize,
    /// Factor applied to the raw series (1 unless normalized).
    pub scale: T,
    coeffs: Vec<Complex<T>>,
}

impl<T: Real + FftNum> QuadraticDifferential<T> {
    /// Compresses a truncated series; with `normalize` the result has `sup_F |q|/φ₀ = 1`.
    pub fn from_series(series: &PoincareSeries<T>, normalize: bool) -> Result<Self> {
        let m = FFT_SAMPLES;
        let rho = T::lit(FFT_RADIUS);
        let mut buf: Vec<Complex<T>> = (0..m)
            .map(|j| {
                let th = T::lit(2.0 * std::f64::consts::PI * j as f64 / m as f64);
                series.value(Complex::from_polar(rho, th))
            })
            .collect();
        FftPlanner::new().plan_fft_forward(m).process(&mut buf);
        let half = m / 2;
        let mut coeffs: Vec<Complex<T>> = Vec::with_capacity(half);
        let mut rpow = T::one();
        for c in buf.iter().take(half) {
            coeffs.push(*c / (T::lit(m as f64) * rpow));
            rpow *= rho;
        }
        let r_eval = T::lit(VALID_RADIUS);
        let mut mag = T::one();
        let sizes: Vec<T> = coeffs
            .iter()
            .map(|c| {
                let s = c.norm() * mag;
                mag *= r_eval;
                s
            })
            .collect();
        let top = sizes.iter().cloned().fold(T::zero(), T::max);
        let keep = sizes.iter().rposition(|&s| s > top * T::lit(1e-17)).map_or(1, |i| i + 1);
        coeffs.truncate(keep);
        let mut qd = QuadraticDifferential { seed: series.seed, depth: series.depth, scale: T::one(), coeffs };
        let sup = qd.sup_nu();
        if !(sup > T::lit(1e-12)) {
            return Err(LabError::ZeroDifferential(format!("sup |q|/phi0 = {sup}")));
        }
        if normalize {
            let s = T::one() / sup;
            qd.scale = s;
            for c in &mut qd.coeffs {
                *c = *c * s;
            }
        }
        Ok(qd)
    }

    /// Convenience: octagon group, enumeration and compression in one call.
    pub fn poincare(seed: Seed, depth: usize, normalize: bool) -> Result<Self> {
        let group = FuchsianGroup::octagon();
        let series = PoincareSeries::new(&group, seed, depth, DEFAULT_CAP)?;
        Self::from_series(&series, normalize)
    }
}

/// Default element cap for word enumeration.
pub const DEFAULT_CAP: usize = 12_000_000;

impl<T: Real> QuadraticDifferential<T> {
    pub fn n_coeffs(&self) -> usize {
        self.coeffs.len()
    }

    /// `c·q`, for rotated (`|c| = 1`) or rescaled differentials.
    pub fn scaled(&self, c: Complex<T>) -> Self {
        QuadraticDifferential {
            seed: self.seed,
            depth: self.depth,
            scale: self.scale * c.norm(),
            coeffs: self.coeffs.iter().map(|&x| x * c).collect(),
        }
    }

    /// Taylor coefficients about the origin.
    pub fn coefficients(&self) -> &[Complex<T>] {
        &self.coeffs
    }

    /// Rebuilds a differential from stored coefficients.
    pub fn from_coefficients(seed: Seed, depth: usize, scale: T, coeffs: Vec<Complex<T>>) -> Self {
        QuadraticDifferential { seed, depth, scale, coeffs }
    }

    pub fn value(&self, v: Complex<T>) -> Complex<T> {
        self.coeffs.iter().rev().fold(Complex::new(T::zero(), T::zero()), |acc, c| acc * v + c)
    }

    /// `[q, q', q'', q''']`.
    pub fn jet(&self, v: Complex<T>) -> [Complex<T>; 4] {
        let z = Complex::new(T::zero(), T::zero());
        let mut d = [z; 4];
        for c in self.coeffs.iter().rev() {
            d[3] = d[3] * v + d[2];
            d[2] = d[2] * v + d[1];
            d[1] = d[1] * v + d[0];
            d[0] = d[0] * v + c;
        }
        [d[0], d[1], d[2] * T::lit(2.0), d[3] * T::lit(6.0)]
    }

    /// Pointwise Beltrami size `|q|/φ₀` with `φ₀ = 4/(1-|v|²)²`.
    pub fn nu_abs(&self, v: Complex<T>) -> T {
        let s = T::one() - v.norm_sqr();
        self.value(v).norm() * s * s / T::lit(4.0)
    }

    /// Supremum of `|q|/φ₀` over a fixed lattice of the octagon.
    pub fn sup_nu(&self) -> T {
        octagon_lattice::<T>(24).into_iter().map(|v| self.nu_abs(v)).fold(T::zero(), T::max)
    }
}

/// Barycentric lattice over the eight fan triangles of the chordal octagon.
pub fn octagon_lattice<T: Real>(n: usize) -> Vec<Complex<T>> {
    let mut pts = Vec::new();
    for j in 0..8 {
        let a = FuchsianGroup::<T>::vertex(j);
        let b = FuchsianGroup::<T>::vertex((j + 1) % 8);
        for i in 0..=n {
            for k in 0..=(n - i) {
                if i == 0 && k > 0 && j > 0 {
                    continue;
                }
                let (s, t) = (T::lit(i as f64 / n as f64), T::lit(k as f64 / n as f64));
                pts.push(a * s + b * t);
            }
        }
    }
    pts
}

/// Deterministic sample of points inside the octagon.
pub fn octagon_samples(n: usize, seed: u64) -> Vec<Complex<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = FuchsianGroup::<f64>::vertex_radius();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let v = Complex::new(rng.gen_range(-r..r), rng.gen_range(-r..r));
        if v.norm() < r && FuchsianGroup::<f64>::contains(v, 0.0) {
            out.push(v);
        }
    }
    out
}

/// Automorphy defect `sup |q(γv) γ'(v)² − q(v)| / (1 + |q(v)|)` over sample points and
/// all eight side pairings, evaluated with the term-by-term series.
pub fn automorphy_defect(series: &PoincareSeries<f64>, samples: &[Complex<f64>], scale: f64) -> f64 {
    let group = FuchsianGroup::<f64>::octagon();
    let mut worst: f64 = 0.0;
    for &v in samples {
        let qv = series.value(v) * scale;
        for g in &group.generators {
            let d = g.deriv(v);
            let qg = series.value(g.apply(v)) * scale * d * d;
            worst = worst.max((qg - qv).norm() / (1.0 + qv.norm()));
        }
    }
    worst
}

/// Automorphy defect of every truncation `q_0, …, q_depth` of a layered series.
pub fn automorphy_profile(series: &PoincareSeries<f64>, samples: &[Complex<f64>], scale: f64) -> Vec<f64> {
    let group = FuchsianGroup::<f64>::octagon();
    let mut worst = vec![0.0f64; series.depth + 1];
    for &v in samples {
        let qv = series.truncations(v);
        for g in &group.generators {
            let d = g.deriv(v);
            let qg = series.truncations(g.apply(v));
            for l in 0..=series.depth {
                let a = qv[l] * scale;
                let b = qg[l] * scale * d * d;
                worst[l] = worst[l].max((b - a).norm() / (1.0 + a.norm()));
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(depth: usize) -> PoincareSeries<f64> {
        PoincareSeries::new(&FuchsianGroup::octagon(), Seed::real(1.0, 0.0, 0.0), depth, DEFAULT_CAP).unwrap()
    }

    #[test]
    fn zero_and_odd_seeds_rejected() {
        let g = FuchsianGroup::<f64>::octagon();
        assert!(matches!(PoincareSeries::new(&g, Seed::real(0.0, 0.0, 0.0), 2, 100), Err(LabError::ZeroDifferential(_))));
        assert!(matches!(PoincareSeries::new(&g, Seed::real(0.0, 1.0, 0.0), 2, 100), Err(LabError::ZeroDifferential(_))));
    }

    #[test]
    fn jet_matches_finite_differences() {
        let s = series(3);
        let v = Complex::new(0.21, -0.13);
        let j = s.jet(v);
        assert!((j[0] - s.value(v)).norm() < 1e-13);
        let h = 1e-5;
        let fd = (s.value(v + h) - s.value(v - h)) / (2.0 * h);
        assert!((fd - j[1]).norm() / j[1].norm() < 1e-6);
        let fd2 = (s.jet(v + h)[1] - s.jet(v - h)[1]) / (2.0 * h);
        assert!((fd2 - j[2]).norm() / j[2].norm().max(1.0) < 1e-6);
        let fd3 = (s.jet(v + h)[2] - s.jet(v - h)[2]) / (2.0 * h);
        assert!((fd3 - j[3]).norm() / j[3].norm().max(1.0) < 1e-6);
    }

    #[test]
    fn compressed_form_reproduces_series() {
        let s = series(3);
        let qd = QuadraticDifferential::from_series(&s, false).unwrap();
        for v in octagon_samples(20, 3) {
            let a = s.jet(v);
            let b = qd.jet(v);
            for k in 0..4 {
                assert!((a[k] - b[k]).norm() <= 1e-9 * (1.0 + a[k].norm()), "k={k} {} {}", a[k], b[k]);
            }
        }
        let far = Complex::from_polar(0.91, 0.3);
        assert!((s.value(far) - qd.value(far)).norm() < 1e-8 * s.value(far).norm());
    }

    #[test]
    fn normalization_sets_unit_sup() {
        let qd = QuadraticDifferential::from_series(&series(2), true).unwrap();
        assert!((qd.sup_nu() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn defect_decreases_from_depth_two_to_four() {
        let pts = octagon_samples(12, 7);
        let d: Vec<f64> = (2..=4).map(|l| automorphy_defect(&series(l), &pts, 1.0)).collect();
        assert!(d[1] <= d[0] * 1.1 && d[2] <= d[1] * 1.1, "{d:?}");
        let layered = PoincareSeries::layered(&FuchsianGroup::octagon(), Seed::real(1.0, 0.0, 0.0), 4, DEFAULT_CAP).unwrap();
        let p = automorphy_profile(&layered, &pts, 1.0);
        for (l, x) in d.iter().enumerate() {
            assert!((p[l + 2] - x).abs() <= 1e-12 * (1.0 + x), "{p:?} {d:?}");
        }
    }
}
