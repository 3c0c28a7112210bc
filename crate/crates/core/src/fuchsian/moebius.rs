//! Disk automorphisms `v ↦ (a v + b) / (b̄ v + ā)` stored as `SU(1,1)` matrices
//! `[[a, b], [b̄, ā]]` with `|a|² − |b|² = 1`.

use crate::error::{LabError, Result};
use crate::scalar::Real;
use num_complex::Complex;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moebius<T> {
    pub a: Complex<T>,
    pub b: Complex<T>,
}

impl<T: Real> Moebius<T> {
    pub fn identity() -> Self {
        Moebius { a: Complex::new(T::one(), T::zero()), b: Complex::new(T::zero(), T::zero()) }
    }

    /// Builds the map and rescales it onto the unit-determinant shell.
    pub fn new(a: Complex<T>, b: Complex<T>) -> Self {
        Moebius { a, b }.renormalized()
    }

    /// Rotation `v ↦ e^{iθ} v`.
    pub fn rotation(theta: T) -> Self {
        let h = theta / T::lit(2.0);
        Moebius { a: Complex::new(h.cos(), h.sin()), b: Complex::new(T::zero(), T::zero()) }
    }

    /// Hyperbolic translation by distance `d` along the diameter at angle `theta`,
    /// moving the origin towards `e^{iθ}`.
    pub fn translation(d: T, theta: T) -> Self {
        let h = d / T::lit(2.0);
        Moebius {
            a: Complex::new(h.cosh(), T::zero()),
            b: Complex::from_polar(h.sinh(), theta),
        }
    }

    /// Isometry sending `p` to the origin.
    pub fn to_origin(p: Complex<T>) -> Self {
        Moebius::new(Complex::new(T::one(), T::zero()), -p)
    }

    pub fn det(&self) -> T {
        self.a.norm_sqr() - self.b.norm_sqr()
    }

    pub fn renormalized(self) -> Self {
        let s = self.det().sqrt();
        Moebius { a: self.a / s, b: self.b / s }
    }

    /// `self ∘ other`, renormalized.
    pub fn compose(&self, other: &Self) -> Self {
        Moebius {
            a: self.a * other.a + self.b * other.b.conj(),
            b: self.a * other.b + self.b * other.a.conj(),
        }
        .renormalized()
    }

    pub fn inverse(&self) -> Self {
        Moebius { a: self.a.conj(), b: -self.b }
    }

    /// Picks the sign with `Re a > 0` (or `Im a > 0` on the imaginary axis).
    pub fn canonical(&self) -> Self {
        let flip = self.a.re < T::zero() || (self.a.re == T::zero() && self.a.im < T::zero());
        if flip {
            Moebius { a: -self.a, b: -self.b }
        } else {
            *self
        }
    }

    fn denom(&self, v: Complex<T>) -> Complex<T> {
        self.b.conj() * v + self.a.conj()
    }

    pub fn apply(&self, v: Complex<T>) -> Complex<T> {
        (self.a * v + self.b) / self.denom(v)
    }

    /// `γ'(v) = (b̄ v + ā)^{-2}`.
    pub fn deriv(&self, v: Complex<T>) -> Complex<T> {
        let d = self.denom(v);
        (d * d).inv()
    }

    /// `(γ', γ'', γ''')` at `v`.
    pub fn derivs3(&self, v: Complex<T>) -> [Complex<T>; 3] {
        let inv = self.denom(v).inv();
        let c = self.b.conj();
        let i2 = inv * inv;
        let i3 = i2 * inv;
        [i2, c * i3 * T::lit(-2.0), c * c * i3 * inv * T::lit(6.0)]
    }

    pub fn trace(&self) -> T {
        T::lit(2.0) * self.a.re
    }

    /// Frobenius distance between the two matrices, modulo the sign of the lift.
    pub fn distance(&self, other: &Self) -> T {
        let p = (self.a - other.a).norm_sqr() + (self.b - other.b).norm_sqr();
        let m = (self.a + other.a).norm_sqr() + (self.b + other.b).norm_sqr();
        (T::lit(2.0) * p.min(m)).sqrt()
    }

    /// Hyperbolic translation length `2 arccosh(|tr|/2)`.
    pub fn translation_length(&self) -> Result<T> {
        let tr = self.trace().abs();
        if tr <= T::lit(2.0 + 1e-12) {
            return Err(LabError::NotHyperbolic { trace: tr.to_f64_lossy() });
        }
        Ok(T::lit(2.0) * (tr / T::lit(2.0)).acosh())
    }

    /// Repelling and attracting fixed points on the unit circle.
    pub fn fixed_points(&self) -> Result<(Complex<T>, Complex<T>)> {
        self.translation_length()?;
        let root = (self.a.re * self.a.re - T::one()).sqrt();
        let bc = self.b.conj();
        let p1 = Complex::new(root, self.a.im) / bc;
        let p2 = Complex::new(-root, self.a.im) / bc;
        // The attracting point has |γ'| < 1.
        if self.deriv(p1).norm() < T::one() {
            Ok((p2, p1))
        } else {
            Ok((p1, p2))
        }
    }

    /// Axis of a hyperbolic element.
    pub fn axis(&self) -> Result<Axis<T>> {
        let (rep, att) = self.fixed_points()?;
        let ell = self.translation_length()?;
        Ok(Axis::through(rep, att, ell))
    }
}

/// Geodesic with an arclength parametrization centred at the point closest to the origin.
#[derive(Clone, Copy, Debug)]
pub struct Axis<T> {
    pub repelling: Complex<T>,
    pub attracting: Complex<T>,
    pub length: T,
    /// Point of the axis nearest to the origin.
    pub centre: Complex<T>,
    chart: Moebius<T>,
    direction: Complex<T>,
}

impl<T: Real> Axis<T> {
    fn through(rep: Complex<T>, att: Complex<T>, length: T) -> Self {
        let mid = (rep + att) / T::lit(2.0);
        let cos_d = mid.norm();
        let centre = if cos_d < T::lit(1e-14) {
            Complex::new(T::zero(), T::zero())
        } else {
            let sin_d = (T::one() - cos_d * cos_d).max(T::zero()).sqrt();
            mid / cos_d * ((T::one() - sin_d) / cos_d)
        };
        let chart = Moebius::to_origin(centre);
        let e = chart.apply(att);
        let direction = e / e.norm();
        Axis { repelling: rep, attracting: att, length, centre, chart, direction }
    }

    /// Point at signed hyperbolic distance `s` from the centre, towards the attracting end.
    pub fn point(&self, s: T) -> Complex<T> {
        let w = self.direction * (s / T::lit(2.0)).tanh();
        self.chart.inverse().apply(w)
    }

    /// Unit Euclidean tangent at arclength `s`.
    pub fn tangent(&self, s: T) -> Complex<T> {
        let w = self.direction * (s / T::lit(2.0)).tanh();
        let t = self.chart.inverse().deriv(w) * self.direction;
        t / t.norm()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    type C = Complex<f64>;

    fn sample() -> Moebius<f64> {
        Moebius::translation(1.3, 0.4).compose(&Moebius::rotation(0.7)).compose(&Moebius::translation(0.5, -1.0))
    }

    #[test]
    fn composition_matches_application() {
        let g = Moebius::translation(0.8, 0.3);
        let h = Moebius::translation(1.1, 2.0);
        let v = C::new(0.2, -0.35);
        let lhs = g.compose(&h).apply(v);
        let rhs = g.apply(h.apply(v));
        assert!((lhs - rhs).norm() < 1e-14);
        assert!((g.compose(&h).det() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn inverse_and_distance() {
        let g = sample();
        assert!(g.compose(&g.inverse()).distance(&Moebius::identity()) < 1e-13);
        let neg = Moebius { a: -g.a, b: -g.b };
        assert!(neg.distance(&g) < 1e-15);
        assert_eq!(neg.canonical(), g.canonical());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let g = sample();
        let v = C::new(0.1, 0.25);
        let h = 1e-5;
        let fd = (g.apply(v + h) - g.apply(v - h)) / (2.0 * h);
        let d = g.derivs3(v);
        assert!((fd - d[0]).norm() < 1e-8);
        let fd2 = (g.deriv(v + h) - g.deriv(v - h)) / (2.0 * h);
        assert!((fd2 - d[1]).norm() < 1e-7);
        let fd3 = (g.derivs3(v + h)[1] - g.derivs3(v - h)[1]) / (2.0 * h);
        assert!((fd3 - d[2]).norm() < 1e-6);
    }

    #[test]
    fn translation_length_of_translation() {
        let g = Moebius::<f64>::translation(2.5, 1.0);
        assert!((g.translation_length().unwrap() - 2.5).abs() < 1e-13);
        assert!(Moebius::<f64>::rotation(0.3).translation_length().is_err());
        assert!(Moebius::<f64>::identity().translation_length().is_err());
    }

    #[test]
    fn axis_is_invariant_and_unit_speed() {
        let g = sample();
        let ax = g.axis().unwrap();
        assert!((ax.repelling.norm() - 1.0).abs() < 1e-12);
        assert!((ax.attracting.norm() - 1.0).abs() < 1e-12);
        for s in [-1.0, 0.0, 0.7] {
            let p = ax.point(s);
            let moved = g.apply(p);
            let expect = ax.point(s + ax.length);
            assert!((moved - expect).norm() < 1e-10, "{moved} vs {expect}");
        }
        // hyperbolic distance between points s and s+1 is 1
        let (p, q) = (ax.point(0.3), ax.point(1.3));
        let w = Moebius::to_origin(p).apply(q).norm();
        assert!((2.0 * w.atanh() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn generic_over_f32() {
        let g = Moebius::<f32>::translation(1.0, 0.5);
        let v = Complex::new(0.1f32, 0.2);
        let back = g.inverse().apply(g.apply(v));
        assert!((back - v).norm() < 1e-5);
    }
}
