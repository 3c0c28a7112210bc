//! Second-order bivariate jets `f, f_x, f_y, f_xx, f_xy, f_yy` with exact arithmetic.
//!
//! Used to feed closed-form metric derivatives into the Brioschi curvature formula.

use crate::scalar::Real;
use num_complex::Complex;
use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet2<T> {
    pub v: T,
    pub x: T,
    pub y: T,
    pub xx: T,
    pub xy: T,
    pub yy: T,
}

impl<T: Real> Jet2<T> {
    pub fn constant(v: T) -> Self {
        Jet2 { v, x: T::zero(), y: T::zero(), xx: T::zero(), xy: T::zero(), yy: T::zero() }
    }

    pub fn var_x(x: T) -> Self {
        Jet2 { x: T::one(), ..Self::constant(x) }
    }

    pub fn var_y(y: T) -> Self {
        Jet2 { y: T::one(), ..Self::constant(y) }
    }

    /// Jets of `Re f` and `Im f` for `f` holomorphic in `v = x + iy`, given `[f, f', f'']`.
    pub fn holomorphic(d: &[Complex<T>]) -> (Self, Self) {
        let i = Complex::new(T::zero(), T::one());
        let (f, f1, f2) = (d[0], d[1], d[2]);
        let c = [f, f1, i * f1, f2, i * f2, -f2];
        let re = Jet2 { v: c[0].re, x: c[1].re, y: c[2].re, xx: c[3].re, xy: c[4].re, yy: c[5].re };
        let im = Jet2 { v: c[0].im, x: c[1].im, y: c[2].im, xx: c[3].im, xy: c[4].im, yy: c[5].im };
        (re, im)
    }

    /// Composition `g ∘ self` for a scalar function with derivatives `[g, g', g'']`.
    pub fn chain(&self, g: [T; 3]) -> Self {
        Jet2 {
            v: g[0],
            x: g[1] * self.x,
            y: g[1] * self.y,
            xx: g[1] * self.xx + g[2] * self.x * self.x,
            xy: g[1] * self.xy + g[2] * self.x * self.y,
            yy: g[1] * self.yy + g[2] * self.y * self.y,
        }
    }

    pub fn recip(&self) -> Self {
        let r = T::one() / self.v;
        self.chain([r, -r * r, T::lit(2.0) * r * r * r])
    }

    pub fn exp(&self) -> Self {
        let e = self.v.exp();
        self.chain([e, e, e])
    }

    pub fn ln(&self) -> Self {
        let r = T::one() / self.v;
        self.chain([self.v.ln(), r, -r * r])
    }

    pub fn scale(&self, s: T) -> Self {
        Jet2 { v: self.v * s, x: self.x * s, y: self.y * s, xx: self.xx * s, xy: self.xy * s, yy: self.yy * s }
    }
}

impl<T: Real> Add for Jet2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Jet2 { v: self.v + o.v, x: self.x + o.x, y: self.y + o.y, xx: self.xx + o.xx, xy: self.xy + o.xy, yy: self.yy + o.yy }
    }
}

impl<T: Real> Sub for Jet2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl<T: Real> Neg for Jet2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-T::one())
    }
}

impl<T: Real> Mul for Jet2<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Jet2 {
            v: self.v * o.v,
            x: self.x * o.v + self.v * o.x,
            y: self.y * o.v + self.v * o.y,
            xx: self.xx * o.v + T::lit(2.0) * self.x * o.x + self.v * o.xx,
            xy: self.xy * o.v + self.x * o.y + self.y * o.x + self.v * o.xy,
            yy: self.yy * o.v + T::lit(2.0) * self.y * o.y + self.v * o.yy,
        }
    }
}

impl<T: Real> Div for Jet2<T> {
    type Output = Self;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Self) -> Self {
        self * o.recip()
    }
}

/// Gauss curvature of `E dx² + 2F dx dy + G dy²` by the Brioschi formula.
pub fn brioschi<T: Real>(e: &Jet2<T>, f: &Jet2<T>, g: &Jet2<T>) -> T {
    let half = T::lit(0.5);
    let a11 = -half * e.yy + f.xy - half * g.xx;
    let a12 = half * e.x;
    let a13 = f.x - half * e.y;
    let a21 = f.y - half * g.x;
    let a31 = half * g.y;
    let det3 = |m: [[T; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d1 = det3([[a11, a12, a13], [a21, e.v, f.v], [a31, f.v, g.v]]);
    let d2 = det3([[T::zero(), half * e.y, half * g.x], [half * e.y, e.v, f.v], [half * g.x, f.v, g.v]]);
    let w = e.v * g.v - f.v * f.v;
    (d1 - d2) / (w * w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule_matches_polynomial() {
        let x = Jet2::var_x(0.3);
        let y = Jet2::var_y(-0.7);
        let p = x * x * y + y.exp();
        let (xv, yv) = (0.3f64, -0.7f64);
        assert!((p.v - (xv * xv * yv + yv.exp())).abs() < 1e-15);
        assert!((p.x - 2.0 * xv * yv).abs() < 1e-15);
        assert!((p.y - (xv * xv + yv.exp())).abs() < 1e-15);
        assert!((p.xx - 2.0 * yv).abs() < 1e-15);
        assert!((p.xy - 2.0 * xv).abs() < 1e-15);
        assert!((p.yy - yv.exp()).abs() < 1e-15);
    }

    #[test]
    fn curvature_of_sphere_and_poincare_disk() {
        // conformal metric λ(dx² + dy²) has K = -Δ log λ / (2λ)
        let (x, y) = (Jet2::var_x(0.2f64), Jet2::var_y(0.1f64));
        let r2 = x * x + y * y;
        let one = Jet2::constant(1.0);
        let s = one - r2;
        let poincare = Jet2::constant(4.0) / (s * s);
        let zero = Jet2::constant(0.0);
        assert!((brioschi(&poincare, &zero, &poincare) + 1.0).abs() < 1e-12);
        let t = one + r2;
        let sphere = Jet2::constant(4.0) / (t * t);
        assert!((brioschi(&sphere, &zero, &sphere) - 1.0).abs() < 1e-12);
        assert!(brioschi(&one, &zero, &one).abs() < 1e-15);
    }
}
