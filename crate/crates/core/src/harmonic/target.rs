//! Pointwise target metrics `h = s|dv|² + 2Re(qq dv²)` with first derivatives in the
//! image point, shared by the surface and circle solvers.

use crate::fem::phi0;
use crate::metric::dphi0;
use crate::C64;

/// Deformation family of the target surface.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TargetKind {
    /// `e^{2w} φ₀|dv + zν dv̄|²`, with `w` the Liouville factor.
    Beltrami { z: C64 },
    /// Second-order Wolf family with `α` the Wolf correction.
    Wolf { t: f64 },
    /// `e^{2s} φ₀|dv|²`.
    Scaled { s: f64 },
}

/// `s`, `qq` and their Wirtinger derivatives at one image point.
#[derive(Clone, Copy, Debug, Default)]
pub struct PointEval {
    pub s: f64,
    /// `∂_v s`; `∂_v̄ s` is its conjugate.
    pub ds: C64,
    pub qq: C64,
    pub dqq: C64,
    pub dqq_bar: C64,
}

impl PointEval {
    /// `h(X, X)`.
    pub fn norm_sq(&self, x: C64) -> f64 {
        self.s * x.norm_sqr() + 2.0 * (self.qq * x * x).re
    }
}

/// Evaluates the family at `x` given `q(x)`, `q'(x)` and the scalar field `f` (the
/// Liouville factor or `α`) with its Wirtinger derivative `∂_v f`.
pub fn eval(kind: TargetKind, x: C64, q: C64, dq: C64, f: f64, df: C64) -> PointEval {
    let p0 = phi0(x);
    let dp0 = dphi0(x);
    match kind {
        TargetKind::Beltrami { z } => {
            let e2w = (2.0 * f).exp();
            let z2 = z.norm_sqr();
            let q2 = q.norm_sqr();
            let p = p0 + z2 * q2 / p0;
            let dp = dp0 + (dq * q.conj() / p0 - dp0 * (q2 / (p0 * p0))) * z2;
            let zq = z.conj() * q;
            PointEval {
                s: e2w * p,
                ds: (df * (2.0 * p) + dp) * e2w,
                qq: zq * e2w,
                dqq: (df * zq * 2.0 + z.conj() * dq) * e2w,
                dqq_bar: df.conj() * zq * (2.0 * e2w),
            }
        }
        TargetKind::Wolf { t } => {
            let q2 = q.norm_sqr();
            let t2 = t * t;
            PointEval {
                s: p0 + t2 * (q2 / p0 + p0 * f),
                ds: dp0 + (dq * q.conj() / p0 - dp0 * (q2 / (p0 * p0)) + dp0 * f + df * p0) * t2,
                qq: q * t,
                dqq: dq * t,
                dqq_bar: C64::new(0.0, 0.0),
            }
        }
        TargetKind::Scaled { s } => {
            let e = (2.0 * s).exp();
            PointEval { s: e * p0, ds: dp0 * e, ..Default::default() }
        }
    }
}

/// Cubic Taylor model of `q` about `centre`: `(q(u), q'(u))`.
pub fn taylor(jet: &[C64; 4], centre: C64, u: C64) -> (C64, C64) {
    let d = u - centre;
    let q = jet[0] + d * (jet[1] + d * (jet[2] * 0.5 + d * (jet[3] / 6.0)));
    let dq = jet[1] + d * (jet[2] + d * (jet[3] * 0.5));
    (q, dq)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(kind: TargetKind) {
        // q(v) = 0.3 + v², f(v) = 0.1 Re v - 0.05 Im v
        let qf = |v: C64| (C64::new(0.3, 0.1) + v * v, v * 2.0);
        let ff = |v: C64| 0.1 * v.re - 0.05 * v.im;
        let df = C64::new(0.05, 0.025);
        let at = |v: C64| {
            let (q, dq) = qf(v);
            eval(kind, v, q, dq, ff(v), df)
        };
        let x = C64::new(0.2, -0.3);
        let h = 1e-6;
        let e = at(x);
        let (px, mx, py, my) = (at(x + h), at(x - h), at(x + C64::i() * h), at(x - C64::i() * h));
        let ds = C64::new((px.s - mx.s) / (2.0 * h), -(py.s - my.s) / (2.0 * h)) * 0.5;
        assert!((ds - e.ds).norm() < 1e-6 * e.s, "{ds} {}", e.ds);
        let dx = (px.qq - mx.qq) / (2.0 * h);
        let dy = (py.qq - my.qq) / (2.0 * h);
        let dv = (dx - C64::i() * dy) * 0.5;
        let dvb = (dx + C64::i() * dy) * 0.5;
        assert!((dv - e.dqq).norm() < 1e-7 && (dvb - e.dqq_bar).norm() < 1e-7);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        fd_check(TargetKind::Beltrami { z: C64::new(0.3, -0.2) });
        fd_check(TargetKind::Wolf { t: 0.4 });
        fd_check(TargetKind::Scaled { s: 0.2 });
    }

    #[test]
    fn base_cases_reduce_to_poincare() {
        let x = C64::new(0.1, 0.5);
        let e = eval(TargetKind::Beltrami { z: C64::new(0.0, 0.0) }, x, C64::new(1.0, 2.0), C64::new(0.0, 0.0), 0.0, C64::new(0.0, 0.0));
        assert_eq!(e.s, phi0(x));
        assert_eq!(e.qq, C64::new(0.0, 0.0));
        let w = eval(TargetKind::Wolf { t: 0.0 }, x, C64::new(1.0, 2.0), C64::new(0.0, 0.0), 0.7, C64::new(0.0, 0.0));
        assert_eq!(w.s, phi0(x));
    }
}
