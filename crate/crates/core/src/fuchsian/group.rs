//! The regular octagon group: opposite sides of the regular hyperbolic octagon with
//! interior angle π/4 are paired by translations, giving a closed genus-2 surface.
//!
//! Side `k` has its midpoint at angle `kπ/4`. Generator `g_k` translates along that
//! diameter by twice the inradius and maps side `k+4` onto side `k`; `g_{k+4} = g_k⁻¹`.

use crate::error::{LabError, Result};
use crate::fuchsian::moebius::Moebius;
use crate::scalar::Real;
use num_complex::Complex;
use std::collections::HashMap;

/// Number of side pairings.
pub const SIDES: usize = 8;

/// Cyclic relator: `g0 g3 g6 g1 g4 g7 g2 g5 = ±I`.
pub const RELATOR: [usize; 8] = [0, 3, 6, 1, 4, 7, 2, 5];

/// Index of the inverse generator.
pub const fn inverse_of(k: usize) -> usize {
    (k + 4) % SIDES
}

#[derive(Clone, Debug)]
pub struct FuchsianGroup<T> {
    pub generators: [Moebius<T>; SIDES],
}

/// A group element together with one shortest word producing it.
#[derive(Clone, Copy, Debug)]
pub struct GroupElement<T> {
    pub map: Moebius<T>,
    code: u64,
    len: u8,
}

impl<T> GroupElement<T> {
    /// Word letters, leftmost first.
    pub fn word(&self) -> Vec<usize> {
        (0..self.len as usize).map(|i| ((self.code >> (3 * i)) & 7) as usize).collect()
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn last(&self) -> Option<usize> {
        (self.len > 0).then(|| ((self.code >> (3 * (self.len as usize - 1))) & 7) as usize)
    }

    fn extended(&self, map: Moebius<T>, k: usize) -> Self {
        GroupElement { map, code: self.code | ((k as u64) << (3 * self.len as usize)), len: self.len + 1 }
    }
}

impl<T: Real> FuchsianGroup<T> {
    pub fn octagon() -> Self {
        let d = T::lit(2.0) * Self::inradius();
        let generators = std::array::from_fn(|k| {
            Moebius::translation(d, T::FRAC_PI_4() * T::lit(k as f64))
        });
        FuchsianGroup { generators }
    }

    /// Hyperbolic inradius ρ, `cosh ρ = cot(π/8)`.
    pub fn inradius() -> T {
        (T::one() / (T::PI() / T::lit(8.0)).tan()).acosh()
    }

    /// Hyperbolic circumradius R, `cosh R = cot²(π/8)`.
    pub fn circumradius() -> T {
        let c = T::one() / (T::PI() / T::lit(8.0)).tan();
        (c * c).acosh()
    }

    /// Interior angle recovered from the right triangle (centre, side midpoint, vertex):
    /// `cos(θ/2) = cosh ρ · sin(π/8)`.
    pub fn vertex_angle() -> T {
        T::lit(2.0) * (Self::inradius().cosh() * (T::PI() / T::lit(8.0)).sin()).acos()
    }

    /// Euclidean radius of the vertices in the disk.
    pub fn vertex_radius() -> T {
        (Self::circumradius() / T::lit(2.0)).tanh()
    }

    /// Euclidean radius of the side midpoints in the disk.
    pub fn midpoint_radius() -> T {
        (Self::inradius() / T::lit(2.0)).tanh()
    }

    /// Octagon vertex `j`, the common endpoint of sides `j-1` and `j`.
    pub fn vertex(j: usize) -> Complex<T> {
        let th = T::FRAC_PI_4() * T::lit(j as f64) - T::PI() / T::lit(8.0);
        Complex::from_polar(Self::vertex_radius(), th)
    }

    /// Side-`k` geodesic as a Euclidean circle `(centre, radius)` orthogonal to the unit circle.
    pub fn side_circle(k: usize) -> (Complex<T>, T) {
        let rm = Self::midpoint_radius();
        let dir = Complex::from_polar(T::one(), T::FRAC_PI_4() * T::lit(k as f64));
        let c = (T::one() + rm * rm) / (T::lit(2.0) * rm);
        (dir * c, c - rm)
    }

    /// Signed distance to side `k`: positive inside the octagon's half-plane.
    pub fn side_margin(k: usize, v: Complex<T>) -> T {
        let (c, r) = Self::side_circle(k);
        (v - c).norm() - r
    }

    pub fn contains(v: Complex<T>, tol: T) -> bool {
        (0..SIDES).all(|k| Self::side_margin(k, v) >= -tol)
    }

    /// Brings `v` into the closed octagon; returns the image and the map used.
    pub fn reduce(&self, v: Complex<T>) -> Result<(Complex<T>, Moebius<T>)> {
        let mut p = v;
        let mut m = Moebius::identity();
        for _ in 0..64 {
            let worst = (0..SIDES)
                .map(|k| (k, Self::side_margin(k, p)))
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap();
            if worst.1 >= T::lit(-1e-13) {
                return Ok((p, m));
            }
            // beyond side k: g_{k+4} maps that neighbour back across side k+4
            let g = self.generators[inverse_of(worst.0)];
            p = g.apply(p);
            m = g.compose(&m);
        }
        Err(LabError::PointLocation(format!("{v:?}")))
    }

    /// Product `g_{w0} g_{w1} ⋯`.
    pub fn word(&self, w: &[usize]) -> Moebius<T> {
        w.iter().fold(Moebius::identity(), |acc, &k| acc.compose(&self.generators[k]))
    }

    /// All elements of word length ≤ `depth`, freely reduced and deduplicated by matrix
    /// distance below `1e-9`. The identity comes first; order is breadth-first.
    pub fn enumerate(&self, depth: usize, cap: usize) -> Result<Vec<GroupElement<T>>> {
        if depth > 21 {
            return Err(LabError::config("depth", "word length above 21 is not supported"));
        }
        let mut out = vec![GroupElement { map: Moebius::identity(), code: 0, len: 0 }];
        let mut index: HashMap<u64, u32> = HashMap::new();
        let mut overflow: Vec<(u64, u32)> = Vec::new();
        index.insert(Self::key(&out[0].map), 0);
        let mut start = 0;
        for _ in 0..depth {
            let end = out.len();
            for i in start..end {
                let parent = out[i];
                for k in 0..SIDES {
                    if parent.last() == Some(inverse_of(k)) {
                        continue;
                    }
                    let map = parent.map.compose(&self.generators[k]).canonical();
                    let key = Self::key(&map);
                    let seen = match index.get(&key) {
                        Some(&j) => {
                            Self::same(&out[j as usize].map, &map)
                                || overflow.iter().any(|&(kk, j)| kk == key && Self::same(&out[j as usize].map, &map))
                        }
                        None => false,
                    };
                    if seen {
                        continue;
                    }
                    if out.len() >= cap {
                        return Err(LabError::MemoryCap { cap });
                    }
                    let id = out.len() as u32;
                    if index.contains_key(&key) {
                        overflow.push((key, id));
                    } else {
                        index.insert(key, id);
                    }
                    out.push(parent.extended(map, k));
                }
            }
            start = end;
        }
        Ok(out)
    }

    fn same(x: &Moebius<T>, y: &Moebius<T>) -> bool {
        let scale = x.a.norm().max(T::one());
        x.distance(y) < T::lit(1e-9) * scale
    }

    /// Hash of the sign-normalized entries rounded at 1e-6 relative.
    fn key(m: &Moebius<T>) -> u64 {
        use std::hash::{Hash, Hasher};
        let m = m.canonical();
        let s = m.a.norm();
        let q = |x: T| (x.to_f64_lossy() * 1e6).round() as i64;
        let mut h = std::collections::hash_map::DefaultHasher::new();
        [q(s.ln()), q(m.a.re / s), q(m.a.im / s), q(m.b.re / s), q(m.b.im / s)].hash(&mut h);
        h.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    type G = FuchsianGroup<f64>;

    #[test]
    fn relator_is_identity() {
        let g = G::octagon();
        assert!(g.word(&RELATOR).distance(&Moebius::identity()) < 1e-10);
        for k in 0..SIDES {
            assert!(g.generators[k].compose(&g.generators[inverse_of(k)]).distance(&Moebius::identity()) < 1e-13);
        }
    }

    #[test]
    fn octagon_geometry() {
        // right-triangle identities for the regular octagon with angle π/4
        assert!((G::vertex_angle() - std::f64::consts::FRAC_PI_4).abs() < 1e-13);
        let pi8 = std::f64::consts::PI / 8.0;
        assert!((G::circumradius().cosh() - 1.0 / (pi8.tan() * pi8.tan())).abs() < 1e-12);
        assert!((G::vertex_radius() - 2f64.powf(-0.25)).abs() < 1e-14);
        // vertices lie on both adjacent side circles
        for j in 0..SIDES {
            let v = G::vertex(j);
            assert!(G::side_margin(j, v).abs() < 1e-13);
            assert!(G::side_margin((j + 7) % 8, v).abs() < 1e-13);
        }
    }

    #[test]
    fn generators_pair_opposite_sides() {
        let g = G::octagon();
        for k in 0..SIDES {
            let opp = (k + 4) % 8;
            for v in [G::vertex(opp), G::vertex((opp + 1) % 8)] {
                let w = g.generators[k].apply(v);
                assert!(G::side_margin(k, w).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn small_depth_counts() {
        let g = G::octagon();
        assert_eq!(g.enumerate(0, 100).unwrap().len(), 1);
        assert_eq!(g.enumerate(1, 100).unwrap().len(), 9);
        let l2 = g.enumerate(2, 1000).unwrap();
        assert_eq!(l2.len(), 65);
        assert!(matches!(g.enumerate(3, 100), Err(LabError::MemoryCap { cap: 100 })));
    }

    #[test]
    fn depth_two_matches_brute_force() {
        let g = G::octagon();
        let l1: Vec<Moebius<f64>> = g.enumerate(1, 100).unwrap().into_iter().map(|e| e.map).collect();
        let mut distinct: Vec<Moebius<f64>> = Vec::new();
        for x in &l1 {
            for y in &l1 {
                let p = x.compose(y);
                if !distinct.iter().any(|d| d.distance(&p) < 1e-9) {
                    distinct.push(p);
                }
            }
        }
        assert_eq!(distinct.len(), g.enumerate(2, 1000).unwrap().len());
    }

    #[test]
    fn relator_collapses_words_at_depth_four() {
        let g = G::octagon();
        // free reduced words up to length 4: 1 + 8 + 56 + 392 + 2744
        assert!(g.enumerate(4, 10_000).unwrap().len() < 3201);
    }

    #[test]
    fn reduction_lands_in_octagon() {
        let g = G::octagon();
        let w = g.word(&[0, 1, 6]);
        let p = w.apply(num_complex::Complex::new(0.1, 0.05));
        let (r, m) = g.reduce(p).unwrap();
        assert!(G::contains(r, 1e-12));
        assert!((m.apply(p) - r).norm() < 1e-10);
    }
}
