//! Sparse symmetric matrices, an envelope LDLᵀ factorization under reverse Cuthill–McKee
//! ordering, and Jacobi-preconditioned conjugate gradients for large systems.

use crate::error::{LabError, Result};
use num_complex::Complex64;
use std::collections::VecDeque;

/// Unknown count above which `solve_spd` switches from the direct factorization to CG.
pub const DIRECT_LIMIT: usize = 50_000;

/// Coordinate-format accumulator. Duplicate entries are summed.
#[derive(Clone, Debug, Default)]
pub struct Triplets {
    n: usize,
    entries: Vec<(u32, u32, f64)>,
}

impl Triplets {
    pub fn new(n: usize) -> Self {
        Triplets { n, entries: Vec::new() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.n && j < self.n);
        if v != 0.0 {
            self.entries.push((i as u32, j as u32, v));
        }
    }

    /// Adds the Hermitian entry `c` at complex position `(i, j)` of a matrix whose real
    /// form interleaves real and imaginary parts: `x = [Re x₀, Im x₀, Re x₁, …]`.
    pub fn push_complex(&mut self, i: usize, j: usize, c: Complex64) {
        let (r, s) = (2 * i, 2 * j);
        self.push(r, s, c.re);
        self.push(r, s + 1, -c.im);
        self.push(r + 1, s, c.im);
        self.push(r + 1, s + 1, c.re);
    }

    pub fn build(mut self) -> Csr {
        self.entries.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut indptr = vec![0usize; self.n + 1];
        let mut indices = Vec::with_capacity(self.entries.len());
        let mut data: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(u32, u32)> = None;
        for &(i, j, v) in &self.entries {
            if last == Some((i, j)) {
                *data.last_mut().unwrap() += v;
            } else {
                indices.push(j as usize);
                data.push(v);
                indptr[i as usize + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..self.n {
            indptr[i + 1] += indptr[i];
        }
        Csr { n: self.n, indptr, indices, data }
    }
}

/// Compressed sparse rows, square.
#[derive(Clone, Debug, PartialEq)]
pub struct Csr {
    pub n: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<f64>,
}

impl Csr {
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.indptr[i]..self.indptr[i + 1]).map(move |k| (self.indices[k], self.data[k]))
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(j, a)| a * x[j]).sum()).collect()
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).find(|&(j, _)| j == i).map_or(0.0, |(_, a)| a)).collect()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(k, _)| k == j).map_or(0.0, |(_, a)| a)
    }

    /// `self + s·other` on the union pattern.
    pub fn add_scaled(&self, s: f64, other: &Csr) -> Csr {
        let mut t = Triplets::new(self.n);
        for i in 0..self.n {
            for (j, a) in self.row(i) {
                t.push(i, j, a);
            }
            for (j, a) in other.row(i) {
                t.push(i, j, s * a);
            }
        }
        t.build()
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.data.iter().fold(0.0f64, |m, a| m.max(a.abs())).max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for (j, a) in self.row(i) {
                worst = worst.max((a - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    /// Rows scaled by `d`: `diag(d)·self`, used to form `D M` products.
    pub fn scale_rows(&self, d: &[f64]) -> Csr {
        let mut out = self.clone();
        for i in 0..self.n {
            for k in self.indptr[i]..self.indptr[i + 1] {
                out.data[k] *= d[i];
            }
        }
        out
    }
}

/// Reverse Cuthill–McKee ordering of the adjacency graph; `perm[new] = old`.
pub fn rcm(a: &Csr) -> Vec<usize> {
    let n = a.n;
    let degree: Vec<usize> = (0..n).map(|i| a.indptr[i + 1] - a.indptr[i]).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut starts: Vec<usize> = (0..n).collect();
    starts.sort_by_key(|&i| (degree[i], i));
    for &s0 in &starts {
        if visited[s0] {
            continue;
        }
        let start = peripheral(a, s0, &degree);
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(i) = queue.pop_front() {
            order.push(i);
            let mut nb: Vec<usize> = a.row(i).map(|(j, _)| j).filter(|&j| !visited[j]).collect();
            nb.sort_by_key(|&j| (degree[j], j));
            nb.dedup();
            for j in nb {
                if !visited[j] {
                    visited[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    order.reverse();
    order
}

/// Pseudo-peripheral node by repeated BFS to the farthest, lowest-degree node.
fn peripheral(a: &Csr, start: usize, degree: &[usize]) -> usize {
    let mut node = start;
    let mut ecc = 0;
    for _ in 0..8 {
        let mut level = vec![usize::MAX; a.n];
        level[node] = 0;
        let mut queue = VecDeque::from([node]);
        let mut last = node;
        while let Some(i) = queue.pop_front() {
            for (j, _) in a.row(i) {
                if level[j] == usize::MAX {
                    level[j] = level[i] + 1;
                    queue.push_back(j);
                    if level[j] > level[last] || (level[j] == level[last] && degree[j] < degree[last]) {
                        last = j;
                    }
                }
            }
        }
        if level[last] <= ecc {
            break;
        }
        ecc = level[last];
        node = last;
    }
    node
}

/// `P A Pᵀ = L D Lᵀ` with the lower envelope of each row stored densely.
#[derive(Clone, Debug)]
pub struct Ldlt {
    perm: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    l: Vec<f64>,
    d: Vec<f64>,
}

impl Ldlt {
    /// Factors a symmetric positive-definite matrix. Pivots below `1e-13·max|a_ii|` fail.
    pub fn factor(a: &Csr) -> Result<Self> {
        Self::factor_impl(a, true)
    }

    /// Factors a symmetric nonsingular matrix without a definiteness requirement.
    pub fn factor_indefinite(a: &Csr) -> Result<Self> {
        Self::factor_impl(a, false)
    }

    fn factor_impl(a: &Csr, spd: bool) -> Result<Self> {
        let n = a.n;
        let perm = rcm(a);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (new, &old) in perm.iter().enumerate() {
            for (j, _) in a.row(old) {
                first[new] = first[new].min(inv[j]);
            }
        }
        let mut start = vec![0usize; n + 1];
        for i in 0..n {
            start[i + 1] = start[i] + (i - first[i]);
        }
        let mut l = vec![0.0; start[n]];
        let mut d = vec![0.0; n];
        let scale = a.diag().iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
        let mut diag_a = vec![0.0; n];
        for (new, &old) in perm.iter().enumerate() {
            for (j, v) in a.row(old) {
                let jn = inv[j];
                if jn < new {
                    l[start[new] + jn - first[new]] = v;
                } else if jn == new {
                    diag_a[new] = v;
                }
            }
        }
        let mut g = vec![0.0; n];
        for i in 0..n {
            let fi = first[i];
            let ri = start[i];
            // row i of L·D in g, then L
            for j in fi..i {
                let fj = first[j];
                let rj = start[j];
                let lo = fi.max(fj);
                let mut s = l[ri + j - fi];
                for k in lo..j {
                    s -= g[k] * l[rj + k - fj];
                }
                g[j] = s;
            }
            let mut di = diag_a[i];
            for j in fi..i {
                let lij = g[j] / d[j];
                di -= lij * g[j];
                l[ri + j - fi] = lij;
            }
            let bad = if spd { !(di > 1e-13 * scale) } else { !(di.abs() > 1e-14 * scale) };
            if bad {
                return Err(LabError::NotPositiveDefinite { row: perm[i], pivot: di });
            }
            d[i] = di;
        }
        Ok(Ldlt { perm, first, start, l, d })
    }

    pub fn n(&self) -> usize {
        self.d.len()
    }

    /// Number of negative pivots (inertia of the factored matrix).
    pub fn negative_pivots(&self) -> usize {
        self.d.iter().filter(|&&x| x < 0.0).count()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut y: Vec<f64> = self.perm.iter().map(|&o| b[o]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let ri = self.start[i];
            let mut s = y[i];
            for k in fi..i {
                s -= self.l[ri + k - fi] * y[k];
            }
            y[i] = s;
        }
        for i in 0..n {
            y[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let ri = self.start[i];
            let yi = y[i];
            for k in fi..i {
                y[k] -= self.l[ri + k - fi] * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Relative residual `‖A x - b‖ / ‖b‖` (absolute when `b = 0`).
pub fn relative_residual(a: &Csr, x: &[f64], b: &[f64]) -> f64 {
    let r: Vec<f64> = a.mul_vec(x).iter().zip(b).map(|(ax, bi)| ax - bi).collect();
    let nb = norm(b);
    if nb > 0.0 {
        norm(&r) / nb
    } else {
        norm(&r)
    }
}

/// Jacobi-preconditioned conjugate gradients for an SPD matrix.
pub fn cg(a: &Csr, b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = a.n;
    let dinv: Vec<f64> = a.diag().iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let nb = norm(b);
    if nb == 0.0 {
        return Ok(x);
    }
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for _ in 0..max_iter {
        let ap = a.mul_vec(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(LabError::NotPositiveDefinite { row: 0, pivot: pap });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm(&r) <= tol * nb {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] * dinv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(LabError::NotConverged { what: "conjugate gradients".into(), iterations: max_iter, residual: norm(&r) / nb })
}

/// Solves `a x = b` for SPD `a`, direct below `DIRECT_LIMIT` unknowns, with a
/// relative residual gate of `1e-10`.
pub fn solve_spd(a: &Csr, b: &[f64]) -> Result<Vec<f64>> {
    let x = if a.n < DIRECT_LIMIT {
        let f = Ldlt::factor(a)?;
        let mut x = f.solve(b);
        // one step of iterative refinement
        let r: Vec<f64> = b.iter().zip(a.mul_vec(&x)).map(|(bi, ax)| bi - ax).collect();
        for (xi, di) in x.iter_mut().zip(f.solve(&r)) {
            *xi += di;
        }
        x
    } else {
        cg(a, b, 1e-12, 20 * a.n)?
    };
    let res = relative_residual(a, &x, b);
    if res > 1e-10 {
        return Err(LabError::SolverFailed { residual: res, tol: 1e-10 });
    }
    Ok(x)
}

/// Interleaves complex values as `[re, im, re, im, …]`.
pub fn to_real(z: &[Complex64]) -> Vec<f64> {
    z.iter().flat_map(|c| [c.re, c.im]).collect()
}

pub fn to_complex(x: &[f64]) -> Vec<Complex64> {
    x.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect()
}
