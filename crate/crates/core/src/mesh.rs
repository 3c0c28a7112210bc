//! Triangulated fundamental octagon with side gluing.
//!
//! The mesh is the eight-triangle fan about the origin, refined by midpoint subdivision.
//! Interior edges split at Euclidean midpoints, boundary edges at hyperbolic midpoints so
//! that boundary vertices stay on the geodesic sides and paired sides match exactly.
//! Vertices on sides 4..7 and all corners except corner 0 are slaves: each stores the
//! master vertex and the deck transformation carrying the master onto it.

use crate::error::{LabError, Result};
use crate::fuchsian::{FuchsianGroup, Moebius, SIDES};
use crate::C64;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Deepest supported refinement.
pub const MAX_REFINE: usize = 8;

/// Identification of one vertex with a degree of freedom.
#[derive(Clone, Copy, Debug)]
pub struct Owner {
    /// Vertex index of the master copy.
    pub master: usize,
    /// `vertices[v] = map(vertices[master])`.
    pub map: Moebius<f64>,
}

/// A boundary edge `(a, b)` on octagon side `side`, in triangle orientation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub a: usize,
    pub b: usize,
    pub side: usize,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    pub refinement: usize,
    pub vertices: Vec<C64>,
    pub triangles: Vec<[usize; 3]>,
    pub owners: Vec<Owner>,
    /// Degree of freedom of each vertex (shared by glued copies).
    pub dof: Vec<usize>,
    /// Master vertex of each degree of freedom.
    pub dof_vertex: Vec<usize>,
    pub boundary: Vec<BoundaryEdge>,
    bins: Bins,
}

/// Serialized mesh: vertices, triangles and side pairings with their transition maps.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MeshFile {
    pub refinement: usize,
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub gluing: Vec<GluePair>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GluePair {
    /// Boundary edge on sides 0..3 as a vertex pair.
    pub edge: [usize; 2],
    /// Partner edge on the opposite side.
    pub partner: [usize; 2],
    /// Transition `(a, b)` mapping `edge` onto `partner`.
    pub transition: [[f64; 2]; 2],
}

impl Mesh {
    /// Fan triangulation refined `r` times: `8·4^r` triangles.
    pub fn octagon(r: usize) -> Result<Mesh> {
        if r > MAX_REFINE {
            return Err(LabError::RefinementTooDeep { level: r, max: MAX_REFINE });
        }
        type G = FuchsianGroup<f64>;
        let mut vertices = vec![C64::new(0.0, 0.0)];
        vertices.extend((0..SIDES).map(G::vertex));
        let mut triangles: Vec<[usize; 3]> = (0..SIDES).map(|j| [0, 1 + j, 1 + (j + 1) % SIDES]).collect();
        let mut side_of: HashMap<(usize, usize), usize> =
            (0..SIDES).map(|k| (edge_key(1 + k, 1 + (k + 1) % SIDES), k)).collect();
        for _ in 0..r {
            let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
            let mut next_side = HashMap::new();
            let mut next = Vec::with_capacity(4 * triangles.len());
            for t in &triangles {
                let mut m = [0usize; 3];
                for e in 0..3 {
                    let (a, b) = (t[e], t[(e + 1) % 3]);
                    let key = edge_key(a, b);
                    m[e] = *mid.entry(key).or_insert_with(|| {
                        let p = match side_of.get(&key) {
                            Some(_) => hyperbolic_midpoint(vertices[a], vertices[b]),
                            None => (vertices[a] + vertices[b]) * 0.5,
                        };
                        vertices.push(p);
                        vertices.len() - 1
                    });
                    if let Some(&s) = side_of.get(&key) {
                        next_side.insert(edge_key(a, m[e]), s);
                        next_side.insert(edge_key(m[e], b), s);
                    }
                }
                next.push([t[0], m[0], m[2]]);
                next.push([m[0], t[1], m[1]]);
                next.push([m[2], m[1], t[2]]);
                next.push([m[0], m[1], m[2]]);
            }
            triangles = next;
            side_of = next_side;
        }
        let mut boundary = Vec::new();
        for t in &triangles {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                if let Some(&side) = side_of.get(&edge_key(a, b)) {
                    boundary.push(BoundaryEdge { a, b, side });
                }
            }
        }
        boundary.sort_by_key(|e| (e.side, e.a, e.b));
        let owners = glue(&mut vertices, &boundary)?;
        let mut dof = vec![usize::MAX; vertices.len()];
        let mut dof_vertex = Vec::new();
        for v in 0..vertices.len() {
            if owners[v].master == v {
                dof[v] = dof_vertex.len();
                dof_vertex.push(v);
            }
        }
        for v in 0..vertices.len() {
            dof[v] = dof[owners[v].master];
        }
        let bins = Bins::new(&vertices, &triangles);
        Ok(Mesh { refinement: r, vertices, triangles, owners, dof, dof_vertex, boundary, bins })
    }

    pub fn n_dofs(&self) -> usize {
        self.dof_vertex.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// Euler characteristic of the glued surface.
    pub fn euler_characteristic(&self) -> i64 {
        let mut edges = std::collections::HashSet::new();
        for t in &self.triangles {
            for e in 0..3 {
                edges.insert(edge_key(t[e], t[(e + 1) % 3]));
            }
        }
        let glued_edges = edges.len() - self.boundary.len() / 2;
        self.n_dofs() as i64 - glued_edges as i64 + self.triangles.len() as i64
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle_deg(&self) -> f64 {
        let mut worst = f64::INFINITY;
        for t in &self.triangles {
            for k in 0..3 {
                let p = self.vertices[t[k]];
                let a = self.vertices[t[(k + 1) % 3]] - p;
                let b = self.vertices[t[(k + 2) % 3]] - p;
                worst = worst.min((b / a).arg().abs().to_degrees());
            }
        }
        worst
    }

    /// Twice the signed Euclidean area of each triangle; positive for counter-clockwise.
    pub fn orientation(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i]);
        ((b - a).conj() * (c - a)).im
    }

    /// Largest gluing mismatch `|map(master) − vertex|`, and over paired boundary edges.
    pub fn gluing_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for (v, o) in self.owners.iter().enumerate() {
            worst = worst.max((o.map.apply(self.vertices[o.master]) - self.vertices[v]).norm());
        }
        worst
    }

    /// Triangle containing `p` and barycentric coordinates, searching the bins.
    pub fn locate(&self, p: C64) -> Option<(usize, [f64; 3])> {
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &t in self.bins.candidates(p) {
            let l = self.barycentric(t, p);
            let m = l[0].min(l[1]).min(l[2]);
            if m >= -1e-12 {
                return Some((t, l));
            }
            if best.map_or(true, |b| m > b.2) {
                best = Some((t, l, m));
            }
        }
        best.filter(|b| b.2 > -1e-6).map(|b| (b.0, b.1))
    }

    pub fn barycentric(&self, t: usize, p: C64) -> [f64; 3] {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i]);
        let d = ((b - a).conj() * (c - a)).im;
        let l1 = ((p - a).conj() * (c - a)).im / d;
        let l2 = ((b - a).conj() * (p - a)).im / d;
        [1.0 - l1 - l2, l1, l2]
    }

    pub fn to_file(&self) -> MeshFile {
        let mut gluing = Vec::new();
        for e in self.boundary.iter().filter(|e| e.side < 4) {
            let side = e.side + 4;
            let g = FuchsianGroup::<f64>::octagon().generators[side];
            // corners share one owner, so partners are located through the pairing itself
            let nearest = |z: C64| {
                (0..self.vertices.len())
                    .filter(|&w| on_side(self, w, side))
                    .min_by(|&x, &y| (self.vertices[x] - z).norm().total_cmp(&(self.vertices[y] - z).norm()))
                    .expect("paired side has vertices")
            };
            let h = if (g.apply(self.vertices[e.a]) - self.vertices[nearest(g.apply(self.vertices[e.a]))]).norm() < 1e-9 { g } else { g.inverse() };
            let find = |v: usize| nearest(h.apply(self.vertices[v]));
            gluing.push(GluePair {
                edge: [e.a, e.b],
                partner: [find(e.a), find(e.b)],
                transition: [[h.a.re, h.a.im], [h.b.re, h.b.im]],
            });
        }
        MeshFile {
            refinement: self.refinement,
            vertices: self.vertices.iter().map(|v| [v.re, v.im]).collect(),
            triangles: self.triangles.clone(),
            gluing,
        }
    }
}

fn on_side(mesh: &Mesh, v: usize, side: usize) -> bool {
    mesh.boundary.iter().any(|e| e.side == side && (e.a == v || e.b == v))
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Midpoint of the geodesic segment `[a, b]` in the disk.
pub fn hyperbolic_midpoint(a: C64, b: C64) -> C64 {
    let t = Moebius::to_origin(a);
    let bp = t.apply(b);
    let r = bp.norm();
    let m = if r > 0.0 { bp * ((r.atanh() / 2.0).tanh() / r) } else { bp };
    t.inverse().apply(m)
}

/// Assigns master vertices and deck maps; snaps slave positions onto `map(master)`.
fn glue(vertices: &mut [C64], boundary: &[BoundaryEdge]) -> Result<Vec<Owner>> {
    let group = FuchsianGroup::<f64>::octagon();
    let n = vertices.len();
    let mut owners: Vec<Owner> = (0..n).map(|v| Owner { master: v, map: Moebius::identity() }).collect();
    let mut side_vertices: Vec<Vec<usize>> = vec![Vec::new(); SIDES];
    for e in boundary {
        side_vertices[e.side].push(e.a);
        side_vertices[e.side].push(e.b);
    }
    for s in &mut side_vertices {
        s.sort_unstable();
        s.dedup();
    }
    let corners: Vec<usize> = (1..=SIDES).collect();
    // corner class: breadth-first over side pairings starting at corner 0
    let mut corner_map: Vec<Option<Moebius<f64>>> = vec![None; SIDES];
    corner_map[0] = Some(Moebius::identity());
    let mut queue = vec![0usize];
    while let Some(c) = queue.pop() {
        let m = corner_map[c].unwrap();
        for s in [(c + SIDES - 1) % SIDES, c] {
            let g = group.generators[(s + 4) % SIDES];
            let p = g.apply(vertices[corners[c]]);
            let hit = (0..SIDES).find(|&j| (vertices[corners[j]] - p).norm() < 1e-9);
            match hit {
                Some(j) if corner_map[j].is_none() => {
                    corner_map[j] = Some(g.compose(&m));
                    queue.push(j);
                }
                Some(_) => {}
                None => return Err(LabError::MeshInvalid(format!("corner {c} has no partner across side {s}"))),
            }
        }
    }
    for (j, m) in corner_map.iter().enumerate() {
        let m = m.ok_or_else(|| LabError::MeshInvalid(format!("corner {j} unreached")))?;
        owners[corners[j]] = Owner { master: corners[0], map: m };
    }
    for s in 4..SIDES {
        let g = group.generators[s];
        for &v in &side_vertices[s] {
            if corners.contains(&v) {
                continue;
            }
            let target = vertices[v];
            let master = side_vertices[s - 4]
                .iter()
                .copied()
                .filter(|w| !corners.contains(w))
                .min_by(|&x, &y| {
                    let dx = (g.apply(vertices[x]) - target).norm();
                    let dy = (g.apply(vertices[y]) - target).norm();
                    dx.partial_cmp(&dy).unwrap()
                })
                .ok_or_else(|| LabError::MeshInvalid(format!("side {} is empty", s - 4)))?;
            let mismatch = (g.apply(vertices[master]) - target).norm();
            if mismatch > 1e-9 {
                return Err(LabError::MeshInvalid(format!("vertex {v} on side {s} unmatched ({mismatch:e})")));
            }
            owners[v] = Owner { master, map: g };
        }
    }
    for v in 0..n {
        let o = owners[v];
        if o.master != v {
            vertices[v] = o.map.apply(vertices[o.master]);
        }
    }
    Ok(owners)
}

/// Uniform bin grid over the bounding square for point location.
#[derive(Clone, Debug)]
struct Bins {
    lo: f64,
    size: f64,
    n: usize,
    cells: Vec<Vec<usize>>,
}

impl Bins {
    fn new(vertices: &[C64], triangles: &[[usize; 3]]) -> Self {
        let r = vertices.iter().fold(0.0f64, |m, v| m.max(v.re.abs()).max(v.im.abs())) * (1.0 + 1e-9);
        let n = ((triangles.len() as f64).sqrt().ceil() as usize).max(1);
        let size = 2.0 * r / n as f64;
        let mut cells = vec![Vec::new(); n * n];
        let idx = |x: f64| (((x + r) / size).floor().max(0.0) as usize).min(n - 1);
        for (t, tri) in triangles.iter().enumerate() {
            let p = tri.map(|i| vertices[i]);
            let (x0, x1) = (p.iter().map(|v| v.re).fold(f64::INFINITY, f64::min), p.iter().map(|v| v.re).fold(f64::NEG_INFINITY, f64::max));
            let (y0, y1) = (p.iter().map(|v| v.im).fold(f64::INFINITY, f64::min), p.iter().map(|v| v.im).fold(f64::NEG_INFINITY, f64::max));
            for i in idx(x0 - 1e-9)..=idx(x1 + 1e-9) {
                for j in idx(y0 - 1e-9)..=idx(y1 + 1e-9) {
                    cells[j * n + i].push(t);
                }
            }
        }
        Bins { lo: -r, size, n, cells }
    }

    fn candidates(&self, p: C64) -> &[usize] {
        let idx = |x: f64| (((x - self.lo) / self.size).floor().max(0.0) as usize).min(self.n - 1);
        &self.cells[idx(p.im) * self.n + idx(p.re)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coarse_fan_is_genus_two() {
        let m = Mesh::octagon(0).unwrap();
        assert_eq!(m.triangles.len(), 8);
        assert_eq!(m.n_dofs(), 2);
        assert_eq!(m.euler_characteristic(), -2);
    }

    #[test]
    fn refined_meshes_keep_topology_and_shape() {
        for r in 1..=3 {
            let m = Mesh::octagon(r).unwrap();
            assert_eq!(m.triangles.len(), 8 * 4usize.pow(r as u32));
            assert_eq!(m.euler_characteristic(), -2, "r={r}");
            assert!(m.min_angle_deg() >= 15.0);
            assert!((0..m.triangles.len()).all(|t| m.orientation(t) > 0.0));
            assert!(m.gluing_defect() < 1e-9);
            assert_eq!(m.boundary.len(), 8 * 2usize.pow(r as u32));
        }
    }

    #[test]
    fn boundary_vertices_lie_on_geodesic_sides() {
        let m = Mesh::octagon(3).unwrap();
        for e in &m.boundary {
            for v in [e.a, e.b] {
                let margin = FuchsianGroup::<f64>::side_margin(e.side, m.vertices[v]);
                assert!(margin.abs() < 1e-12, "{margin}");
            }
        }
    }

    #[test]
    fn too_deep_refinement_is_rejected() {
        assert!(matches!(Mesh::octagon(9), Err(LabError::RefinementTooDeep { .. })));
    }

    #[test]
    fn location_finds_sampled_points() {
        let m = Mesh::octagon(3).unwrap();
        for t in (0..m.triangles.len()).step_by(7) {
            let [a, b, c] = m.triangles[t].map(|i| m.vertices[i]);
            let p = (a * 0.2 + b * 0.3 + c * 0.5) as C64;
            let (tt, l) = m.locate(p).unwrap();
            assert_eq!(tt, t);
            assert!((l[0] - 0.2).abs() < 1e-12 && (l[2] - 0.5).abs() < 1e-12);
        }
        assert!(m.locate(C64::new(0.95, 0.0)).is_none());
    }

    #[test]
    fn hyperbolic_midpoint_is_equidistant() {
        let (a, b) = (C64::new(0.3, 0.1), C64::new(-0.2, 0.6));
        let m = hyperbolic_midpoint(a, b);
        let d = |x: C64, y: C64| 2.0 * ((x - y) / (C64::new(1.0, 0.0) - x.conj() * y)).norm().atanh();
        assert!((d(a, m) - d(m, b)).abs() < 1e-13);
        assert!((d(a, m) + d(m, b) - d(a, b)).abs() < 1e-13);
    }
}
