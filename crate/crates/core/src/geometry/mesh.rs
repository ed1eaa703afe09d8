//! Unit-disk triangulation.
//!
//! Nodes are laid out on concentric rings marched inward from the unit
//! circle, strips between rings are stitched by an angular merge, and the
//! result is flipped to a Delaunay triangulation. The local size is `h`
//! in the bulk and shrinks linearly to `BOUNDARY_SIZE_RATIO * h` across an
//! outer band, which keeps the polygonal area/perimeter defect well below
//! `0.02 h²`.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};

pub type Point2 = Vector2<f64>;

pub const H_MIN: f64 = 0.005;
pub const H_MAX: f64 = 0.5;

/// Relative mesh size on the unit circle.
pub const BOUNDARY_SIZE_RATIO: f64 = 0.3;
/// Radial width of the grading band.
pub const BAND_WIDTH: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct Mesh {
    nodes: Vec<Point2>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<[usize; 2]>,
    /// Boundary nodes in loop order (counter-clockwise).
    boundary_nodes: Vec<usize>,
    /// `boundary_slot[node]` = position in the boundary loop.
    boundary_slot: Vec<Option<usize>>,
    h_target: f64,
}

/// Linear barycentric gradients and area of one triangle.
#[derive(Debug, Clone, Copy)]
pub struct TriangleGeometry {
    pub area: f64,
    pub grads: [Point2; 3],
}

fn signed_area(a: Point2, b: Point2, c: Point2) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
}

fn size_function(h: f64, r: f64) -> f64 {
    let t = ((r - (1.0 - BAND_WIDTH)) / BAND_WIDTH).clamp(0.0, 1.0);
    h * (1.0 - (1.0 - BOUNDARY_SIZE_RATIO) * t)
}

/// Builds the unit-disk mesh for a target size in `[0.005, 0.5]`.
pub fn build_disk_mesh(h_target: f64) -> Result<Mesh> {
    if !(H_MIN..=H_MAX).contains(&h_target) {
        return Err(Error::Parameter(format!(
            "h_target = {h_target} outside [{H_MIN}, {H_MAX}]"
        )));
    }
    let h = h_target;
    const RING_STEP: f64 = 0.866_025_403_784_438_6; // sqrt(3)/2

    // Ring radii, outside in.
    let mut radii = vec![1.0];
    let mut r = 1.0f64;
    while size_function(h, r) < h && r > 0.0 {
        let s = size_function(h, r);
        let mid = size_function(h, (r - 0.5 * RING_STEP * s).max(0.0));
        r -= RING_STEP * mid;
        if r <= 0.0 {
            break;
        }
        radii.push(r);
    }
    let r_bulk = *radii.last().unwrap();
    let m = (r_bulk / (RING_STEP * h)).round().max(1.0) as usize;
    let d = r_bulk / m as f64;
    for j in 1..m {
        radii.push(r_bulk - d * j as f64);
    }

    let mut nodes = Vec::new();
    let mut rings: Vec<Vec<usize>> = Vec::new();
    for (j, &rj) in radii.iter().enumerate() {
        let s = size_function(h, rj);
        let n = ((2.0 * PI * rj / s).ceil() as usize).max(6);
        let offset = if j % 2 == 1 { PI / n as f64 } else { 0.0 };
        let mut ring = Vec::with_capacity(n);
        for k in 0..n {
            let th = offset + 2.0 * PI * k as f64 / n as f64;
            ring.push(nodes.len());
            if j == 0 {
                nodes.push(Point2::new(th.cos(), th.sin()));
            } else {
                nodes.push(Point2::new(rj * th.cos(), rj * th.sin()));
            }
        }
        rings.push(ring);
    }
    let center = nodes.len();
    nodes.push(Point2::zeros());

    let mut triangles = Vec::new();
    for w in rings.windows(2) {
        stitch_rings(&nodes, &w[0], &w[1], &mut triangles);
    }
    let inner = rings.last().unwrap();
    for k in 0..inner.len() {
        let a = inner[k];
        let b = inner[(k + 1) % inner.len()];
        triangles.push(orient(&nodes, [center, a, b]));
    }

    delaunay_flip(&nodes, &mut triangles);

    let n_b = rings[0].len();
    let boundary_nodes: Vec<usize> = rings[0].clone();
    let boundary_edges = (0..n_b)
        .map(|k| [boundary_nodes[k], boundary_nodes[(k + 1) % n_b]])
        .collect();
    Mesh::from_parts(nodes, triangles, boundary_edges, h_target)
}

fn orient(nodes: &[Point2], t: [usize; 3]) -> [usize; 3] {
    if signed_area(nodes[t[0]], nodes[t[1]], nodes[t[2]]) < 0.0 {
        [t[0], t[2], t[1]]
    } else {
        t
    }
}

fn angle_of(p: Point2) -> f64 {
    p.y.atan2(p.x)
}

fn stitch_rings(nodes: &[Point2], outer: &[usize], inner: &[usize], out: &mut Vec<[usize; 3]>) {
    let na = outer.len();
    let nb = inner.len();
    let a0 = angle_of(nodes[outer[0]]);
    // Inner node whose angle is closest to a0.
    let j0 = (0..nb)
        .min_by(|&p, &q| {
            let dp = wrap(angle_of(nodes[inner[p]]) - a0).abs();
            let dq = wrap(angle_of(nodes[inner[q]]) - a0).abs();
            dp.total_cmp(&dq)
        })
        .unwrap();
    let b0 = a0 + wrap(angle_of(nodes[inner[j0]]) - a0);
    let (mut i, mut j) = (0usize, 0usize);
    while i < na || j < nb {
        let next_a = a0 + 2.0 * PI * (i + 1) as f64 / na as f64;
        let next_b = b0 + 2.0 * PI * (j + 1) as f64 / nb as f64;
        let ai = outer[i % na];
        let bj = inner[(j0 + j) % nb];
        if j >= nb || (i < na && next_a <= next_b) {
            let an = outer[(i + 1) % na];
            out.push(orient(nodes, [ai, an, bj]));
            i += 1;
        } else {
            let bn = inner[(j0 + j + 1) % nb];
            out.push(orient(nodes, [ai, bn, bj]));
            j += 1;
        }
    }
}

fn wrap(a: f64) -> f64 {
    let mut x = a % (2.0 * PI);
    if x > PI {
        x -= 2.0 * PI;
    } else if x < -PI {
        x += 2.0 * PI;
    }
    x
}

fn in_circumcircle(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    // a, b, c counter-clockwise.
    let (adx, ady) = (a.x - d.x, a.y - d.y);
    let (bdx, bdy) = (b.x - d.x, b.y - d.y);
    let (cdx, cdy) = (c.x - d.x, c.y - d.y);
    let det = (adx * adx + ady * ady) * (bdx * cdy - cdx * bdy)
        - (bdx * bdx + bdy * bdy) * (adx * cdy - cdx * ady)
        + (cdx * cdx + cdy * cdy) * (adx * bdy - bdx * ady);
    let scale = (adx * adx + ady * ady + bdx * bdx + bdy * bdy + cdx * cdx + cdy * cdy).powi(2);
    det > 1e-12 * scale
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Lawson edge flips until every interior edge is locally Delaunay.
fn delaunay_flip(nodes: &[Point2], tris: &mut [[usize; 3]]) {
    let mut edge_tris: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (t, tri) in tris.iter().enumerate() {
        for e in 0..3 {
            edge_tris
                .entry(edge_key(tri[e], tri[(e + 1) % 3]))
                .or_default()
                .push(t);
        }
    }
    let mut stack: Vec<(usize, usize)> = edge_tris
        .iter()
        .filter(|(_, ts)| ts.len() == 2)
        .map(|(&k, _)| k)
        .collect();
    stack.sort_unstable();
    let mut guard = 0usize;
    let limit = 50 * tris.len() + 1000;
    while let Some(key) = stack.pop() {
        guard += 1;
        if guard > limit {
            break;
        }
        let ts = match edge_tris.get(&key) {
            Some(ts) if ts.len() == 2 => [ts[0], ts[1]],
            _ => continue,
        };
        let (p, q) = key;
        let opp = |t: &[usize; 3]| *t.iter().find(|&&v| v != p && v != q).unwrap();
        let c = opp(&tris[ts[0]]);
        let d = opp(&tris[ts[1]]);
        let t0 = tris[ts[0]];
        if !in_circumcircle(nodes[t0[0]], nodes[t0[1]], nodes[t0[2]], nodes[d]) {
            continue;
        }
        let n0 = orient(nodes, [c, d, p]);
        let n1 = orient(nodes, [d, c, q]);
        let a0 = signed_area(nodes[n0[0]], nodes[n0[1]], nodes[n0[2]]);
        let a1 = signed_area(nodes[n1[0]], nodes[n1[1]], nodes[n1[2]]);
        if a0 <= 1e-14 || a1 <= 1e-14 {
            continue;
        }
        // Update adjacency.
        edge_tris.remove(&key);
        let replace = |map: &mut HashMap<(usize, usize), Vec<usize>>, e: (usize, usize), from: usize, to: usize| {
            if let Some(v) = map.get_mut(&e) {
                for x in v.iter_mut() {
                    if *x == from {
                        *x = to;
                    }
                }
            }
        };
        // Edge (q, c) moves from ts[0] to the triangle containing q: ts[1].
        replace(&mut edge_tris, edge_key(q, c), ts[0], ts[1]);
        // Edge (p, d) moves from ts[1] to ts[0].
        replace(&mut edge_tris, edge_key(p, d), ts[1], ts[0]);
        edge_tris.insert(edge_key(c, d), vec![ts[0], ts[1]]);
        tris[ts[0]] = n0;
        tris[ts[1]] = n1;
        for e in [edge_key(p, c), edge_key(c, q), edge_key(q, d), edge_key(d, p)] {
            stack.push(e);
        }
    }
}

impl Mesh {
    /// Assembles a mesh from raw parts and checks every invariant.
    pub fn from_parts(
        nodes: Vec<Point2>,
        triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<[usize; 2]>,
        h_target: f64,
    ) -> Result<Self> {
        let n = nodes.len();
        let mut boundary_nodes = Vec::with_capacity(boundary_edges.len());
        let mut boundary_slot = vec![None; n];
        if boundary_edges.is_empty() {
            return Err(Error::InvalidMesh("no boundary edges".into()));
        }
        // Walk the loop.
        let next: HashMap<usize, usize> = boundary_edges.iter().map(|e| (e[0], e[1])).collect();
        if next.len() != boundary_edges.len() {
            return Err(Error::InvalidMesh("boundary node with two outgoing edges".into()));
        }
        let start = boundary_edges[0][0];
        let mut v = start;
        loop {
            if v >= n {
                return Err(Error::InvalidMesh(format!("boundary index {v} out of range")));
            }
            if boundary_slot[v].is_some() {
                return Err(Error::InvalidMesh("boundary loop revisits a node".into()));
            }
            boundary_slot[v] = Some(boundary_nodes.len());
            boundary_nodes.push(v);
            v = *next
                .get(&v)
                .ok_or_else(|| Error::InvalidMesh("boundary loop is open".into()))?;
            if v == start {
                break;
            }
        }
        if boundary_nodes.len() != boundary_edges.len() {
            return Err(Error::InvalidMesh(
                "boundary edges do not form a single closed loop".into(),
            ));
        }
        let mesh = Self {
            nodes,
            triangles,
            boundary_edges,
            boundary_nodes,
            boundary_slot,
            h_target,
        };
        mesh.check_invariants()?;
        Ok(mesh)
    }

    pub fn check_invariants(&self) -> Result<()> {
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= self.nodes.len()) {
                return Err(Error::InvalidMesh(format!("triangle {t} index out of range")));
            }
            let a = signed_area(self.nodes[tri[0]], self.nodes[tri[1]], self.nodes[tri[2]]);
            if !(a > 0.0) {
                return Err(Error::InvalidMesh(format!("triangle {t} has signed area {a:e}")));
            }
        }
        for &b in &self.boundary_nodes {
            let r = self.nodes[b].norm();
            if (r - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidMesh(format!("boundary node {b} at radius {r}")));
            }
        }
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &self.triangles {
            for e in 0..3 {
                *count.entry(edge_key(tri[e], tri[(e + 1) % 3])).or_default() += 1;
            }
        }
        let boundary: std::collections::HashSet<(usize, usize)> = self
            .boundary_edges
            .iter()
            .map(|e| edge_key(e[0], e[1]))
            .collect();
        for (e, c) in &count {
            let ok = (*c == 2 && !boundary.contains(e)) || (*c == 1 && boundary.contains(e));
            if !ok {
                return Err(Error::InvalidMesh(format!(
                    "edge {e:?} shared by {c} triangles (boundary: {})",
                    boundary.contains(e)
                )));
            }
        }
        if boundary.iter().any(|e| !count.contains_key(e)) {
            return Err(Error::InvalidMesh("boundary edge not in any triangle".into()));
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[Point2] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> Point2 {
        self.nodes[i]
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn boundary_edges(&self) -> &[[usize; 2]] {
        &self.boundary_edges
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    pub fn boundary_slot(&self, node: usize) -> Option<usize> {
        self.boundary_slot[node]
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary_slot[node].is_some()
    }

    pub fn h_target(&self) -> f64 {
        self.h_target
    }

    pub fn centroid(&self, t: usize) -> Point2 {
        let [a, b, c] = self.triangles[t];
        (self.nodes[a] + self.nodes[b] + self.nodes[c]) / 3.0
    }

    pub fn geometry(&self, t: usize) -> TriangleGeometry {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        let area = signed_area(pa, pb, pc);
        let inv = 1.0 / (2.0 * area);
        // grad λ_a = perp(pc - pb) / 2A, rotated counter-clockwise edge normal.
        let g = |p: Point2, q: Point2| Point2::new(p.y - q.y, q.x - p.x) * inv;
        TriangleGeometry {
            area,
            grads: [g(pb, pc), g(pc, pa), g(pa, pb)],
        }
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.geometry(t).area).sum()
    }

    pub fn max_edge_length(&self) -> f64 {
        self.triangles
            .iter()
            .flat_map(|t| {
                (0..3).map(move |e| (self.nodes[t[e]] - self.nodes[t[(e + 1) % 3]]).norm())
            })
            .fold(0.0, f64::max)
    }

    /// Angular position of each boundary node in loop order, in `[0, 2π)`.
    pub fn boundary_angles(&self) -> Vec<f64> {
        self.boundary_nodes
            .iter()
            .map(|&b| {
                let a = angle_of(self.nodes[b]);
                if a < 0.0 {
                    a + 2.0 * PI
                } else {
                    a
                }
            })
            .collect()
    }

    /// Lumped arc-length weight of each boundary node (half of each adjacent
    /// arc of the unit circle). Sums to 2π.
    pub fn boundary_arc_weights(&self) -> Vec<f64> {
        let ang = self.boundary_angles();
        let n = ang.len();
        (0..n)
            .map(|k| {
                let prev = ang[(k + n - 1) % n];
                let next = ang[(k + 1) % n];
                let d1 = (ang[k] - prev).rem_euclid(2.0 * PI);
                let d2 = (next - ang[k]).rem_euclid(2.0 * PI);
                0.5 * (d1 + d2)
            })
            .collect()
    }

    /// Cumulative arc length `s` of each boundary node from the first one.
    pub fn boundary_arc_positions(&self) -> Vec<f64> {
        let ang = self.boundary_angles();
        let a0 = ang[0];
        ang.iter().map(|a| (a - a0).rem_euclid(2.0 * PI)).collect()
    }

    /// Lumped (row-sum) mass per node: a third of adjacent triangle areas.
    pub fn lumped_areas(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.nodes.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            let a = self.geometry(t).area / 3.0;
            for &v in tri {
                w[v] += a;
            }
        }
        w
    }

    /// Point location structure for interpolating nodal fields.
    pub fn locator(&self) -> PointLocator<'_> {
        PointLocator::new(self)
    }
}

/// Uniform bucket grid over triangle bounding boxes.
#[derive(Debug)]
pub struct PointLocator<'m> {
    mesh: &'m Mesh,
    cells: usize,
    buckets: Vec<Vec<usize>>,
}

impl<'m> PointLocator<'m> {
    fn new(mesh: &'m Mesh) -> Self {
        let cells = ((mesh.n_triangles() as f64).sqrt().ceil() as usize).clamp(1, 512);
        let mut buckets = vec![Vec::new(); cells * cells];
        let to_cell = |v: f64| -> usize {
            (((v + 1.0) / 2.0 * cells as f64).floor() as isize).clamp(0, cells as isize - 1) as usize
        };
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let xs = tri.iter().map(|&v| mesh.nodes[v].x);
            let ys = tri.iter().map(|&v| mesh.nodes[v].y);
            let (x0, x1) = xs.fold((f64::MAX, f64::MIN), |(a, b), x| (a.min(x), b.max(x)));
            let (y0, y1) = ys.fold((f64::MAX, f64::MIN), |(a, b), y| (a.min(y), b.max(y)));
            for cy in to_cell(y0)..=to_cell(y1) {
                for cx in to_cell(x0)..=to_cell(x1) {
                    buckets[cy * cells + cx].push(t);
                }
            }
        }
        Self {
            mesh,
            cells,
            buckets,
        }
    }

    /// Triangle containing `p` and its barycentric coordinates. Points just
    /// outside the polygonal boundary snap to the nearest candidate.
    pub fn locate(&self, p: Point2) -> Option<(usize, [f64; 3])> {
        let to_cell = |v: f64| -> usize {
            (((v + 1.0) / 2.0 * self.cells as f64).floor() as isize).clamp(0, self.cells as isize - 1)
                as usize
        };
        let bucket = &self.buckets[to_cell(p.y) * self.cells + to_cell(p.x)];
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &t in bucket {
            let bc = self.barycentric(t, p);
            let worst = bc.iter().copied().fold(f64::MAX, f64::min);
            if worst >= -1e-12 {
                return Some((t, bc));
            }
            if best.as_ref().is_none_or(|b| worst > b.2) {
                best = Some((t, bc, worst));
            }
        }
        best.filter(|b| b.2 > -0.05).map(|(t, bc, _)| (t, bc))
    }

    fn barycentric(&self, t: usize, p: Point2) -> [f64; 3] {
        let [a, b, c] = self.mesh.triangles[t];
        let (pa, pb, pc) = (self.mesh.nodes[a], self.mesh.nodes[b], self.mesh.nodes[c]);
        let area = signed_area(pa, pb, pc);
        [
            signed_area(p, pb, pc) / area,
            signed_area(pa, p, pc) / area,
            signed_area(pa, pb, p) / area,
        ]
    }
}

/// Matrix helpers shared by the field and pushforward code.
pub fn is_symmetric(m: &Matrix2<f64>, tol: f64) -> bool {
    (m[(0, 1)] - m[(1, 0)]).abs() <= tol * (1.0 + m.abs().max())
}

pub fn min_eigenvalue(m: &Matrix2<f64>) -> f64 {
    let a = m[(0, 0)];
    let d = m[(1, 1)];
    let b = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    let mean = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    mean - rad
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_h() {
        assert!(matches!(build_disk_mesh(0.6), Err(Error::Parameter(_))));
        assert!(matches!(build_disk_mesh(0.001), Err(Error::Parameter(_))));
    }

    #[test]
    fn coarse_mesh_is_valid() {
        for h in [0.5, 0.3, 0.2] {
            let m = build_disk_mesh(h).unwrap();
            m.check_invariants().unwrap();
            assert!(m.max_edge_length() <= 1.5 * h, "h={h}: {}", m.max_edge_length());
        }
    }

    #[test]
    fn area_defect_is_second_order() {
        for h in [0.5, 0.2, 0.1, 0.05] {
            let m = build_disk_mesh(h).unwrap();
            let rel = (m.total_area() - PI).abs() / PI;
            assert!(rel <= 0.02 * h * h, "h={h}: rel defect {rel:e}");
        }
    }

    #[test]
    fn arc_weights_sum_to_circumference() {
        let m = build_disk_mesh(0.1).unwrap();
        let s: f64 = m.boundary_arc_weights().iter().sum();
        assert!((s - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn triangle_count_grows_quadratically() {
        let a = build_disk_mesh(0.1).unwrap().n_triangles() as f64;
        let b = build_disk_mesh(0.05).unwrap().n_triangles() as f64;
        let ratio = b / a;
        assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn interior_edges_are_delaunay() {
        let m = build_disk_mesh(0.1).unwrap();
        // Sum of opposite angles <= π on every interior edge.
        let mut opp: HashMap<(usize, usize), Vec<f64>> = HashMap::new();
        for tri in m.triangles() {
            for e in 0..3 {
                let (p, q, r) = (tri[e], tri[(e + 1) % 3], tri[(e + 2) % 3]);
                let u = m.node(p) - m.node(r);
                let v = m.node(q) - m.node(r);
                let ang = (u.dot(&v) / (u.norm() * v.norm())).clamp(-1.0, 1.0).acos();
                opp.entry(edge_key(p, q)).or_default().push(ang);
            }
        }
        for (_, a) in opp.iter().filter(|(_, a)| a.len() == 2) {
            assert!(a[0] + a[1] <= PI + 1e-9);
        }
    }

    #[test]
    fn locator_finds_nodes_and_centroids() {
        let m = build_disk_mesh(0.2).unwrap();
        let loc = m.locator();
        for t in 0..m.n_triangles() {
            let (found, bc) = loc.locate(m.centroid(t)).unwrap();
            assert_eq!(found, t);
            assert!(bc.iter().all(|&b| (b - 1.0 / 3.0).abs() < 1e-9));
        }
    }
}
