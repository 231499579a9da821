//! 2D Delaunay triangulation.
//!
//! Points are inserted in lexicographic `(x, y)` order, so every new point
//! lies outside the current convex hull and is connected to the hull edges it
//! sees. Lawson edge flips then restore the empty-circumcircle property.
//! Orientation and in-circle tests use adaptive exact arithmetic.
//!
//! Ties on cocircular quadruples keep the diagonal whose sorted vertex-index
//! pair is lexicographically smaller, so the output does not depend on the
//! flip order.

use robust::{incircle, orient2d, Coord};

use crate::error::{Error, Result};

const EMPTY: usize = usize::MAX;

/// Collinearity tolerance: inputs whose points all lie within this distance
/// of a common line are rejected as degenerate.
pub const COLLINEAR_TOLERANCE: f64 = 1e-9;

#[inline]
fn coord(p: &[f64; 2]) -> Coord<f64> {
    Coord { x: p[0], y: p[1] }
}

#[inline]
fn orient(a: &[f64; 2], b: &[f64; 2], c: &[f64; 2]) -> f64 {
    orient2d(coord(a), coord(b), coord(c))
}

#[inline]
fn next_half(e: usize) -> usize {
    if e % 3 == 2 {
        e - 2
    } else {
        e + 1
    }
}

#[inline]
fn prev_half(e: usize) -> usize {
    if e % 3 == 0 {
        e + 2
    } else {
        e - 1
    }
}

fn edge_rank(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

struct Triangulator<'a> {
    pts: &'a [[f64; 2]],
    /// Start vertex of each halfedge; triangle `t` owns halfedges `3t..3t+3`.
    triangles: Vec<usize>,
    /// Opposite halfedge, or `EMPTY` on the hull.
    halfedges: Vec<usize>,
    hull_next: Vec<usize>,
    hull_prev: Vec<usize>,
    /// Halfedge running from `v` to `hull_next[v]`.
    hull_edge: Vec<usize>,
    stack: Vec<usize>,
}

impl<'a> Triangulator<'a> {
    fn new(pts: &'a [[f64; 2]]) -> Self {
        let n = pts.len();
        Self {
            pts,
            triangles: Vec::with_capacity(6 * n),
            halfedges: Vec::with_capacity(6 * n),
            hull_next: vec![EMPTY; n],
            hull_prev: vec![EMPTY; n],
            hull_edge: vec![EMPTY; n],
            stack: Vec::new(),
        }
    }

    fn link(&mut self, a: usize, b: usize) {
        self.halfedges[a] = b;
        if b != EMPTY {
            self.halfedges[b] = a;
        }
    }

    /// Appends a CCW triangle and returns its first halfedge.
    fn add_triangle(&mut self, i0: usize, i1: usize, i2: usize, a: usize, b: usize, c: usize) -> usize {
        let t = self.triangles.len();
        self.triangles.extend_from_slice(&[i0, i1, i2]);
        self.halfedges.extend_from_slice(&[EMPTY, EMPTY, EMPTY]);
        self.link(t, a);
        self.link(t + 1, b);
        self.link(t + 2, c);
        t
    }

    fn is_visible(&self, v: usize, p: usize) -> bool {
        let w = self.hull_next[v];
        orient(&self.pts[v], &self.pts[w], &self.pts[p]) < 0.0
    }

    fn legalize_all(&mut self) {
        while let Some(a) = self.stack.pop() {
            let b = self.halfedges[a];
            if b == EMPTY {
                continue;
            }
            // Triangle (p0, p1, pl) on the `a` side, (p1, p0, pr) across it.
            let a1 = next_half(a);
            let a2 = prev_half(a);
            let b1 = next_half(b);
            let b2 = prev_half(b);
            let p0 = self.triangles[a];
            let p1 = self.triangles[a1];
            let pl = self.triangles[a2];
            let pr = self.triangles[b2];

            let det = incircle(
                coord(&self.pts[p0]),
                coord(&self.pts[p1]),
                coord(&self.pts[pl]),
                coord(&self.pts[pr]),
            );
            let flip = det > 0.0 || (det == 0.0 && edge_rank(pl, pr) < edge_rank(p0, p1));
            if !flip {
                continue;
            }

            let ta = a - a % 3;
            let tb = b - b % 3;
            let h_a1 = self.halfedges[a1];
            let h_a2 = self.halfedges[a2];
            let h_b1 = self.halfedges[b1];
            let h_b2 = self.halfedges[b2];

            // New triangles (pl, p0, pr) and (pr, p1, pl).
            self.triangles[ta] = pl;
            self.triangles[ta + 1] = p0;
            self.triangles[ta + 2] = pr;
            self.triangles[tb] = pr;
            self.triangles[tb + 1] = p1;
            self.triangles[tb + 2] = pl;
            self.link(ta, h_a2);
            self.link(ta + 1, h_b1);
            self.link(ta + 2, tb + 2);
            self.link(tb, h_b2);
            self.link(tb + 1, h_a1);

            for h in [ta, ta + 1, tb, tb + 1] {
                if self.halfedges[h] == EMPTY {
                    self.hull_edge[self.triangles[h]] = h;
                }
                self.stack.push(h);
            }
        }
    }

    fn run(mut self, order: &[usize]) -> Result<Vec<[usize; 3]>> {
        let pts = self.pts;
        // Seed: the collinear prefix plus the first point off its line.
        let s0 = order[0];
        let s1 = order[1];
        let k = (2..order.len())
            .find(|&k| orient(&pts[s0], &pts[s1], &pts[order[k]]) != 0.0)
            .ok_or(Error::Degenerate("all points collinear"))?;
        let apex = order[k];
        let ccw = orient(&pts[s0], &pts[s1], &pts[apex]) > 0.0;
        let chain = &order[..k];

        let mut prev_spoke = EMPTY;
        for w in chain.windows(2) {
            let (u, v) = (w[0], w[1]);
            // Halfedges: base edge, edge to apex side, edge from apex side.
            let t = if ccw {
                let t = self.add_triangle(u, v, apex, EMPTY, EMPTY, prev_spoke);
                prev_spoke = t + 1;
                t
            } else {
                let t = self.add_triangle(v, u, apex, EMPTY, prev_spoke, EMPTY);
                prev_spoke = t + 2;
                t
            };
            self.stack.extend([t, t + 1, t + 2]);
        }
        let tris = self.triangles.len() / 3;
        let first_tri = 0;
        let last_tri = 3 * (tris - 1);
        if ccw {
            // Hull: s0 -> s1 -> ... -> s_{k-1} -> apex -> s0.
            for (i, w) in chain.windows(2).enumerate() {
                self.hull_next[w[0]] = w[1];
                self.hull_prev[w[1]] = w[0];
                self.hull_edge[w[0]] = 3 * i;
            }
            let last = chain[k - 1];
            self.hull_next[last] = apex;
            self.hull_prev[apex] = last;
            self.hull_edge[last] = last_tri + 1;
            self.hull_next[apex] = s0;
            self.hull_prev[s0] = apex;
            self.hull_edge[apex] = first_tri + 2;
        } else {
            // Hull: s0 -> apex -> s_{k-1} -> ... -> s1 -> s0.
            for (i, w) in chain.windows(2).enumerate() {
                self.hull_next[w[1]] = w[0];
                self.hull_prev[w[0]] = w[1];
                self.hull_edge[w[1]] = 3 * i;
            }
            let last = chain[k - 1];
            self.hull_next[s0] = apex;
            self.hull_prev[apex] = s0;
            self.hull_edge[s0] = first_tri + 1;
            self.hull_next[apex] = last;
            self.hull_prev[last] = apex;
            self.hull_edge[apex] = last_tri + 2;
        }
        self.legalize_all();

        let mut last_inserted = apex;
        for &p in &order[k + 1..] {
            self.insert_outside(p, last_inserted);
            last_inserted = p;
        }

        Ok(self.triangles.chunks_exact(3).map(|t| [t[0], t[1], t[2]]).collect())
    }

    fn insert_outside(&mut self, p: usize, near: usize) {
        // Any visible hull edge; the previous insertion is almost always adjacent.
        let mut start = if self.is_visible(near, p) {
            near
        } else if self.is_visible(self.hull_prev[near], p) {
            self.hull_prev[near]
        } else {
            let mut v = near;
            loop {
                v = self.hull_next[v];
                if self.is_visible(v, p) {
                    break v;
                }
                assert!(v != near, "point {p} sees no hull edge");
            }
        };
        // Visible edges form one contiguous chain; rewind to its start.
        while self.is_visible(self.hull_prev[start], p) {
            start = self.hull_prev[start];
        }

        let first = start;
        let mut v = start;
        let mut prev_spoke = EMPTY;
        let mut first_spoke = EMPTY;
        loop {
            let w = self.hull_next[v];
            let hull_h = self.hull_edge[v];
            // Triangle (w, v, p): base w->v, v->p, p->w.
            let t = self.add_triangle(w, v, p, hull_h, prev_spoke, EMPTY);
            if first_spoke == EMPTY {
                first_spoke = t + 1;
            }
            prev_spoke = t + 2;
            self.stack.extend([t, t + 1, t + 2]);
            if v != first {
                self.hull_next[v] = EMPTY;
                self.hull_prev[v] = EMPTY;
                self.hull_edge[v] = EMPTY;
            }
            v = w;
            if !self.is_visible(v, p) {
                break;
            }
        }
        let last = v;
        self.hull_next[first] = p;
        self.hull_prev[p] = first;
        self.hull_edge[first] = first_spoke;
        self.hull_next[p] = last;
        self.hull_prev[last] = p;
        self.hull_edge[p] = prev_spoke;
        self.legalize_all();
    }
}

/// Delaunay triangulation of `points`; returns CCW index triples into the
/// input slice. Exact duplicate points are collapsed onto the lowest index.
pub fn delaunay_2d(points: &[[f64; 2]]) -> Result<Vec<[usize; 3]>> {
    if points.len() < 3 {
        return Err(Error::Degenerate("fewer than three points"));
    }
    if points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(Error::Degenerate("non-finite coordinate"));
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a][0]
            .total_cmp(&points[b][0])
            .then(points[a][1].total_cmp(&points[b][1]))
            .then(a.cmp(&b))
    });
    order.dedup_by(|b, a| points[*a] == points[*b]);
    if order.len() < 3 {
        return Err(Error::Degenerate("fewer than three distinct points"));
    }
    if nearly_collinear(points, &order) {
        return Err(Error::Degenerate("all points collinear"));
    }
    Triangulator::new(points).run(&order)
}

fn nearly_collinear(points: &[[f64; 2]], order: &[usize]) -> bool {
    let a = points[order[0]];
    let b = points[*order.last().unwrap()];
    let d = [b[0] - a[0], b[1] - a[1]];
    let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
    if len == 0.0 {
        return true;
    }
    order.iter().all(|&i| {
        let p = points[i];
        ((p[0] - a[0]) * d[1] - (p[1] - a[1]) * d[0]).abs() / len <= COLLINEAR_TOLERANCE
    })
}


#[cfg(test)]
mod tests {
    use super::oracle::*;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::{BTreeSet, HashSet, VecDeque};

    fn check_delaunay(pts: &[[f64; 2]], tris: &[[usize; 3]]) {
        for t in tris {
            let (a, b, c) = (pts[t[0]], pts[t[1]], pts[t[2]]);
            // Exact sign: near-collinear inputs make the float area unreliable.
            assert!(orient(&a, &b, &c) > 0.0, "triangle {t:?} not CCW");
            for (i, &d) in pts.iter().enumerate() {
                if t.contains(&i) {
                    continue;
                }
                assert!(!strictly_inside(a, b, c, d, 1e-9), "point {i} inside circumcircle of {t:?}");
            }
        }
        let total: f64 = tris.iter().map(|t| area(pts[t[0]], pts[t[1]], pts[t[2]])).sum();
        let hull = hull_area(pts);
        assert!((total - hull).abs() <= 1e-9 * hull, "area {total} vs hull {hull}");
        // Each undirected edge is shared by at most two triangles, with
        // opposite orientations.
        let mut directed = HashSet::new();
        for t in tris {
            for i in 0..3 {
                assert!(directed.insert((t[i], t[(i + 1) % 3])), "duplicate directed edge");
            }
        }
    }

    #[test]
    fn three_points_one_triangle() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let tris = delaunay_2d(&pts).unwrap();
        assert_eq!(tris.len(), 1);
        check_delaunay(&pts, &tris);
    }

    #[test]
    fn unit_square_tie_uses_lowest_diagonal() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let tris = delaunay_2d(&pts).unwrap();
        assert_eq!(tris.len(), 2);
        check_delaunay(&pts, &tris);
        // Candidate diagonals (0,2) and (1,3); (0,2) ranks lower.
        assert!(tris.iter().all(|t| t.contains(&0) && t.contains(&2)));

        // Same square, ids permuted so that (1,3) becomes the low diagonal pair.
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let tris = delaunay_2d(&pts).unwrap();
        assert!(tris.iter().all(|t| t.contains(&0) && t.contains(&3)) || tris.iter().all(|t| t.contains(&1) && t.contains(&2)));
        let diag: BTreeSet<(usize, usize)> = tris
            .iter()
            .flat_map(|t| (0..3).map(move |i| edge_rank(t[i], t[(i + 1) % 3])))
            .collect();
        assert!(diag.contains(&(0, 3)));
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(delaunay_2d(&[[0.0, 0.0], [1.0, 1.0]]), Err(Error::Degenerate(_))));
        let line: Vec<[f64; 2]> = (0..10).map(|i| [i as f64, 2.0 * i as f64]).collect();
        assert!(matches!(delaunay_2d(&line), Err(Error::Degenerate(_))));
        let nearly: Vec<[f64; 2]> = (0..10).map(|i| [i as f64, if i == 5 { 1e-12 } else { 0.0 }]).collect();
        assert!(matches!(delaunay_2d(&nearly), Err(Error::Degenerate(_))));
        let dup = [[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]];
        assert!(matches!(delaunay_2d(&dup), Err(Error::Degenerate(_))));
    }

    #[test]
    fn duplicates_are_collapsed() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
        let tris = delaunay_2d(&pts).unwrap();
        assert_eq!(tris.len(), 2);
        assert!(tris.iter().all(|t| !t.contains(&3)));
    }

    #[test]
    fn collinear_prefix_and_grid() {
        // Vertical collinear start, then a lattice with many cocircular sets.
        let mut pts = Vec::new();
        for i in 0..8 {
            for j in 0..8 {
                pts.push([i as f64 * 0.1, j as f64 * 0.1]);
            }
        }
        let tris = delaunay_2d(&pts).unwrap();
        assert_eq!(tris.len(), 2 * 7 * 7);
        check_delaunay(&pts, &tris);

        let mut pts: Vec<[f64; 2]> = (0..6).map(|i| [0.0, i as f64]).collect();
        pts.push([-3.0, 2.5]);
        pts.push([4.0, -1.0]);
        let tris = delaunay_2d(&pts).unwrap();
        check_delaunay(&pts, &tris);
    }

    #[test]
    fn random_sets_are_delaunay() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let n = rng.gen_range(3..120);
            let pts: Vec<[f64; 2]> = (0..n).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
            let tris = delaunay_2d(&pts).unwrap();
            check_delaunay(&pts, &tris);
        }
    }

    #[test]
    fn cocircular_ring() {
        let n = 24;
        let mut pts: Vec<[f64; 2]> = (0..n)
            .map(|i| {
                let a = i as f64 / n as f64 * std::f64::consts::TAU;
                [a.cos(), a.sin()]
            })
            .collect();
        pts.push([0.0, 0.0]);
        let tris = delaunay_2d(&pts).unwrap();
        check_delaunay(&pts, &tris);
    }

    fn min_angle(pts: &[[f64; 2]], tris: &BTreeSet<[usize; 3]>) -> f64 {
        let mut best = f64::INFINITY;
        for t in tris {
            for i in 0..3 {
                let o = pts[t[i]];
                let a = pts[t[(i + 1) % 3]];
                let b = pts[t[(i + 2) % 3]];
                let u = [a[0] - o[0], a[1] - o[1]];
                let v = [b[0] - o[0], b[1] - o[1]];
                let cos = (u[0] * v[0] + u[1] * v[1]) / ((u[0].hypot(u[1])) * (v[0].hypot(v[1])));
                best = best.min(cos.clamp(-1.0, 1.0).acos());
            }
        }
        best
    }

    fn canonical(t: [usize; 3]) -> [usize; 3] {
        // Rotate so the smallest index leads, preserving orientation.
        let m = (0..3).min_by_key(|&i| t[i]).unwrap();
        [t[m], t[(m + 1) % 3], t[(m + 2) % 3]]
    }

    /// Breadth-first enumeration of every triangulation reachable by edge flips.
    fn flip_closure(pts: &[[f64; 2]], start: BTreeSet<[usize; 3]>) -> Vec<BTreeSet<[usize; 3]>> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        let mut queue = VecDeque::new();
        seen.insert(start.clone());
        queue.push_back(start);
        while let Some(tri) = queue.pop_front() {
            let list: Vec<[usize; 3]> = tri.iter().copied().collect();
            for (i, t) in list.iter().enumerate() {
                for e in 0..3 {
                    let (a, b, c) = (t[e], t[(e + 1) % 3], t[(e + 2) % 3]);
                    for u in &list[i + 1..] {
                        for f in 0..3 {
                            if u[f] == b && u[(f + 1) % 3] == a {
                                let d = u[(f + 2) % 3];
                                // Convex quad a, d, b, c required for a flip.
                                if area(pts[c], pts[a], pts[d]) > 1e-12 && area(pts[d], pts[b], pts[c]) > 1e-12 {
                                    let mut next = tri.clone();
                                    next.remove(t);
                                    next.remove(u);
                                    next.insert(canonical([c, a, d]));
                                    next.insert(canonical([d, b, c]));
                                    if seen.insert(next.clone()) {
                                        queue.push_back(next);
                                    }
                                }
                            }
                        }
                    }
                }
            }
            out.push(tri);
        }
        out
    }

    #[test]
    fn maximizes_minimum_angle_on_small_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..40 {
            let n = rng.gen_range(4..=8);
            let pts: Vec<[f64; 2]> = (0..n).map(|_| [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]).collect();
            let del: BTreeSet<[usize; 3]> = delaunay_2d(&pts).unwrap().into_iter().map(canonical).collect();
            let best = min_angle(&pts, &del);
            for alt in flip_closure(&pts, del.clone()) {
                assert!(best >= min_angle(&pts, &alt) - 1e-12);
            }
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]
        #[test]
        fn arbitrary_point_sets(raw in proptest::collection::vec((-10i32..10, -10i32..10), 3..60), scale in 0.001f64..100.0) {
            // Integer lattices exercise collinear and cocircular configurations.
            let pts: Vec<[f64; 2]> = raw.iter().map(|&(x, y)| [x as f64 * scale, y as f64 * scale]).collect();
            match delaunay_2d(&pts) {
                Ok(tris) => check_delaunay(&pts, &tris),
                Err(Error::Degenerate(_)) => {
                    proptest::prop_assert!(hull_area(&pts) <= 1e-9 * scale * scale * 400.0);
                }
                Err(e) => panic!("{e}"),
            }
        }
    }
}
