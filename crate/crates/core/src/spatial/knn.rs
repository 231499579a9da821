//! Exact nearest-neighbor and radius queries over a growing point set.
//!
//! Points land in a small linear buffer; when it fills, the buffer is merged
//! with the run of occupied levels below the first free one and a balanced
//! kd-tree is rebuilt for that level (binary-counter scheme). Each point is
//! therefore rebuilt O(log n) times over its lifetime and no insertion ever
//! rebuilds the whole structure unless it is the carry into the top level.

use crate::error::{Error, Result};
use crate::geom::Point3;

const BUFFER_CAPACITY: usize = 64;
const LEAF_SIZE: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    pos: [f64; 3],
    id: u32,
}

#[inline]
fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

#[derive(Debug, Clone, Copy)]
struct Node {
    lo: [f64; 3],
    hi: [f64; 3],
    /// Entries `[start, end)` of the subtree; `left == u32::MAX` marks a leaf.
    start: u32,
    end: u32,
    left: u32,
    right: u32,
}

impl Node {
    fn is_leaf(&self) -> bool {
        self.left == u32::MAX
    }

    #[inline]
    fn box_dist2(&self, q: &[f64; 3]) -> f64 {
        let mut d = 0.0;
        for k in 0..3 {
            let v = if q[k] < self.lo[k] {
                self.lo[k] - q[k]
            } else if q[k] > self.hi[k] {
                q[k] - self.hi[k]
            } else {
                0.0
            };
            d += v * v;
        }
        d
    }
}

/// Immutable balanced kd-tree with bounding boxes on every node.
#[derive(Debug, Clone)]
struct StaticTree {
    entries: Vec<Entry>,
    nodes: Vec<Node>,
}

impl StaticTree {
    fn build(mut entries: Vec<Entry>) -> Self {
        let mut nodes = Vec::with_capacity(2 * entries.len() / LEAF_SIZE + 2);
        if !entries.is_empty() {
            let n = entries.len();
            Self::build_node(&mut entries, 0, n, &mut nodes);
        }
        Self { entries, nodes }
    }

    fn build_node(entries: &mut [Entry], start: usize, end: usize, nodes: &mut Vec<Node>) -> u32 {
        let slice = &mut entries[start..end];
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for e in slice.iter() {
            for k in 0..3 {
                lo[k] = lo[k].min(e.pos[k]);
                hi[k] = hi[k].max(e.pos[k]);
            }
        }
        let index = nodes.len();
        nodes.push(Node {
            lo,
            hi,
            start: start as u32,
            end: end as u32,
            left: u32::MAX,
            right: u32::MAX,
        });
        if slice.len() <= LEAF_SIZE {
            return index as u32;
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap_or(0);
        let mid = slice.len() / 2;
        slice.select_nth_unstable_by(mid, |a, b| a.pos[axis].total_cmp(&b.pos[axis]));
        let left = Self::build_node(entries, start, start + mid, nodes);
        let right = Self::build_node(entries, start + mid, end, nodes);
        nodes[index].left = left;
        nodes[index].right = right;
        index as u32
    }

    #[cfg(test)]
    fn len(&self) -> usize {
        self.entries.len()
    }

    fn nearest(&self, q: &[f64; 3], best: &mut Option<(f64, u32)>) {
        if self.nodes.is_empty() {
            return;
        }
        let mut stack: Vec<(u32, f64)> = Vec::with_capacity(64);
        stack.push((0, self.nodes[0].box_dist2(q)));
        while let Some((ni, bd)) = stack.pop() {
            if let Some((bd2, _)) = best {
                if bd > *bd2 {
                    continue;
                }
            }
            let node = &self.nodes[ni as usize];
            if node.is_leaf() {
                for e in &self.entries[node.start as usize..node.end as usize] {
                    let d = dist2(&e.pos, q);
                    let better = match best {
                        None => true,
                        Some((bd2, bid)) => d < *bd2 || (d == *bd2 && e.id < *bid),
                    };
                    if better {
                        *best = Some((d, e.id));
                    }
                }
            } else {
                let l = node.left;
                let r = node.right;
                let dl = self.nodes[l as usize].box_dist2(q);
                let dr = self.nodes[r as usize].box_dist2(q);
                // Push the farther child first so the nearer one is visited first.
                if dl <= dr {
                    stack.push((r, dr));
                    stack.push((l, dl));
                } else {
                    stack.push((l, dl));
                    stack.push((r, dr));
                }
            }
        }
    }

    fn within(&self, q: &[f64; 3], r2: f64, out: &mut Vec<(u32, f64)>) {
        if self.nodes.is_empty() {
            return;
        }
        let mut stack: Vec<u32> = vec![0];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            if node.box_dist2(q) > r2 {
                continue;
            }
            if node.is_leaf() {
                for e in &self.entries[node.start as usize..node.end as usize] {
                    let d = dist2(&e.pos, q);
                    if d <= r2 {
                        out.push((e.id, d));
                    }
                }
            } else {
                stack.push(node.left);
                stack.push(node.right);
            }
        }
    }
}

/// Incremental exact kNN store over `(id, position)` entries.
#[derive(Debug, Clone, Default)]
pub struct KnnStore {
    buffer: Vec<Entry>,
    levels: Vec<Option<StaticTree>>,
    len: usize,
}

impl KnnStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Bulk construction: a single balanced tree.
    pub fn from_points(points: impl IntoIterator<Item = (u32, Point3)>) -> Self {
        let entries: Vec<Entry> = points
            .into_iter()
            .map(|(id, p)| Entry {
                pos: [p.x, p.y, p.z],
                id,
            })
            .collect();
        let len = entries.len();
        let mut store = Self::new();
        if len == 0 {
            return store;
        }
        let mut level = 0;
        while (BUFFER_CAPACITY << level) < len {
            level += 1;
        }
        store.levels.resize_with(level + 1, || None);
        store.levels[level] = Some(StaticTree::build(entries));
        store.len = len;
        store
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn insert(&mut self, id: u32, p: Point3) {
        debug_assert!(p.x.is_finite() && p.y.is_finite() && p.z.is_finite());
        self.buffer.push(Entry {
            pos: [p.x, p.y, p.z],
            id,
        });
        self.len += 1;
        if self.buffer.len() >= BUFFER_CAPACITY {
            self.flush();
        }
    }

    fn flush(&mut self) {
        let mut carry = std::mem::take(&mut self.buffer);
        let mut level = 0;
        loop {
            if level == self.levels.len() {
                self.levels.push(None);
            }
            match self.levels[level].take() {
                Some(tree) => {
                    carry.extend(tree.entries);
                    level += 1;
                }
                None => break,
            }
        }
        self.levels[level] = Some(StaticTree::build(carry));
    }

    /// Closest entry and its Euclidean distance. Ties go to the lower id.
    pub fn nearest(&self, p: &Point3) -> Result<(u32, f64)> {
        let q = [p.x, p.y, p.z];
        let mut best: Option<(f64, u32)> = None;
        for e in &self.buffer {
            let d = dist2(&e.pos, &q);
            let better = match best {
                None => true,
                Some((bd, bid)) => d < bd || (d == bd && e.id < bid),
            };
            if better {
                best = Some((d, e.id));
            }
        }
        for tree in self.levels.iter().flatten() {
            tree.nearest(&q, &mut best);
        }
        best.map(|(d, id)| (id, d.sqrt())).ok_or(Error::EmptyStore)
    }

    /// All entries with distance `<= radius`, as `(id, distance)` pairs in
    /// no particular order.
    pub fn radius(&self, p: &Point3, radius: f64) -> Vec<(u32, f64)> {
        let mut out = Vec::new();
        self.radius_into(p, radius, &mut out);
        for e in out.iter_mut() {
            e.1 = e.1.sqrt();
        }
        out
    }

    /// Like [`KnnStore::radius`] but appends `(id, squared distance)`.
    pub fn radius_into(&self, p: &Point3, radius: f64, out: &mut Vec<(u32, f64)>) {
        let q = [p.x, p.y, p.z];
        let r2 = radius * radius;
        for e in &self.buffer {
            let d = dist2(&e.pos, &q);
            if d <= r2 {
                out.push((e.id, d));
            }
        }
        for tree in self.levels.iter().flatten() {
            tree.within(&q, r2, out);
        }
    }

    /// Number of rebuilt levels currently holding points.
    pub fn level_count(&self) -> usize {
        self.levels.iter().filter(|l| l.is_some()).count()
    }

    #[cfg(test)]
    fn tree_sizes(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.as_ref().map_or(0, StaticTree::len)).collect()
    }
}
