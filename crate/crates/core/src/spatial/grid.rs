use std::collections::HashMap;

use super::hash::{grid_key, GridKey, PrimeXorBuild};
use crate::geom::Point3;

/// Voxel-grid filter: one centroid per occupied cell of side `leaf`, in order
/// of each cell's first point.
pub fn downsample_grid(points: &[Point3], leaf: f64) -> Vec<Point3> {
    assert!(leaf > 0.0, "leaf size must be positive");
    let mut slot: HashMap<GridKey, usize, PrimeXorBuild> = HashMap::default();
    let mut acc: Vec<([f64; 3], usize)> = Vec::new();
    for p in points {
        let i = *slot.entry(grid_key(p, leaf)).or_insert_with(|| {
            acc.push(([0.0; 3], 0));
            acc.len() - 1
        });
        let (s, n) = &mut acc[i];
        s[0] += p.x;
        s[1] += p.y;
        s[2] += p.z;
        *n += 1;
    }
    acc.into_iter()
        .map(|(s, n)| {
            let n = n as f64;
            Point3::new(s[0] / n, s[1] / n, s[2] / n)
        })
        .collect()
}
