//! Shared inputs for the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use voxmesh_core::{Point3, ScanFrame, ScanScript, Scene};

pub fn random_points_2d(n: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]).collect()
}

pub fn random_points_3d(n: usize, extent: f64, seed: u64) -> Vec<Point3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Point3::new(rng.gen_range(0.0..extent), rng.gen_range(0.0..extent), rng.gen_range(0.0..extent / 4.0)))
        .collect()
}

/// Street frames of roughly 20k points each.
pub fn street_frames(frames: usize) -> Vec<ScanFrame> {
    let scene = Scene::street(frames as f64 + 15.0, 10);
    ScanScript::street_drive(frames, 200, 120).render(&scene)
}
