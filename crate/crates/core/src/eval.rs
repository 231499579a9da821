//! Mesh quality metrics: surface correctness against ground-truth points and
//! triangle fairness.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point3;
use crate::spatial::{downsample_grid, KnnStore};
use crate::trimesh::TriMesh;

pub const DEFAULT_THRESHOLD: f64 = 0.05;
pub const DEFAULT_SAMPLE_RESOLUTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectnessReport {
    /// Mean distance from mesh samples to the nearest ground-truth point.
    pub accuracy: f64,
    /// Mean distance from ground-truth points to the nearest mesh sample.
    pub completeness: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub threshold: f64,
    pub sample_resolution: f64,
}

/// Per-triangle aggregation of the interior-angle error.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleErrorRule {
    /// `((max - 60°) + (60° - min)) / 2`
    #[default]
    MeanOfExtremes,
    /// `max - min`
    Spread,
    /// `max - 60°`
    MaxOnly,
}

impl std::str::FromStr for AngleErrorRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean_of_extremes" => Ok(Self::MeanOfExtremes),
            "spread" => Ok(Self::Spread),
            "max_only" => Ok(Self::MaxOnly),
            _ => Err(Error::InvalidConfig(format!("unknown angle error rule `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    /// Mean angle error in degrees under `angle_rule`.
    pub max_min_angle_error: f64,
    /// Mean circumradius over shortest edge.
    pub c2se: f64,
    /// Smallest per-triangle circumradius over shortest edge.
    pub c2se_min: f64,
    pub facets: usize,
    pub degenerate_facets: usize,
    pub angle_rule: AngleErrorRule,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub threshold: f64,
    pub sample_resolution: f64,
    pub seed: u64,
    pub angle_rule: AngleErrorRule,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            sample_resolution: DEFAULT_SAMPLE_RESOLUTION,
            seed: 0,
            angle_rule: AngleErrorRule::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub correctness: CorrectnessReport,
    pub fairness: FairnessReport,
    pub mesh_samples: usize,
    pub ground_truth_points: usize,
}

impl EvaluationReport {
    /// Flat `key=value` lines.
    pub fn to_key_values(&self) -> String {
        let c = &self.correctness;
        let f = &self.fairness;
        let rule = serde_json::to_value(f.angle_rule).unwrap();
        format!(
            "accuracy={}\ncompleteness={}\nprecision={}\nrecall={}\nf_score={}\nthreshold={}\nsample_resolution={}\nmax_min_angle_error={}\nc2se={}\nc2se_min={}\nfacets={}\ndegenerate_facets={}\nangle_rule={}\nmesh_samples={}\nground_truth_points={}\n",
            c.accuracy,
            c.completeness,
            c.precision,
            c.recall,
            c.f_score,
            c.threshold,
            c.sample_resolution,
            f.max_min_angle_error,
            f.c2se,
            f.c2se_min,
            f.facets,
            f.degenerate_facets,
            rule.as_str().unwrap(),
            self.mesh_samples,
            self.ground_truth_points
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Number of samples for a facet of the given area, tolerant of rounding in
/// `area / resolution²` landing just above an integer.
fn sample_count(area: f64, resolution: f64) -> usize {
    if area <= 0.0 {
        return 0;
    }
    (area / (resolution * resolution) - 1e-9).ceil().max(0.0) as usize
}

/// Area-proportional uniform samples: `ceil(area / resolution²)` barycentric
/// samples per facet, each facet drawing from its own seeded stream.
pub fn sample_mesh_uniform(mesh: &TriMesh, resolution: f64, seed: u64) -> Result<Vec<Point3>> {
    if mesh.is_empty() {
        return Err(Error::EmptyMesh);
    }
    if !(resolution > 0.0) {
        return Err(Error::InvalidConfig(format!("sample resolution must be positive, got {resolution}")));
    }
    let per_facet: Vec<Vec<Point3>> = (0..mesh.faces.len())
        .into_par_iter()
        .map(|i| {
            let [a, b, c] = mesh.triangle(i);
            let n = sample_count(mesh.face_area(i), resolution);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            (0..n)
                .map(|_| {
                    let (mut r1, mut r2): (f64, f64) = (rng.gen(), rng.gen());
                    if r1 + r2 > 1.0 {
                        (r1, r2) = (1.0 - r1, 1.0 - r2);
                    }
                    a + (b - a) * r1 + (c - a) * r2
                })
                .collect()
        })
        .collect();
    Ok(per_facet.concat())
}

fn nearest_distances(from: &[Point3], to: &[Point3]) -> Vec<f64> {
    let store = KnnStore::from_points(to.iter().enumerate().map(|(i, p)| (i as u32, *p)));
    from.par_iter()
        .map(|p| store.nearest(p).expect("store is non-empty").1)
        .collect()
}

/// Accuracy, completeness, precision, recall, and F-score of `mesh_points`
/// against `ground_truth`. A distance counts as a match when strictly below
/// `threshold`.
pub fn correctness(mesh_points: &[Point3], ground_truth: &[Point3], threshold: f64) -> Result<CorrectnessReport> {
    if mesh_points.is_empty() {
        return Err(Error::EmptyInput("mesh points"));
    }
    if ground_truth.is_empty() {
        return Err(Error::EmptyInput("ground-truth points"));
    }
    let to_gt = nearest_distances(mesh_points, ground_truth);
    let to_mesh = nearest_distances(ground_truth, mesh_points);
    let mean = |d: &[f64]| d.iter().sum::<f64>() / d.len() as f64;
    let within = |d: &[f64]| d.iter().filter(|&&x| x < threshold).count() as f64 / d.len() as f64;
    let precision = within(&to_gt);
    let recall = within(&to_mesh);
    Ok(CorrectnessReport {
        accuracy: mean(&to_gt),
        completeness: mean(&to_mesh),
        precision,
        recall,
        f_score: f_score(precision, recall),
        threshold,
        sample_resolution: DEFAULT_SAMPLE_RESOLUTION,
    })
}

pub fn f_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Interior angles in degrees, circumradius, and shortest edge of a
/// triangle, or `None` when it is degenerate.
pub fn triangle_shape(t: &[Point3; 3]) -> Option<([f64; 3], f64, f64)> {
    let e = [t[1] - t[0], t[2] - t[1], t[0] - t[2]];
    let len = e.map(|v| v.norm());
    let cross = e[0].cross(&e[2]).norm();
    let longest = len.iter().copied().fold(0.0, f64::max);
    if !(cross > 1e-12 * longest * longest) {
        return None;
    }
    let angle = |u: nalgebra::Vector3<f64>, v: nalgebra::Vector3<f64>| u.cross(&v).norm().atan2(u.dot(&v)).to_degrees();
    let angles = [angle(e[0], -e[2]), angle(e[1], -e[0]), angle(e[2], -e[1])];
    let area = 0.5 * cross;
    let circumradius = len[0] * len[1] * len[2] / (4.0 * area);
    let shortest = len.iter().copied().fold(f64::INFINITY, f64::min);
    Some((angles, circumradius, shortest))
}

pub fn angle_error(angles: &[f64; 3], rule: AngleErrorRule) -> f64 {
    let max = angles.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = angles.iter().copied().fold(f64::INFINITY, f64::min);
    match rule {
        AngleErrorRule::MeanOfExtremes => ((max - 60.0) + (60.0 - min)) / 2.0,
        AngleErrorRule::Spread => max - min,
        AngleErrorRule::MaxOnly => max - 60.0,
    }
}

/// Mean angle error and circumradius-to-shortest-edge ratio over the
/// non-degenerate facets.
pub fn fairness(mesh: &TriMesh, rule: AngleErrorRule) -> Result<FairnessReport> {
    let shapes: Vec<Option<([f64; 3], f64, f64)>> = (0..mesh.faces.len())
        .into_par_iter()
        .map(|i| triangle_shape(&mesh.triangle(i)))
        .collect();
    let valid: Vec<&([f64; 3], f64, f64)> = shapes.iter().flatten().collect();
    if valid.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let n = valid.len() as f64;
    let ratios: Vec<f64> = valid.iter().map(|(_, r, s)| r / s).collect();
    Ok(FairnessReport {
        max_min_angle_error: valid.iter().map(|(a, ..)| angle_error(a, rule)).sum::<f64>() / n,
        c2se: ratios.iter().sum::<f64>() / n,
        c2se_min: ratios.iter().copied().fold(f64::INFINITY, f64::min),
        facets: valid.len(),
        degenerate_facets: shapes.len() - valid.len(),
        angle_rule: rule,
    })
}

/// Samples the mesh, downsamples both clouds at the sample resolution, and
/// computes correctness and fairness.
pub fn evaluate_mesh(mesh: &TriMesh, ground_truth: &[Point3], config: &EvalConfig) -> Result<EvaluationReport> {
    if ground_truth.is_empty() {
        return Err(Error::EmptyInput("ground-truth points"));
    }
    let samples = downsample_grid(&sample_mesh_uniform(mesh, config.sample_resolution, config.seed)?, config.sample_resolution);
    let gt = downsample_grid(ground_truth, config.sample_resolution);
    let mut correctness = correctness(&samples, &gt, config.threshold)?;
    correctness.sample_resolution = config.sample_resolution;
    Ok(EvaluationReport {
        correctness,
        fairness: fairness(mesh, config.angle_rule)?,
        mesh_samples: samples.len(),
        ground_truth_points: gt.len(),
    })
}
