//! Voxel-wise incremental meshing.
//!
//! Each activated voxel gathers its vertices plus nearby neighbors, projects
//! them onto the voxel's principal plane, triangulates in 2D, and lifts the
//! triangles back to 3D. The fresh facet set is then reconciled with the
//! stored mesh through pull (stored facets fully inside the vertex set),
//! commit (set differences), and push (apply to the map).
//!
//! Voxels are meshed in parallel against a read-only map; all pushes happen
//! afterwards on one thread.

mod delaunay;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{PlaneStats, Point3};
use crate::map::{MeshMap, TriangleFacet, Voxel, VoxelFlag};
use crate::spatial::{FacetKey, GridKey};

pub use delaunay::{delaunay_2d, COLLINEAR_TOLERANCE};

/// Cross products shorter than this mark a facet as zero-area.
pub const MIN_CROSS_NORM: f64 = 1e-12;

/// A vertex expressed in a voxel's plane coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projected2D {
    pub vertex_id: u32,
    pub phi: f64,
    pub rho: f64,
}

/// Facets to apply to the map for one voxel. The two key sets are disjoint.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VoxelMeshDelta {
    pub to_add: BTreeMap<FacetKey, TriangleFacet>,
    pub to_erase: BTreeSet<FacetKey>,
}

impl VoxelMeshDelta {
    pub fn is_empty(&self) -> bool {
        self.to_add.is_empty() && self.to_erase.is_empty()
    }
}

/// In-voxel vertices plus every vertex within `dilation_radius` of one of
/// them. Sorted ascending, without duplicates.
pub fn retrieve_vertices(map: &MeshMap, voxel: &Voxel) -> Vec<u32> {
    let radius = map.config().dilation_radius;
    let mut ids: Vec<u32> = voxel.vertex_ids.clone();
    let mut hits = Vec::new();
    for &id in &voxel.vertex_ids {
        hits.clear();
        map.knn().radius_into(&map.position(id), radius, &mut hits);
        ids.extend(hits.iter().map(|h| h.0));
    }
    ids.sort_unstable();
    ids.dedup();
    ids
}

/// Plane coordinates `((p - q)·u1, (p - q)·u2)` with `q` the voxel mean and
/// `u1`, `u2` its two principal axes.
pub fn project_to_plane(ids: &[u32], positions: &[Point3], stats: &PlaneStats) -> Result<Vec<Projected2D>> {
    if ids.len() < 3 {
        return Err(Error::Degenerate("fewer than three vertices to project"));
    }
    debug_assert_eq!(ids.len(), positions.len());
    let q = stats.mean();
    let [u1, u2, _] = stats.eigenvectors();
    Ok(ids
        .iter()
        .zip(positions)
        .map(|(&vertex_id, p)| {
            let d = p - q;
            Projected2D {
                vertex_id,
                phi: d.dot(&u1),
                rho: d.dot(&u2),
            }
        })
        .collect())
}

/// Builds facets from index triples into `ids`/`positions`.
///
/// With the ids sorted as `α < β < γ`, the normal is
/// `(P_α - P_β) × (P_γ - P_β)`, negated when it faces away from `sensor`; a
/// negated facet publishes its vertices as `(β, α, γ)`. Zero-area triangles
/// are dropped.
pub fn lift_and_orient(triples: &[[usize; 3]], ids: &[u32], positions: &[Point3], sensor: &Point3) -> Vec<TriangleFacet> {
    let mut out = Vec::with_capacity(triples.len());
    for t in triples {
        let mut corners = t.map(|i| (ids[i], positions[i]));
        corners.sort_unstable_by_key(|c| c.0);
        let [(a, pa), (b, pb), (c, pc)] = corners;
        if a == b || b == c {
            continue;
        }
        let n = (pa - pb).cross(&(pc - pb));
        let len = n.norm();
        if !(len >= MIN_CROSS_NORM) {
            continue;
        }
        let mut normal = n / len;
        let center = Point3::from((pa.coords + pb.coords + pc.coords) / 3.0);
        let mut published_order = [a, b, c];
        if (sensor - center).dot(&normal) < 0.0 {
            normal = -normal;
            published_order = [b, a, c];
        }
        out.push(TriangleFacet {
            key: FacetKey::from_unsorted([a, b, c]),
            center,
            normal,
            published_order,
        });
    }
    out
}

/// Stored facets whose three vertices all belong to `ids` (sorted).
pub fn mesh_pull(map: &MeshMap, ids: &[u32]) -> BTreeSet<FacetKey> {
    let mut out = BTreeSet::new();
    for &id in ids {
        let Some(v) = map.vertex(id) else { continue };
        for key in &v.tri_list {
            if key.ids().iter().all(|i| ids.binary_search(i).is_ok()) {
                out.insert(*key);
            }
        }
    }
    out
}

/// `to_add = fresh \ pulled`, `to_erase = pulled \ fresh`.
pub fn mesh_commit(fresh: &BTreeMap<FacetKey, TriangleFacet>, pulled: &BTreeSet<FacetKey>) -> VoxelMeshDelta {
    VoxelMeshDelta {
        to_add: fresh
            .iter()
            .filter(|(k, _)| !pulled.contains(k))
            .map(|(k, f)| (*k, *f))
            .collect(),
        to_erase: pulled.iter().filter(|k| !fresh.contains_key(k)).copied().collect(),
    }
}

/// Applies erasures, then additions.
pub fn mesh_push(map: &mut MeshMap, delta: &VoxelMeshDelta) -> Result<()> {
    for key in &delta.to_erase {
        map.remove_facet(key)?;
    }
    for facet in delta.to_add.values() {
        map.insert_facet(*facet)?;
    }
    Ok(())
}

/// Why a voxel produced no triangulation in a pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkipReason {
    MissingVoxel,
    TooFewVertices(usize),
    Collinear,
}

/// Everything computed for one voxel during the parallel phase.
#[derive(Debug, Clone)]
pub struct VoxelMeshOutcome {
    pub key: GridKey,
    pub retrieved: Vec<u32>,
    /// Fresh facets from this pass's triangulation.
    pub facets: BTreeMap<FacetKey, TriangleFacet>,
    pub pulled: BTreeSet<FacetKey>,
    pub delta: VoxelMeshDelta,
}

/// Retrieve, project, triangulate, lift, pull, and commit one voxel.
pub fn mesh_voxel(map: &MeshMap, key: &GridKey, sensor: &Point3) -> std::result::Result<VoxelMeshOutcome, SkipReason> {
    let voxel = map.voxel(key).ok_or(SkipReason::MissingVoxel)?;
    let retrieved = retrieve_vertices(map, voxel);
    if retrieved.len() < 3 {
        return Err(SkipReason::TooFewVertices(retrieved.len()));
    }
    let positions: Vec<Point3> = retrieved.iter().map(|&i| map.position(i)).collect();
    let projected = project_to_plane(&retrieved, &positions, &voxel.stats).map_err(|_| SkipReason::TooFewVertices(retrieved.len()))?;
    let pts2: Vec<[f64; 2]> = projected.iter().map(|p| [p.phi, p.rho]).collect();
    let triples = delaunay_2d(&pts2).map_err(|_| SkipReason::Collinear)?;
    let facets: BTreeMap<FacetKey, TriangleFacet> = lift_and_orient(&triples, &retrieved, &positions, sensor)
        .into_iter()
        .map(|f| (f.key, f))
        .collect();
    let pulled = mesh_pull(map, &retrieved);
    let delta = mesh_commit(&facets, &pulled);
    Ok(VoxelMeshOutcome {
        key: *key,
        retrieved,
        facets,
        pulled,
        delta,
    })
}

/// Summary of one [`Mesher::update`] pass.
#[derive(Debug, Clone, Default)]
pub struct MeshPassReport {
    pub processed: Vec<GridKey>,
    pub skipped: Vec<(GridKey, SkipReason)>,
    pub added: usize,
    pub erased: usize,
    /// Per-voxel results, kept only when tracing is enabled.
    pub outcomes: Vec<VoxelMeshOutcome>,
}

/// Merges per-voxel deltas from one pass.
///
/// A facet survives if any voxel's fresh set contains it: erasures requested
/// by one voxel are dropped for facets another voxel just produced, and
/// duplicate additions collapse to one.
pub fn merge_deltas<'a>(outcomes: impl IntoIterator<Item = &'a VoxelMeshOutcome> + Clone) -> VoxelMeshDelta {
    let kept: BTreeSet<FacetKey> = outcomes.clone().into_iter().flat_map(|o| o.facets.keys().copied()).collect();
    let mut merged = VoxelMeshDelta::default();
    for o in outcomes {
        for (k, f) in &o.delta.to_add {
            merged.to_add.entry(*k).or_insert(*f);
        }
        merged.to_erase.extend(o.delta.to_erase.iter().filter(|k| !kept.contains(k)));
    }
    merged
}

/// Runs meshing passes on a fixed number of worker threads.
pub struct Mesher {
    pool: Option<rayon::ThreadPool>,
    trace: bool,
}

impl Mesher {
    /// `workers <= 1` runs the per-voxel phase on the calling thread.
    pub fn new(workers: usize) -> Result<Self> {
        let pool = if workers > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .build()
                    .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?,
            )
        } else {
            None
        };
        Ok(Self { pool, trace: false })
    }

    /// Keep per-voxel outcomes in the pass report.
    pub fn with_trace(mut self, trace: bool) -> Self {
        self.trace = trace;
        self
    }

    pub fn workers(&self) -> usize {
        self.pool.as_ref().map_or(1, |p| p.current_num_threads())
    }

    /// One full meshing pass over `activated` (typically the keys reported by
    /// the latest registration). Every listed voxel ends Deactivated.
    pub fn update(&self, map: &mut MeshMap, activated: &[GridKey], sensor: &Point3) -> Result<MeshPassReport> {
        let shared: &MeshMap = map;
        let results: Vec<_> = match &self.pool {
            Some(pool) => pool.install(|| activated.par_iter().map(|k| (*k, mesh_voxel(shared, k, sensor))).collect()),
            None => activated.iter().map(|k| (*k, mesh_voxel(shared, k, sensor))).collect(),
        };

        let mut report = MeshPassReport::default();
        let mut outcomes = Vec::with_capacity(results.len());
        for (key, r) in results {
            match r {
                Ok(o) => {
                    report.processed.push(key);
                    outcomes.push(o);
                }
                Err(reason) => report.skipped.push((key, reason)),
            }
        }
        let merged = merge_deltas(&outcomes);
        report.added = merged.to_add.len();
        report.erased = merged.to_erase.len();
        mesh_push(map, &merged)?;
        for key in activated {
            map.set_voxel_flag(key, VoxelFlag::Deactivated);
        }
        if self.trace {
            report.outcomes = outcomes;
        }
        Ok(report)
    }
}

/// Single pass on the calling thread; see [`Mesher::update`].
pub fn mesh_update(map: &mut MeshMap, activated: &[GridKey], sensor: &Point3) -> Result<MeshPassReport> {
    Mesher::new(1)?.update(map, activated, sensor)
}
