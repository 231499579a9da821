//! Publishing the live mesh: region-wise snapshots, file export, and depth
//! rasterization.

mod export;
mod raster;

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

pub use export::{read_id_map, read_mesh, write_mesh, MeshFormat};
pub use raster::{rasterize_depth, read_depth, reinforce_points, write_depth, DepthImage, NO_HIT};

use crate::geom::{Point3, Vec3};
use crate::map::MeshMap;
use crate::spatial::{FacetKey, GridKey};
use crate::trimesh::TriMesh;

/// Self-contained copy of the published mesh.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MeshSnapshot {
    /// Map vertex id for each local vertex index.
    pub vertex_ids: Vec<u32>,
    /// Faces in published order, indexing `mesh.vertices`.
    pub mesh: TriMesh,
    /// Stored facet normal for each face.
    pub normals: Vec<Vec3>,
    pub facet_keys: Vec<FacetKey>,
    pub frame_counter: u64,
}

impl MeshSnapshot {
    pub fn facet_count(&self) -> usize {
        self.mesh.faces.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_ids.len()
    }
}

#[derive(Debug, Clone, Copy)]
struct CopiedFacet {
    key: FacetKey,
    published_order: [u32; 3],
    normal: Vec3,
}

/// What one [`Broadcaster::sync`] call copied.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SyncStats {
    pub regions_copied: usize,
    pub facets_copied: usize,
}

/// Persistent copy of the map's facets, refreshed one region at a time.
#[derive(Debug, Default)]
pub struct Broadcaster {
    regions: BTreeMap<GridKey, Vec<CopiedFacet>>,
    positions: HashMap<u32, Point3>,
    frame_counter: u64,
}

impl Broadcaster {
    pub fn new() -> Self {
        Self::default()
    }

    /// Copies every region flagged as needing sync and marks it synced.
    pub fn sync(&mut self, map: &mut MeshMap) -> SyncStats {
        let mut stats = SyncStats::default();
        for key in map.regions_requiring_sync() {
            let region = map.region(&key).expect("listed region exists");
            let copied: Vec<CopiedFacet> = region
                .facets
                .iter()
                .map(|k| {
                    let f = map.facet(k).expect("region facet exists");
                    CopiedFacet {
                        key: f.key,
                        published_order: f.published_order,
                        normal: f.normal,
                    }
                })
                .collect();
            for f in &copied {
                for id in f.key.ids() {
                    self.positions.entry(id).or_insert_with(|| map.position(id));
                }
            }
            stats.regions_copied += 1;
            stats.facets_copied += copied.len();
            if copied.is_empty() {
                self.regions.remove(&key);
            } else {
                self.regions.insert(key, copied);
            }
            map.mark_synced(&key);
        }
        self.frame_counter += 1;
        stats
    }

    /// Builds a snapshot from the copied state. Faces are ordered by facet
    /// key and vertices by map id, so equal maps give equal snapshots.
    pub fn snapshot(&self) -> MeshSnapshot {
        let mut facets: Vec<&CopiedFacet> = self.regions.values().flatten().collect();
        facets.sort_unstable_by_key(|f| f.key);
        let mut ids: Vec<u32> = facets.iter().flat_map(|f| f.key.ids()).collect();
        ids.sort_unstable();
        ids.dedup();
        let local: HashMap<u32, u32> = ids.iter().enumerate().map(|(i, &id)| (id, i as u32)).collect();
        MeshSnapshot {
            mesh: TriMesh {
                vertices: ids.iter().map(|id| self.positions[id]).collect(),
                faces: facets.iter().map(|f| f.published_order.map(|id| local[&id])).collect(),
            },
            normals: facets.iter().map(|f| f.normal).collect(),
            facet_keys: facets.iter().map(|f| f.key).collect(),
            vertex_ids: ids,
            frame_counter: self.frame_counter,
        }
    }

    pub fn sync_snapshot(&mut self, map: &mut MeshMap) -> MeshSnapshot {
        self.sync(map);
        self.snapshot()
    }
}

/// Copies the whole map without touching its sync flags.
pub fn full_snapshot(map: &MeshMap) -> MeshSnapshot {
    let mut b = Broadcaster::new();
    for f in map.facets() {
        for id in f.key.ids() {
            b.positions.entry(id).or_insert_with(|| map.position(id));
        }
        b.regions.entry(map.region_key(&f.center)).or_default().push(CopiedFacet {
            key: f.key,
            published_order: f.published_order,
            normal: f.normal,
        });
    }
    b.snapshot()
}

/// Background thread that periodically syncs a shared map.
pub struct SyncWorker {
    stop: Arc<AtomicBool>,
    latest: Arc<Mutex<MeshSnapshot>>,
    handle: Option<JoinHandle<Broadcaster>>,
}

impl SyncWorker {
    pub fn spawn(map: Arc<Mutex<MeshMap>>, period: Duration) -> Self {
        let stop = Arc::new(AtomicBool::new(false));
        let latest = Arc::new(Mutex::new(MeshSnapshot::default()));
        let handle = {
            let stop = stop.clone();
            let latest = latest.clone();
            std::thread::spawn(move || {
                let mut b = Broadcaster::new();
                loop {
                    let finishing = stop.load(Ordering::Acquire);
                    let changed = {
                        let mut m = map.lock().unwrap_or_else(|e| e.into_inner());
                        b.sync(&mut m).regions_copied > 0
                    };
                    if changed || finishing {
                        let snap = b.snapshot();
                        *latest.lock().unwrap_or_else(|e| e.into_inner()) = snap;
                    }
                    if finishing {
                        return b;
                    }
                    std::thread::park_timeout(period);
                }
            })
        };
        Self {
            stop,
            latest,
            handle: Some(handle),
        }
    }

    pub fn latest(&self) -> MeshSnapshot {
        self.latest.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// Runs one last sync, stops the thread, and returns its state.
    pub fn finish(mut self) -> (MeshSnapshot, Broadcaster) {
        let b = self.shutdown().expect("worker thread panicked");
        (self.latest(), b)
    }

    fn shutdown(&mut self) -> Option<Broadcaster> {
        let handle = self.handle.take()?;
        self.stop.store(true, Ordering::Release);
        handle.thread().unpark();
        handle.join().ok()
    }
}

impl Drop for SyncWorker {
    fn drop(&mut self) {
        self.shutdown();
    }
}
