//! The mesh map: mesh vertices, voxels with plane statistics, regions holding
//! facets, and the facet table, all cross-referenced by id and key.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::ScanFrame;
use crate::geom::{is_finite_point, PlaneStats, Point3, Vec3};
use crate::spatial::{downsample_grid, grid_key, FacetKey, GridKey, KnnStore, SpatialHashTable};

/// Spatial resolution parameters of a map, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapConfig {
    /// Minimum spacing between mesh vertices.
    pub xi: f64,
    /// Side of a region cell.
    pub region_size: f64,
    /// Side of a voxel cell.
    pub voxel_size: f64,
    /// Radius used to pull neighboring vertices into a voxel's meshing set.
    pub dilation_radius: f64,
    /// Leaf of the per-frame voxel-grid filter applied before appending.
    pub downsample_leaf: f64,
}

impl MapConfig {
    /// Configuration with the derived defaults `dilation_radius = voxel_size / 4`
    /// and `downsample_leaf = xi / 1.5`.
    pub fn new(xi: f64, region_size: f64, voxel_size: f64) -> Result<Self> {
        let cfg = Self {
            xi,
            region_size,
            voxel_size,
            dilation_radius: voxel_size / 4.0,
            downsample_leaf: xi / 1.5,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Spinning LiDAR settings.
    pub fn mechanical() -> Self {
        Self::new(0.15, 15.0, 0.60).unwrap()
    }

    /// Solid-state LiDAR settings.
    pub fn solid_state() -> Self {
        Self::new(0.10, 10.0, 0.40).unwrap()
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.xi, self.region_size, self.voxel_size, self.dilation_radius, self.downsample_leaf];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("non-finite map parameter".into()));
        }
        if !(0.0 < self.xi && self.xi < self.voxel_size && self.voxel_size < self.region_size) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < xi < voxel_size < region_size, got xi={}, voxel_size={}, region_size={}",
                self.xi, self.voxel_size, self.region_size
            )));
        }
        if self.dilation_radius < 0.0 {
            return Err(Error::InvalidConfig("dilation_radius must be >= 0".into()));
        }
        if self.downsample_leaf <= 0.0 {
            return Err(Error::InvalidConfig("downsample_leaf must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshVertex {
    pub id: u32,
    pub pos: Point3,
    /// Keys of the live facets using this vertex.
    pub tri_list: Vec<FacetKey>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleFacet {
    pub key: FacetKey,
    pub center: Point3,
    /// Unit normal, facing the sensor position the facet was created from.
    pub normal: Vec3,
    /// Vertex order for publishing: the sorted ids, with the first two
    /// swapped when the normal was flipped.
    pub published_order: [u32; 3],
}

impl TriangleFacet {
    pub fn is_flipped(&self) -> bool {
        self.published_order != self.key.ids()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VoxelFlag {
    Activated,
    Deactivated,
}

#[derive(Debug, Clone)]
pub struct Voxel {
    pub key: GridKey,
    /// Vertices whose positions fall inside this cell, in append order.
    pub vertex_ids: Vec<u32>,
    pub stats: PlaneStats,
    pub flag: VoxelFlag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SyncFlag {
    SyncRequired,
    Synced,
}

#[derive(Debug, Clone)]
pub struct Region {
    pub key: GridKey,
    /// Facets whose centers fall inside this cell.
    pub facets: BTreeSet<FacetKey>,
    pub flag: SyncFlag,
}

/// Outcome of [`MeshMap::register_scan`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegistrationReport {
    pub appended_vertex_ids: Vec<u32>,
    /// Voxels that received at least one vertex, sorted.
    pub activated_voxel_keys: Vec<GridKey>,
    /// Downsampled points dropped by the minimum-spacing test.
    pub discarded_count: usize,
    /// Input points rejected for non-finite coordinates.
    pub rejected_count: usize,
}

#[derive(Debug, Clone)]
pub struct MeshMap {
    config: MapConfig,
    vertices: Vec<MeshVertex>,
    knn: KnnStore,
    voxels: SpatialHashTable<GridKey, Voxel>,
    regions: SpatialHashTable<GridKey, Region>,
    facets: SpatialHashTable<FacetKey, TriangleFacet>,
}

impl MeshMap {
    pub fn new(config: MapConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            vertices: Vec::new(),
            knn: KnnStore::new(),
            voxels: SpatialHashTable::new(),
            regions: SpatialHashTable::new(),
            facets: SpatialHashTable::new(),
        })
    }

    pub fn config(&self) -> &MapConfig {
        &self.config
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn facet_count(&self) -> usize {
        self.facets.len()
    }

    pub fn voxel_count(&self) -> usize {
        self.voxels.len()
    }

    pub fn region_count(&self) -> usize {
        self.regions.len()
    }

    pub fn vertex(&self, id: u32) -> Option<&MeshVertex> {
        self.vertices.get(id as usize)
    }

    pub fn vertices(&self) -> &[MeshVertex] {
        &self.vertices
    }

    #[inline]
    pub fn position(&self, id: u32) -> Point3 {
        self.vertices[id as usize].pos
    }

    pub fn knn(&self) -> &KnnStore {
        &self.knn
    }

    pub fn facet(&self, key: &FacetKey) -> Option<&TriangleFacet> {
        self.facets.get(key)
    }

    pub fn facets(&self) -> impl Iterator<Item = &TriangleFacet> {
        self.facets.values()
    }

    /// All facet keys in ascending order.
    pub fn facet_keys(&self) -> Vec<FacetKey> {
        let mut keys: Vec<FacetKey> = self.facets.keys().copied().collect();
        keys.sort_unstable();
        keys
    }

    pub fn voxel(&self, key: &GridKey) -> Option<&Voxel> {
        self.voxels.get(key)
    }

    pub fn voxels(&self) -> impl Iterator<Item = &Voxel> {
        self.voxels.values()
    }

    pub fn region(&self, key: &GridKey) -> Option<&Region> {
        self.regions.get(key)
    }

    pub fn regions(&self) -> impl Iterator<Item = &Region> {
        self.regions.values()
    }

    pub fn voxel_key(&self, p: &Point3) -> GridKey {
        grid_key(p, self.config.voxel_size)
    }

    pub fn region_key(&self, p: &Point3) -> GridKey {
        grid_key(p, self.config.region_size)
    }

    pub fn get_or_create_voxel(&mut self, p: &Point3) -> &mut Voxel {
        let key = self.voxel_key(p);
        self.voxels.get_or_insert_with(key, || Voxel {
            key,
            vertex_ids: Vec::new(),
            stats: PlaneStats::new(),
            flag: VoxelFlag::Deactivated,
        })
    }

    pub fn get_or_create_region(&mut self, p: &Point3) -> &mut Region {
        let key = self.region_key(p);
        self.regions.get_or_insert_with(key, || Region {
            key,
            facets: BTreeSet::new(),
            flag: SyncFlag::Synced,
        })
    }

    /// Activated voxel keys, sorted.
    pub fn activated_voxels(&self) -> Vec<GridKey> {
        let mut keys: Vec<GridKey> = self
            .voxels
            .values()
            .filter(|v| v.flag == VoxelFlag::Activated)
            .map(|v| v.key)
            .collect();
        keys.sort_unstable();
        keys
    }

    pub fn set_voxel_flag(&mut self, key: &GridKey, flag: VoxelFlag) {
        if let Some(v) = self.voxels.get_mut(key) {
            v.flag = flag;
        }
    }

    /// Registers a frame: transform to world, grid-filter, then append every
    /// point that is at least `xi` from all existing vertices.
    pub fn register_scan(&mut self, frame: &ScanFrame) -> Result<RegistrationReport> {
        frame.pose.validate()?;
        let mut report = RegistrationReport::default();
        let world: Vec<Point3> = frame
            .points
            .iter()
            .filter(|p| {
                let ok = is_finite_point(p);
                if !ok {
                    report.rejected_count += 1;
                }
                ok
            })
            .map(|p| frame.pose.transform_point(p))
            .collect();
        let filtered = downsample_grid(&world, self.config.downsample_leaf);

        let mut activated: BTreeMap<GridKey, Vec<Point3>> = BTreeMap::new();
        for p in filtered {
            if !self.knn.is_empty() {
                let (_, d) = self.knn.nearest(&p)?;
                if d < self.config.xi {
                    report.discarded_count += 1;
                    continue;
                }
            }
            let id = self.append_vertex(p)?;
            report.appended_vertex_ids.push(id);
            activated.entry(self.voxel_key(&p)).or_default().push(p);
        }
        for (key, pts) in &activated {
            let voxel = self.voxels.get_mut(key).expect("voxel created on append");
            voxel.stats.add_points(pts);
        }
        report.activated_voxel_keys = activated.into_keys().collect();
        Ok(report)
    }

    fn append_vertex(&mut self, pos: Point3) -> Result<u32> {
        let id = u32::try_from(self.vertices.len()).map_err(|_| Error::InvalidConfig("vertex id space exhausted".into()))?;
        self.vertices.push(MeshVertex {
            id,
            pos,
            tri_list: Vec::new(),
        });
        self.knn.insert(id, pos);
        let voxel = self.get_or_create_voxel(&pos);
        voxel.vertex_ids.push(id);
        voxel.flag = VoxelFlag::Activated;
        self.get_or_create_region(&pos);
        Ok(id)
    }

    /// Adds a facet to the facet table, its region, and its vertices.
    pub fn insert_facet(&mut self, facet: TriangleFacet) -> Result<()> {
        let ids = facet.key.ids();
        if ids.iter().any(|&i| i as usize >= self.vertices.len()) {
            return Err(Error::Integrity(format!("facet {ids:?} references an unknown vertex")));
        }
        if self.facets.contains_key(&facet.key) {
            return Err(Error::Integrity(format!("facet {ids:?} inserted twice")));
        }
        for id in ids {
            self.vertices[id as usize].tri_list.push(facet.key);
        }
        let region = self.get_or_create_region(&facet.center);
        region.facets.insert(facet.key);
        region.flag = SyncFlag::SyncRequired;
        self.facets.insert(facet.key, facet);
        Ok(())
    }

    /// Removes a facet from the facet table, its region, and its vertices.
    pub fn remove_facet(&mut self, key: &FacetKey) -> Result<TriangleFacet> {
        let facet = self.facets.remove(key).ok_or(Error::MissingFacet(*key))?;
        for id in key.ids() {
            let list = &mut self.vertices[id as usize].tri_list;
            let pos = list
                .iter()
                .position(|k| k == key)
                .ok_or_else(|| Error::Integrity(format!("vertex {id} does not list facet {:?}", key.ids())))?;
            list.swap_remove(pos);
        }
        let rkey = self.region_key(&facet.center);
        let region = self
            .regions
            .get_mut(&rkey)
            .ok_or_else(|| Error::Integrity(format!("facet {:?} has no region", key.ids())))?;
        if !region.facets.remove(key) {
            return Err(Error::Integrity(format!("region does not hold facet {:?}", key.ids())));
        }
        region.flag = SyncFlag::SyncRequired;
        Ok(facet)
    }

    /// Keys of regions whose facet set changed since they were last synced, sorted.
    pub fn regions_requiring_sync(&self) -> Vec<GridKey> {
        let mut keys: Vec<GridKey> = self
            .regions
            .values()
            .filter(|r| r.flag == SyncFlag::SyncRequired)
            .map(|r| r.key)
            .collect();
        keys.sort_unstable();
        keys
    }

    pub fn mark_synced(&mut self, key: &GridKey) {
        if let Some(r) = self.regions.get_mut(key) {
            r.flag = SyncFlag::Synced;
        }
    }

    /// Full cross-reference sweep over vertices, voxels, facets, and regions.
    /// Returns one message per violation found.
    pub fn integrity_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut owner = vec![0u32; self.vertices.len()];

        for (i, v) in self.vertices.iter().enumerate() {
            if v.id as usize != i {
                out.push(format!("vertex at slot {i} has id {}", v.id));
            }
            if !is_finite_point(&v.pos) {
                out.push(format!("vertex {i} has a non-finite position"));
            }
            let mut seen = BTreeSet::new();
            for key in &v.tri_list {
                if !seen.insert(*key) {
                    out.push(format!("vertex {i} lists facet {:?} twice", key.ids()));
                }
                if !key.contains(v.id) {
                    out.push(format!("vertex {i} lists facet {:?} which does not use it", key.ids()));
                }
                if !self.facets.contains_key(key) {
                    out.push(format!("vertex {i} lists dead facet {:?}", key.ids()));
                }
            }
        }

        for voxel in self.voxels.values() {
            if voxel.stats.count() != voxel.vertex_ids.len() {
                out.push(format!(
                    "voxel {:?} stats count {} but {} vertices",
                    voxel.key,
                    voxel.stats.count(),
                    voxel.vertex_ids.len()
                ));
            }
            for &id in &voxel.vertex_ids {
                match self.vertices.get(id as usize) {
                    None => out.push(format!("voxel {:?} lists unknown vertex {id}", voxel.key)),
                    Some(v) => {
                        owner[id as usize] += 1;
                        if !voxel.key.contains(&v.pos, self.config.voxel_size) {
                            out.push(format!("vertex {id} lies outside voxel {:?}", voxel.key));
                        }
                    }
                }
            }
        }
        for (id, n) in owner.iter().enumerate() {
            if *n != 1 {
                out.push(format!("vertex {id} is listed by {n} voxels"));
            }
        }

        let mut region_total = 0usize;
        for region in self.regions.values() {
            region_total += region.facets.len();
            for key in &region.facets {
                match self.facets.get(key) {
                    None => out.push(format!("region {:?} lists dead facet {:?}", region.key, key.ids())),
                    Some(f) => {
                        if !region.key.contains(&f.center, self.config.region_size) {
                            out.push(format!("facet {:?} center outside its region {:?}", key.ids(), region.key));
                        }
                    }
                }
            }
        }
        if region_total != self.facets.len() {
            out.push(format!("regions hold {region_total} facets but the table has {}", self.facets.len()));
        }

        for (key, f) in self.facets.iter() {
            let ids = key.ids();
            if f.key != *key {
                out.push(format!("facet stored under {:?} carries key {:?}", ids, f.key.ids()));
            }
            if ids.iter().any(|&i| i as usize >= self.vertices.len()) {
                out.push(format!("facet {ids:?} references an unknown vertex"));
                continue;
            }
            for id in ids {
                let n = self.vertices[id as usize].tri_list.iter().filter(|k| *k == key).count();
                if n != 1 {
                    out.push(format!("facet {ids:?} appears {n} times in vertex {id}'s list"));
                }
            }
            match self.regions.get(&self.region_key(&f.center)) {
                Some(r) if r.facets.contains(key) => {}
                _ => out.push(format!("facet {ids:?} missing from the region of its center")),
            }
            let [a, b, c] = ids.map(|i| self.vertices[i as usize].pos.coords);
            let center = (a + b + c) / 3.0;
            if (center - f.center.coords).norm() > 1e-9 {
                out.push(format!("facet {ids:?} center is not the vertex mean"));
            }
            if (f.normal.norm() - 1.0).abs() > 1e-9 {
                out.push(format!("facet {ids:?} normal is not unit length"));
            }
            let mut order = f.published_order;
            order.sort_unstable();
            if order != ids {
                out.push(format!("facet {ids:?} published order {:?} is not a permutation", f.published_order));
            }
        }
        out
    }

    pub fn check_integrity(&self) -> Result<()> {
        let v = self.integrity_violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Integrity(format!("{} violation(s); first: {}", v.len(), v[0])))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Pose;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn frame(points: Vec<Point3>) -> ScanFrame {
        ScanFrame::new(0.0, points, Pose::identity())
    }

    fn random_cloud(rng: &mut ChaCha8Rng, n: usize, extent: f64) -> Vec<Point3> {
        (0..n)
            .map(|_| Point3::new(rng.gen_range(0.0..extent), rng.gen_range(0.0..extent), rng.gen_range(0.0..extent)))
            .collect()
    }

    #[test]
    fn presets_and_validation() {
        let m = MapConfig::mechanical();
        assert_eq!((m.xi, m.region_size, m.voxel_size), (0.15, 15.0, 0.60));
        assert_eq!(m.dilation_radius, 0.15);
        assert!((m.downsample_leaf - 0.1).abs() < 1e-15);
        let s = MapConfig::solid_state();
        assert_eq!((s.xi, s.region_size, s.voxel_size), (0.10, 10.0, 0.40));
        assert!(MapConfig::new(0.5, 10.0, 0.4).is_err());
        assert!(MapConfig::new(0.1, 0.3, 0.4).is_err());
        assert!(MapConfig::new(f64::NAN, 10.0, 0.4).is_err());
    }

    #[test]
    fn first_point_creates_voxel_and_region() {
        let mut map = MeshMap::new(MapConfig::solid_state()).unwrap();
        let r = map.register_scan(&frame(vec![Point3::new(0.1, 0.1, 0.1)])).unwrap();
        assert_eq!(r.appended_vertex_ids, vec![0]);
        assert_eq!(r.activated_voxel_keys, vec![GridKey::new(0, 0, 0)]);
        assert_eq!(map.voxel_count(), 1);
        assert_eq!(map.region_count(), 1);
        assert_eq!(map.voxel(&GridKey::new(0, 0, 0)).unwrap().flag, VoxelFlag::Activated);
    }

    #[test]
    fn reregistering_a_frame_appends_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut map = MeshMap::new(MapConfig::solid_state()).unwrap();
        let f = frame(random_cloud(&mut rng, 500, 2.0));
        let first = map.register_scan(&f).unwrap();
        assert!(!first.appended_vertex_ids.is_empty());
        let second = map.register_scan(&f).unwrap();
        assert!(second.appended_vertex_ids.is_empty());
        assert!(second.activated_voxel_keys.is_empty());
    }

    #[test]
    fn vertices_respect_minimum_spacing() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut map = MeshMap::new(MapConfig::mechanical()).unwrap();
        for _ in 0..4 {
            map.register_scan(&frame(random_cloud(&mut rng, 1000, 3.0))).unwrap();
        }
        let v = map.vertices();
        let mut min = f64::INFINITY;
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                let d = v[i].pos - v[j].pos;
                min = min.min((d.x * d.x + d.y * d.y + d.z * d.z).sqrt());
            }
        }
        assert!(min >= 0.15 - 1e-9, "min spacing {min}");
        map.check_integrity().unwrap();
    }

    #[test]
    fn non_finite_points_are_counted_not_fatal() {
        let mut map = MeshMap::new(MapConfig::solid_state()).unwrap();
        let r = map
            .register_scan(&frame(vec![Point3::new(f64::NAN, 0.0, 0.0), Point3::new(1.0, 1.0, 1.0)]))
            .unwrap();
        assert_eq!(r.rejected_count, 1);
        assert_eq!(r.appended_vertex_ids.len(), 1);
    }

    #[test]
    fn voxel_lookup_contains_point() {
        let mut map = MeshMap::new(MapConfig::solid_state()).unwrap();
        assert_eq!(map.get_or_create_voxel(&Point3::new(0.1, 0.1, 0.1)).key, GridKey::new(0, 0, 0));
        let a = map.get_or_create_voxel(&Point3::new(0.1, 0.1, 0.1)).key;
        let b = map.get_or_create_voxel(&Point3::new(0.5, 0.1, 0.1)).key;
        assert_eq!(b, a.offset(1, 0, 0));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let p = Point3::new(rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0), rng.gen_range(-5.0..5.0));
            let k = map.get_or_create_voxel(&p).key;
            let lo = Point3::new(k.x as f64 * 0.4, k.y as f64 * 0.4, k.z as f64 * 0.4);
            for a in 0..3 {
                assert!(lo[a] <= p[a] && p[a] < lo[a] + 0.4 + 1e-12);
            }
        }
    }

    #[test]
    fn activation_matches_receiving_voxels() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut map = MeshMap::new(MapConfig::solid_state()).unwrap();
        let r = map.register_scan(&frame(random_cloud(&mut rng, 300, 2.0))).unwrap();
        let from_ids: BTreeSet<GridKey> = r.appended_vertex_ids.iter().map(|&i| map.voxel_key(&map.position(i))).collect();
        assert_eq!(r.activated_voxel_keys, from_ids.into_iter().collect::<Vec<_>>());
        assert_eq!(map.activated_voxels(), r.activated_voxel_keys);
    }

    #[test]
    fn voxel_stats_match_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut map = MeshMap::new(MapConfig::solid_state()).unwrap();
        for _ in 0..3 {
            map.register_scan(&frame(random_cloud(&mut rng, 400, 1.5))).unwrap();
        }
        for voxel in map.voxels() {
            let pts: Vec<Point3> = voxel.vertex_ids.iter().map(|&i| map.position(i)).collect();
            let batch = PlaneStats::from_points(&pts);
            assert!((batch.mean() - voxel.stats.mean()).norm() < 1e-9);
            assert!((batch.covariance() - voxel.stats.covariance()).abs().max() < 1e-9);
        }
    }

    #[test]
    fn insert_then_remove_facet_restores_map() {
        let mut map = MeshMap::new(MapConfig::solid_state()).unwrap();
        map.register_scan(&frame(vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        ]))
        .unwrap();
        let key = FacetKey::from_unsorted([0, 1, 2]);
        let facet = TriangleFacet {
            key,
            center: Point3::new(1.0 / 3.0, 1.0 / 3.0, 0.0),
            normal: Vec3::z(),
            published_order: [0, 1, 2],
        };
        map.insert_facet(facet).unwrap();
        map.check_integrity().unwrap();
        assert!(map.insert_facet(facet).is_err());
        assert_eq!(map.facet_count(), 1);
        map.remove_facet(&key).unwrap();
        assert_eq!(map.facet_count(), 0);
        assert!(map.vertices().iter().all(|v| v.tri_list.is_empty()));
        map.check_integrity().unwrap();
        assert!(matches!(map.remove_facet(&key), Err(Error::MissingFacet(_))));
    }
}
