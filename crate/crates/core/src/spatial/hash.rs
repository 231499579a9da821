//! Prime-XOR spatial hashing over integer grid cells and facet index triples.

use std::collections::hash_map::{self, HashMap};
use std::hash::{BuildHasherDefault, Hash, Hasher};

use crate::error::{Error, Result};
use crate::geom::Point3;

/// Primes and table size of the integer combiner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashParams {
    pub p1: i64,
    pub p2: i64,
    pub p3: i64,
    pub n: i64,
}

impl HashParams {
    pub const DEFAULT: HashParams = HashParams {
        p1: 116101,
        p2: 37199,
        p3: 93911,
        n: 201326611,
    };
}

impl Default for HashParams {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// `((x·p1) ⊕ (y·p2) ⊕ (z·p3)) mod n`.
///
/// Products wrap modulo 2^64 in two's complement before the XOR; the final
/// reduction is Euclidean so the result always lies in `[0, n)`.
#[inline]
pub fn int_hash(triple: [i64; 3], params: &HashParams) -> u64 {
    let h = triple[0].wrapping_mul(params.p1) ^ triple[1].wrapping_mul(params.p2) ^ triple[2].wrapping_mul(params.p3);
    h.rem_euclid(params.n) as u64
}

/// Integer cell coordinates of a point on a grid of side `scale`.
///
/// A cell is the half-open box `[k·S, (k+1)·S)` on each axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct GridKey {
    pub x: i64,
    pub y: i64,
    pub z: i64,
}

impl GridKey {
    pub const fn new(x: i64, y: i64, z: i64) -> Self {
        Self { x, y, z }
    }

    pub fn offset(&self, dx: i64, dy: i64, dz: i64) -> Self {
        Self::new(self.x + dx, self.y + dy, self.z + dz)
    }

    /// Lower corner of the cell.
    pub fn min_corner(&self, scale: f64) -> Point3 {
        Point3::new(self.x as f64 * scale, self.y as f64 * scale, self.z as f64 * scale)
    }

    pub fn center(&self, scale: f64) -> Point3 {
        Point3::new(
            (self.x as f64 + 0.5) * scale,
            (self.y as f64 + 0.5) * scale,
            (self.z as f64 + 0.5) * scale,
        )
    }

    /// Half-open containment test against the cell's box.
    pub fn contains(&self, p: &Point3, scale: f64) -> bool {
        grid_key(p, scale) == *self
    }

    pub fn triple(&self) -> [i64; 3] {
        [self.x, self.y, self.z]
    }
}

/// `floor(p / S)` per axis.
#[inline]
pub fn grid_key(p: &Point3, scale: f64) -> GridKey {
    debug_assert!(scale > 0.0);
    GridKey {
        x: (p.x / scale).floor() as i64,
        y: (p.y / scale).floor() as i64,
        z: (p.z / scale).floor() as i64,
    }
}

#[inline]
pub fn hash_key(key: &GridKey, params: &HashParams) -> u64 {
    int_hash(key.triple(), params)
}

/// Sorted vertex-id triple identifying a triangle facet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct FacetKey([u32; 3]);

impl FacetKey {
    /// Sorts the ids. Panics on duplicates.
    pub fn from_unsorted(mut ids: [u32; 3]) -> Self {
        ids.sort_unstable();
        assert!(ids[0] < ids[1] && ids[1] < ids[2], "facet has repeated vertex ids: {ids:?}");
        Self(ids)
    }

    pub fn try_from_sorted(ids: [u32; 3]) -> Result<Self> {
        if ids[0] < ids[1] && ids[1] < ids[2] {
            Ok(Self(ids))
        } else {
            Err(Error::UnsortedFacet(ids))
        }
    }

    pub fn ids(&self) -> [u32; 3] {
        self.0
    }

    pub fn contains(&self, id: u32) -> bool {
        self.0.contains(&id)
    }
}

/// Facet hash: the integer combiner applied to the sorted id triple.
pub fn triangle_key(ids: [u32; 3], params: &HashParams) -> Result<u64> {
    let key = FacetKey::try_from_sorted(ids)?;
    Ok(int_hash(key.0.map(i64::from), params))
}

/// Keys that can live in a [`SpatialHashTable`].
pub trait SpatialKey: Copy + Eq {
    fn int_triple(&self) -> [i64; 3];
}

impl SpatialKey for GridKey {
    fn int_triple(&self) -> [i64; 3] {
        self.triple()
    }
}

impl SpatialKey for FacetKey {
    fn int_triple(&self) -> [i64; 3] {
        self.0.map(i64::from)
    }
}

impl Hash for GridKey {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(int_hash(self.int_triple(), &HashParams::DEFAULT));
    }
}

impl Hash for FacetKey {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(int_hash(self.int_triple(), &HashParams::DEFAULT));
    }
}

/// Passes the prime-XOR bucket value through to the table.
///
/// The value is below 2^28, so it is spread by a multiplicative finalizer
/// before the table sees it; the map's own tag bits come from the high word.
#[derive(Default, Clone, Copy)]
pub struct PrimeXorHasher(u64);

impl Hasher for PrimeXorHasher {
    fn finish(&self) -> u64 {
        let x = self.0.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        x ^ (x >> 29)
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 = self.0.rotate_left(8) ^ u64::from(b);
        }
    }

    fn write_u64(&mut self, v: u64) {
        self.0 = v;
    }
}

pub type PrimeXorBuild = BuildHasherDefault<PrimeXorHasher>;

/// Hash table keyed by grid cells or facet triples. Bucket collisions are
/// resolved by full key comparison, so distinct keys never alias.
#[derive(Debug, Clone)]
pub struct SpatialHashTable<K, V> {
    inner: HashMap<K, V, PrimeXorBuild>,
}

impl<K: SpatialKey + Hash, V> Default for SpatialHashTable<K, V> {
    fn default() -> Self {
        Self::new()
    }
}

impl<K: SpatialKey + Hash, V> SpatialHashTable<K, V> {
    pub fn new() -> Self {
        Self {
            inner: HashMap::with_hasher(PrimeXorBuild::default()),
        }
    }

    pub fn len(&self) -> usize {
        self.inner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inner.is_empty()
    }

    pub fn get(&self, key: &K) -> Option<&V> {
        self.inner.get(key)
    }

    pub fn get_mut(&mut self, key: &K) -> Option<&mut V> {
        self.inner.get_mut(key)
    }

    pub fn contains_key(&self, key: &K) -> bool {
        self.inner.contains_key(key)
    }

    pub fn insert(&mut self, key: K, value: V) -> Option<V> {
        self.inner.insert(key, value)
    }

    pub fn remove(&mut self, key: &K) -> Option<V> {
        self.inner.remove(key)
    }

    pub fn get_or_insert_with(&mut self, key: K, make: impl FnOnce() -> V) -> &mut V {
        self.inner.entry(key).or_insert_with(make)
    }

    pub fn iter(&self) -> hash_map::Iter<'_, K, V> {
        self.inner.iter()
    }

    pub fn iter_mut(&mut self) -> hash_map::IterMut<'_, K, V> {
        self.inner.iter_mut()
    }

    pub fn keys(&self) -> hash_map::Keys<'_, K, V> {
        self.inner.keys()
    }

    pub fn values(&self) -> hash_map::Values<'_, K, V> {
        self.inner.values()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn known_hash_values() {
        let p = HashParams::DEFAULT;
        assert_eq!(hash_key(&GridKey::new(0, 0, 0), &p), 0);
        // Reference values computed with arbitrary-precision integers.
        assert_eq!(hash_key(&GridKey::new(1, 1, 1), &p), 14877);
        assert_eq!(hash_key(&GridKey::new(-1, 2, -3), &p), 306078);
        assert_eq!(hash_key(&GridKey::new(1_000_000_000_000, -1_000_000_000_000, 7), &p), 66163880);
        assert_eq!(hash_key(&GridKey::new(1, 0, 0), &p), 116101);
        assert_eq!(hash_key(&GridKey::new(0, 1, 0), &p), 37199);
    }

    #[test]
    fn hash_in_range_for_extreme_keys() {
        let p = HashParams::DEFAULT;
        for k in [i64::MIN, i64::MAX, -1, 1 << 40] {
            let h = hash_key(&GridKey::new(k, k.wrapping_neg(), k / 3), &p);
            assert!(h < p.n as u64);
        }
    }

    #[test]
    fn grid_key_floor_convention() {
        assert_eq!(grid_key(&Point3::origin(), 0.37), GridKey::new(0, 0, 0));
        assert_eq!(
            grid_key(&Point3::new(0.5, 0.5, 0.5), 0.4),
            grid_key(&Point3::new(0.79, 0.79, 0.79), 0.4)
        );
        assert_eq!(grid_key(&Point3::new(0.5, 0.5, 0.5), 0.4), GridKey::new(1, 1, 1));
        assert_ne!(
            grid_key(&Point3::new(-0.01, 0.0, 0.0), 0.4),
            grid_key(&Point3::new(0.01, 0.0, 0.0), 0.4)
        );
        assert_eq!(grid_key(&Point3::new(-0.01, 0.0, 0.0), 0.4), GridKey::new(-1, 0, 0));
    }

    #[test]
    fn triangle_key_rejects_unsorted() {
        let p = HashParams::DEFAULT;
        assert_eq!(triangle_key([0, 1, 2], &p).unwrap(), triangle_key([0, 1, 2], &p).unwrap());
        assert!(triangle_key([1, 0, 2], &p).is_err());
        assert!(triangle_key([0, 0, 2], &p).is_err());
        assert_eq!(FacetKey::from_unsorted([5, 1, 3]).ids(), [1, 3, 5]);
    }

    #[test]
    fn colliding_facets_do_not_alias() {
        let p = HashParams::DEFAULT;
        // Search for two distinct triples that share a bucket value.
        let mut seen = std::collections::HashMap::new();
        let mut pair = None;
        'outer: for a in 0u32..200 {
            for b in a + 1..200 {
                for c in b + 1..200 {
                    let h = triangle_key([a, b, c], &p).unwrap();
                    if let Some(prev) = seen.insert(h, [a, b, c]) {
                        pair = Some((prev, [a, b, c]));
                        break 'outer;
                    }
                }
            }
        }
        let (x, y) = pair.expect("expected a bucket collision in the search space");
        let mut table = SpatialHashTable::new();
        table.insert(FacetKey::try_from_sorted(x).unwrap(), 1);
        table.insert(FacetKey::try_from_sorted(y).unwrap(), 2);
        assert_eq!(table.get(&FacetKey::try_from_sorted(x).unwrap()), Some(&1));
        assert_eq!(table.get(&FacetKey::try_from_sorted(y).unwrap()), Some(&2));
        assert_eq!(table.get(&FacetKey::try_from_sorted([0, 1, 3]).unwrap()), None);
    }

    #[test]
    fn random_triples_match_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut random_key = || loop {
            let a = rng.gen_range(0..3000u32);
            let b = rng.gen_range(0..3000u32);
            let c = rng.gen_range(0..3000u32);
            if a != b && b != c && a != c {
                break FacetKey::from_unsorted([a, b, c]);
            }
        };
        let log: Vec<FacetKey> = (0..100_000).map(|_| random_key()).collect();
        let mut table = SpatialHashTable::new();
        for (i, k) in log.iter().enumerate() {
            table.insert(*k, i);
        }
        // Oracle: the latest write to a key is found by scanning the log backwards.
        let scan = |k: &FacetKey| log.iter().rposition(|x| x == k);
        for i in (0..log.len()).step_by(50) {
            assert_eq!(table.get(&log[i]).copied(), scan(&log[i]));
        }
        for _ in 0..1000 {
            let k = random_key();
            assert_eq!(table.get(&k).copied(), scan(&k));
        }
    }

    proptest::proptest! {
        #[test]
        fn table_matches_association_list(ops in proptest::collection::vec((0u8..3, -4i64..4, -4i64..4, -4i64..4, 0u32..1000), 1..300)) {
            let mut table = SpatialHashTable::new();
            let mut model: Vec<(GridKey, u32)> = Vec::new();
            for (op, x, y, z, v) in ops {
                let k = GridKey::new(x, y, z);
                match op {
                    0 | 1 => {
                        table.insert(k, v);
                        model.retain(|(mk, _)| *mk != k);
                        model.push((k, v));
                    }
                    _ => {
                        table.remove(&k);
                        model.retain(|(mk, _)| *mk != k);
                    }
                }
                let probe = model.iter().find(|(mk, _)| *mk == k).map(|(_, v)| v);
                proptest::prop_assert_eq!(table.get(&k), probe);
            }
            proptest::prop_assert_eq!(table.len(), model.len());
        }

        #[test]
        fn grid_key_is_translation_consistent(
            x in -50.0f64..50.0, y in -50.0f64..50.0, z in -50.0f64..50.0,
            a in -20i64..20, b in -20i64..20, c in -20i64..20,
            s in 0.05f64..3.0,
        ) {
            let p = Point3::new(x, y, z);
            let frac = |v: f64| (v / s) - (v / s).floor();
            // Skip points too close to a cell boundary for rounding to matter.
            proptest::prop_assume!([x, y, z].iter().all(|&v| frac(v) > 1e-6 && frac(v) < 1.0 - 1e-6));
            let q = Point3::new(x + s * a as f64, y + s * b as f64, z + s * c as f64);
            proptest::prop_assert_eq!(grid_key(&q, s), grid_key(&p, s).offset(a, b, c));
        }
    }
}
