//! Spatial hashing and nearest-neighbor indexing.

mod grid;
mod hash;
mod knn;

pub use grid::downsample_grid;
pub use hash::{
    grid_key, hash_key, int_hash, triangle_key, FacetKey, GridKey, HashParams, PrimeXorBuild, PrimeXorHasher,
    SpatialHashTable, SpatialKey,
};
pub use knn::KnnStore;
