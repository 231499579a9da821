//! Incremental triangle-mesh reconstruction from posed point-cloud frames.
//!
//! Each frame is registered into a voxel map ([`map::MeshMap`]), then every
//! voxel touched by the frame is re-triangulated in its local tangent plane
//! ([`mesher`]) and the differences are pushed into the global mesh. The
//! [`broadcast`] module publishes the mesh to files and depth images;
//! [`eval`] scores it against ground truth; [`synth`] generates test scenes.

pub mod broadcast;
pub mod camera;
pub mod error;
pub mod eval;
pub mod frame;
pub mod geom;
pub mod map;
pub mod mesher;
pub mod pipeline;
pub mod spatial;
pub mod synth;
pub mod trimesh;

pub use broadcast::{Broadcaster, DepthImage, MeshFormat, MeshSnapshot};
pub use camera::CameraModel;
pub use error::{Error, Result};
pub use eval::{CorrectnessReport, EvalConfig, EvaluationReport, FairnessReport};
pub use frame::{ScanFrame, StampedPose};
pub use geom::{PlaneStats, Point3, Pose, Vec3};
pub use map::{MapConfig, MeshMap, MeshVertex, Region, TriangleFacet, Voxel};
pub use mesher::{mesh_update, Mesher};
pub use pipeline::{run_pipeline, Pipeline, Preset, RunConfig, RunReport};
pub use spatial::{FacetKey, GridKey, KnnStore};
pub use synth::{ScanScript, Scene};
pub use trimesh::TriMesh;
