//! Placement of pointing human avatars in voxelized 3D scenes, and
//! geometric scoring of pointing gestures against object proposals.
//!
//! Geometry is generic over [`Real`] (`f32`/`f64`); the aliases below fix
//! the scalar to `f64`, which is what the pipeline and CLI use.

pub mod boundary;
pub mod collision;
pub mod error;
pub mod eval;
pub mod geom;
pub mod placement;
pub mod ply;
pub mod prompt;
pub mod scalar;
pub mod scene;
pub mod synthetic;
pub mod visibility;
pub mod voxel;

pub use error::{Error, Result};
pub use geom::{BoundingBox3D, Vec3, YawTransform};
pub use scalar::Real;
pub use voxel::Index3;

pub type Point = geom::Vec3<f64>;
pub type BBox = geom::BoundingBox3D<f64>;
pub type Cloud = scene::PointCloud<f64>;
pub type Cloud32 = scene::PointCloud<f32>;
pub type Avatar = scene::AvatarModel<f64>;
pub type Grid = voxel::OccupancyGrid<f64>;
pub type Grid32 = voxel::OccupancyGrid<f32>;
pub type Scores = visibility::ScoreGrid<f64>;
pub type Volume = collision::AvatarVolume<f64>;
pub type Record = placement::ImputationRecord<f64>;
pub type Config = placement::PlacementConfig<f64>;
