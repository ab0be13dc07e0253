//! scenefab composes fully labeled synthetic lidar scenes by fusing
//! separately captured object and background point clouds.
//!
//! The pipeline for one scene: level both captures to a common ground
//! plane, crop the object out of its scene, reposition it with perspective
//! consistency, transform it into the background's frame, re-render it
//! onto the sensor's beam grid, run occlusion both ways, and persist the
//! result as a compact record of object points plus occluded background
//! indices that expands back to the full cloud on demand.

// pub mod assembly;
pub mod beam;
// pub mod config;
// pub mod datastore;
pub mod error;
pub mod fixtures;
pub mod geom;
pub mod leveling;
pub mod occlusion;
// pub mod pipeline;
pub mod placement;
pub mod spatial;

pub use error::{Error, Result};
pub use geom::{BoundingBox, DetectionRegion, Point3, PointCloud, SensorModel};
