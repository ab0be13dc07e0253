//! Persistence: PCD point-cloud I/O, the compact scene record format,
//! background/object stores, and on-the-fly scene reconstruction.

mod pcd;
mod record;
mod store;

pub use pcd::{read_pcd, read_pcd_bytes, write_pcd, write_pcd_bytes};
pub use record::{
    read_scene, read_scene_bytes, write_scene, write_scene_bytes, RecordMeta, SceneRecord,
    FORMAT_VERSION, MAGIC,
};
pub use store::{BackgroundStore, ObjectEntry, ObjectStore};

use crate::assembly::{rasterize_centers, CenterGrid};
use crate::error::{Error, Result};
use crate::geom::PointCloud;

/// Rebuild the full scene from a compact record: background minus its
/// dropped indices, followed by the object points, plus the label raster.
pub fn reconstruct(
    record: &SceneRecord,
    backgrounds: &BackgroundStore,
) -> Result<(PointCloud, CenterGrid)> {
    let background = backgrounds.load(
        &record.scene.background_ref,
        record.scene.background_mirrored,
    )?;
    if background.len() as u32 != record.scene.background_point_count {
        return Err(Error::Record(format!(
            "background {:?} has {} points, record expects {}",
            record.scene.background_ref,
            background.len(),
            record.scene.background_point_count
        )));
    }
    let cloud = record.scene.expand(&background);
    let grid = rasterize_centers(
        &record.scene.boxes,
        &record.meta.region,
        record.meta.grid_rows as usize,
        record.meta.grid_cols as usize,
    )?;
    Ok((cloud, grid))
}
