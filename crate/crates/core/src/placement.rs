//! Object extraction and perspective-consistent repositioning.
//!
//! An object may move only (1) radially along the ray through its own
//! center and (2) by rotation about the sensor's z-axis. Those two motions
//! keep the object's surface orientation relative to the sensor's line of
//! sight physically consistent; a plain translation would not (the sensor
//! would see faces it could never have scanned).

use crate::error::{Error, Result};
use crate::geom::{rotation_z, BoundingBox, Point3, PointCloud};

/// A target location on the leveled ground plane (z = 0, off the origin).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacementTarget {
    x: f64,
    y: f64,
}

impl PlacementTarget {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        if x == 0.0 && y == 0.0 {
            return Err(Error::UndefinedPlacementDirection);
        }
        Ok(PlacementTarget { x, y })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn rho(&self) -> Point3 {
        Point3::new(self.x, self.y, 0.0)
    }

    pub fn mirrored_x(&self) -> Self {
        PlacementTarget {
            x: self.x,
            y: -self.y,
        }
    }

    /// Ground distance from the sensor.
    pub fn ground_range(&self) -> f64 {
        (self.x * self.x + self.y * self.y).sqrt()
    }
}

/// Keep the points inside the box (closed interval in the box frame;
/// boundary points are kept). Relative order is preserved. An empty result
/// is legal; the caller decides whether that is an error.
pub fn crop_object(scene: &PointCloud, bbox: &BoundingBox) -> PointCloud {
    PointCloud::new(
        scene
            .iter()
            .filter(|p| bbox.contains(p))
            .copied()
            .collect(),
    )
}

/// Reposition a cropped, leveled object to `target`.
///
/// The motion is the radial translation toward the target range first,
/// then the rotation about z onto the target azimuth — in that order. The
/// box gets the same transform; its extent is unchanged.
pub fn place_object(
    object: &PointCloud,
    bbox: &BoundingBox,
    target: &PlacementTarget,
) -> Result<(PointCloud, BoundingBox)> {
    let c0 = Point3::new(bbox.center.x, bbox.center.y, 0.0);
    let c0_norm = (c0.x * c0.x + c0.y * c0.y).sqrt();
    if c0_norm == 0.0 {
        return Err(Error::UndefinedPlacementDirection);
    }
    let rho_norm = target.ground_range();

    let theta = target.y.atan2(target.x) - bbox.center.y.atan2(bbox.center.x);
    let rotation = rotation_z(theta);
    // Radial shift along the object's own center direction; z-free since
    // both rho and c0 lie in the ground plane.
    let t = Point3::new(
        rho_norm * c0.x / c0_norm - c0.x,
        rho_norm * c0.y / c0_norm - c0.y,
        0.0,
    );

    let placed = object.map(|p| {
        Point3::from_vector(&(rotation * Point3::new(p.x + t.x, p.y + t.y, p.z + t.z).vector()))
    });
    let placed_box = BoundingBox {
        center: Point3::from_vector(
            &(rotation
                * Point3::new(bbox.center.x + t.x, bbox.center.y + t.y, bbox.center.z + t.z)
                    .vector()),
        ),
        extent: bbox.extent,
        rotation: rotation * bbox.rotation,
    };
    Ok((placed, placed_box))
}
