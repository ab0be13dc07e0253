//! Shared geometric types and elementary point utilities.
//!
//! Coordinates follow the sensor frame convention: x forward, y left,
//! z up, lengths in meters. In-memory math is f64 throughout; persisted
//! floats are f32 (see the datastore module).

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// A 3D point in the sensor frame (meters).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn vector(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Point3::new(v.x, v.y, v.z)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

/// An ordered point cloud with stable zero-based indices.
///
/// Subsetting re-indexes by rank: surviving points keep their relative
/// order and are renumbered 0..len-1.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    points: Vec<Point3>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Self {
        PointCloud { points }
    }

    pub fn empty() -> Self {
        PointCloud { points: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn get(&self, index: usize) -> Option<&Point3> {
        self.points.get(index)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Point3> {
        self.points.iter()
    }

    pub fn into_points(self) -> Vec<Point3> {
        self.points
    }

    /// Subset by ascending indices (rank rule: relative order preserved).
    pub fn subset(&self, indices: &[u32]) -> PointCloud {
        PointCloud::new(
            indices
                .iter()
                .map(|&i| self.points[i as usize])
                .collect(),
        )
    }

    /// Complement subset: every point whose index is *not* in `dropped`.
    /// `dropped` must be sorted ascending.
    pub fn without(&self, dropped: &[u32]) -> PointCloud {
        let mut out = Vec::with_capacity(self.len() - dropped.len());
        let mut next = dropped.iter().copied().peekable();
        for (i, p) in self.points.iter().enumerate() {
            if next.peek() == Some(&(i as u32)) {
                next.next();
            } else {
                out.push(*p);
            }
        }
        PointCloud::new(out)
    }

    pub fn map(&self, f: impl Fn(&Point3) -> Point3) -> PointCloud {
        PointCloud::new(self.points.iter().map(f).collect())
    }
}

impl FromIterator<Point3> for PointCloud {
    fn from_iter<T: IntoIterator<Item = Point3>>(iter: T) -> Self {
        PointCloud::new(iter.into_iter().collect())
    }
}

/// Azimuth of a point: atan2(y, x), range (-pi, pi], 0 along +x,
/// positive toward +y. Undefined on the z-axis.
pub fn azimuth(p: &Point3) -> Result<f64> {
    if p.x == 0.0 && p.y == 0.0 {
        return Err(Error::UndefinedAzimuth);
    }
    let a = p.y.atan2(p.x);
    // atan2(-0.0, x<0) yields -pi; fold onto +pi to keep the half-open range.
    if a == -std::f64::consts::PI {
        Ok(std::f64::consts::PI)
    } else {
        Ok(a)
    }
}

/// Euclidean distance from the sensor origin.
pub fn range(p: &Point3) -> f64 {
    (p.x * p.x + p.y * p.y + p.z * p.z).sqrt()
}

/// Mirror a cloud across the x-axis: (x, y, z) -> (x, -y, z).
/// Index order is preserved; applying twice is the identity.
pub fn mirror_x(cloud: &PointCloud) -> PointCloud {
    cloud.map(|p| Point3::new(p.x, -p.y, p.z))
}

const ORTHONORMAL_TOL: f64 = 1e-9;

/// An oriented 3D bounding box: center, full side lengths, proper rotation.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundingBox {
    pub center: Point3,
    pub extent: Point3,
    pub rotation: Matrix3<f64>,
}

impl BoundingBox {
    /// Validates orthonormality (1e-9), det = +1 (1e-9) and positive extents.
    pub fn new(center: Point3, extent: Point3, rotation: Matrix3<f64>) -> Result<Self> {
        if !(extent.x > 0.0 && extent.y > 0.0 && extent.z > 0.0) {
            return Err(Error::InvalidBoundingBox(format!(
                "extent must be strictly positive, got ({}, {}, {})",
                extent.x, extent.y, extent.z
            )));
        }
        let gram = rotation.transpose() * rotation;
        let dev = (gram - Matrix3::identity()).abs().max();
        if dev > ORTHONORMAL_TOL {
            return Err(Error::InvalidBoundingBox(format!(
                "rotation not orthonormal (deviation {dev:.2e})"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(Error::InvalidBoundingBox(format!(
                "rotation determinant {det} != 1"
            )));
        }
        Ok(BoundingBox {
            center,
            extent,
            rotation,
        })
    }

    /// Axis-aligned box (identity rotation).
    pub fn axis_aligned(center: Point3, extent: Point3) -> Result<Self> {
        BoundingBox::new(center, extent, Matrix3::identity())
    }

    /// Box rotated about z by `yaw` radians.
    pub fn with_yaw(center: Point3, extent: Point3, yaw: f64) -> Result<Self> {
        BoundingBox::new(center, extent, rotation_z(yaw))
    }

    /// Heading extracted from the rotation's first column.
    pub fn yaw(&self) -> f64 {
        self.rotation[(1, 0)].atan2(self.rotation[(0, 0)])
    }

    /// Closed-interval containment test in the box's local frame.
    pub fn contains(&self, p: &Point3) -> bool {
        let local = self.rotation.transpose() * (p.vector() - self.center.vector());
        local.x.abs() <= self.extent.x / 2.0
            && local.y.abs() <= self.extent.y / 2.0
            && local.z.abs() <= self.extent.z / 2.0
    }

    /// The eight corners in world coordinates.
    pub fn corners(&self) -> [Point3; 8] {
        let h = Vector3::new(self.extent.x / 2.0, self.extent.y / 2.0, self.extent.z / 2.0);
        let mut out = [Point3::default(); 8];
        for (i, corner) in out.iter_mut().enumerate() {
            let sx = if i & 1 == 0 { -1.0 } else { 1.0 };
            let sy = if i & 2 == 0 { -1.0 } else { 1.0 };
            let sz = if i & 4 == 0 { -1.0 } else { 1.0 };
            let local = Vector3::new(sx * h.x, sy * h.y, sz * h.z);
            *corner = Point3::from_vector(&(self.center.vector() + self.rotation * local));
        }
        out
    }

    /// Mirror across the x-axis: conjugates the rotation, flips center y.
    pub fn mirrored_x(&self) -> Self {
        let m = Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, 1.0));
        BoundingBox {
            center: Point3::new(self.center.x, -self.center.y, self.center.z),
            extent: self.extent,
            rotation: m * self.rotation * m,
        }
    }
}

/// Rotation about the z-axis by `theta` radians.
pub fn rotation_z(theta: f64) -> Matrix3<f64> {
    let (s, c) = theta.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// The 3D prism in the sensor frame within which objects are placed and
/// labels are valid.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionRegion {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl DetectionRegion {
    pub fn new(
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
        z_min: f64,
        z_max: f64,
    ) -> Result<Self> {
        let region = DetectionRegion {
            x_min,
            x_max,
            y_min,
            y_max,
            z_min,
            z_max,
        };
        region.validate()?;
        Ok(region)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_min < self.x_max && self.y_min < self.y_max && self.z_min < self.z_max) {
            return Err(Error::InvalidRegion(format!(
                "bounds must satisfy min < max per axis, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }

    pub fn contains(&self, p: &Point3) -> bool {
        self.contains_xy(p.x, p.y) && p.z >= self.z_min && p.z <= self.z_max
    }
}

/// Lidar beam layout: a grid of elevation angles by evenly spaced azimuths.
///
/// Elevation angles are stored in degrees, sorted ascending. Azimuth angles
/// are derived as `azimuth_count` evenly spaced steps over [0, 360).
#[derive(Debug, Clone, PartialEq)]
pub struct SensorModel {
    elevation_angles: Vec<f64>,
    azimuth_count: usize,
}

impl SensorModel {
    pub fn new(elevation_angles: Vec<f64>, azimuth_count: usize) -> Result<Self> {
        if elevation_angles.is_empty() {
            return Err(Error::InvalidSensor("need at least one elevation angle".into()));
        }
        if azimuth_count == 0 {
            return Err(Error::InvalidSensor("azimuth_count must be positive".into()));
        }
        if elevation_angles.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidSensor(
                "elevation angles must be sorted ascending".into(),
            ));
        }
        Ok(SensorModel {
            elevation_angles,
            azimuth_count,
        })
    }

    /// `n_elev` elevations evenly spaced over [min_deg, max_deg] inclusive.
    pub fn evenly_spaced(min_deg: f64, max_deg: f64, n_elev: usize, n_azim: usize) -> Result<Self> {
        if n_elev == 0 {
            return Err(Error::InvalidSensor("need at least one elevation angle".into()));
        }
        let angles = if n_elev == 1 {
            vec![min_deg]
        } else {
            let step = (max_deg - min_deg) / (n_elev - 1) as f64;
            (0..n_elev).map(|i| min_deg + step * i as f64).collect()
        };
        SensorModel::new(angles, n_azim)
    }

    /// 128 elevations over [-22.5, 22.5] degrees, 2048 azimuths.
    pub fn os1_128() -> Self {
        SensorModel::evenly_spaced(-22.5, 22.5, 128, 2048).unwrap()
    }

    /// 64 elevations over [-24.8, 2.0] degrees, 2083 azimuths.
    pub fn hdl_64() -> Self {
        SensorModel::evenly_spaced(-24.8, 2.0, 64, 2083).unwrap()
    }

    /// Look up a sensor by its config preset name.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "os1-128" => Some(Self::os1_128()),
            "hdl-64" => Some(Self::hdl_64()),
            _ => None,
        }
    }

    pub fn elevation_angles(&self) -> &[f64] {
        &self.elevation_angles
    }

    pub fn azimuth_count(&self) -> usize {
        self.azimuth_count
    }
}
