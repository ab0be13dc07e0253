//! Procedural test scenes: analytic shapes ray-cast against a beam grid.
//!
//! Casting exact plane/quadric intersections along real beam directions
//! gives fixtures the same sampling structure as captured scans, which is
//! what the occlusion and resampling checks need.

use nalgebra::Vector3;

use crate::beam::beam_directions;
use crate::geom::{BoundingBox, Point3, PointCloud, SensorModel};

/// Analytic shapes understood by the caster.
#[derive(Debug, Clone, Copy)]
pub enum Shape {
    /// Ground plane z = b0 + b1 x + b2 y.
    Plane { b0: f64, b1: f64, b2: f64 },
    /// Solid cone with its base disk facing the sensor: base center as
    /// given, axis along +x, apex at base + (height, 0, 0).
    Cone {
        base_center: Point3,
        radius: f64,
        height: f64,
    },
    /// Vertical rectangle in the plane x = `x`, facing the sensor.
    Wall {
        x: f64,
        y_min: f64,
        y_max: f64,
        z_min: f64,
        z_max: f64,
    },
    Sphere { center: Point3, radius: f64 },
}

/// A generated fixture cloud plus, for compact shapes, its bounding box.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub cloud: PointCloud,
    pub bounding_box: Option<BoundingBox>,
}

/// Cast every beam against `shapes` and keep the nearest hit per beam.
/// Output is ordered by beam index; beams that miss contribute nothing.
pub fn raycast_scene(shapes: &[Shape], sensor: &SensorModel, max_range: f64) -> PointCloud {
    let grid = beam_directions(sensor);
    let mut points = Vec::new();
    for dir in grid.directions() {
        let mut best = f64::INFINITY;
        for shape in shapes {
            if let Some(s) = intersect(shape, dir) {
                if s < best {
                    best = s;
                }
            }
        }
        if best.is_finite() && best <= max_range {
            points.push(Point3::from_vector(&(dir * best)));
        }
    }
    PointCloud::new(points)
}

/// Cast a single shape; cone and sphere also report a bounding box.
pub fn make_fixture(shape: &Shape, sensor: &SensorModel, max_range: f64) -> Fixture {
    let cloud = raycast_scene(std::slice::from_ref(shape), sensor, max_range);
    if cloud.is_empty() {
        log::warn!("fixture shape {shape:?} is outside all beams");
    }
    let bounding_box = match *shape {
        Shape::Cone {
            base_center,
            radius,
            height,
        } => Some(
            BoundingBox::axis_aligned(
                Point3::new(base_center.x + height / 2.0, base_center.y, base_center.z),
                Point3::new(height, 2.0 * radius, 2.0 * radius),
            )
            .expect("cone box"),
        ),
        Shape::Sphere { center, radius } => Some(
            BoundingBox::axis_aligned(center, Point3::new(2.0, 2.0, 2.0).map_scale(radius))
                .expect("sphere box"),
        ),
        _ => None,
    };
    Fixture {
        cloud,
        bounding_box,
    }
}

trait MapScale {
    fn map_scale(self, k: f64) -> Self;
}

impl MapScale for Point3 {
    fn map_scale(self, k: f64) -> Self {
        Point3::new(self.x * k, self.y * k, self.z * k)
    }
}

/// Smallest positive ray parameter hitting the shape, if any.
fn intersect(shape: &Shape, dir: &Vector3<f64>) -> Option<f64> {
    match *shape {
        Shape::Plane { b0, b1, b2 } => {
            let denom = dir.z - b1 * dir.x - b2 * dir.y;
            if denom.abs() < 1e-12 {
                return None;
            }
            positive(b0 / denom)
        }
        Shape::Wall {
            x,
            y_min,
            y_max,
            z_min,
            z_max,
        } => {
            if dir.x.abs() < 1e-12 {
                return None;
            }
            let s = x / dir.x;
            let s = positive(s)?;
            let p = dir * s;
            if p.y >= y_min && p.y <= y_max && p.z >= z_min && p.z <= z_max {
                Some(s)
            } else {
                None
            }
        }
        Shape::Sphere { center, radius } => {
            let c = center.vector();
            let b = dir.dot(&c);
            let disc = b * b - (c.norm_squared() - radius * radius);
            if disc < 0.0 {
                return None;
            }
            let sq = disc.sqrt();
            positive(b - sq).or_else(|| positive(b + sq))
        }
        Shape::Cone {
            base_center,
            radius,
            height,
        } => {
            let mut best = f64::INFINITY;
            // Base disk at x = base_center.x, facing the sensor.
            if dir.x.abs() >= 1e-12 {
                if let Some(s) = positive(base_center.x / dir.x) {
                    let p = dir * s;
                    let dy = p.y - base_center.y;
                    let dz = p.z - base_center.z;
                    if dy * dy + dz * dz <= radius * radius {
                        best = best.min(s);
                    }
                }
            }
            // Lateral surface: apex A, axis w = -x (toward the base),
            // half-angle beta with tan(beta) = radius / height.
            let apex =
                Vector3::new(base_center.x + height, base_center.y, base_center.z);
            let w = Vector3::new(-1.0, 0.0, 0.0);
            let cos2 = {
                let c = height / (height * height + radius * radius).sqrt();
                c * c
            };
            let dw = dir.dot(&w);
            let aw = apex.dot(&w);
            let da = dir.dot(&apex);
            let a2 = dw * dw - cos2;
            let a1 = -dw * aw + cos2 * da;
            let a0 = aw * aw - cos2 * apex.norm_squared();
            let disc = a1 * a1 - a2 * a0;
            if a2.abs() > 1e-15 && disc >= 0.0 {
                let sq = disc.sqrt();
                for s in [(-a1 - sq) / a2, (-a1 + sq) / a2] {
                    if let Some(s) = positive(s) {
                        let u = dir * s - apex;
                        let along = u.dot(&w);
                        if along >= 0.0 && along <= height {
                            best = best.min(s);
                        }
                    }
                }
            }
            if best.is_finite() {
                Some(best)
            } else {
                None
            }
        }
    }
}

fn positive(s: f64) -> Option<f64> {
    if s > 1e-9 {
        Some(s)
    } else {
        None
    }
}
