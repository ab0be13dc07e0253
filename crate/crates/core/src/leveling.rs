//! Ground-plane estimation and the leveling transform.
//!
//! A scene is leveled by (1) laying a grid of probe points at the scene's
//! minimum in-region height, (2) taking the scene points nearest to those
//! probes as ground points, (3) fitting z = b0 + b1 x + b2 y by least
//! squares, and (4) rotating the fitted normal onto +z and shifting the
//! plane to z = 0.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geom::{BoundingBox, Point3, PointCloud};
use crate::spatial::KdTree;

/// Default probe grid resolution (G x G).
pub const DEFAULT_GRID_G: usize = 20;

/// The xy rectangle the ground is estimated over:
/// x in [x_min, x_max], y in [-y_max, y_max].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRegion {
    pub x_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl GridRegion {
    pub fn contains(&self, p: &Point3) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= -self.y_max && p.y <= self.y_max
    }
}

/// Fitted ground plane z = b0 + b1 x + b2 y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundPlane {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
}

impl GroundPlane {
    /// Plane normal [-b1, -b2, 1]; positive z-component by construction.
    pub fn normal(&self) -> Vector3<f64> {
        Vector3::new(-self.b1, -self.b2, 1.0)
    }

    pub fn unit_normal(&self) -> Vector3<f64> {
        self.normal().normalize()
    }

    /// Plane height at (x, y).
    pub fn height_at(&self, x: f64, y: f64) -> f64 {
        self.b0 + self.b1 * x + self.b2 * y
    }
}

/// Rigid transform that maps a fitted ground plane onto z = 0:
/// leveled = rotation * p - translation.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl LevelTransform {
    pub fn identity() -> Self {
        LevelTransform {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }
}

/// G x G probe points evenly spaced over the region (inclusive endpoints),
/// all at the minimum z of the in-region scene points.
pub fn build_ground_grid(cloud: &PointCloud, region: &GridRegion, g: usize) -> Result<PointCloud> {
    assert!(g >= 1, "grid resolution must be positive");
    let min_z = cloud
        .iter()
        .filter(|p| region.contains(p))
        .map(|p| p.z)
        .fold(f64::INFINITY, f64::min);
    if !min_z.is_finite() {
        return Err(Error::EmptyGroundRegion);
    }
    let lerp = |lo: f64, hi: f64, i: usize| {
        if g == 1 {
            lo
        } else {
            lo + (hi - lo) * i as f64 / (g - 1) as f64
        }
    };
    let mut points = Vec::with_capacity(g * g);
    for ix in 0..g {
        let x = lerp(region.x_min, region.x_max, ix);
        for iy in 0..g {
            let y = lerp(-region.y_max, region.y_max, iy);
            points.push(Point3::new(x, y, min_z));
        }
    }
    Ok(PointCloud::new(points))
}

/// The in-region scene points that are the 3D nearest neighbor of at least
/// one grid point. Duplicates are collapsed; relative order is preserved.
pub fn extract_ground_points(
    cloud: &PointCloud,
    grid: &PointCloud,
    region: &GridRegion,
) -> Result<PointCloud> {
    let mut candidates = Vec::new();
    let mut original_index = Vec::new();
    for (i, p) in cloud.iter().enumerate() {
        if region.contains(p) {
            candidates.push(*p);
            original_index.push(i as u32);
        }
    }
    if candidates.is_empty() || grid.is_empty() {
        return Err(Error::EmptyGroundRegion);
    }
    let tree = KdTree::build(&candidates);
    let mut selected: Vec<u32> = grid
        .iter()
        .map(|q| original_index[tree.nearest(q).unwrap()])
        .collect();
    selected.sort_unstable();
    selected.dedup();
    Ok(cloud.subset(&selected))
}

/// Ordinary least squares of z on (1, x, y).
///
/// Coordinates are centered before solving so conditioning does not depend
/// on how far the region sits from the origin.
pub fn fit_ground_plane(ground: &PointCloud) -> Result<GroundPlane> {
    let n = ground.len();
    if n < 3 {
        return Err(Error::DegenerateGroundFit(format!(
            "need at least 3 ground points, got {n}"
        )));
    }
    let nf = n as f64;
    let mean_x = ground.iter().map(|p| p.x).sum::<f64>() / nf;
    let mean_y = ground.iter().map(|p| p.y).sum::<f64>() / nf;
    let mean_z = ground.iter().map(|p| p.z).sum::<f64>() / nf;

    let (mut sxx, mut sxy, mut syy, mut sxz, mut syz) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for p in ground.iter() {
        let dx = p.x - mean_x;
        let dy = p.y - mean_y;
        let dz = p.z - mean_z;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
        sxz += dx * dz;
        syz += dy * dz;
    }

    let det = sxx * syy - sxy * sxy;
    let scale = (sxx * syy).max(sxy * sxy);
    if scale <= 0.0 || det <= scale * 1e-12 {
        return Err(Error::DegenerateGroundFit(
            "ground points are collinear in the xy-projection".into(),
        ));
    }

    let b1 = (syy * sxz - sxy * syz) / det;
    let b2 = (sxx * syz - sxy * sxz) / det;
    let b0 = mean_z - b1 * mean_x - b2 * mean_y;
    Ok(GroundPlane { b0, b1, b2 })
}

/// Rotation that maps the plane's unit normal onto (0, 0, 1), built from
/// the axis-angle cross product: R = I + [v]x + [v]x^2 / (1 + n_z).
///
/// The translation is the plane's height after rotation, (0, 0, b0/|h|),
/// so an exact plane levels to exactly z = 0. The denominator 1 + n_z
/// cannot vanish because the normal's z-component is positive.
pub fn level_transform(plane: &GroundPlane) -> LevelTransform {
    let h = plane.normal();
    let norm = h.norm();
    let n = h / norm;
    let v = n.cross(&Vector3::z());
    let vx = skew(&v);
    let rotation = Matrix3::identity() + vx + vx * vx / (1.0 + n.z);
    LevelTransform {
        rotation,
        translation: Vector3::new(0.0, 0.0, plane.b0 / norm),
    }
}

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Apply the leveling transform: rotate, then translate.
pub fn level(cloud: &PointCloud, t: &LevelTransform) -> PointCloud {
    cloud.map(|p| Point3::from_vector(&(t.rotation * p.vector() - t.translation)))
}

/// Exact inverse of [`level`]: translate back, then rotate back.
pub fn unlevel(cloud: &PointCloud, t: &LevelTransform) -> PointCloud {
    cloud.map(|p| Point3::from_vector(&(t.rotation.transpose() * (p.vector() + t.translation))))
}

pub fn level_point(p: &Point3, t: &LevelTransform) -> Point3 {
    Point3::from_vector(&(t.rotation * p.vector() - t.translation))
}

pub fn unlevel_point(p: &Point3, t: &LevelTransform) -> Point3 {
    Point3::from_vector(&(t.rotation.transpose() * (p.vector() + t.translation)))
}

/// Level a bounding box: transform the center, pre-rotate the orientation.
pub fn level_box(bbox: &BoundingBox, t: &LevelTransform) -> BoundingBox {
    BoundingBox {
        center: level_point(&bbox.center, t),
        extent: bbox.extent,
        rotation: t.rotation * bbox.rotation,
    }
}

pub fn unlevel_box(bbox: &BoundingBox, t: &LevelTransform) -> BoundingBox {
    BoundingBox {
        center: unlevel_point(&bbox.center, t),
        extent: bbox.extent,
        rotation: t.rotation.transpose() * bbox.rotation,
    }
}

/// Full estimation path: grid, ground extraction, fit, transform.
pub fn fit_level_transform(
    cloud: &PointCloud,
    region: &GridRegion,
    g: usize,
) -> Result<(GroundPlane, LevelTransform)> {
    let grid = build_ground_grid(cloud, region, g)?;
    let ground = extract_ground_points(cloud, &grid, region)?;
    let plane = fit_ground_plane(&ground)?;
    let transform = level_transform(&plane);
    Ok((plane, transform))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::nearest_brute_force;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn region_01() -> GridRegion {
        GridRegion {
            x_min: 0.0,
            x_max: 1.0,
            y_max: 1.0,
        }
    }

    fn plane_cloud(b0: f64, b1: f64, b2: f64, region: &GridRegion, n: usize) -> PointCloud {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        (0..n)
            .map(|_| {
                let x = rng.random_range(region.x_min..region.x_max);
                let y = rng.random_range(-region.y_max..region.y_max);
                Point3::new(x, y, b0 + b1 * x + b2 * y)
            })
            .collect()
    }

    #[test]
    fn grid_on_flat_cloud_sits_at_zero() {
        let cloud = PointCloud::new(vec![
            Point3::new(0.2, 0.3, 0.0),
            Point3::new(0.8, -0.5, 0.0),
        ]);
        let grid = build_ground_grid(&cloud, &region_01(), 2).unwrap();
        assert_eq!(grid.len(), 4);
        assert!(grid.iter().all(|p| p.z == 0.0));
    }

    #[test]
    fn grid_takes_the_minimum_z() {
        let cloud = PointCloud::new(vec![
            Point3::new(0.2, 0.3, 0.0),
            Point3::new(0.8, -0.5, -0.3),
        ]);
        let grid = build_ground_grid(&cloud, &region_01(), 2).unwrap();
        assert!(grid.iter().all(|p| p.z == -0.3));
    }

    #[test]
    fn grid_min_of_tilted_plane_is_at_low_corner() {
        // z = 0.1 x over x in [0, 10]: minimum is 0 at x = 0.
        let region = GridRegion {
            x_min: 0.0,
            x_max: 10.0,
            y_max: 2.0,
        };
        let cloud: PointCloud = (0..=10)
            .map(|i| Point3::new(i as f64, 0.0, 0.1 * i as f64))
            .collect();
        let grid = build_ground_grid(&cloud, &region, 3).unwrap();
        assert!(grid.iter().all(|p| p.z == 0.0));
    }

    #[test]
    fn grid_errors_on_empty_region() {
        let cloud = PointCloud::new(vec![Point3::new(50.0, 50.0, 0.0)]);
        assert!(matches!(
            build_ground_grid(&cloud, &region_01(), 2),
            Err(Error::EmptyGroundRegion)
        ));
    }

    #[test]
    fn extract_returns_self_neighbors() {
        let region = region_01();
        let grid = build_ground_grid(
            &PointCloud::new(vec![Point3::new(0.5, 0.0, 0.0)]),
            &region,
            3,
        )
        .unwrap();
        // Cloud equal to the grid points: every one is its own neighbor.
        let ground = extract_ground_points(&grid, &grid, &region).unwrap();
        assert_eq!(ground, grid);
    }

    #[test]
    fn extract_dedups_a_single_candidate() {
        let region = region_01();
        let cloud = PointCloud::new(vec![Point3::new(0.3, 0.1, -0.2), Point3::new(9.0, 9.0, 0.0)]);
        let grid = build_ground_grid(&cloud, &region, 5).unwrap();
        let ground = extract_ground_points(&cloud, &grid, &region).unwrap();
        assert_eq!(ground.len(), 1);
        assert_eq!(ground.points()[0], Point3::new(0.3, 0.1, -0.2));
    }

    #[test]
    fn extract_skips_elevated_canopy() {
        // Plane points plus a canopy 1 m up: the canopy is never nearest to
        // grid probes pinned at the minimum z. Verified against brute force.
        let region = region_01();
        let mut pts: Vec<Point3> = plane_cloud(0.0, 0.0, 0.0, &region, 200)
            .into_points();
        let n_plane = pts.len();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            pts.push(Point3::new(
                rng.random_range(0.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(1.0..1.5),
            ));
        }
        let cloud = PointCloud::new(pts.clone());
        let grid = build_ground_grid(&cloud, &region, 10).unwrap();
        let ground = extract_ground_points(&cloud, &grid, &region).unwrap();
        assert!(ground.iter().all(|p| p.z < 1.0), "canopy point selected");

        // Brute-force all-pairs oracle over the same candidates.
        let mut expected: Vec<u32> = grid
            .iter()
            .map(|q| nearest_brute_force(&pts, q).unwrap() as u32)
            .collect();
        expected.sort_unstable();
        expected.dedup();
        assert_eq!(ground, cloud.subset(&expected));
        assert!(expected.iter().all(|&i| (i as usize) < n_plane));
    }

    #[test]
    fn fit_constant_plane() {
        let cloud = plane_cloud(0.5, 0.0, 0.0, &region_01(), 50);
        let plane = fit_ground_plane(&cloud).unwrap();
        assert_abs_diff_eq!(plane.b0, 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(plane.b1, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(plane.b2, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn fit_recovers_exact_plane() {
        let cloud = plane_cloud(0.2, 0.1, 0.05, &region_01(), 40);
        let plane = fit_ground_plane(&cloud).unwrap();
        assert_abs_diff_eq!(plane.b0, 0.2, epsilon = 1e-9);
        assert_abs_diff_eq!(plane.b1, 0.1, epsilon = 1e-9);
        assert_abs_diff_eq!(plane.b2, 0.05, epsilon = 1e-9);
    }

    #[test]
    fn fit_matches_normal_equations_oracle() {
        // Independent closed-form solve of the uncentered normal equations.
        let cloud = plane_cloud(-0.8, 0.12, -0.07, &region_01(), 24);
        let plane = fit_ground_plane(&cloud).unwrap();

        let n = cloud.len() as f64;
        let (mut sx, mut sy, mut sz) = (0.0, 0.0, 0.0);
        let (mut sxx, mut sxy, mut syy, mut sxz, mut syz) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for p in cloud.iter() {
            sx += p.x;
            sy += p.y;
            sz += p.z;
            sxx += p.x * p.x;
            sxy += p.x * p.y;
            syy += p.y * p.y;
            sxz += p.x * p.z;
            syz += p.y * p.z;
        }
        let a = nalgebra::Matrix3::new(n, sx, sy, sx, sxx, sxy, sy, sxy, syy);
        let rhs = nalgebra::Vector3::new(sz, sxz, syz);
        let sol = a.lu().solve(&rhs).unwrap();
        assert_abs_diff_eq!(plane.b0, sol[0], epsilon = 1e-9);
        assert_abs_diff_eq!(plane.b1, sol[1], epsilon = 1e-9);
        assert_abs_diff_eq!(plane.b2, sol[2], epsilon = 1e-9);
    }

    #[test]
    fn fit_is_unchanged_by_symmetric_noise() {
        let base = plane_cloud(0.3, 0.08, -0.02, &region_01(), 30);
        let clean = fit_ground_plane(&base).unwrap();
        let delta = 0.05;
        let noisy: PointCloud = base
            .iter()
            .flat_map(|p| {
                [
                    Point3::new(p.x, p.y, p.z + delta),
                    Point3::new(p.x, p.y, p.z - delta),
                ]
            })
            .collect();
        let fitted = fit_ground_plane(&noisy).unwrap();
        assert_abs_diff_eq!(fitted.b0, clean.b0, epsilon = 1e-9);
        assert_abs_diff_eq!(fitted.b1, clean.b1, epsilon = 1e-9);
        assert_abs_diff_eq!(fitted.b2, clean.b2, epsilon = 1e-9);
    }

    #[test]
    fn fit_rejects_too_few_points() {
        let cloud = PointCloud::new(vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0)]);
        assert!(matches!(
            fit_ground_plane(&cloud),
            Err(Error::DegenerateGroundFit(_))
        ));
    }

    #[test]
    fn fit_rejects_collinear_xy() {
        let cloud: PointCloud = (0..10)
            .map(|i| Point3::new(i as f64, 2.0 * i as f64, 0.1 * i as f64))
            .collect();
        assert!(matches!(
            fit_ground_plane(&cloud),
            Err(Error::DegenerateGroundFit(_))
        ));
    }

    #[test]
    fn flat_plane_gives_identity_rotation() {
        let t = level_transform(&GroundPlane {
            b0: 0.4,
            b1: 0.0,
            b2: 0.0,
        });
        assert_abs_diff_eq!(
            (t.rotation - Matrix3::identity()).abs().max(),
            0.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(t.translation.z, 0.4, epsilon = 1e-15);
    }

    #[test]
    fn rotation_maps_normal_to_z() {
        let plane = GroundPlane {
            b0: 0.0,
            b1: 0.1,
            b2: 0.05,
        };
        let t = level_transform(&plane);
        let mapped = t.rotation * plane.unit_normal();
        assert_abs_diff_eq!(mapped.x, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(mapped.y, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(mapped.z, 1.0, epsilon = 1e-9);
        let gram = t.rotation.transpose() * t.rotation;
        assert!((gram - Matrix3::identity()).abs().max() < 1e-9);
    }

    #[test]
    fn rotation_is_proper() {
        for (b1, b2) in [(0.3, -0.2), (-0.05, 0.0), (0.9, 0.9)] {
            let t = level_transform(&GroundPlane { b0: 1.0, b1, b2 });
            assert_abs_diff_eq!(t.rotation.determinant(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn identity_transform_is_a_noop() {
        let cloud = plane_cloud(0.2, 0.1, 0.05, &region_01(), 10);
        assert_eq!(level(&cloud, &LevelTransform::identity()), cloud);
        assert_eq!(unlevel(&cloud, &LevelTransform::identity()), cloud);
    }

    #[test]
    fn exact_plane_levels_to_zero() {
        let region = region_01();
        let cloud = plane_cloud(0.2, 0.1, 0.05, &region, 500);
        let (_, t) = fit_level_transform(&cloud, &region, 10).unwrap();
        let leveled = level(&cloud, &t);
        for p in leveled.iter() {
            assert_abs_diff_eq!(p.z, 0.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn releveling_a_leveled_cloud_is_near_identity() {
        let region = region_01();
        let cloud = plane_cloud(-0.5, 0.2, -0.1, &region, 500);
        let (_, t) = fit_level_transform(&cloud, &region, 10).unwrap();
        let leveled = level(&cloud, &t);
        let (plane2, t2) = fit_level_transform(&leveled, &region, 10).unwrap();
        assert!((t2.rotation - Matrix3::identity()).abs().max() < 1e-6);
        assert!(plane2.b0.abs() < 1e-6);
    }

    #[test]
    fn unlevel_inverts_level() {
        let region = region_01();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let cloud: PointCloud = (0..200)
            .map(|_| {
                Point3::new(
                    rng.random_range(-5.0..5.0),
                    rng.random_range(-5.0..5.0),
                    rng.random_range(-2.0..2.0),
                )
            })
            .collect();
        let ground = plane_cloud(0.7, -0.15, 0.08, &region, 100);
        let plane = fit_ground_plane(&ground).unwrap();
        let t = level_transform(&plane);
        let round = unlevel(&level(&cloud, &t), &t);
        for (a, b) in cloud.iter().zip(round.iter()) {
            assert!(a.distance(b) < 1e-9);
        }
    }

    #[test]
    fn unlevel_of_origin_is_rotated_translation() {
        let plane = GroundPlane {
            b0: 0.7,
            b1: 0.1,
            b2: -0.2,
        };
        let r = level_transform(&plane).rotation;
        // Single-point matrix oracle with a directly constructed transform.
        let t = LevelTransform {
            rotation: r,
            translation: Vector3::new(0.0, 0.0, 0.7),
        };
        let got = unlevel_point(&Point3::new(0.0, 0.0, 0.0), &t);
        let expected = r.transpose() * Vector3::new(0.0, 0.0, 0.7);
        assert!(got.vector().metric_distance(&expected) < 1e-15);
    }

    proptest! {
        #[test]
        fn random_planes_level_their_normal(b0 in -2.0..2.0f64, b1 in -1.0..1.0f64, b2 in -1.0..1.0f64) {
            let plane = GroundPlane { b0, b1, b2 };
            let t = level_transform(&plane);
            let mapped = t.rotation * plane.unit_normal();
            prop_assert!((mapped - Vector3::z()).norm() < 1e-9);
            prop_assert!((t.rotation.transpose() * t.rotation - Matrix3::identity()).abs().max() < 1e-9);
        }

        #[test]
        fn level_preserves_pairwise_distances(
            b1 in -0.5..0.5f64,
            b2 in -0.5..0.5f64,
            pts in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64, -3.0..3.0f64), 2..20)
        ) {
            let t = level_transform(&GroundPlane { b0: 0.3, b1, b2 });
            let cloud = PointCloud::new(pts.iter().map(|&(x, y, z)| Point3::new(x, y, z)).collect());
            let leveled = level(&cloud, &t);
            let unleveled = unlevel(&cloud, &t);
            for i in 0..cloud.len() {
                for j in (i + 1)..cloud.len() {
                    let d0 = cloud.points()[i].distance(&cloud.points()[j]);
                    prop_assert!((leveled.points()[i].distance(&leveled.points()[j]) - d0).abs() < 1e-9);
                    prop_assert!((unleveled.points()[i].distance(&unleveled.points()[j]) - d0).abs() < 1e-9);
                }
            }
        }
    }
}
