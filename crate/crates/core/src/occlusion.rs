//! Sector extraction and approximate ray-intersection occlusion.
//!
//! A point is occluded when the ray from the sensor to it passes within a
//! threshold of some point in front of it. The occlusion test against a
//! full background is narrowed to the object's azimuth sector first; the
//! windowing is a pure optimization and never changes the answer.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{azimuth, range, PointCloud};

/// Index subsets of a background cloud relative to an object's sector.
///
/// `alpha`: points inside the object's azimuth window (plus tolerance).
/// `beta`: alpha points no farther than the farthest object point — the
/// candidates that can occlude the object.
/// `gamma`: alpha points no closer than the nearest object point — the
/// candidates the object can occlude.
///
/// All lists hold original background indices, ascending (rank order).
#[derive(Debug, Clone, PartialEq)]
pub struct SectorSubsets {
    pub alpha: Vec<u32>,
    pub beta: Vec<u32>,
    pub gamma: Vec<u32>,
}

/// Extract the sector subsets for `object` with azimuth tolerance `epsilon`.
///
/// The window test runs in an azimuth frame rotated so the object's
/// circular-mean azimuth maps to zero, which keeps a window that straddles
/// the +-pi seam contiguous.
pub fn sector_subset(
    background: &PointCloud,
    object: &PointCloud,
    epsilon: f64,
) -> Result<SectorSubsets> {
    let mut sin_sum = 0.0;
    let mut cos_sum = 0.0;
    let mut object_azimuths = Vec::with_capacity(object.len());
    let mut range_min = f64::INFINITY;
    let mut range_max = f64::NEG_INFINITY;
    for p in object.iter() {
        let r = range(p);
        range_min = range_min.min(r);
        range_max = range_max.max(r);
        if let Ok(a) = azimuth(p) {
            sin_sum += a.sin();
            cos_sum += a.cos();
            object_azimuths.push(a);
        }
    }
    if object_azimuths.is_empty() {
        return Err(Error::EmptySectorObject);
    }
    let mean = sin_sum.atan2(cos_sum);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for a in &object_azimuths {
        let s = wrap_angle(a - mean);
        lo = lo.min(s);
        hi = hi.max(s);
    }
    lo -= epsilon;
    hi += epsilon;
    let full_circle = hi - lo >= 2.0 * std::f64::consts::PI;

    let mut alpha = Vec::new();
    let mut beta = Vec::new();
    let mut gamma = Vec::new();
    for (i, p) in background.iter().enumerate() {
        let a = match azimuth(p) {
            Ok(a) => a,
            Err(_) => continue, // points on the z-axis have no sector
        };
        if !full_circle {
            let s = wrap_angle(a - mean);
            if s <= lo || s >= hi {
                continue;
            }
        }
        let i = i as u32;
        alpha.push(i);
        let r = range(p);
        if r <= range_max {
            beta.push(i);
        }
        if r >= range_min {
            gamma.push(i);
        }
    }
    Ok(SectorSubsets { alpha, beta, gamma })
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * std::f64::consts::PI);
    if a > std::f64::consts::PI {
        a -= 2.0 * std::f64::consts::PI;
    } else if a <= -std::f64::consts::PI {
        a += 2.0 * std::f64::consts::PI;
    }
    a
}

/// Drop every target point whose sensor ray passes within `threshold` of an
/// occluder point in front of it.
///
/// For target t and occluder b, the perpendicular distance from b to the
/// ray through t is sqrt(|b|^2 - (b . t_hat)^2); only occluders with a
/// positive projection count — rays are half-lines, so points behind the
/// sensor never occlude. Returns the kept cloud (order preserved) and the
/// dropped indices, ascending.
pub fn ray_occlude(
    target: &PointCloud,
    occluder: &PointCloud,
    threshold: f64,
) -> (PointCloud, Vec<u32>) {
    assert!(threshold > 0.0, "occlusion threshold must be positive");
    if occluder.is_empty() || target.is_empty() {
        return (target.clone(), Vec::new());
    }
    let occ: Vec<(f64, f64, f64, f64)> = occluder
        .iter()
        .map(|b| (b.x, b.y, b.z, b.vector().norm_squared()))
        .collect();

    let dropped_mask: Vec<bool> = target
        .points()
        .par_iter()
        .map(|t| {
            let r = range(t);
            if r == 0.0 {
                return false; // no ray to intersect
            }
            let (ux, uy, uz) = (t.x / r, t.y / r, t.z / r);
            occ.iter().any(|&(bx, by, bz, norm_sq)| {
                let s = bx * ux + by * uy + bz * uz;
                if s <= 0.0 {
                    return false;
                }
                (norm_sq - s * s).max(0.0).sqrt() < threshold
            })
        })
        .collect();

    let mut kept = Vec::with_capacity(target.len());
    let mut dropped = Vec::new();
    for (i, (p, &gone)) in target.iter().zip(dropped_mask.iter()).enumerate() {
        if gone {
            dropped.push(i as u32);
        } else {
            kept.push(*p);
        }
    }
    (PointCloud::new(kept), dropped)
}

/// Run both occlusion passes between a background and an inserted object.
///
/// The object is occluded by the in-sector background points in front of it
/// (threshold `f_o`); the background points behind the object are occluded
/// by the object (threshold `f_b`). Dropped background indices are reported
/// in the background's original indexing.
pub fn occlude_scene(
    background: &PointCloud,
    object: &PointCloud,
    f_o: f64,
    f_b: f64,
    epsilon: f64,
) -> Result<(PointCloud, Vec<u32>)> {
    let subsets = sector_subset(background, object, epsilon)?;
    let beta_cloud = background.subset(&subsets.beta);
    let gamma_cloud = background.subset(&subsets.gamma);
    let (object_kept, _) = ray_occlude(object, &beta_cloud, f_o);
    let (_, gamma_dropped) = ray_occlude(&gamma_cloud, object, f_b);
    let background_dropped: Vec<u32> = gamma_dropped
        .iter()
        .map(|&local| subsets.gamma[local as usize])
        .collect();
    Ok((object_kept, background_dropped))
}
