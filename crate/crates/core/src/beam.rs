//! Sensor beam grid and the surface resampler.
//!
//! The resampler re-renders an object's surface as the beam grid would see
//! it at its current range: per beam, take up to the two object points
//! nearest the beam ray and emit their averaged projection, so point
//! density tracks how many beams actually subtend the object.

use nalgebra::Vector3;

use crate::geom::{azimuth, range, Point3, PointCloud, SensorModel};

/// Beam directions for an (elevation x azimuth) sensor grid.
///
/// Beam index a = elevation_index * azimuth_count + azimuth_index.
#[derive(Debug, Clone)]
pub struct BeamGrid {
    elevations_rad: Vec<f64>,
    azimuths_rad: Vec<f64>,
    directions: Vec<Vector3<f64>>,
}

impl BeamGrid {
    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn n_elev(&self) -> usize {
        self.elevations_rad.len()
    }

    pub fn n_azim(&self) -> usize {
        self.azimuths_rad.len()
    }

    pub fn direction(&self, beam: usize) -> Vector3<f64> {
        self.directions[beam]
    }

    pub fn elevation_rad(&self, beam: usize) -> f64 {
        self.elevations_rad[beam / self.azimuths_rad.len()]
    }

    pub fn azimuth_rad(&self, beam: usize) -> f64 {
        self.azimuths_rad[beam % self.azimuths_rad.len()]
    }

    pub fn directions(&self) -> &[Vector3<f64>] {
        &self.directions
    }
}

/// Build the unit beam directions for a sensor.
///
/// Direction for elevation e, azimuth a is (cos e cos a, cos e sin a, sin e).
/// Azimuths are evenly spaced over [0, 360) degrees, exclusive of 360.
pub fn beam_directions(sensor: &SensorModel) -> BeamGrid {
    let elevations_rad: Vec<f64> = sensor
        .elevation_angles()
        .iter()
        .map(|deg| deg.to_radians())
        .collect();
    let n_azim = sensor.azimuth_count();
    let azimuths_rad: Vec<f64> = (0..n_azim)
        .map(|i| 2.0 * std::f64::consts::PI * i as f64 / n_azim as f64)
        .collect();
    let mut directions = Vec::with_capacity(elevations_rad.len() * n_azim);
    for &e in &elevations_rad {
        let (se, ce) = e.sin_cos();
        for &a in &azimuths_rad {
            let (sa, ca) = a.sin_cos();
            directions.push(Vector3::new(ce * ca, ce * sa, se));
        }
    }
    BeamGrid {
        elevations_rad,
        azimuths_rad,
        directions,
    }
}

/// Beams whose elevation and azimuth lie within the object's angular
/// footprint expanded by `margin` radians.
///
/// Superset guarantee: with margin at least the half-angle any object point
/// subtends at threshold distance, resampling restricted to these beams
/// equals resampling over the full grid.
pub fn candidate_beams(grid: &BeamGrid, object: &PointCloud, margin: f64) -> Vec<usize> {
    if object.is_empty() || grid.is_empty() {
        return Vec::new();
    }
    let mut elev_min = f64::INFINITY;
    let mut elev_max = f64::NEG_INFINITY;
    let mut sin_sum = 0.0;
    let mut cos_sum = 0.0;
    let mut azimuths = Vec::with_capacity(object.len());
    for p in object.iter() {
        let r = range(p);
        if r == 0.0 {
            continue;
        }
        let e = (p.z / r).asin();
        elev_min = elev_min.min(e);
        elev_max = elev_max.max(e);
        if let Ok(a) = azimuth(p) {
            sin_sum += a.sin();
            cos_sum += a.cos();
            azimuths.push(a);
        }
    }
    if azimuths.is_empty() || !elev_min.is_finite() {
        return Vec::new();
    }
    // Azimuth window in a frame centered on the circular mean so a footprint
    // straddling the +-pi seam stays contiguous.
    let mean = sin_sum.atan2(cos_sum);
    let mut az_lo = f64::INFINITY;
    let mut az_hi = f64::NEG_INFINITY;
    for a in &azimuths {
        let s = wrap_angle(a - mean);
        az_lo = az_lo.min(s);
        az_hi = az_hi.max(s);
    }
    az_lo -= margin;
    az_hi += margin;
    let full_circle = az_hi - az_lo >= 2.0 * std::f64::consts::PI;

    let mut out = Vec::new();
    for beam in 0..grid.len() {
        let e = grid.elevation_rad(beam);
        if e < elev_min - margin || e > elev_max + margin {
            continue;
        }
        if !full_circle {
            let s = wrap_angle(grid.azimuth_rad(beam) - mean);
            if s < az_lo || s > az_hi {
                continue;
            }
        }
        out.push(beam);
    }
    out
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

/// Resample an object onto the beam grid.
///
/// Per beam: over object points with positive projection onto the beam,
/// compute the perpendicular distance d to the ray. Points with d < L are
/// hits. Two or more hits: emit the average of the two closest projections.
/// Exactly one hit: emit its projection only if d < L/2. Output holds at
/// most one point per beam, ordered by beam index.
pub fn resample_object(object: &PointCloud, grid: &BeamGrid, l: f64) -> PointCloud {
    assert!(l > 0.0, "resample threshold must be positive");
    let min_range = object
        .iter()
        .map(range)
        .filter(|&r| r > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !min_range.is_finite() {
        return PointCloud::empty();
    }
    // Any beam emitting a point passes within L of some object point, i.e.
    // within asin(L/r) of its direction. Small slack absorbs rounding.
    let margin = (l / min_range).min(1.0).asin() + 1e-6;
    let candidates = candidate_beams(grid, object, margin);
    resample_object_on(object, grid, &candidates, l)
}

/// Resample evaluating only the given beams (ascending order expected).
pub fn resample_object_on(
    object: &PointCloud,
    grid: &BeamGrid,
    beams: &[usize],
    l: f64,
) -> PointCloud {
    let pts: Vec<(Vector3<f64>, f64)> = object
        .iter()
        .map(|p| {
            let v = p.vector();
            (v, v.norm_squared())
        })
        .collect();

    let mut out = Vec::new();
    for &beam in beams {
        let dir = grid.direction(beam);
        // Two smallest perpendicular distances, ties to the lower index.
        let mut first: Option<(f64, f64)> = None; // (d, projection s)
        let mut second: Option<(f64, f64)> = None;
        for (v, norm_sq) in &pts {
            let s = v.dot(&dir);
            if s <= 0.0 {
                continue;
            }
            let d = (norm_sq - s * s).max(0.0).sqrt();
            if d >= l {
                continue;
            }
            match first {
                None => first = Some((d, s)),
                Some((d1, _)) if d < d1 => {
                    second = first;
                    first = Some((d, s));
                }
                _ => match second {
                    None => second = Some((d, s)),
                    Some((d2, _)) if d < d2 => second = Some((d, s)),
                    _ => {}
                },
            }
        }
        match (first, second) {
            (Some((_, s1)), Some((_, s2))) => {
                let s = (s1 + s2) / 2.0;
                out.push(Point3::from_vector(&(dir * s)));
            }
            (Some((d, s)), None) if d < l / 2.0 => {
                out.push(Point3::from_vector(&(dir * s)));
            }
            _ => {}
        }
    }
    PointCloud::new(out)
}
