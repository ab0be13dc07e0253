//! Full scene composition: level, place, unlevel, resample, occlude, and
//! record the result compactly.
//!
//! A composed scene never materializes the union cloud. It keeps the
//! inserted object points plus the indices of background points the object
//! shadows; expansion is "background minus dropped, then object points".

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{BoundingBox, DetectionRegion, Point3, PointCloud, SensorModel};
use crate::leveling::{
    fit_level_transform, level, level_box, unlevel, unlevel_box, GridRegion, LevelTransform,
};
use crate::occlusion::occlude_scene;
use crate::placement::{crop_object, place_object, PlacementTarget};

/// A final label box: center, extent and heading about z.
///
/// Placement only ever rotates about the sensor's z-axis, so final labels
/// carry a single yaw instead of a full rotation matrix. All fields are
/// rounded to f32 so records round-trip losslessly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelBox {
    pub center: Point3,
    pub extent: Point3,
    pub yaw: f64,
}

impl LabelBox {
    /// Project a full box onto its heading-only representation.
    pub fn from_bounding_box(bbox: &BoundingBox) -> Self {
        LabelBox {
            center: bbox.center,
            extent: bbox.extent,
            yaw: bbox.yaw(),
        }
    }

    pub fn to_bounding_box(&self) -> BoundingBox {
        BoundingBox::with_yaw(self.center, self.extent, self.yaw).expect("valid label box")
    }

    fn quantized(&self) -> Self {
        LabelBox {
            center: quantize_point(&self.center),
            extent: quantize_point(&self.extent),
            yaw: self.yaw as f32 as f64,
        }
    }

    /// The xy corners of the heading-rotated footprint.
    pub fn footprint_xy(&self) -> [(f64, f64); 4] {
        let (s, c) = self.yaw.sin_cos();
        let hx = self.extent.x / 2.0;
        let hy = self.extent.y / 2.0;
        let mut out = [(0.0, 0.0); 4];
        for (i, (sx, sy)) in [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]
            .iter()
            .enumerate()
        {
            let lx = sx * hx;
            let ly = sy * hy;
            out[i] = (self.center.x + c * lx - s * ly, self.center.y + s * lx + c * ly);
        }
        out
    }
}

/// Where a scene's pieces came from, persisted alongside the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub placements: Vec<PlacementRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementRecord {
    pub object_id: String,
    pub mirrored: bool,
    pub target_x: f64,
    pub target_y: f64,
}

/// A compactly represented composed scene.
#[derive(Debug, Clone, PartialEq)]
pub struct ComposedScene {
    pub background_ref: String,
    pub background_mirrored: bool,
    pub background_point_count: u32,
    /// Final object points in the background's sensor frame, f32-rounded.
    pub object_points: PointCloud,
    /// Original background indices shadowed by the objects; unique, sorted.
    pub background_dropped: Vec<u32>,
    pub boxes: Vec<LabelBox>,
    pub provenance: Provenance,
}

impl ComposedScene {
    /// Expand to the full cloud: background minus dropped, then objects.
    pub fn expand(&self, background: &PointCloud) -> PointCloud {
        let mut points = background.without(&self.background_dropped).into_points();
        points.extend_from_slice(self.object_points.points());
        PointCloud::new(points)
    }

    pub fn validate(&self) -> Result<()> {
        if self.background_dropped.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Record(
                "dropped indices not strictly increasing".into(),
            ));
        }
        if let Some(&last) = self.background_dropped.last() {
            if last >= self.background_point_count {
                return Err(Error::Record(format!(
                    "dropped index {last} out of range (background has {} points)",
                    self.background_point_count
                )));
            }
        }
        Ok(())
    }
}

/// Everything a composition needs besides the clouds themselves.
#[derive(Debug, Clone)]
pub struct ComposeParams {
    pub region: DetectionRegion,
    pub sensor: SensorModel,
    /// Occlusion threshold for background occluding the object (meters).
    pub f_o: f64,
    /// Occlusion threshold for the object occluding background (meters).
    pub f_b: f64,
    /// Beam resampling threshold (meters).
    pub l: f64,
    /// Azimuth sector tolerance (radians).
    pub epsilon: f64,
    /// Ground-grid resolution (G x G probes).
    pub g: usize,
    pub background_grid: GridRegion,
    pub object_grid: GridRegion,
}

/// A background with its identity, for record bookkeeping.
#[derive(Debug, Clone, Copy)]
pub struct BackgroundSource<'a> {
    pub id: &'a str,
    pub cloud: &'a PointCloud,
    pub mirrored: bool,
    /// Ground transform, if already fitted (fitted here otherwise).
    pub level: Option<&'a LevelTransform>,
}

/// One object scene with its raw bounding box.
#[derive(Debug, Clone, Copy)]
pub struct ObjectSource<'a> {
    pub id: &'a str,
    pub scene: &'a PointCloud,
    pub bounding_box: &'a BoundingBox,
    pub mirrored: bool,
}

/// A non-fatal per-object problem in a multi-object composition.
#[derive(Debug, Clone)]
pub struct ComposeWarning {
    pub object_id: String,
    pub reason: String,
}

/// Compose one object into a background.
pub fn compose_single(
    background: &BackgroundSource,
    object: &ObjectSource,
    target: &PlacementTarget,
    params: &ComposeParams,
    seed: u64,
) -> Result<ComposedScene> {
    let (scene, warnings) = compose_multi(
        background,
        &[(object.clone(), *target)],
        params,
        seed,
        true,
    )?;
    debug_assert!(warnings.is_empty());
    Ok(scene)
}

/// Compose several objects, nearest placement first, each seeing the
/// running composite as its background so earlier objects can occlude
/// later ones and vice versa.
///
/// In strict mode any per-object failure aborts; otherwise the object is
/// skipped and reported as a warning.
pub fn compose_multi(
    background: &BackgroundSource,
    objects: &[(ObjectSource, PlacementTarget)],
    params: &ComposeParams,
    seed: u64,
    strict: bool,
) -> Result<(ComposedScene, Vec<ComposeWarning>)> {
    if objects.is_empty() && strict {
        return Err(Error::NothingToCompose);
    }

    let fitted;
    let background_level = match background.level {
        Some(t) => t,
        None => {
            fitted = fit_level_transform(background.cloud, &params.background_grid, params.g)
                .map_err(|e| e.at_stage("background ground fit"))?
                .1;
            &fitted
        }
    };

    // Composition order: nearest target first, so occluders exist before
    // the objects they shadow.
    let mut order: Vec<usize> = (0..objects.len()).collect();
    order.sort_by(|&a, &b| {
        objects[a]
            .1
            .ground_range()
            .partial_cmp(&objects[b].1.ground_range())
            .unwrap()
            .then(a.cmp(&b))
    });

    // Running composite, tracked by origin so drops map back to either the
    // original background indexing or a previously inserted object.
    let mut bg_kept: Vec<u32> = (0..background.cloud.len() as u32).collect();
    let mut object_points: Vec<Point3> = Vec::new();
    let mut boxes: Vec<LabelBox> = Vec::new();
    let mut placements: Vec<PlacementRecord> = Vec::new();
    let mut warnings: Vec<ComposeWarning> = Vec::new();

    for &i in &order {
        let (object, target) = &objects[i];
        let result = compose_step(
            background.cloud,
            &bg_kept,
            &object_points,
            background_level,
            object,
            target,
            &boxes,
            params,
        );
        match result {
            Ok(step) => {
                bg_kept = step.bg_kept;
                object_points = step.object_points;
                object_points.extend(step.new_points);
                boxes.push(step.label);
                placements.push(PlacementRecord {
                    object_id: object.id.to_string(),
                    mirrored: object.mirrored,
                    target_x: target.x(),
                    target_y: target.y(),
                });
            }
            Err(e) if strict => return Err(e),
            Err(e) => warnings.push(ComposeWarning {
                object_id: object.id.to_string(),
                reason: e.to_string(),
            }),
        }
    }

    let mut background_dropped: Vec<u32> = Vec::new();
    {
        let mut kept = bg_kept.iter().copied().peekable();
        for idx in 0..background.cloud.len() as u32 {
            if kept.peek() == Some(&idx) {
                kept.next();
            } else {
                background_dropped.push(idx);
            }
        }
    }

    let scene = ComposedScene {
        background_ref: background.id.to_string(),
        background_mirrored: background.mirrored,
        background_point_count: background.cloud.len() as u32,
        object_points: PointCloud::new(object_points),
        background_dropped,
        boxes,
        provenance: Provenance { seed, placements },
    };
    scene.validate()?;
    Ok((scene, warnings))
}

struct ComposeStep {
    bg_kept: Vec<u32>,
    object_points: Vec<Point3>,
    new_points: Vec<Point3>,
    label: LabelBox,
}

#[allow(clippy::too_many_arguments)]
fn compose_step(
    background: &PointCloud,
    bg_kept: &[u32],
    prior_object_points: &[Point3],
    background_level: &LevelTransform,
    object: &ObjectSource,
    target: &PlacementTarget,
    existing_boxes: &[LabelBox],
    params: &ComposeParams,
) -> Result<ComposeStep> {
    // Level the object scene and its box, crop the object out.
    let (_, object_level) = fit_level_transform(object.scene, &params.object_grid, params.g)
        .map_err(|e| e.at_stage("object ground fit"))?;
    let leveled_scene = level(object.scene, &object_level);
    let leveled_box = level_box(object.bounding_box, &object_level);
    let cropped = crop_object(&leveled_scene, &leveled_box);
    if cropped.is_empty() {
        return Err(Error::EmptyCroppedObject(object.id.to_string()));
    }

    // Reposition on the leveled ground, then into the background frame.
    let (placed, placed_box) = place_object(&cropped, &leveled_box, target)?;
    let unleveled = unlevel(&placed, background_level);
    let final_box = unlevel_box(&placed_box, background_level);
    let label = LabelBox::from_bounding_box(&final_box).quantized();

    validate_placement(&label, existing_boxes, &params.region)?;

    // Re-render onto the beam grid at the new range, then occlude against
    // the running composite: kept background points plus prior objects.
    let grid = crate::beam::beam_directions(&params.sensor);
    let resampled = crate::beam::resample_object(&unleveled, &grid, params.l);
    if resampled.is_empty() {
        return Err(Error::PlacementRejected(format!(
            "object {:?} subtends no beams at its target",
            object.id
        )));
    }

    let composite: PointCloud = bg_kept
        .iter()
        .map(|&i| background.points()[i as usize])
        .chain(prior_object_points.iter().copied())
        .collect();
    let (object_kept, composite_dropped) =
        occlude_scene(&composite, &resampled, params.f_o, params.f_b, params.epsilon)
            .map_err(|e| e.at_stage("occlusion"))?;

    // Split composite drops back into background drops and prior-object drops.
    let n_bg = bg_kept.len() as u32;
    let mut drop_iter = composite_dropped.iter().copied().peekable();
    let mut new_bg_kept = Vec::with_capacity(bg_kept.len());
    for (local, &orig) in bg_kept.iter().enumerate() {
        if drop_iter.peek() == Some(&(local as u32)) {
            drop_iter.next();
        } else {
            new_bg_kept.push(orig);
        }
    }
    let mut new_object_points = Vec::with_capacity(prior_object_points.len());
    for (local, p) in prior_object_points.iter().enumerate() {
        if drop_iter.peek() == Some(&(n_bg + local as u32)) {
            drop_iter.next();
        } else {
            new_object_points.push(*p);
        }
    }

    Ok(ComposeStep {
        bg_kept: new_bg_kept,
        object_points: new_object_points,
        new_points: object_kept.iter().map(quantize_point).collect(),
        label,
    })
}

fn validate_placement(
    label: &LabelBox,
    existing: &[LabelBox],
    region: &DetectionRegion,
) -> Result<()> {
    if !region.contains(&label.center) {
        return Err(Error::PlacementRejected(format!(
            "box center ({:.2}, {:.2}, {:.2}) outside detection region",
            label.center.x, label.center.y, label.center.z
        )));
    }
    for (x, y) in label.footprint_xy() {
        if !region.contains_xy(x, y) {
            return Err(Error::PlacementRejected(format!(
                "box footprint corner ({x:.2}, {y:.2}) outside detection region"
            )));
        }
    }
    for other in existing {
        if footprints_overlap(label, other) {
            return Err(Error::PlacementRejected(
                "box overlaps an already placed box".into(),
            ));
        }
    }
    Ok(())
}

/// Separating-axis test between two heading-rotated xy rectangles.
pub fn footprints_overlap(a: &LabelBox, b: &LabelBox) -> bool {
    let ca = a.footprint_xy();
    let cb = b.footprint_xy();
    for rect in [&ca, &cb] {
        for i in 0..2 {
            // Edge normals of a rectangle repeat after two edges.
            let (x0, y0) = rect[i];
            let (x1, y1) = rect[i + 1];
            let axis = (y1 - y0, -(x1 - x0));
            let project = |corners: &[(f64, f64); 4]| {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for &(x, y) in corners {
                    let v = x * axis.0 + y * axis.1;
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                (lo, hi)
            };
            let (a_lo, a_hi) = project(&ca);
            let (b_lo, b_hi) = project(&cb);
            if a_hi < b_lo || b_hi < a_lo {
                return false;
            }
        }
    }
    true
}

fn quantize_point(p: &Point3) -> Point3 {
    Point3::new(p.x as f32 as f64, p.y as f32 as f64, p.z as f32 as f64)
}

/// Binary raster marking the cells that contain a box center.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterGrid {
    pub rows: usize,
    pub cols: usize,
    cells: Vec<bool>,
}

impl CenterGrid {
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.cells[row * self.cols + col]
    }

    pub fn count_ones(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }
}

/// Rasterize box centers onto a rows x cols grid over the region's xy
/// extent. Rows bin x, columns bin y, half-open cells; a center outside
/// the region is an error.
pub fn rasterize_centers(
    boxes: &[LabelBox],
    region: &DetectionRegion,
    rows: usize,
    cols: usize,
) -> Result<CenterGrid> {
    assert!(rows >= 1 && cols >= 1, "grid must have at least one cell");
    let mut cells = vec![false; rows * cols];
    for b in boxes {
        let u = (b.center.x - region.x_min) / (region.x_max - region.x_min);
        let v = (b.center.y - region.y_min) / (region.y_max - region.y_min);
        if !(0.0..1.0).contains(&u) || !(0.0..1.0).contains(&v) {
            return Err(Error::LabelOutOfRegion {
                x: b.center.x,
                y: b.center.y,
            });
        }
        let row = (u * rows as f64) as usize;
        let col = (v * cols as f64) as usize;
        cells[row * cols + col] = true;
    }
    Ok(CenterGrid { rows, cols, cells })
}
