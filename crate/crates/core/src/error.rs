use std::path::PathBuf;

/// Errors produced by the scene composition pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("undefined azimuth: point lies on the z-axis")]
    UndefinedAzimuth,

    #[error("no points in ground grid region")]
    EmptyGroundRegion,

    #[error("degenerate ground fit: {0}")]
    DegenerateGroundFit(String),

    #[error("invalid bounding box: {0}")]
    InvalidBoundingBox(String),

    #[error("invalid detection region: {0}")]
    InvalidRegion(String),

    #[error("invalid sensor model: {0}")]
    InvalidSensor(String),

    #[error("cannot compute sector of empty object")]
    EmptySectorObject,

    #[error("undefined placement direction")]
    UndefinedPlacementDirection,

    #[error("empty cropped object from scene {0:?}")]
    EmptyCroppedObject(String),

    #[error("placement rejected: {0}")]
    PlacementRejected(String),

    #[error("label out of detection region: center ({x:.3}, {y:.3})")]
    LabelOutOfRegion { x: f64, y: f64 },

    #[error("nothing to compose: zero objects requested")]
    NothingToCompose,

    #[error("pcd parse error at byte {offset}: {message}")]
    PcdParse { offset: usize, message: String },

    #[error("refusing to write non-finite coordinate at point {0}")]
    NonFinitePoint(usize),

    #[error("scene record error: {0}")]
    Record(String),

    #[error("unknown background id {0:?}")]
    UnknownBackground(String),

    #[error("unknown object id {0:?}")]
    UnknownObject(String),

    #[error("manifest error in {path}: {message}")]
    Manifest { path: PathBuf, message: String },

    #[error("config error: {key}: {message}")]
    Config { key: String, message: String },

    #[error("unknown preset {0:?} (expected \"orchard\" or \"urban\")")]
    UnknownPreset(String),

    #[error("{stage} failed for scene: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(key: &str, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.to_string(),
            message: message.into(),
        }
    }

    /// Wraps an error with the pipeline stage it occurred in.
    pub fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
