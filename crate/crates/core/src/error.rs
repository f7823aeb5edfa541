use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid image dimensions: {0}")]
    Dimension(String),

    #[error("no walkable area found in floor plan")]
    NoWalkableArea,

    #[error("zone {index} is invalid: {reason}")]
    InvalidZone { index: usize, reason: String },

    #[error("template {id} ({width}x{height}) is larger than the image")]
    TemplateTooLarge { id: String, width: usize, height: usize },

    #[error("empty template set")]
    EmptyTemplates,

    #[error("invalid template: {0}")]
    InvalidTemplate(String),

    #[error("training set contains a single class")]
    SingleClass,

    #[error("inconsistent patch size: expected {expected}, found {found}")]
    PatchSize { expected: usize, found: usize },

    #[error("model is not trained")]
    UntrainedModel,

    #[error("model required for option {0}")]
    ModelRequired(u8),

    #[error("invalid pipeline option {0} (expected 1, 2 or 3)")]
    InvalidOption(u8),

    #[error("indoor path is empty")]
    EmptyPath,

    #[error("skeleton is empty")]
    EmptySkeleton,

    #[error("node {id} at ({x}, {y}) is not on the skeleton")]
    NodeOffSkeleton { id: u32, x: u32, y: u32 },

    #[error("direction counts are all zero")]
    ZeroCounts,

    #[error("invalid scale: {0}")]
    InvalidScale(String),

    #[error("physical scaling requires dpi metadata")]
    MissingDpi,

    #[error("unknown beacon id {0}")]
    UnknownNode(u32),

    #[error("pixel ({x}, {y}) is outside the floor plan")]
    OffPlan { x: i64, y: i64 },

    #[error("a beacon already occupies ({x}, {y}) (id {id})")]
    Occupied { id: u32, x: u32, y: u32 },

    #[error("project has no connectivity graph yet")]
    NoGraph,

    #[error("project has no floor plan")]
    NoFloorPlan,

    #[error("archive integrity check failed: {0}")]
    Integrity(String),

    #[error("project archive {0} is locked by another writer")]
    Locked(PathBuf),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::NoWalkableArea => "no_walkable_area",
            Error::InvalidZone { .. } => "invalid_zone",
            Error::TemplateTooLarge { .. } => "template_too_large",
            Error::EmptyTemplates => "empty_templates",
            Error::InvalidTemplate(_) => "invalid_template",
            Error::SingleClass => "single_class",
            Error::PatchSize { .. } => "patch_size",
            Error::UntrainedModel => "untrained_model",
            Error::ModelRequired(_) => "model_required",
            Error::InvalidOption(_) => "invalid_option",
            Error::EmptyPath => "empty_path",
            Error::EmptySkeleton => "empty_skeleton",
            Error::NodeOffSkeleton { .. } => "node_off_skeleton",
            Error::ZeroCounts => "zero_counts",
            Error::InvalidScale(_) => "invalid_scale",
            Error::MissingDpi => "missing_dpi",
            Error::UnknownNode(_) => "unknown_node",
            Error::OffPlan { .. } => "off_plan",
            Error::Occupied { .. } => "occupied",
            Error::NoGraph => "no_graph",
            Error::NoFloorPlan => "no_floor_plan",
            Error::Integrity(_) => "integrity",
            Error::Locked(_) => "locked",
            Error::Invalid(_) => "invalid",
            Error::Io(_) => "io",
            Error::Image(_) => "image",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
