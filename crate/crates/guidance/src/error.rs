use thiserror::Error;

#[derive(Debug, Error)]
pub enum GuidanceError {
    /// Blending needs consecutive windows to share at least one frame.
    #[error("windows do not overlap")]
    NoOverlap,

    #[error("prior error: {0}")]
    Prior(#[from] worldgrip_prior::PriorError),

    #[error("geometry error: {0}")]
    Geometry(#[from] worldgrip_geometry::GeometryError),

    #[error("configuration error: {0}")]
    Config(String),
}
