use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    /// 3x3 rotation candidate is singular; no nearest rotation exists.
    #[error("degenerate rotation: candidate matrix is singular")]
    DegenerateRotation,

    /// First camera looks straight along gravity; the horizontal facing
    /// direction is undefined.
    #[error("degenerate facing: camera forward is parallel to gravity (|dot| = {dot:.6})")]
    DegenerateFacing { dot: f64 },

    #[error("empty mesh")]
    EmptyMesh,

    #[error("mesh parse error at line {line}: {reason}")]
    MeshParse { line: usize, reason: String },

    #[error("empty camera track")]
    EmptyCameraTrack,
}
