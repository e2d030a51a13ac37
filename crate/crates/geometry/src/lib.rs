//! Geometric machinery: rotations, meshes, encodings, frames, and the hand.
//!
//! Everything is a pure function over immutable data. Mesh acceleration
//! structures are built once and queried read-only, so all of this is safe to
//! call from multiple threads.

pub mod ambient;
pub mod bps;
pub mod camera;
pub mod canonical;
pub mod dual;
pub mod error;
pub mod hand;
pub mod mesh;
pub mod se3;
pub mod so3;

pub use ambient::ambient_sensor;
pub use bps::{bps_basis, bps_encode};
pub use camera::{project_point, project_points, Projected};
pub use canonical::{canonicalize, GravityFrame};
pub use error::GeometryError;
pub use hand::{hand_fk, hand_fk_jacobian, KinematicHand, StandardHand, HAND_PARAM_DIMS};
pub use mesh::{MeshQuery, TriMesh};
pub use se3::SE3;
pub use so3::{project_to_so3, project_to_so3_jacobian};
