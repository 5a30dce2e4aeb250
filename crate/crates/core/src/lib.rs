pub mod config;
pub mod contact;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod gradcheck;
pub mod hand;
pub mod io;
pub mod loss;
pub mod mesh;
pub mod metrics;
pub mod optim;
pub mod primitives;
pub mod rng;
pub mod rotation;
pub mod spatial;
pub mod synthetic;
pub mod target;

pub use error::{Error, Result};
pub use hand::{HandModel, HandParams, PosedHand};
pub use mesh::TriMesh;

/// Points, offsets and normals, in millimetres where dimensional.
pub type Vec3 = nalgebra::Vector3<f64>;
