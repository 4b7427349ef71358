//! Incompressible flow toolkit with reduced-order duct outflow conditions.

pub mod assembly;
pub mod diagnostics;
pub mod dubc;
pub mod error;
pub mod linalg;
pub mod measure;
pub mod mesh;
pub mod roukf;
pub mod scalar;
pub mod timestepping;
pub mod vtk;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Mesh64 = mesh::Mesh<f64>;
pub type Mesh32 = mesh::Mesh<f32>;
