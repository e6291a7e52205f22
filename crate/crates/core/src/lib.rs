pub mod elements;
pub mod error;
pub mod forms;
pub mod harness;
pub mod krylov;
pub mod mesh;
pub mod pressure_precond;
pub mod systems;

pub use error::{Error, Result};
