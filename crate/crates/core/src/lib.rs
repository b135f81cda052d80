pub mod classical;
pub mod error;
pub mod experiments;
pub mod fock;
pub mod learn;
pub mod linalg;
pub mod network;
pub mod symplectic;

pub use error::{Error, Result};
pub use linalg::C64;
