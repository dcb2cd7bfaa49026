pub mod cli;
pub mod error;
pub mod protocols;
pub mod rus;
pub mod sdp;
pub mod task;
pub mod tensor;
pub mod twirl;
pub mod validity;
pub mod wires;

pub use error::{Error, Result};
