pub mod certify;
pub mod cli;
pub mod domination;
pub mod error;
pub mod freealg;
pub mod linalg;
pub mod moment;
pub mod pencil;
pub mod sdp;
pub mod serial;

pub use error::{Error, Result};
