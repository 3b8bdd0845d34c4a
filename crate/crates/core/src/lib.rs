pub mod channels;
pub mod entropy;
pub mod error;
pub mod io;
pub mod linalg;
pub mod oracles;
pub mod sdp;
pub mod state;
pub mod verify;

pub use error::{Error, Result};
