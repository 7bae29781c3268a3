pub mod blockenc;
pub mod channels;
pub mod config;
pub mod error;
pub mod filters;
pub mod gibbs;
pub mod harness;
pub mod instrument;
pub mod linalg;
pub mod models;
pub mod protocols;
pub mod verify;

pub use error::{Error, Result};
