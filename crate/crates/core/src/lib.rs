//! Non-signalling boxes and games, linear programs for their values, the de
//! Finetti reduction for correlations, signalling tests, and finite-size key
//! rates for CHSH-based device-independent QKD.

pub mod boxes;
pub mod definetti;
pub mod eat;
pub mod entropy;
pub mod error;
pub mod io;
pub mod keyrates;
pub mod nslp;
pub mod signalling;
pub mod simulate;

pub use error::{Error, Result};
