pub mod chirp;
pub mod commands;
pub mod ensemble;
pub mod error;
pub mod expm;
pub mod grape;
pub mod io;
pub mod lbfgs;
pub mod morph;
pub mod optimizer;
pub mod sequence;
pub mod spin;
pub mod units;
pub mod waveform;

pub use error::{Error, Result};
