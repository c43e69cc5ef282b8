//! Persistence formats: versioned waveform JSON, spectrometer-style shape
//! files, CSV reports and reproducibility manifests.

mod atomic;
pub mod csv;
pub mod manifest;
pub mod shape;
pub mod waveform_json;

pub use atomic::write_atomic;
