#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod error;
pub mod flows;
pub mod greens;
pub mod grid;
pub mod invariants;
pub mod profile;
pub mod scenario;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
pub use greens::{DiagonalGreens, Method};
pub use grid::{ComplexField, Grid, C64};
pub use profile::{sample_profile, FieldPair, ProfileSpec};
pub use spectral::SpectralParameter;
