pub mod cwt;
pub mod dataset;
pub mod descriptors;
mod error;
pub mod featsel;
pub mod haralick;
pub mod linalg;
pub mod preprocess;
pub mod regress;
pub mod stats;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
pub use moldline_nn::rng;
