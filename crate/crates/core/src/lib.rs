pub mod error;
pub mod image;

pub use error::{Error, Result};
pub mod sift;
pub mod homography;
pub mod matching;
pub mod detector;
pub mod registry;
pub mod recognition;
pub mod config;
pub mod eval;
pub mod synth;
