//! Iris codes from grayscale eye images, with cleartext and homomorphically
//! encrypted masked Hamming-distance matching.

pub mod bench;
pub mod encrypted;
pub mod error;
pub mod gabor;
pub mod id;
pub mod image;
pub mod matching;
pub mod metrics;
pub mod normalize;
pub mod pipeline;
pub mod preprocess;
pub mod segment;
pub mod store;
pub mod synth;
pub mod template;

pub use error::{IrisError, Result};
pub use id::{Eye, TemplateId};
pub use image::EyeImage;
pub use matching::{match_with_shifts, MatchPolicy, MatchResult};
pub use segment::{Circle, SegmentationResult};
pub use template::IrisTemplate;
