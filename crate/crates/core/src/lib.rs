//! Explanations for black-box image classifiers: an image is cut into SLIC
//! superpixels, and a binary genetic algorithm searches for the subset of
//! superpixels that, with everything else blackened, maximizes the
//! classifier's confidence in its original prediction.

pub mod bench;
pub mod chromosome;
pub mod classifier;
pub mod config;
pub mod error;
pub mod explainer;
pub mod explanation;
pub mod labels;
pub mod lime;
pub mod prob;
pub mod raster;
pub mod render;
pub mod slic;

pub use classifier::{softmax, Classifier, LinearSuperpixelClassifier, Logits, RemoteClassifier};
pub use chromosome::{validate_chromosome, Chromosome};
pub use error::{Error, ErrorClass, Result};
pub use explainer::{decode_mask, evaluate_fitness, evolve, exhaustive_best, GaParams};
pub use explanation::{Explanation, Method};
pub use lime::{explain_lime, LimeParams};
pub use labels::SuperpixelMap;
pub use prob::ProbDist;
pub use raster::{Lab, LabImage, RasterImage};
pub use slic::{segment, SlicParams};
