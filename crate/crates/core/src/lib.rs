//! Translation entropy: how many source tokens a translation model treats as
//! interchangeable, measured by exhaustive single-token substitution.
//!
//! The core is generic over the floating-point scalar (`f32` or `f64`);
//! counts, subgroup sizes and probabilities are also available as exact
//! integers or rationals. The aliases below fix the scalar to the common
//! choices.

pub mod bleu;
pub mod corpus;
pub mod degeneracy;
pub mod entropy;
pub mod error;
pub mod pipeline;
pub mod provenance;
pub mod scalar;
pub mod translator;

pub use corpus::{TokenId, Vocab};
pub use error::{Error, Result, TranslateError};
pub use scalar::Scalar;
pub use translator::{DecodeParams, Translation, Translator};

pub type TokenEntropy = entropy::TokenEntropyRecord<f64>;
pub type TokenEntropyF32 = entropy::TokenEntropyRecord<f32>;
pub type EntropyReport = entropy::ModelEntropyReport<f64>;
pub type EntropyReportF32 = entropy::ModelEntropyReport<f32>;
pub type Histogram = entropy::EntropyHistogram<f64>;
pub type Bleu = bleu::BleuScore<f64>;
pub type BleuF32 = bleu::BleuScore<f32>;
pub type Measurement = pipeline::TokenMeasurement<f64>;
