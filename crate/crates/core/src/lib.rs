//! Certified robustness for classifiers over binary vectors under bit-flip
//! randomized smoothing.
//!
//! Every bit of a structure vector is kept with probability `β` and flipped
//! otherwise. From Monte-Carlo label counts the engine derives a perturbation
//! size `K`: no change of at most `K` bits alters the smoothed prediction.

pub mod bits;
pub mod certifier;
pub mod classifiers;
pub mod confidence;
pub mod error;
pub mod graph;
pub mod harness;
pub mod interval;
pub mod oracle;
pub mod protocol;
pub mod region;
pub mod smoothing;
pub mod special;

pub use bits::{BitVector, FlipMask, Label, NoiseSpec, StructureVector};
pub use certifier::{certified_perturbation_size, certified_perturbation_size_exact, Certificate, Certification, CertifiedRadius};
pub use confidence::{simultaneous_bounds, ConfidenceBounds, LabelCounts};
pub use error::{Error, Result};
pub use region::{BackendChoice, NumericBackend};
pub use smoothing::{certify_example, smoothed_predict, BaseClassifier, FnClassifier, SmoothingConfig, Verdict};
