//! Motion-blur adversarial example synthesis.
//!
//! Images are perturbed by optimizing per-pixel (or per-region) convex blur
//! kernels over a stack of translated copies, together with the object and
//! background translations that generate the stack. The crate also carries the
//! additive and fixed-blur baselines, a camera-motion pathway, and the metrics
//! used to analyse the resulting examples.

pub mod analysis;
pub mod attack;
pub mod error;
pub mod blursynth;
pub mod imgcore;
pub mod model;
pub mod physical;
pub mod saliency;
pub mod shapes;

pub use error::{Error, Result};
pub use imgcore::{Image, Padding, SaliencyMask, Translation};
