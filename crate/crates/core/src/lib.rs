//! Desk-scale simulator of introspective text-to-image training.
//!
//! A synthetic compositional grid world stands in for images, an exact
//! oracle stands in for the QA reward model, and a two-head linear-softmax
//! policy stands in for the multimodal backbone. On top of that sit the
//! three-task supervised pipeline, GRPO with bi-level rewards, the
//! multi-round self-correcting episode loop, and the editing extension.

pub mod error;
pub mod eval;
pub mod grpo;
pub mod introspect;
pub mod policy;
pub mod rng;
pub mod sft;
pub mod trainer;
pub mod world;

pub use error::{Error, Result};
