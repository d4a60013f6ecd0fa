//! Edit-based continuous-time Markov chain generative models over
//! variable-length token sequences.
//!
//! The crate is organised bottom-up:
//!
//! * [`sequence`] and [`alignment`] define states, edits and couplings.
//! * [`paths`] samples the mixture and localized probability paths.
//! * [`model`] holds the parametric rate models and their gradients.
//! * [`training`] implements the auxiliary-process loss and optimizer loop.
//! * [`sampler`] simulates trained models (Euler, exact, guidance, correctors).
//! * [`oracle`] and [`verify`] provide brute-force ground truth on small spaces.
//! * [`toy`] holds the two-letter toy problem and its coupling estimate.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alignment;
pub mod error;
pub mod model;
pub mod oracle;
pub mod par;
pub mod paths;
pub mod sampler;
pub mod sequence;
pub mod toy;
pub mod training;
pub mod verify;

pub use alignment::{AlignedPair, AlignedSequence, Cell, CouplingMode};
pub use error::{Error, Result};
pub use model::{ModelParams, RateModel, RatePrediction};
pub use par::Exec;
pub use paths::{PathSample, Scheduler};
pub use sequence::{EditOp, Sequence, Token, Vocab};
