//! Carousel personalization as a contextual multi-armed bandit with
//! multiple plays, cascade-based updates and delayed batch feedback.
//!
//! The crate is organised around the simulation loop:
//!
//! - [`domain`]: value types (users, arms, carousels, observations) and the
//!   two numeric primitives everything composes, [`domain::sigmoid`] and
//!   [`domain::select_top_l`].
//! - [`environment`]: the ground-truth world. Display-to-stream
//!   probabilities, user sampling, browsing simulation, observation masking
//!   and the expected-regret oracle.
//! - [`policies`]: every recommendation policy behind the [`policies::Policy`]
//!   contract (recommend at round start, batch update at round end).
//! - [`data`]: dataset files, synthetic worlds and k-means segmentation.
//! - [`runner`]: the round loop, regret accounting and result files.
//! - [`cli`]: the `carousel-bandit` command line.

pub mod cli;
pub mod data;
pub mod domain;
pub mod environment;
pub mod error;
pub mod policies;
pub mod rng;
pub mod runner;

pub use error::{Error, Result};
