//! Score-performance matching for polyphonic music with ornaments.
//!
//! A score is homophonized into a sequence of composite events, compiled into a
//! two-level hidden Markov model and matched against performed MIDI notes with a
//! Viterbi decoder coupled to a switching Kalman tempo tracker.

pub mod error;
pub mod eval;
pub mod homophonize;
pub mod ioi;
pub mod matcher;
pub mod midi;
pub mod model;
pub mod score;
pub mod simulate;
pub mod tempo;

pub use error::{Error, Result};
