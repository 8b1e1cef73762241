//! Gameplay telemetry simulation and baseline behaviour modelling.
//!
//! The crate is organised bottom-up:
//!
//! - [`game`]: deterministic frame-stepped Pac-Man with a time-rate clock.
//! - [`gamepad`]: four triangular reach regions mapping hand positions to commands.
//! - [`players`]: synthetic keyboard and arm-reaching players.
//! - [`telemetry`]: IKI/PTT feature extraction and score normalisation.
//! - [`model`]: Gamma/Exponential reference model, log-likelihood and NLL.
//! - [`experiment`]: factorial runs, analysis, configuration search, calibration.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod experiment;
pub mod game;
pub mod gamepad;
pub mod model;
pub mod players;
pub mod special;
pub mod telemetry;
