//! Hierarchical planning with latent world models on a point-maze benchmark.
//!
//! Pipeline: procedural maze generation and offline data collection
//! ([`env`]), latent world-model training ([`models`]), sampling-based flat
//! and hierarchical MPC ([`planners`]), and closed-loop evaluation with
//! compute sweeps ([`bench`]).

pub mod bench;
pub mod config;
pub mod env;
pub mod error;
pub mod models;
pub mod planners;
pub mod seed;

pub use error::HwmError;
