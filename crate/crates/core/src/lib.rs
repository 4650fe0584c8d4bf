//! Dense neural networks trained with loss-layer target disturbance.
//!
//! The crate provides a small from-scratch feed-forward network ([`nn`]), the
//! DisturbLabel family of regularizers for classification and their
//! DisturbValue / DisturbError counterparts for regression ([`disturb`]),
//! dataset ingestion and preprocessing ([`data`]), and a seeded experiment
//! harness that trains, evaluates and aggregates repeated runs ([`harness`]).
//!
//! All arithmetic is `f64`, and every random draw flows from a configured
//! seed, so identical configurations reproduce bit-identical results.

pub mod data;
pub mod disturb;
mod error;
pub mod harness;
pub mod matrix;
pub mod nn;
pub mod rng;
pub mod selftest;

pub use error::{Error, Result};
pub use matrix::Matrix;
