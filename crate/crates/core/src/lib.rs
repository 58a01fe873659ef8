//! Simulator for authenticated Byzantine agreement under parallel composition.
//!
//! Processes run EIGPrune+ (an exponential information gathering protocol with
//! session-bound signatures and subtree pruning) in several sessions at once.
//! An adversary corrupts players per session; a player Byzantine in one
//! session has its key leaked in every session.

pub mod adversary;
pub mod analysis;
pub mod auth;
pub mod cli;
pub mod eig;
pub mod engine;
pub mod error;
pub mod protocol;

pub use error::{Error, Result};
