//! Limit cycle and nonlinear stability analysis of friction-damped bladed-disk
//! sectors under flutter.

pub mod aero;
pub mod benchmark;
pub mod contact;
pub mod coupled;
pub mod energy;
pub mod epmc;
pub mod error;
pub mod harmonic_balance;
pub mod harmonic;
pub mod io;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod verify;

pub use error::{Error, Result};
pub use harmonic::HarmonicSet;
