//! Link-level simulation of high-mobility uplink transmission from a large
//! uniform linear array with angle-domain Doppler compensation.
//!
//! Three transmit schemes are modelled:
//!
//! - `ssd_dc`: signal space diversity over `K` blocks whose beamformer phases
//!   are re-drawn per block, giving independent block fading;
//! - `alamouti_dc`: an Alamouti stream pair over the odd and even beamformers;
//! - `nodiv_dc`: the conventional single-stream scheme.
//!
//! The crate is organised bottom-up: [`array`] builds steering vectors,
//! beamformers and transmit matrices, [`channel`] draws multipath
//! realizations and propagates through them, [`coding`] builds frames,
//! [`receiver`] estimates and detects, and [`sim`] runs Monte Carlo sweeps.
//! [`config`] and [`report`] provide the file formats used by the CLI.

pub mod array;
pub mod channel;
pub mod coding;
pub mod config;
mod error;
pub mod receiver;
pub mod report;
pub mod sim;

pub use error::{Error, Result};

/// Complex baseband sample type used throughout.
pub type C64 = num_complex::Complex64;
