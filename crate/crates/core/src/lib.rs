//! Transmit-power minimization for pinching-antenna (PA) systems whose
//! line-of-sight links are blocked at random.
//!
//! `N` transmit PAs (TPAs) slide along parallel dielectric waveguides mounted
//! at height `d_z` above an `L x L` floor and serve `M` users in TDMA. Each
//! LoS link survives with probability `exp(-eps * dist^2)`. The crate
//! minimizes the total transmit power subject to per-user expected-SNR
//! targets:
//!
//! * [`single_pa`]: the one-antenna case, whose reduced objective is convex
//!   and is solved globally by projected gradient descent.
//! * [`multi_pa`]: closed-form eigen-beamformers plus projected L-BFGS over
//!   the antenna positions.
//! * [`harness`]: the fixed-antenna benchmark, exhaustive grid search,
//!   parameter sweeps, oracle validation and CSV/SVG emission.

pub mod channel;
pub mod error;
pub mod expected_snr;
pub mod harness;
pub mod multi_pa;
pub mod scenario;
pub mod single_pa;

pub use error::{Error, Result};
pub use num_complex::Complex64;
