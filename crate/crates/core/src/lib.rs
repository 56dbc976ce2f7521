//! Numerical core for one-shot rate splitting over quantum multi-user channels.
//!
//! Everything here is allocation-backed but free of `std`: labeled states and
//! operators, Kraus channels, smooth entropies through a Hermitian SDP solver,
//! the splitting isometry, decoupling Monte Carlo and rate-region tracing.
//! File formats, reports and the command line live in the `ratesplit` crate.
#![no_std]

extern crate alloc;

pub mod channel;
pub mod decoupling;
pub mod entropy;
pub mod error;
pub mod linalg;
pub mod region;
pub mod rng;
pub mod sdp;
pub mod split;
pub mod tensor;

pub use channel::{Channel, Dilation, KrausMap};
pub use entropy::{EntropyResult, SigmaPolicy, SolveStatus};

pub use error::{Error, Result};
pub use rng::{RngStream, StreamRng};
pub use tensor::{Ket, Operator, Signature};

pub use num_complex::Complex64;
