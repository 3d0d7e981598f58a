//! Multi-cell massive MIMO with large-scale fading precoding and decoding.
//!
//! The crate covers the whole chain: network geometry and large-scale gains,
//! Rayleigh channel draws with pilot-based MMSE estimation, the L x L
//! precoding/decoding matrices that act on large-scale gains only, closed-form
//! SINR expressions for finite and infinite antenna counts, and a Monte-Carlo
//! simulator of the physical protocol that checks every closed form.

#![allow(clippy::needless_range_loop)]

pub mod analytic;
pub mod beta_estimation;
pub mod channel;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod network;
pub mod oracle;
pub mod precoding;
pub mod rng;
pub mod stats;

pub use channel::{ChannelEstimates, ChannelRealization};
pub use error::{Error, Result};
pub use network::{LargeScaleFading, NetworkConfig};
