//! Linear relaying over a cascade of additive-noise channels with per-hop
//! feedback: exact MSE lattices, error-exponent calculus, a Monte Carlo line
//! network simulator, and a nested-PAM packet codec.

pub mod channel;
pub mod error;
pub mod experiment;
pub mod exponent;
pub mod lattice;
pub mod numeric;
pub mod pam;
pub mod sim;
pub mod verdict;

pub use error::{Error, Result};
