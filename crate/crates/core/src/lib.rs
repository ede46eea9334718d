//! Energy-time entangled photon pairs through a Fabry-Perot filter.
//!
//! Two rival accounts of what happens to photon 2 when photon 1 is filtered:
//! the standard joint-amplitude calculation ([`backends::standard_backend`])
//! and a nonlocal-collapse model ([`backends::collapse_backend`]) in which
//! transmission of photon 1 re-prepares photon 2 in a sharp-energy state.
//!
//! Units are natural: `hbar = 1` and times are in units of the pair
//! correlation time `tau_s`. Angular frequencies are detunings from half the
//! pump frequency.

pub mod backends;
pub mod cavity;
pub mod error;
pub mod events;
pub mod grids;
pub mod harness;
pub mod oracle;
pub mod source;
pub mod stats;

pub use error::{Error, Result};
