//! Approximated Whittle index policies for opportunistic access to
//! Gilbert-Elliott channels observed through noisy CQI reports.
//!
//! - [`belief`]: single-channel belief dynamics.
//! - [`index`]: the closed-form n-iteration approximated Whittle index.
//! - [`oracle`]: exact finite-horizon dynamic programming and property suites.
//! - [`policy`]: myopic, AWI(n) and random channel selection.
//! - [`sim`]: seeded Monte-Carlo evaluation with common random numbers.
//! - [`presets`]: the four seven-channel benchmark systems.

pub mod belief;
pub mod index;
pub mod oracle;
pub mod policy;
pub mod presets;
pub mod sim;
