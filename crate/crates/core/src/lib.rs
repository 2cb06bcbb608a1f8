//! Simulation and estimation library for a misaligned radio link between two
//! uniform circular arrays (UCAs) multiplexing orbital-angular-momentum (OAM)
//! modes over a comb of subcarriers.
//!
//! The transmit array impresses a helical phase `e^{i l phi_n}` per mode `l`;
//! after propagation the combined receive samples factor into Bessel-weighted
//! complex tones whose phase steps over the subcarrier and mode axes encode
//! the link range (wrapped), the boresight tilt angle gamma, and a
//! reference-element range parameter xi. A rotational-invariance subspace fit
//! on sample covariances recovers those phase steps, and a closed-form
//! inversion maps them back to the azimuth/elevation of arrival.
//!
//! Module layout mirrors the signal chain:
//!
//! - [`geometry`]: array layouts, misalignment pose, derived angles, the
//!   element-position construction, and the closed-form angle inversion.
//! - [`bessel`]: first-kind Bessel kernel `J_n(x)` used by the field model.
//! - [`em`]: carrier/mode grids, exact Green's-sum and closed-form field
//!   synthesis, and AWGN injection.
//! - [`pilot`]: pilot books and the normalization that strips known factors
//!   from received samples, including Bessel-sign compensation.
//! - [`esprit`]: sample covariance, power-iteration eigenpair, and the
//!   shift-invariance phase estimator, with operation counters.
//! - [`estimator`]: the end-to-end multi-snapshot pipeline producing an
//!   [`estimator::EstimateReport`].
//! - [`rng`]: deterministic per-trial random stream derivation.
//!
//! The crate is `no_std`-compatible (requires `alloc`); the default `std`
//! feature only switches float math to the platform intrinsics.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]
#![warn(missing_docs)]

extern crate alloc;

pub mod bessel;
pub mod em;
pub mod esprit;
pub mod estimator;
pub mod flags;
pub mod geometry;
pub mod pilot;
pub mod rng;

/// Complex sample type used throughout the crate.
pub type C64 = num_complex::Complex<f64>;

pub use flags::{Flag, FlagSet};
