//! Link-level field model for ring arrays carrying helical-phase modes.
//!
//! Three synthesis paths are provided, all agreeing on the same aggregate
//! normalization (no shared amplitude prefactor beyond free-space spreading):
//!
//! * exact: per receive element, the coherent sum over transmit elements of
//!   spherical-wave terms `e^{ikd}/d`, mode-weighted by the helical
//!   excitation `e^{i l phi_n}` and averaged over the ring;
//! * approximate: the stationary-ring closed form per receive element,
//!   `i^{-l} (e^{ikr}/r) e^{i l gamma} J_l(k R_tx sin th)` times the receive
//!   element's plane-wave offset `e^{i k R_rx sin th cos(phi - phi_m)}`;
//! * combined: the approximate path summed over the receive ring, where the
//!   offset sum collapses to `N_rx J_0(k R_rx sin th)`.
//!
//! The exact and approximate paths differ by ring-sampling alias terms: a
//! discrete N-element ring reproduces the continuous-ring integral only up
//! to contributions from orders l +- N, l +- 2N, ... of the Jacobi-Anger
//! expansion. With few elements and electrically large rings those aliases
//! are not small, which is why the toolkit carries both paths instead of
//! treating the closed form as ground truth.
//!
//! The additive noise helper calibrates its variance against the mean power
//! of exactly the samples it is handed, so the effective SNR definition is
//! always relative to the frame being corrupted.

use crate::bessel::{bessel_j, BesselError};
use crate::geometry::{ElementPositions, MisalignmentPose, UcaLayout};
use crate::C64;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

/// Unit phasor `e^{i t}`.
#[inline]
pub fn cis(t: f64) -> C64 {
    let (s, c) = t.sin_cos();
    C64::new(c, s)
}

/// Exact integer power of the imaginary unit, `i^l`, for any sign of `l`.
#[inline]
pub fn i_pow(l: i32) -> C64 {
    match l.rem_euclid(4) {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    }
}

/// Ring radii of the two arrays, in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingRadii {
    /// Transmit ring radius.
    pub tx: f64,
    /// Receive ring radius.
    pub rx: f64,
}

/// Invalid model parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelError {
    /// Carrier grid must hold at least one wavenumber.
    EmptyCarriers,
    /// Wavenumbers must be finite and strictly positive.
    BadWavenumber,
    /// Carrier spacing must be one radian per meter.
    NonUnitSpacing,
    /// Mode set must hold at least one mode.
    EmptyModes,
    /// Modes must be consecutive integers in ascending order.
    NonConsecutiveModes,
    /// Noise insertion needs at least one sample.
    EmptySamples,
    /// SNR must not be NaN or negative infinity.
    BadSnr,
}

impl core::fmt::Display for ModelError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let msg = match self {
            ModelError::EmptyCarriers => "carrier grid is empty",
            ModelError::BadWavenumber => "wavenumbers must be finite and positive",
            ModelError::NonUnitSpacing => "carrier spacing must be 1 rad/m",
            ModelError::EmptyModes => "mode set is empty",
            ModelError::NonConsecutiveModes => "modes must be consecutive ascending integers",
            ModelError::EmptySamples => "no samples to add noise to",
            ModelError::BadSnr => "SNR must not be NaN or -inf",
        };
        write!(f, "{msg}")
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ModelError {}

/// Unit-spaced wavenumber grid, one subcarrier per entry.
///
/// The angle-parameter inversion reads phase differences between adjacent
/// subcarriers directly as meters, which pins the spacing to exactly one
/// radian per meter; the constructors enforce it.
#[derive(Debug, Clone, PartialEq)]
pub struct CarrierGrid {
    k: Vec<f64>,
}

impl CarrierGrid {
    /// Grid of `count` wavenumbers starting at `k_start`, spaced by 1.
    pub fn unit(k_start: f64, count: usize) -> Result<Self, ModelError> {
        if count == 0 {
            return Err(ModelError::EmptyCarriers);
        }
        if !k_start.is_finite() || k_start <= 0.0 {
            return Err(ModelError::BadWavenumber);
        }
        Ok(CarrierGrid {
            k: (0..count).map(|p| k_start + p as f64).collect(),
        })
    }

    /// Validates an explicit wavenumber list: finite, positive, unit-spaced
    /// within 1e-12.
    pub fn from_wavenumbers(k: Vec<f64>) -> Result<Self, ModelError> {
        if k.is_empty() {
            return Err(ModelError::EmptyCarriers);
        }
        if k.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(ModelError::BadWavenumber);
        }
        for w in k.windows(2) {
            if (w[1] - w[0] - 1.0).abs() > 1e-12 {
                return Err(ModelError::NonUnitSpacing);
            }
        }
        Ok(CarrierGrid { k })
    }

    /// Number of subcarriers.
    pub fn len(&self) -> usize {
        self.k.len()
    }

    /// True when the grid is empty; constructors forbid this.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Wavenumber of subcarrier `p` in rad/m.
    pub fn wavenumber(&self, p: usize) -> f64 {
        self.k[p]
    }

    /// Spacing between adjacent subcarriers in rad/m.
    pub fn spacing(&self) -> f64 {
        1.0
    }

    /// All wavenumbers in order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.k
    }
}

/// Consecutive set of helical-phase mode orders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeSet {
    modes: Vec<i32>,
}

impl ModeSet {
    /// Inclusive span of consecutive modes.
    pub fn span(l_min: i32, l_max: i32) -> Result<Self, ModelError> {
        if l_min > l_max {
            return Err(ModelError::EmptyModes);
        }
        Ok(ModeSet {
            modes: (l_min..=l_max).collect(),
        })
    }

    /// `count` modes centered on zero, favoring the negative side when
    /// `count` is even: for example 8 modes span -4..=3.
    pub fn centered(count: usize) -> Result<Self, ModelError> {
        if count == 0 {
            return Err(ModelError::EmptyModes);
        }
        let l_min = -((count / 2) as i32);
        ModeSet::span(l_min, l_min + count as i32 - 1)
    }

    /// Validates an explicit list: consecutive ascending integers.
    pub fn from_modes(modes: Vec<i32>) -> Result<Self, ModelError> {
        if modes.is_empty() {
            return Err(ModelError::EmptyModes);
        }
        for w in modes.windows(2) {
            if w[1] != w[0] + 1 {
                return Err(ModelError::NonConsecutiveModes);
            }
        }
        Ok(ModeSet { modes })
    }

    /// Number of modes.
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    /// True when the set is empty; constructors forbid this.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Mode order at index `u`.
    pub fn mode(&self, u: usize) -> i32 {
        self.modes[u]
    }

    /// All modes in ascending order.
    pub fn modes(&self) -> &[i32] {
        &self.modes
    }

    /// Index of mode zero, if present.
    pub fn index_of_zero(&self) -> Option<usize> {
        self.modes.iter().position(|&l| l == 0)
    }
}

/// Exact per-element receive field for one mode and one subcarrier: the
/// ring-averaged sum of spherical waves from every transmit element,
/// scaled by the pilot `symbol`. Entry `m` of the result is the sample at
/// receive element `m`.
pub fn field_exact_element(pos: &ElementPositions, l: i32, k: f64, symbol: C64) -> Vec<C64> {
    let n_tx = pos.tx.len();
    let inv_n = 1.0 / n_tx as f64;
    (0..pos.rx.len())
        .map(|m| {
            let mut acc = C64::new(0.0, 0.0);
            for n in 0..n_tx {
                let phi_n = core::f64::consts::TAU * n as f64 / n_tx as f64;
                let d = pos.distance(m, n);
                acc += cis(l as f64 * phi_n) * cis(k * d) / d;
            }
            acc * inv_n * symbol
        })
        .collect()
}

/// Stationary-ring approximation of the per-element receive field: common
/// factor `i^{-l} (e^{ikr}/r) e^{i l gamma} J_l(k R_tx sin th)` times the
/// per-element offset `e^{i k R_rx sin th cos(phi - phi_m)}`.
pub fn field_approx_element(
    rx: &UcaLayout,
    pose: &MisalignmentPose,
    tx_radius: f64,
    l: i32,
    k: f64,
    symbol: C64,
) -> Result<Vec<C64>, BesselError> {
    let st = pose.elevation().sin();
    let gamma = crate::geometry::gamma_from_aoa(pose.azimuth(), pose.elevation());
    let j = bessel_j(l, k * tx_radius * st)?;
    let common = i_pow(-l) * cis(k * pose.range()) / pose.range()
        * cis(l as f64 * gamma)
        * j
        * symbol;
    Ok((0..rx.len())
        .map(|m| {
            let off = k * rx.radius() * st * (pose.azimuth() - rx.element_azimuth(m)).cos();
            common * cis(off)
        })
        .collect())
}

/// Closed-form ring-combined receive sample for one mode and subcarrier:
/// the approximate per-element field summed over the receive ring, with the
/// offset sum collapsed to `N_rx J_0(k R_rx sin th)`.
pub fn received_combined(
    pose: &MisalignmentPose,
    radii: RingRadii,
    n_rx: usize,
    l: i32,
    k: f64,
    symbol: C64,
) -> Result<C64, BesselError> {
    let st = pose.elevation().sin();
    let gamma = crate::geometry::gamma_from_aoa(pose.azimuth(), pose.elevation());
    let j_tx = bessel_j(l, k * radii.tx * st)?;
    let j_rx = bessel_j(0, k * radii.rx * st)?;
    Ok(i_pow(-l) * cis(k * pose.range()) / pose.range()
        * cis(l as f64 * gamma)
        * (n_rx as f64 * j_tx * j_rx)
        * symbol)
}

/// Reference-element sample for one subcarrier: the mode-zero approximate
/// field at receive element 0, whose phase carries `k (r + R_rx sin th cos
/// phi)`.
pub fn ref_element_signal(
    pose: &MisalignmentPose,
    radii: RingRadii,
    k: f64,
    symbol: C64,
) -> Result<C64, BesselError> {
    let st = pose.elevation().sin();
    let j_tx = bessel_j(0, k * radii.tx * st)?;
    let off = k * radii.rx * st * pose.azimuth().cos();
    Ok(cis(off) * cis(k * pose.range()) / pose.range() * j_tx * symbol)
}

/// Adds circularly symmetric complex white Gaussian noise scaled so that
/// the ratio of the input frame's mean sample power to the noise variance
/// is `snr_db`. Returns the per-sample noise variance used.
///
/// `snr_db = +inf` is the noiseless sentinel and leaves the samples
/// untouched. An all-zero frame gets zero noise for any SNR.
pub fn add_awgn<R: Rng + ?Sized>(
    samples: &mut [C64],
    snr_db: f64,
    rng: &mut R,
) -> Result<f64, ModelError> {
    if samples.is_empty() {
        return Err(ModelError::EmptySamples);
    }
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(ModelError::BadSnr);
    }
    if snr_db == f64::INFINITY {
        return Ok(0.0);
    }
    let power: f64 =
        samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / samples.len() as f64;
    let var = power / 10.0_f64.powf(snr_db / 10.0);
    if var == 0.0 {
        return Ok(0.0);
    }
    let comp = (0.5 * var).sqrt();
    for s in samples.iter_mut() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *s += C64::new(comp * re, comp * im);
    }
    Ok(var)
}
