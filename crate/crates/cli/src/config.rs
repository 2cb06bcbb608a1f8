//! Experiment configuration: a TOML file plus command-line overrides,
//! resolved into validated library types. Every run's outputs carry a
//! fingerprint of the fully resolved configuration so result files can
//! always be traced to their exact inputs.

use oam_aoa_core::em::{CarrierGrid, ModeSet, RingRadii};
use oam_aoa_core::estimator::EstimatorConfig;
use oam_aoa_core::geometry::MisalignmentPose;
use oam_aoa_core::pilot::{SignContext, SignMode};
use serde::Deserialize;
use std::fmt::Write as _;
use std::path::Path;

const DEG: f64 = std::f64::consts::PI / 180.0;

/// Sign-compensation source for the grid normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SignModeChoice {
    /// Evaluate compensation signs at the true elevation.
    Genie,
    /// Evaluate compensation signs at the main-lobe midpoint.
    Prior,
    /// No sign compensation.
    None,
}

impl SignModeChoice {
    pub fn to_core(self) -> SignMode {
        match self {
            SignModeChoice::Genie => SignMode::Genie,
            SignModeChoice::Prior => SignMode::PriorMidpoint,
            SignModeChoice::None => SignMode::None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SignModeChoice::Genie => "genie",
            SignModeChoice::Prior => "prior",
            SignModeChoice::None => "none",
        }
    }
}

/// Forward-model fidelity used to synthesize received frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ChannelChoice {
    /// Literal per-element propagation sums.
    Exact,
    /// Closed-form ring-factor model.
    Approx,
}

impl ChannelChoice {
    pub fn name(self) -> &'static str {
        match self {
            ChannelChoice::Exact => "exact",
            ChannelChoice::Approx => "approx",
        }
    }
}

/// Raw configuration as read from TOML; every field has a default so a
/// missing file or an empty table is a complete experiment description.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Transmit ring element count.
    pub tx_elements: usize,
    /// Receive ring element count.
    pub rx_elements: usize,
    /// Number of pilot subcarriers (unit wavenumber spacing).
    pub subcarriers: usize,
    /// Wavenumber of the first subcarrier, rad/m.
    pub k_start: f64,
    /// Number of vortex modes, centered on zero.
    pub modes: usize,
    /// Ring radius in meters; defaults to ten wavelengths of the first
    /// subcarrier.
    pub ring_radius_m: Option<f64>,
    /// True link range in meters.
    pub range_m: f64,
    /// True azimuth in degrees.
    pub azimuth_deg: f64,
    /// True elevation in degrees.
    pub elevation_deg: f64,
    /// Main-lobe elevation interval in degrees, used by the prior sign
    /// mode.
    pub main_lobe_deg: (f64, f64),
    /// SNR sweep points in dB.
    pub snr_list_db: Vec<f64>,
    /// Monte Carlo trials per sweep point.
    pub trials: u32,
    /// Master seed for all per-trial streams.
    pub seed: u64,
    /// Sign-compensation source.
    pub sign_mode: SignModeChoice,
    /// Forward-model fidelity.
    pub channel: ChannelChoice,
    /// Snapshots accumulated per trial at finite SNR.
    pub snapshots: u32,
    /// Weak-amplitude exclusion threshold as a fraction of the median.
    pub exclusion_tau: f64,
    /// Optional forward-smoothing window for the covariance fits.
    pub smoothing: Option<usize>,
    /// Largest tolerated fraction of flagged (excluded) trials before the
    /// run exits with the numerical-failure code.
    pub max_flagged_fraction: f64,
    /// Monte Carlo trials per SNR for the estimated-steering capacity
    /// curve.
    pub capacity_trials: u32,
    /// Axis sizes for the scaling command.
    pub scaling_sizes: Vec<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            tx_elements: 9,
            rx_elements: 9,
            subcarriers: 8,
            k_start: 47.0,
            modes: 8,
            ring_radius_m: None,
            range_m: 40.0,
            azimuth_deg: 7.0,
            elevation_deg: 7.0,
            main_lobe_deg: (2.0, 8.0),
            snr_list_db: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            trials: 1000,
            seed: 1,
            sign_mode: SignModeChoice::Genie,
            channel: ChannelChoice::Approx,
            snapshots: 8192,
            exclusion_tau: 0.25,
            smoothing: None,
            max_flagged_fraction: 0.05,
            capacity_trials: 100,
            scaling_sizes: vec![4, 8, 16, 32],
        }
    }
}

impl ExperimentConfig {
    /// Reads a TOML config file; `None` yields the defaults.
    pub fn load(path: Option<&Path>) -> Result<Self, String> {
        match path {
            None => Ok(ExperimentConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| format!("cannot read config {}: {e}", p.display()))?;
                toml::from_str(&text).map_err(|e| format!("config {}: {e}", p.display()))
            }
        }
    }

    /// Effective ring radius in meters.
    pub fn ring_radius(&self) -> f64 {
        self.ring_radius_m
            .unwrap_or(10.0 * std::f64::consts::TAU / self.k_start)
    }

    /// Canonical one-line-per-field rendering of the resolved config.
    /// Fingerprints and CSV headers both derive from this, so what is
    /// hashed is exactly what is shown.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "tx_elements={} rx_elements={} subcarriers={} k_start={:?} modes={} \
             ring_radius_m={:?} range_m={:?} azimuth_deg={:?} elevation_deg={:?} \
             main_lobe_deg=({:?},{:?}) snr_list_db={:?} trials={} seed={} sign_mode={} \
             channel={} snapshots={} exclusion_tau={:?} smoothing={:?} \
             max_flagged_fraction={:?} capacity_trials={} scaling_sizes={:?}",
            self.tx_elements,
            self.rx_elements,
            self.subcarriers,
            self.k_start,
            self.modes,
            self.ring_radius(),
            self.range_m,
            self.azimuth_deg,
            self.elevation_deg,
            self.main_lobe_deg.0,
            self.main_lobe_deg.1,
            self.snr_list_db,
            self.trials,
            self.seed,
            self.sign_mode.name(),
            self.channel.name(),
            self.snapshots,
            self.exclusion_tau,
            self.smoothing,
            self.max_flagged_fraction,
            self.capacity_trials,
            self.scaling_sizes,
        );
        s
    }

    /// FNV-1a hash of the canonical rendering, as a fixed-width hex tag.
    pub fn fingerprint(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.canonical().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{h:016x}")
    }

    /// Validates and resolves into library types.
    pub fn resolve(&self) -> Result<RunSetup, String> {
        if self.modes < 2 {
            return Err("need at least two modes".into());
        }
        if self.subcarriers < 2 {
            return Err("need at least two subcarriers".into());
        }
        let modes = ModeSet::centered(self.modes).map_err(|e| format!("modes: {e}"))?;
        let carriers = CarrierGrid::unit(self.k_start, self.subcarriers)
            .map_err(|e| format!("subcarriers: {e}"))?;
        let radius = self.ring_radius();
        if !(radius.is_finite() && radius > 0.0) {
            return Err("ring radius must be positive and finite".into());
        }
        if self.tx_elements == 0 || self.rx_elements == 0 {
            return Err("element counts must be at least 1".into());
        }
        let pose = MisalignmentPose::new(
            self.range_m,
            self.azimuth_deg * DEG,
            self.elevation_deg * DEG,
        )
        .map_err(|e| format!("pose: {e}"))?;
        let (lo, hi) = self.main_lobe_deg;
        if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo < hi && hi < 90.0) {
            return Err("main lobe must satisfy 0 <= low < high < 90 degrees".into());
        }
        if self.trials == 0 || self.capacity_trials == 0 {
            return Err("trial counts must be at least 1".into());
        }
        if self.snapshots == 0 {
            return Err("snapshots must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.max_flagged_fraction) && self.max_flagged_fraction != 1.0 {
            return Err("max_flagged_fraction must lie in [0, 1]".into());
        }
        if self.snr_list_db.is_empty() {
            return Err("snr_list_db must not be empty".into());
        }
        if self.snr_list_db.iter().any(|s| s.is_nan()) {
            return Err("snr_list_db must not contain NaN".into());
        }
        if self.scaling_sizes.iter().any(|&s| s < 2) {
            return Err("scaling sizes must be at least 2".into());
        }
        let estimator = EstimatorConfig {
            exclusion_tau: self.exclusion_tau,
            smoothing: self.smoothing,
            ..EstimatorConfig::default()
        };
        let ctx = SignContext {
            true_elevation_rad: Some(self.elevation_deg * DEG),
            main_lobe_rad: (lo * DEG, hi * DEG),
        };
        Ok(RunSetup {
            modes,
            carriers,
            radii: RingRadii {
                tx: radius,
                rx: radius,
            },
            pose,
            sign_ctx: ctx,
            estimator,
            config: self.clone(),
        })
    }
}

/// Fully resolved experiment inputs, ready to hand to the library.
#[derive(Debug, Clone)]
pub struct RunSetup {
    pub modes: ModeSet,
    pub carriers: CarrierGrid,
    pub radii: RingRadii,
    pub pose: MisalignmentPose,
    pub sign_ctx: SignContext,
    pub estimator: EstimatorConfig,
    pub config: ExperimentConfig,
}
