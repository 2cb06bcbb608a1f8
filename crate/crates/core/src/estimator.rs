//! Multi-snapshot angle-of-arrival estimator over the mode-by-carrier
//! measurement grid.
//!
//! Three phase parameters are fitted independently, each as a single tone
//! along one axis of the normalized grid:
//!
//! * rows (fixed mode, carriers ascending) rotate by the wrapped range
//!   `r` per unit wavenumber step;
//! * columns (fixed carrier, modes ascending) rotate by the tilt angle
//!   `gamma` per mode step;
//! * the reference-element vector rotates by the wrapped offset range
//!   `xi` per wavenumber step.
//!
//! Azimuth and elevation then follow from the closed-form inversion of
//! `(xi - r, gamma)`. Only the difference `xi - r` enters, so the wrap
//! shared by `r` and `xi` cancels as long as the true offset stays within
//! half a phase turn, which the receive ring's radius guarantees.
//!
//! The accumulator ingests snapshots one frame at a time and keeps only
//! axis covariances, amplitude sums, and sticky flags, so memory stays
//! constant in the snapshot count. Entries whose mean amplitude falls
//! below a fraction of the grid median are excluded after accumulation by
//! taking principal submatrices, which is exact: restriction commutes
//! with averaging outer products. Each maximal contiguous run of the
//! surviving entries is fitted on its own, and runs are fused by circular
//! averaging with weights proportional to shift-pair count times the
//! eigengap of the fit, so confident long runs dominate and noise-floor
//! fits contribute almost nothing.

use crate::em::{CarrierGrid, ModeSet, RingRadii};
use crate::esprit::{
    accumulate_outer_upper, estimate_tone_from_cov, tri_len, EspritError, HermitianCov, OpCounter,
    ToneFit,
};
use crate::flags::{Flag, FlagSet};
use crate::geometry::{aoa_from_intermediates, wrap_angle, AmbiguityPolicy};
use crate::pilot::{normalize_sample, PilotBook, SignContext, SignError, SignMode, SignPlan};
use crate::C64;
use alloc::vec;
use alloc::vec::Vec;

/// Flags that disqualify a report's angle estimates from aggregate error
/// statistics. The remaining flags are diagnostics the estimate survives.
pub const EXCLUDING_FLAGS: FlagSet = FlagSet::from_bits(
    Flag::NoConvergence as u16
        | Flag::ZeroSubvector as u16
        | Flag::NoUsableRows as u16
        | Flag::NoUsableColumns as u16
        | Flag::GammaDegenerate as u16
        | Flag::RadicandOverflow as u16
        | Flag::InconsistentIntermediates as u16,
);

/// Tuning knobs of the estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    /// Exclude a grid entry when its mean amplitude falls below this
    /// fraction of the median mean amplitude.
    pub exclusion_tau: f64,
    /// Power-iteration relative residual tolerance.
    pub power_tol: f64,
    /// Power-iteration budget per fit.
    pub power_max_iter: usize,
    /// Forward-smoothing window applied to each run's covariance, when
    /// the run is long enough; None disables smoothing.
    pub smoothing: Option<usize>,
    /// Reporting conventions and inversion tolerances.
    pub policy: AmbiguityPolicy,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            exclusion_tau: 0.25,
            power_tol: 1e-12,
            power_max_iter: 1000,
            smoothing: None,
            policy: AmbiguityPolicy::default(),
        }
    }
}

/// One snapshot of raw received samples: the ring-combined mode-by-carrier
/// grid (row-major, modes ascending then carriers ascending) and the
/// reference-element vector across carriers.
#[derive(Debug, Clone)]
pub struct FrameSnapshot {
    /// Ring-combined samples, `modes.len() * carriers.len()` entries.
    pub grid: Vec<C64>,
    /// Reference-element samples, one per carrier.
    pub reference: Vec<C64>,
}

/// Estimator misuse or configuration failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorError {
    /// Tone fitting along carriers needs at least two subcarriers.
    TooFewCarriers,
    /// Tone fitting along modes needs at least two modes.
    TooFewModes,
    /// The mode set must contain mode zero for the reference pilots.
    NoZeroMode,
    /// A pushed frame or pilot book does not match the configured shape.
    ShapeMismatch,
    /// Invalid tuning value.
    BadConfig(&'static str),
    /// Sign-plan construction failed.
    Sign(SignError),
}

impl core::fmt::Display for EstimatorError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            EstimatorError::TooFewCarriers => write!(f, "need at least two subcarriers"),
            EstimatorError::TooFewModes => write!(f, "need at least two modes"),
            EstimatorError::NoZeroMode => write!(f, "mode set must contain mode zero"),
            EstimatorError::ShapeMismatch => {
                write!(f, "frame or pilot shape does not match the configuration")
            }
            EstimatorError::BadConfig(msg) => write!(f, "bad estimator config: {msg}"),
            EstimatorError::Sign(e) => write!(f, "{e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for EstimatorError {}

impl From<SignError> for EstimatorError {
    fn from(e: SignError) -> Self {
        EstimatorError::Sign(e)
    }
}

/// Everything one estimation run produces. Angle fields are None when the
/// corresponding intermediate could not be formed; `flags` says why.
#[derive(Debug, Clone)]
pub struct EstimateReport {
    /// Per-mode-row wrapped range estimates (radians of phase per unit
    /// wavenumber), for diagnostics.
    pub r_per_mode: Vec<Option<f64>>,
    /// Per-carrier-column signed tilt estimates, for diagnostics.
    pub gamma_per_carrier: Vec<Option<f64>>,
    /// Fused wrapped range phase, in [-pi, pi).
    pub r_wrapped: Option<f64>,
    /// Population variance of wrapped per-row deviations around the fused
    /// range, for diagnostics.
    pub r_variance: Option<f64>,
    /// Fused tilt angle, folded non-negative.
    pub gamma: Option<f64>,
    /// Fused wrapped offset range phase, in [-pi, pi).
    pub xi_wrapped: Option<f64>,
    /// Offset difference xi - r converted to meters.
    pub delta_m: Option<f64>,
    /// Recovered azimuth in radians.
    pub phi_rad: Option<f64>,
    /// Recovered elevation in radians.
    pub theta_rad: Option<f64>,
    /// Union of all conditions encountered.
    pub flags: FlagSet,
    /// Grid entries excluded by flags or the amplitude mask.
    pub excluded_grid_entries: usize,
    /// Reference entries excluded by flags or the amplitude mask.
    pub excluded_ref_entries: usize,
    /// Snapshots accumulated.
    pub snapshots: u64,
    /// Azimuth sign convention the estimate is reported under.
    pub azimuth_branch: &'static str,
    /// Range wrap convention the estimate is reported under.
    pub range_convention: &'static str,
}

impl EstimateReport {
    /// True when the report must not enter aggregate error statistics.
    pub fn is_excluded(&self) -> bool {
        self.flags.intersects(EXCLUDING_FLAGS)
    }
}

/// Streaming accumulator for the multi-snapshot estimator. Holds per-axis
/// covariance sums and amplitude statistics; never the snapshots.
#[derive(Debug, Clone)]
pub struct MfMtAccumulator {
    u: usize,
    p: usize,
    spacing: f64,
    rx_radius: f64,
    cfg: EstimatorConfig,
    plan: SignPlan,
    zero_row: usize,
    row_cov: Vec<C64>,
    col_cov: Vec<C64>,
    ref_cov: Vec<C64>,
    amp: Vec<f64>,
    ref_amp: Vec<f64>,
    entry_flags: Vec<FlagSet>,
    ref_flags: Vec<FlagSet>,
    count: u64,
    norm_scratch: Vec<C64>,
    ref_scratch: Vec<C64>,
    ops_r: OpCounter,
    ops_gamma: OpCounter,
    ops_xi: OpCounter,
}

impl MfMtAccumulator {
    /// Builds an accumulator for a fixed configuration. The sign plan is
    /// evaluated once here; per-snapshot work involves no Bessel calls.
    pub fn new(
        modes: &ModeSet,
        carriers: &CarrierGrid,
        radii: RingRadii,
        sign_mode: SignMode,
        sign_ctx: &SignContext,
        cfg: EstimatorConfig,
    ) -> Result<Self, EstimatorError> {
        let u = modes.len();
        let p = carriers.len();
        if u < 2 {
            return Err(EstimatorError::TooFewModes);
        }
        if p < 2 {
            return Err(EstimatorError::TooFewCarriers);
        }
        let zero_row = modes.index_of_zero().ok_or(EstimatorError::NoZeroMode)?;
        if !(cfg.exclusion_tau.is_finite() && cfg.exclusion_tau >= 0.0) {
            return Err(EstimatorError::BadConfig("exclusion_tau must be >= 0"));
        }
        if !(cfg.power_tol.is_finite() && cfg.power_tol > 0.0) {
            return Err(EstimatorError::BadConfig("power_tol must be > 0"));
        }
        if cfg.power_max_iter == 0 {
            return Err(EstimatorError::BadConfig("power_max_iter must be >= 1"));
        }
        if let Some(w) = cfg.smoothing {
            if w < 2 {
                return Err(EstimatorError::BadConfig("smoothing window must be >= 2"));
            }
        }
        let plan = SignPlan::build(modes, carriers, radii.tx, radii.rx, sign_mode, sign_ctx)?;
        let mut entry_flags = vec![FlagSet::EMPTY; u * p];
        for (ef, pf) in entry_flags.iter_mut().zip(plan.grid_flags.iter()) {
            ef.merge(*pf);
        }
        let mut ref_flags = vec![FlagSet::EMPTY; p];
        for (ef, pf) in ref_flags.iter_mut().zip(plan.ref_flags.iter()) {
            ef.merge(*pf);
        }
        Ok(MfMtAccumulator {
            u,
            p,
            spacing: carriers.spacing(),
            rx_radius: radii.rx,
            cfg,
            plan,
            zero_row,
            row_cov: vec![C64::new(0.0, 0.0); u * tri_len(p)],
            col_cov: vec![C64::new(0.0, 0.0); p * tri_len(u)],
            ref_cov: vec![C64::new(0.0, 0.0); tri_len(p)],
            amp: vec![0.0; u * p],
            ref_amp: vec![0.0; p],
            entry_flags,
            ref_flags,
            count: 0,
            norm_scratch: vec![C64::new(0.0, 0.0); u * p],
            ref_scratch: vec![C64::new(0.0, 0.0); p],
            ops_r: OpCounter::new(),
            ops_gamma: OpCounter::new(),
            ops_xi: OpCounter::new(),
        })
    }

    /// Number of mode rows.
    pub fn num_modes(&self) -> usize {
        self.u
    }

    /// Number of subcarrier columns.
    pub fn num_carriers(&self) -> usize {
        self.p
    }

    /// Snapshots pushed so far.
    pub fn snapshots(&self) -> u64 {
        self.count
    }

    /// Complex multiply-accumulate counts per stage (range rows, tilt
    /// columns, offset reference), accumulation and fitting included.
    pub fn op_counts(&self) -> (u64, u64, u64) {
        (self.ops_r.cmacs, self.ops_gamma.cmacs, self.ops_xi.cmacs)
    }

    /// Ingests one raw snapshot frame with its pilot book: normalizes in
    /// place and folds the frame into the axis covariances.
    pub fn push_raw(
        &mut self,
        grid: &[C64],
        reference: &[C64],
        pilots: &PilotBook,
    ) -> Result<(), EstimatorError> {
        if grid.len() != self.u * self.p
            || reference.len() != self.p
            || pilots.num_modes() != self.u
            || pilots.num_carriers() != self.p
        {
            return Err(EstimatorError::ShapeMismatch);
        }
        for ui in 0..self.u {
            for pi in 0..self.p {
                let idx = ui * self.p + pi;
                let (v, a, f) = normalize_sample(
                    grid[idx],
                    pilots.symbol(ui, pi),
                    self.plan.grid_factor[idx],
                );
                self.norm_scratch[idx] = v;
                self.amp[idx] += a;
                if !f.is_empty() {
                    self.entry_flags[idx].merge(f);
                }
            }
        }
        for pi in 0..self.p {
            let (v, a, f) = normalize_sample(
                reference[pi],
                pilots.symbol(self.zero_row, pi),
                self.plan.ref_factor[pi],
            );
            self.ref_scratch[pi] = v;
            self.ref_amp[pi] += a;
            if !f.is_empty() {
                self.ref_flags[pi].merge(f);
            }
        }
        let tp = tri_len(self.p);
        for ui in 0..self.u {
            accumulate_outer_upper(
                &mut self.row_cov[ui * tp..(ui + 1) * tp],
                &self.norm_scratch[ui * self.p..(ui + 1) * self.p],
            );
        }
        self.ops_r.add((self.u * tp) as u64);
        // Column gather: strided reads, but the whole grid fits in cache.
        let tu = tri_len(self.u);
        for pi in 0..self.p {
            let tri = &mut self.col_cov[pi * tu..(pi + 1) * tu];
            let mut idx = 0;
            for i in 0..self.u {
                let vi = self.norm_scratch[i * self.p + pi];
                for j in i..self.u {
                    tri[idx] += vi * self.norm_scratch[j * self.p + pi].conj();
                    idx += 1;
                }
            }
        }
        self.ops_gamma.add((self.p * tu) as u64);
        accumulate_outer_upper(&mut self.ref_cov, &self.ref_scratch);
        self.ops_xi.add(tp as u64);
        self.count += 1;
        Ok(())
    }

    /// Closes accumulation and produces the estimate report.
    pub fn finish(&mut self) -> EstimateReport {
        let mut report = EstimateReport {
            r_per_mode: vec![None; self.u],
            gamma_per_carrier: vec![None; self.p],
            r_wrapped: None,
            r_variance: None,
            gamma: None,
            xi_wrapped: None,
            delta_m: None,
            phi_rad: None,
            theta_rad: None,
            flags: FlagSet::EMPTY,
            excluded_grid_entries: 0,
            excluded_ref_entries: 0,
            snapshots: self.count,
            azimuth_branch: AmbiguityPolicy::AZIMUTH_BRANCH,
            range_convention: AmbiguityPolicy::RANGE_CONVENTION,
        };
        if self.count == 0 {
            report.flags.insert(Flag::NoUsableRows);
            report.flags.insert(Flag::NoUsableColumns);
            return report;
        }
        let inv_count = 1.0 / self.count as f64;
        let grid_mean: Vec<f64> = self.amp.iter().map(|a| a * inv_count).collect();
        let ref_mean: Vec<f64> = self.ref_amp.iter().map(|a| a * inv_count).collect();
        let grid_included =
            self.inclusion_mask(&grid_mean, &self.entry_flags, &mut report.flags);
        let ref_included = self.inclusion_mask(&ref_mean, &self.ref_flags, &mut report.flags);
        report.excluded_grid_entries = grid_included.iter().filter(|&&b| !b).count();
        report.excluded_ref_entries = ref_included.iter().filter(|&&b| !b).count();

        // Range: one fit per contiguous run per mode row, fused across
        // rows by resultant addition.
        let tp = tri_len(self.p);
        let mut total_r = C64::new(0.0, 0.0);
        for ui in 0..self.u {
            let mask = &grid_included[ui * self.p..(ui + 1) * self.p];
            let z = Self::fit_axis(
                &self.cfg,
                self.count as f64,
                &self.row_cov[ui * tp..(ui + 1) * tp],
                self.p,
                mask,
                &mut self.ops_r,
                &mut report.flags,
            );
            if let Some(r_u) = circular_arg(z) {
                report.r_per_mode[ui] = Some(r_u);
            }
            total_r += z;
        }
        report.r_wrapped = circular_arg(total_r);
        if report.r_wrapped.is_none() {
            report.flags.insert(Flag::NoUsableRows);
        } else if let Some(r_hat) = report.r_wrapped {
            let mut n = 0usize;
            let mut acc = 0.0;
            for r_u in report.r_per_mode.iter().flatten() {
                let d = wrap_angle(r_u - r_hat);
                acc += d * d;
                n += 1;
            }
            if n > 0 {
                report.r_variance = Some(acc / n as f64);
            }
        }

        // Tilt: one fit per contiguous run per carrier column. The fused
        // argument is folded non-negative; the tone model only fixes the
        // tilt up to the sign convention of the mode axis.
        let tu = tri_len(self.u);
        let mut total_g = C64::new(0.0, 0.0);
        for pi in 0..self.p {
            let mask: Vec<bool> = (0..self.u)
                .map(|ui| grid_included[ui * self.p + pi])
                .collect();
            let z = Self::fit_axis(
                &self.cfg,
                self.count as f64,
                &self.col_cov[pi * tu..(pi + 1) * tu],
                self.u,
                &mask,
                &mut self.ops_gamma,
                &mut report.flags,
            );
            if let Some(g_p) = circular_arg(z) {
                report.gamma_per_carrier[pi] = Some(g_p);
            }
            total_g += z;
        }
        report.gamma = circular_arg(total_g).map(|g| g.abs());
        if report.gamma.is_none() {
            report.flags.insert(Flag::NoUsableColumns);
        }

        // Offset range from the reference vector, one carrier-axis fit.
        let zx = Self::fit_axis(
            &self.cfg,
            self.count as f64,
            &self.ref_cov,
            self.p,
            &ref_included,
            &mut self.ops_xi,
            &mut report.flags,
        );
        report.xi_wrapped = circular_arg(zx);
        if report.xi_wrapped.is_none() {
            report.flags.insert(Flag::NoUsableRows);
        }

        if let (Some(r), Some(g), Some(x)) =
            (report.r_wrapped, report.gamma, report.xi_wrapped)
        {
            let delta = wrap_angle(x - r) / self.spacing;
            report.delta_m = Some(delta);
            let rec = aoa_from_intermediates(0.0, g, delta, self.rx_radius, &self.cfg.policy);
            report.flags.merge(rec.flags);
            report.phi_rad = Some(rec.phi_rad);
            report.theta_rad = Some(rec.theta_rad);
        }
        report
    }

    /// Marks entries usable when unflagged and not weak-amplitude; weak
    /// entries raise the diagnostic flag on the report.
    fn inclusion_mask(
        &self,
        means: &[f64],
        flags: &[FlagSet],
        report_flags: &mut FlagSet,
    ) -> Vec<bool> {
        let med = median(means);
        let cut = self.cfg.exclusion_tau * med;
        means
            .iter()
            .zip(flags.iter())
            .map(|(m, f)| {
                if !f.is_empty() {
                    report_flags.merge(*f);
                    return false;
                }
                if *m < cut {
                    report_flags.insert(Flag::WeakAmplitude);
                    return false;
                }
                true
            })
            .collect()
    }

    /// Fits every contiguous run of usable entries along one axis and
    /// returns the weighted resultant of the run phasors. Weight is shift
    /// pairs times eigengap, so an uninformative (degenerate) run adds
    /// nothing rather than poisoning the fusion.
    fn fit_axis(
        cfg: &EstimatorConfig,
        count: f64,
        tri: &[C64],
        dim: usize,
        included: &[bool],
        counter: &mut OpCounter,
        report_flags: &mut FlagSet,
    ) -> C64 {
        let mut resultant = C64::new(0.0, 0.0);
        let mut start = 0usize;
        while start < dim {
            if !included[start] {
                start += 1;
                continue;
            }
            let mut end = start + 1;
            while end < dim && included[end] {
                end += 1;
            }
            let len = end - start;
            if len >= 2 {
                let cov = HermitianCov::from_upper_triangle_sum(tri, dim, count, start, len);
                let fit = match cfg.smoothing {
                    Some(w) if w < len => cov.smoothed(w).and_then(|sm| {
                        estimate_tone_from_cov(&sm, cfg.power_tol, cfg.power_max_iter, counter)
                    }),
                    _ => estimate_tone_from_cov(&cov, cfg.power_tol, cfg.power_max_iter, counter),
                };
                match fit {
                    Ok(ToneFit {
                        phase,
                        lambda,
                        lambda2,
                        pairs,
                        flags,
                        ..
                    }) => {
                        report_flags.merge(flags);
                        let w = pairs as f64 * (lambda - lambda2).max(0.0);
                        resultant += crate::em::cis(phase) * w;
                    }
                    Err(EspritError::ZeroSubvector) => {
                        report_flags.insert(Flag::ZeroSubvector);
                    }
                    Err(_) => {
                        // Zero or breakdown covariances carry no usable
                        // tone; treat like a failed convergence.
                        report_flags.insert(Flag::NoConvergence);
                    }
                }
            }
            start = end;
        }
        resultant
    }
}

/// Argument of a resultant, None when it has no direction.
fn circular_arg(z: C64) -> Option<f64> {
    if z.norm() < 1e-300 {
        None
    } else {
        Some(z.arg())
    }
}

/// Median of a nonempty slice; even lengths average the middle pair.
fn median(v: &[f64]) -> f64 {
    let mut s: Vec<f64> = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("amplitudes are never NaN"));
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Convenience wrapper: accumulate every frame of an iterator and finish.
pub fn run_mf_mt_esprit<I>(
    modes: &ModeSet,
    carriers: &CarrierGrid,
    radii: RingRadii,
    sign_mode: SignMode,
    sign_ctx: &SignContext,
    cfg: EstimatorConfig,
    frames: I,
) -> Result<EstimateReport, EstimatorError>
where
    I: IntoIterator<Item = (FrameSnapshot, PilotBook)>,
{
    let mut acc = MfMtAccumulator::new(modes, carriers, radii, sign_mode, sign_ctx, cfg)?;
    for (frame, pilots) in frames {
        acc.push_raw(&frame.grid, &frame.reference, &pilots)?;
    }
    Ok(acc.finish())
}
