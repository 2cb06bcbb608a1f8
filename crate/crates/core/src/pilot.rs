//! Pilot symbols and the normalization front end that turns raw received
//! samples into unit-modulus phasors carrying only the link phase.
//!
//! A received grid sample for mode l and wavenumber k has the form
//! `|B| sgn(B) i^{-l} e^{i(k r + l gamma)} s` plus noise, where `B` collects
//! the real ring-coupling gain (a product of Bessel factors) and `s` is the
//! pilot. Normalization strips everything except the phase of interest:
//! divide out the modulus, conjugate away the pilot, multiply by `i^{+l}`,
//! and flip by the sign of `B`. That last step needs the sign of a Bessel
//! product at the unknown elevation, which is where the sign policy comes
//! in: a genie uses the true elevation, a prior uses the midpoint of the
//! expected main-lobe window, or the correction is skipped entirely.

use crate::bessel::{bessel_j, BesselError};
use crate::em::{i_pow, CarrierGrid, ModeSet};
use crate::flags::{Flag, FlagSet};
use crate::C64;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::Rng;

/// Modulus below which a received sample is treated as absent. Noise and
/// signal can conspire to an exact zero only at measure zero, so hitting
/// this marks degenerate input rather than bad luck.
pub const NULL_SAMPLE_EPS: f64 = 1e-300;

/// Bessel-product magnitude below which the compensation sign is declared
/// indeterminate and left at +1.
pub const SIGN_EPS: f64 = 1e-12;

/// Per-snapshot pilot symbols, one unit-modulus QPSK symbol per mode and
/// subcarrier.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotBook {
    sym: Vec<C64>,
    u: usize,
    p: usize,
}

impl PilotBook {
    /// Draws a fresh book of QPSK symbols, one independent draw per entry.
    pub fn generate<R: Rng + ?Sized>(u: usize, p: usize, rng: &mut R) -> Self {
        let sym = (0..u * p)
            .map(|_| i_pow((rng.gen::<u8>() & 3) as i32))
            .collect();
        PilotBook { sym, u, p }
    }

    /// All-ones book, useful for tests and for sources that skip pilots.
    pub fn all_ones(u: usize, p: usize) -> Self {
        PilotBook {
            sym: alloc::vec![C64::new(1.0, 0.0); u * p],
            u,
            p,
        }
    }

    /// Number of mode rows.
    pub fn num_modes(&self) -> usize {
        self.u
    }

    /// Number of subcarrier columns.
    pub fn num_carriers(&self) -> usize {
        self.p
    }

    /// Symbol for mode row `u` and subcarrier column `p`.
    pub fn symbol(&self, u: usize, p: usize) -> C64 {
        self.sym[u * self.p + p]
    }

    /// One mode row of symbols.
    pub fn row(&self, u: usize) -> &[C64] {
        &self.sym[u * self.p..(u + 1) * self.p]
    }
}

/// How the normalization resolves the sign of the real ring-coupling gain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignMode {
    /// Evaluate the Bessel product at the true elevation. An oracle bound,
    /// not realizable in operation.
    Genie,
    /// Evaluate at the midpoint of the expected main-lobe elevation window.
    PriorMidpoint,
    /// Apply no sign correction.
    None,
}

/// Inputs the sign policies draw on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignContext {
    /// True elevation in radians, required by [`SignMode::Genie`].
    pub true_elevation_rad: Option<f64>,
    /// Expected main-lobe elevation window (low, high) in radians, used by
    /// [`SignMode::PriorMidpoint`].
    pub main_lobe_rad: (f64, f64),
}

/// Failure to build a sign plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignError {
    /// Genie mode was requested without a true elevation.
    MissingTruth,
    /// Bessel evaluation left its supported domain.
    Bessel(BesselError),
}

impl core::fmt::Display for SignError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SignError::MissingTruth => write!(f, "genie sign mode needs the true elevation"),
            SignError::Bessel(e) => write!(f, "sign compensation: {e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for SignError {}

impl From<BesselError> for SignError {
    fn from(e: BesselError) -> Self {
        SignError::Bessel(e)
    }
}

fn reference_elevation(mode: SignMode, ctx: &SignContext) -> Result<Option<f64>, SignError> {
    match mode {
        SignMode::None => Ok(None),
        SignMode::Genie => ctx
            .true_elevation_rad
            .map(Some)
            .ok_or(SignError::MissingTruth),
        SignMode::PriorMidpoint => Ok(Some(0.5 * (ctx.main_lobe_rad.0 + ctx.main_lobe_rad.1))),
    }
}

/// Sign of the grid coupling gain for one mode and wavenumber: the sign of
/// `J_l(k R_tx sin th_ref) J_0(k R_rx sin th_ref)`. Returns +1 with a
/// [`Flag::SignIndeterminate`] when the product sits within [`SIGN_EPS`] of
/// zero, where its sign carries no information.
pub fn sign_compensation(
    l: i32,
    k: f64,
    tx_radius: f64,
    rx_radius: f64,
    mode: SignMode,
    ctx: &SignContext,
) -> Result<(f64, FlagSet), SignError> {
    let theta_ref = match reference_elevation(mode, ctx)? {
        None => return Ok((1.0, FlagSet::EMPTY)),
        Some(t) => t,
    };
    let st = theta_ref.sin();
    let prod = bessel_j(l, k * tx_radius * st)? * bessel_j(0, k * rx_radius * st)?;
    Ok(split_sign(prod))
}

/// Sign of the reference-element coupling gain for one wavenumber: the sign
/// of the single factor `J_0(k R_tx sin th_ref)`.
pub fn ref_sign_compensation(
    k: f64,
    tx_radius: f64,
    mode: SignMode,
    ctx: &SignContext,
) -> Result<(f64, FlagSet), SignError> {
    let theta_ref = match reference_elevation(mode, ctx)? {
        None => return Ok((1.0, FlagSet::EMPTY)),
        Some(t) => t,
    };
    let prod = bessel_j(0, k * tx_radius * theta_ref.sin())?;
    Ok(split_sign(prod))
}

fn split_sign(prod: f64) -> (f64, FlagSet) {
    if prod.abs() < SIGN_EPS {
        let mut f = FlagSet::EMPTY;
        f.insert(Flag::SignIndeterminate);
        (1.0, f)
    } else if prod < 0.0 {
        (-1.0, FlagSet::EMPTY)
    } else {
        (1.0, FlagSet::EMPTY)
    }
}

/// Precomputed per-entry normalization factors for a fixed configuration.
/// The factor already folds together `i^{+l}` and the compensation sign, so
/// per-snapshot work reduces to a modulus division and two complex
/// multiplies per sample.
#[derive(Debug, Clone)]
pub struct SignPlan {
    u: usize,
    p: usize,
    /// Grid factor `i^{+l} sgn` per (mode, carrier) entry, row-major.
    pub grid_factor: Vec<C64>,
    /// Build-time flags per grid entry (sign indeterminacy).
    pub grid_flags: Vec<FlagSet>,
    /// Reference factor per carrier.
    pub ref_factor: Vec<C64>,
    /// Build-time flags per reference entry.
    pub ref_flags: Vec<FlagSet>,
    /// Elevation the signs were evaluated at, if any.
    pub reference_elevation_rad: Option<f64>,
}

impl SignPlan {
    /// Builds factors for every grid and reference entry.
    pub fn build(
        modes: &ModeSet,
        carriers: &CarrierGrid,
        tx_radius: f64,
        rx_radius: f64,
        mode: SignMode,
        ctx: &SignContext,
    ) -> Result<Self, SignError> {
        let u = modes.len();
        let p = carriers.len();
        let mut grid_factor = Vec::with_capacity(u * p);
        let mut grid_flags = Vec::with_capacity(u * p);
        for ui in 0..u {
            let l = modes.mode(ui);
            for pi in 0..p {
                let k = carriers.wavenumber(pi);
                let (s, f) = sign_compensation(l, k, tx_radius, rx_radius, mode, ctx)?;
                grid_factor.push(i_pow(l) * s);
                grid_flags.push(f);
            }
        }
        let mut ref_factor = Vec::with_capacity(p);
        let mut ref_flags = Vec::with_capacity(p);
        for pi in 0..p {
            let k = carriers.wavenumber(pi);
            let (s, f) = ref_sign_compensation(k, tx_radius, mode, ctx)?;
            ref_factor.push(C64::new(s, 0.0));
            ref_flags.push(f);
        }
        Ok(SignPlan {
            u,
            p,
            grid_factor,
            grid_flags,
            ref_factor,
            ref_flags,
            reference_elevation_rad: reference_elevation(mode, ctx)?,
        })
    }

    /// Number of mode rows the plan covers.
    pub fn num_modes(&self) -> usize {
        self.u
    }

    /// Number of subcarrier columns the plan covers.
    pub fn num_carriers(&self) -> usize {
        self.p
    }
}

/// Normalizes one sample given its precomputed unit factor and pilot.
/// Returns the unit-modulus phasor, the raw modulus, and any flag raised.
#[inline]
pub fn normalize_sample(x: C64, pilot: C64, factor: C64) -> (C64, f64, FlagSet) {
    // Plain sqrt instead of hypot: frame samples sit far from overflow
    // and denormal range, and this path runs once per sample.
    let a = (x.re * x.re + x.im * x.im).sqrt();
    if a < NULL_SAMPLE_EPS {
        let mut f = FlagSet::EMPTY;
        f.insert(Flag::NullSample);
        (C64::new(0.0, 0.0), a, f)
    } else {
        let inv = 1.0 / a;
        (x * inv * pilot.conj() * factor, a, FlagSet::EMPTY)
    }
}

/// Normalized mode-by-carrier grid.
#[derive(Debug, Clone)]
pub struct NormalizedGrid {
    /// Unit-modulus phasors, row-major by mode then carrier; null samples
    /// are zero.
    pub x: Vec<C64>,
    /// Raw sample moduli in the same layout.
    pub amp: Vec<f64>,
    /// Per-entry flags (null samples, sign indeterminacy).
    pub flags: Vec<FlagSet>,
    /// Number of mode rows.
    pub u: usize,
    /// Number of subcarrier columns.
    pub p: usize,
}

/// Normalized reference-element vector across carriers.
#[derive(Debug, Clone)]
pub struct RefVector {
    /// Unit-modulus phasors per carrier; null samples are zero.
    pub x: Vec<C64>,
    /// Raw sample moduli per carrier.
    pub amp: Vec<f64>,
    /// Per-entry flags.
    pub flags: Vec<FlagSet>,
}

/// Normalizes a full received grid (row-major mode by carrier) against a
/// pilot book and a prebuilt sign plan.
pub fn normalize_grid(received: &[C64], pilots: &PilotBook, plan: &SignPlan) -> NormalizedGrid {
    debug_assert_eq!(received.len(), plan.u * plan.p);
    debug_assert_eq!(pilots.num_modes(), plan.u);
    debug_assert_eq!(pilots.num_carriers(), plan.p);
    let mut x = Vec::with_capacity(received.len());
    let mut amp = Vec::with_capacity(received.len());
    let mut flags = Vec::with_capacity(received.len());
    for ui in 0..plan.u {
        for pi in 0..plan.p {
            let idx = ui * plan.p + pi;
            let (v, a, mut f) =
                normalize_sample(received[idx], pilots.symbol(ui, pi), plan.grid_factor[idx]);
            f.merge(plan.grid_flags[idx]);
            x.push(v);
            amp.push(a);
            flags.push(f);
        }
    }
    NormalizedGrid {
        x,
        amp,
        flags,
        u: plan.u,
        p: plan.p,
    }
}

/// Normalizes the reference-element samples against the mode-zero pilot row
/// and the plan's reference factors.
pub fn normalize_ref(samples: &[C64], zero_mode_pilots: &[C64], plan: &SignPlan) -> RefVector {
    debug_assert_eq!(samples.len(), plan.p);
    debug_assert_eq!(zero_mode_pilots.len(), plan.p);
    let mut x = Vec::with_capacity(samples.len());
    let mut amp = Vec::with_capacity(samples.len());
    let mut flags = Vec::with_capacity(samples.len());
    for pi in 0..plan.p {
        let (v, a, mut f) =
            normalize_sample(samples[pi], zero_mode_pilots[pi], plan.ref_factor[pi]);
        f.merge(plan.ref_flags[pi]);
        x.push(v);
        amp.push(a);
        flags.push(f);
    }
    RefVector { x, amp, flags }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::em::{cis, received_combined, ref_element_signal, RingRadii};
    use crate::geometry::MisalignmentPose;
    use rand::SeedableRng;

    const DEG: f64 = core::f64::consts::PI / 180.0;
    const RADIUS: f64 = 1.336_847_937_697_784_2;

    fn reference_ctx() -> SignContext {
        SignContext {
            true_elevation_rad: Some(7.0 * DEG),
            main_lobe_rad: (2.0 * DEG, 8.0 * DEG),
        }
    }

    fn grids() -> (ModeSet, CarrierGrid) {
        (
            ModeSet::centered(8).unwrap(),
            CarrierGrid::unit(47.0, 8).unwrap(),
        )
    }

    #[test]
    fn pilot_book_is_qpsk() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let book = PilotBook::generate(8, 8, &mut rng);
        let mut seen = [false; 4];
        for u in 0..8 {
            for p in 0..8 {
                let s = book.symbol(u, p);
                assert!((s.norm() - 1.0).abs() < 1e-15);
                let q = [
                    C64::new(1.0, 0.0),
                    C64::new(0.0, 1.0),
                    C64::new(-1.0, 0.0),
                    C64::new(0.0, -1.0),
                ]
                .iter()
                .position(|c| (s - c).norm() < 1e-15)
                .expect("symbol off the QPSK constellation");
                seen[q] = true;
            }
        }
        assert!(seen.iter().all(|&b| b), "64 draws missed a constellation point");
        assert_eq!(book.row(2).len(), 8);
        assert_eq!(book.row(2)[5], book.symbol(2, 5));
    }

    #[test]
    fn genie_grid_signs_match_reference() {
        let (modes, carriers) = grids();
        let ctx = reference_ctx();
        let want: [[f64; 8]; 8] = [
            [-1.0, -1.0, -1.0, -1.0, -1.0, -1.0, -1.0, 1.0],
            [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, -1.0],
            [-1.0, -1.0, -1.0, -1.0, -1.0, 1.0, 1.0, -1.0],
            [-1.0, -1.0, -1.0, -1.0, -1.0, -1.0, -1.0, 1.0],
            [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
            [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, -1.0],
            [-1.0, -1.0, -1.0, -1.0, -1.0, 1.0, 1.0, -1.0],
            [-1.0, -1.0, -1.0, -1.0, -1.0, -1.0, -1.0, 1.0],
        ];
        for (ui, row) in want.iter().enumerate() {
            for (pi, &w) in row.iter().enumerate() {
                let (s, f) = sign_compensation(
                    modes.mode(ui),
                    carriers.wavenumber(pi),
                    RADIUS,
                    RADIUS,
                    SignMode::Genie,
                    &ctx,
                )
                .unwrap();
                assert_eq!(s, w, "genie sign at mode row {ui}, carrier {pi}");
                assert!(f.is_empty());
            }
        }
    }

    #[test]
    fn prior_grid_signs_match_reference() {
        let (modes, carriers) = grids();
        let ctx = reference_ctx();
        let want: [[f64; 8]; 8] = [
            [-1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
            [1.0, -1.0, -1.0, -1.0, -1.0, -1.0, -1.0, -1.0],
            [1.0, -1.0, -1.0, -1.0, -1.0, -1.0, -1.0, -1.0],
            [-1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
            [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
            [1.0, -1.0, -1.0, -1.0, -1.0, -1.0, -1.0, -1.0],
            [1.0, -1.0, -1.0, -1.0, -1.0, -1.0, -1.0, -1.0],
            [-1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
        ];
        for (ui, row) in want.iter().enumerate() {
            for (pi, &w) in row.iter().enumerate() {
                let (s, _) = sign_compensation(
                    modes.mode(ui),
                    carriers.wavenumber(pi),
                    RADIUS,
                    RADIUS,
                    SignMode::PriorMidpoint,
                    &ctx,
                )
                .unwrap();
                assert_eq!(s, w, "prior sign at mode row {ui}, carrier {pi}");
            }
        }
    }

    #[test]
    fn ref_signs_match_reference() {
        let (_, carriers) = grids();
        let ctx = reference_ctx();
        let want = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, -1.0];
        for (pi, &w) in want.iter().enumerate() {
            let (s, f) = ref_sign_compensation(
                carriers.wavenumber(pi),
                RADIUS,
                SignMode::Genie,
                &ctx,
            )
            .unwrap();
            assert_eq!(s, w, "ref sign at carrier {pi}");
            assert!(f.is_empty());
        }
    }

    #[test]
    fn none_mode_is_identity() {
        let ctx = SignContext {
            true_elevation_rad: None,
            main_lobe_rad: (2.0 * DEG, 8.0 * DEG),
        };
        let (s, f) =
            sign_compensation(3, 54.0, RADIUS, RADIUS, SignMode::None, &ctx).unwrap();
        assert_eq!(s, 1.0);
        assert!(f.is_empty());
    }

    #[test]
    fn genie_without_truth_errors() {
        let ctx = SignContext {
            true_elevation_rad: None,
            main_lobe_rad: (2.0 * DEG, 8.0 * DEG),
        };
        assert_eq!(
            sign_compensation(1, 47.0, RADIUS, RADIUS, SignMode::Genie, &ctx).unwrap_err(),
            SignError::MissingTruth
        );
    }

    #[test]
    fn sign_indeterminate_on_vanishing_product() {
        // A zero transmit radius sends J_l(0) = 0 for l != 0.
        let ctx = reference_ctx();
        let (s, f) = sign_compensation(1, 47.0, 0.0, RADIUS, SignMode::Genie, &ctx).unwrap();
        assert_eq!(s, 1.0);
        assert!(f.contains(Flag::SignIndeterminate));
    }

    #[test]
    fn normalize_recovers_pure_link_phase() {
        // Noiseless closed-form samples, normalized with genie signs, must
        // collapse to exactly e^{i (k r + l gamma)} on the grid and
        // e^{i k xi} on the reference vector.
        let (modes, carriers) = grids();
        let ctx = reference_ctx();
        let pose = MisalignmentPose::new(40.0, 7.0 * DEG, 7.0 * DEG).unwrap();
        let radii = RingRadii { tx: RADIUS, rx: RADIUS };
        let plan =
            SignPlan::build(&modes, &carriers, RADIUS, RADIUS, SignMode::Genie, &ctx).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let book = PilotBook::generate(8, 8, &mut rng);
        let mut received = Vec::new();
        for ui in 0..8 {
            for pi in 0..8 {
                received.push(
                    received_combined(
                        &pose,
                        radii,
                        9,
                        modes.mode(ui),
                        carriers.wavenumber(pi),
                        book.symbol(ui, pi),
                    )
                    .unwrap(),
                );
            }
        }
        let grid = normalize_grid(&received, &book, &plan);
        let gamma = crate::geometry::gamma_from_aoa(pose.azimuth(), pose.elevation());
        for ui in 0..8 {
            for pi in 0..8 {
                let want = cis(carriers.wavenumber(pi) * pose.range()
                    + modes.mode(ui) as f64 * gamma);
                let got = grid.x[ui * 8 + pi];
                assert!(
                    (got - want).norm() < 1e-12,
                    "grid phase at mode row {ui}, carrier {pi}"
                );
                assert!(grid.flags[ui * 8 + pi].is_empty());
            }
        }
        let zero_row = modes.index_of_zero().unwrap();
        let ref_samples: Vec<C64> = (0..8)
            .map(|pi| {
                ref_element_signal(
                    &pose,
                    radii,
                    carriers.wavenumber(pi),
                    book.symbol(zero_row, pi),
                )
                .unwrap()
            })
            .collect();
        let refv = normalize_ref(&ref_samples, book.row(zero_row), &plan);
        let xi = crate::geometry::xi_from_pose(&pose, RADIUS);
        for pi in 0..8 {
            let want = cis(carriers.wavenumber(pi) * xi);
            assert!(
                (refv.x[pi] - want).norm() < 1e-12,
                "ref phase at carrier {pi}"
            );
        }
    }

    #[test]
    fn null_sample_flagged() {
        let (v, a, f) = normalize_sample(C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0));
        assert_eq!(v, C64::new(0.0, 0.0));
        assert_eq!(a, 0.0);
        assert!(f.contains(Flag::NullSample));
    }
}
