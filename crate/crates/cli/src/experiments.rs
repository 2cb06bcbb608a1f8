//! Experiment drivers: synthesize frames under the configured channel,
//! run seeded estimation trials, and aggregate sweep statistics. All
//! Monte Carlo work is parallelized over (sweep point, trial) tasks with
//! per-task random streams and merged in task order, so thread count
//! never changes a single output byte.

use crate::config::{ChannelChoice, RunSetup};
use oam_aoa_core::em::{
    add_awgn, field_exact_element, received_combined, ref_element_signal,
};
use oam_aoa_core::estimator::{EstimateReport, MfMtAccumulator};
use oam_aoa_core::geometry::{element_positions, LinkGeometry, UcaLayout};
use oam_aoa_core::pilot::PilotBook;
use oam_aoa_core::rng::trial_rng;
use oam_aoa_core::{C64, FlagSet};
use rayon::prelude::*;

const DEG: f64 = std::f64::consts::PI / 180.0;

/// Noiseless per-entry channel values for the configured pose, evaluated
/// once and reused across every snapshot and trial.
#[derive(Debug, Clone)]
pub struct FrameSynth {
    grid_base: Vec<C64>,
    ref_base: Vec<C64>,
    u: usize,
    p: usize,
    zero_row: usize,
}

impl FrameSynth {
    pub fn new(setup: &RunSetup) -> Result<Self, String> {
        let u = setup.modes.len();
        let p = setup.carriers.len();
        let zero_row = setup
            .modes
            .index_of_zero()
            .ok_or_else(|| "mode set must contain mode zero".to_string())?;
        let one = C64::new(1.0, 0.0);
        let mut grid_base = Vec::with_capacity(u * p);
        let mut ref_base = Vec::with_capacity(p);
        match setup.config.channel {
            ChannelChoice::Approx => {
                for ui in 0..u {
                    for pi in 0..p {
                        grid_base.push(
                            received_combined(
                                &setup.pose,
                                setup.radii,
                                setup.config.rx_elements,
                                setup.modes.mode(ui),
                                setup.carriers.wavenumber(pi),
                                one,
                            )
                            .map_err(|e| format!("channel synthesis: {e}"))?,
                        );
                    }
                }
                for pi in 0..p {
                    ref_base.push(
                        ref_element_signal(
                            &setup.pose,
                            setup.radii,
                            setup.carriers.wavenumber(pi),
                            one,
                        )
                        .map_err(|e| format!("channel synthesis: {e}"))?,
                    );
                }
            }
            ChannelChoice::Exact => {
                let link = LinkGeometry {
                    tx: UcaLayout::new(setup.config.tx_elements, setup.radii.tx)
                        .map_err(|e| format!("channel synthesis: {e}"))?,
                    rx: UcaLayout::new(setup.config.rx_elements, setup.radii.rx)
                        .map_err(|e| format!("channel synthesis: {e}"))?,
                    pose: setup.pose,
                };
                let pos = element_positions(&link);
                for ui in 0..u {
                    for pi in 0..p {
                        let field = field_exact_element(
                            &pos,
                            setup.modes.mode(ui),
                            setup.carriers.wavenumber(pi),
                            one,
                        );
                        grid_base.push(field.into_iter().sum());
                    }
                }
                for pi in 0..p {
                    let field =
                        field_exact_element(&pos, 0, setup.carriers.wavenumber(pi), one);
                    ref_base.push(field[0]);
                }
            }
        }
        Ok(FrameSynth {
            grid_base,
            ref_base,
            u,
            p,
            zero_row,
        })
    }

    /// Writes one noiseless frame for the given pilot book into the
    /// caller's buffers.
    pub fn fill(&self, book: &PilotBook, grid: &mut [C64], reference: &mut [C64]) {
        debug_assert_eq!(grid.len(), self.u * self.p);
        debug_assert_eq!(reference.len(), self.p);
        for ui in 0..self.u {
            for pi in 0..self.p {
                let idx = ui * self.p + pi;
                grid[idx] = self.grid_base[idx] * book.symbol(ui, pi);
            }
        }
        for pi in 0..self.p {
            reference[pi] = self.ref_base[pi] * book.symbol(self.zero_row, pi);
        }
    }
}

/// Runs one seeded estimation trial: accumulate the configured number of
/// noisy snapshots and close the fit. Noiseless runs use one snapshot;
/// further copies of an identical frame would change nothing.
pub fn run_trial(
    setup: &RunSetup,
    synth: &FrameSynth,
    snr_db: f64,
    sweep_index: u32,
    trial: u32,
) -> Result<EstimateReport, String> {
    let mut rng = trial_rng(setup.config.seed, sweep_index, trial);
    let mut acc = MfMtAccumulator::new(
        &setup.modes,
        &setup.carriers,
        setup.radii,
        setup.config.sign_mode.to_core(),
        &setup.sign_ctx,
        setup.estimator,
    )
    .map_err(|e| format!("estimator setup: {e}"))?;
    let up = synth.u * synth.p;
    let snapshots = if snr_db == f64::INFINITY {
        1
    } else {
        setup.config.snapshots
    };
    let mut buf = vec![C64::new(0.0, 0.0); up + synth.p];
    for _ in 0..snapshots {
        let book = PilotBook::generate(synth.u, synth.p, &mut rng);
        let (grid, reference) = buf.split_at_mut(up);
        synth.fill(&book, grid, reference);
        // One noise level across the whole frame: every sample shares the
        // receiver noise floor set by the frame's mean power.
        add_awgn(&mut buf, snr_db, &mut rng).map_err(|e| format!("noise: {e}"))?;
        let (grid, reference) = buf.split_at(up);
        acc.push_raw(grid, reference, &book)
            .map_err(|e| format!("accumulate: {e}"))?;
    }
    Ok(acc.finish())
}

/// One trial's outcome, flattened for records output and aggregation.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub snr_db: f64,
    pub trial: u32,
    pub phi_deg: Option<f64>,
    pub theta_deg: Option<f64>,
    pub r_wrapped: Option<f64>,
    pub gamma: Option<f64>,
    pub xi_wrapped: Option<f64>,
    pub delta_m: Option<f64>,
    pub flags: FlagSet,
    pub excluded: bool,
}

impl TrialRecord {
    pub fn from_report(snr_db: f64, trial: u32, report: &EstimateReport) -> Self {
        TrialRecord {
            snr_db,
            trial,
            phi_deg: report.phi_rad.map(|v| v / DEG),
            theta_deg: report.theta_rad.map(|v| v / DEG),
            r_wrapped: report.r_wrapped,
            gamma: report.gamma,
            xi_wrapped: report.xi_wrapped,
            delta_m: report.delta_m,
            flags: report.flags,
            excluded: report.is_excluded(),
        }
    }
}

/// Aggregated sweep point. NMSE is the mean of squared relative errors
/// over the trials that produced usable estimates.
#[derive(Debug, Clone, Copy)]
pub struct SweepPoint {
    pub snr_db: f64,
    pub nmse_phi: f64,
    pub nmse_theta: f64,
    pub trials: u32,
    pub flagged_fraction: f64,
}

/// Recomputes a sweep point from its records; emission uses this same
/// function, so the CSV always equals what the records imply.
pub fn aggregate_point(
    snr_db: f64,
    records: &[TrialRecord],
    true_phi_deg: f64,
    true_theta_deg: f64,
) -> SweepPoint {
    let mut n_used = 0u32;
    let mut sum_phi = 0.0;
    let mut sum_theta = 0.0;
    let mut flagged = 0u32;
    for rec in records {
        if rec.excluded {
            flagged += 1;
            continue;
        }
        let (Some(phi), Some(theta)) = (rec.phi_deg, rec.theta_deg) else {
            flagged += 1;
            continue;
        };
        let ep = (phi - true_phi_deg) / true_phi_deg;
        let et = (theta - true_theta_deg) / true_theta_deg;
        sum_phi += ep * ep;
        sum_theta += et * et;
        n_used += 1;
    }
    let trials = records.len() as u32;
    SweepPoint {
        snr_db,
        nmse_phi: if n_used > 0 {
            sum_phi / n_used as f64
        } else {
            f64::NAN
        },
        nmse_theta: if n_used > 0 {
            sum_theta / n_used as f64
        } else {
            f64::NAN
        },
        trials,
        flagged_fraction: flagged as f64 / trials.max(1) as f64,
    }
}

/// Full sweep output: aggregated points plus every per-trial record in
/// (sweep point, trial) order.
#[derive(Debug, Clone)]
pub struct NmseSweep {
    pub points: Vec<SweepPoint>,
    pub records: Vec<TrialRecord>,
}

/// Runs the NMSE sweep over the configured SNR list.
pub fn nmse_sweep(setup: &RunSetup) -> Result<NmseSweep, String> {
    let synth = FrameSynth::new(setup)?;
    let snrs = &setup.config.snr_list_db;
    let trials = setup.config.trials;
    let tasks: Vec<(u32, u32)> = (0..snrs.len() as u32)
        .flat_map(|si| (0..trials).map(move |t| (si, t)))
        .collect();
    let records: Vec<TrialRecord> = tasks
        .par_iter()
        .map(|&(si, t)| {
            let snr = snrs[si as usize];
            run_trial(setup, &synth, snr, si, t)
                .map(|r| TrialRecord::from_report(snr, t, &r))
        })
        .collect::<Result<_, _>>()?;
    let points = snrs
        .iter()
        .enumerate()
        .map(|(si, &snr)| {
            let chunk = &records[si * trials as usize..(si + 1) * trials as usize];
            aggregate_point(
                snr,
                chunk,
                setup.config.azimuth_deg,
                setup.config.elevation_deg,
            )
        })
        .collect();
    Ok(NmseSweep { points, records })
}

/// Single-shot estimation at one SNR (infinity for noiseless).
pub fn estimate_once(setup: &RunSetup, snr_db: f64) -> Result<(EstimateReport, TrialRecord), String> {
    let synth = FrameSynth::new(setup)?;
    let report = run_trial(setup, &synth, snr_db, 0, 0)?;
    let record = TrialRecord::from_report(snr_db, 0, &report);
    Ok((report, record))
}

/// Measured operation counts for one axis size of the scaling sweep.
#[derive(Debug, Clone)]
pub struct ScalingRow {
    pub axis: &'static str,
    pub size: usize,
    pub r_cmacs: u64,
    pub gamma_cmacs: u64,
    pub xi_cmacs: u64,
    pub snapshots: u32,
}

/// Measures per-stage complex multiply-accumulate counts while the mode
/// count and the carrier count grow separately. Counts come from the
/// estimator's own counters, not from formulas. Frames are clean: on
/// noisy frames the cost of rows that are pure noise is set by the
/// iteration cap rather than by the problem size, which would measure
/// the cap instead of the algorithm.
pub fn scaling_table(setup: &RunSetup) -> Result<Vec<ScalingRow>, String> {
    const SNR_DB: f64 = f64::INFINITY;
    let snapshots = setup.config.snapshots;
    let mut rows = Vec::new();
    for (axis, vary_modes) in [("modes", true), ("carriers", false)] {
        for (i, &size) in setup.config.scaling_sizes.iter().enumerate() {
            let mut cfg = setup.config.clone();
            if vary_modes {
                cfg.modes = size;
            } else {
                cfg.subcarriers = size;
            }
            let sized = cfg.resolve()?;
            let synth = FrameSynth::new(&sized)?;
            let mut rng = trial_rng(sized.config.seed, 1000 + i as u32, 0);
            let mut acc = MfMtAccumulator::new(
                &sized.modes,
                &sized.carriers,
                sized.radii,
                sized.config.sign_mode.to_core(),
                &sized.sign_ctx,
                sized.estimator,
            )
            .map_err(|e| format!("estimator setup: {e}"))?;
            let u = sized.modes.len();
            let p = sized.carriers.len();
            let mut buf = vec![C64::new(0.0, 0.0); u * p + p];
            for _ in 0..snapshots {
                let book = PilotBook::generate(u, p, &mut rng);
                let (grid, reference) = buf.split_at_mut(u * p);
                synth.fill(&book, grid, reference);
                add_awgn(&mut buf, SNR_DB, &mut rng).map_err(|e| format!("noise: {e}"))?;
                let (grid, reference) = buf.split_at(u * p);
                acc.push_raw(grid, reference, &book)
                    .map_err(|e| format!("accumulate: {e}"))?;
            }
            acc.finish();
            let (r_cmacs, gamma_cmacs, xi_cmacs) = acc.op_counts();
            rows.push(ScalingRow {
                axis,
                size,
                r_cmacs,
                gamma_cmacs,
                xi_cmacs,
                snapshots,
            });
        }
    }
    Ok(rows)
}

/// Least-squares slope of ln(count) against ln(size).
pub fn log_log_slope(points: &[(usize, u64)]) -> f64 {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(size, count) in points {
        let x = (size as f64).ln();
        let y = (count as f64).ln();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}
