//! Mode-domain link capacity under pose misalignment and phase-only
//! receive steering.
//!
//! The element channel at the aligned pose (same range, zero offset
//! angles) is the exact spherical-wave sum, so the mode-domain matrix is
//! diagonal up to rounding. Misalignment is modeled as a per-element
//! phase screen on the receive ring, the same first-order path-length
//! offset the estimator inverts; steering applies the conjugate screen
//! built from an estimate, so steering with the true pose restores the
//! aligned channel exactly. Transmit power is normalized per carrier
//! against the aligned channel and held fixed across all variants.

use crate::config::RunSetup;
use crate::experiments::{run_trial, FrameSynth, TrialRecord};
use oam_aoa_core::em::cis;
use oam_aoa_core::geometry::{element_positions, LinkGeometry, MisalignmentPose, UcaLayout};
use oam_aoa_core::C64;
use rayon::prelude::*;

/// Dense row-major complex matrix, sized for mode-domain algebra.
#[derive(Debug, Clone)]
struct CMat {
    rows: usize,
    cols: usize,
    d: Vec<C64>,
}

impl CMat {
    fn zeros(rows: usize, cols: usize) -> Self {
        CMat {
            rows,
            cols,
            d: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> C64 {
        self.d[i * self.cols + j]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: C64) {
        self.d[i * self.cols + j] = v;
    }

    fn mul(&self, o: &CMat) -> CMat {
        assert_eq!(self.cols, o.rows);
        let mut out = CMat::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            for kk in 0..self.cols {
                let a = self.at(i, kk);
                for j in 0..o.cols {
                    let v = out.at(i, j) + a * o.at(kk, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    fn frobenius(&self) -> f64 {
        self.d.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// ln det of `I + s (H H^H)` via complex Cholesky. The argument is
/// Hermitian positive definite by construction, so the pivots stay real
/// and positive.
fn ln_det_i_plus_gram(h: &CMat, s: f64) -> f64 {
    let n = h.rows;
    let mut a = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut g = C64::new(0.0, 0.0);
            for kk in 0..h.cols {
                g += h.at(i, kk) * h.at(j, kk).conj();
            }
            let mut v = g * s;
            if i == j {
                v += C64::new(1.0, 0.0);
            }
            a.set(i, j, v);
        }
    }
    let mut l = CMat::zeros(n, n);
    let mut acc = 0.0;
    for j in 0..n {
        let mut diag = a.at(j, j).re;
        for kk in 0..j {
            diag -= l.at(j, kk).norm_sqr();
        }
        let d = diag.sqrt();
        l.set(j, j, C64::new(d, 0.0));
        acc += d.ln();
        for i in j + 1..n {
            let mut v = a.at(i, j);
            for kk in 0..j {
                v -= l.at(i, kk) * l.at(j, kk).conj();
            }
            l.set(i, j, v / d);
        }
    }
    2.0 * acc
}

/// Per-carrier pieces of the capacity model.
struct Carrier {
    /// Aligned element channel folded into the transmit mode weights,
    /// one receive element per row.
    b: CMat,
    /// Receive mode weights, one element per row.
    w_rx: CMat,
    /// Squared per-carrier power normalization from the aligned channel.
    c2: f64,
    /// True-pose phase screen on the receive elements.
    mis: Vec<f64>,
    /// Steering screen scale: wavenumber times receive ring radius.
    kr: f64,
}

impl Carrier {
    /// Mode-domain channel with a given receive phase screen applied.
    fn project(&self, screen: &[f64]) -> CMat {
        let u = self.w_rx.cols;
        let n_rx = self.w_rx.rows;
        let mut eff = CMat::zeros(u, u);
        for m in 0..n_rx {
            let ph = cis(screen[m]);
            for a in 0..u {
                let wa = self.w_rx.at(m, a).conj() * ph;
                for bcol in 0..u {
                    let v = eff.at(a, bcol) + wa * self.b.at(m, bcol);
                    eff.set(a, bcol, v);
                }
            }
        }
        eff
    }
}

/// Deterministic part of the capacity experiment for one configuration.
pub struct CapacityModel {
    carriers: Vec<Carrier>,
    u: usize,
    n_rx: usize,
    rx_azimuths: Vec<f64>,
    true_phi: f64,
    true_theta: f64,
}

impl CapacityModel {
    pub fn new(setup: &RunSetup) -> Result<Self, String> {
        let u = setup.modes.len();
        let n_tx = setup.config.tx_elements;
        let n_rx = setup.config.rx_elements;
        let aligned_pose = MisalignmentPose::new(setup.pose.range(), 0.0, 0.0)
            .map_err(|e| format!("capacity model: {e}"))?;
        let link = LinkGeometry {
            tx: UcaLayout::new(n_tx, setup.radii.tx).map_err(|e| format!("capacity model: {e}"))?,
            rx: UcaLayout::new(n_rx, setup.radii.rx).map_err(|e| format!("capacity model: {e}"))?,
            pose: aligned_pose,
        };
        let pos = element_positions(&link);
        let rx_azimuths: Vec<f64> = (0..n_rx).map(|m| link.rx.element_azimuth(m)).collect();
        // Mode weights: transmit columns wind forward, receive columns
        // wind backward, matching the mirrored frame the facing transmit
        // array presents to the receiver.
        let mut w_tx = CMat::zeros(n_tx, u);
        for n in 0..n_tx {
            let az = link.tx.element_azimuth(n);
            for b in 0..u {
                let l = setup.modes.mode(b) as f64;
                w_tx.set(n, b, cis(l * az) / (n_tx as f64).sqrt());
            }
        }
        let mut w_rx = CMat::zeros(n_rx, u);
        for m in 0..n_rx {
            for a in 0..u {
                let l = setup.modes.mode(a) as f64;
                w_rx.set(m, a, cis(-l * rx_azimuths[m]) / (n_rx as f64).sqrt());
            }
        }
        let st = setup.pose.elevation().sin();
        let phi = setup.pose.azimuth();
        let mut carriers = Vec::with_capacity(setup.carriers.len());
        for p in 0..setup.carriers.len() {
            let k = setup.carriers.wavenumber(p);
            let mut h = CMat::zeros(n_rx, n_tx);
            for m in 0..n_rx {
                for n in 0..n_tx {
                    let d = pos.distance(m, n);
                    h.set(m, n, cis(k * d) / d);
                }
            }
            let b = h.mul(&w_tx);
            let kr = k * setup.radii.rx;
            let mis: Vec<f64> = rx_azimuths
                .iter()
                .map(|&az| kr * st * (phi - az).cos())
                .collect();
            let carrier = Carrier {
                b,
                w_rx: w_rx.clone(),
                c2: 0.0,
                mis,
                kr,
            };
            let aligned = carrier.project(&vec![0.0; n_rx]);
            let f2 = aligned.frobenius().powi(2);
            carriers.push(Carrier {
                c2: u as f64 / f2,
                ..carrier
            });
        }
        Ok(CapacityModel {
            carriers,
            u,
            n_rx,
            rx_azimuths,
            true_phi: setup.pose.azimuth(),
            true_theta: setup.pose.elevation(),
        })
    }

    fn mean_capacity(&self, rho: f64, screen_of: impl Fn(&Carrier) -> Vec<f64>) -> f64 {
        let mut total = 0.0;
        for carrier in &self.carriers {
            let eff = carrier.project(&screen_of(carrier));
            let s = rho / self.u as f64 * carrier.c2;
            total += ln_det_i_plus_gram(&eff, s) / core::f64::consts::LN_2;
        }
        total / self.carriers.len() as f64
    }

    /// Capacity of the aligned link in bits per channel use.
    pub fn aligned(&self, rho: f64) -> f64 {
        let n = self.n_rx;
        self.mean_capacity(rho, |_| vec![0.0; n])
    }

    /// Capacity under the true-pose phase screen, no correction.
    pub fn misaligned(&self, rho: f64) -> f64 {
        self.mean_capacity(rho, |c| c.mis.clone())
    }

    /// Capacity with the conjugate screen for an estimated pose applied
    /// at the receiver. A zero-angle estimate leaves the misaligned
    /// channel untouched.
    pub fn steered(&self, rho: f64, phi_rad: f64, theta_rad: f64) -> f64 {
        let st = theta_rad.sin();
        self.mean_capacity(rho, |c| {
            self.rx_azimuths
                .iter()
                .zip(&c.mis)
                .map(|(&az, &mis)| mis - c.kr * st * (phi_rad - az).cos())
                .collect()
        })
    }

    /// Steering from the true pose, which cancels the screen exactly.
    pub fn steered_true(&self, rho: f64) -> f64 {
        self.steered(rho, self.true_phi, self.true_theta)
    }
}

/// One row of the capacity sweep.
#[derive(Debug, Clone)]
pub struct CapacityPoint {
    pub snr_db: f64,
    pub cap_aligned: f64,
    pub cap_misaligned: f64,
    pub cap_steered_est: f64,
    pub cap_steered_true: f64,
    /// Per-trial steered capacities behind `cap_steered_est`, kept so
    /// consumers can judge the Monte Carlo error of the mean.
    pub steered_trials: Vec<f64>,
    /// Estimation trials whose reports were flagged unusable; those
    /// trials fall back to the uncorrected channel.
    pub flagged: u32,
    pub trials: u32,
}

/// Runs the capacity sweep: deterministic variants per SNR, plus a
/// Monte Carlo average of steering from per-trial pose estimates.
pub fn capacity_sweep(setup: &RunSetup) -> Result<Vec<CapacityPoint>, String> {
    let model = CapacityModel::new(setup)?;
    let synth = FrameSynth::new(setup)?;
    let snrs = &setup.config.snr_list_db;
    let trials = setup.config.capacity_trials;
    let tasks: Vec<(u32, u32)> = (0..snrs.len() as u32)
        .flat_map(|si| (0..trials).map(move |t| (si, t)))
        .collect();
    // Each task yields the steered capacity for one estimate, or the
    // misaligned value when the estimate is unusable.
    let per_trial: Vec<(f64, bool)> = tasks
        .par_iter()
        .map(|&(si, t)| {
            let snr = snrs[si as usize];
            let rho = 10f64.powf(snr / 10.0);
            let report = run_trial(setup, &synth, snr, si, t)?;
            let record = TrialRecord::from_report(snr, t, &report);
            let usable = !record.excluded
                && report.phi_rad.is_some()
                && report.theta_rad.is_some();
            let cap = if usable {
                model.steered(rho, report.phi_rad.unwrap(), report.theta_rad.unwrap())
            } else {
                model.misaligned(rho)
            };
            Ok((cap, !usable))
        })
        .collect::<Result<_, String>>()?;
    let mut points = Vec::with_capacity(snrs.len());
    for (si, &snr) in snrs.iter().enumerate() {
        let rho = 10f64.powf(snr / 10.0);
        let chunk = &per_trial[si * trials as usize..(si + 1) * trials as usize];
        let steered_trials: Vec<f64> = chunk.iter().map(|&(c, _)| c).collect();
        let cap_steered_est = steered_trials.iter().sum::<f64>() / trials as f64;
        let flagged = chunk.iter().filter(|&&(_, f)| f).count() as u32;
        points.push(CapacityPoint {
            snr_db: snr,
            cap_aligned: model.aligned(rho),
            cap_misaligned: model.misaligned(rho),
            cap_steered_est,
            cap_steered_true: model.steered_true(rho),
            steered_trials,
            flagged,
            trials,
        });
    }
    Ok(points)
}
