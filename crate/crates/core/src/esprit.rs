//! Single-tone shift-invariance estimation from sample covariances.
//!
//! The signal model is a uniform phase progression x_i = a e^{i omega i}
//! observed over one axis of the measurement grid, possibly across many
//! snapshots with independent noise. The frequency omega is read off the
//! principal eigenvector q of the sample covariance: because the signal
//! subspace is shift-invariant, the leading and trailing subvectors of q
//! differ by the rotation e^{i omega}, recovered as the argument of the
//! correlation between them.
//!
//! The covariance convention is `R[i][j] = mean over snapshots of
//! x_i conj(x_j)`, under which a pure tone yields a positive rotation
//! `+omega`; flipping the conjugation would silently negate every
//! estimate downstream.
//!
//! Eigenpairs come from power iteration with a deflated probe of the
//! second eigenvalue. The probe serves two purposes: flagging a
//! (near-)degenerate spectrum, and supplying the eigengap that downstream
//! fusion uses to weight this fit against others.

use crate::flags::{Flag, FlagSet};
use crate::C64;
use alloc::vec;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;

/// Structural failure of a covariance fit. Data-quality conditions that a
/// caller can fuse around are reported as [`Flag`]s instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EspritError {
    /// The axis needs at least two entries to carry a phase difference.
    TooShort,
    /// A snapshot's length did not match the set's dimension.
    LengthMismatch,
    /// No snapshots were accumulated.
    NoSnapshots,
    /// The covariance is identically zero.
    ZeroMatrix,
    /// Power iteration lost the iterate twice; the matrix maps every
    /// probe direction to zero within floating-point range.
    IterationBreakdown,
    /// A subvector of the eigenvector has no energy, leaving the
    /// invariance rotation undefined.
    ZeroSubvector,
    /// Smoothing window must satisfy 2 <= window <= dimension.
    BadWindow,
}

impl core::fmt::Display for EspritError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let msg = match self {
            EspritError::TooShort => "axis must have at least two entries",
            EspritError::LengthMismatch => "snapshot length does not match the set dimension",
            EspritError::NoSnapshots => "no snapshots accumulated",
            EspritError::ZeroMatrix => "covariance is identically zero",
            EspritError::IterationBreakdown => "power iteration lost the iterate",
            EspritError::ZeroSubvector => "eigenvector subvector has no energy",
            EspritError::BadWindow => "smoothing window out of range",
        };
        write!(f, "{msg}")
    }
}

#[cfg(feature = "std")]
impl std::error::Error for EspritError {}

/// Running count of complex multiply-accumulate operations, threaded
/// through the numeric kernels so experiments can report work done.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounter {
    /// Complex multiply-accumulates performed so far.
    pub cmacs: u64,
}

impl OpCounter {
    /// Fresh zeroed counter.
    pub fn new() -> Self {
        OpCounter { cmacs: 0 }
    }

    /// Records `n` complex multiply-accumulates.
    #[inline]
    pub fn add(&mut self, n: u64) {
        self.cmacs += n;
    }
}

/// Number of entries in a packed upper triangle of an `l` by `l` matrix.
pub const fn tri_len(l: usize) -> usize {
    l * (l + 1) / 2
}

/// Index of entry (i, j), i <= j, in a packed upper triangle.
#[inline]
pub const fn tri_index(l: usize, i: usize, j: usize) -> usize {
    i * l - i * (i + 1) / 2 + j
}

/// Adds the outer product v v^H of one snapshot into a packed upper
/// triangle. The caller owns op accounting: one call costs
/// [`tri_len`]`(v.len())` complex multiply-accumulates.
#[inline]
pub fn accumulate_outer_upper(tri: &mut [C64], v: &[C64]) {
    let l = v.len();
    debug_assert_eq!(tri.len(), tri_len(l));
    let mut idx = 0;
    for i in 0..l {
        let vi = v[i];
        for j in i..l {
            tri[idx] += vi * v[j].conj();
            idx += 1;
        }
    }
}

/// Snapshots of one grid axis, all of the same dimension.
#[derive(Debug, Clone)]
pub struct SnapshotSet {
    dim: usize,
    data: Vec<C64>,
}

impl SnapshotSet {
    /// Empty set for vectors of length `dim` (at least 2).
    pub fn new(dim: usize) -> Result<Self, EspritError> {
        if dim < 2 {
            return Err(EspritError::TooShort);
        }
        Ok(SnapshotSet {
            dim,
            data: Vec::new(),
        })
    }

    /// Appends one snapshot.
    pub fn push(&mut self, snap: &[C64]) -> Result<(), EspritError> {
        if snap.len() != self.dim {
            return Err(EspritError::LengthMismatch);
        }
        self.data.extend_from_slice(snap);
        Ok(())
    }

    /// Vector dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of snapshots held.
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    /// True when no snapshots are held.
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Snapshot `s` as a slice.
    pub fn snapshot(&self, s: usize) -> &[C64] {
        &self.data[s * self.dim..(s + 1) * self.dim]
    }
}

/// Hermitian matrix in full row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianCov {
    dim: usize,
    m: Vec<C64>,
}

impl HermitianCov {
    /// Matrix dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Entry (i, j).
    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.m[i * self.dim + j]
    }

    /// Identity matrix.
    pub fn identity(dim: usize) -> Self {
        let mut m = vec![C64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            m[i * dim + i] = C64::new(1.0, 0.0);
        }
        HermitianCov { dim, m }
    }

    /// Builds from a generator queried on the upper triangle (i <= j); the
    /// lower triangle is mirrored conjugate.
    pub fn from_entries(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = vec![C64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                m[i * dim + j] = v;
                m[j * dim + i] = v.conj();
            }
        }
        HermitianCov { dim, m }
    }

    /// Builds the contiguous principal submatrix [start, start+len) of an
    /// `l`-dimensional accumulation stored as a packed upper-triangle sum,
    /// dividing by `count` snapshots. Masking entries after accumulation is
    /// exact because restriction commutes with averaging outer products.
    pub fn from_upper_triangle_sum(
        tri: &[C64],
        l: usize,
        count: f64,
        start: usize,
        len: usize,
    ) -> Self {
        debug_assert!(start + len <= l);
        debug_assert!(count > 0.0);
        let inv = 1.0 / count;
        HermitianCov::from_entries(len, |i, j| {
            tri[tri_index(l, start + i, start + j)] * inv
        })
    }

    /// Contiguous principal submatrix [start, start+len).
    pub fn contiguous_submatrix(&self, start: usize, len: usize) -> Self {
        debug_assert!(start + len <= self.dim);
        HermitianCov::from_entries(len, |i, j| self.entry(start + i, start + j))
    }

    /// Forward smoothing: the average of all contiguous principal
    /// submatrices of size `window`. Equivalent to averaging the
    /// covariances of sliding subvectors of every snapshot.
    pub fn smoothed(&self, window: usize) -> Result<Self, EspritError> {
        if window < 2 || window > self.dim {
            return Err(EspritError::BadWindow);
        }
        let shifts = self.dim - window + 1;
        let inv = 1.0 / shifts as f64;
        Ok(HermitianCov::from_entries(window, |i, j| {
            let mut acc = C64::new(0.0, 0.0);
            for w in 0..shifts {
                acc += self.entry(w + i, w + j);
            }
            acc * inv
        }))
    }

    /// Largest entry magnitude, for zero-matrix detection.
    fn max_abs(&self) -> f64 {
        self.m.iter().fold(0.0, |a, v| a.max(v.norm()))
    }

    /// out = M v. Costs dim^2 complex multiply-accumulates.
    fn matvec(&self, v: &[C64], out: &mut [C64], counter: &mut OpCounter) {
        let d = self.dim;
        for i in 0..d {
            let row = &self.m[i * d..(i + 1) * d];
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..d {
                acc += row[j] * v[j];
            }
            out[i] = acc;
        }
        counter.add((d * d) as u64);
    }
}

/// Sample covariance `R[i][j] = mean_s x_i conj(x_j)` of a snapshot set.
pub fn sample_covariance(
    set: &SnapshotSet,
    counter: &mut OpCounter,
) -> Result<HermitianCov, EspritError> {
    let s = set.len();
    if s == 0 {
        return Err(EspritError::NoSnapshots);
    }
    let l = set.dim();
    let mut tri = vec![C64::new(0.0, 0.0); tri_len(l)];
    for si in 0..s {
        accumulate_outer_upper(&mut tri, set.snapshot(si));
    }
    counter.add((s * tri_len(l)) as u64);
    Ok(HermitianCov::from_upper_triangle_sum(
        &tri, l, s as f64, 0, l,
    ))
}

/// Principal eigenpair of a Hermitian positive semidefinite matrix, plus a
/// probe of the second eigenvalue.
#[derive(Debug, Clone)]
pub struct PrincipalPair {
    /// Largest eigenvalue.
    pub lambda: f64,
    /// Probe of the second eigenvalue (a lower-accuracy estimate; it feeds
    /// gap detection and fusion weights, not the eigenvector itself).
    pub lambda2: f64,
    /// Unit-norm principal eigenvector.
    pub q: Vec<C64>,
    /// Power iterations spent.
    pub iters: usize,
    /// NoConvergence and/or DegenerateSpectrum conditions.
    pub flags: FlagSet,
}

/// Deterministic non-symmetric probe direction, used to reseed a lost
/// iterate and to start the second-eigenvalue probe.
fn skew_probe(dim: usize, salt: usize) -> Vec<C64> {
    (0..dim)
        .map(|i| {
            let t = 0.7 * (i + 1) as f64 + 0.31 * (salt + 1) as f64;
            let (s, c) = t.sin_cos();
            C64::new(c, s)
        })
        .collect()
}

fn norm_of(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Power iteration for the principal eigenpair.
///
/// Starts from the normalized all-ones vector; if the iterate maps to zero
/// (start orthogonal to the range) it reseeds once from a fixed skew
/// probe. Convergence is declared when the residual `||Mq - lambda q||`
/// drops below `tol * lambda`; running out of iterations raises
/// [`Flag::NoConvergence`] on the result rather than an error. A second
/// deflated probe estimates lambda_2, and a gap below `tol * lambda`
/// raises [`Flag::DegenerateSpectrum`].
pub fn principal_eigenvector(
    cov: &HermitianCov,
    tol: f64,
    max_iter: usize,
    counter: &mut OpCounter,
) -> Result<PrincipalPair, EspritError> {
    let d = cov.dim();
    if cov.max_abs() == 0.0 {
        return Err(EspritError::ZeroMatrix);
    }
    let mut q: Vec<C64> = vec![C64::new(1.0 / (d as f64).sqrt(), 0.0); d];
    let mut y = vec![C64::new(0.0, 0.0); d];
    let mut lambda = 0.0_f64;
    let mut iters = 0;
    let mut flags = FlagSet::EMPTY;
    let mut reseeds = 0;
    let mut converged = false;
    while iters < max_iter {
        cov.matvec(&q, &mut y, counter);
        iters += 1;
        let yn = norm_of(&y);
        if yn < 1e-300 {
            if reseeds >= 2 {
                return Err(EspritError::IterationBreakdown);
            }
            q = skew_probe(d, reseeds);
            let n = norm_of(&q);
            for z in q.iter_mut() {
                *z /= n;
            }
            reseeds += 1;
            continue;
        }
        lambda = q
            .iter()
            .zip(y.iter())
            .map(|(a, b)| (a.conj() * b).re)
            .sum::<f64>();
        counter.add(d as u64);
        let mut resid = 0.0_f64;
        for i in 0..d {
            resid += (y[i] - q[i] * lambda).norm_sqr();
        }
        let resid = resid.sqrt();
        if resid <= tol * lambda.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
        for i in 0..d {
            q[i] = y[i] / yn;
        }
    }
    if !converged {
        flags.insert(Flag::NoConvergence);
    }
    let lambda2 = second_eigenvalue_probe(cov, &q, counter).min(lambda);
    if lambda - lambda2 < tol * lambda.abs() {
        flags.insert(Flag::DegenerateSpectrum);
    }
    Ok(PrincipalPair {
        lambda,
        lambda2,
        q,
        iters,
        flags,
    })
}

/// Fixed-budget deflated power probe of the second eigenvalue: iterate in
/// the orthogonal complement of q and return the Rayleigh quotient.
fn second_eigenvalue_probe(cov: &HermitianCov, q: &[C64], counter: &mut OpCounter) -> f64 {
    let d = cov.dim();
    if d < 2 {
        return 0.0;
    }
    let mut v = Vec::new();
    for salt in 0..3 {
        v = skew_probe(d, salt);
        project_out(&mut v, q, counter);
        let n = norm_of(&v);
        if n > 1e-12 {
            for z in v.iter_mut() {
                *z /= n;
            }
            break;
        }
        v.clear();
    }
    if v.is_empty() {
        return 0.0;
    }
    let mut y = vec![C64::new(0.0, 0.0); d];
    for _ in 0..50 {
        cov.matvec(&v, &mut y, counter);
        project_out(&mut y, q, counter);
        let n = norm_of(&y);
        if n < 1e-300 {
            return 0.0;
        }
        for i in 0..d {
            v[i] = y[i] / n;
        }
    }
    cov.matvec(&v, &mut y, counter);
    let r = v
        .iter()
        .zip(y.iter())
        .map(|(a, b)| (a.conj() * b).re)
        .sum::<f64>();
    counter.add(d as u64);
    r.max(0.0)
}

/// v -= q (q^H v), assuming unit-norm q.
fn project_out(v: &mut [C64], q: &[C64], counter: &mut OpCounter) {
    let dot: C64 = q
        .iter()
        .zip(v.iter())
        .map(|(a, b)| a.conj() * b)
        .sum();
    for i in 0..v.len() {
        v[i] -= q[i] * dot;
    }
    counter.add(2 * v.len() as u64);
}

/// Shift-invariance rotation of a unit eigenvector: the argument of the
/// correlation between its leading and trailing subvectors.
pub fn invariance_phase(q: &[C64], counter: &mut OpCounter) -> Result<f64, EspritError> {
    let l = q.len();
    if l < 2 {
        return Err(EspritError::TooShort);
    }
    let lead = &q[..l - 1];
    let trail = &q[1..];
    if norm_of(lead) < 1e-14 || norm_of(trail) < 1e-14 {
        return Err(EspritError::ZeroSubvector);
    }
    let z: C64 = lead
        .iter()
        .zip(trail.iter())
        .map(|(a, b)| a.conj() * b)
        .sum();
    counter.add((l - 1) as u64);
    if z.norm() < 1e-300 {
        return Err(EspritError::ZeroSubvector);
    }
    Ok(z.arg())
}

/// One fitted tone: the rotation plus the spectral evidence behind it.
#[derive(Debug, Clone)]
pub struct ToneFit {
    /// Estimated rotation per index step, in radians, wrapped to (-pi, pi].
    pub phase: f64,
    /// Principal eigenvalue of the fitted covariance.
    pub lambda: f64,
    /// Second-eigenvalue probe.
    pub lambda2: f64,
    /// Number of shift pairs that back the fit (dimension minus one).
    pub pairs: usize,
    /// Power iterations spent.
    pub iters: usize,
    /// Carried-over eigen conditions.
    pub flags: FlagSet,
}

/// Fits one tone to an already-computed covariance.
pub fn estimate_tone_from_cov(
    cov: &HermitianCov,
    tol: f64,
    max_iter: usize,
    counter: &mut OpCounter,
) -> Result<ToneFit, EspritError> {
    if cov.dim() < 2 {
        return Err(EspritError::TooShort);
    }
    let pair = principal_eigenvector(cov, tol, max_iter, counter)?;
    let phase = invariance_phase(&pair.q, counter)?;
    Ok(ToneFit {
        phase,
        lambda: pair.lambda,
        lambda2: pair.lambda2,
        pairs: cov.dim() - 1,
        iters: pair.iters,
        flags: pair.flags,
    })
}

/// Fits one tone to a snapshot set: sample covariance, principal
/// eigenvector, invariance rotation.
pub fn estimate_tone(
    set: &SnapshotSet,
    tol: f64,
    max_iter: usize,
    counter: &mut OpCounter,
) -> Result<ToneFit, EspritError> {
    let cov = sample_covariance(set, counter)?;
    estimate_tone_from_cov(&cov, tol, max_iter, counter)
}

/// [`estimate_tone`] on the forward-smoothed covariance with the given
/// window. Decorrelates coherent interference at the cost of aperture.
pub fn estimate_tone_smoothed(
    set: &SnapshotSet,
    window: usize,
    tol: f64,
    max_iter: usize,
    counter: &mut OpCounter,
) -> Result<ToneFit, EspritError> {
    let cov = sample_covariance(set, counter)?.smoothed(window)?;
    estimate_tone_from_cov(&cov, tol, max_iter, counter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::em::cis;

    fn tone(dim: usize, omega: f64, amp: f64, phase0: f64) -> Vec<C64> {
        (0..dim)
            .map(|i| cis(omega * i as f64 + phase0) * amp)
            .collect()
    }

    fn fit_single(x: &[C64]) -> ToneFit {
        let mut set = SnapshotSet::new(x.len()).unwrap();
        set.push(x).unwrap();
        let mut c = OpCounter::new();
        estimate_tone(&set, 1e-12, 1000, &mut c).unwrap()
    }

    #[test]
    fn pure_tone_single_snapshot() {
        let x = tone(8, 0.7, 1.0, 0.0);
        let fit = fit_single(&x);
        assert!((fit.phase - 0.7).abs() < 1e-12);
        assert_eq!(fit.pairs, 7);
        assert!((fit.lambda - 8.0).abs() < 1e-9);
        assert!(fit.lambda2.abs() < 1e-9);
        assert!(fit.flags.is_empty());
    }

    #[test]
    fn covariance_orientation() {
        // R[0][1] = x_0 conj(x_1) = e^{-i omega} for a positive-rotation
        // tone; this orientation is what makes the recovered phase +omega.
        let x = tone(4, 0.7, 1.0, 0.2);
        let mut set = SnapshotSet::new(4).unwrap();
        set.push(&x).unwrap();
        let mut c = OpCounter::new();
        let cov = sample_covariance(&set, &mut c).unwrap();
        assert!((cov.entry(0, 1) - cis(-0.7)).norm() < 1e-12);
        assert!((cov.entry(1, 0) - cis(0.7)).norm() < 1e-12);
        assert!((cov.entry(2, 2) - C64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn invariances_scale_rotate_conjugate() {
        let x = tone(8, -1.9, 1.0, 0.4);
        let base = fit_single(&x).phase;
        assert!((base - (-1.9)).abs() < 1e-12);
        let scaled: Vec<C64> = x.iter().map(|v| *v * cis(1.234) * 3.0).collect();
        assert!((fit_single(&scaled).phase - base).abs() < 1e-12);
        let conj: Vec<C64> = x.iter().map(|v| v.conj()).collect();
        assert!((fit_single(&conj).phase + base).abs() < 1e-12);
    }

    #[test]
    fn single_snapshot_matches_direct_shift_product() {
        // With one snapshot the covariance is rank one and the eigenvector
        // is the snapshot itself, so the fit must agree with the direct
        // lag-one product to near machine precision.
        let x: Vec<C64> = (0..8)
            .map(|i| cis(0.9 * i as f64 + 0.1 * (i as f64).sin()) * (1.0 + 0.1 * i as f64))
            .collect();
        let direct: C64 = x[..7]
            .iter()
            .zip(x[1..].iter())
            .map(|(a, b)| a.conj() * b)
            .sum();
        let fit = fit_single(&x);
        assert!((fit.phase - direct.arg()).abs() < 1e-10);
    }

    #[test]
    fn repeated_snapshots_match_single() {
        let x = tone(6, 2.1, 1.0, -0.3);
        let single = fit_single(&x).phase;
        let mut set = SnapshotSet::new(6).unwrap();
        for _ in 0..5 {
            set.push(&x).unwrap();
        }
        let mut c = OpCounter::new();
        let multi = estimate_tone(&set, 1e-12, 1000, &mut c).unwrap().phase;
        assert!((multi - single).abs() < 1e-12);
    }

    #[test]
    fn identity_is_degenerate() {
        let cov = HermitianCov::identity(5);
        let mut c = OpCounter::new();
        let pair = principal_eigenvector(&cov, 1e-12, 1000, &mut c).unwrap();
        assert!((pair.lambda - 1.0).abs() < 1e-12);
        assert!(pair.flags.contains(Flag::DegenerateSpectrum));
        assert!(!pair.flags.contains(Flag::NoConvergence));
    }

    #[test]
    fn rank_one_plus_isotropic_recovers_direction() {
        let t = tone(8, 1.3, 1.0, 0.0);
        let cov = HermitianCov::from_entries(8, |i, j| {
            let iso = if i == j { 0.01 } else { 0.0 };
            t[i] * t[j].conj() + iso
        });
        let mut c = OpCounter::new();
        let pair = principal_eigenvector(&cov, 1e-12, 1000, &mut c).unwrap();
        let overlap: C64 = pair
            .q
            .iter()
            .zip(t.iter())
            .map(|(a, b)| a.conj() * b)
            .sum();
        // |<q, t/||t||>| = 1 up to tolerance, phase free.
        assert!((overlap.norm() / 8.0_f64.sqrt() - 1.0).abs() < 1e-6);
        assert!((pair.lambda - 8.01).abs() < 1e-9);
        assert!((pair.lambda2 - 0.01).abs() < 1e-6);
    }

    #[test]
    fn reseeds_when_start_is_orthogonal() {
        // Eigenvector (1, -1)/sqrt(2) with eigenvalue 1; the all-ones
        // start maps to zero and must be reseeded, not treated as failure.
        let cov = HermitianCov::from_entries(2, |i, j| {
            if i == j {
                C64::new(0.5, 0.0)
            } else {
                C64::new(-0.5, 0.0)
            }
        });
        let mut c = OpCounter::new();
        let pair = principal_eigenvector(&cov, 1e-12, 1000, &mut c).unwrap();
        assert!((pair.lambda - 1.0).abs() < 1e-12);
        assert!((pair.q[0] + pair.q[1]).norm() < 1e-9);
    }

    #[test]
    fn zero_matrix_errors() {
        let mut set = SnapshotSet::new(4).unwrap();
        set.push(&[C64::new(0.0, 0.0); 4]).unwrap();
        let mut c = OpCounter::new();
        assert_eq!(
            estimate_tone(&set, 1e-12, 100, &mut c).unwrap_err(),
            EspritError::ZeroMatrix
        );
    }

    #[test]
    fn structural_errors() {
        assert_eq!(SnapshotSet::new(1).unwrap_err(), EspritError::TooShort);
        let mut set = SnapshotSet::new(3).unwrap();
        assert_eq!(
            set.push(&[C64::new(1.0, 0.0); 2]).unwrap_err(),
            EspritError::LengthMismatch
        );
        let mut c = OpCounter::new();
        assert_eq!(
            sample_covariance(&set, &mut c).unwrap_err(),
            EspritError::NoSnapshots
        );
    }

    #[test]
    fn zero_subvector_detected() {
        let mut c = OpCounter::new();
        let q = [C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
        assert_eq!(
            invariance_phase(&q, &mut c).unwrap_err(),
            EspritError::ZeroSubvector
        );
    }

    #[test]
    fn smoothing_preserves_pure_tone() {
        let x = tone(8, 0.45, 1.0, 0.9);
        let mut set = SnapshotSet::new(8).unwrap();
        set.push(&x).unwrap();
        let mut c = OpCounter::new();
        let fit = estimate_tone_smoothed(&set, 4, 1e-12, 1000, &mut c).unwrap();
        assert!((fit.phase - 0.45).abs() < 1e-12);
        assert_eq!(fit.pairs, 3);
        assert_eq!(
            estimate_tone_smoothed(&set, 1, 1e-12, 1000, &mut c).unwrap_err(),
            EspritError::BadWindow
        );
        assert_eq!(
            estimate_tone_smoothed(&set, 9, 1e-12, 1000, &mut c).unwrap_err(),
            EspritError::BadWindow
        );
    }

    #[test]
    fn op_counter_tracks_work() {
        let x = tone(8, 0.7, 1.0, 0.0);
        let mut set = SnapshotSet::new(8).unwrap();
        set.push(&x).unwrap();
        let mut small = OpCounter::new();
        estimate_tone(&set, 1e-12, 1000, &mut small).unwrap();
        assert!(small.cmacs > 0);
        let y = tone(16, 0.7, 1.0, 0.0);
        let mut set16 = SnapshotSet::new(16).unwrap();
        set16.push(&y).unwrap();
        let mut big = OpCounter::new();
        estimate_tone(&set16, 1e-12, 1000, &mut big).unwrap();
        assert!(big.cmacs > small.cmacs);
    }
}
