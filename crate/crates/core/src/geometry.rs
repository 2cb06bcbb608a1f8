//! Array geometry: UCA layouts, the misalignment pose, derived link angles,
//! element positions in a common frame, and the closed-form inversion from
//! estimated phase parameters back to azimuth/elevation.
//!
//! Conventions. The receive array is centered at the origin of the receiver
//! frame with its elements in the z = 0 plane and its first element on the
//! +x axis. The pose (r, phi, theta) describes the incoming beam: the wave
//! propagates along w = (sin th cos ph, sin th sin ph, -cos th), so the
//! transmit array center sits at O = -r w, i.e. at azimuth phi + pi and
//! polar angle theta above the receive plane. This is the placement under
//! which the reference-element phase parameter comes out xi = r + R sin th
//! cos ph with a plus sign; placing the transmitter at azimuth phi instead
//! flips that sign and the recovered azimuth with it.
//!
//! The transmit frame is the rotation Q = [x' y' z'] fixed by two
//! requirements: (a) the propagation direction expressed in transmit
//! coordinates has polar angle theta and azimuth gamma, which is what makes
//! the transmit ring's far-field factor J_l(k R sin th) e^{i l gamma}; and
//! (b) x' . X = cos gamma, the defining relation of the tilt angle gamma
//! between the transmit and receive x axes. One rotational degree of freedom
//! about w remains after (a); it is spent on (b), and of the two solutions
//! the one whose z' points most nearly opposite the receive normal (the
//! "facing" branch) is taken.

use crate::flags::{Flag, FlagSet};
use crate::C64;
#[cfg(not(feature = "std"))]
use num_traits::Float;

/// Smallest elevation treated as nonzero by the frame construction; below
/// this the boresight-aligned fallback frame is used.
const THETA_DEGENERATE: f64 = 1e-12;

/// Three-component vector over f64, sufficient for the fixed-size geometry
/// here without pulling in a linear-algebra dependency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec3 {
    /// x component (meters for positions, unitless for directions).
    pub x: f64,
    /// y component.
    pub y: f64,
    /// z component.
    pub z: f64,
}

impl Vec3 {
    /// Builds a vector from components.
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    /// Dot product.
    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    /// Cross product.
    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    /// Euclidean norm.
    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Scales by a scalar.
    pub fn scale(self, c: f64) -> Vec3 {
        Vec3::new(self.x * c, self.y * c, self.z * c)
    }

    /// Component-wise sum.
    pub fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }

    /// Component-wise difference.
    pub fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }

    /// Returns the unit vector in this direction.
    ///
    /// Caller guarantees the norm is bounded away from zero.
    pub fn normalized(self) -> Vec3 {
        self.scale(1.0 / self.norm())
    }
}

/// Orthonormal right-handed basis (the columns of a rotation matrix).
#[derive(Debug, Clone, Copy)]
pub struct Basis {
    /// First axis.
    pub x: Vec3,
    /// Second axis.
    pub y: Vec3,
    /// Third axis.
    pub z: Vec3,
}

impl Basis {
    /// Applies the rotation to a vector of local coordinates, returning the
    /// vector in the parent frame.
    pub fn to_parent(&self, local: Vec3) -> Vec3 {
        self.x
            .scale(local.x)
            .add(self.y.scale(local.y))
            .add(self.z.scale(local.z))
    }

    /// Expresses a parent-frame vector in local coordinates (the inverse
    /// rotation; the basis is orthonormal so the transpose suffices).
    pub fn to_local(&self, parent: Vec3) -> Vec3 {
        Vec3::new(self.x.dot(parent), self.y.dot(parent), self.z.dot(parent))
    }
}

/// Rotation of `v` about the unit `axis` by `angle`, by the Rodrigues
/// formula.
pub fn rotate_about(axis: Vec3, angle: f64, v: Vec3) -> Vec3 {
    let (s, c) = angle.sin_cos();
    let k = axis;
    v.scale(c)
        .add(k.cross(v).scale(s))
        .add(k.scale(k.dot(v) * (1.0 - c)))
}

/// Error raised by geometry constructors on invalid parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeometryError {
    /// Element count must be at least 1.
    EmptyArray,
    /// Ring radius must be finite and non-negative.
    BadRadius,
    /// Pose range must be strictly positive and finite.
    BadRange,
    /// Pose angles must lie in [0, pi/2).
    BadAngle,
}

impl core::fmt::Display for GeometryError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let msg = match self {
            GeometryError::EmptyArray => "element count must be >= 1",
            GeometryError::BadRadius => "ring radius must be finite and >= 0",
            GeometryError::BadRange => "pose range must be finite and > 0",
            GeometryError::BadAngle => "pose angles must lie in [0, pi/2)",
        };
        write!(f, "{msg}")
    }
}

#[cfg(feature = "std")]
impl std::error::Error for GeometryError {}

/// Uniform circular array: `n` elements equally spaced on a ring.
///
/// Element `i` (zero-based) sits at azimuth `2 pi i / n`, so the first
/// element is the reference on the local +x axis. A zero radius collapses
/// the ring to a point and is accepted; it models a single-point aperture
/// and keeps the mode-0 receive factor at J_0(0) = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UcaLayout {
    n: usize,
    radius: f64,
}

impl UcaLayout {
    /// Validates and builds a layout.
    pub fn new(n: usize, radius: f64) -> Result<Self, GeometryError> {
        if n == 0 {
            return Err(GeometryError::EmptyArray);
        }
        if !radius.is_finite() || radius < 0.0 {
            return Err(GeometryError::BadRadius);
        }
        Ok(UcaLayout { n, radius })
    }

    /// Number of elements.
    pub fn len(&self) -> usize {
        self.n
    }

    /// True when the layout has exactly one element.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Ring radius in meters.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Azimuth of element `i` in radians, in [0, 2 pi); element 0 is the
    /// reference at azimuth exactly 0.
    pub fn element_azimuth(&self, i: usize) -> f64 {
        debug_assert!(i < self.n);
        core::f64::consts::TAU * (i as f64) / (self.n as f64)
    }
}

/// Misalignment pose of the link: range and angle of arrival.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MisalignmentPose {
    range_m: f64,
    azimuth_rad: f64,
    elevation_rad: f64,
}

impl MisalignmentPose {
    /// Validates and builds a pose. Angles are restricted to [0, pi/2):
    /// the inversion recovers the azimuth only through cos^2, so a sign
    /// convention must be fixed up front (see [`AmbiguityPolicy`]).
    pub fn new(range_m: f64, azimuth_rad: f64, elevation_rad: f64) -> Result<Self, GeometryError> {
        if !range_m.is_finite() || range_m <= 0.0 {
            return Err(GeometryError::BadRange);
        }
        let half = core::f64::consts::FRAC_PI_2;
        for a in [azimuth_rad, elevation_rad] {
            if !a.is_finite() || a < 0.0 || a >= half {
                return Err(GeometryError::BadAngle);
            }
        }
        Ok(MisalignmentPose {
            range_m,
            azimuth_rad,
            elevation_rad,
        })
    }

    /// Link range r in meters.
    pub fn range(&self) -> f64 {
        self.range_m
    }

    /// Azimuth of arrival phi in radians.
    pub fn azimuth(&self) -> f64 {
        self.azimuth_rad
    }

    /// Elevation of arrival theta in radians (0 = boresight).
    pub fn elevation(&self) -> f64 {
        self.elevation_rad
    }

    /// Unit propagation direction (transmitter toward receiver) in the
    /// receiver frame.
    pub fn propagation_dir(&self) -> Vec3 {
        let (sp, cp) = self.azimuth_rad.sin_cos();
        let (st, ct) = self.elevation_rad.sin_cos();
        Vec3::new(st * cp, st * sp, -ct)
    }
}

/// Derived link angles: the tilt angle gamma between transmit and receive
/// x axes and the reference-element range parameter xi.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedAngles {
    /// gamma = arccos(cos theta cos phi), in [0, pi/2] on the pose domain.
    pub gamma: f64,
    /// xi = r + R sin theta cos phi (meters), with R the receive radius.
    pub xi: f64,
}

impl DerivedAngles {
    /// Computes both derived quantities for a pose and receive radius.
    pub fn from_pose(pose: &MisalignmentPose, rx_radius: f64) -> Self {
        DerivedAngles {
            gamma: gamma_from_aoa(pose.azimuth(), pose.elevation()),
            xi: xi_from_pose(pose, rx_radius),
        }
    }
}

/// Tilt angle between the transmit and receive x axes:
/// `arccos(cos theta cos phi)`, the input clamped against rounding.
pub fn gamma_from_aoa(azimuth_rad: f64, elevation_rad: f64) -> f64 {
    let c = elevation_rad.cos() * azimuth_rad.cos();
    c.clamp(-1.0, 1.0).acos()
}

/// Reference-element range parameter `xi = r + R sin theta cos phi`, where
/// `R` is the radius of the ring carrying the reference element (the
/// receive ring).
pub fn xi_from_pose(pose: &MisalignmentPose, rx_radius: f64) -> f64 {
    pose.range() + rx_radius * pose.elevation().sin() * pose.azimuth().cos()
}

/// Full link description: both layouts plus the pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    /// Transmit ring.
    pub tx: UcaLayout,
    /// Receive ring.
    pub rx: UcaLayout,
    /// Misalignment pose.
    pub pose: MisalignmentPose,
}

/// Element positions of both rings expressed in the receiver frame,
/// together with the transmit basis used to generate them.
#[derive(Debug, Clone)]
pub struct ElementPositions {
    /// Transmit element positions (meters).
    pub tx: alloc::vec::Vec<Vec3>,
    /// Receive element positions (meters).
    pub rx: alloc::vec::Vec<Vec3>,
    /// Transmit array center.
    pub tx_center: Vec3,
    /// Transmit frame axes in receiver coordinates.
    pub tx_basis: Basis,
}

impl ElementPositions {
    /// Distance between receive element `m` and transmit element `n`.
    pub fn distance(&self, m: usize, n: usize) -> f64 {
        self.tx[n].sub(self.rx[m]).norm()
    }
}

/// Constructs the transmit-frame basis for a pose, per the module-level
/// convention: propagation direction at polar angle theta / azimuth gamma in
/// transmit coordinates, x' . X = cos gamma, facing branch.
pub fn transmit_frame(pose: &MisalignmentPose) -> Basis {
    let w = pose.propagation_dir();
    let theta = pose.elevation();
    if theta < THETA_DEGENERATE {
        // Boresight-aligned link: gamma = phi and the constraint pair is
        // satisfied by pointing x' along the receive-plane azimuth phi with
        // z' straight down at the receiver.
        let (sp, cp) = pose.azimuth().sin_cos();
        let x = Vec3::new(cp, sp, 0.0);
        let z = Vec3::new(0.0, 0.0, -1.0);
        return Basis {
            x,
            y: z.cross(x),
            z,
        };
    }
    let gamma = gamma_from_aoa(pose.azimuth(), theta);
    // Base rotation q0: take the canonical direction with polar theta and
    // azimuth gamma onto w by rotating about their common normal.
    let (sg, cg) = gamma.sin_cos();
    let (st, ct) = theta.sin_cos();
    let v = Vec3::new(st * cg, st * sg, ct);
    let axis = v.cross(w);
    let s = axis.norm();
    let c = v.dot(w);
    let base = |e: Vec3| -> Vec3 {
        if s < 1e-15 {
            if c > 0.0 {
                e
            } else {
                // Antipodal: rotate half a turn about any normal of v.
                rotate_about(Vec3::new(1.0, 0.0, 0.0), core::f64::consts::PI, e)
            }
        } else {
            rotate_about(axis.scale(1.0 / s), s.atan2(c), e)
        }
    };
    let x0 = base(Vec3::new(1.0, 0.0, 0.0));
    let y0 = base(Vec3::new(0.0, 1.0, 0.0));
    let z0 = base(Vec3::new(0.0, 0.0, 1.0));
    // Remaining freedom: rotation about w by psi. Solve
    //   (a - c) cos psi + b sin psi = cos gamma - c
    // for x'(psi) . X = cos gamma, where a, b, c are the Rodrigues
    // coefficients of x0 about w projected on X.
    let xaxis = Vec3::new(1.0, 0.0, 0.0);
    let a = x0.dot(xaxis);
    let b = w.cross(x0).dot(xaxis);
    let cc = w.dot(x0) * w.dot(xaxis);
    let rho = (a - cc).hypot(b);
    let alpha = b.atan2(a - cc);
    // rho vanishes only when x0 is parallel to w, impossible for an
    // orthonormal pair; clamp guards rounding at the domain edge.
    let val = ((gamma.cos() - cc) / rho).clamp(-1.0, 1.0);
    let delta = val.acos();
    let mut best: Option<(f64, Basis)> = None;
    for psi in [alpha + delta, alpha - delta] {
        let bx = rotate_about(w, psi, x0);
        let by = rotate_about(w, psi, y0);
        let bz = rotate_about(w, psi, z0);
        // Facing score: prefer the branch whose z' points against the
        // receive normal (transmitter looking down at the receiver).
        let score = -bz.z;
        if best.map_or(true, |(s0, _)| score > s0) {
            best = Some((score, Basis { x: bx, y: by, z: bz }));
        }
    }
    best.expect("two candidate branches always exist").1
}

/// Places both rings in the receiver frame.
///
/// The receive ring is centered at the origin in the z = 0 plane; the
/// transmit ring is centered at `-r w` (azimuth phi + pi, polar theta) and
/// oriented by [`transmit_frame`]. Rejects a degenerate (zero-range) pose
/// through `MisalignmentPose` validation; all pairwise distances are then
/// finite and positive whenever `r > R_tx + R_rx`.
pub fn element_positions(geom: &LinkGeometry) -> ElementPositions {
    let basis = transmit_frame(&geom.pose);
    let center = geom.pose.propagation_dir().scale(-geom.pose.range());
    let tx = (0..geom.tx.len())
        .map(|n| {
            let az = geom.tx.element_azimuth(n);
            let local = Vec3::new(geom.tx.radius() * az.cos(), geom.tx.radius() * az.sin(), 0.0);
            center.add(basis.to_parent(local))
        })
        .collect();
    let rx = (0..geom.rx.len())
        .map(|m| {
            let az = geom.rx.element_azimuth(m);
            Vec3::new(geom.rx.radius() * az.cos(), geom.rx.radius() * az.sin(), 0.0)
        })
        .collect();
    ElementPositions {
        tx,
        rx,
        tx_center: center,
        tx_basis: basis,
    }
}

/// Reporting policy for quantities that are only identifiable up to a wrap
/// or a sign. Carried in every report so downstream consumers see the
/// conventions, not just the numbers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmbiguityPolicy {
    /// Tolerated relative excess of |xi - r| over the receive radius before
    /// the intermediates are declared inconsistent.
    pub delta_bound_tol: f64,
    /// Tolerated excess of the inversion radicand over 1 before flagging.
    pub radicand_tol: f64,
}

impl Default for AmbiguityPolicy {
    fn default() -> Self {
        // Noise pushes estimates slightly outside the feasible set near
        // phi = 0; these margins absorb rounding without hiding gross
        // inconsistency.
        AmbiguityPolicy {
            delta_bound_tol: 1e-3,
            radicand_tol: 1e-6,
        }
    }
}

impl AmbiguityPolicy {
    /// Azimuth branch convention: estimates are reported in [0, pi/2).
    pub const AZIMUTH_BRANCH: &'static str = "non-negative";
    /// Range convention: r and xi are phase-wrapped, only their difference
    /// is used absolutely.
    pub const RANGE_CONVENTION: &'static str = "wrapped";
}

/// Result of the closed-form inversion.
#[derive(Debug, Clone, Copy)]
pub struct AoaRecovery {
    /// Recovered azimuth in radians, in [0, pi/2].
    pub phi_rad: f64,
    /// Recovered elevation in radians, in [0, pi/2].
    pub theta_rad: f64,
    /// Conditions encountered during inversion.
    pub flags: FlagSet,
}

/// Inverts the intermediate estimates back to the angle of arrival:
///
/// `phi = arccos sqrt(((xi - r)/R)^2 + cos^2 gamma)`, and
/// `theta = atan2(xi - r, R cos gamma)`,
///
/// with the radicand clamped to [0, 1]. `r_hat` and `xi_hat` are in meters
/// (possibly both wrapped by the same amount; only the difference enters).
/// Flags: `GammaDegenerate` when |cos gamma| < 1e-12 (theta reported as
/// pi/2), `RadicandOverflow` when the unclamped radicand exceeds
/// 1 + radicand_tol, `InconsistentIntermediates` when |xi - r| exceeds
/// R (1 + delta_bound_tol).
pub fn aoa_from_intermediates(
    r_hat: f64,
    gamma_hat: f64,
    xi_hat: f64,
    rx_radius: f64,
    policy: &AmbiguityPolicy,
) -> AoaRecovery {
    let mut flags = FlagSet::EMPTY;
    let delta = xi_hat - r_hat;
    if delta.abs() > rx_radius * (1.0 + policy.delta_bound_tol) {
        flags.insert(Flag::InconsistentIntermediates);
    }
    let cg = gamma_hat.cos();
    if cg.abs() < 1e-12 {
        flags.insert(Flag::GammaDegenerate);
        return AoaRecovery {
            phi_rad: 0.0,
            theta_rad: core::f64::consts::FRAC_PI_2,
            flags,
        };
    }
    let ratio = delta / rx_radius;
    let radicand = ratio * ratio + cg * cg;
    if radicand > 1.0 + policy.radicand_tol {
        flags.insert(Flag::RadicandOverflow);
    }
    let phi = radicand.clamp(0.0, 1.0).sqrt().acos();
    // atan2 restricted to [0, pi/2): small negative deltas from noise clamp
    // to boresight rather than wrapping to a rear quadrant.
    let theta = delta.atan2(rx_radius * cg).clamp(0.0, core::f64::consts::FRAC_PI_2);
    AoaRecovery {
        phi_rad: phi,
        theta_rad: theta,
        flags,
    }
}

/// Wraps an angle to [-pi, pi).
pub fn wrap_angle(a: f64) -> f64 {
    let tau = core::f64::consts::TAU;
    let mut w = a % tau;
    if w < -core::f64::consts::PI {
        w += tau;
    } else if w >= core::f64::consts::PI {
        w -= tau;
    }
    w
}

/// Circular mean of unit phasors accumulated by the caller: the argument of
/// the resultant. Returns `None` for a (near-)zero resultant, where the mean
/// direction is undefined.
pub fn circular_mean(resultant: C64) -> Option<f64> {
    if resultant.norm() < 1e-300 {
        None
    } else {
        Some(resultant.arg())
    }
}
