//! Property tests for the misalignment geometry: the closed-form
//! inversion must undo the forward map across the whole operating
//! quadrant, and the derived observables must respect their structural
//! bounds no matter the pose.

use oam_aoa_core::geometry::{
    aoa_from_intermediates, element_positions, gamma_from_aoa, wrap_angle, xi_from_pose,
    AmbiguityPolicy, LinkGeometry, MisalignmentPose, UcaLayout,
};
use proptest::prelude::*;

const DEG: f64 = core::f64::consts::PI / 180.0;
const RADIUS: f64 = 1.336_847_937_697_784_2;

fn interior_angle() -> impl Strategy<Value = f64> {
    (0.5f64..85.0).prop_map(|d| d * DEG)
}

proptest! {
    #[test]
    fn inversion_undoes_forward_map(phi in interior_angle(), theta in interior_angle()) {
        let gamma = gamma_from_aoa(phi, theta);
        let delta = RADIUS * theta.sin() * phi.cos();
        let rec = aoa_from_intermediates(0.0, gamma, delta, RADIUS, &AmbiguityPolicy::default());
        prop_assert!(rec.flags.is_empty(), "flags: {}", rec.flags);
        prop_assert!((rec.phi_rad - phi).abs() < 1e-9, "phi {} vs {}", rec.phi_rad, phi);
        prop_assert!((rec.theta_rad - theta).abs() < 1e-9, "theta {} vs {}", rec.theta_rad, theta);
    }

    #[test]
    fn gamma_grows_with_either_angle(
        phi in interior_angle(),
        theta in interior_angle(),
        bump in 0.01f64..4.0,
    ) {
        // cos(gamma) = cos(theta) cos(phi) falls when either angle grows.
        let g = gamma_from_aoa(phi, theta);
        let bumped_phi = (phi + bump * DEG).min(89.0 * DEG);
        let bumped_theta = (theta + bump * DEG).min(89.0 * DEG);
        prop_assert!(gamma_from_aoa(bumped_phi, theta) > g);
        prop_assert!(gamma_from_aoa(phi, bumped_theta) > g);
    }

    #[test]
    fn offset_range_stays_within_ring_radius(
        r in 1.0f64..1000.0,
        phi in interior_angle(),
        theta in interior_angle(),
    ) {
        let pose = MisalignmentPose::new(r, phi, theta).unwrap();
        let xi = xi_from_pose(&pose, RADIUS);
        prop_assert!((xi - r).abs() <= RADIUS * (1.0 + 1e-12));
    }

    #[test]
    fn element_distances_stay_in_the_annulus(
        r in 5.0f64..500.0,
        phi in interior_angle(),
        theta in interior_angle(),
    ) {
        // Every element pair is at most two ring radii from the center
        // separation, whatever the transmit frame orientation does.
        let link = LinkGeometry {
            tx: UcaLayout::new(9, RADIUS).unwrap(),
            rx: UcaLayout::new(9, RADIUS).unwrap(),
            pose: MisalignmentPose::new(r, phi, theta).unwrap(),
        };
        let pos = element_positions(&link);
        for m in 0..9 {
            for n in 0..9 {
                let d = pos.distance(m, n);
                prop_assert!(d >= r - 2.0 * RADIUS - 1e-9);
                prop_assert!(d <= r + 2.0 * RADIUS + 1e-9);
            }
        }
    }

    #[test]
    fn wrap_angle_is_idempotent_and_in_range(a in -1e4f64..1e4) {
        let w = wrap_angle(a);
        prop_assert!((-core::f64::consts::PI..core::f64::consts::PI).contains(&w));
        prop_assert_eq!(wrap_angle(w), w);
        // Wrapping preserves the angle modulo a full turn.
        let turns = (a - w) / core::f64::consts::TAU;
        prop_assert!((turns - turns.round()).abs() < 1e-9);
    }

    #[test]
    fn recovery_is_wrap_invariant(phi in interior_angle(), theta in interior_angle()) {
        // Adding whole turns to both wrapped ranges changes nothing
        // because only their difference enters the inversion.
        let gamma = gamma_from_aoa(phi, theta);
        let delta = RADIUS * theta.sin() * phi.cos();
        let policy = AmbiguityPolicy::default();
        let base = aoa_from_intermediates(0.3, gamma, 0.3 + delta, RADIUS, &policy);
        let moved = aoa_from_intermediates(
            0.3 + core::f64::consts::TAU,
            gamma,
            0.3 + delta + core::f64::consts::TAU,
            RADIUS,
            &policy,
        );
        prop_assert!((base.phi_rad - moved.phi_rad).abs() < 1e-12);
        prop_assert!((base.theta_rad - moved.theta_rad).abs() < 1e-12);
    }
}

#[test]
fn forward_map_matches_frozen_reference_pose() {
    let pose = MisalignmentPose::new(40.0, 7.0 * DEG, 7.0 * DEG).unwrap();
    let gamma = gamma_from_aoa(pose.azimuth(), pose.elevation());
    let xi = xi_from_pose(&pose, RADIUS);
    assert!((gamma - 0.172_563_307_204_788_93).abs() < 1e-15);
    assert!((xi - 40.161_706_393_608_18).abs() < 1e-12);
}
