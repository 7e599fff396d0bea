use std::time::Instant;

use nalgebra::{Rotation3, Unit, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spatial_core::geometry::*;
use spatial_core::recon::synthetic::{synthesize_scene, SyntheticSceneSpec, Trajectory, TrajectoryPattern};
use spatial_core::render::project_point;
use spatial_core::SceneUnits;

fn random_pose(rng: &mut impl Rng) -> ExtrinsicPose {
    let axis = Unit::new_normalize(Vector3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(0.1..1.0),
    ));
    let r = Rotation3::from_axis_angle(&axis, rng.random_range(-3.1..3.1)).into_inner();
    let t = Vector3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
    ExtrinsicPose::new(r, t).unwrap()
}

fn pose_distance(a: &ExtrinsicPose, b: &ExtrinsicPose) -> f64 {
    let dr = (a.rotation() - b.rotation()).abs().max();
    let dt = (a.translation() - b.translation()).abs().max();
    dr.max(dt)
}

#[test]
fn ten_thousand_round_trips() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let k = Intrinsics::new(500.0, 480.0, 320.0, 240.0, 640, 480).unwrap();
    for _ in 0..10_000 {
        let (u, v) = (rng.random_range(0.0..640.0), rng.random_range(0.0..480.0));
        let d = rng.random_range(0.05..50.0);
        let pose = random_pose(&mut rng);
        let world = cam_to_world(&back_project(u, v, d, &k).unwrap(), &pose);
        let p = project_point(&world, &pose, &k, 1e-4).unwrap();
        assert!((p.u - u).abs() <= 1e-6 * u.abs().max(1.0), "u {u} -> {}", p.u);
        assert!((p.v - v).abs() <= 1e-6 * v.abs().max(1.0), "v {v} -> {}", p.v);
        assert!((p.depth - d).abs() <= 1e-6 * d, "d {d} -> {}", p.depth);
    }
    assert!(start.elapsed().as_secs_f64() < 1.0 || cfg!(debug_assertions));
}

#[test]
fn pose_algebra_over_random_poses() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let pose = random_pose(&mut rng);
        let deg = rng.random_range(-180.0..180.0);
        let dist = rng.random_range(0.0..3.0);
        assert!(pose_distance(&rotate_left(&rotate_right(&pose, deg), deg), &pose) < 1e-9);
        assert!(pose_distance(&turn_around(&turn_around(&pose)), &pose) < 1e-9);
        let eight = (0..8).fold(pose, |p, _| rotate_right(&p, 45.0));
        assert!(pose_distance(&eight, &pose) < 1e-9);
        let there_and_back = move_backward(&move_forward(&pose, dist).unwrap(), dist).unwrap();
        assert!(pose_distance(&there_and_back, &pose) < 1e-9);
    }
}

#[test]
fn sector_centers_plus_minus_ten_degrees() {
    let start = Instant::now();
    let mut passed = 0;
    for (s, label) in MotionLabel::SECTORS.iter().enumerate() {
        for offset in [-10.0, 0.0, 10.0] {
            let heading = 45.0 * s as f64 + offset;
            let first = ExtrinsicPose::level(20.0, Vector3::new(-0.2, 0.0, 0.1));
            let local = Vector3::new(heading.to_radians().sin(), 0.0, heading.to_radians().cos()) * 0.4;
            let second_center = camera_center(&first) + first.rotation().transpose() * local;
            let second = ExtrinsicPose::level(35.0, second_center);
            let mut spec = SyntheticSceneSpec::desk(16, 12, TrajectoryPattern::Approach { step: 0.1, count: 1 });
            spec.trajectory = Trajectory::Poses(vec![first, second]);
            let (bundle, _) = synthesize_scene(&spec).unwrap();
            let text = describe_camera_motion(&bundle.poses(), bundle.units()).unwrap();
            assert_eq!(classify_motion(&first, &second), *label);
            assert!(text.contains(&format!("moved {label} (distance 0.400)")), "{heading}: {text}");
            passed += 1;
        }
    }
    assert_eq!(passed, 24);
    assert!(start.elapsed().as_secs_f64() < 5.0);
}

#[test]
fn metric_bundles_report_meters() {
    let poses = [ExtrinsicPose::identity(), ExtrinsicPose::level(0.0, Vector3::new(0.0, 0.0, 1.25))];
    let text = describe_camera_motion(&poses, SceneUnits::MetricMeters).unwrap();
    assert_eq!(text, "From view 1 to view 2: moved forward (distance 1.250 m)");
}

proptest! {
    #[test]
    fn discretize_is_periodic_and_matches_nearest_center(theta in -720.0f64..720.0) {
        let label = discretize_motion(theta);
        prop_assert_eq!(label, discretize_motion(theta + 360.0));
        let center = label.sector_center().unwrap();
        let diff = (theta - center + 180.0).rem_euclid(360.0) - 180.0;
        prop_assert!((-22.5..22.5 + 1e-9).contains(&diff), "theta {} center {} diff {}", theta, center, diff);
    }

    #[test]
    fn yaw_recovers_heading(heading in -179.0f64..180.0, dist in 0.01f64..10.0, yaw in -180.0f64..180.0) {
        let first = ExtrinsicPose::level(yaw, Vector3::zeros());
        let local = Vector3::new(heading.to_radians().sin(), 0.0, heading.to_radians().cos()) * dist;
        let second = ExtrinsicPose::level(0.0, first.rotation().transpose() * local);
        let got = yaw_angle(&egocentric_displacement(&first, &second)).unwrap();
        prop_assert!((got - heading).abs() < 1e-6);
    }

    #[test]
    fn rotate_keeps_center_and_level(yaw in -180.0f64..180.0, phi in -360.0f64..360.0, x in -2.0f64..2.0, z in -2.0f64..2.0) {
        let pose = ExtrinsicPose::level(yaw, Vector3::new(x, 0.3, z));
        let turned = rotate_right(&pose, phi);
        prop_assert!((camera_center(&turned) - camera_center(&pose)).norm() < 1e-9);
        prop_assert!(turned.forward().y.abs() < 1e-12);
        prop_assert!(turned.orthonormality_error() < 1e-9);
    }
}
