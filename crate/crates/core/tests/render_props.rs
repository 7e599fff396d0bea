use std::time::Instant;

use nalgebra::Vector3;
use proptest::prelude::*;
use spatial_core::geometry::*;
use spatial_core::recon::synthetic::{synthesize_scene, SyntheticSceneSpec, TrajectoryPattern};
use spatial_core::render::{synthesize_novel_view, RenderOptions, DEFAULT_POINT_RADIUS};

fn self_view_stats(pattern: TrajectoryPattern) -> Vec<(f64, f64)> {
    let (bundle, _) = synthesize_scene(&SyntheticSceneSpec::desk(256, 192, pattern)).unwrap();
    let cloud = build_point_cloud(&bundle, &PointCloudOptions::default()).unwrap();
    bundle
        .frames()
        .iter()
        .map(|frame| {
            let start = Instant::now();
            let opts = RenderOptions::for_intrinsics(&frame.intrinsics);
            let img = synthesize_novel_view(&cloud, &frame.pose, &frame.intrinsics, &opts).unwrap();
            let (mut err, mut n) = (0.0, 0usize);
            for y in 0..img.height {
                for x in 0..img.width {
                    if !img.is_covered(x, y) {
                        continue;
                    }
                    let src = frame.image.get_pixel(x, y).0;
                    let got = img.pixel(x, y);
                    for c in 0..3 {
                        err += (got[c] as f64 - src[c] as f64 / 255.0).abs();
                    }
                    n += 3;
                }
            }
            assert!(start.elapsed().as_secs_f64() < 5.0);
            (err / n as f64, img.coverage_fraction)
        })
        .collect()
}

#[test]
fn self_view_fidelity() {
    for pattern in [
        TrajectoryPattern::Orbit { radius: 1.0, count: 6 },
        TrajectoryPattern::Lateral { step: 0.3, count: 4 },
    ] {
        for (i, (err, coverage)) in self_view_stats(pattern.clone()).into_iter().enumerate() {
            assert!(err <= 2.0 / 255.0, "{pattern:?} frame {i}: mean error {err}");
            assert!(coverage >= 0.9, "{pattern:?} frame {i}: coverage {coverage}");
        }
    }
}

#[test]
fn point_cloud_lies_on_analytic_surfaces() {
    let start = Instant::now();
    let spec = SyntheticSceneSpec::desk(256, 192, TrajectoryPattern::Lateral { step: 0.3, count: 4 });
    let (bundle, truth) = synthesize_scene(&spec).unwrap();
    let cloud = build_point_cloud(&bundle, &PointCloudOptions::default()).unwrap();
    assert_eq!(cloud.len(), 4 * 256 * 192);
    let worst = cloud.points.iter().map(|p| truth.distance_to_nearest_surface(p)).fold(0.0, f64::max);
    assert!(worst <= 1e-6, "worst surface distance {worst}");
    assert!(start.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn rotate_right_centers_object_on_the_right() {
    let k = Intrinsics::centered(50.0, 64, 48).unwrap();
    let mut cloud = PointCloud::default();
    for dy in -1..=1 {
        for dz in -1..=1 {
            cloud.points.push(Vector3::new(2.0, 0.02 * dy as f64, 0.02 * dz as f64));
            cloud.colors.push([1.0, 0.0, 0.0]);
        }
    }
    // A reference object straight ahead at the same depth.
    cloud.points.push(Vector3::new(0.0, 0.0, 2.0));
    cloud.colors.push([0.0, 0.0, 1.0]);

    let opts = RenderOptions::for_intrinsics(&k);
    let pose = rotate_right(&ExtrinsicPose::identity(), 90.0);
    let img = synthesize_novel_view(&cloud, &pose, &k, &opts).unwrap();
    let red: Vec<(f64, f64)> = (0..48)
        .flat_map(|y| (0..64).map(move |x| (x, y)))
        .filter(|&(x, y)| img.pixel(x, y) == [1.0, 0.0, 0.0])
        .map(|(x, y)| (x as f64, y as f64))
        .collect();
    assert!(!red.is_empty());
    let (mx, my) = red.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (mx / red.len() as f64, my / red.len() as f64);
    let tol = DEFAULT_POINT_RADIUS as f64 + 1.0;
    assert!((mx - k.cx).abs() <= tol && (my - k.cy).abs() <= tol, "centroid ({mx}, {my})");

    let wrong_way = synthesize_novel_view(&cloud, &rotate_left(&ExtrinsicPose::identity(), 90.0), &k, &opts).unwrap();
    assert!(wrong_way.pixels.iter().all(|p| *p != [1.0, 0.0, 0.0]));
}

#[test]
fn rendering_is_bit_deterministic() {
    let (bundle, _) =
        synthesize_scene(&SyntheticSceneSpec::desk(64, 48, TrajectoryPattern::Orbit { radius: 1.0, count: 6 })).unwrap();
    let cloud = build_point_cloud(&bundle, &PointCloudOptions::default()).unwrap();
    let frame = &bundle.frames()[2];
    let pose = move_forward(&rotate_right(&frame.pose, 30.0), 0.2).unwrap();
    let mut opts = RenderOptions::for_intrinsics(&frame.intrinsics);
    opts.point_radius = 2;
    let a = synthesize_novel_view(&cloud, &pose, &frame.intrinsics, &opts).unwrap();
    let b = synthesize_novel_view(&cloud, &pose, &frame.intrinsics, &opts).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_rgb8().as_raw(), b.to_rgb8().as_raw());
}

fn arb_cloud() -> impl Strategy<Value = PointCloud> {
    prop::collection::vec(((-1.0f64..1.0, -1.0f64..1.0, 0.5f64..4.0), 0u8..4), 1..60).prop_map(|pts| PointCloud {
        points: pts.iter().map(|((x, y, z), _)| Vector3::new(*x, *y, *z)).collect(),
        colors: pts.iter().map(|(_, c)| [*c as f32 / 3.0, 0.0, 0.0]).collect(),
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn removing_the_winner_never_brings_a_pixel_closer(cloud in arb_cloud(), radius in 0u32..3, pick in 0usize..1000) {
        let k = Intrinsics::centered(12.0, 24, 24).unwrap();
        let mut opts = RenderOptions::for_intrinsics(&k);
        opts.point_radius = radius;
        let pose = ExtrinsicPose::identity();
        let before = synthesize_novel_view(&cloud, &pose, &k, &opts).unwrap();
        let covered: Vec<usize> = (0..before.depth.len()).filter(|&i| before.depth[i].is_finite()).collect();
        prop_assume!(!covered.is_empty());
        let pixel = covered[pick % covered.len()];
        let winner_depth = before.depth[pixel];
        let winner = cloud.points.iter().position(|p| p.z == winner_depth).unwrap();
        let mut reduced = cloud.clone();
        reduced.points.remove(winner);
        reduced.colors.remove(winner);
        prop_assume!(!reduced.is_empty());
        let after = synthesize_novel_view(&reduced, &pose, &k, &opts).unwrap();
        prop_assert!(after.depth[pixel] >= winner_depth);
        for i in 0..after.depth.len() {
            prop_assert!(after.depth[i] >= before.depth[i]);
        }
    }
}
