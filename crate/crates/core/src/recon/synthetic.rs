//! Analytic desk-scale scenes: a checkered room containing spheres and boxes,
//! observed along a known camera trajectory. Depth is exact ray casting, so
//! the generator doubles as a ground-truth oracle for the geometry kernels.

use image::{Rgb, RgbImage};
use nalgebra::Vector3;

use super::{BundleError, Frame, ReconstructionBundle, SceneUnits};
use crate::geometry::{camera_center, discretize_motion, DepthMap, ExtrinsicPose, Intrinsics, MotionLabel};
use crate::render::project_point;

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Sphere { radius: f64 },
    Box { half_extents: Vector3<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub name: String,
    pub shape: Shape,
    pub center: Vector3<f64>,
    pub color: [u8; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrajectoryPattern {
    /// `count` level cameras on a horizontal circle about the room centre,
    /// each looking at the centre. Consecutive views are `360/count` degrees apart.
    Orbit { radius: f64, count: usize },
    /// `count` views stepping to the camera's right.
    Lateral { step: f64, count: usize },
    /// `count` views stepping forward.
    Approach { step: f64, count: usize },
    /// Nine views; step `k` moves along heading `45k + offset_deg` in the
    /// frame of view `k`, covering all eight motion labels. The camera also
    /// yaws by 15° between views.
    EightSector { step: f64, offset_deg: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Trajectory {
    Poses(Vec<ExtrinsicPose>),
    Pattern(TrajectoryPattern),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSceneSpec {
    /// The room spans `[-h, h]` on each axis. World +y points down.
    pub room_half_extents: Vector3<f64>,
    pub objects: Vec<SceneObject>,
    /// Edge length of one checker cell, in scene units.
    pub checker_period: f64,
    pub width: u32,
    pub height: u32,
    pub focal: f64,
    pub trajectory: Trajectory,
    pub units: SceneUnits,
    pub with_confidence: bool,
}

impl SyntheticSceneSpec {
    /// A furnished room with two spheres and two boxes.
    pub fn desk(width: u32, height: u32, pattern: TrajectoryPattern) -> Self {
        Self {
            room_half_extents: Vector3::new(2.0, 1.2, 2.5),
            objects: vec![
                SceneObject {
                    name: "red ball".into(),
                    shape: Shape::Sphere { radius: 0.35 },
                    center: Vector3::new(0.6, 0.3, 1.6),
                    color: [220, 40, 40],
                },
                SceneObject {
                    name: "blue cabinet".into(),
                    shape: Shape::Box { half_extents: Vector3::new(0.3, 0.6, 0.3) },
                    center: Vector3::new(-0.7, 0.6, 1.8),
                    color: [40, 70, 210],
                },
                SceneObject {
                    name: "green ball".into(),
                    shape: Shape::Sphere { radius: 0.3 },
                    center: Vector3::new(0.0, 0.8, -1.6),
                    color: [40, 190, 60],
                },
                SceneObject {
                    name: "yellow crate".into(),
                    shape: Shape::Box { half_extents: Vector3::new(0.25, 0.3, 0.25) },
                    center: Vector3::new(1.5, 0.9, -0.5),
                    color: [230, 200, 30],
                },
            ],
            checker_period: 0.5,
            width,
            height,
            focal: 0.7 * width as f64,
            trajectory: Trajectory::Pattern(pattern),
            units: SceneUnits::Normalized,
            with_confidence: false,
        }
    }
}

/// An analytic surface of the scene.
#[derive(Debug, Clone, PartialEq)]
pub enum Surface {
    RoomInterior { half_extents: Vector3<f64> },
    Sphere { center: Vector3<f64>, radius: f64 },
    Box { center: Vector3<f64>, half_extents: Vector3<f64> },
}

impl Surface {
    /// Unsigned distance from `p` to the surface.
    pub fn distance(&self, p: &Vector3<f64>) -> f64 {
        match self {
            Surface::RoomInterior { half_extents } => {
                let inside = (0..3).map(|i| half_extents[i] - p[i].abs()).fold(f64::INFINITY, f64::min);
                if inside >= 0.0 {
                    inside
                } else {
                    box_distance(&Vector3::zeros(), half_extents, p)
                }
            }
            Surface::Sphere { center, radius } => ((p - center).norm() - radius).abs(),
            Surface::Box { center, half_extents } => box_distance(center, half_extents, p),
        }
    }
}

fn box_distance(center: &Vector3<f64>, half: &Vector3<f64>, p: &Vector3<f64>) -> f64 {
    let q = (p - center).abs() - half;
    let outside = q.map(|x| x.max(0.0)).norm();
    let inside = q.max().min(0.0);
    (outside + inside).abs()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub surfaces: Vec<Surface>,
    /// Label of each consecutive view pair, known by construction. `None`
    /// for explicit pose lists.
    pub motion_labels: Option<Vec<MotionLabel>>,
    pub object_names: Vec<String>,
    /// `object_locations[frame][object]`: projected centre `(u, v, depth)`,
    /// or `None` when behind the camera.
    pub object_locations: Vec<Vec<Option<(f64, f64, f64)>>>,
}

impl GroundTruth {
    pub fn distance_to_nearest_surface(&self, p: &Vector3<f64>) -> f64 {
        self.surfaces.iter().map(|s| s.distance(p)).fold(f64::INFINITY, f64::min)
    }
}

pub fn synthesize_scene(spec: &SyntheticSceneSpec) -> Result<(ReconstructionBundle, GroundTruth), BundleError> {
    validate(spec)?;
    let (poses, motion_labels) = trajectory_poses(spec)?;
    if poses.is_empty() {
        return Err(BundleError::InvalidSpec("trajectory is empty".into()));
    }
    for (i, pose) in poses.iter().enumerate() {
        let c = camera_center(pose);
        let h = &spec.room_half_extents;
        if (0..3).any(|a| c[a].abs() >= h[a]) {
            return Err(BundleError::InvalidSpec(format!("camera {i} at {c:?} is outside the room")));
        }
        if let Some(o) = spec.objects.iter().find(|o| object_surface(o).distance(&c) < 1e-3 || inside(o, &c)) {
            return Err(BundleError::InvalidSpec(format!("camera {i} is inside or touching {}", o.name)));
        }
    }

    let k = Intrinsics::centered(spec.focal, spec.width, spec.height)
        .map_err(|e| BundleError::InvalidSpec(e.to_string()))?;
    let frames = poses.iter().map(|pose| render_frame(spec, &k, pose)).collect::<Result<Vec<_>, _>>()?;

    let object_locations = poses
        .iter()
        .map(|pose| {
            spec.objects
                .iter()
                .map(|o| project_point(&o.center, pose, &k, 1e-6).map(|p| (p.u, p.v, p.depth)))
                .collect()
        })
        .collect();
    let mut surfaces = vec![Surface::RoomInterior { half_extents: spec.room_half_extents }];
    surfaces.extend(spec.objects.iter().map(object_surface));
    let truth = GroundTruth {
        surfaces,
        motion_labels,
        object_names: spec.objects.iter().map(|o| o.name.clone()).collect(),
        object_locations,
    };
    let bundle = ReconstructionBundle::new(frames, spec.units, "synthetic")?;
    Ok((bundle, truth))
}

fn validate(spec: &SyntheticSceneSpec) -> Result<(), BundleError> {
    let bad = |m: String| Err(BundleError::InvalidSpec(m));
    if spec.room_half_extents.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
        return bad("room half-extents must be positive".into());
    }
    if !(spec.checker_period > 0.0) {
        return bad("checker period must be positive".into());
    }
    if spec.width == 0 || spec.height == 0 || !(spec.focal > 0.0) {
        return bad("image size and focal length must be positive".into());
    }
    for o in &spec.objects {
        let reach = match &o.shape {
            Shape::Sphere { radius } if *radius > 0.0 => Vector3::repeat(*radius),
            Shape::Box { half_extents } if half_extents.iter().all(|&x| x > 0.0) => *half_extents,
            _ => return bad(format!("{}: object size must be positive", o.name)),
        };
        if (0..3).any(|a| o.center[a].abs() + reach[a] > spec.room_half_extents[a] + 1e-12) {
            return bad(format!("{} extends outside the room", o.name));
        }
    }
    Ok(())
}

fn trajectory_poses(spec: &SyntheticSceneSpec) -> Result<(Vec<ExtrinsicPose>, Option<Vec<MotionLabel>>), BundleError> {
    let pattern = match &spec.trajectory {
        Trajectory::Poses(p) => return Ok((p.clone(), None)),
        Trajectory::Pattern(p) => p,
    };
    let bad = |m: &str| Err(BundleError::InvalidSpec(m.into()));
    Ok(match *pattern {
        TrajectoryPattern::Lateral { step, count } | TrajectoryPattern::Approach { step, count } => {
            if count == 0 || !(step > 0.0) {
                return bad("linear trajectory needs count > 0 and step > 0");
            }
            let (dir, label) = match pattern {
                TrajectoryPattern::Lateral { .. } => (Vector3::x(), MotionLabel::Right),
                _ => (Vector3::z(), MotionLabel::Forward),
            };
            let start = -(count as f64 - 1.0) * step / 2.0;
            let poses = (0..count).map(|i| ExtrinsicPose::level(0.0, dir * (start + i as f64 * step))).collect();
            (poses, Some(vec![label; count - 1]))
        }
        TrajectoryPattern::Orbit { radius, count } => {
            if count < 2 || !(radius > 0.0) {
                return bad("orbit needs count >= 2 and radius > 0");
            }
            let delta = 360.0 / count as f64;
            // Chord heading seen from the current camera.
            let heading = -(90.0 - delta / 2.0);
            if near_sector_boundary(heading) {
                return bad("orbit step puts the motion heading on a sector boundary");
            }
            let poses = (0..count)
                .map(|i| {
                    let yaw = i as f64 * delta;
                    let f = Vector3::new(yaw.to_radians().sin(), 0.0, yaw.to_radians().cos());
                    ExtrinsicPose::level(yaw, -f * radius)
                })
                .collect();
            (poses, Some(vec![discretize_motion(heading); count - 1]))
        }
        TrajectoryPattern::EightSector { step, offset_deg } => {
            if !(step > 0.0) || !(offset_deg.abs() < 22.5) {
                return bad("eight-sector trajectory needs step > 0 and |offset| < 22.5");
            }
            let mut poses = Vec::with_capacity(9);
            let mut center = Vector3::zeros();
            for k in 0..9 {
                let yaw = 15.0 * k as f64;
                let pose = ExtrinsicPose::level(yaw, center);
                let heading = (45.0 * k as f64 + offset_deg).to_radians();
                let local = Vector3::new(heading.sin(), 0.0, heading.cos()) * step;
                center += pose.rotation().transpose() * local;
                poses.push(pose);
            }
            (poses, Some(MotionLabel::SECTORS.to_vec()))
        }
    })
}

fn near_sector_boundary(theta: f64) -> bool {
    let r = (theta - 22.5).rem_euclid(45.0);
    r < 1.0 || r > 44.0
}

fn object_surface(o: &SceneObject) -> Surface {
    match &o.shape {
        Shape::Sphere { radius } => Surface::Sphere { center: o.center, radius: *radius },
        Shape::Box { half_extents } => Surface::Box { center: o.center, half_extents: *half_extents },
    }
}

fn inside(o: &SceneObject, p: &Vector3<f64>) -> bool {
    match &o.shape {
        Shape::Sphere { radius } => (p - o.center).norm() < *radius,
        Shape::Box { half_extents } => (0..3).all(|a| (p[a] - o.center[a]).abs() < half_extents[a]),
    }
}

struct Hit {
    t: f64,
    /// `None` for the room, otherwise the object index.
    object: Option<usize>,
    normal: Vector3<f64>,
}

fn cast(spec: &SyntheticSceneSpec, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Hit {
    let h = &spec.room_half_extents;
    let mut best = Hit { t: f64::INFINITY, object: None, normal: Vector3::zeros() };
    for a in 0..3 {
        if dir[a] == 0.0 {
            continue;
        }
        let wall = h[a].copysign(dir[a]);
        let t = (wall - origin[a]) / dir[a];
        if t > 0.0 && t < best.t {
            let mut n = Vector3::zeros();
            n[a] = -dir[a].signum();
            best = Hit { t, object: None, normal: n };
        }
    }
    for (i, o) in spec.objects.iter().enumerate() {
        let hit = match &o.shape {
            Shape::Sphere { radius } => ray_sphere(origin, dir, &o.center, *radius),
            Shape::Box { half_extents } => ray_box(origin, dir, &o.center, half_extents),
        };
        if let Some((t, n)) = hit {
            if t < best.t {
                best = Hit { t, object: Some(i), normal: n };
            }
        }
    }
    best
}

fn ray_sphere(o: &Vector3<f64>, d: &Vector3<f64>, c: &Vector3<f64>, r: f64) -> Option<(f64, Vector3<f64>)> {
    let oc = o - c;
    let a = d.dot(d);
    let b = 2.0 * d.dot(&oc);
    let cc = oc.dot(&oc) - r * r;
    let disc = b * b - 4.0 * a * cc;
    if disc < 0.0 {
        return None;
    }
    // Numerically stable root selection.
    let q = -0.5 * (b + disc.sqrt().copysign(b));
    let (t0, t1) = (q / a, cc / q);
    let t = [t0.min(t1), t0.max(t1)].into_iter().find(|&t| t > 0.0)?;
    let p = o + d * t;
    Some((t, (p - c) / r))
}

fn ray_box(o: &Vector3<f64>, d: &Vector3<f64>, c: &Vector3<f64>, h: &Vector3<f64>) -> Option<(f64, Vector3<f64>)> {
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    let mut axis = 0;
    for a in 0..3 {
        let (lo, hi) = (c[a] - h[a], c[a] + h[a]);
        if d[a] == 0.0 {
            if o[a] < lo || o[a] > hi {
                return None;
            }
            continue;
        }
        let (mut t1, mut t2) = ((lo - o[a]) / d[a], (hi - o[a]) / d[a]);
        if t1 > t2 {
            std::mem::swap(&mut t1, &mut t2);
        }
        if t1 > t_near {
            t_near = t1;
            axis = a;
        }
        t_far = t_far.min(t2);
    }
    if t_near > t_far || t_near <= 0.0 {
        return None;
    }
    let mut n = Vector3::zeros();
    n[axis] = -d[axis].signum();
    Some((t_near, n))
}

fn shade(spec: &SyntheticSceneSpec, hit: &Hit, p: &Vector3<f64>) -> [u8; 3] {
    let (base, dark) = match hit.object {
        None => (wall_color(&hit.normal), 0.7),
        Some(i) => (spec.objects[i].color, 0.75),
    };
    // Checker over the two in-plane axes for flat faces, all three for spheres.
    let flat_axis = (0..3).find(|&a| hit.normal[a].abs() == 1.0);
    let parity: i64 = (0..3)
        .filter(|&a| Some(a) != flat_axis)
        .map(|a| (p[a] / spec.checker_period).floor() as i64)
        .sum();
    let scale = if parity.rem_euclid(2) == 0 { 1.0 } else { dark };
    base.map(|c| (c as f64 * scale).round().clamp(0.0, 255.0) as u8)
}

fn wall_color(normal: &Vector3<f64>) -> [u8; 3] {
    // Inward normals: floor faces up (−y), ceiling faces down (+y).
    match (normal.x as i8, normal.y as i8, normal.z as i8) {
        (0, -1, 0) => [150, 120, 90],
        (0, 1, 0) => [235, 235, 225],
        (1, 0, 0) => [200, 170, 170],
        (-1, 0, 0) => [170, 200, 170],
        (0, 0, 1) => [170, 170, 205],
        _ => [205, 195, 150],
    }
}

fn render_frame(spec: &SyntheticSceneSpec, k: &Intrinsics, pose: &ExtrinsicPose) -> Result<Frame, BundleError> {
    let (w, h) = (spec.width, spec.height);
    let origin = camera_center(pose);
    let to_world = pose.rotation().transpose();
    let mut image = RgbImage::new(w, h);
    let mut depth = Vec::with_capacity((w * h) as usize);
    let mut confidence = Vec::with_capacity(if spec.with_confidence { (w * h) as usize } else { 0 });
    for y in 0..h {
        for x in 0..w {
            let ray_cam = Vector3::new((x as f64 - k.cx) / k.fx, (y as f64 - k.cy) / k.fy, 1.0);
            let dir = to_world * ray_cam;
            let hit = cast(spec, &origin, &dir);
            // The camera-frame z of `origin + t·dir` is exactly `t`.
            depth.push(hit.t as f32);
            if spec.with_confidence {
                confidence.push((dir.normalize().dot(&hit.normal)).abs() as f32);
            }
            image.put_pixel(x, y, Rgb(shade(spec, &hit, &(origin + dir * hit.t))));
        }
    }
    let depth = DepthMap::new(w, h, depth, spec.with_confidence.then_some(confidence))
        .map_err(|e| BundleError::InvalidSpec(e.to_string()))?;
    Ok(Frame { image, depth, intrinsics: *k, pose: *pose })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{describe_camera_motion, egocentric_displacement};

    #[test]
    fn sphere_on_axis_depth_at_principal_point() {
        let mut spec = SyntheticSceneSpec::desk(64, 48, TrajectoryPattern::Approach { step: 0.1, count: 1 });
        spec.objects = vec![SceneObject {
            name: "ball".into(),
            shape: Shape::Sphere { radius: 0.5 },
            center: Vector3::new(0.0, 0.0, 2.0),
            color: [255, 0, 0],
        }];
        let (bundle, _) = synthesize_scene(&spec).unwrap();
        let d = bundle.frames()[0].depth.get(32, 24).unwrap();
        assert_eq!(d, 1.5);
    }

    #[test]
    fn eight_sector_labels_cover_all_directions() {
        let spec = SyntheticSceneSpec::desk(16, 12, TrajectoryPattern::EightSector { step: 0.25, offset_deg: 0.0 });
        let (bundle, truth) = synthesize_scene(&spec).unwrap();
        let labels = truth.motion_labels.unwrap();
        assert_eq!(labels, MotionLabel::SECTORS.to_vec());
        let text = describe_camera_motion(&bundle.poses(), bundle.units()).unwrap();
        for (line, label) in text.lines().zip(&labels) {
            assert!(line.contains(&format!("moved {label} ")), "{line}");
        }
    }

    #[test]
    fn eight_sector_headings_match_construction() {
        let spec = SyntheticSceneSpec::desk(8, 6, TrajectoryPattern::EightSector { step: 0.25, offset_deg: 10.0 });
        let (bundle, _) = synthesize_scene(&spec).unwrap();
        let poses = bundle.poses();
        for k in 0..8 {
            let d = egocentric_displacement(&poses[k], &poses[k + 1]);
            let want = (45.0 * k as f64 + 10.0).to_radians();
            assert!((d.x - 0.25 * want.sin()).abs() < 1e-12 && (d.z - 0.25 * want.cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn orbit_and_linear_patterns() {
        for (pattern, label) in [
            (TrajectoryPattern::Orbit { radius: 1.0, count: 6 }, MotionLabel::ForwardLeft),
            (TrajectoryPattern::Lateral { step: 0.3, count: 4 }, MotionLabel::Right),
            (TrajectoryPattern::Approach { step: 0.3, count: 3 }, MotionLabel::Forward),
        ] {
            let (bundle, truth) = synthesize_scene(&SyntheticSceneSpec::desk(8, 6, pattern)).unwrap();
            let labels = truth.motion_labels.unwrap();
            assert_eq!(labels.len(), bundle.len() - 1);
            assert!(labels.iter().all(|&l| l == label));
            let text = describe_camera_motion(&bundle.poses(), bundle.units()).unwrap();
            assert!(text.lines().all(|l| l.contains(&format!("moved {label} "))), "{text}");
        }
        let boundary = SyntheticSceneSpec::desk(8, 6, TrajectoryPattern::Orbit { radius: 1.0, count: 8 });
        assert!(matches!(synthesize_scene(&boundary), Err(BundleError::InvalidSpec(_))));
    }

    #[test]
    fn empty_or_invalid_trajectories_rejected() {
        let mut spec = SyntheticSceneSpec::desk(8, 6, TrajectoryPattern::Lateral { step: 0.1, count: 2 });
        spec.trajectory = Trajectory::Poses(vec![]);
        assert!(matches!(synthesize_scene(&spec), Err(BundleError::InvalidSpec(_))));
        spec.trajectory = Trajectory::Poses(vec![ExtrinsicPose::level(0.0, Vector3::new(9.0, 0.0, 0.0))]);
        assert!(matches!(synthesize_scene(&spec), Err(BundleError::InvalidSpec(_))));
        spec.trajectory = Trajectory::Poses(vec![ExtrinsicPose::level(0.0, Vector3::new(0.6, 0.3, 1.6))]);
        assert!(matches!(synthesize_scene(&spec), Err(BundleError::InvalidSpec(_))));
    }

    #[test]
    fn surface_distances() {
        let room = Surface::RoomInterior { half_extents: Vector3::new(1.0, 1.0, 1.0) };
        assert!((room.distance(&Vector3::new(0.5, 0.0, 0.0)) - 0.5).abs() < 1e-15);
        let b = Surface::Box { center: Vector3::zeros(), half_extents: Vector3::new(1.0, 1.0, 1.0) };
        assert!((b.distance(&Vector3::new(2.0, 0.0, 0.0)) - 1.0).abs() < 1e-15);
        assert!((b.distance(&Vector3::new(0.9, 0.0, 0.0)) - 0.1).abs() < 1e-12);
        let s = Surface::Sphere { center: Vector3::zeros(), radius: 1.0 };
        assert!((s.distance(&Vector3::new(0.0, 3.0, 0.0)) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn object_locations_project_visible_objects() {
        let spec = SyntheticSceneSpec::desk(64, 48, TrajectoryPattern::Approach { step: 0.1, count: 1 });
        let (_, truth) = synthesize_scene(&spec).unwrap();
        let red = truth.object_locations[0][0].unwrap();
        assert!(red.0 > 32.0 && red.2 > 1.0);
        assert!(truth.object_locations[0][2].is_none(), "green ball is behind the camera");
    }
}
