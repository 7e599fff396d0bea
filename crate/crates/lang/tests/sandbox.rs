use std::sync::Arc;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use spatial_core::recon::synthetic::{synthesize_scene, SyntheticSceneSpec, TrajectoryPattern};
use spatial_core::recon::ReconstructionBundle;
use spatial_core::scene::Scene;
use spatial_lang::*;

fn fixture() -> (Arc<ReconstructionBundle>, Scene) {
    let b = Arc::new(synthesize_scene(&SyntheticSceneSpec::desk(64, 48, TrajectoryPattern::Lateral { step: 0.4, count: 2 })).unwrap().0);
    let scene = Scene::from_bundle(&b, "q");
    (b, scene)
}

fn run_with(src: &str, limits: &ExecutionLimits) -> Result<ProgramOutput, ProgramError> {
    let (b, scene) = fixture();
    run_source(src, &scene, &FixedBundle(b), limits, &ToolConfig::default())
}

fn runtime_kind(r: Result<ProgramOutput, ProgramError>) -> Option<RuntimeErrorKind> {
    match r {
        Err(ProgramError::Runtime(e)) => Some(e.kind),
        _ => None,
    }
}

#[test]
fn huge_range_hits_step_limit_quickly() {
    let limits = ExecutionLimits::default();
    let start = Instant::now();
    let r = run_with("def program(s):\n    t = 0\n    for i in range(10 ** 9):\n        t += i\n    return t\n", &limits);
    assert_eq!(runtime_kind(r), Some(RuntimeErrorKind::StepLimit));
    assert!(start.elapsed() < 2 * limits.wall_clock_budget);
}

#[test]
fn step_budget_applies_without_loop_cap() {
    let limits = ExecutionLimits { max_loop_iterations: u64::MAX, max_steps: 5_000, ..Default::default() };
    let r = run_with("def program(s):\n    for i in range(10 ** 9):\n        x = i\n    return 0\n", &limits);
    assert_eq!(runtime_kind(r), Some(RuntimeErrorKind::StepLimit));
}

#[test]
fn wall_clock_budget_stops_long_programs() {
    let limits = ExecutionLimits {
        max_loop_iterations: u64::MAX,
        max_steps: u64::MAX,
        wall_clock_budget: Duration::from_millis(200),
        ..Default::default()
    };
    let start = Instant::now();
    let r = run_with("def program(s):\n    for i in range(10 ** 12):\n        x = i\n    return 0\n", &limits);
    assert_eq!(runtime_kind(r), Some(RuntimeErrorKind::WallClock));
    assert!(start.elapsed() < Duration::from_millis(400));
}

#[test]
fn image_budget_counts_renders() {
    let limits = ExecutionLimits { max_rendered_images: 3, ..Default::default() };
    let r = run_with(samples::LOOK_AROUND, &limits);
    let Err(ProgramError::Runtime(e)) = r else { panic!() };
    assert_eq!(e.kind, RuntimeErrorKind::ImageBudget);
    assert_eq!(e.trace.iter().filter(|t| t.output_kind == "image").count(), 3);
}

#[test]
fn growth_is_capped() {
    let r = run_with("def program(s):\n    x = [0]\n    for i in range(40):\n        x = x + x\n    return len(x)\n", &ExecutionLimits::default());
    assert_eq!(runtime_kind(r), Some(RuntimeErrorKind::ValueTooLarge));
    let r = run_with("def program(s):\n    return 2 ** 64\n", &ExecutionLimits::default());
    assert_eq!(runtime_kind(r), Some(RuntimeErrorKind::ValueTooLarge));
}

#[test]
fn outputs_are_pure() {
    let (b, scene) = fixture();
    let provider = FixedBundle(b);
    let go = || run_source(samples::TURN_AND_ADVANCE, &scene, &provider, &ExecutionLimits::default(), &ToolConfig::default()).unwrap();
    assert_eq!(go(), go());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn budgets_are_monotone(n in 0i64..400, steps in 1u64..2_000, bigger in 0u64..2_000) {
        let src = format!("def program(s):\n    t = 0\n    for i in range({n}):\n        t += i\n    return t\n");
        let small = ExecutionLimits { max_steps: steps, ..Default::default() };
        let large = ExecutionLimits { max_steps: steps + bigger, ..Default::default() };
        let a = run_with(&src, &small);
        let b = run_with(&src, &large);
        if a.is_ok() {
            prop_assert_eq!(a.unwrap(), b.unwrap());
        }
        let expected = n * (n - 1) / 2;
        if let Ok(out) = run_with(&src, &large) {
            prop_assert_eq!(out.text().unwrap(), expected.to_string());
        }
    }
}
