use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use shuttlelab_core::court::{solve_camera, CameraError, CameraModel, CourtSpec};
use shuttlelab_core::ingest::{CalibrationInput, Keypoint};
use shuttlelab_core::synth::{calibration_points, synthetic_camera};
use shuttlelab_core::CourtPoint;

/// Line intersections not used for calibration: doubles long service lines,
/// singles sideline ends, the net top at the centre line.
fn held_out(spec: &CourtSpec) -> Vec<CourtPoint> {
    let (hw, hl) = (spec.half_width(), spec.half_length());
    let long_service = hl - 0.76;
    let singles = hw - 0.46;
    vec![
        CourtPoint::new(-hw, -long_service, 0.0),
        CourtPoint::new(hw, -long_service, 0.0),
        CourtPoint::new(-hw, long_service, 0.0),
        CourtPoint::new(hw, long_service, 0.0),
        CourtPoint::new(-singles, -hl, 0.0),
        CourtPoint::new(singles, hl, 0.0),
        CourtPoint::new(0.0, 0.0, spec.net_height_center),
        CourtPoint::new(0.0, -1.98, 0.0),
    ]
}

fn keypoints(
    camera: &CameraModel,
    points: &[CourtPoint],
    sigma: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<Keypoint> {
    let noise = Normal::new(0.0, sigma.max(1e-300)).unwrap();
    points
        .iter()
        .map(|p| {
            let mut px = camera.project(p).unwrap();
            if sigma > 0.0 {
                px.u += noise.sample(rng);
                px.v += noise.sample(rng);
            }
            Keypoint {
                court: *p,
                pixel: px,
            }
        })
        .collect()
}

fn solve(points: Vec<Keypoint>) -> Result<CameraModel, CameraError> {
    let cal = CalibrationInput::Keypoints {
        points,
        image_size: Some((1920, 1080)),
    };
    solve_camera(&cal, &CourtSpec::default()).map(|s| s.camera)
}

#[test]
fn exact_keypoints_reproject_exactly() {
    let spec = CourtSpec::default();
    let truth = synthetic_camera();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let kp = keypoints(&truth, &calibration_points(&spec), 0.0, &mut rng);
    let cal = CalibrationInput::Keypoints {
        points: kp,
        image_size: None,
    };
    let solved = solve_camera(&cal, &spec).unwrap();
    assert!(solved.rmse_px.unwrap() < 1e-4, "rmse {:?}", solved.rmse_px);
    let other = keypoints(&truth, &held_out(&spec), 0.0, &mut rng);
    assert!(solved.camera.reprojection_rmse(&other) < 1e-4);
}

#[test]
fn noisy_keypoints_stay_within_a_few_pixels() {
    let spec = CourtSpec::default();
    let truth = synthetic_camera();
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fitting = keypoints(&truth, &calibration_points(&spec), 1.0, &mut rng);
        let camera = solve(fitting.clone()).unwrap();
        let fit_rmse = camera.reprojection_rmse(&fitting);
        // Held-out error is measured against the true pixel positions.
        let exact = keypoints(&truth, &held_out(&spec), 0.0, &mut rng);
        let held = camera.reprojection_rmse(&exact);
        assert!(fit_rmse <= 2.0, "seed {seed}: fitting rmse {fit_rmse}");
        assert!(held <= 6.0, "seed {seed}: held-out rmse {held}");
    }
}

#[test]
fn ground_only_keypoints_are_rejected() {
    let spec = CourtSpec::default();
    let truth = synthetic_camera();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let ground: Vec<CourtPoint> = calibration_points(&spec)
        .into_iter()
        .filter(|p| p.z == 0.0)
        .collect();
    let err = solve(keypoints(&truth, &ground, 0.0, &mut rng)).unwrap_err();
    assert!(
        matches!(err, CameraError::DegenerateConfiguration(_)),
        "{err}"
    );
}

#[test]
fn too_few_keypoints_are_rejected() {
    let spec = CourtSpec::default();
    let truth = synthetic_camera();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pts = &calibration_points(&spec)[7..];
    let err = solve(keypoints(&truth, pts, 0.0, &mut rng)).unwrap_err();
    assert!(matches!(err, CameraError::TooFewKeypoints(5)), "{err}");
}

#[test]
fn camera_looking_away_fails_the_guard_box() {
    let spec = CourtSpec::default();
    // Faces away from the court, so the far corners are behind it.
    let away = CameraModel::look_at(
        &CourtPoint::new(0.0, -16.0, 9.0),
        &CourtPoint::new(0.0, -40.0, 0.0),
        1500.0,
        (1920, 1080),
    )
    .unwrap();
    assert!(matches!(
        away.check_guard_box(&spec),
        Err(CameraError::OutsideGuardBox(_))
    ));
    assert!(synthetic_camera().check_guard_box(&spec).is_ok());
}
