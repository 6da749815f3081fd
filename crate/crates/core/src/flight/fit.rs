use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use super::{
    drag_coefficient, positions_at, FlightError, FlightParams, DEFAULT_TERMINAL_VELOCITY,
    HIT_HEIGHT_RANGE, MAX_SPEED, TERMINAL_VELOCITY_RANGE,
};
use crate::court::CameraModel;
use crate::ingest::TrackSample;
use crate::lm::{self, LeastSquaresProblem, LmConfig};
use crate::model::{CourtPoint, Velocity};

pub const MIN_OBSERVATIONS: usize = 8;
const START_HEIGHT: f64 = 1.8;
const START_ELEVATIONS_DEG: [f64; 5] = [-20.0, 0.0, 20.0, 45.0, 65.0];
const SPEED_SCALES: [f64; 3] = [0.6, 1.0, 1.6];
/// Residual assigned to each pixel coordinate of a point behind the camera.
const BEHIND_CAMERA_RESIDUAL: f64 = 1e4;
/// Spread of the terminal-speed prior, m/s per pixel of residual. Pixels alone
/// leave a joint depth/terminal-speed scale ambiguity on short flights.
const TERMINAL_VELOCITY_PRIOR_SD: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: FlightParams,
    pub rmse_px: f64,
    pub n_obs: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    pub iterations: usize,
}

/// Optional knowledge about the hit used to seed the fit.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FitPrior {
    /// Hitter position on the court plane, e.g. from pose data.
    pub hit_xy: Option<(f64, f64)>,
    /// Hold the terminal speed at this value instead of fitting it.
    pub terminal_velocity: Option<f64>,
}

/// Reprojection least squares over `[p0, v0, vT]` for one shot.
pub struct FlightFitProblem<'a> {
    camera: &'a CameraModel,
    t0: f64,
    dt: f64,
    times: Vec<f64>,
    pixels: Vec<(f64, f64)>,
    fixed_vt: Option<f64>,
}

impl<'a> FlightFitProblem<'a> {
    pub fn new(camera: &'a CameraModel, obs: &[TrackSample], fps: f64, hit_frame: u64) -> Self {
        Self {
            camera,
            t0: hit_frame as f64 / fps,
            dt: 1.0 / (4.0 * fps),
            times: obs.iter().map(|s| s.frame as f64 / fps).collect(),
            pixels: obs.iter().map(|s| (s.u, s.v)).collect(),
            fixed_vt: None,
        }
    }

    pub fn with_fixed_terminal_velocity(mut self, vt: Option<f64>) -> Self {
        self.fixed_vt = vt;
        self
    }

    pub fn to_vector(p: &FlightParams) -> DVector<f64> {
        DVector::from_vec(vec![p.p0.x, p.p0.y, p.p0.z, p.v0.x, p.v0.y, p.v0.z, p.vt])
    }

    pub fn to_params(&self, x: &DVector<f64>) -> FlightParams {
        FlightParams {
            p0: CourtPoint::new(x[0], x[1], x[2]),
            v0: Velocity::new(x[3], x[4], x[5]),
            vt: x[6],
            t0: self.t0,
        }
    }

    pub fn sum_sq(&self, x: &DVector<f64>) -> f64 {
        self.residuals(x).norm_squared()
    }

    /// RMS reprojection error per observation, prior term excluded.
    pub fn reprojection_rmse(&self, x: &DVector<f64>) -> f64 {
        let r = self.residuals(x);
        let n = self.pixels.len();
        (r.rows(0, 2 * n).norm_squared() / n as f64).sqrt()
    }
}

impl LeastSquaresProblem for FlightFitProblem<'_> {
    fn residuals(&self, x: &DVector<f64>) -> DVector<f64> {
        let p0 = Vector3::new(x[0], x[1], x[2]);
        let v0 = Vector3::new(x[3], x[4], x[5]);
        let k = drag_coefficient(x[6]);
        let pos = positions_at(p0, v0, k, self.t0, &self.times, self.dt);
        let mut r = DVector::zeros(2 * pos.len() + 1);
        if self.fixed_vt.is_none() {
            r[2 * pos.len()] = (x[6] - DEFAULT_TERMINAL_VELOCITY) / TERMINAL_VELOCITY_PRIOR_SD;
        }
        for (i, (p, &(u, v))) in pos.iter().zip(&self.pixels).enumerate() {
            match self.camera.project_vector(p) {
                Some(px) => {
                    r[2 * i] = px.u - u;
                    r[2 * i + 1] = px.v - v;
                }
                None => {
                    r[2 * i] = BEHIND_CAMERA_RESIDUAL;
                    r[2 * i + 1] = BEHIND_CAMERA_RESIDUAL;
                }
            }
        }
        r
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut jac = lm::central_difference(|p| self.residuals(p), x, 1e-6);
        if self.fixed_vt.is_some() {
            jac.column_mut(6).fill(0.0);
        }
        jac
    }

    fn project(&self, x: &mut DVector<f64>) {
        x[2] = x[2].clamp(HIT_HEIGHT_RANGE.0, HIT_HEIGHT_RANGE.1);
        x[6] = match self.fixed_vt {
            Some(vt) => vt,
            None => x[6].clamp(TERMINAL_VELOCITY_RANGE.0, TERMINAL_VELOCITY_RANGE.1),
        };
        let speed = (x[3] * x[3] + x[4] * x[4] + x[5] * x[5]).sqrt();
        if speed > MAX_SPEED {
            let s = MAX_SPEED / speed;
            x[3] *= s;
            x[4] *= s;
            x[5] *= s;
        }
    }
}

pub(crate) fn fit_config() -> LmConfig {
    LmConfig {
        initial_lambda: 1e-3,
        lambda_up: 10.0,
        lambda_down: 10.0,
        gradient_tolerance: 1e-8,
        step_tolerance: 1e-10,
        max_iterations: 100,
    }
}

/// Visible observations between the hit and the next hit (both inclusive).
pub fn shot_window(
    obs: &[TrackSample],
    hit_frame: u64,
    next_hit_frame: Option<u64>,
) -> Vec<TrackSample> {
    let end = next_hit_frame.unwrap_or(u64::MAX);
    obs.iter()
        .filter(|s| s.visible && s.frame >= hit_frame && s.frame <= end)
        .copied()
        .collect()
}

/// The multi-start seeds: hit at 1.8 m above the hitter position (or the
/// first observation back-projected to that height), horizontal velocity from
/// the back-projected displacement of the first three observations, and one
/// seed per launch elevation in {-20°, 0°, 20°, 45°, 65°} at each of three
/// speed scales.
pub fn initial_guesses(
    camera: &CameraModel,
    window: &[TrackSample],
    fps: f64,
    hit_frame: u64,
    prior: &FitPrior,
) -> Vec<FlightParams> {
    let t0 = hit_frame as f64 / fps;
    let back = |s: &TrackSample| camera.pixel_to_plane(&s.pixel(), START_HEIGHT);
    let first = window.first().and_then(back);
    let (hx, hy) = prior
        .hit_xy
        .or(first.map(|p| (p.x, p.y)))
        .unwrap_or((0.0, 0.0));

    let mut vh = None;
    if let (Some(a), Some(s2)) = (first, window.get(2)) {
        if let Some(b) = back(s2) {
            let dt = (s2.frame - window[0].frame) as f64 / fps;
            let d = (b.x - a.x, b.y - a.y);
            if dt > 0.0 && d.0.hypot(d.1) / dt > 1.0 {
                vh = Some((d.0 / dt, d.1 / dt));
            }
        }
    }
    // Fall back to a moderate shot straight across the net.
    let (vx, vy) = vh.unwrap_or((0.0, if hy <= 0.0 { 10.0 } else { -10.0 }));
    let mut h = vx.hypot(vy);
    if h > MAX_SPEED * 0.9 {
        h = MAX_SPEED * 0.9;
    }
    let (ux, uy) = (vx / vx.hypot(vy), vy / vx.hypot(vy));

    let mut seeds = Vec::with_capacity(START_ELEVATIONS_DEG.len() * SPEED_SCALES.len());
    for scale in SPEED_SCALES {
        let h = (h * scale).min(MAX_SPEED * 0.9);
        for deg in START_ELEVATIONS_DEG {
            let e = deg.to_radians();
            seeds.push(FlightParams {
                p0: CourtPoint::new(hx, hy, START_HEIGHT),
                v0: Velocity::new(ux * h, uy * h, h * e.tan()),
                vt: prior.terminal_velocity.unwrap_or(DEFAULT_TERMINAL_VELOCITY),
                t0,
            });
        }
    }
    seeds
}

/// Fits the drag flight model to the visible observations of one shot by
/// minimizing total squared reprojection error over `(p0, v0, vT)` with
/// Levenberg–Marquardt from several seeds, returning the best.
///
/// A fit that exhausts its iteration budget is still returned, with
/// `converged = false`.
pub fn fit_shot(
    camera: &CameraModel,
    obs: &[TrackSample],
    fps: f64,
    hit_frame: u64,
    next_hit_frame: Option<u64>,
    prior: &FitPrior,
) -> Result<FitResult, FlightError> {
    let window = shot_window(obs, hit_frame, next_hit_frame);
    if window.len() < MIN_OBSERVATIONS {
        return Err(FlightError::TooFewObservations {
            needed: MIN_OBSERVATIONS,
            found: window.len(),
        });
    }
    let problem = FlightFitProblem::new(camera, &window, fps, hit_frame)
        .with_fixed_terminal_velocity(prior.terminal_velocity);
    let cfg = fit_config();

    let best = initial_guesses(camera, &window, fps, hit_frame, prior)
        .iter()
        .map(|g| lm::minimize(&problem, FlightFitProblem::to_vector(g), &cfg))
        .min_by(|a, b| a.sum_sq.total_cmp(&b.sum_sq))
        .expect("at least one seed");

    Ok(FitResult {
        params: problem.to_params(&best.params),
        rmse_px: problem.reprojection_rmse(&best.params),
        n_obs: window.len(),
        converged: best.converged(),
        gradient_norm: best.gradient_norm,
        iterations: best.iterations,
    })
}
