//! Shuttlecock flight physics.
//!
//! The shuttle is a point mass under gravity and quadratic drag:
//!
//! ```text
//! dv/dt = -g·ẑ - (g / vT²)·|v|·v,   dp/dt = v
//! ```
//!
//! where `vT` is the terminal speed. [`simulate`] integrates this with classical
//! RK4, [`fit_shot`] recovers `(p0, v0, vT)` from a monocular pixel track and
//! [`segment_hits`] splits a rally track into shots.

mod fit;
mod segment;

pub use fit::{
    fit_shot, initial_guesses, shot_window, FitPrior, FitResult, FlightFitProblem, MIN_OBSERVATIONS,
};
pub use segment::segment_hits;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CourtPoint, NetCrossing, Velocity};

pub const GRAVITY: f64 = 9.81;
pub const DEFAULT_TERMINAL_VELOCITY: f64 = 6.8;
pub const TERMINAL_VELOCITY_RANGE: (f64, f64) = (4.0, 12.0);
pub const HIT_HEIGHT_RANGE: (f64, f64) = (0.3, 3.5);
pub const MAX_SPEED: f64 = 120.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlightError {
    #[error("non-physical flight parameters: {0}")]
    NonPhysicalParams(String),
    #[error("integration step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("need at least {needed} visible observations, got {found}")]
    TooFewObservations { needed: usize, found: usize },
    #[error("no hits detected in track")]
    NoHitsDetected,
}

/// A shot's flight: hit position, launch velocity, terminal speed and hit time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlightParams {
    pub p0: CourtPoint,
    pub v0: Velocity,
    pub vt: f64,
    pub t0: f64,
}

impl FlightParams {
    /// Checks the plausibility bounds. Terminal speeds above the fitted range
    /// are allowed so drag can be switched off with a very large `vt`.
    pub fn validate(&self) -> Result<(), FlightError> {
        let err = |m: String| Err(FlightError::NonPhysicalParams(m));
        if !(self.p0.is_finite()
            && self.v0.to_vector().iter().all(|v| v.is_finite())
            && self.t0.is_finite())
        {
            return err("non-finite component".into());
        }
        if !(HIT_HEIGHT_RANGE.0..=HIT_HEIGHT_RANGE.1).contains(&self.p0.z) {
            return err(format!(
                "hit height {} outside {:?}",
                self.p0.z, HIT_HEIGHT_RANGE
            ));
        }
        let speed = self.v0.norm();
        if speed > MAX_SPEED {
            return err(format!("launch speed {speed} above {MAX_SPEED}"));
        }
        if self.vt.is_nan() || self.vt < TERMINAL_VELOCITY_RANGE.0 {
            return err(format!(
                "terminal velocity {} below {}",
                self.vt, TERMINAL_VELOCITY_RANGE.0
            ));
        }
        Ok(())
    }

    fn drag_coefficient(&self) -> f64 {
        drag_coefficient(self.vt)
    }
}

pub(crate) fn drag_coefficient(vt: f64) -> f64 {
    if vt.is_infinite() {
        0.0
    } else {
        GRAVITY / (vt * vt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub p: CourtPoint,
    pub v: Velocity,
}

#[inline]
fn acceleration(v: &Vector3<f64>, k: f64) -> Vector3<f64> {
    Vector3::new(0.0, 0.0, -GRAVITY) - v * (k * v.norm())
}

/// One classical RK4 step of the drag ODE.
#[inline]
pub(crate) fn rk4_step(
    p: &Vector3<f64>,
    v: &Vector3<f64>,
    dt: f64,
    k: f64,
) -> (Vector3<f64>, Vector3<f64>) {
    let a1 = acceleration(v, k);
    let v2 = v + a1 * (dt / 2.0);
    let a2 = acceleration(&v2, k);
    let v3 = v + a2 * (dt / 2.0);
    let a3 = acceleration(&v3, k);
    let v4 = v + a3 * dt;
    let a4 = acceleration(&v4, k);
    let p_next = p + (v + v2 * 2.0 + v3 * 2.0 + v4) * (dt / 6.0);
    let v_next = v + (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (dt / 6.0);
    (p_next, v_next)
}

/// Integrates the flight from `params.t0` with step `dt` until `t_end` or the
/// first sample at or below the ground, which is included.
pub fn simulate(
    params: &FlightParams,
    dt: f64,
    t_end: f64,
) -> Result<Vec<TrajectorySample>, FlightError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(FlightError::InvalidStep(dt));
    }
    params.validate()?;
    let k = params.drag_coefficient();
    let mut p = params.p0.to_vector();
    let mut v = params.v0.to_vector();
    let mut out = Vec::new();
    let mut i: u64 = 0;
    loop {
        let t = params.t0 + i as f64 * dt;
        out.push(TrajectorySample {
            t,
            p: CourtPoint::from_vector(&p),
            v: Velocity::from_vector(&v),
        });
        if (i > 0 && p.z <= 0.0) || t >= t_end - dt * 1e-9 {
            break;
        }
        (p, v) = rk4_step(&p, &v, dt, k);
        i += 1;
    }
    Ok(out)
}

/// Positions at the given ascending times (all `>= t0`), integrating on a
/// grid of step `dt` and continuing below the ground. Used by the fitter,
/// whose trial parameters need not be physical.
pub(crate) fn positions_at(
    p0: Vector3<f64>,
    v0: Vector3<f64>,
    k: f64,
    t0: f64,
    times: &[f64],
    dt: f64,
) -> Vec<Vector3<f64>> {
    let (mut p, mut v) = (p0, v0);
    let mut t = t0;
    let mut steps: u64 = 0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        loop {
            let next = t0 + (steps + 1) as f64 * dt;
            if next > target + dt * 1e-6 {
                break;
            }
            (p, v) = rk4_step(&p, &v, dt, k);
            steps += 1;
            t = next;
        }
        let rem = target - t;
        if rem > dt * 1e-6 {
            out.push(rk4_step(&p, &v, rem, k).0);
        } else {
            out.push(p);
        }
    }
    out
}

/// First crossing of the net plane `y = 0`, linearly interpolated in time.
/// A sample lying exactly on `y = 0` counts as the crossing.
pub fn net_crossing(samples: &[TrajectorySample]) -> Option<NetCrossing> {
    let first = samples.first()?;
    if first.p.y == 0.0 {
        return Some(NetCrossing {
            t: first.t,
            point: first.p,
            velocity: first.v,
        });
    }
    for w in samples.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if b.p.y == 0.0 {
            return Some(NetCrossing {
                t: b.t,
                point: b.p,
                velocity: b.v,
            });
        }
        if a.p.y.signum() != b.p.y.signum() {
            let s = a.p.y / (a.p.y - b.p.y);
            let lerp = |x: f64, y: f64| x + s * (y - x);
            return Some(NetCrossing {
                t: lerp(a.t, b.t),
                point: CourtPoint::new(lerp(a.p.x, b.p.x), 0.0, lerp(a.p.z, b.p.z)),
                velocity: Velocity::new(lerp(a.v.x, b.v.x), lerp(a.v.y, b.v.y), lerp(a.v.z, b.v.z)),
            });
        }
    }
    None
}

/// Launch speed `|v0|`, m/s.
pub fn shot_speed(params: &FlightParams) -> f64 {
    params.v0.norm()
}

/// Mechanical energy per unit mass, `½|v|² + g·z`.
pub fn specific_energy(s: &TrajectorySample) -> f64 {
    0.5 * s.v.to_vector().norm_squared() + GRAVITY * s.p.z
}
