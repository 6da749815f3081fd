//! Physically simulated match fixtures with ground truth.
//!
//! Rally winners are drawn at random and scored; every shot is a drag-model
//! flight from the previous interception point to a random target in the
//! opposite half, integrated with the same RK4 scheme the analyzer uses. The
//! flights are projected through a synthetic broadcast camera with Gaussian
//! pixel noise and sparse occlusion. The truth sidecar records the true flight
//! parameters and the labels the outcome rule assigns to the true tendencies.

use std::fs;
use std::io;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{label_rally, shot_zones, tendency};
use crate::court::{mirror, CameraModel, CourtSpec, PixelPoint};
use crate::flight::{
    net_crossing, shot_speed, simulate, FlightParams, TrajectorySample, DEFAULT_TERMINAL_VELOCITY,
};
use crate::ingest::{
    self, AssembleError, CalibrationInput, Keypoint, MatchManifest, PlayerPose, Players, PoseFrame,
    PoseInput, RawMatch, TrackSample,
};
use crate::model::{
    CourtPoint, GameHalf, PlayerId, RallyRecord, ShotLabel, ShotRecord, Tendency, Velocity, Zone,
};
use crate::stats::{a_on_negative_y, derive_games, ScoringRules};

pub const TRUTH_FILE: &str = "truth.json";

/// Fewest frames between a hit and the next hit (or landing).
const MIN_FLIGHT_FRAMES: u64 = 12;
/// Fewest visible samples kept per shot when occluding.
const MIN_VISIBLE: usize = 10;
const PLAN_ATTEMPTS: usize = 400;
const RALLY_ATTEMPTS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub rallies: usize,
    pub fps: f64,
    /// Standard deviation of the pixel noise on track samples.
    pub noise_px: f64,
    /// Standard deviation of the pixel noise on calibration keypoints.
    pub calibration_noise_px: f64,
    /// Probability that an in-flight sample is occluded.
    pub occlusion: f64,
    pub poses: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            rallies: 30,
            fps: 30.0,
            noise_px: 1.0,
            calibration_noise_px: 0.5,
            occlusion: 0.03,
            poses: true,
        }
    }
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("at least one rally is required")]
    NoRallies,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("could not plan a playable rally {0}")]
    Unplayable(u32),
    #[error(transparent)]
    Assemble(#[from] AssembleError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthShot {
    pub rally_id: u32,
    pub shot_index: u32,
    pub hit_frame: u64,
    /// Next hit frame, or the landing frame for the last shot.
    pub end_frame: u64,
    pub hitter: PlayerId,
    /// Physical frame.
    pub params: FlightParams,
    pub speed: f64,
    pub tendency: Option<Tendency>,
    pub label: ShotLabel,
    pub from_zone: Option<Zone>,
    pub to_zone: Option<Zone>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRally {
    pub rally_id: u32,
    pub game: u32,
    pub half: GameHalf,
    pub winner: PlayerId,
    pub a_on_negative_y: bool,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub match_id: String,
    pub config: SynthConfig,
    pub camera: CameraModel,
    pub rallies: Vec<TruthRally>,
    pub shots: Vec<TruthShot>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthMatch {
    pub manifest: MatchManifest,
    pub rallies: Vec<RallyRecord>,
    pub shots: Vec<ShotRecord>,
    pub track: Vec<TrackSample>,
    pub calibration: CalibrationInput,
    pub poses: Option<PoseInput>,
    pub truth: SynthTruth,
}

impl SynthMatch {
    /// The fixture as the analyzer would load it from disk.
    pub fn raw(&self) -> Result<RawMatch, AssembleError> {
        ingest::assemble(
            self.manifest.clone(),
            self.rallies.clone(),
            self.shots.clone(),
            self.track.clone(),
            self.calibration.clone(),
            self.poses.clone(),
        )
    }

    /// Writes the input files and the truth sidecar into `dir`.
    pub fn write(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(
            dir.join(ingest::MANIFEST_FILE),
            pretty(&self.manifest)? + "\n",
        )?;
        let csv_err = |e: csv::Error| io::Error::other(e.to_string());
        ingest::write_rallies(
            fs::File::create(dir.join(ingest::RALLIES_FILE))?,
            &self.rallies,
        )
        .map_err(csv_err)?;
        ingest::write_shots(fs::File::create(dir.join(ingest::SHOTS_FILE))?, &self.shots)
            .map_err(csv_err)?;
        ingest::write_track(fs::File::create(dir.join(ingest::TRACK_FILE))?, &self.track)
            .map_err(csv_err)?;
        let cal = serde_json::to_string_pretty(&ingest::calibration_to_json(&self.calibration))
            .map_err(io::Error::other)?;
        fs::write(dir.join(ingest::CALIBRATION_FILE), cal + "\n")?;
        if let Some(poses) = &self.poses {
            let mut text = String::new();
            for f in &poses.frames {
                text += &serde_json::to_string(f).map_err(io::Error::other)?;
                text.push('\n');
            }
            fs::write(dir.join(ingest::POSES_FILE), text)?;
        }
        fs::write(dir.join(TRUTH_FILE), pretty(&self.truth)? + "\n")?;
        Ok(())
    }
}

fn pretty<T: Serialize>(v: &T) -> io::Result<String> {
    serde_json::to_string_pretty(v).map_err(io::Error::other)
}

fn gaussian(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    match Normal::new(0.0, sigma) {
        Ok(n) if sigma > 0.0 => n.sample(rng),
        _ => 0.0,
    }
}

pub fn read_truth(dir: &Path) -> io::Result<SynthTruth> {
    let text = fs::read_to_string(dir.join(TRUTH_FILE))?;
    serde_json::from_str(&text).map_err(io::Error::other)
}

/// Elevated broadcast-style view from behind the negative-`y` baseline.
pub fn synthetic_camera() -> CameraModel {
    CameraModel::look_at(
        &CourtPoint::new(0.0, -16.0, 9.0),
        &CourtPoint::new(0.0, 1.0, 0.0),
        1500.0,
        (1920, 1080),
    )
    .expect("fixed camera is valid")
}

/// Twelve line intersections and post tops used for calibration: the four
/// outer corners, both ends of each short service line, both ends of the
/// centre line and the two net-post tops.
pub fn calibration_points(spec: &CourtSpec) -> Vec<CourtPoint> {
    let (hw, hl) = (spec.half_width(), spec.half_length());
    let short_service = 1.98;
    vec![
        CourtPoint::new(-hw, -hl, 0.0),
        CourtPoint::new(hw, -hl, 0.0),
        CourtPoint::new(hw, hl, 0.0),
        CourtPoint::new(-hw, hl, 0.0),
        CourtPoint::new(-hw, -short_service, 0.0),
        CourtPoint::new(hw, -short_service, 0.0),
        CourtPoint::new(-hw, short_service, 0.0),
        CourtPoint::new(hw, short_service, 0.0),
        CourtPoint::new(0.0, -hl, 0.0),
        CourtPoint::new(0.0, hl, 0.0),
        CourtPoint::new(-hw, 0.0, spec.net_height_posts),
        CourtPoint::new(hw, 0.0, spec.net_height_posts),
    ]
}

/// A planned flight: parameters and the trajectory sampled at `dt` until it
/// reaches the ground.
#[derive(Debug, Clone)]
struct Flight {
    params: FlightParams,
    samples: Vec<TrajectorySample>,
}

const SUBSTEPS: usize = 4;

fn horizontal_range(
    p0: &CourtPoint,
    dir: (f64, f64),
    speed: f64,
    elev: f64,
    dt: f64,
) -> Option<f64> {
    let params = launch(p0, dir, speed, elev, 0.0);
    let s = simulate(&params, dt, 10.0).ok()?;
    let last = s.last()?;
    (last.p.z <= 0.0).then(|| ((last.p.x - p0.x).powi(2) + (last.p.y - p0.y).powi(2)).sqrt())
}

fn launch(p0: &CourtPoint, dir: (f64, f64), speed: f64, elev: f64, t0: f64) -> FlightParams {
    let h = speed * elev.cos();
    FlightParams {
        p0: *p0,
        v0: Velocity::new(dir.0 * h, dir.1 * h, speed * elev.sin()),
        vt: DEFAULT_TERMINAL_VELOCITY,
        t0,
    }
}

/// Speed that lands the shuttle `distance` metres away, by bisection.
fn solve_speed(p0: &CourtPoint, dir: (f64, f64), elev: f64, distance: f64, dt: f64) -> Option<f64> {
    let (mut lo, mut hi) = (2.0, 100.0);
    let r_lo = horizontal_range(p0, dir, lo, elev, dt)?;
    let r_hi = horizontal_range(p0, dir, hi, elev, dt)?;
    if !(r_lo < distance && distance < r_hi) {
        return None;
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if horizontal_range(p0, dir, mid, elev, dt)? < distance {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Random shot from `p0` by the player on the `side` (sign of `y`) end into
/// the opposite half, clearing the net.
fn plan_shot(
    rng: &mut ChaCha8Rng,
    p0: &CourtPoint,
    side: f64,
    t0: f64,
    fps: f64,
    spec: &CourtSpec,
) -> Option<Flight> {
    let dt = 1.0 / (SUBSTEPS as f64 * fps);
    let target = (
        rng.random_range(-2.6..2.6),
        -side * rng.random_range(1.2..spec.half_length() - 0.3),
    );
    let elev_deg: f64 = if p0.z > 2.0 {
        rng.random_range(-20.0..50.0)
    } else {
        rng.random_range(0.0..60.0)
    };
    let (dx, dy) = (target.0 - p0.x, target.1 - p0.y);
    let distance = dx.hypot(dy);
    let dir = (dx / distance, dy / distance);
    let speed = solve_speed(p0, dir, elev_deg.to_radians(), distance, dt)?;
    let params = launch(p0, dir, speed, elev_deg.to_radians(), t0);
    let samples = simulate(&params, dt, t0 + 10.0).ok()?;
    let crossing = net_crossing(&samples)?;
    if crossing.point.z < spec.net_height_posts + 0.05 {
        return None;
    }
    if ((samples.len() - 1) / SUBSTEPS) < MIN_FLIGHT_FRAMES as usize {
        return None;
    }
    Some(Flight { params, samples })
}

/// Frame offset (from the hit) at which the receiver intercepts the flight:
/// the first frame past the net with the shuttle at or below `height` and at
/// least a metre from the net.
fn intercept(flight: &Flight, side: f64, height: f64) -> Option<u64> {
    let s = &flight.samples;
    (MIN_FLIGHT_FRAMES as usize..)
        .map(|k| k * SUBSTEPS)
        .take_while(|&i| i < s.len())
        .find(|&i| {
            let p = &s[i].p;
            p.y * side < -1.0 && p.z <= height
        })
        .filter(|&i| s[i].p.z >= 0.3)
        .map(|i| (i / SUBSTEPS) as u64)
}

struct PlannedShot {
    hitter: PlayerId,
    hit_frame: u64,
    end_frame: u64,
    flight: Flight,
}

fn plan_rally(
    rng: &mut ChaCha8Rng,
    server: PlayerId,
    n_shots: usize,
    first_hit: u64,
    a_neg: bool,
    fps: f64,
    spec: &CourtSpec,
) -> Option<Vec<PlannedShot>> {
    let side_of = |p: PlayerId| {
        if (p == PlayerId::A) == a_neg {
            -1.0
        } else {
            1.0
        }
    };
    let serve_side = side_of(server);
    let mut p0 = CourtPoint::new(
        rng.random_range(-1.5..1.5),
        serve_side * rng.random_range(2.2..3.6),
        rng.random_range(0.9..1.2),
    );
    let mut hitter = server;
    let mut hit_frame = first_hit;
    let mut shots = Vec::with_capacity(n_shots);
    for k in 0..n_shots {
        let last = k + 1 == n_shots;
        let side = side_of(hitter);
        let t0 = hit_frame as f64 / fps;
        let mut planned = None;
        for _ in 0..PLAN_ATTEMPTS {
            let Some(flight) = plan_shot(rng, &p0, side, t0, fps, spec) else {
                continue;
            };
            if last {
                let frames = ((flight.samples.len() - 1) / SUBSTEPS) as u64;
                planned = Some((flight, frames));
                break;
            }
            let height = rng.random_range(0.5..2.6);
            if let Some(frames) = intercept(&flight, side, height) {
                planned = Some((flight, frames));
                break;
            }
        }
        let (flight, frames) = planned?;
        let end_frame = hit_frame + frames;
        let next_p0 = flight.samples[frames as usize * SUBSTEPS].p;
        shots.push(PlannedShot {
            hitter,
            hit_frame,
            end_frame,
            flight,
        });
        p0 = next_p0;
        hitter = hitter.opponent();
        hit_frame = end_frame;
    }
    Some(shots)
}

/// Random winners, truncated once the match is decided.
fn draw_winners(rng: &mut ChaCha8Rng, n: usize, rules: &ScoringRules) -> Vec<PlayerId> {
    let mut winners = Vec::with_capacity(n);
    let mut score = crate::model::Score::default();
    let mut games = crate::model::Score::default();
    while winners.len() < n {
        let w = if rng.random_bool(0.5) {
            PlayerId::A
        } else {
            PlayerId::B
        };
        winners.push(w);
        score = score.incremented(w);
        if let Some(gw) = rules.game_winner(score) {
            games = games.incremented(gw);
            score = Default::default();
            if games.of(gw) >= rules.games_to_win() {
                break;
            }
        }
    }
    winners
}

/// Generates a full fixture. Identical configurations give identical output.
pub fn generate(cfg: &SynthConfig) -> Result<SynthMatch, SynthError> {
    if cfg.rallies == 0 {
        return Err(SynthError::NoRallies);
    }
    if !(cfg.fps > 0.0 && cfg.fps.is_finite()) {
        return Err(SynthError::InvalidConfig(format!(
            "fps must be positive, got {}",
            cfg.fps
        )));
    }
    if !(cfg.noise_px >= 0.0
        && cfg.calibration_noise_px >= 0.0
        && (0.0..1.0).contains(&cfg.occlusion))
    {
        return Err(SynthError::InvalidConfig(
            "noise must be non-negative and occlusion in [0, 1)".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let spec = CourtSpec::default();
    let rules = ScoringRules::default();
    let camera = synthetic_camera();
    let (width, height) = (camera.image_width as f64, camera.image_height as f64);

    let match_id = format!("synth-{}", cfg.seed);
    let negative_y_start = if rng.random_bool(0.5) {
        PlayerId::A
    } else {
        PlayerId::B
    };
    let winners = draw_winners(&mut rng, cfg.rallies, &rules);

    let dummy: Vec<RallyRecord> = winners
        .iter()
        .enumerate()
        .map(|(i, &w)| RallyRecord {
            rally_id: i as u32 + 1,
            start_frame: 2 * i as u64,
            end_frame: 2 * i as u64 + 1,
            server: PlayerId::A,
            winner: w,
        })
        .collect();
    let derived = derive_games(&dummy, &rules).expect("winners stop at match end");
    let placement: Vec<(u32, GameHalf)> = derived
        .games
        .iter()
        .flat_map(|g| (0..g.snapshots.len()).map(move |i| (g.number, g.half_of(i))))
        .collect();

    let mut rallies = Vec::new();
    let mut shots = Vec::new();
    let mut track = Vec::new();
    let mut pose_frames = Vec::new();
    let mut truth_rallies = Vec::new();
    let mut truth_shots = Vec::new();
    let mut server = PlayerId::A;
    let mut cursor: u64 = 30;

    for (i, &winner) in winners.iter().enumerate() {
        let rally_id = i as u32 + 1;
        let (game, half) = placement[i];
        let a_neg = a_on_negative_y(negative_y_start == PlayerId::A, game, half, &rules);
        let start_frame = cursor;
        let first_hit = start_frame + rng.random_range(15..40);
        let mut planned = None;
        for _ in 0..RALLY_ATTEMPTS {
            let n_shots = if rng.random_bool(0.04) {
                1
            } else {
                rng.random_range(2..=18)
            };
            if let Some(p) = plan_rally(&mut rng, server, n_shots, first_hit, a_neg, cfg.fps, &spec)
            {
                planned = Some(p);
                break;
            }
        }
        let planned = planned.ok_or(SynthError::Unplayable(rally_id))?;
        let landing = planned.last().expect("at least one shot").end_frame;
        let end_frame = landing + rng.random_range(5..20);

        // Track: invisible before the serve and after landing.
        let hit_frames: Vec<u64> = planned.iter().map(|s| s.hit_frame).collect();
        let mut rows: Vec<(TrackSample, bool)> = Vec::new();
        for f in start_frame..=end_frame {
            let active = planned.iter().rev().find(|s| s.hit_frame <= f);
            let pos = active.and_then(|s| {
                s.flight
                    .samples
                    .get(((f - s.hit_frame) as usize) * SUBSTEPS)
            });
            let px = pos.and_then(|p| camera.project(&p.p).ok()).map(|px| {
                PixelPoint::new(
                    px.u + gaussian(&mut rng, cfg.noise_px),
                    px.v + gaussian(&mut rng, cfg.noise_px),
                )
            });
            let occluded = !hit_frames.contains(&f) && rng.random_bool(cfg.occlusion);
            let sample = match px {
                Some(px) if (0.0..width).contains(&px.u) && (0.0..height).contains(&px.v) => {
                    TrackSample {
                        frame: f,
                        u: round3(px.u),
                        v: round3(px.v),
                        visible: true,
                    }
                }
                _ => TrackSample {
                    frame: f,
                    u: 0.0,
                    v: 0.0,
                    visible: false,
                },
            };
            rows.push((sample, occluded));
        }
        for s in &planned {
            let window = rows
                .iter()
                .filter(|(r, _)| r.visible && r.frame >= s.hit_frame && r.frame <= s.end_frame);
            if window.clone().filter(|(_, occ)| !occ).count() < MIN_VISIBLE {
                for (r, occ) in rows.iter_mut() {
                    if r.frame >= s.hit_frame && r.frame <= s.end_frame {
                        *occ = false;
                    }
                }
            }
        }
        track.extend(rows.into_iter().map(|(mut r, occ)| {
            if occ {
                r.visible = false;
                r.u = 0.0;
                r.v = 0.0;
            }
            r
        }));

        // Truth per shot, using the same trajectory span the analyzer would.
        let mut truth_inputs = Vec::new();
        let first_truth = truth_shots.len();
        for (k, s) in planned.iter().enumerate() {
            let dt = 1.0 / (SUBSTEPS as f64 * cfg.fps);
            let traj =
                simulate(&s.flight.params, dt, s.end_frame as f64 / cfg.fps).unwrap_or_default();
            let tend = net_crossing(&traj).map(|c| tendency(&c.velocity));
            let canonical: Vec<TrajectorySample> = if a_neg {
                traj
            } else {
                traj.iter()
                    .map(|t| TrajectorySample {
                        p: mirror(&t.p),
                        ..*t
                    })
                    .collect()
            };
            let zones = shot_zones(&canonical, &spec);
            truth_inputs.push((s.hitter, tend));
            shots.push(ShotRecord {
                rally_id,
                shot_index: k as u32,
                hit_frame: s.hit_frame,
                hitter: s.hitter,
            });
            truth_shots.push(TruthShot {
                rally_id,
                shot_index: k as u32,
                hit_frame: s.hit_frame,
                end_frame: s.end_frame,
                hitter: s.hitter,
                params: s.flight.params,
                speed: shot_speed(&s.flight.params),
                tendency: tend,
                label: ShotLabel::Normal,
                from_zone: zones.map(|z| z.from),
                to_zone: zones.map(|z| z.to),
            });
            if cfg.poses {
                let here = s.flight.params.p0;
                let there = planned
                    .get(k + 1)
                    .map(|n| n.flight.params.p0)
                    .unwrap_or(CourtPoint::new(0.0, -here.y.signum() * 3.0, 0.0));
                let pose = |p: &CourtPoint, rng: &mut ChaCha8Rng| PlayerPose {
                    x: round3(p.x + rng.random_range(-0.1..0.1)),
                    y: round3(p.y + rng.random_range(-0.1..0.1)),
                    joints: None,
                };
                let (hp, op) = (pose(&here, &mut rng), pose(&there, &mut rng));
                let (a, b) = if s.hitter == PlayerId::A {
                    (hp, op)
                } else {
                    (op, hp)
                };
                pose_frames.push(PoseFrame {
                    frame: s.hit_frame,
                    a,
                    b,
                });
            }
        }
        let labels = label_rally(&truth_inputs, winner);
        for (t, l) in truth_shots[first_truth..].iter_mut().zip(&labels.labels) {
            t.label = *l;
        }

        rallies.push(RallyRecord {
            rally_id,
            start_frame,
            end_frame,
            server,
            winner,
        });
        truth_rallies.push(TruthRally {
            rally_id,
            game,
            half,
            winner,
            a_on_negative_y: a_neg,
            degenerate: labels.degenerate.is_some(),
        });
        server = winner;
        cursor = end_frame + rng.random_range(90..240);
    }

    let calibration = CalibrationInput::Keypoints {
        points: calibration_points(&spec)
            .into_iter()
            .map(|c| {
                let px = camera.project(&c).expect("calibration points are in view");
                Keypoint {
                    court: c,
                    pixel: PixelPoint::new(
                        round3(px.u + gaussian(&mut rng, cfg.calibration_noise_px)),
                        round3(px.v + gaussian(&mut rng, cfg.calibration_noise_px)),
                    ),
                }
            })
            .collect(),
        image_size: Some((camera.image_width, camera.image_height)),
    };

    Ok(SynthMatch {
        manifest: MatchManifest {
            match_id: Some(match_id.clone()),
            video_uri: format!("{match_id}.mp4"),
            fps: cfg.fps,
            players: Players {
                a: "Player A".into(),
                b: "Player B".into(),
            },
            event: Some("Synthetic Open".into()),
            round: None,
            negative_y_start: Some(negative_y_start),
        },
        rallies,
        shots,
        track,
        calibration,
        poses: cfg.poses.then_some(PoseInput {
            frames: pose_frames,
        }),
        truth: SynthTruth {
            match_id,
            config: cfg.clone(),
            camera,
            rallies: truth_rallies,
            shots: truth_shots,
        },
    })
}

/// Three decimals is well below the pixel noise and keeps files compact.
fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}
