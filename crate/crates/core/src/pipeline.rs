//! End-to-end analysis: inputs in, [`MatchBundle`] out.

use rayon::prelude::*;
use thiserror::Error;

use crate::classify::{label_rally, shot_zones, tendency};
use crate::court::{mirror, solve_camera, CameraError, CameraModel, CourtSpec};
use crate::flight::{
    fit_shot, net_crossing, segment_hits, shot_speed, shot_window, simulate, FitPrior, FitResult,
    FlightError, TrajectorySample,
};
use crate::ingest::{RawMatch, RawRally, TrackSample};
use crate::model::{
    CoordinateFrame, Game, MatchBundle, PlayerId, Rally, Shot, ShotId, ShotLabel, Summaries,
    BUNDLE_SCHEMA_VERSION,
};
use crate::stats::{
    a_on_negative_y, all_summaries, canonicalize_sides, derive_games, ScoringRules, StatsError,
};

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeOptions {
    /// Fit flight trajectories. Without them shots carry no tendency or zones.
    pub fit: bool,
    /// Hold the terminal speed fixed instead of fitting it.
    pub terminal_velocity: Option<f64>,
    pub court: CourtSpec,
    pub rules: ScoringRules,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self {
            fit: true,
            terminal_velocity: None,
            court: CourtSpec::default(),
            rules: ScoringRules::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum AnalyzeError {
    #[error("invalid options: {0}")]
    InvalidOptions(String),
    #[error("camera calibration failed: {0}")]
    Camera(#[from] CameraError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

struct ShotFlight {
    fit: Option<FitResult>,
    n_visible: usize,
    trajectory: Vec<TrajectorySample>,
    warning: Option<String>,
}

/// Per-shot hit frames snapped onto the track, plus the frame each shot's
/// flight ends at (next hit or rally end).
fn shot_spans(
    rally: &RawRally,
    obs: &[TrackSample],
    camera: &CameraModel,
    fps: f64,
) -> Vec<(u64, u64)> {
    let provided: Vec<u64> = rally.shots.iter().map(|s| s.hit_frame).collect();
    let hits = segment_hits(obs, camera, fps, Some(&provided)).unwrap_or(provided);
    (0..hits.len())
        .map(|i| {
            (
                hits[i],
                hits.get(i + 1).copied().unwrap_or(rally.record.end_frame),
            )
        })
        .collect()
}

fn fly(
    raw: &RawMatch,
    rally: &RawRally,
    shot_index: usize,
    span: (u64, u64),
    camera: &CameraModel,
    opts: &AnalyzeOptions,
) -> ShotFlight {
    let fps = raw.manifest.fps;
    let obs = raw.track_window(rally.record.start_frame, rally.record.end_frame);
    let (hit, end) = span;
    let n_visible = shot_window(obs, hit, Some(end)).len();
    let record = &rally.shots[shot_index];
    let mut flight = ShotFlight {
        fit: None,
        n_visible,
        trajectory: Vec::new(),
        warning: None,
    };
    if !opts.fit {
        return flight;
    }
    let prior = FitPrior {
        hit_xy: raw
            .poses
            .as_ref()
            .and_then(|p| p.at(hit))
            .map(|f| f.player(record.hitter))
            .map(|p| (p.x, p.y)),
        terminal_velocity: opts.terminal_velocity,
    };
    let tag = format!("rally {} shot {}", record.rally_id, record.shot_index);
    match fit_shot(camera, obs, fps, hit, Some(end), &prior) {
        Ok(fit) => {
            if !fit.converged {
                flight.warning = Some(format!("{tag}: flight fit hit the iteration limit"));
            }
            match simulate(&fit.params, 1.0 / (4.0 * fps), end as f64 / fps) {
                Ok(t) => flight.trajectory = t,
                Err(e) => flight.warning = Some(format!("{tag}: {e}")),
            }
            flight.fit = Some(fit);
        }
        Err(e @ FlightError::TooFewObservations { .. }) => {
            flight.warning = Some(format!("{tag}: {e}"))
        }
        Err(e) => flight.warning = Some(format!("{tag}: flight fit failed: {e}")),
    }
    flight
}

/// Runs camera solve, per-shot flight fits (in parallel on the current rayon
/// pool), classification, scoring and side canonicalization.
pub fn analyze(raw: &RawMatch, opts: &AnalyzeOptions) -> Result<MatchBundle, AnalyzeError> {
    opts.court
        .validate()
        .map_err(AnalyzeError::InvalidOptions)?;
    if let Some(vt) = opts.terminal_velocity {
        if !(vt.is_finite() && vt > 0.0) {
            return Err(AnalyzeError::InvalidOptions(format!(
                "terminal velocity must be positive, got {vt}"
            )));
        }
    }
    let fps = raw.manifest.fps;
    let solve = solve_camera(&raw.calibration, &opts.court)?;
    let camera = solve.camera;
    let derived = derive_games(&raw.rally_records(), &opts.rules)?;
    let start = raw
        .manifest
        .negative_y_start
        .ok_or(StatsError::MissingSideSchedule)?;

    let mut warnings: Vec<String> = raw.warnings.iter().map(ToString::to_string).collect();
    warnings.extend(derived.warnings.iter().map(ToString::to_string));

    let spans: Vec<Vec<(u64, u64)>> = raw
        .rallies
        .iter()
        .map(|r| {
            let obs = raw.track_window(r.record.start_frame, r.record.end_frame);
            shot_spans(r, obs, &camera, fps)
        })
        .collect();
    let jobs: Vec<(usize, usize)> = raw
        .rallies
        .iter()
        .enumerate()
        .flat_map(|(ri, r)| (0..r.shots.len()).map(move |si| (ri, si)))
        .collect();
    let flights: Vec<ShotFlight> = jobs
        .par_iter()
        .map(|&(ri, si)| fly(raw, &raw.rallies[ri], si, spans[ri][si], &camera, opts))
        .collect();
    let mut flights = flights.into_iter();

    let mut games = Vec::with_capacity(derived.games.len());
    let mut raw_rallies = raw.rallies.iter();
    let mut next_id = 1u32;
    for g in &derived.games {
        let mut rallies = Vec::with_capacity(g.snapshots.len());
        for (pos, snap) in g.snapshots.iter().enumerate() {
            let raw_rally = raw_rallies.next().expect("one snapshot per rally");
            debug_assert_eq!(raw_rally.record.rally_id, snap.rally_id);
            let half = g.half_of(pos);
            let a_neg = a_on_negative_y(start == PlayerId::A, g.number, half, &opts.rules);

            let mut shots = Vec::with_capacity(raw_rally.shots.len());
            for record in &raw_rally.shots {
                let flight = flights.next().expect("one flight per shot");
                warnings.extend(flight.warning);
                let crossing = net_crossing(&flight.trajectory);
                let canonical: Vec<TrajectorySample> = if a_neg {
                    flight.trajectory.clone()
                } else {
                    flight
                        .trajectory
                        .iter()
                        .map(|s| TrajectorySample {
                            p: mirror(&s.p),
                            ..*s
                        })
                        .collect()
                };
                let zones = shot_zones(&canonical, &opts.court);
                shots.push(Shot {
                    id: ShotId(next_id),
                    record: *record,
                    n_visible: flight.n_visible,
                    speed: flight.fit.as_ref().map(|f| shot_speed(&f.params)),
                    fit: flight.fit,
                    tendency: crossing.as_ref().map(|c| tendency(&c.velocity)),
                    net_crossing: crossing,
                    trajectory: flight.trajectory,
                    label: ShotLabel::Normal,
                    from_zone: zones.map(|z| z.from),
                    to_zone: zones.map(|z| z.to),
                });
                next_id += 1;
            }

            let inputs: Vec<(PlayerId, _)> = shots
                .iter()
                .map(|s| (s.record.hitter, s.tendency))
                .collect();
            let labels = label_rally(&inputs, raw_rally.record.winner);
            for (shot, label) in shots.iter_mut().zip(labels.labels) {
                shot.label = label;
            }
            let degenerate = labels.degenerate.map(|d| d.to_string());
            if let Some(d) = &degenerate {
                warnings.push(format!(
                    "rally {}: labeled all Normal ({d})",
                    raw_rally.record.rally_id
                ));
            }
            rallies.push(Rally {
                record: raw_rally.record,
                game: g.number,
                half,
                score_after: snap.score_after,
                a_on_negative_y: a_neg,
                degenerate,
                shots,
            });
        }
        games.push(Game {
            number: g.number,
            final_score: g.score,
            winner: g.winner,
            finished: g.finished,
            half_boundary: g.half_boundary,
            rallies,
        });
    }

    let mut bundle = MatchBundle {
        schema_version: BUNDLE_SCHEMA_VERSION,
        match_id: raw
            .manifest
            .match_id
            .clone()
            .unwrap_or_else(|| "match".into()),
        manifest: raw.manifest.clone(),
        court: opts.court,
        camera,
        camera_rmse_px: solve.rmse_px,
        frame: CoordinateFrame::Physical,
        games,
        poses: raw
            .poses
            .as_ref()
            .map(|p| p.frames.clone())
            .unwrap_or_default(),
        summaries: Summaries::default(),
        warnings,
    };
    bundle = canonicalize_sides(&bundle)?;
    bundle.summaries = all_summaries(&bundle, &opts.rules);
    Ok(bundle)
}
