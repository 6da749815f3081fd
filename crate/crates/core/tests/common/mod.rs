//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use shuttlelab_core::flight::TrajectorySample;
use shuttlelab_core::ingest::{
    assemble, CalibrationInput, Keypoint, MatchManifest, Players, RawMatch,
};
use shuttlelab_core::model::CoordinateFrame;
use shuttlelab_core::pipeline::{analyze, AnalyzeOptions};
use shuttlelab_core::synth::{calibration_points, synthetic_camera};
use shuttlelab_core::{CourtPoint, MatchBundle, PlayerId, RallyRecord, ShotRecord, Velocity};

pub const RALLY_FRAMES: u64 = 150;

pub fn manifest(fps: f64) -> MatchManifest {
    MatchManifest {
        match_id: Some("fixture".into()),
        video_uri: "fixture.mp4".into(),
        fps,
        players: Players {
            a: "Ann".into(),
            b: "Bea".into(),
        },
        event: None,
        round: None,
        negative_y_start: Some(PlayerId::A),
    }
}

pub fn exact_calibration() -> CalibrationInput {
    let cam = synthetic_camera();
    CalibrationInput::Keypoints {
        points: calibration_points(&Default::default())
            .into_iter()
            .map(|p| Keypoint {
                court: p,
                pixel: cam.project(&p).unwrap(),
            })
            .collect(),
        image_size: None,
    }
}

/// A match with one rally per entry of `winners`; each rally is served by the
/// previous rally's winner and holds `shots` alternating hits, 150 frames
/// long with no shuttle track.
pub fn raw_match(winners: &[PlayerId], shots: u32) -> RawMatch {
    raw_match_with_counts(winners, &vec![shots; winners.len()])
}

/// Like [`raw_match`] with a shot count per rally (at most 11).
pub fn raw_match_with_counts(winners: &[PlayerId], counts: &[u32]) -> RawMatch {
    let mut rallies = Vec::new();
    let mut records = Vec::new();
    let mut server = PlayerId::A;
    for (i, &winner) in winners.iter().enumerate() {
        let id = i as u32 + 1;
        let start = i as u64 * RALLY_FRAMES;
        rallies.push(RallyRecord {
            rally_id: id,
            start_frame: start,
            end_frame: start + RALLY_FRAMES - 1,
            server,
            winner,
        });
        let mut hitter = server;
        for k in 0..counts[i] {
            records.push(ShotRecord {
                rally_id: id,
                shot_index: k,
                hit_frame: start + 10 + 12 * k as u64,
                hitter,
            });
            hitter = hitter.opponent();
        }
        server = winner;
    }
    assemble(
        manifest(30.0),
        rallies,
        records,
        Vec::new(),
        exact_calibration(),
        None,
    )
    .unwrap()
}

/// `raw_match` analyzed without flight fitting.
pub fn unfitted_bundle(winners: &[PlayerId], shots: u32) -> MatchBundle {
    let opts = AnalyzeOptions {
        fit: false,
        ..Default::default()
    };
    analyze(&raw_match(winners, shots), &opts).unwrap()
}

pub fn repeat(p: PlayerId, n: usize) -> Vec<PlayerId> {
    vec![p; n]
}

/// A straight trajectory from `from` to `to`, both on the court plane at 1 m.
pub fn line(from: (f64, f64), to: (f64, f64)) -> Vec<TrajectorySample> {
    (0..=10)
        .map(|i| {
            let s = i as f64 / 10.0;
            TrajectorySample {
                t: s,
                p: CourtPoint::new(
                    from.0 + s * (to.0 - from.0),
                    from.1 + s * (to.1 - from.1),
                    1.0 - s,
                ),
                v: Velocity::new(to.0 - from.0, to.1 - from.1, -1.0),
            }
        })
        .collect()
}

pub fn physical(mut b: MatchBundle) -> MatchBundle {
    b.frame = CoordinateFrame::Physical;
    b
}
