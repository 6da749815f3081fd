//! Core domain types and bundle-level validation.
//!
//! Court frame: origin at the court center on the ground under the net, `x`
//! across the court width, `y` along the court length, `z` up, all in meters.
//! Player A canonically occupies the negative-`y` half.

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::court::{CameraModel, CourtSpec};
use crate::flight::{FitResult, TrajectorySample};
use crate::ingest::{MatchManifest, PoseFrame};
use crate::stats::{MatchSummary, RallySummary, ScopeSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PlayerId {
    A,
    B,
}

impl PlayerId {
    pub const BOTH: [PlayerId; 2] = [PlayerId::A, PlayerId::B];

    pub fn opponent(self) -> PlayerId {
        match self {
            PlayerId::A => PlayerId::B,
            PlayerId::B => PlayerId::A,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PlayerId::A => "A",
            PlayerId::B => "B",
        }
    }
}

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PlayerId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "A" | "a" => Ok(PlayerId::A),
            "B" | "b" => Ok(PlayerId::B),
            other => Err(format!("unknown player tag {other:?} (expected A or B)")),
        }
    }
}

/// A position in the court frame, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CourtPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl CourtPoint {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn ground(x: f64, y: f64) -> Self {
        Self { x, y, z: 0.0 }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// A velocity in the court frame, m/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Velocity {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Velocity {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    pub fn norm(&self) -> f64 {
        self.to_vector().norm()
    }
}

/// One annotated rally. Frames are inclusive indices into the match video.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RallyRecord {
    pub rally_id: u32,
    pub start_frame: u64,
    pub end_frame: u64,
    pub server: PlayerId,
    pub winner: PlayerId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub rally_id: u32,
    pub shot_index: u32,
    pub hit_frame: u64,
    pub hitter: PlayerId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShotLabel {
    Winner,
    Error,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tendency {
    Offensive,
    Defensive,
}

/// Left/right as seen by the player standing in that half, facing the net.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Depth {
    Front,
    Middle,
    Back,
}

/// One of the six player-relative areas of a half court.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Zone {
    pub half: PlayerId,
    pub depth: Depth,
    pub side: Side,
}

impl Zone {
    pub const fn new(half: PlayerId, depth: Depth, side: Side) -> Self {
        Self { half, depth, side }
    }

    /// All twelve zones in display order: half A then B, front to back, left then right.
    pub fn all() -> [Zone; 12] {
        let mut out = [Zone::new(PlayerId::A, Depth::Front, Side::Left); 12];
        let mut i = 0;
        for half in PlayerId::BOTH {
            for depth in [Depth::Front, Depth::Middle, Depth::Back] {
                for side in [Side::Left, Side::Right] {
                    out[i] = Zone::new(half, depth, side);
                    i += 1;
                }
            }
        }
        out
    }

    pub fn index(&self) -> usize {
        let h = match self.half {
            PlayerId::A => 0,
            PlayerId::B => 1,
        };
        let d = match self.depth {
            Depth::Front => 0,
            Depth::Middle => 1,
            Depth::Back => 2,
        };
        let s = match self.side {
            Side::Left => 0,
            Side::Right => 1,
        };
        h * 6 + d * 2 + s
    }
}

impl fmt::Display for Zone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let depth = match self.depth {
            Depth::Front => "front",
            Depth::Middle => "middle",
            Depth::Back => "back",
        };
        let side = match self.side {
            Side::Left => "left",
            Side::Right => "right",
        };
        write!(f, "{}.{}.{}", self.half, depth, side)
    }
}

impl FromStr for Zone {
    type Err = String;

    /// Parses the `A.back.left` encoding.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.trim().split('.').collect();
        let [half, depth, side] = parts.as_slice() else {
            return Err(format!(
                "zone {s:?} is not of the form <A|B>.<front|middle|back>.<left|right>"
            ));
        };
        let half: PlayerId = half.parse()?;
        let depth = match depth.to_ascii_lowercase().as_str() {
            "front" => Depth::Front,
            "middle" | "mid" => Depth::Middle,
            "back" => Depth::Back,
            other => return Err(format!("unknown zone depth {other:?}")),
        };
        let side = match side.to_ascii_lowercase().as_str() {
            "left" => Side::Left,
            "right" => Side::Right,
            other => return Err(format!("unknown zone side {other:?}")),
        };
        Ok(Zone::new(half, depth, side))
    }
}

impl Serialize for Zone {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Zone {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// First or second half of a game, split where the leading side reaches 11.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GameHalf {
    First,
    Second,
}

impl fmt::Display for GameHalf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GameHalf::First => "first",
            GameHalf::Second => "second",
        })
    }
}

impl FromStr for GameHalf {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "first" | "1" => Ok(GameHalf::First),
            "second" | "2" => Ok(GameHalf::Second),
            other => Err(format!("unknown half {other:?} (expected first or second)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Score {
    pub a: u32,
    pub b: u32,
}

impl Score {
    pub const fn new(a: u32, b: u32) -> Self {
        Self { a, b }
    }

    pub fn of(&self, p: PlayerId) -> u32 {
        match p {
            PlayerId::A => self.a,
            PlayerId::B => self.b,
        }
    }

    pub fn max(&self) -> u32 {
        self.a.max(self.b)
    }

    pub fn incremented(self, p: PlayerId) -> Score {
        match p {
            PlayerId::A => Score::new(self.a + 1, self.b),
            PlayerId::B => Score::new(self.a, self.b + 1),
        }
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.a, self.b)
    }
}

/// Match-wide shot identifier, assigned in time order starting at 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ShotId(pub u32);

impl fmt::Display for ShotId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Whether spatial data is still in the physical camera frame or mirrored so
/// that player A always occupies the negative-`y` half.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoordinateFrame {
    Physical,
    Canonical,
}

/// Shuttle state where the fitted trajectory crosses the net plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetCrossing {
    pub t: f64,
    pub point: CourtPoint,
    pub velocity: Velocity,
}

/// A fully derived shot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shot {
    pub id: ShotId,
    #[serde(flatten)]
    pub record: ShotRecord,
    pub n_visible: usize,
    pub fit: Option<FitResult>,
    pub trajectory: Vec<TrajectorySample>,
    pub net_crossing: Option<NetCrossing>,
    pub tendency: Option<Tendency>,
    pub label: ShotLabel,
    pub from_zone: Option<Zone>,
    pub to_zone: Option<Zone>,
    pub speed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rally {
    #[serde(flatten)]
    pub record: RallyRecord,
    pub game: u32,
    pub half: GameHalf,
    pub score_after: Score,
    /// Physical side of player A during this rally.
    pub a_on_negative_y: bool,
    /// Set when the outcome rule could not be applied and every shot is Normal.
    pub degenerate: Option<String>,
    pub shots: Vec<Shot>,
}

impl Rally {
    pub fn shot_count(&self) -> usize {
        self.shots.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Game {
    /// 1-based game number.
    pub number: u32,
    pub final_score: Score,
    pub winner: Option<PlayerId>,
    pub finished: bool,
    /// Number of rallies in the first half (the half ends after that rally).
    pub half_boundary: Option<usize>,
    pub rallies: Vec<Rally>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summaries {
    pub matches: MatchSummary,
    pub games: Vec<ScopeSummary>,
    /// First and second half of each game that reached its midpoint.
    pub halves: Vec<ScopeSummary>,
    pub rallies: Vec<RallySummary>,
}

pub const BUNDLE_SCHEMA_VERSION: u32 = 1;

/// The immutable, fully derived analysis result for one match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchBundle {
    pub schema_version: u32,
    pub match_id: String,
    pub manifest: MatchManifest,
    pub court: CourtSpec,
    pub camera: CameraModel,
    pub camera_rmse_px: Option<f64>,
    pub frame: CoordinateFrame,
    pub games: Vec<Game>,
    pub poses: Vec<PoseFrame>,
    pub summaries: Summaries,
    pub warnings: Vec<String>,
}

impl MatchBundle {
    pub fn fps(&self) -> f64 {
        self.manifest.fps
    }

    pub fn rallies(&self) -> impl Iterator<Item = &Rally> {
        self.games.iter().flat_map(|g| g.rallies.iter())
    }

    pub fn shots(&self) -> impl Iterator<Item = (&Game, &Rally, &Shot)> {
        self.games.iter().flat_map(|g| {
            g.rallies
                .iter()
                .flat_map(move |r| r.shots.iter().map(move |s| (g, r, s)))
        })
    }

    pub fn rally(&self, rally_id: u32) -> Option<(&Game, &Rally)> {
        self.games.iter().find_map(|g| {
            g.rallies
                .iter()
                .find(|r| r.record.rally_id == rally_id)
                .map(|r| (g, r))
        })
    }

    pub fn shot(&self, id: ShotId) -> Option<(&Game, &Rally, &Shot)> {
        self.shots().find(|(_, _, s)| s.id == id)
    }

    pub fn rally_count(&self) -> usize {
        self.games.iter().map(|g| g.rallies.len()).sum()
    }

    pub fn frame_to_sec(&self, frame: u64) -> f64 {
        frame as f64 / self.fps()
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string(self)
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub severity: Severity,
    pub rally_id: Option<u32>,
    pub shot_index: Option<u32>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev}")?;
        if let Some(r) = self.rally_id {
            write!(f, " rally {r}")?;
        }
        if let Some(s) = self.shot_index {
            write!(f, " shot {s}")?;
        }
        write!(f, ": {}", self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Violation> {
        self.violations
            .iter()
            .filter(|v| v.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Violation> {
        self.violations
            .iter()
            .filter(|v| v.severity == Severity::Warning)
    }

    /// True when no invariant is violated. Warnings do not count.
    pub fn is_clean(&self) -> bool {
        self.errors().next().is_none()
    }

    fn push(&mut self, severity: Severity, rally: Option<u32>, shot: Option<u32>, msg: String) {
        self.violations.push(Violation {
            severity,
            rally_id: rally,
            shot_index: shot,
            message: msg,
        });
    }
}

/// Checks every type invariant of the bundle. Violations become report
/// entries; nothing here fails.
pub fn validate_bundle(bundle: &MatchBundle) -> ValidationReport {
    use Severity::{Error, Warning};
    let mut report = ValidationReport::default();

    if !(bundle.manifest.fps > 0.0 && bundle.manifest.fps.is_finite()) {
        report.push(
            Error,
            None,
            None,
            format!("fps must be positive, got {}", bundle.manifest.fps),
        );
    }

    let mut prev_end: Option<(u32, u64)> = None;
    let mut seen_ids = std::collections::BTreeSet::new();
    for game in &bundle.games {
        let mut prev_winner: Option<PlayerId> = None;
        for rally in &game.rallies {
            let r = &rally.record;
            let rid = Some(r.rally_id);
            if r.start_frame >= r.end_frame {
                report.push(
                    Error,
                    rid,
                    None,
                    format!(
                        "start_frame {} is not before end_frame {}",
                        r.start_frame, r.end_frame
                    ),
                );
            }
            if let Some((pid, pend)) = prev_end {
                if r.start_frame <= pend {
                    report.push(
                        Error,
                        rid,
                        None,
                        format!("frame range overlaps or precedes rally {pid} (ends at {pend})"),
                    );
                }
            }
            prev_end = Some((r.rally_id, r.end_frame));

            if let Some(pw) = prev_winner {
                if pw != r.server {
                    report.push(
                        Warning,
                        rid,
                        None,
                        format!(
                            "server {} differs from previous rally winner {pw}",
                            r.server
                        ),
                    );
                }
            }
            prev_winner = Some(r.winner);

            if rally.shots.is_empty() {
                report.push(Error, rid, None, "rally has no shots".into());
                continue;
            }

            let mut prev_shot: Option<&Shot> = None;
            for shot in &rally.shots {
                let s = &shot.record;
                let sid = Some(s.shot_index);
                if !seen_ids.insert(shot.id) {
                    report.push(Error, rid, sid, format!("duplicate shot id {}", shot.id));
                }
                if s.rally_id != r.rally_id {
                    report.push(
                        Error,
                        rid,
                        sid,
                        format!(
                            "shot filed under rally {} names rally {}",
                            r.rally_id, s.rally_id
                        ),
                    );
                }
                if s.hit_frame < r.start_frame || s.hit_frame > r.end_frame {
                    report.push(
                        Error,
                        rid,
                        sid,
                        format!(
                            "hit_frame {} outside rally range [{}, {}]",
                            s.hit_frame, r.start_frame, r.end_frame
                        ),
                    );
                }
                match prev_shot {
                    None => {
                        if s.hitter != r.server {
                            report.push(
                                Warning,
                                rid,
                                sid,
                                format!("first shot hit by {} but {} served", s.hitter, r.server),
                            );
                        }
                    }
                    Some(p) => {
                        if s.shot_index <= p.record.shot_index {
                            report.push(
                                Error,
                                rid,
                                sid,
                                "shot_index not strictly increasing".into(),
                            );
                        }
                        if s.hitter == p.record.hitter {
                            report.push(
                                Error,
                                rid,
                                sid,
                                format!(
                                    "hitter {} also hit the previous shot (no alternation)",
                                    s.hitter
                                ),
                            );
                        }
                    }
                }
                prev_shot = Some(shot);
            }

            let winners = rally
                .shots
                .iter()
                .filter(|s| s.label == ShotLabel::Winner)
                .count();
            let errors = rally
                .shots
                .iter()
                .filter(|s| s.label == ShotLabel::Error)
                .count();
            match (rally.degenerate.is_some(), winners + errors) {
                (true, 0) | (false, 1) => {}
                (true, _) => report.push(
                    Error,
                    rid,
                    None,
                    "degenerate rally carries winner/error labels".into(),
                ),
                (false, n) => report.push(
                    Error,
                    rid,
                    None,
                    format!("expected exactly one winner or error label, found {n}"),
                ),
            }
        }
    }

    let total: usize = bundle.games.iter().map(|g| g.rallies.len()).sum();
    if bundle.summaries.matches.rally_count != total {
        report.push(
            Error,
            None,
            None,
            format!(
                "match summary counts {} rallies but games hold {total}",
                bundle.summaries.matches.rally_count
            ),
        );
    }
    for rs in &bundle.summaries.rallies {
        if bundle.rally(rs.rally_id).is_none() {
            report.push(
                Error,
                Some(rs.rally_id),
                None,
                "summary references a missing rally".into(),
            );
        }
    }

    report
}
