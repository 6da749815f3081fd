//! Parsing and cross-validation of a match input directory.
//!
//! | file              | content                                              |
//! |-------------------|------------------------------------------------------|
//! | `match.json`      | `{match_id?, video_uri, fps, players:{A,B}, event?, round?, negative_y_start?}` |
//! | `rallies.csv`     | `rally_id,start_frame,end_frame,server,winner`       |
//! | `shots.csv`       | `rally_id,shot_index,hit_frame,hitter`               |
//! | `track.csv`       | `frame,u,v,visible`                                  |
//! | `calibration.json`| `{keypoints:[{x,y,z,u,v}..]}` or `{projection:[12]}`, optional `image_width`/`image_height` |
//! | `poses.jsonl`     | one `{frame, A:{x,y,joints?}, B:{x,y,joints?}}` per line (optional) |
//!
//! Frames are the time axis on disk; seconds are `frame / fps`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::court::{CourtSpec, PixelPoint};
use crate::model::{CourtPoint, PlayerId, RallyRecord, ShotRecord};

pub const MANIFEST_FILE: &str = "match.json";
pub const RALLIES_FILE: &str = "rallies.csv";
pub const SHOTS_FILE: &str = "shots.csv";
pub const TRACK_FILE: &str = "track.csv";
pub const CALIBRATION_FILE: &str = "calibration.json";
pub const POSES_FILE: &str = "poses.jsonl";

const RALLY_HEADER: [&str; 5] = ["rally_id", "start_frame", "end_frame", "server", "winner"];
const SHOT_HEADER: [&str; 4] = ["rally_id", "shot_index", "hit_frame", "hitter"];
const TRACK_HEADER: [&str; 4] = ["frame", "u", "v", "visible"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("cannot read {path}: {reason}")]
    UnreadableFile { path: String, reason: String },
    #[error("missing field {0:?}")]
    MissingField(String),
    #[error("malformed number in {0}")]
    MalformedNumber(String),
    #[error("line {line}: {message}")]
    MalformedRecord { line: u64, message: String },
    #[error("line {line}: bad player tag {value:?} (expected A or B)")]
    BadPlayerTag { line: u64, value: String },
    #[error("line {line}: frames not strictly increasing")]
    NonMonotoneFrames { line: u64 },
    #[error("rally {0} overlaps the preceding rally")]
    OverlappingRallies(u32),
    #[error("rally id {0} appears more than once")]
    DuplicateRallyId(u32),
    #[error("header mismatch: expected {expected:?}, found {found:?}")]
    BadHeader { expected: String, found: String },
    #[error("calibration needs at least 6 keypoints, got {0}")]
    TooFewKeypoints(usize),
    #[error("degenerate keypoints: {0}")]
    DegenerateKeypoints(String),
}

fn malformed(line: u64, message: impl Into<String>) -> IngestError {
    IngestError::MalformedRecord {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum IngestWarning {
    OutOfCourtBounds {
        frame: u64,
        player: PlayerId,
        x: f64,
        y: f64,
    },
    HitterNotServer {
        rally_id: u32,
        hitter: PlayerId,
        server: PlayerId,
    },
}

impl fmt::Display for IngestWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IngestWarning::OutOfCourtBounds { frame, player, x, y } => write!(
                f,
                "frame {frame}: player {player} at ({x:.2}, {y:.2}) is more than 1 m outside the court"
            ),
            IngestWarning::HitterNotServer {
                rally_id,
                hitter,
                server,
            } => write!(f, "rally {rally_id}: first shot hit by {hitter} but {server} served"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Players {
    #[serde(rename = "A")]
    pub a: String,
    #[serde(rename = "B")]
    pub b: String,
}

impl Players {
    pub fn name(&self, p: PlayerId) -> &str {
        match p {
            PlayerId::A => &self.a,
            PlayerId::B => &self.b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchManifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub match_id: Option<String>,
    pub video_uri: String,
    pub fps: f64,
    pub players: Players,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub round: Option<String>,
    /// Player physically on the negative-`y` end at the start of game 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub negative_y_start: Option<PlayerId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackSample {
    pub frame: u64,
    pub u: f64,
    pub v: f64,
    pub visible: bool,
}

impl TrackSample {
    pub fn pixel(&self) -> PixelPoint {
        PixelPoint::new(self.u, self.v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub court: CourtPoint,
    pub pixel: PixelPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CalibrationInput {
    Keypoints {
        points: Vec<Keypoint>,
        image_size: Option<(u32, u32)>,
    },
    Projection {
        matrix: [f64; 12],
        image_size: Option<(u32, u32)>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerPose {
    pub x: f64,
    pub y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joints: Option<Vec<CourtPoint>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseFrame {
    pub frame: u64,
    #[serde(rename = "A")]
    pub a: PlayerPose,
    #[serde(rename = "B")]
    pub b: PlayerPose,
}

impl PoseFrame {
    pub fn player(&self, p: PlayerId) -> &PlayerPose {
        match p {
            PlayerId::A => &self.a,
            PlayerId::B => &self.b,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PoseInput {
    pub frames: Vec<PoseFrame>,
}

impl PoseInput {
    /// Pose at the latest frame not after `frame`, else the first one.
    pub fn at(&self, frame: u64) -> Option<&PoseFrame> {
        let idx = self.frames.partition_point(|p| p.frame <= frame);
        self.frames.get(idx.saturating_sub(1))
    }
}

fn read_text(path: &Path) -> Result<String, IngestError> {
    let bytes = fs::read(path).map_err(|e| IngestError::UnreadableFile {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    String::from_utf8(bytes).map_err(|_| IngestError::UnreadableFile {
        path: path.display().to_string(),
        reason: "not valid UTF-8".into(),
    })
}

// ---------------------------------------------------------------------------
// match.json

pub fn parse_manifest(path: &Path) -> Result<MatchManifest, IngestError> {
    manifest_from_str(&read_text(path)?)
}

pub fn manifest_from_str(text: &str) -> Result<MatchManifest, IngestError> {
    let root: Value =
        serde_json::from_str(text).map_err(|e| malformed(e.line() as u64, e.to_string()))?;
    let obj = root
        .as_object()
        .ok_or_else(|| malformed(1, "manifest must be a JSON object"))?;
    let string = |key: &str| -> Result<String, IngestError> {
        match obj.get(key) {
            Some(Value::String(s)) if !s.trim().is_empty() => Ok(s.clone()),
            Some(Value::String(_)) | None | Some(Value::Null) => {
                Err(IngestError::MissingField(key.into()))
            }
            Some(_) => Err(malformed(1, format!("{key} must be a string"))),
        }
    };
    let optional = |key: &str| obj.get(key).and_then(Value::as_str).map(str::to_owned);

    let video_uri = string("video_uri")?;
    let fps = match obj.get("fps") {
        None | Some(Value::Null) => return Err(IngestError::MissingField("fps".into())),
        Some(v) => v
            .as_f64()
            .ok_or_else(|| IngestError::MalformedNumber("fps".into()))?,
    };
    if !(fps > 0.0 && fps.is_finite()) {
        return Err(IngestError::MalformedNumber("fps".into()));
    }
    let players = obj
        .get("players")
        .and_then(Value::as_object)
        .ok_or_else(|| IngestError::MissingField("players".into()))?;
    let name = |tag: &str| -> Result<String, IngestError> {
        players
            .get(tag)
            .and_then(Value::as_str)
            .filter(|s| !s.trim().is_empty())
            .map(str::to_owned)
            .ok_or_else(|| IngestError::MissingField(format!("players.{tag}")))
    };
    let negative_y_start = match obj.get("negative_y_start") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => {
            Some(
                s.parse::<PlayerId>()
                    .map_err(|_| IngestError::BadPlayerTag {
                        line: 1,
                        value: s.clone(),
                    })?,
            )
        }
        Some(other) => {
            return Err(IngestError::BadPlayerTag {
                line: 1,
                value: other.to_string(),
            })
        }
    };
    Ok(MatchManifest {
        match_id: optional("match_id"),
        video_uri,
        fps,
        players: Players {
            a: name("A")?,
            b: name("B")?,
        },
        event: optional("event"),
        round: optional("round"),
        negative_y_start,
    })
}

// ---------------------------------------------------------------------------
// delimited files

struct CsvRows {
    rows: Vec<(u64, Vec<String>)>,
}

fn read_csv(text: &str, header: &[&str]) -> Result<CsvRows, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    let mut saw_header = false;
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            malformed(line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        if !saw_header {
            let found: Vec<&str> = rec.iter().collect();
            if found != header {
                return Err(IngestError::BadHeader {
                    expected: header.join(","),
                    found: found.join(","),
                });
            }
            saw_header = true;
            continue;
        }
        if rec.len() != header.len() {
            return Err(malformed(
                line,
                format!("expected {} fields, found {}", header.len(), rec.len()),
            ));
        }
        rows.push((line, rec.iter().map(str::to_owned).collect()));
    }
    Ok(CsvRows { rows })
}

fn int_field<T: std::str::FromStr>(line: u64, key: &str, value: &str) -> Result<T, IngestError> {
    value
        .parse()
        .map_err(|_| IngestError::MalformedNumber(format!("line {line}, {key}={value:?}")))
}

fn player_field(line: u64, value: &str) -> Result<PlayerId, IngestError> {
    match value {
        "A" => Ok(PlayerId::A),
        "B" => Ok(PlayerId::B),
        _ => Err(IngestError::BadPlayerTag {
            line,
            value: value.into(),
        }),
    }
}

pub fn parse_rallies(path: &Path) -> Result<Vec<RallyRecord>, IngestError> {
    rallies_from_str(&read_text(path)?)
}

/// Rallies ordered by start frame. Ranges must be disjoint and ids unique.
pub fn rallies_from_str(text: &str) -> Result<Vec<RallyRecord>, IngestError> {
    let rows = read_csv(text, &RALLY_HEADER)?;
    let mut out = Vec::with_capacity(rows.rows.len());
    let mut ids = BTreeSet::new();
    for (line, f) in &rows.rows {
        let line = *line;
        let rec = RallyRecord {
            rally_id: int_field(line, "rally_id", &f[0])?,
            start_frame: int_field(line, "start_frame", &f[1])?,
            end_frame: int_field(line, "end_frame", &f[2])?,
            server: player_field(line, &f[3])?,
            winner: player_field(line, &f[4])?,
        };
        if rec.start_frame >= rec.end_frame {
            return Err(IngestError::NonMonotoneFrames { line });
        }
        if !ids.insert(rec.rally_id) {
            return Err(IngestError::DuplicateRallyId(rec.rally_id));
        }
        out.push(rec);
    }
    out.sort_by_key(|r| (r.start_frame, r.rally_id));
    for pair in out.windows(2) {
        if pair[1].start_frame <= pair[0].end_frame {
            return Err(IngestError::OverlappingRallies(pair[1].rally_id));
        }
    }
    Ok(out)
}

pub fn write_rallies<W: Write>(w: W, rallies: &[RallyRecord]) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(RALLY_HEADER)?;
    for r in rallies {
        wr.write_record([
            r.rally_id.to_string(),
            r.start_frame.to_string(),
            r.end_frame.to_string(),
            r.server.to_string(),
            r.winner.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn parse_shots(path: &Path) -> Result<Vec<ShotRecord>, IngestError> {
    shots_from_str(&read_text(path)?)
}

/// Shots in file order. Within a rally, shot indices and hit frames must
/// increase; grouping, alternation and server checks happen in [`assemble`].
pub fn shots_from_str(text: &str) -> Result<Vec<ShotRecord>, IngestError> {
    let rows = read_csv(text, &SHOT_HEADER)?;
    let mut out = Vec::with_capacity(rows.rows.len());
    let mut last: BTreeMap<u32, (u32, u64)> = BTreeMap::new();
    for (line, f) in &rows.rows {
        let line = *line;
        let rec = ShotRecord {
            rally_id: int_field(line, "rally_id", &f[0])?,
            shot_index: int_field(line, "shot_index", &f[1])?,
            hit_frame: int_field(line, "hit_frame", &f[2])?,
            hitter: player_field(line, &f[3])?,
        };
        if let Some(&(idx, frame)) = last.get(&rec.rally_id) {
            if rec.shot_index <= idx || rec.hit_frame <= frame {
                return Err(IngestError::NonMonotoneFrames { line });
            }
        }
        last.insert(rec.rally_id, (rec.shot_index, rec.hit_frame));
        out.push(rec);
    }
    Ok(out)
}

pub fn write_shots<W: Write>(w: W, shots: &[ShotRecord]) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(SHOT_HEADER)?;
    for s in shots {
        wr.write_record([
            s.rally_id.to_string(),
            s.shot_index.to_string(),
            s.hit_frame.to_string(),
            s.hitter.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn parse_track(path: &Path) -> Result<Vec<TrackSample>, IngestError> {
    track_from_str(&read_text(path)?)
}

/// Track samples with strictly increasing frames. Occluded rows may leave
/// `u`/`v` empty (read as 0).
pub fn track_from_str(text: &str) -> Result<Vec<TrackSample>, IngestError> {
    let rows = read_csv(text, &TRACK_HEADER)?;
    let mut out: Vec<TrackSample> = Vec::with_capacity(rows.rows.len());
    for (line, f) in &rows.rows {
        let line = *line;
        let frame: u64 = int_field(line, "frame", &f[0])?;
        let visible = match f[3].as_str() {
            "1" => true,
            "0" => false,
            other => {
                return Err(malformed(
                    line,
                    format!("visible must be 0 or 1, got {other:?}"),
                ))
            }
        };
        let coord = |key: &str, s: &str| -> Result<f64, IngestError> {
            if s.is_empty() && !visible {
                return Ok(0.0);
            }
            let v: f64 = s
                .parse()
                .map_err(|_| IngestError::MalformedNumber(format!("line {line}, {key}={s:?}")))?;
            if !v.is_finite() {
                return Err(IngestError::MalformedNumber(format!(
                    "line {line}, {key}={s:?}"
                )));
            }
            Ok(v)
        };
        let sample = TrackSample {
            frame,
            u: coord("u", &f[1])?,
            v: coord("v", &f[2])?,
            visible,
        };
        if out.last().is_some_and(|p| p.frame >= frame) {
            return Err(IngestError::NonMonotoneFrames { line });
        }
        out.push(sample);
    }
    Ok(out)
}

pub fn write_track<W: Write>(w: W, track: &[TrackSample]) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(TRACK_HEADER)?;
    for s in track {
        wr.write_record([
            s.frame.to_string(),
            s.u.to_string(),
            s.v.to_string(),
            if s.visible { "1" } else { "0" }.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// calibration.json

pub fn parse_calibration(path: &Path) -> Result<CalibrationInput, IngestError> {
    calibration_from_str(&read_text(path)?)
}

pub fn calibration_from_str(text: &str) -> Result<CalibrationInput, IngestError> {
    let root: Value =
        serde_json::from_str(text).map_err(|e| malformed(e.line() as u64, e.to_string()))?;
    let obj = root
        .as_object()
        .ok_or_else(|| malformed(1, "calibration must be a JSON object"))?;
    let image_size = match (obj.get("image_width"), obj.get("image_height")) {
        (None, None) => None,
        (Some(w), Some(h)) => {
            let dim = |v: &Value, key: &str| {
                v.as_u64()
                    .filter(|&d| d > 0 && d <= u32::MAX as u64)
                    .map(|d| d as u32)
                    .ok_or_else(|| IngestError::MalformedNumber(key.into()))
            };
            Some((dim(w, "image_width")?, dim(h, "image_height")?))
        }
        (None, Some(_)) => return Err(IngestError::MissingField("image_width".into())),
        (Some(_), None) => return Err(IngestError::MissingField("image_height".into())),
    };

    if let Some(proj) = obj.get("projection") {
        let arr = proj
            .as_array()
            .ok_or_else(|| IngestError::MalformedNumber("projection".into()))?;
        if arr.len() != 12 {
            return Err(malformed(
                1,
                format!("projection needs 12 numbers, got {}", arr.len()),
            ));
        }
        let mut matrix = [0.0; 12];
        for (i, v) in arr.iter().enumerate() {
            matrix[i] = v
                .as_f64()
                .filter(|x| x.is_finite())
                .ok_or_else(|| IngestError::MalformedNumber(format!("projection[{i}]")))?;
        }
        return Ok(CalibrationInput::Projection { matrix, image_size });
    }

    let kps = obj
        .get("keypoints")
        .and_then(Value::as_array)
        .ok_or_else(|| IngestError::MissingField("keypoints".into()))?;
    let mut points = Vec::with_capacity(kps.len());
    for (i, kp) in kps.iter().enumerate() {
        let num = |key: &str, required: bool| -> Result<f64, IngestError> {
            match kp.get(key) {
                None if !required => Ok(0.0),
                None => Err(IngestError::MissingField(format!("keypoints[{i}].{key}"))),
                Some(v) => v
                    .as_f64()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| IngestError::MalformedNumber(format!("keypoints[{i}].{key}"))),
            }
        };
        points.push(Keypoint {
            court: CourtPoint::new(num("x", true)?, num("y", true)?, num("z", false)?),
            pixel: PixelPoint::new(num("u", true)?, num("v", true)?),
        });
    }
    if points.len() < 6 {
        return Err(IngestError::TooFewKeypoints(points.len()));
    }
    let distinct = |f: fn(&Keypoint) -> f64| {
        let mut v: Vec<f64> = points.iter().map(f).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v.len()
    };
    if distinct(|k| k.court.x) < 2 || distinct(|k| k.court.y) < 2 {
        return Err(IngestError::DegenerateKeypoints(
            "need at least two distinct x and two distinct y values".into(),
        ));
    }
    Ok(CalibrationInput::Keypoints { points, image_size })
}

pub fn calibration_to_json(cal: &CalibrationInput) -> Value {
    let (mut v, size) = match cal {
        CalibrationInput::Keypoints { points, image_size } => {
            let kps: Vec<Value> = points
                .iter()
                .map(|k| {
                    serde_json::json!({
                        "x": k.court.x, "y": k.court.y, "z": k.court.z,
                        "u": k.pixel.u, "v": k.pixel.v,
                    })
                })
                .collect();
            (serde_json::json!({ "keypoints": kps }), image_size)
        }
        CalibrationInput::Projection { matrix, image_size } => (
            serde_json::json!({ "projection": matrix.to_vec() }),
            image_size,
        ),
    };
    if let Some((w, h)) = size {
        v["image_width"] = (*w).into();
        v["image_height"] = (*h).into();
    }
    v
}

// ---------------------------------------------------------------------------
// poses.jsonl

pub fn parse_poses(path: &Path) -> Result<(PoseInput, Vec<IngestWarning>), IngestError> {
    poses_from_str(&read_text(path)?, &CourtSpec::default())
}

pub fn poses_from_str(
    text: &str,
    spec: &CourtSpec,
) -> Result<(PoseInput, Vec<IngestWarning>), IngestError> {
    let mut frames: Vec<PoseFrame> = Vec::new();
    let mut warnings = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i as u64 + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let pf: PoseFrame =
            serde_json::from_str(raw).map_err(|e| malformed(line, e.to_string()))?;
        if frames.last().is_some_and(|p| p.frame >= pf.frame) {
            return Err(IngestError::NonMonotoneFrames { line });
        }
        for player in PlayerId::BOTH {
            let pose = pf.player(player);
            let finite = pose.x.is_finite()
                && pose.y.is_finite()
                && pose.joints.iter().flatten().all(CourtPoint::is_finite);
            if !finite {
                return Err(IngestError::MalformedNumber(format!(
                    "line {line}, player {player}"
                )));
            }
            if pose.x.abs() > spec.half_width() + 1.0 || pose.y.abs() > spec.half_length() + 1.0 {
                warnings.push(IngestWarning::OutOfCourtBounds {
                    frame: pf.frame,
                    player,
                    x: pose.x,
                    y: pose.y,
                });
            }
        }
        frames.push(pf);
    }
    Ok((PoseInput { frames }, warnings))
}

// ---------------------------------------------------------------------------
// assembly

#[derive(Debug, Clone, PartialEq)]
pub struct RawRally {
    pub record: RallyRecord,
    pub shots: Vec<ShotRecord>,
}

/// Cross-validated inputs ready for analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct RawMatch {
    pub manifest: MatchManifest,
    pub rallies: Vec<RawRally>,
    pub track: Vec<TrackSample>,
    pub calibration: CalibrationInput,
    pub poses: Option<PoseInput>,
    pub warnings: Vec<IngestWarning>,
}

impl RawMatch {
    pub fn rally_records(&self) -> Vec<RallyRecord> {
        self.rallies.iter().map(|r| r.record).collect()
    }

    /// Track samples with frames in `[from, to]`.
    pub fn track_window(&self, from: u64, to: u64) -> &[TrackSample] {
        let lo = self.track.partition_point(|s| s.frame < from);
        let hi = self.track.partition_point(|s| s.frame <= to);
        &self.track[lo..hi.max(lo)]
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssembleIssue {
    #[error(
        "shot {shot_index} of rally {rally_id} at frame {hit_frame} is not covered by its rally"
    )]
    OrphanShot {
        rally_id: u32,
        shot_index: u32,
        hit_frame: u64,
    },
    #[error("rally {0} has no shots")]
    EmptyRally(u32),
    #[error("rally {rally_id}: shot {shot_index} has the same hitter as the previous shot")]
    NonAlternatingHitters { rally_id: u32, shot_index: u32 },
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{} assembly error(s): {}", .issues.len(), .issues.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
pub struct AssembleError {
    pub issues: Vec<AssembleIssue>,
}

/// Groups shots under rallies and runs the cross-file checks.
pub fn assemble(
    manifest: MatchManifest,
    rallies: Vec<RallyRecord>,
    shots: Vec<ShotRecord>,
    track: Vec<TrackSample>,
    calibration: CalibrationInput,
    poses: Option<PoseInput>,
) -> Result<RawMatch, AssembleError> {
    let mut issues = Vec::new();
    let mut warnings = Vec::new();
    let mut grouped: BTreeMap<u32, Vec<ShotRecord>> = BTreeMap::new();
    let by_id: BTreeMap<u32, &RallyRecord> = rallies.iter().map(|r| (r.rally_id, r)).collect();

    for s in shots {
        match by_id.get(&s.rally_id) {
            Some(r) if (r.start_frame..=r.end_frame).contains(&s.hit_frame) => {
                grouped.entry(s.rally_id).or_default().push(s);
            }
            _ => issues.push(AssembleIssue::OrphanShot {
                rally_id: s.rally_id,
                shot_index: s.shot_index,
                hit_frame: s.hit_frame,
            }),
        }
    }

    let mut raw_rallies = Vec::with_capacity(rallies.len());
    for r in &rallies {
        let mut shots = grouped.remove(&r.rally_id).unwrap_or_default();
        shots.sort_by_key(|s| s.shot_index);
        if shots.is_empty() {
            issues.push(AssembleIssue::EmptyRally(r.rally_id));
        } else {
            if shots[0].hitter != r.server {
                warnings.push(IngestWarning::HitterNotServer {
                    rally_id: r.rally_id,
                    hitter: shots[0].hitter,
                    server: r.server,
                });
            }
            for pair in shots.windows(2) {
                if pair[0].hitter == pair[1].hitter {
                    issues.push(AssembleIssue::NonAlternatingHitters {
                        rally_id: r.rally_id,
                        shot_index: pair[1].shot_index,
                    });
                }
            }
        }
        raw_rallies.push(RawRally { record: *r, shots });
    }

    if !issues.is_empty() {
        return Err(AssembleError { issues });
    }
    Ok(RawMatch {
        manifest,
        rallies: raw_rallies,
        track,
        calibration,
        poses,
        warnings,
    })
}

/// Per-file diagnostics from loading an input directory.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoadFailure {
    pub errors: Vec<(PathBuf, String)>,
}

impl fmt::Display for LoadFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (path, msg)) in self.errors.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{}: {msg}", path.display())?;
        }
        Ok(())
    }
}

impl std::error::Error for LoadFailure {}

/// Parses every input file in `dir` (poses optional) and assembles them.
/// All per-file errors are collected before giving up.
pub fn load_match_dir(dir: &Path) -> Result<RawMatch, LoadFailure> {
    let mut fail = LoadFailure::default();
    macro_rules! load {
        ($file:expr, $parse:expr) => {{
            let path = dir.join($file);
            match $parse(&path) {
                Ok(v) => Some(v),
                Err(e) => {
                    fail.errors.push((path, e.to_string()));
                    None
                }
            }
        }};
    }
    let manifest = load!(MANIFEST_FILE, parse_manifest);
    let rallies = load!(RALLIES_FILE, parse_rallies);
    let shots = load!(SHOTS_FILE, parse_shots);
    let track = load!(TRACK_FILE, parse_track);
    let calibration = load!(CALIBRATION_FILE, parse_calibration);
    let poses_path = dir.join(POSES_FILE);
    let poses = if poses_path.exists() {
        load!(POSES_FILE, parse_poses).map(Some)
    } else {
        Some(None)
    };

    let (Some(manifest), Some(rallies), Some(shots), Some(track), Some(calibration), Some(poses)) =
        (manifest, rallies, shots, track, calibration, poses)
    else {
        return Err(fail);
    };
    let (poses, pose_warnings) = match poses {
        Some((p, w)) => (Some(p), w),
        None => (None, Vec::new()),
    };
    match assemble(manifest, rallies, shots, track, calibration, poses) {
        Ok(mut raw) => {
            raw.warnings.extend(pose_warnings);
            Ok(raw)
        }
        Err(e) => {
            fail.errors.extend(
                e.issues
                    .into_iter()
                    .map(|i| (dir.join(SHOTS_FILE), i.to_string())),
            );
            Err(fail)
        }
    }
}
