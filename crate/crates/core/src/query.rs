//! Shot filter, rally menu and per-shot context over an analyzed match.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flight::TrajectorySample;
use crate::model::{
    Game, GameHalf, MatchBundle, PlayerId, Rally, Score, Shot, ShotId, ShotLabel, Zone,
};
use crate::stats::SHORT_RALLY_SHOTS;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    #[default]
    All,
    Winners,
    Errors,
}

impl std::str::FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "all" => Ok(Role::All),
            "winners" | "winner" => Ok(Role::Winners),
            "errors" | "error" => Ok(Role::Errors),
            other => Err(format!(
                "unknown role {other:?} (expected all, winners or errors)"
            )),
        }
    }
}

/// Conjunction of optional constraints on shots. The default filter matches
/// every shot.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotFilter {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub game: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half: Option<GameHalf>,
    /// Only rallies won by this player.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scorer: Option<PlayerId>,
    #[serde(default)]
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hitter: Option<PlayerId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from_zone: Option<BTreeSet<Zone>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to_zone: Option<BTreeSet<Zone>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum QueryError {
    #[error("invalid filter: {0}")]
    InvalidFilter(String),
    #[error("unknown shot {0}")]
    UnknownShot(ShotId),
}

impl ShotFilter {
    pub fn validate(&self) -> Result<(), QueryError> {
        if self.half.is_some() && self.game.is_none() {
            return Err(QueryError::InvalidFilter("half requires game".into()));
        }
        Ok(())
    }

    pub fn matches(&self, game: &Game, rally: &Rally, shot: &Shot) -> bool {
        fn zone_ok(set: &Option<BTreeSet<Zone>>, zone: Option<Zone>) -> bool {
            match set {
                None => true,
                Some(set) => zone.is_some_and(|z| set.contains(&z)),
            }
        }
        self.game.is_none_or(|g| g == game.number)
            && self.half.is_none_or(|h| h == rally.half)
            && self.scorer.is_none_or(|p| p == rally.record.winner)
            && match self.role {
                Role::All => true,
                Role::Winners => shot.label == ShotLabel::Winner,
                Role::Errors => shot.label == ShotLabel::Error,
            }
            && self.hitter.is_none_or(|p| p == shot.record.hitter)
            && zone_ok(&self.from_zone, shot.from_zone)
            && zone_ok(&self.to_zone, shot.to_zone)
    }
}

/// A matched shot together with its rally and game.
#[derive(Debug, Clone, Copy)]
pub struct ShotRef<'a> {
    pub game: &'a Game,
    pub rally: &'a Rally,
    pub shot: &'a Shot,
}

/// Shots matching every set field of `filter`, in time order.
pub fn filter_shots<'a>(
    bundle: &'a MatchBundle,
    filter: &ShotFilter,
) -> Result<Vec<ShotRef<'a>>, QueryError> {
    filter.validate()?;
    Ok(bundle
        .shots()
        .filter(|(g, r, s)| filter.matches(g, r, s))
        .map(|(game, rally, shot)| ShotRef { game, rally, shot })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RallyMenuItem {
    pub rally_id: u32,
    pub game: u32,
    pub winner: PlayerId,
    pub score_after: Score,
    pub shot_count: usize,
    pub is_short: bool,
    pub matched_shot_ids: Vec<ShotId>,
}

/// One item per rally with at least one matched shot, ordered by rally id.
pub fn rally_menu(
    bundle: &MatchBundle,
    filter: &ShotFilter,
) -> Result<Vec<RallyMenuItem>, QueryError> {
    let matched = filter_shots(bundle, filter)?;
    let mut items: Vec<RallyMenuItem> = Vec::new();
    for m in matched {
        let rid = m.rally.record.rally_id;
        match items.iter_mut().find(|i| i.rally_id == rid) {
            Some(item) => item.matched_shot_ids.push(m.shot.id),
            None => items.push(RallyMenuItem {
                rally_id: rid,
                game: m.game.number,
                winner: m.rally.record.winner,
                score_after: m.rally.score_after,
                shot_count: m.rally.shots.len(),
                is_short: m.rally.shots.len() < SHORT_RALLY_SHOTS,
                matched_shot_ids: vec![m.shot.id],
            }),
        }
    }
    items.sort_by_key(|i| i.rally_id);
    Ok(items)
}

/// Video padding around a shot clip, seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipPadding {
    pub pre_roll: f64,
    pub post_roll: f64,
}

impl Default for ClipPadding {
    fn default() -> Self {
        Self {
            pre_roll: 0.5,
            post_roll: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Clip {
    pub t_start: f64,
    pub t_end: f64,
}

/// Clip for the shot at `index` in `rally`: from the hit minus the pre-roll to
/// the next hit (or the rally end) plus the post-roll, clamped to the rally.
pub fn shot_clip(rally: &Rally, index: usize, fps: f64, pad: &ClipPadding) -> Clip {
    let r = &rally.record;
    let (lo, hi) = (r.start_frame as f64 / fps, r.end_frame as f64 / fps);
    let hit = rally.shots[index].record.hit_frame as f64 / fps;
    let next = rally
        .shots
        .get(index + 1)
        .map_or(hi, |s| s.record.hit_frame as f64 / fps);
    Clip {
        t_start: (hit - pad.pre_roll).max(lo),
        t_end: (next + pad.post_roll).min(hi),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborShot {
    pub id: ShotId,
    pub shot_index: u32,
    pub hitter: PlayerId,
    pub hit_frame: u64,
    pub label: ShotLabel,
}

impl NeighborShot {
    fn of(s: &Shot) -> Self {
        Self {
            id: s.id,
            shot_index: s.record.shot_index,
            hitter: s.record.hitter,
            hit_frame: s.record.hit_frame,
            label: s.label,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotContext {
    pub shot_id: ShotId,
    pub rally_id: u32,
    pub game: u32,
    pub score_after: Score,
    pub clip: Clip,
    pub trajectory: Vec<TrajectorySample>,
    pub previous: Option<NeighborShot>,
    pub next: Option<NeighborShot>,
}

pub fn shot_context(
    bundle: &MatchBundle,
    id: ShotId,
    pad: &ClipPadding,
) -> Result<ShotContext, QueryError> {
    let (game, rally, shot) = bundle.shot(id).ok_or(QueryError::UnknownShot(id))?;
    let idx = rally
        .shots
        .iter()
        .position(|s| s.id == id)
        .expect("shot belongs to its rally");
    Ok(ShotContext {
        shot_id: id,
        rally_id: rally.record.rally_id,
        game: game.number,
        score_after: rally.score_after,
        clip: shot_clip(rally, idx, bundle.fps(), pad),
        trajectory: shot.trajectory.clone(),
        previous: idx
            .checked_sub(1)
            .map(|i| NeighborShot::of(&rally.shots[i])),
        next: rally.shots.get(idx + 1).map(NeighborShot::of),
    })
}
