//! Shot statistics: tendency at the net, rally outcome labels and from/to zones.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::court::{zone_of, CourtSpec};
use crate::flight::TrajectorySample;
use crate::model::{CourtPoint, PlayerId, ShotLabel, Tendency, Velocity, Zone};

/// Defensive when the shuttle is still rising as it passes the net,
/// offensive otherwise (a flat crossing counts as offensive).
pub fn tendency(net_velocity: &Velocity) -> Tendency {
    if net_velocity.z > 0.0 {
        Tendency::Defensive
    } else {
        Tendency::Offensive
    }
}

/// Why a rally could not be labeled. All its shots stay Normal.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum DegenerateRally {
    #[error("rally has no shots")]
    NoShots,
    #[error("last shot has no net crossing, so its tendency is undefined")]
    UndefinedLastTendency,
    #[error("outcome falls on the penultimate shot but the rally has a single shot")]
    NoPenultimateShot,
    #[error("penultimate shot was hit by {found}, expected {expected}")]
    UnexpectedPenultimateHitter { expected: PlayerId, found: PlayerId },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RallyLabels {
    pub labels: Vec<ShotLabel>,
    pub degenerate: Option<DegenerateRally>,
}

/// Labels one rally from each shot's hitter and tendency.
///
/// | last shot                   | labeled shot | label  |
/// |-----------------------------|--------------|--------|
/// | offensive, by the scorer    | last         | Winner |
/// | defensive, by the loser     | penultimate  | Winner |
/// | offensive, by the loser     | last         | Error  |
/// | defensive, by the scorer    | penultimate  | Error  |
///
/// Every other shot is Normal. When the rule cannot be applied the rally is
/// degenerate and everything is Normal.
pub fn label_rally(shots: &[(PlayerId, Option<Tendency>)], winner: PlayerId) -> RallyLabels {
    let mut labels = vec![ShotLabel::Normal; shots.len()];
    let degenerate = |labels: Vec<ShotLabel>, why| RallyLabels {
        labels,
        degenerate: Some(why),
    };
    let Some(&(last_hitter, last_tendency)) = shots.last() else {
        return degenerate(labels, DegenerateRally::NoShots);
    };
    let Some(last_tendency) = last_tendency else {
        return degenerate(labels, DegenerateRally::UndefinedLastTendency);
    };
    let by_scorer = last_hitter == winner;
    let (on_last, label) = match (last_tendency, by_scorer) {
        (Tendency::Offensive, true) => (true, ShotLabel::Winner),
        (Tendency::Defensive, false) => (false, ShotLabel::Winner),
        (Tendency::Offensive, false) => (true, ShotLabel::Error),
        (Tendency::Defensive, true) => (false, ShotLabel::Error),
    };
    let idx = if on_last {
        shots.len() - 1
    } else {
        if shots.len() < 2 {
            return degenerate(labels, DegenerateRally::NoPenultimateShot);
        }
        shots.len() - 2
    };
    // Winners belong to the scorer, errors to the point loser.
    let expected = match label {
        ShotLabel::Winner => winner,
        _ => winner.opponent(),
    };
    let found = shots[idx].0;
    if found != expected {
        return degenerate(
            labels,
            DegenerateRally::UnexpectedPenultimateHitter { expected, found },
        );
    }
    labels[idx] = label;
    RallyLabels {
        labels,
        degenerate: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotZones {
    pub from: Zone,
    pub to: Zone,
    pub landing: CourtPoint,
    pub crosses_net: bool,
}

/// From-zone of the first sample and to-zone of the landing point (the
/// interpolated ground contact when the trajectory reaches `z = 0`, else the
/// last sample). Expects a canonical-frame trajectory.
pub fn shot_zones(trajectory: &[TrajectorySample], spec: &CourtSpec) -> Option<ShotZones> {
    if trajectory.len() < 2 {
        return None;
    }
    let start = trajectory[0].p;
    let last = trajectory[trajectory.len() - 1].p;
    let prev = trajectory[trajectory.len() - 2].p;
    let landing = if last.z <= 0.0 && prev.z > 0.0 {
        let s = prev.z / (prev.z - last.z);
        CourtPoint::new(
            prev.x + s * (last.x - prev.x),
            prev.y + s * (last.y - prev.y),
            0.0,
        )
    } else {
        last
    };
    let from = zone_of(&CourtPoint::ground(start.x, start.y), spec);
    let to = zone_of(&CourtPoint::ground(landing.x, landing.y), spec);
    Some(ShotZones {
        from,
        to,
        landing,
        crosses_net: from.half != to.half,
    })
}
