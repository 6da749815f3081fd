//! Scores, game halves, side canonicalization and summary statistics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::court::mirror;
use crate::flight::TrajectorySample;
use crate::model::{
    CoordinateFrame, CourtPoint, GameHalf, MatchBundle, PlayerId, RallyRecord, Score, Shot,
    ShotLabel, Summaries, Velocity, Zone,
};

/// Rallies with fewer shots than this are short.
pub const SHORT_RALLY_SHOTS: usize = 10;
/// Score of the leading side that ends the first half of a game.
pub const MIDPOINT_SCORE: u32 = 11;

/// Rally-point scoring constants, BWF defaults.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoringRules {
    pub points_to_win: u32,
    pub win_by: u32,
    pub cap: u32,
    pub best_of: u32,
}

impl Default for ScoringRules {
    fn default() -> Self {
        Self {
            points_to_win: 21,
            win_by: 2,
            cap: 30,
            best_of: 3,
        }
    }
}

impl ScoringRules {
    pub fn games_to_win(&self) -> u32 {
        self.best_of / 2 + 1
    }

    pub fn game_winner(&self, s: Score) -> Option<PlayerId> {
        for p in PlayerId::BOTH {
            let (me, them) = (s.of(p), s.of(p.opponent()));
            if me == self.cap || (me >= self.points_to_win && me >= them + self.win_by) {
                return Some(p);
            }
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum StatsError {
    #[error("rally {rally_id} comes after the match was already decided")]
    RalliesAfterMatchEnd { rally_id: u32 },
    #[error("game {game} never reached {MIDPOINT_SCORE} points")]
    NoMidpoint { game: u32 },
    #[error("manifest does not say which player starts on the negative-y side")]
    MissingSideSchedule,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum StatsWarning {
    UnfinishedFinalGame { game: u32, score: Score },
}

impl std::fmt::Display for StatsWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StatsWarning::UnfinishedFinalGame { game, score } => {
                write!(f, "game {game} is unfinished at {score}")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RallyScore {
    pub rally_id: u32,
    pub winner: PlayerId,
    pub score_after: Score,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameState {
    /// 1-based.
    pub number: u32,
    pub score: Score,
    pub snapshots: Vec<RallyScore>,
    pub half_boundary: Option<usize>,
    pub finished: bool,
    pub winner: Option<PlayerId>,
}

impl GameState {
    fn new(number: u32) -> Self {
        Self {
            number,
            score: Score::default(),
            snapshots: Vec::new(),
            half_boundary: None,
            finished: false,
            winner: None,
        }
    }

    pub fn half_of(&self, rally_position: usize) -> GameHalf {
        match self.half_boundary {
            Some(b) if rally_position >= b => GameHalf::Second,
            _ => GameHalf::First,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivedGames {
    pub games: Vec<GameState>,
    pub warnings: Vec<StatsWarning>,
}

impl DerivedGames {
    pub fn match_winner(&self, rules: &ScoringRules) -> Option<PlayerId> {
        PlayerId::BOTH.into_iter().find(|&p| {
            self.games.iter().filter(|g| g.winner == Some(p)).count() as u32 >= rules.games_to_win()
        })
    }
}

/// Replays rally winners under rally-point scoring. A game ends at
/// `points_to_win` with a `win_by` lead or at `cap`; the match ends when one
/// side has won a majority of `best_of` games.
pub fn derive_games(
    rallies: &[RallyRecord],
    rules: &ScoringRules,
) -> Result<DerivedGames, StatsError> {
    let mut games = Vec::new();
    let mut warnings = Vec::new();
    let mut won = Score::default();
    let mut current = GameState::new(1);
    let mut decided = false;

    for r in rallies {
        if decided {
            return Err(StatsError::RalliesAfterMatchEnd {
                rally_id: r.rally_id,
            });
        }
        current.score = current.score.incremented(r.winner);
        current.snapshots.push(RallyScore {
            rally_id: r.rally_id,
            winner: r.winner,
            score_after: current.score,
        });
        if current.half_boundary.is_none() && current.score.max() == MIDPOINT_SCORE {
            current.half_boundary = Some(current.snapshots.len());
        }
        if let Some(w) = rules.game_winner(current.score) {
            current.finished = true;
            current.winner = Some(w);
            won = won.incremented(w);
            let next = current.number + 1;
            games.push(std::mem::replace(&mut current, GameState::new(next)));
            decided = won.of(w) >= rules.games_to_win();
        }
    }
    if !current.snapshots.is_empty() {
        warnings.push(StatsWarning::UnfinishedFinalGame {
            game: current.number,
            score: current.score,
        });
        games.push(current);
    }
    Ok(DerivedGames { games, warnings })
}

/// Number of rallies in the first half: the half ends after the first rally
/// at which the leading side reaches 11.
pub fn half_boundary(game: &GameState) -> Result<usize, StatsError> {
    game.snapshots
        .iter()
        .position(|s| s.score_after.max() == MIDPOINT_SCORE)
        .map(|i| i + 1)
        .ok_or(StatsError::NoMidpoint { game: game.number })
}

/// Physical side of player A: ends change after every game and at the
/// midpoint of the deciding game.
pub fn a_on_negative_y(
    a_starts_negative: bool,
    game: u32,
    half: GameHalf,
    rules: &ScoringRules,
) -> bool {
    let mut side = a_starts_negative ^ (game.saturating_sub(1) % 2 == 1);
    if game == rules.best_of && half == GameHalf::Second {
        side = !side;
    }
    side
}

fn mirror_velocity(v: &Velocity) -> Velocity {
    Velocity::new(-v.x, -v.y, v.z)
}

fn mirror_sample(s: &TrajectorySample) -> TrajectorySample {
    TrajectorySample {
        t: s.t,
        p: mirror(&s.p),
        v: mirror_velocity(&s.v),
    }
}

fn mirror_shot(shot: &mut Shot) {
    shot.trajectory
        .iter_mut()
        .for_each(|s| *s = mirror_sample(s));
    if let Some(fit) = shot.fit.as_mut() {
        fit.params.p0 = mirror(&fit.params.p0);
        fit.params.v0 = mirror_velocity(&fit.params.v0);
    }
    if let Some(nc) = shot.net_crossing.as_mut() {
        nc.point = mirror(&nc.point);
        nc.velocity = mirror_velocity(&nc.velocity);
    }
}

/// Mirrors every rally played with player A on the positive-`y` end (and the
/// poses recorded during it) so that A always occupies the negative half.
/// Zones are player-relative and left untouched. Already-canonical bundles
/// are returned unchanged.
pub fn canonicalize_sides(bundle: &MatchBundle) -> Result<MatchBundle, StatsError> {
    if bundle.frame == CoordinateFrame::Canonical {
        return Ok(bundle.clone());
    }
    let start = bundle
        .manifest
        .negative_y_start
        .ok_or(StatsError::MissingSideSchedule)?;
    let rules = ScoringRules::default();
    let mut out = bundle.clone();
    let mut periods: Vec<(u64, bool)> = Vec::new();
    for game in &mut out.games {
        for rally in &mut game.rallies {
            rally.a_on_negative_y =
                a_on_negative_y(start == PlayerId::A, game.number, rally.half, &rules);
            if !rally.a_on_negative_y {
                rally.shots.iter_mut().for_each(mirror_shot);
            }
            periods.push((rally.record.start_frame, rally.a_on_negative_y));
        }
    }
    for pose in &mut out.poses {
        let idx = periods.partition_point(|(f, _)| *f <= pose.frame);
        let a_neg = periods
            .get(idx.saturating_sub(1))
            .map(|p| p.1)
            .unwrap_or(start == PlayerId::A);
        if !a_neg {
            for p in [&mut pose.a, &mut pose.b] {
                p.x = -p.x;
                p.y = -p.y;
                if let Some(joints) = p.joints.as_mut() {
                    joints.iter_mut().for_each(|j| *j = mirror(j));
                }
            }
        }
    }
    out.frame = CoordinateFrame::Canonical;
    Ok(out)
}

/// Which rallies a summary covers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Scope {
    #[default]
    Match,
    Game {
        game: u32,
    },
    Half {
        game: u32,
        half: GameHalf,
    },
}

impl Scope {
    pub fn includes(&self, game: u32, half: GameHalf) -> bool {
        match *self {
            Scope::Match => true,
            Scope::Game { game: g } => g == game,
            Scope::Half { game: g, half: h } => g == game && h == half,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScopeSummary {
    pub scope: Scope,
    pub duration_sec: f64,
    pub rally_count: usize,
    pub shot_count: usize,
    /// 0 when the scope holds no rallies; see `empty`.
    pub avg_shots_per_rally: f64,
    pub empty: bool,
    pub rallies_won: Score,
    pub winners: Score,
    pub errors: Score,
    pub short_rallies: usize,
    pub degenerate_rallies: usize,
    /// Score after the last rally in scope, when the scope is inside one game.
    pub score: Option<Score>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchSummary {
    pub duration_sec: f64,
    pub rally_count: usize,
    pub avg_shots_per_rally: f64,
    pub match_winner: Option<PlayerId>,
    pub game_scores: Vec<Score>,
    pub totals: ScopeSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RallySummary {
    pub rally_id: u32,
    pub game: u32,
    pub duration_sec: f64,
    pub shot_count: usize,
    pub is_short: bool,
    pub score_after: Score,
}

pub fn summarize(bundle: &MatchBundle, scope: Scope) -> ScopeSummary {
    let fps = bundle.fps();
    let mut s = ScopeSummary {
        scope,
        duration_sec: 0.0,
        rally_count: 0,
        shot_count: 0,
        avg_shots_per_rally: 0.0,
        empty: true,
        rallies_won: Score::default(),
        winners: Score::default(),
        errors: Score::default(),
        short_rallies: 0,
        degenerate_rallies: 0,
        score: None,
    };
    let mut frames: u64 = 0;
    for game in &bundle.games {
        for rally in &game.rallies {
            if !scope.includes(game.number, rally.half) {
                continue;
            }
            s.rally_count += 1;
            s.shot_count += rally.shots.len();
            frames += rally.record.end_frame - rally.record.start_frame;
            s.rallies_won = s.rallies_won.incremented(rally.record.winner);
            if rally.shots.len() < SHORT_RALLY_SHOTS {
                s.short_rallies += 1;
            }
            if rally.degenerate.is_some() {
                s.degenerate_rallies += 1;
            }
            for shot in &rally.shots {
                match shot.label {
                    ShotLabel::Winner => s.winners = s.winners.incremented(shot.record.hitter),
                    ShotLabel::Error => s.errors = s.errors.incremented(shot.record.hitter),
                    ShotLabel::Normal => {}
                }
            }
            if scope != Scope::Match {
                s.score = Some(rally.score_after);
            }
        }
    }
    s.duration_sec = frames as f64 / fps;
    if s.rally_count > 0 {
        s.empty = false;
        s.avg_shots_per_rally = s.shot_count as f64 / s.rally_count as f64;
    }
    s
}

pub fn match_summary(bundle: &MatchBundle, rules: &ScoringRules) -> MatchSummary {
    let totals = summarize(bundle, Scope::Match);
    let mut games_won = Score::default();
    for g in &bundle.games {
        if let Some(w) = g.winner {
            games_won = games_won.incremented(w);
        }
    }
    let match_winner = PlayerId::BOTH
        .into_iter()
        .find(|&p| games_won.of(p) >= rules.games_to_win());
    MatchSummary {
        duration_sec: totals.duration_sec,
        rally_count: totals.rally_count,
        avg_shots_per_rally: totals.avg_shots_per_rally,
        match_winner,
        game_scores: bundle.games.iter().map(|g| g.final_score).collect(),
        totals,
    }
}

pub fn rally_summaries(bundle: &MatchBundle) -> Vec<RallySummary> {
    bundle
        .games
        .iter()
        .flat_map(|g| {
            g.rallies.iter().map(move |r| RallySummary {
                rally_id: r.record.rally_id,
                game: g.number,
                duration_sec: (r.record.end_frame - r.record.start_frame) as f64 / bundle.fps(),
                shot_count: r.shots.len(),
                is_short: r.shots.len() < SHORT_RALLY_SHOTS,
                score_after: r.score_after,
            })
        })
        .collect()
}

/// Every summary stored in a bundle: the match, each game, each half of the
/// games that reached their midpoint, and each rally.
pub fn all_summaries(bundle: &MatchBundle, rules: &ScoringRules) -> Summaries {
    let games = bundle
        .games
        .iter()
        .map(|g| summarize(bundle, Scope::Game { game: g.number }))
        .collect();
    let halves = bundle
        .games
        .iter()
        .filter(|g| g.half_boundary.is_some())
        .flat_map(|g| {
            [GameHalf::First, GameHalf::Second].map(|half| {
                summarize(
                    bundle,
                    Scope::Half {
                        game: g.number,
                        half,
                    },
                )
            })
        })
        .collect();
    Summaries {
        matches: match_summary(bundle, rules),
        games,
        halves,
        rallies: rally_summaries(bundle),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    From,
    To,
}

impl std::str::FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "from" => Ok(Direction::From),
            "to" => Ok(Direction::To),
            other => Err(format!("unknown direction {other:?} (expected from or to)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatmapCell {
    pub zone: Zone,
    pub direction: Direction,
    pub count: usize,
    pub fraction: f64,
    pub display_percent: u32,
}

/// `round(100·count/total)` with halves rounded up, in exact integer arithmetic.
pub fn display_percent(count: usize, total: usize) -> u32 {
    if total == 0 {
        return 0;
    }
    ((200 * count + total) / (2 * total)) as u32
}

/// Per-zone counts of shot starts (`From`) or landings (`To`), twelve cells in
/// [`Zone::all`] order. Shots without a zone are not counted.
pub fn heatmap<'a, I>(shots: I, direction: Direction) -> Vec<HeatmapCell>
where
    I: IntoIterator<Item = &'a Shot>,
{
    let mut counts = [0usize; 12];
    for shot in shots {
        let zone = match direction {
            Direction::From => shot.from_zone,
            Direction::To => shot.to_zone,
        };
        if let Some(z) = zone {
            counts[z.index()] += 1;
        }
    }
    let total: usize = counts.iter().sum();
    Zone::all()
        .into_iter()
        .map(|zone| {
            let count = counts[zone.index()];
            HeatmapCell {
                zone,
                direction,
                count,
                fraction: if total == 0 {
                    0.0
                } else {
                    count as f64 / total as f64
                },
                display_percent: display_percent(count, total),
            }
        })
        .collect()
}

/// Mirror of a court point, exposed for callers re-deriving physical positions.
pub fn to_physical(p: &CourtPoint, a_on_negative_y: bool) -> CourtPoint {
    if a_on_negative_y {
        *p
    } else {
        mirror(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use PlayerId::{A, B};

    fn rallies(winners: &[PlayerId]) -> Vec<RallyRecord> {
        winners
            .iter()
            .enumerate()
            .map(|(i, &w)| RallyRecord {
                rally_id: i as u32 + 1,
                start_frame: i as u64 * 100,
                end_frame: i as u64 * 100 + 50,
                server: A,
                winner: w,
            })
            .collect()
    }

    fn seq(pattern: &[(PlayerId, usize)]) -> Vec<PlayerId> {
        pattern
            .iter()
            .flat_map(|&(p, n)| std::iter::repeat_n(p, n))
            .collect()
    }

    fn alternating(n: usize, first: PlayerId) -> Vec<PlayerId> {
        (0..n)
            .map(|i| if i % 2 == 0 { first } else { first.opponent() })
            .collect()
    }

    #[test]
    fn straight_game() {
        let d = derive_games(&rallies(&seq(&[(A, 21)])), &ScoringRules::default()).unwrap();
        assert_eq!(d.games.len(), 1);
        assert_eq!(d.games[0].score, Score::new(21, 0));
        assert!(d.games[0].finished);
        assert!(d.warnings.is_empty());
    }

    #[test]
    fn deuce_and_cap() {
        let rules = ScoringRules::default();
        let mut w = alternating(40, A);
        w.extend([A, A]);
        let d = derive_games(&rallies(&w), &rules).unwrap();
        assert_eq!(d.games[0].score, Score::new(22, 20));
        assert!(d.games[0].finished);

        let mut w = alternating(58, A);
        w.push(B);
        let d = derive_games(&rallies(&w), &rules).unwrap();
        assert_eq!(d.games[0].score, Score::new(29, 30));
        assert_eq!(d.games[0].winner, Some(B));
    }

    #[test]
    fn three_game_match_scores() {
        let mut w = Vec::new();
        w.extend(seq(&[(A, 11), (B, 11), (A, 10)]));
        w.extend(seq(&[(A, 19), (B, 21)]));
        w.extend(seq(&[(A, 13), (B, 21)]));
        let rules = ScoringRules::default();
        let d = derive_games(&rallies(&w), &rules).unwrap();
        let scores: Vec<Score> = d.games.iter().map(|g| g.score).collect();
        assert_eq!(
            scores,
            vec![Score::new(21, 11), Score::new(19, 21), Score::new(13, 21)]
        );
        assert_eq!(d.match_winner(&rules), Some(B));
    }

    #[test]
    fn rallies_after_match_end_rejected_and_partial_match_warns() {
        let rules = ScoringRules::default();
        let mut w = seq(&[(A, 42)]);
        w.push(B);
        assert_eq!(
            derive_games(&rallies(&w), &rules),
            Err(StatsError::RalliesAfterMatchEnd { rally_id: 43 })
        );
        let d = derive_games(&rallies(&seq(&[(A, 5), (B, 3)])), &rules).unwrap();
        assert_eq!(
            d.warnings,
            vec![StatsWarning::UnfinishedFinalGame {
                game: 1,
                score: Score::new(5, 3)
            }]
        );
    }

    #[test]
    fn half_boundary_examples() {
        let rules = ScoringRules::default();
        let d = derive_games(&rallies(&seq(&[(A, 21)])), &rules).unwrap();
        assert_eq!(half_boundary(&d.games[0]), Ok(11));
        let d = derive_games(&rallies(&alternating(42, A)), &rules).unwrap();
        assert_eq!(half_boundary(&d.games[0]), Ok(21));
        assert_eq!(d.games[0].snapshots[20].score_after, Score::new(11, 10));
        let d = derive_games(&rallies(&seq(&[(A, 8), (B, 5)])), &rules).unwrap();
        assert_eq!(
            half_boundary(&d.games[0]),
            Err(StatsError::NoMidpoint { game: 1 })
        );
        assert_eq!(d.games[0].half_boundary, None);
    }

    #[test]
    fn side_schedule() {
        let r = ScoringRules::default();
        assert!(a_on_negative_y(true, 1, GameHalf::Second, &r));
        assert!(!a_on_negative_y(true, 2, GameHalf::First, &r));
        assert!(a_on_negative_y(true, 3, GameHalf::First, &r));
        assert!(!a_on_negative_y(true, 3, GameHalf::Second, &r));
        assert!(!a_on_negative_y(false, 1, GameHalf::First, &r));
    }

    #[test]
    fn percent_rounds_half_up() {
        assert_eq!(display_percent(5, 9), 56);
        assert_eq!(display_percent(1, 8), 13);
        assert_eq!(display_percent(1, 200), 1);
        assert_eq!(display_percent(9, 9), 100);
        assert_eq!(display_percent(0, 0), 0);
    }

    /// Straight-line replay of the three scoring rules, independent of `derive_games`.
    fn oracle(winners: &[PlayerId]) -> Result<Vec<(u32, u32, usize)>, usize> {
        let mut out = Vec::new();
        let (mut a, mut b, mut n) = (0u32, 0u32, 0usize);
        let (mut ga, mut gb) = (0, 0);
        for (i, w) in winners.iter().enumerate() {
            if ga == 2 || gb == 2 {
                return Err(i);
            }
            if *w == A {
                a += 1
            } else {
                b += 1
            }
            n += 1;
            let a_wins = a == 30 || (a >= 21 && a >= b + 2);
            let b_wins = b == 30 || (b >= 21 && b >= a + 2);
            if a_wins || b_wins {
                out.push((a, b, n));
                if a_wins {
                    ga += 1
                } else {
                    gb += 1
                }
                (a, b, n) = (0, 0, 0);
            }
        }
        if n > 0 {
            out.push((a, b, n));
        }
        Ok(out)
    }

    proptest! {
        #[test]
        fn derive_games_matches_oracle(bits in prop::collection::vec(any::<bool>(), 0..160)) {
            let w: Vec<PlayerId> = bits.iter().map(|&b| if b { A } else { B }).collect();
            let got = derive_games(&rallies(&w), &ScoringRules::default());
            match oracle(&w) {
                Err(i) => prop_assert_eq!(got, Err(StatsError::RalliesAfterMatchEnd { rally_id: i as u32 + 1 })),
                Ok(expected) => {
                    let got = got.unwrap();
                    let summary: Vec<(u32, u32, usize)> =
                        got.games.iter().map(|g| (g.score.a, g.score.b, g.snapshots.len())).collect();
                    prop_assert_eq!(summary, expected);
                    for g in &got.games {
                        let mut prev = Score::default();
                        for s in &g.snapshots {
                            prop_assert_eq!(s.score_after, prev.incremented(s.winner));
                            prev = s.score_after;
                        }
                    }
                }
            }
        }
    }
}
