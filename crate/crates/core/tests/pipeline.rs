mod common;

use std::sync::OnceLock;

use common::{line, physical, repeat, unfitted_bundle};
use shuttlelab_core::model::{validate_bundle, CoordinateFrame};
use shuttlelab_core::pipeline::{analyze, AnalyzeOptions};
use shuttlelab_core::query::{filter_shots, Role, ShotFilter};
use shuttlelab_core::stats::{canonicalize_sides, heatmap, summarize, Direction, Scope};
use shuttlelab_core::synth::{generate, SynthConfig, SynthMatch};
use shuttlelab_core::{GameHalf, MatchBundle, PlayerId, ShotLabel};
use PlayerId::{A, B};

fn synth() -> &'static (SynthMatch, MatchBundle) {
    static CELL: OnceLock<(SynthMatch, MatchBundle)> = OnceLock::new();
    CELL.get_or_init(|| {
        let m = generate(&SynthConfig {
            seed: 42,
            rallies: 12,
            ..Default::default()
        })
        .unwrap();
        let bundle = analyze(&m.raw().unwrap(), &AnalyzeOptions::default()).unwrap();
        (m, bundle)
    })
}

fn scopes(bundle: &MatchBundle) -> Vec<Scope> {
    let mut out = vec![Scope::Match];
    for g in &bundle.games {
        out.push(Scope::Game { game: g.number });
        for half in [GameHalf::First, GameHalf::Second] {
            out.push(Scope::Half {
                game: g.number,
                half,
            });
        }
    }
    out
}

fn filter_for(scope: Scope) -> ShotFilter {
    match scope {
        Scope::Match => ShotFilter::default(),
        Scope::Game { game } => ShotFilter {
            game: Some(game),
            ..Default::default()
        },
        Scope::Half { game, half } => ShotFilter {
            game: Some(game),
            half: Some(half),
            ..Default::default()
        },
    }
}

#[test]
fn analysis_matches_ground_truth() {
    let (m, bundle) = synth();
    let report = validate_bundle(bundle);
    assert!(
        report.is_clean(),
        "{:?}",
        report.errors().collect::<Vec<_>>()
    );
    assert_eq!(bundle.frame, CoordinateFrame::Canonical);
    let shots: Vec<_> = bundle.shots().map(|(_, _, s)| s).collect();
    assert_eq!(shots.len(), m.truth.shots.len());
    assert!(shots.iter().all(|s| s.fit.is_some()));
    let agree = shots
        .iter()
        .zip(&m.truth.shots)
        .filter(|(s, t)| s.label == t.label)
        .count();
    assert!(agree * 100 >= 95 * shots.len(), "{agree}/{}", shots.len());
    for (r, t) in bundle.rallies().zip(&m.truth.rallies) {
        assert_eq!(
            (r.game, r.half, r.a_on_negative_y),
            (t.game, t.half, t.a_on_negative_y)
        );
    }
}

#[test]
fn winners_and_errors_account_for_every_labeled_rally() {
    let (_, bundle) = synth();
    for scope in scopes(bundle) {
        let base = filter_for(scope);
        for p in PlayerId::BOTH {
            let count = |role, hitter| {
                let f = ShotFilter {
                    role,
                    hitter: Some(hitter),
                    ..base.clone()
                };
                filter_shots(bundle, &f).unwrap().len()
            };
            // Independent recount straight off the rallies.
            let won = bundle
                .games
                .iter()
                .flat_map(|g| g.rallies.iter().map(move |r| (g.number, r)))
                .filter(|(g, r)| {
                    scope.includes(*g, r.half) && r.record.winner == p && r.degenerate.is_none()
                })
                .count();
            assert_eq!(
                count(Role::Winners, p) + count(Role::Errors, p.opponent()),
                won,
                "{scope:?} {p}"
            );
        }
    }
}

#[test]
fn stored_summaries_agree_with_recomputation() {
    let (_, bundle) = synth();
    assert_eq!(bundle.summaries.matches.rally_count, bundle.rally_count());
    for s in bundle
        .summaries
        .games
        .iter()
        .chain(&bundle.summaries.halves)
    {
        assert_eq!(*s, summarize(bundle, s.scope));
    }
    for scope in scopes(bundle) {
        let s = summarize(bundle, scope);
        assert_eq!((s.rallies_won.a + s.rallies_won.b) as usize, s.rally_count);
    }
}

#[test]
fn heatmap_fractions_are_normalized() {
    let (_, bundle) = synth();
    for dir in [Direction::From, Direction::To] {
        let cells = heatmap(bundle.shots().map(|(_, _, s)| s), dir);
        assert_eq!(cells.len(), 12);
        let total: f64 = cells.iter().map(|c| c.fraction).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }
}

#[test]
fn canonicalizing_twice_changes_nothing() {
    let (_, bundle) = synth();
    assert_eq!(canonicalize_sides(bundle).unwrap(), *bundle);
}

#[test]
fn analysis_is_deterministic() {
    let m = generate(&SynthConfig {
        seed: 5,
        rallies: 3,
        ..Default::default()
    })
    .unwrap();
    let raw = m.raw().unwrap();
    let a = analyze(&raw, &AnalyzeOptions::default())
        .unwrap()
        .to_json()
        .unwrap();
    let b = analyze(&raw, &AnalyzeOptions::default())
        .unwrap()
        .to_json()
        .unwrap();
    assert_eq!(a, b);
}

#[test]
fn without_fitting_every_rally_is_degenerate() {
    let bundle = unfitted_bundle(&[A, B, A], 3);
    assert!(bundle
        .shots()
        .all(|(_, _, s)| s.tendency.is_none() && s.label == ShotLabel::Normal));
    assert!(bundle.rallies().all(|r| r.degenerate.is_some()));
    assert_eq!(
        bundle
            .warnings
            .iter()
            .filter(|w| w.contains("labeled all Normal"))
            .count(),
        3
    );
}

/// Games 1 and 2 go 21-0 each way, then game 3 reaches 11-0 and one more
/// rally is played after the interval.
fn three_games() -> MatchBundle {
    let mut w = repeat(A, 21);
    w.extend(repeat(B, 21));
    w.extend(repeat(A, 11));
    w.push(B);
    unfitted_bundle(&w, 1)
}

#[test]
fn deciding_game_switches_ends_at_the_interval() {
    let mut b = physical(three_games());
    let g3 = &mut b.games[2];
    assert_eq!(g3.half_boundary, Some(11));
    for r in &mut g3.rallies[10..12] {
        r.shots[0].trajectory = line((1.0, -5.0), (-1.0, 4.0));
    }
    let c = canonicalize_sides(&b).unwrap();
    let (before, after) = (&c.games[2].rallies[10], &c.games[2].rallies[11]);
    assert_eq!(
        (before.half, after.half),
        (GameHalf::First, GameHalf::Second)
    );
    assert!(before.a_on_negative_y && !after.a_on_negative_y);
    let (p, q) = (
        before.shots[0].trajectory[0].p,
        after.shots[0].trajectory[0].p,
    );
    assert_eq!((p.x, p.y, p.z), (1.0, -5.0, 1.0));
    assert_eq!((q.x, q.y, q.z), (-1.0, 5.0, 1.0));
}

#[test]
fn game_two_shot_from_positive_end_lands_in_half_a() {
    let mut b = physical(three_games());
    // A won the last rally of game 1, so A serves the first rally of game 2.
    let rally = &mut b.games[1].rallies[0];
    assert_eq!(rally.shots[0].record.hitter, A);
    rally.shots[0].trajectory = line((0.5, 5.0), (0.5, -5.0));
    let c = canonicalize_sides(&b).unwrap();
    assert!(c.games[1].rallies[0].shots[0].trajectory[0].p.y < 0.0);
    assert!(c.games[0].rallies[0].a_on_negative_y && !c.games[1].rallies[0].a_on_negative_y);
}

#[test]
fn canonicalizing_keeps_zones_and_non_spatial_fields() {
    let mut b = physical(three_games());
    let zones = shuttlelab_core::Zone::all();
    for (i, r) in b
        .games
        .iter_mut()
        .flat_map(|g| g.rallies.iter_mut())
        .enumerate()
    {
        r.shots[0].from_zone = Some(zones[i % 12]);
        r.shots[0].to_zone = Some(zones[(i + 5) % 12]);
    }
    let c = canonicalize_sides(&b).unwrap();
    for (x, y) in b.shots().zip(c.shots()) {
        assert_eq!(x.2.record, y.2.record);
        assert_eq!((x.2.from_zone, x.2.to_zone), (y.2.from_zone, y.2.to_zone));
        assert_eq!(x.2.label, y.2.label);
        assert_eq!(x.1.score_after, y.1.score_after);
    }
    assert_eq!(b.summaries, c.summaries);
    assert_eq!(canonicalize_sides(&c).unwrap(), c);
}
