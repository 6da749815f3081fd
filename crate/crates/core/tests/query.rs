mod common;

use std::collections::BTreeSet;
use std::sync::OnceLock;

use common::{raw_match_with_counts, unfitted_bundle};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shuttlelab_core::pipeline::{analyze, AnalyzeOptions};
use shuttlelab_core::query::{
    filter_shots, rally_menu, shot_context, ClipPadding, QueryError, Role, ShotFilter,
};
use shuttlelab_core::stats::{heatmap, Direction};
use shuttlelab_core::{GameHalf, MatchBundle, PlayerId, ShotId, ShotLabel, Zone};

/// Forty rallies with random winners, lengths, labels and zones. Labels are
/// not consistent with any outcome rule; the query layer must not care.
fn labeled() -> &'static MatchBundle {
    static CELL: OnceLock<MatchBundle> = OnceLock::new();
    CELL.get_or_init(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let winners: Vec<PlayerId> = (0..40)
            .map(|_| {
                if rng.random_bool(0.5) {
                    PlayerId::A
                } else {
                    PlayerId::B
                }
            })
            .collect();
        let counts: Vec<u32> = (0..40).map(|_| rng.random_range(1..=11)).collect();
        let opts = AnalyzeOptions {
            fit: false,
            ..Default::default()
        };
        let mut b = analyze(&raw_match_with_counts(&winners, &counts), &opts).unwrap();
        let zones = Zone::all();
        for g in &mut b.games {
            for r in &mut g.rallies {
                for s in &mut r.shots {
                    s.label = [ShotLabel::Normal, ShotLabel::Winner, ShotLabel::Error]
                        [rng.random_range(0..3)];
                    s.from_zone = rng.random_bool(0.9).then(|| zones[rng.random_range(0..12)]);
                    s.to_zone = rng.random_bool(0.9).then(|| zones[rng.random_range(0..12)]);
                }
            }
        }
        b
    })
}

fn ids(b: &MatchBundle, f: &ShotFilter) -> Vec<ShotId> {
    filter_shots(b, f)
        .unwrap()
        .iter()
        .map(|r| r.shot.id)
        .collect()
}

fn zone_set() -> impl Strategy<Value = Option<BTreeSet<Zone>>> {
    proptest::option::of(proptest::collection::btree_set(
        (0usize..12).prop_map(|i| Zone::all()[i]),
        1..5,
    ))
}

fn player() -> impl Strategy<Value = Option<PlayerId>> {
    proptest::option::of(prop_oneof![Just(PlayerId::A), Just(PlayerId::B)])
}

fn filter() -> impl Strategy<Value = ShotFilter> {
    (
        proptest::option::of(1u32..=2),
        proptest::option::of(prop_oneof![Just(GameHalf::First), Just(GameHalf::Second)]),
        player(),
        prop_oneof![Just(Role::All), Just(Role::Winners), Just(Role::Errors)],
        player(),
        zone_set(),
        zone_set(),
    )
        .prop_map(
            |(game, half, scorer, role, hitter, from_zone, to_zone)| ShotFilter {
                game,
                half: if game.is_some() { half } else { None },
                scorer,
                role,
                hitter,
                from_zone,
                to_zone,
            },
        )
}

/// The filter with only its `i`th field kept.
fn single_field(f: &ShotFilter, i: usize) -> ShotFilter {
    let mut out = ShotFilter::default();
    match i {
        0 => {
            out.game = f.game;
            out.half = f.half;
        }
        1 => out.scorer = f.scorer,
        2 => out.role = f.role,
        3 => out.hitter = f.hitter,
        4 => out.from_zone = f.from_zone.clone(),
        _ => out.to_zone = f.to_zone.clone(),
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn adding_a_constraint_never_enlarges_the_result(f in filter(), g in filter()) {
        let b = labeled();
        let mut narrower = f.clone();
        narrower.scorer = narrower.scorer.or(g.scorer);
        narrower.hitter = narrower.hitter.or(g.hitter);
        narrower.to_zone = narrower.to_zone.or(g.to_zone);
        let wide: BTreeSet<ShotId> = ids(b, &f).into_iter().collect();
        let narrow: BTreeSet<ShotId> = ids(b, &narrower).into_iter().collect();
        prop_assert!(narrow.is_subset(&wide));
    }

    #[test]
    fn conjunction_is_order_independent(f in filter(), order in Just((0..6).collect::<Vec<usize>>()).prop_shuffle()) {
        let b = labeled();
        let mut acc: BTreeSet<ShotId> = ids(b, &ShotFilter::default()).into_iter().collect();
        for i in order {
            let part: BTreeSet<ShotId> = ids(b, &single_field(&f, i)).into_iter().collect();
            acc = acc.intersection(&part).copied().collect();
        }
        prop_assert_eq!(acc.into_iter().collect::<Vec<_>>(), ids(b, &f));
    }

    #[test]
    fn menu_partitions_the_matched_shots(f in filter()) {
        let b = labeled();
        let matched = ids(b, &f);
        let menu = rally_menu(b, &f).unwrap();
        prop_assert_eq!(menu.iter().map(|m| m.matched_shot_ids.len()).sum::<usize>(), matched.len());
        prop_assert!(menu.windows(2).all(|w| w[0].rally_id < w[1].rally_id));
        let flat: Vec<ShotId> = menu.iter().flat_map(|m| m.matched_shot_ids.iter().copied()).collect();
        prop_assert_eq!(flat, matched);
        for m in &menu {
            let (_, r) = b.rally(m.rally_id).unwrap();
            prop_assert_eq!(m.is_short, r.shots.len() < 10);
        }
    }

    #[test]
    fn filtered_heatmap_counts_every_zoned_shot(f in filter()) {
        let b = labeled();
        let shots = filter_shots(b, &f).unwrap();
        for dir in [Direction::From, Direction::To] {
            let cells = heatmap(shots.iter().map(|r| r.shot), dir);
            let zoned = shots
                .iter()
                .filter(|r| match dir {
                    Direction::From => r.shot.from_zone.is_some(),
                    Direction::To => r.shot.to_zone.is_some(),
                })
                .count();
            prop_assert_eq!(cells.iter().map(|c| c.count).sum::<usize>(), zoned);
            if zoned > 0 {
                prop_assert!((cells.iter().map(|c| c.fraction).sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn empty_filter_matches_every_shot() {
    let b = labeled();
    assert_eq!(ids(b, &ShotFilter::default()).len(), b.shots().count());
}

#[test]
fn half_without_game_is_rejected() {
    let f = ShotFilter {
        half: Some(GameHalf::Second),
        ..Default::default()
    };
    assert!(matches!(
        filter_shots(labeled(), &f),
        Err(QueryError::InvalidFilter(_))
    ));
}

#[test]
fn unmatched_filter_gives_an_empty_menu() {
    let b = unfitted_bundle(&[PlayerId::A; 3], 2);
    let f = ShotFilter {
        role: Role::Winners,
        ..Default::default()
    };
    assert!(rally_menu(&b, &f).unwrap().is_empty());
}

/// 17 rallies won by A: 9 ended by an A winner, 5 by a B error, 3 degenerate.
#[test]
fn scorer_and_role_pick_the_scorers_winners() {
    let mut b = unfitted_bundle(&[PlayerId::A; 17], 2);
    for (i, r) in b.games[0].rallies.iter_mut().enumerate() {
        // A serves every rally, so shot 0 is A's and shot 1 is B's.
        match i {
            0..9 => r.shots[0].label = ShotLabel::Winner,
            9..14 => r.shots[1].label = ShotLabel::Error,
            _ => continue,
        }
        r.degenerate = None;
    }
    let f = ShotFilter {
        scorer: Some(PlayerId::A),
        role: Role::Winners,
        ..Default::default()
    };
    let winners = filter_shots(&b, &f).unwrap();
    assert_eq!(winners.len(), 9);
    assert!(winners.iter().all(|r| r.shot.record.hitter == PlayerId::A));
    let errors = ShotFilter {
        role: Role::Errors,
        hitter: Some(PlayerId::B),
        ..Default::default()
    };
    let labeled_rallies = b.rallies().filter(|r| r.degenerate.is_none()).count();
    assert_eq!(
        winners.len() + filter_shots(&b, &errors).unwrap().len(),
        labeled_rallies
    );
}

#[test]
fn five_of_nine_displays_as_fifty_six_percent() {
    let mut b = unfitted_bundle(&[PlayerId::A; 9], 1);
    let back_right = "A.back.right".parse::<Zone>().unwrap();
    let front_left = "A.front.left".parse::<Zone>().unwrap();
    for (i, r) in b.games[0].rallies.iter_mut().enumerate() {
        r.shots[0].from_zone = Some(if i < 5 { back_right } else { front_left });
    }
    let cells = heatmap(b.shots().map(|(_, _, s)| s), Direction::From);
    let cell = cells.iter().find(|c| c.zone == back_right).unwrap();
    assert_eq!((cell.count, cell.display_percent), (5, 56));
    assert_eq!(
        cells
            .iter()
            .find(|c| c.zone == front_left)
            .unwrap()
            .display_percent,
        44
    );
}

#[test]
fn clip_spans_hit_to_next_hit_with_padding() {
    let mut b = unfitted_bundle(&[PlayerId::A], 3);
    let rally = &mut b.games[0].rallies[0];
    rally.record.start_frame = 0;
    rally.record.end_frame = 600;
    rally.shots[1].record.hit_frame = 300;
    rally.shots[2].record.hit_frame = 360;
    let id = rally.shots[1].id;
    let ctx = shot_context(&b, id, &ClipPadding::default()).unwrap();
    assert_eq!((ctx.clip.t_start, ctx.clip.t_end), (9.5, 12.5));
    assert_eq!(ctx.previous.unwrap().id, b.games[0].rallies[0].shots[0].id);
    assert_eq!(ctx.next.unwrap().hit_frame, 360);

    // The last shot runs to the rally end and no further.
    let last = b.games[0].rallies[0].shots[2].id;
    let ctx = shot_context(&b, last, &ClipPadding::default()).unwrap();
    assert_eq!(ctx.clip.t_end, 20.0);
    assert!(ctx.next.is_none());
}

#[test]
fn unknown_shot_has_no_context() {
    let b = unfitted_bundle(&[PlayerId::A], 1);
    let err = shot_context(&b, ShotId(99), &ClipPadding::default()).unwrap_err();
    assert_eq!(err, QueryError::UnknownShot(ShotId(99)));
}
