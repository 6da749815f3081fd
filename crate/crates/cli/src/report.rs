//! Plain-text tables for `stats`.

use std::fmt::Write;

use shuttlelab_core::stats::{HeatmapCell, MatchSummary, ScopeSummary};
use shuttlelab_core::{Depth, MatchBundle, PlayerId, Side, Zone};

fn name(b: &MatchBundle, p: PlayerId) -> &str {
    b.manifest.players.name(p)
}

pub fn match_table(out: &mut String, b: &MatchBundle, m: &MatchSummary) {
    let _ = writeln!(
        out,
        "Match {}: {} (A) vs {} (B)",
        b.match_id,
        name(b, PlayerId::A),
        name(b, PlayerId::B)
    );
    let _ = writeln!(out, "  duration        {:.1} s", m.duration_sec);
    let _ = writeln!(out, "  rallies         {}", m.rally_count);
    let _ = writeln!(out, "  avg shots/rally {:.2}", m.avg_shots_per_rally);
    let scores: Vec<String> = m.game_scores.iter().map(ToString::to_string).collect();
    let _ = writeln!(out, "  games           {}", scores.join(", "));
    let winner = m.match_winner.map_or("undecided", |p| name(b, p));
    let _ = writeln!(out, "  winner          {winner}");
}

pub fn scope_table(out: &mut String, b: &MatchBundle, title: &str, s: &ScopeSummary) {
    let _ = writeln!(out, "{title}");
    if s.empty {
        let _ = writeln!(out, "  no rallies in scope");
        return;
    }
    if let Some(score) = s.score {
        let _ = writeln!(out, "  score           {score}");
    }
    let _ = writeln!(
        out,
        "  rallies {}  shots {}  avg {:.2}  duration {:.1} s  short {}  unlabeled {}",
        s.rally_count,
        s.shot_count,
        s.avg_shots_per_rally,
        s.duration_sec,
        s.short_rallies,
        s.degenerate_rallies
    );
    let _ = writeln!(
        out,
        "  {:<16} {:>6} {:>8} {:>7}",
        "player", "points", "winners", "errors"
    );
    for p in PlayerId::BOTH {
        let _ = writeln!(
            out,
            "  {:<16} {:>6} {:>8} {:>7}",
            format!("{} ({p})", name(b, p)),
            s.rallies_won.of(p),
            s.winners.of(p),
            s.errors.of(p)
        );
    }
}

/// Both halves as 3×2 grids, front row nearest the net, `count (pct%)` per cell.
pub fn heatmap_grid(out: &mut String, title: &str, cells: &[HeatmapCell]) {
    let _ = writeln!(out, "{title}");
    let cell = |z: Zone| {
        let c = &cells[z.index()];
        format!("{} ({}%)", c.count, c.display_percent)
    };
    for half in PlayerId::BOTH {
        let _ = writeln!(out, "  half {half}        left          right");
        for depth in [Depth::Front, Depth::Middle, Depth::Back] {
            let label = format!("{depth:?}").to_lowercase();
            let _ = writeln!(
                out,
                "    {label:<8} {:>12}  {:>12}",
                cell(Zone::new(half, depth, Side::Left)),
                cell(Zone::new(half, depth, Side::Right))
            );
        }
    }
}
