//! Query-string encoding of [`ShotFilter`] and the other endpoint parameters.
//!
//! Every filter field has its own key, named as in `ShotFilter`. Zone sets are
//! comma-separated `A.back.left` codes and may also be given as repeated keys.
//! Empty values count as unset so a form can submit blank selectors.

use std::collections::BTreeSet;

use shuttlelab_core::query::{Role, ShotFilter};
use shuttlelab_core::Zone;

pub const FILTER_KEYS: [&str; 7] = [
    "game",
    "half",
    "scorer",
    "role",
    "hitter",
    "from_zone",
    "to_zone",
];

/// Parses the filter fields out of `pairs`. Keys outside the filter and
/// `extra` are rejected, as is a repeated scalar key.
pub fn parse_filter(pairs: &[(String, String)], extra: &[&str]) -> Result<ShotFilter, String> {
    let mut f = ShotFilter::default();
    let mut seen = BTreeSet::new();
    for (key, value) in pairs {
        let key = key.as_str();
        if !FILTER_KEYS.contains(&key) {
            if extra.contains(&key) {
                continue;
            }
            return Err(format!("unknown query parameter {key:?}"));
        }
        let zone_key = key == "from_zone" || key == "to_zone";
        if !zone_key && !seen.insert(key) {
            return Err(format!("query parameter {key:?} given more than once"));
        }
        let value = value.trim();
        if value.is_empty() {
            continue;
        }
        match key {
            "game" => {
                f.game = Some(
                    value
                        .parse()
                        .map_err(|_| format!("game must be a positive integer, got {value:?}"))?,
                )
            }
            "half" => f.half = Some(value.parse()?),
            "scorer" => f.scorer = Some(value.parse()?),
            "role" => f.role = value.parse::<Role>()?,
            "hitter" => f.hitter = Some(value.parse()?),
            _ => {
                let set = if key == "from_zone" {
                    &mut f.from_zone
                } else {
                    &mut f.to_zone
                };
                let set = set.get_or_insert_with(BTreeSet::new);
                for code in value.split(',').map(str::trim).filter(|c| !c.is_empty()) {
                    set.insert(code.parse::<Zone>()?);
                }
            }
        }
    }
    f.validate().map_err(|e| e.to_string())?;
    Ok(f)
}

/// Encodes `f` as a query string (without the leading `?`). The default
/// filter encodes as the empty string.
pub fn filter_query(f: &ShotFilter) -> String {
    let mut parts = Vec::new();
    if let Some(g) = f.game {
        parts.push(format!("game={g}"));
    }
    if let Some(h) = f.half {
        parts.push(format!("half={h}"));
    }
    if let Some(p) = f.scorer {
        parts.push(format!("scorer={p}"));
    }
    match f.role {
        Role::All => {}
        Role::Winners => parts.push("role=winners".into()),
        Role::Errors => parts.push("role=errors".into()),
    }
    if let Some(p) = f.hitter {
        parts.push(format!("hitter={p}"));
    }
    for (key, set) in [("from_zone", &f.from_zone), ("to_zone", &f.to_zone)] {
        if let Some(set) = set {
            let codes: Vec<String> = set.iter().map(ToString::to_string).collect();
            parts.push(format!("{key}={}", codes.join(",")));
        }
    }
    parts.join("&")
}

/// The single value of `key`, if present and non-empty.
pub fn single<'a>(pairs: &'a [(String, String)], key: &str) -> Result<Option<&'a str>, String> {
    let mut values = pairs
        .iter()
        .filter(|(k, _)| k == key)
        .map(|(_, v)| v.trim());
    let first = values.next();
    if values.next().is_some() {
        return Err(format!("query parameter {key:?} given more than once"));
    }
    Ok(first.filter(|v| !v.is_empty()))
}
