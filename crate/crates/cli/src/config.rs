//! Optional TOML config. Each table mirrors one subcommand's flags; a flag
//! given on the command line wins over the file.
//!
//! ```toml
//! jobs = 4
//!
//! [analyze]
//! no_fit = false
//! vt = 6.8
//! zone_bounds = [2.3, 4.5]
//!
//! [synth]
//! seed = 42
//! rallies = 30
//!
//! [serve]
//! data_dir = "data"
//! video_dir = "videos"
//! port = 8080
//! bind = "127.0.0.1"
//! ```

use std::net::IpAddr;
use std::path::{Path, PathBuf};

use serde::Deserialize;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub jobs: Option<usize>,
    #[serde(default)]
    pub analyze: AnalyzeConfig,
    #[serde(default)]
    pub synth: SynthConfig,
    #[serde(default)]
    pub serve: ServeConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeConfig {
    pub no_fit: Option<bool>,
    pub vt: Option<f64>,
    pub zone_bounds: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: Option<u64>,
    pub rallies: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServeConfig {
    pub data_dir: Option<PathBuf>,
    pub video_dir: Option<PathBuf>,
    pub static_dir: Option<PathBuf>,
    pub port: Option<u16>,
    pub bind: Option<IpAddr>,
}

pub fn load(path: &Path) -> Result<Config, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    toml::from_str(&text).map_err(|e| format!("bad config {}: {e}", path.display()))
}
