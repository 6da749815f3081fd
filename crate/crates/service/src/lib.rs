//! Read-only HTTP API over analyzed match bundles.
//!
//! | route | response |
//! |-------|----------|
//! | `GET /api/matches` | one listing per loaded match |
//! | `GET /api/matches/{id}/summary?game=&half=` | match, game or half summary |
//! | `GET /api/matches/{id}/rallies?<filter>` | rally menu |
//! | `GET /api/matches/{id}/rallies/{rid}` | rally with shots, trajectories, poses and clip times |
//! | `GET /api/matches/{id}/shots?<filter>` | matched shots |
//! | `GET /api/matches/{id}/heatmap?<filter>&direction=from\|to` | twelve zone cells |
//! | `GET /api/matches/{id}/shots/{sid}/context` | clip, trajectory and neighbor shots |
//! | `GET /video/{id}` | the match video, with byte ranges |
//! | `GET /` | viewer static files, when configured |
//!
//! `<filter>` is described in [`params`]. Errors come back as
//! `{"error": "..."}` with status 400 or 404.

mod api;
pub mod params;

use std::fs;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};

use shuttlelab_core::model::BUNDLE_SCHEMA_VERSION;
use shuttlelab_core::MatchBundle;
use thiserror::Error;
use tokio::net::TcpListener;

pub use api::{
    heatmap_response, listing, rally_detail, router, ApiSession, ErrorBody, HeatmapResponse,
    MatchListing, RallyDetail, ShotClip, ShotItem,
};

pub const BUNDLE_FILE: &str = "bundle.json";

#[derive(Debug, Clone, PartialEq)]
pub struct ServeConfig {
    /// Holds `*.json` bundles and/or subdirectories with a `bundle.json`.
    pub data_dir: PathBuf,
    pub video_dir: Option<PathBuf>,
    /// Built viewer to host at `/`.
    pub static_dir: Option<PathBuf>,
    pub bind: IpAddr,
    pub port: u16,
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("data directory {0} does not exist or is not a directory")]
    MissingDataDir(PathBuf),
    #[error("no bundles found in {0}")]
    NoBundles(PathBuf),
    #[error("cannot load bundle {path}: {reason}")]
    UnreadableBundle { path: PathBuf, reason: String },
    #[error("match id {0:?} is loaded from more than one bundle")]
    DuplicateMatch(String),
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn bundle_paths(dir: &Path) -> Result<Vec<PathBuf>, ServiceError> {
    if !dir.is_dir() {
        return Err(ServiceError::MissingDataDir(dir.to_path_buf()));
    }
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            let nested = path.join(BUNDLE_FILE);
            if nested.is_file() {
                paths.push(nested);
            }
        } else if path.extension().is_some_and(|e| e == "json") {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

pub fn load_bundle(path: &Path) -> Result<MatchBundle, ServiceError> {
    let fail = |reason: String| ServiceError::UnreadableBundle {
        path: path.to_path_buf(),
        reason,
    };
    let text = fs::read_to_string(path).map_err(|e| fail(e.to_string()))?;
    let bundle = MatchBundle::from_json(&text).map_err(|e| fail(e.to_string()))?;
    if bundle.schema_version != BUNDLE_SCHEMA_VERSION {
        return Err(fail(format!(
            "schema version {} (expected {BUNDLE_SCHEMA_VERSION})",
            bundle.schema_version
        )));
    }
    Ok(bundle)
}

/// Loads every bundle under `dir`. Any unreadable bundle aborts the load.
pub fn load_bundles(dir: &Path) -> Result<Vec<MatchBundle>, ServiceError> {
    let mut bundles: Vec<MatchBundle> = Vec::new();
    for path in bundle_paths(dir)? {
        let b = load_bundle(&path)?;
        if bundles.iter().any(|x| x.match_id == b.match_id) {
            return Err(ServiceError::DuplicateMatch(b.match_id));
        }
        bundles.push(b);
    }
    if bundles.is_empty() {
        return Err(ServiceError::NoBundles(dir.to_path_buf()));
    }
    Ok(bundles)
}

/// Loads the bundles and binds the listener. Returns the bound address and
/// the server future; nothing is served until the future is polled.
pub async fn bind(
    config: &ServeConfig,
) -> Result<
    (
        SocketAddr,
        impl std::future::Future<Output = std::io::Result<()>>,
    ),
    ServiceError,
> {
    let bundles = load_bundles(&config.data_dir)?;
    let session = ApiSession {
        video_dir: config.video_dir.clone(),
        static_dir: config.static_dir.clone(),
        ..ApiSession::new(bundles)
    };
    let addr = SocketAddr::new(config.bind, config.port);
    let listener = TcpListener::bind(addr)
        .await
        .map_err(|source| ServiceError::Bind { addr, source })?;
    let local = listener.local_addr()?;
    tracing::info!(%local, matches = session.bundles.len(), "serving");
    let app = router(session);
    Ok((local, async move { axum::serve(listener, app).await }))
}

/// Serves until interrupted.
pub async fn serve(config: &ServeConfig) -> Result<(), ServiceError> {
    let (_, server) = bind(config).await?;
    tokio::select! {
        r = server => r?,
        _ = tokio::signal::ctrl_c() => tracing::info!("shutting down"),
    }
    Ok(())
}
