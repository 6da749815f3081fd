//! Route handlers and response shapes.

use std::collections::BTreeMap;
use std::path::{Path as FsPath, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::extract::{Path, Query, Request, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::Serialize;
use shuttlelab_core::ingest::{Players, PoseFrame};
use shuttlelab_core::model::Rally;
use shuttlelab_core::query::{
    filter_shots, rally_menu, shot_clip, shot_context, ClipPadding, ShotRef,
};
use shuttlelab_core::stats::{heatmap, summarize, Direction, HeatmapCell, Scope};
use shuttlelab_core::{GameHalf, MatchBundle, PlayerId, Score, ShotId, ShotLabel, Tendency, Zone};
use tower::ServiceExt;
use tower_http::cors::CorsLayer;
use tower_http::services::{ServeDir, ServeFile};

use crate::params::{parse_filter, single};

/// Loaded bundles and serving configuration. Immutable once built.
#[derive(Debug, Default)]
pub struct ApiSession {
    pub bundles: BTreeMap<String, MatchBundle>,
    pub video_dir: Option<PathBuf>,
    pub static_dir: Option<PathBuf>,
    pub padding: ClipPadding,
}

impl ApiSession {
    pub fn new(bundles: impl IntoIterator<Item = MatchBundle>) -> Self {
        Self {
            bundles: bundles
                .into_iter()
                .map(|b| (b.match_id.clone(), b))
                .collect(),
            ..Default::default()
        }
    }
}

type Shared = Arc<ApiSession>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorBody {
    pub error: String,
}

/// A failed request: status plus a JSON `{"error": ...}` body.
#[derive(Debug)]
pub struct ApiError(StatusCode, String);

impl ApiError {
    fn not_found(what: impl Into<String>) -> Self {
        Self(StatusCode::NOT_FOUND, what.into())
    }

    fn bad_request(why: impl Into<String>) -> Self {
        Self(StatusCode::BAD_REQUEST, why.into())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(ErrorBody { error: self.1 })).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;
type Pairs = Query<Vec<(String, String)>>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchListing {
    pub match_id: String,
    pub players: Players,
    pub event: Option<String>,
    pub round: Option<String>,
    pub game_scores: Vec<Score>,
    pub match_winner: Option<PlayerId>,
}

/// A shot without its trajectory, as listed by the shot endpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShotItem {
    pub id: ShotId,
    pub rally_id: u32,
    pub game: u32,
    pub half: GameHalf,
    pub shot_index: u32,
    pub hitter: PlayerId,
    pub hit_frame: u64,
    pub label: ShotLabel,
    pub tendency: Option<Tendency>,
    pub from_zone: Option<Zone>,
    pub to_zone: Option<Zone>,
    pub speed: Option<f64>,
}

impl From<&ShotRef<'_>> for ShotItem {
    fn from(r: &ShotRef<'_>) -> Self {
        let s = r.shot;
        Self {
            id: s.id,
            rally_id: r.rally.record.rally_id,
            game: r.game.number,
            half: r.rally.half,
            shot_index: s.record.shot_index,
            hitter: s.record.hitter,
            hit_frame: s.record.hit_frame,
            label: s.label,
            tendency: s.tendency,
            from_zone: s.from_zone,
            to_zone: s.to_zone,
            speed: s.speed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShotClip {
    pub shot_id: ShotId,
    pub t_start: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RallyDetail<'a> {
    pub rally: &'a Rally,
    pub clips: Vec<ShotClip>,
    /// Player positions recorded during the rally.
    pub poses: Vec<&'a PoseFrame>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatmapResponse {
    pub direction: Direction,
    /// Matched shots that have a zone in this direction.
    pub total: usize,
    pub cells: Vec<HeatmapCell>,
}

pub fn router(session: ApiSession) -> Router {
    let static_dir = session.static_dir.clone();
    let api = Router::new()
        .route("/api/matches", get(list_matches))
        .route("/api/matches/{id}/summary", get(summary))
        .route("/api/matches/{id}/rallies", get(rallies))
        .route("/api/matches/{id}/rallies/{rid}", get(rally))
        .route("/api/matches/{id}/shots", get(shots))
        .route("/api/matches/{id}/shots/{sid}/context", get(context))
        .route("/api/matches/{id}/heatmap", get(heatmap_cells))
        .route("/video/{id}", get(video));
    let app = match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(no_viewer)).fallback(not_found),
    };
    app.layer(CorsLayer::permissive())
        .with_state(Arc::new(session))
}

async fn not_found() -> ApiError {
    ApiError::not_found("no such endpoint")
}

async fn no_viewer() -> &'static str {
    "shuttlelab service: no viewer installed; the API lives under /api/matches\n"
}

fn bundle<'a>(s: &'a ApiSession, id: &str) -> Result<&'a MatchBundle, ApiError> {
    s.bundles
        .get(id)
        .ok_or_else(|| ApiError::not_found(format!("unknown match {id:?}")))
}

pub fn listing(b: &MatchBundle) -> MatchListing {
    MatchListing {
        match_id: b.match_id.clone(),
        players: b.manifest.players.clone(),
        event: b.manifest.event.clone(),
        round: b.manifest.round.clone(),
        game_scores: b.summaries.matches.game_scores.clone(),
        match_winner: b.summaries.matches.match_winner,
    }
}

async fn list_matches(State(s): State<Shared>) -> Json<Vec<MatchListing>> {
    Json(s.bundles.values().map(listing).collect())
}

async fn summary(
    State(s): State<Shared>,
    Path(id): Path<String>,
    Query(q): Pairs,
) -> Result<Response, ApiError> {
    let b = bundle(&s, &id)?;
    if let Some((k, _)) = q.iter().find(|(k, _)| k != "game" && k != "half") {
        return Err(ApiError::bad_request(format!(
            "unknown query parameter {k:?}"
        )));
    }
    let game = single(&q, "game")
        .map_err(ApiError::bad_request)?
        .map(|g| {
            g.parse::<u32>()
                .map_err(|_| ApiError::bad_request(format!("bad game {g:?}")))
        })
        .transpose()?;
    let half = single(&q, "half")
        .map_err(ApiError::bad_request)?
        .map(|h| h.parse::<GameHalf>().map_err(ApiError::bad_request))
        .transpose()?;
    Ok(match (game, half) {
        (None, None) => Json(&b.summaries.matches).into_response(),
        (Some(game), None) => Json(summarize(b, Scope::Game { game })).into_response(),
        (Some(game), Some(half)) => Json(summarize(b, Scope::Half { game, half })).into_response(),
        (None, Some(_)) => return Err(ApiError::bad_request("half requires game")),
    })
}

async fn rallies(
    State(s): State<Shared>,
    Path(id): Path<String>,
    Query(q): Pairs,
) -> Result<Response, ApiError> {
    let b = bundle(&s, &id)?;
    let f = parse_filter(&q, &[]).map_err(ApiError::bad_request)?;
    let menu = rally_menu(b, &f).map_err(|e| ApiError::bad_request(e.to_string()))?;
    Ok(Json(menu).into_response())
}

pub fn rally_detail<'a>(
    b: &'a MatchBundle,
    rally: &'a Rally,
    pad: &ClipPadding,
) -> RallyDetail<'a> {
    let (lo, hi) = (rally.record.start_frame, rally.record.end_frame);
    let clips = (0..rally.shots.len())
        .map(|i| {
            let c = shot_clip(rally, i, b.fps(), pad);
            ShotClip {
                shot_id: rally.shots[i].id,
                t_start: c.t_start,
                t_end: c.t_end,
            }
        })
        .collect();
    RallyDetail {
        rally,
        clips,
        poses: b
            .poses
            .iter()
            .filter(|p| (lo..=hi).contains(&p.frame))
            .collect(),
    }
}

async fn rally(
    State(s): State<Shared>,
    Path((id, rid)): Path<(String, String)>,
) -> Result<Response, ApiError> {
    let b = bundle(&s, &id)?;
    let (_, r) = rid
        .parse::<u32>()
        .ok()
        .and_then(|n| b.rally(n))
        .ok_or_else(|| ApiError::not_found(format!("unknown rally {rid:?}")))?;
    Ok(Json(rally_detail(b, r, &s.padding)).into_response())
}

async fn shots(
    State(s): State<Shared>,
    Path(id): Path<String>,
    Query(q): Pairs,
) -> ApiResult<Vec<ShotItem>> {
    let b = bundle(&s, &id)?;
    let f = parse_filter(&q, &[]).map_err(ApiError::bad_request)?;
    let matched = filter_shots(b, &f).map_err(|e| ApiError::bad_request(e.to_string()))?;
    Ok(Json(matched.iter().map(ShotItem::from).collect()))
}

async fn context(
    State(s): State<Shared>,
    Path((id, sid)): Path<(String, String)>,
) -> Result<Response, ApiError> {
    let b = bundle(&s, &id)?;
    let unknown = || ApiError::not_found(format!("unknown shot {sid:?}"));
    let n = sid.parse::<u32>().map_err(|_| unknown())?;
    let ctx = shot_context(b, ShotId(n), &s.padding).map_err(|_| unknown())?;
    Ok(Json(ctx).into_response())
}

pub fn heatmap_response(refs: &[ShotRef<'_>], direction: Direction) -> HeatmapResponse {
    let cells = heatmap(refs.iter().map(|r| r.shot), direction);
    HeatmapResponse {
        direction,
        total: cells.iter().map(|c| c.count).sum(),
        cells,
    }
}

async fn heatmap_cells(
    State(s): State<Shared>,
    Path(id): Path<String>,
    Query(q): Pairs,
) -> ApiResult<HeatmapResponse> {
    let b = bundle(&s, &id)?;
    let f = parse_filter(&q, &["direction"]).map_err(ApiError::bad_request)?;
    let direction = single(&q, "direction")
        .map_err(ApiError::bad_request)?
        .ok_or_else(|| ApiError::bad_request("direction is required (from or to)"))?
        .parse::<Direction>()
        .map_err(ApiError::bad_request)?;
    let matched = filter_shots(b, &f).map_err(|e| ApiError::bad_request(e.to_string()))?;
    Ok(Json(heatmap_response(&matched, direction)))
}

/// The configured video file for a match: the file name of the manifest's
/// `video_uri` inside the video directory.
fn video_path(s: &ApiSession, b: &MatchBundle) -> Option<PathBuf> {
    let dir = s.video_dir.as_ref()?;
    let name = FsPath::new(&b.manifest.video_uri).file_name()?;
    Some(dir.join(name))
}

async fn video(
    State(s): State<Shared>,
    Path(id): Path<String>,
    req: Request<Body>,
) -> Result<Response, ApiError> {
    let b = bundle(&s, &id)?;
    let path = video_path(&s, b)
        .filter(|p| p.is_file())
        .ok_or_else(|| ApiError::not_found(format!("no video for match {id:?}")))?;
    match ServeFile::new(path).oneshot(req).await {
        Ok(resp) => Ok(resp.map(Body::new)),
        Err(e) => Err(ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())),
    }
}
