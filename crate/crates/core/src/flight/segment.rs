use super::FlightError;
use crate::court::CameraModel;
use crate::ingest::TrackSample;

/// Minimum change of ground-mapped velocity across a hit, m/s.
const PROMINENCE: f64 = 2.0;
/// Minimum spacing between two hits, frames.
const MIN_GAP: u64 = 5;
/// A hit's velocity jump must dominate the jumps a few frames either side.
const PEAK_RATIO: f64 = 2.0;

/// Hit frames for a rally track.
///
/// With `provided` hits, each is snapped to the nearest visible sample (ties go
/// to the earlier one). Otherwise visible samples are mapped to the ground
/// plane through the camera and a hit is declared where the mapped velocity
/// changes abruptly: the jump between the two-frame velocities before and
/// after a sample exceeds 2 m/s, is the largest within 5 frames, and stands
/// out against the jumps a few frames away. The first visible sample starts
/// the serve.
pub fn segment_hits(
    obs: &[TrackSample],
    camera: &CameraModel,
    fps: f64,
    provided: Option<&[u64]>,
) -> Result<Vec<u64>, FlightError> {
    let visible: Vec<&TrackSample> = obs.iter().filter(|s| s.visible).collect();
    if visible.is_empty() {
        return Err(FlightError::NoHitsDetected);
    }
    if let Some(hits) = provided {
        if hits.is_empty() {
            return Err(FlightError::NoHitsDetected);
        }
        return Ok(hits.iter().map(|&h| snap(&visible, h)).collect());
    }
    detect(&visible, camera, fps)
}

fn snap(visible: &[&TrackSample], frame: u64) -> u64 {
    visible
        .iter()
        .map(|s| s.frame)
        .min_by_key(|&f| (f.abs_diff(frame), f))
        .expect("non-empty")
}

fn detect(
    visible: &[&TrackSample],
    camera: &CameraModel,
    fps: f64,
) -> Result<Vec<u64>, FlightError> {
    let ground: Vec<(u64, f64, f64)> = visible
        .iter()
        .filter_map(|s| {
            camera
                .pixel_to_plane(&s.pixel(), 0.0)
                .map(|p| (s.frame, p.x, p.y))
        })
        .collect();
    let n = ground.len();
    if n < 5 {
        return Err(FlightError::NoHitsDetected);
    }
    let vel = |a: usize, b: usize| {
        let dt = (ground[b].0 - ground[a].0) as f64 / fps;
        (
            (ground[b].1 - ground[a].1) / dt,
            (ground[b].2 - ground[a].2) / dt,
        )
    };
    let mut jump = vec![0.0; n];
    for (k, j) in jump.iter_mut().enumerate().take(n - 2).skip(2) {
        let (ix, iy) = vel(k - 2, k);
        let (ox, oy) = vel(k, k + 2);
        *j = (ox - ix).hypot(oy - iy);
    }

    let mut hits: Vec<u64> = Vec::new();
    for k in 2..n - 2 {
        let frame = ground[k].0;
        if jump[k] <= PROMINENCE {
            continue;
        }
        let is_peak = (0..n)
            .filter(|&j| j != k && ground[j].0.abs_diff(frame) <= MIN_GAP)
            .all(|j| jump[j] < jump[k] || (jump[j] == jump[k] && j > k));
        if !is_peak {
            continue;
        }
        let far: Vec<f64> = [k.checked_sub(4), k.checked_sub(3), Some(k + 3), Some(k + 4)]
            .into_iter()
            .flatten()
            .filter(|&j| (2..n - 2).contains(&j))
            .map(|j| jump[j])
            .collect();
        let background = far.iter().copied().fold(0.0, f64::max);
        if jump[k] > PEAK_RATIO * background {
            hits.push(frame);
        }
    }
    if hits.is_empty() {
        return Err(FlightError::NoHitsDetected);
    }
    let serve = ground[0].0;
    if hits[0] > serve + MIN_GAP {
        hits.insert(0, serve);
    }
    Ok(hits)
}
