use nalgebra::{DMatrix, DVector, Matrix3, Matrix3x4, Matrix4, Vector3, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::CourtSpec;
use crate::ingest::{CalibrationInput, Keypoint};
use crate::lm::{self, LeastSquaresProblem, LmConfig};
use crate::model::CourtPoint;

pub const DEFAULT_IMAGE_SIZE: (u32, u32) = (1920, 1080);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelPoint {
    pub u: f64,
    pub v: f64,
}

impl PixelPoint {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn distance(&self, other: &PixelPoint) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CameraError {
    #[error("calibration needs at least 6 keypoints, got {0}")]
    TooFewKeypoints(usize),
    #[error("degenerate calibration configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("projection matrix is not finite or has rank below 3")]
    RankDeficient,
    #[error("court corner projects outside the image guard box: {0}")]
    OutsideGuardBox(String),
    #[error("point is behind the camera")]
    BehindCamera,
}

/// Pinhole camera as a 3×4 projection from court meters to homogeneous pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    /// Row-major 3×4 projection matrix.
    pub projection: [f64; 12],
    pub image_width: u32,
    pub image_height: u32,
}

impl CameraModel {
    /// Builds a camera from a projection matrix. The sign is normalized so
    /// that the court center lies in front of the camera.
    pub fn new(p: Matrix3x4<f64>, image_size: (u32, u32)) -> Result<Self, CameraError> {
        if p.iter().any(|v| !v.is_finite()) {
            return Err(CameraError::RankDeficient);
        }
        let sv = p.svd(false, false).singular_values;
        let (max, min) = (sv.max(), sv.min());
        if max <= 0.0 || min <= max * 1e-12 {
            return Err(CameraError::RankDeficient);
        }
        let w_center = p[(2, 3)];
        let p = if w_center < 0.0 { -p } else { p };
        let mut projection = [0.0; 12];
        for r in 0..3 {
            for c in 0..4 {
                projection[r * 4 + c] = p[(r, c)];
            }
        }
        Ok(Self {
            projection,
            image_width: image_size.0,
            image_height: image_size.1,
        })
    }

    pub fn from_row_major(m: [f64; 12], image_size: (u32, u32)) -> Result<Self, CameraError> {
        Self::new(Matrix3x4::from_row_slice(&m), image_size)
    }

    /// Pinhole camera at `eye` looking at `target` with square pixels, focal
    /// length `focal_px` and the principal point at the image center.
    pub fn look_at(
        eye: &CourtPoint,
        target: &CourtPoint,
        focal_px: f64,
        image_size: (u32, u32),
    ) -> Result<Self, CameraError> {
        let (eye, target) = (eye.to_vector(), target.to_vector());
        let fwd = (target - eye).normalize();
        let right = fwd.cross(&Vector3::z()).normalize();
        let down = fwd.cross(&right);
        let r = Matrix3::from_rows(&[right.transpose(), down.transpose(), fwd.transpose()]);
        let t = -r * eye;
        let (cx, cy) = (image_size.0 as f64 / 2.0, image_size.1 as f64 / 2.0);
        let k = Matrix3::new(focal_px, 0.0, cx, 0.0, focal_px, cy, 0.0, 0.0, 1.0);
        let mut rt = Matrix3x4::zeros();
        rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
        rt.set_column(3, &t);
        CameraModel::new(k * rt, image_size)
    }

    pub fn matrix(&self) -> Matrix3x4<f64> {
        Matrix3x4::from_row_slice(&self.projection)
    }

    /// Same camera with the matrix multiplied by `k` (projection is unchanged
    /// for any `k > 0`).
    pub fn scaled(&self, k: f64) -> Self {
        let mut out = self.clone();
        out.projection.iter_mut().for_each(|v| *v *= k);
        out
    }

    /// Homogeneous projection; fails when the point is at or behind the camera.
    pub fn project(&self, p: &CourtPoint) -> Result<PixelPoint, CameraError> {
        self.project_vector(&p.to_vector())
            .ok_or(CameraError::BehindCamera)
    }

    pub fn project_vector(&self, p: &Vector3<f64>) -> Option<PixelPoint> {
        let x = self.matrix() * Vector4::new(p.x, p.y, p.z, 1.0);
        // NaN depth counts as behind the camera.
        if x.z.is_nan() || x.z <= 0.0 {
            return None;
        }
        Some(PixelPoint::new(x.x / x.z, x.y / x.z))
    }

    /// Homography of the plane `z = height` into the image.
    pub fn plane_homography(&self, height: f64) -> Matrix3<f64> {
        let p = self.matrix();
        let mut h = Matrix3::zeros();
        h.set_column(0, &p.column(0));
        h.set_column(1, &p.column(1));
        h.set_column(2, &(p.column(2) * height + p.column(3)));
        h
    }

    pub fn ground_homography(&self) -> Matrix3<f64> {
        self.plane_homography(0.0)
    }

    /// Back-projects a pixel onto the horizontal plane `z = height`.
    pub fn pixel_to_plane(&self, px: &PixelPoint, height: f64) -> Option<CourtPoint> {
        let inv = self.plane_homography(height).try_inverse()?;
        let g = inv * Vector3::new(px.u, px.v, 1.0);
        if g.z.abs() < 1e-15 {
            return None;
        }
        let p = CourtPoint::new(g.x / g.z, g.y / g.z, height);
        p.is_finite().then_some(p)
    }

    /// Optical center in court coordinates.
    pub fn center(&self) -> Option<CourtPoint> {
        let p = self.matrix();
        let m = p.fixed_view::<3, 3>(0, 0).into_owned();
        let c = m.try_inverse()? * (-p.column(3));
        Some(CourtPoint::from_vector(&c))
    }

    /// Checks that the four court corners project to finite pixels inside a
    /// box four times the image size, centered on the image.
    pub fn check_guard_box(&self, spec: &CourtSpec) -> Result<(), CameraError> {
        let (w, h) = (self.image_width as f64, self.image_height as f64);
        for corner in spec.corners() {
            let px = self.project(&corner).map_err(|_| {
                CameraError::OutsideGuardBox(format!("{corner:?} is behind the camera"))
            })?;
            let inside = px.u.is_finite()
                && px.v.is_finite()
                && (-1.5 * w..=2.5 * w).contains(&px.u)
                && (-1.5 * h..=2.5 * h).contains(&px.v);
            if !inside {
                return Err(CameraError::OutsideGuardBox(format!(
                    "{corner:?} -> ({:.1}, {:.1})",
                    px.u, px.v
                )));
            }
        }
        Ok(())
    }

    /// Root-mean-square reprojection error over the correspondences, pixels.
    /// Points behind the camera count with an infinite error.
    pub fn reprojection_rmse(&self, points: &[Keypoint]) -> f64 {
        if points.is_empty() {
            return 0.0;
        }
        let ss: f64 = points
            .iter()
            .map(|k| match self.project(&k.court) {
                Ok(px) => {
                    let d = px.distance(&k.pixel);
                    d * d
                }
                Err(_) => f64::INFINITY,
            })
            .sum();
        (ss / points.len() as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraSolve {
    pub camera: CameraModel,
    /// Reprojection RMSE over the fitting keypoints; absent for a direct matrix.
    pub rmse_px: Option<f64>,
}

/// Estimates the camera from calibration input.
///
/// Keypoints go through a Hartley-normalized DLT followed by Levenberg–Marquardt
/// refinement of the total squared reprojection error. Points that all lie on
/// the ground cannot fix the vertical column of the projection, so at least
/// two off-plane points (net-post tops) are required.
pub fn solve_camera(cal: &CalibrationInput, spec: &CourtSpec) -> Result<CameraSolve, CameraError> {
    match cal {
        CalibrationInput::Projection { matrix, image_size } => {
            let camera =
                CameraModel::from_row_major(*matrix, image_size.unwrap_or(DEFAULT_IMAGE_SIZE))?;
            camera.check_guard_box(spec)?;
            Ok(CameraSolve {
                camera,
                rmse_px: None,
            })
        }
        CalibrationInput::Keypoints { points, image_size } => {
            let image_size = image_size.unwrap_or(DEFAULT_IMAGE_SIZE);
            check_configuration(points)?;
            let p = dlt_refined(points)?;
            let camera = CameraModel::new(p, image_size)?;
            let camera = camera.scaled(1.0 / camera.matrix().norm());
            camera.check_guard_box(spec)?;
            let rmse = camera.reprojection_rmse(points);
            Ok(CameraSolve {
                camera,
                rmse_px: Some(rmse),
            })
        }
    }
}

fn check_configuration(points: &[Keypoint]) -> Result<(), CameraError> {
    if points.len() < 6 {
        return Err(CameraError::TooFewKeypoints(points.len()));
    }
    let distinct = |f: &dyn Fn(&Keypoint) -> f64| {
        let mut v: Vec<f64> = points.iter().map(f).collect();
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        v.len()
    };
    if distinct(&|k| k.court.x) < 2 || distinct(&|k| k.court.y) < 2 {
        return Err(CameraError::DegenerateConfiguration(
            "keypoints need at least two distinct x and two distinct y values".into(),
        ));
    }
    let off_plane = points.iter().filter(|k| k.court.z.abs() > 1e-9).count();
    if off_plane < 2 {
        return Err(CameraError::DegenerateConfiguration(format!(
            "{off_plane} keypoint(s) above the ground plane; at least two (e.g. both net-post tops) are needed to fix vertical scale"
        )));
    }
    Ok(())
}

/// Similarity transform taking the points to zero centroid and mean distance `target`.
fn normalizing_transform<const D: usize>(pts: &[[f64; D]], target: f64) -> DMatrix<f64> {
    let n = pts.len() as f64;
    let mut centroid = [0.0; D];
    for p in pts {
        for i in 0..D {
            centroid[i] += p[i] / n;
        }
    }
    let mean_dist = pts
        .iter()
        .map(|p| {
            (0..D)
                .map(|i| (p[i] - centroid[i]).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .sum::<f64>()
        / n;
    let s = if mean_dist > 0.0 {
        target / mean_dist
    } else {
        1.0
    };
    let mut t = DMatrix::identity(D + 1, D + 1);
    for i in 0..D {
        t[(i, i)] = s;
        t[(i, D)] = -s * centroid[i];
    }
    t
}

struct NormalizedReprojection {
    world: Vec<Vector4<f64>>,
    image: Vec<(f64, f64)>,
}

impl LeastSquaresProblem for NormalizedReprojection {
    fn residuals(&self, p: &DVector<f64>) -> DVector<f64> {
        let mut r = DVector::zeros(2 * self.world.len());
        for (i, (x, &(u, v))) in self.world.iter().zip(&self.image).enumerate() {
            let a = p[0] * x[0] + p[1] * x[1] + p[2] * x[2] + p[3] * x[3];
            let b = p[4] * x[0] + p[5] * x[1] + p[6] * x[2] + p[7] * x[3];
            let w = p[8] * x[0] + p[9] * x[1] + p[10] * x[2] + p[11] * x[3];
            r[2 * i] = a / w - u;
            r[2 * i + 1] = b / w - v;
        }
        r
    }

    fn jacobian(&self, p: &DVector<f64>) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(2 * self.world.len(), 12);
        for (i, x) in self.world.iter().enumerate() {
            let a = p[0] * x[0] + p[1] * x[1] + p[2] * x[2] + p[3] * x[3];
            let b = p[4] * x[0] + p[5] * x[1] + p[6] * x[2] + p[7] * x[3];
            let w = p[8] * x[0] + p[9] * x[1] + p[10] * x[2] + p[11] * x[3];
            for k in 0..4 {
                j[(2 * i, k)] = x[k] / w;
                j[(2 * i, 8 + k)] = -a * x[k] / (w * w);
                j[(2 * i + 1, 4 + k)] = x[k] / w;
                j[(2 * i + 1, 8 + k)] = -b * x[k] / (w * w);
            }
        }
        j
    }
}

fn dlt_refined(points: &[Keypoint]) -> Result<Matrix3x4<f64>, CameraError> {
    let world: Vec<[f64; 3]> = points
        .iter()
        .map(|k| [k.court.x, k.court.y, k.court.z])
        .collect();
    let image: Vec<[f64; 2]> = points.iter().map(|k| [k.pixel.u, k.pixel.v]).collect();
    let t3 = normalizing_transform(&world, 3f64.sqrt());
    let t2 = normalizing_transform(&image, 2f64.sqrt());

    let wn: Vec<Vector4<f64>> = world
        .iter()
        .map(|w| {
            let h = &t3 * DVector::from_vec(vec![w[0], w[1], w[2], 1.0]);
            Vector4::new(h[0], h[1], h[2], h[3])
        })
        .collect();
    let inn: Vec<(f64, f64)> = image
        .iter()
        .map(|p| {
            let h = &t2 * DVector::from_vec(vec![p[0], p[1], 1.0]);
            (h[0] / h[2], h[1] / h[2])
        })
        .collect();

    let n = points.len();
    let mut a = DMatrix::zeros(2 * n, 12);
    for (i, (x, &(u, v))) in wn.iter().zip(&inn).enumerate() {
        for k in 0..4 {
            a[(2 * i, k)] = x[k];
            a[(2 * i, 8 + k)] = -u * x[k];
            a[(2 * i + 1, 4 + k)] = x[k];
            a[(2 * i + 1, 8 + k)] = -v * x[k];
        }
    }
    let svd = a.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| CameraError::DegenerateConfiguration("SVD failed".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let smallest = order[0];
    let second = svd.singular_values[order[1]];
    if second <= svd.singular_values.max() * 1e-10 {
        return Err(CameraError::DegenerateConfiguration(
            "keypoints do not determine a unique projection".into(),
        ));
    }
    let p0 = DVector::from_iterator(12, v_t.row(smallest).iter().copied());

    let problem = NormalizedReprojection {
        world: wn,
        image: inn,
    };
    let cfg = LmConfig {
        gradient_tolerance: 1e-10,
        step_tolerance: 1e-14,
        max_iterations: 200,
        ..LmConfig::default()
    };
    let refined = lm::minimize(&problem, p0, &cfg);

    let pn = Matrix3x4::from_row_slice(refined.params.as_slice());
    let t2_inv = t2
        .try_inverse()
        .ok_or_else(|| CameraError::DegenerateConfiguration("image points collapse".into()))?;
    let t2_inv = Matrix3::from_iterator(t2_inv.iter().copied());
    let t3 = Matrix4::from_iterator(t3.iter().copied());
    Ok(t2_inv * pn * t3)
}
