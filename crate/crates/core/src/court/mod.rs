//! Court geometry: dimensions, the six-zone partition of each half, the
//! mirror used for side canonicalization, and the camera model.

mod camera;

pub use camera::{solve_camera, CameraError, CameraModel, CameraSolve, PixelPoint};

use serde::{Deserialize, Serialize};

use crate::model::{CourtPoint, Depth, PlayerId, Side, Zone};

/// Court dimensions in meters. Defaults follow the BWF Laws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CourtSpec {
    pub length: f64,
    pub width: f64,
    pub net_height_center: f64,
    pub net_height_posts: f64,
    /// Distances from the net separating front|middle and middle|back.
    pub zone_bounds: [f64; 2],
}

impl Default for CourtSpec {
    fn default() -> Self {
        let length = 13.40;
        let third = length / 2.0 / 3.0;
        Self {
            length,
            width: 6.10,
            net_height_center: 1.524,
            net_height_posts: 1.55,
            zone_bounds: [third, 2.0 * third],
        }
    }
}

impl CourtSpec {
    pub fn with_zone_bounds(self, front_middle: f64, middle_back: f64) -> Result<Self, String> {
        let spec = Self {
            zone_bounds: [front_middle, middle_back],
            ..self
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), String> {
        let [a, b] = self.zone_bounds;
        if !(self.length > 0.0 && self.width > 0.0) {
            return Err("court length and width must be positive".into());
        }
        if !(0.0 < a && a < b && b < self.half_length()) {
            return Err(format!(
                "zone bounds must satisfy 0 < {a} < {b} < {}",
                self.half_length()
            ));
        }
        Ok(())
    }

    pub fn half_length(&self) -> f64 {
        self.length / 2.0
    }

    pub fn half_width(&self) -> f64 {
        self.width / 2.0
    }

    /// The four ground-level corners of the outer court lines.
    pub fn corners(&self) -> [CourtPoint; 4] {
        let (hw, hl) = (self.half_width(), self.half_length());
        [
            CourtPoint::ground(-hw, -hl),
            CourtPoint::ground(hw, -hl),
            CourtPoint::ground(hw, hl),
            CourtPoint::ground(-hw, hl),
        ]
    }

    pub fn contains(&self, p: &CourtPoint) -> bool {
        p.x.abs() <= self.half_width() && p.y.abs() <= self.half_length()
    }

    /// Center of a zone on the ground, in the canonical frame.
    pub fn zone_center(&self, zone: Zone) -> CourtPoint {
        let [a, b] = self.zone_bounds;
        let d = match zone.depth {
            Depth::Front => a / 2.0,
            Depth::Middle => (a + b) / 2.0,
            Depth::Back => (b + self.half_length()) / 2.0,
        };
        let positive_x = matches!(
            (zone.half, zone.side),
            (PlayerId::A, Side::Left) | (PlayerId::B, Side::Right)
        );
        let x = if positive_x { 1.0 } else { -1.0 } * self.half_width() / 2.0;
        let y = match zone.half {
            PlayerId::A => -d,
            PlayerId::B => d,
        };
        CourtPoint::ground(x, y)
    }
}

/// Player-relative zone of a point in the canonical frame.
///
/// Half A is `y < 0`. Depth compares `|y|` against the zone bounds and a point
/// on a bound belongs to the deeper zone. Side is the player's own left/right
/// facing the net: in half A `x >= 0` is Left, in half B `x >= 0` is Right.
/// Off-court points are clamped to the court first.
pub fn zone_of(p: &CourtPoint, spec: &CourtSpec) -> Zone {
    let x = p.x.clamp(-spec.half_width(), spec.half_width());
    let y = p.y.clamp(-spec.half_length(), spec.half_length());
    let half = if y < 0.0 { PlayerId::A } else { PlayerId::B };
    let d = y.abs();
    let depth = if d >= spec.zone_bounds[1] {
        Depth::Back
    } else if d >= spec.zone_bounds[0] {
        Depth::Middle
    } else {
        Depth::Front
    };
    let side = match (half, x >= 0.0) {
        (PlayerId::A, true) | (PlayerId::B, false) => Side::Left,
        (PlayerId::A, false) | (PlayerId::B, true) => Side::Right,
    };
    Zone::new(half, depth, side)
}

/// Zone of a point given in the physical frame, where player A may be on
/// either end.
pub fn zone_in_frame(p: &CourtPoint, spec: &CourtSpec, a_on_negative_y: bool) -> Zone {
    if a_on_negative_y {
        zone_of(p, spec)
    } else {
        zone_of(&mirror(p), spec)
    }
}

/// 180° rotation about the net's vertical axis.
pub fn mirror(p: &CourtPoint) -> CourtPoint {
    CourtPoint::new(-p.x, -p.y, p.z)
}
