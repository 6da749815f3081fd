//! Badminton match analysis engine.
//!
//! Turns annotated monocular match data (rally and shot breakdowns, a 2D
//! shuttle track, a court calibration and optional player poses) into a fully
//! derived [`MatchBundle`]: game scores, fitted 3D shot trajectories,
//! offensive/defensive tendencies, winner/error labels, court zones and the
//! summaries behind the match overview, shot filter and rally menu.
//!
//! The pipeline is:
//!
//! 1. [`ingest`] parses and cross-checks the input files into a [`ingest::RawMatch`].
//! 2. [`court`] solves the camera and provides zone geometry.
//! 3. [`flight`] fits a drag-model flight to every shot's pixel track.
//! 4. [`classify`] derives tendency, outcome label and from/to zones.
//! 5. [`stats`] derives games, halves, side canonicalization and summaries.
//! 6. [`query`] answers filter and rally-menu requests over the result.
//!
//! [`pipeline::analyze`] runs steps 2–5 end to end. [`synth`] generates
//! physically simulated fixtures together with their ground truth.

pub mod classify;
pub mod court;
pub mod flight;
pub mod ingest;
pub mod lm;
pub mod model;
pub mod pipeline;
pub mod query;
pub mod stats;
pub mod synth;

pub use model::{
    CourtPoint, Depth, GameHalf, MatchBundle, PlayerId, RallyRecord, Score, ShotId, ShotLabel,
    ShotRecord, Side, Tendency, Velocity, Zone,
};
