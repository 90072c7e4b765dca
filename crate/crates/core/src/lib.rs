//! Online multi-object tracking with joint abduction of detection-to-track
//! assignments and high-level scene events.
//!
//! For each frame the engine formulates an assignment problem between
//! predicted track boxes and detector observations, enumerates the admissible
//! actions (assign, start, end, halt, resume, ignore) together with the
//! events that explain them (entering/leaving the field of view, occlusion,
//! missing detections), and solves exactly for the hypothesis that maximizes
//! matching likelihood while minimizing event costs. The abduced events feed
//! an event-calculus belief state which in turn lets the engine anticipate
//! where and when hidden objects will resurface.

pub mod abduction;
pub mod anticipate;
pub mod baseline;
pub mod config;
pub mod events;
pub mod geometry;
pub mod ingest;
pub mod metrics;
pub mod motion;
pub mod pipeline;
pub mod testkit;

/// Identity of a motion track; assigned from a monotone counter and never
/// reused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TrackId(pub u64);

impl std::fmt::Display for TrackId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}
