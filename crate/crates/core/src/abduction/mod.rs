//! Per-frame joint abduction: formulate the assignment problem between
//! predicted tracks and observations, enumerate admissible actions with the
//! events explaining them, and solve exactly for the optimal hypothesis.

mod apply;
mod asp;
mod candidates;
mod solver;

pub use apply::apply_hypothesis;
pub use asp::export_asp;
pub use candidates::{enumerate_actions, CandidateSpace, Choice};
pub use solver::solve;

use crate::config::EngineConfig;
use crate::events::Event;
use crate::geometry::{iou, Rect};
use crate::ingest::{ClassLabel, Detection};
use crate::motion::KalmanState;
use crate::TrackId;
use thiserror::Error;

/// Scale applied to IoU values for exact integer optimization arithmetic.
pub const LIKELIHOOD_SCALE: f64 = 1000.0;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("duplicate track id {0} in problem")]
    DuplicateTrackId(TrackId),
    #[error("inconsistent hypothesis: {0}")]
    InconsistentHypothesis(String),
    #[error("hypothesis refers to unknown track {0}")]
    UnknownTrack(TrackId),
    #[error("frames must be processed in increasing order: got {got} after {last}")]
    OutOfOrderFrame { got: u32, last: u32 },
    #[error(transparent)]
    Event(#[from] crate::events::EventError),
    #[error(transparent)]
    Motion(#[from] crate::motion::MotionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackStatus {
    Active,
    Halted,
    Ended,
}

/// One motion track: identity, lifecycle status, filter state and the boxes
/// recorded so far.
#[derive(Debug, Clone)]
pub struct Track {
    pub id: TrackId,
    pub class_label: ClassLabel,
    pub status: TrackStatus,
    pub kalman: KalmanState,
    pub born_at: u32,
    /// Last frame with a supporting observation.
    pub last_seen: u32,
    /// Occluder while halted by occlusion; `None` for a halted track means
    /// its absence is explained by missing detections.
    pub hidden_by: Option<TrackId>,
    pub history: Vec<(u32, Rect)>,
}

impl Track {
    pub fn new(id: TrackId, det: &Detection, t: u32, cfg: &EngineConfig) -> Track {
        Track {
            id,
            class_label: det.class_label,
            status: TrackStatus::Active,
            kalman: KalmanState::init(&det.rect, &cfg.kalman),
            born_at: t,
            last_seen: t,
            hidden_by: None,
            history: vec![(t, det.rect)],
        }
    }
}

/// Snapshot of one non-ended track inside a frame's problem: everything the
/// association step needs to know about it.
#[derive(Debug, Clone)]
pub struct TrackCtx {
    pub id: TrackId,
    pub class_label: ClassLabel,
    pub status: TrackStatus,
    pub hidden_by: Option<TrackId>,
    /// Kalman prediction for this frame.
    pub predicted: Rect,
}

/// The per-frame problem: observations, predictions and the matching
/// likelihood matrix, plus the context needed to ground event preconditions.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub t: u32,
    pub tracks: Vec<TrackCtx>,
    pub observations: Vec<Detection>,
    /// `likelihoods[i][j]` is the IoU between track i's prediction and
    /// observation j, or 0 when below the admissibility threshold.
    pub likelihoods: Vec<Vec<f64>>,
    /// Image extent used for field-of-view border checks.
    pub image: (f64, f64),
    /// Id the next started track will receive.
    pub next_track_id: u64,
}

/// Build the problem for frame `t` from predicted tracks and observations.
pub fn build_problem(
    tracks: Vec<TrackCtx>,
    observations: Vec<Detection>,
    t: u32,
    image: (f64, f64),
    next_track_id: u64,
    cfg: &EngineConfig,
) -> Result<ProblemSpec, EngineError> {
    for (i, a) in tracks.iter().enumerate() {
        if tracks[..i].iter().any(|b| b.id == a.id) {
            return Err(EngineError::DuplicateTrackId(a.id));
        }
    }
    let likelihoods = tracks
        .iter()
        .map(|trk| {
            observations
                .iter()
                .map(|obs| {
                    let v = iou(&trk.predicted, &obs.rect);
                    if v >= cfg.iou_threshold && v > 0.0 {
                        v
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    Ok(ProblemSpec {
        t,
        tracks,
        observations,
        likelihoods,
        image,
        next_track_id,
    })
}

impl ProblemSpec {
    /// Scaled integer likelihood for exact optimization.
    pub fn scaled_likelihood(&self, track: usize, obs: usize) -> i64 {
        (self.likelihoods[track][obs] * LIKELIHOOD_SCALE).floor() as i64
    }

    /// Admissibility of assigning/resuming observation `obs` to track
    /// `track`: IoU at or above threshold, confident enough, same type.
    pub fn admissible_pair(&self, track: usize, obs: usize, cfg: &EngineConfig) -> bool {
        self.likelihoods[track][obs] > 0.0
            && self.observations[obs].confidence >= cfg.conf_threshold
            && self.observations[obs].class_label == self.tracks[track].class_label
    }

    /// True when the box touches the configured border band of the image.
    pub fn near_border(&self, rect: &Rect, cfg: &EngineConfig) -> bool {
        let (w, h) = self.image;
        let m = cfg.fov_margin_px;
        rect.x < m || rect.y < m || rect.right() > w - m || rect.bottom() > h - m
    }
}

/// Assignment actions; one per track and one per observation in every
/// hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Assign { track: TrackId, obs: usize },
    Start { obs: usize },
    End { track: TrackId },
    Halt { track: TrackId },
    Resume { track: TrackId, obs: usize },
    IgnoreDet { obs: usize },
    IgnoreTrk { track: TrackId },
}

impl Action {
    /// Position in the canonical action ordering used for tie-breaking.
    pub fn order(&self) -> u8 {
        match self {
            Action::Assign { .. } => 0,
            Action::Start { .. } => 1,
            Action::End { .. } => 2,
            Action::Halt { .. } => 3,
            Action::Resume { .. } => 4,
            Action::IgnoreDet { .. } => 5,
            Action::IgnoreTrk { .. } => 6,
        }
    }

    pub fn obs(&self) -> Option<usize> {
        match self {
            Action::Assign { obs, .. }
            | Action::Start { obs }
            | Action::Resume { obs, .. }
            | Action::IgnoreDet { obs } => Some(*obs),
            _ => None,
        }
    }

    pub fn track(&self) -> Option<TrackId> {
        match self {
            Action::Assign { track, .. }
            | Action::End { track }
            | Action::Halt { track }
            | Action::Resume { track, .. }
            | Action::IgnoreTrk { track } => Some(*track),
            _ => None,
        }
    }
}

/// Lexicographic objective; smaller key is better.
///
/// Level 1 minimizes unexplained leftovers (coasting active tracks, ignored
/// confident detections), level 2 maximizes total matching likelihood, level
/// 3 minimizes weighted event and association costs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Objective {
    pub penalty: u64,
    pub likelihood: i64,
    pub event_cost: u64,
}

impl Objective {
    pub fn key(&self) -> (u64, i64, u64) {
        (self.penalty, -self.likelihood, self.event_cost)
    }

    pub fn add(&self, other: &Objective) -> Objective {
        Objective {
            penalty: self.penalty + other.penalty,
            likelihood: self.likelihood + other.likelihood,
            event_cost: self.event_cost + other.event_cost,
        }
    }
}

impl PartialOrd for Objective {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Objective {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key().cmp(&other.key())
    }
}

/// One frame's abduced answer: actions for every track and observation, the
/// events explaining them, and the achieved objective.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub t: u32,
    /// Track actions in track order, then observation actions (start /
    /// ignore) in observation order.
    pub actions: Vec<Action>,
    pub events: Vec<Event>,
    pub objective: Objective,
}
