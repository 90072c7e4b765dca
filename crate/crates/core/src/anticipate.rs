//! Reappearance anticipation for hidden tracks.
//!
//! A fully occluded track keeps coasting on its constant-velocity state. Both
//! the hidden track and its occluder are rolled forward until the occlusion
//! gate between their extrapolated boxes first fails; that time point and the
//! hidden track's box there are the predicted reappearance. Predictions whose
//! box enters the caution region soon enough raise a HIDDEN_ENTITY warning.

use crate::abduction::{Track, TrackStatus};
use crate::geometry::{occlusion_gate, Rect};
use crate::TrackId;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HorizonNote {
    WithinHorizon,
    BeyondHorizon,
}

/// Predicted unhide of one hidden track.
#[derive(Debug, Clone, PartialEq)]
pub struct ReappearancePrediction {
    pub track_id: TrackId,
    pub predicted_t: u32,
    pub predicted_rect: Rect,
    pub occluder_id: TrackId,
    pub note: HorizonNote,
}

pub const WARNING_KIND_HIDDEN_ENTITY: &str = "HIDDEN_ENTITY";

/// A safety warning: a hidden entity may reappear in the caution region.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Warning {
    pub kind: &'static str,
    pub track_id: u64,
    pub t_issued: u32,
    pub predicted_t: u32,
    pub predicted_rect: [f64; 4],
    pub region_name: String,
}

/// Predict when and where a hidden track resurfaces from behind its
/// occluder. `now` is the current frame; the returned prediction, if within
/// `horizon` frames, is the first future frame whose extrapolated boxes no
/// longer satisfy the occlusion gate. An ended occluder is held at its last
/// known box.
pub fn predict_unhide(
    hidden: &Track,
    occluder: &Track,
    now: u32,
    horizon: u32,
) -> Option<ReappearancePrediction> {
    debug_assert_eq!(hidden.status, TrackStatus::Halted);
    let occluder_moves = occluder.status != TrackStatus::Ended;
    for step in 1..=horizon {
        let hidden_rect = hidden.kalman.rect_after(step as u64);
        let occluder_rect = if occluder_moves {
            occluder.kalman.rect_after(step as u64)
        } else {
            occluder.kalman.rect()
        };
        if !occlusion_gate(&hidden_rect, &occluder_rect) {
            return Some(ReappearancePrediction {
                track_id: hidden.id,
                predicted_t: now + step,
                predicted_rect: hidden_rect,
                occluder_id: occluder.id,
                note: HorizonNote::WithinHorizon,
            });
        }
    }
    None
}

/// Filter predictions down to warnings: the predicted box must intersect the
/// caution region and the reappearance must be at most `warning_horizon`
/// frames away.
pub fn hidden_entity_warning(
    predictions: &[ReappearancePrediction],
    region: &Rect,
    region_name: &str,
    t_now: u32,
    warning_horizon: u32,
) -> Vec<Warning> {
    predictions
        .iter()
        .filter(|p| p.note == HorizonNote::WithinHorizon)
        .filter(|p| p.predicted_t.saturating_sub(t_now) <= warning_horizon)
        .filter(|p| p.predicted_rect.intersection_area(region) > 0.0)
        .map(|p| Warning {
            kind: WARNING_KIND_HIDDEN_ENTITY,
            track_id: p.track_id.0,
            t_issued: t_now,
            predicted_t: p.predicted_t,
            predicted_rect: [
                p.predicted_rect.x,
                p.predicted_rect.y,
                p.predicted_rect.w,
                p.predicted_rect.h,
            ],
            region_name: region_name.to_string(),
        })
        .collect()
}

impl Warning {
    /// Event-log line; same `t`/`event`/`args` keys as event records plus the
    /// warning payload.
    pub fn to_json_line(&self) -> String {
        serde_json::json!({
            "t": self.t_issued,
            "event": "warning",
            "args": [self.track_id],
            "kind": self.kind,
            "predicted_t": self.predicted_t,
            "predicted_rect": self.predicted_rect,
            "region": self.region_name,
        })
        .to_string()
    }
}
