//! Commit a solved hypothesis to the track set: measurement updates, status
//! transitions, track births and retirement of tracks that stayed
//! unsupported for too long.

use super::{Action, EngineError, Hypothesis, ProblemSpec, Track, TrackStatus};
use crate::config::EngineConfig;
use crate::events::Event;
use crate::TrackId;
use std::collections::BTreeMap;

/// Apply `h` to the track set. New tracks take ids from `next_id`, which is
/// advanced. The hypothesis is validated against the exclusivity contract
/// first; a violation is a hard error and leaves the tracks untouched.
pub fn apply_hypothesis(
    tracks: &mut Vec<Track>,
    p: &ProblemSpec,
    h: &Hypothesis,
    cfg: &EngineConfig,
    next_id: &mut u64,
) -> Result<(), EngineError> {
    validate(p, h)?;
    let t = h.t;
    let predicted: BTreeMap<TrackId, crate::geometry::Rect> =
        p.tracks.iter().map(|c| (c.id, c.predicted)).collect();
    let occluder_of = |trk: TrackId| -> Option<TrackId> {
        h.events.iter().find_map(|e| match e {
            Event::HidesBehind(a, b) if *a == trk => Some(*b),
            _ => None,
        })
    };

    for action in &h.actions {
        match *action {
            Action::Assign { track, obs } | Action::Resume { track, obs } => {
                let trk = find(tracks, track)?;
                let rect = p.observations[obs].rect;
                trk.kalman = trk.kalman.update(&rect, &cfg.kalman)?;
                trk.status = TrackStatus::Active;
                trk.hidden_by = None;
                trk.last_seen = t;
                trk.history.push((t, rect));
            }
            Action::Start { obs } => {
                let det = &p.observations[obs];
                let track = Track::new(TrackId(*next_id), det, t, cfg);
                *next_id += 1;
                tracks.push(track);
            }
            Action::End { track } => {
                find(tracks, track)?.status = TrackStatus::Ended;
            }
            Action::Halt { track } => {
                let hidden_by = occluder_of(track);
                let trk = find(tracks, track)?;
                trk.status = TrackStatus::Halted;
                trk.hidden_by = hidden_by;
                if let Some(rect) = predicted.get(&track) {
                    trk.history.push((t, *rect));
                }
            }
            Action::IgnoreTrk { track } => {
                // Coast: both active and hidden tracks keep their predicted
                // box so the interpolated position is part of the record.
                let trk = find(tracks, track)?;
                if let Some(rect) = predicted.get(&track) {
                    trk.history.push((t, *rect));
                }
            }
            Action::IgnoreDet { .. } => {}
        }
    }

    // Retirement: unsupported for longer than the configured halt budget.
    for trk in tracks.iter_mut() {
        if trk.status != TrackStatus::Ended && t - trk.last_seen > cfg.max_halt_duration as u32 {
            trk.status = TrackStatus::Ended;
        }
    }
    Ok(())
}

fn find(tracks: &mut [Track], id: TrackId) -> Result<&mut Track, EngineError> {
    tracks
        .iter_mut()
        .find(|t| t.id == id)
        .ok_or(EngineError::UnknownTrack(id))
}

/// Exclusivity: exactly one action per problem track, exactly one action per
/// observation. Unreachable from `solve`, checked anyway.
fn validate(p: &ProblemSpec, h: &Hypothesis) -> Result<(), EngineError> {
    let mut track_seen = vec![0u32; p.tracks.len()];
    let mut obs_seen = vec![0u32; p.observations.len()];
    for action in &h.actions {
        if let Some(id) = action.track() {
            match p.tracks.iter().position(|c| c.id == id) {
                Some(i) => track_seen[i] += 1,
                None => return Err(EngineError::UnknownTrack(id)),
            }
        }
        if let Some(obs) = action.obs() {
            if obs >= obs_seen.len() {
                return Err(EngineError::InconsistentHypothesis(format!(
                    "observation index {obs} out of range"
                )));
            }
            obs_seen[obs] += 1;
        }
    }
    if let Some(i) = track_seen.iter().position(|&c| c != 1) {
        return Err(EngineError::InconsistentHypothesis(format!(
            "track {} covered {} times",
            p.tracks[i].id, track_seen[i]
        )));
    }
    if let Some(j) = obs_seen.iter().position(|&c| c != 1) {
        return Err(EngineError::InconsistentHypothesis(format!(
            "observation {} covered {} times",
            j, obs_seen[j]
        )));
    }
    Ok(())
}
