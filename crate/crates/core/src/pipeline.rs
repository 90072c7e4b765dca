//! The online frame loop: observe, predict, build the problem, solve, commit
//! the hypothesis, propagate fluent effects, anticipate reappearances.
//!
//! `Engine::step` consumes exactly one frame and may only move forward in
//! time; skipped frame numbers are processed as frames with zero detections
//! so coasting and retirement keep advancing through detector dropouts.
//! Per-frame wall time covers the reasoning work only, not ingestion.

use crate::abduction::{
    apply_hypothesis, build_problem, export_asp, solve, EngineError, Hypothesis, Track, TrackCtx,
    TrackStatus,
};
use crate::anticipate::{hidden_entity_warning, predict_unhide, ReappearancePrediction, Warning};
use crate::config::EngineConfig;
use crate::events::{Event, EventRecord, FluentState, Visibility};
use crate::geometry::{iou, Rect};
use crate::ingest::Detection;
use crate::ingest::TrackFrames;
use crate::motion::Prediction;
use std::time::{Duration, Instant};

/// Everything produced for one processed frame.
#[derive(Debug, Clone)]
pub struct FrameOutput {
    pub t: u32,
    pub hypothesis: Hypothesis,
    pub events: Vec<EventRecord>,
    pub warnings: Vec<Warning>,
    pub elapsed: Duration,
}

/// Final result of a sequence: the motion tracks with full histories, the
/// chronological event record, warnings, and per-frame timings.
#[derive(Debug, Clone)]
pub struct Explanation {
    pub tracks: Vec<Track>,
    pub events: Vec<EventRecord>,
    pub warnings: Vec<Warning>,
    pub timings: Vec<(u32, Duration)>,
    pub fluents: FluentState,
    /// Effective image extent (configured or inferred from detections).
    pub image: (f64, f64),
}

impl Explanation {
    /// Track boxes grouped by frame, ids ascending, ready for the MOT result
    /// format or evaluation.
    pub fn track_frames(&self) -> TrackFrames {
        let mut out = TrackFrames::new();
        for track in &self.tracks {
            for (t, rect) in &track.history {
                out.entry(*t).or_default().push((track.id.0, *rect));
            }
        }
        for rows in out.values_mut() {
            rows.sort_by_key(|(id, _)| *id);
        }
        out
    }

    /// Event log: one JSON line per record; a frame's warnings come after
    /// that frame's events.
    pub fn event_log_lines(&self) -> Vec<String> {
        let mut lines = Vec::with_capacity(self.events.len() + self.warnings.len());
        let mut warnings = self.warnings.iter().peekable();
        for e in &self.events {
            while warnings.peek().is_some_and(|w| w.t_issued < e.t) {
                lines.push(warnings.next().unwrap().to_json_line());
            }
            lines.push(e.to_json_line());
        }
        for w in warnings {
            lines.push(w.to_json_line());
        }
        lines
    }

    /// Median and 95th percentile of per-frame processing time, in
    /// milliseconds.
    pub fn timing_summary(&self) -> (f64, f64) {
        if self.timings.is_empty() {
            return (0.0, 0.0);
        }
        let mut ms: Vec<f64> = self
            .timings
            .iter()
            .map(|(_, d)| d.as_secs_f64() * 1e3)
            .collect();
        ms.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = ms[ms.len() / 2];
        let p95 = ms[((ms.len() as f64 * 0.95) as usize).min(ms.len() - 1)];
        (median, p95)
    }
}

/// Online tracking engine; one instance per sequence.
pub struct Engine {
    cfg: EngineConfig,
    tracks: Vec<Track>,
    fluents: FluentState,
    events: Vec<EventRecord>,
    warnings: Vec<Warning>,
    timings: Vec<(u32, Duration)>,
    next_id: u64,
    last_frame: Option<u32>,
    extent: Option<(f64, f64)>,
    /// Ground programs per frame, populated when ASP export is enabled.
    pub asp_programs: Vec<(u32, String)>,
    export_asp_enabled: bool,
}

impl Engine {
    pub fn new(cfg: EngineConfig) -> Engine {
        Engine {
            cfg,
            tracks: Vec::new(),
            fluents: FluentState::new(),
            events: Vec::new(),
            warnings: Vec::new(),
            timings: Vec::new(),
            next_id: 1,
            last_frame: None,
            extent: None,
            asp_programs: Vec::new(),
            export_asp_enabled: false,
        }
    }

    pub fn with_asp_export(cfg: EngineConfig) -> Engine {
        let mut engine = Engine::new(cfg);
        engine.export_asp_enabled = true;
        engine
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn fluents(&self) -> &FluentState {
        &self.fluents
    }

    /// Process frame `t`. Frames must arrive in increasing order; skipped
    /// frame numbers in between are run as empty frames first.
    pub fn step(&mut self, t: u32, dets: &[Detection]) -> Result<FrameOutput, EngineError> {
        if let Some(last) = self.last_frame {
            if t <= last {
                return Err(EngineError::OutOfOrderFrame { got: t, last });
            }
            for gap in last + 1..t {
                self.process_one(gap, &[])?;
            }
        }
        self.process_one(t, dets)
    }

    fn image_extent(&self) -> (f64, f64) {
        self.cfg
            .image_size
            .or(self.extent)
            .unwrap_or((1920.0, 1080.0))
    }

    fn process_one(&mut self, t: u32, dets: &[Detection]) -> Result<FrameOutput, EngineError> {
        let started = Instant::now();
        if self.cfg.image_size.is_none() {
            for d in dets {
                let (x1, y1) = (d.rect.right(), d.rect.bottom());
                let e = self.extent.get_or_insert((x1, y1));
                e.0 = e.0.max(x1);
                e.1 = e.1.max(y1);
            }
        }
        let image = self.image_extent();

        // Time update for every live track; hidden tracks coast.
        let mut ctxs = Vec::new();
        for track in self.tracks.iter_mut() {
            if track.status == TrackStatus::Ended {
                continue;
            }
            let (state, rect, area_clamped) = track.kalman.predict(&self.cfg.kalman);
            track.kalman = state;
            let prediction = Prediction {
                track_id: track.id,
                rect,
                valid: track.kalman.has_measurement(),
                area_clamped,
            };
            if !prediction.valid {
                continue;
            }
            ctxs.push(TrackCtx {
                id: track.id,
                class_label: track.class_label,
                status: track.status,
                hidden_by: track.hidden_by,
                predicted: prediction.rect,
            });
        }

        let problem = build_problem(ctxs, dets.to_vec(), t, image, self.next_id, &self.cfg)?;
        if self.export_asp_enabled {
            self.asp_programs.push((t, export_asp(&problem, &self.cfg)));
        }
        let hypothesis = solve(&problem, &self.cfg);
        #[cfg(debug_assertions)]
        {
            // The abduced events must satisfy their event-calculus
            // preconditions against the belief state before this frame.
            let boxes: std::collections::BTreeMap<crate::TrackId, Rect> =
                problem.tracks.iter().map(|c| (c.id, c.predicted)).collect();
            let geo = crate::events::GeometryContext { boxes: &boxes };
            for event in &hypothesis.events {
                debug_assert!(
                    self.fluents.check_preconditions(event, t, &geo),
                    "abduced event {event:?} violates its precondition at frame {t}"
                );
            }
        }
        apply_hypothesis(
            &mut self.tracks,
            &problem,
            &hypothesis,
            &self.cfg,
            &mut self.next_id,
        )?;

        let mut frame_events: Vec<EventRecord> = Vec::new();
        if !hypothesis.events.is_empty() {
            self.fluents.step_effects(t, &hypothesis.events)?;
            frame_events.extend(hypothesis.events.iter().map(|&event| EventRecord { t, event }));
        }

        let partial = self.partial_occlusion_events(t)?;
        if !partial.is_empty() {
            self.fluents.step_effects(t, &partial)?;
            frame_events.extend(partial.into_iter().map(|event| EventRecord { t, event }));
        }

        let warnings = self.anticipation_pass(t, image);
        self.events.extend(frame_events.iter().cloned());
        self.warnings.extend(warnings.iter().cloned());
        let elapsed = started.elapsed();
        self.timings.push((t, elapsed));
        self.last_frame = Some(t);
        Ok(FrameOutput {
            t,
            hypothesis,
            events: frame_events,
            warnings,
            elapsed,
        })
    }

    /// Observation-derived partial-occlusion transitions for tracks with a
    /// box in this frame.
    fn partial_occlusion_events(&self, t: u32) -> Result<Vec<Event>, EngineError> {
        let boxes: Vec<(usize, Rect)> = self
            .tracks
            .iter()
            .enumerate()
            .filter(|(_, trk)| trk.status == TrackStatus::Active)
            .filter_map(|(i, trk)| match trk.history.last() {
                Some(&(ht, rect)) if ht == t => Some((i, rect)),
                _ => None,
            })
            .collect();
        let mut out = Vec::new();
        for &(i, rect) in &boxes {
            let track = &self.tracks[i];
            if track.last_seen != t {
                continue; // coasting tracks keep their previous visibility
            }
            let mut best: Option<(f64, crate::TrackId)> = None;
            for &(j, other_rect) in &boxes {
                if i == j {
                    continue;
                }
                let v = iou(&rect, &other_rect);
                if v > 0.0 && v < self.cfg.partial_occlusion_gate {
                    let better = match best {
                        None => true,
                        Some((bv, bid)) => v > bv || (v == bv && self.tracks[j].id < bid),
                    };
                    if better {
                        best = Some((v, self.tracks[j].id));
                    }
                }
            }
            let was_partial = self
                .fluents
                .visibility(track.id, t)
                .map(|v| v == Visibility::PartiallyOccluded)
                .unwrap_or(false);
            match (best, was_partial) {
                (Some((_, occluder)), false) => {
                    out.push(Event::PartiallyOccludedBy(track.id, occluder));
                }
                (None, true) => out.push(Event::BecomesFullyVisible(track.id)),
                _ => {}
            }
        }
        Ok(out)
    }

    fn anticipation_pass(&self, t: u32, image: (f64, f64)) -> Vec<Warning> {
        let mut predictions: Vec<ReappearancePrediction> = Vec::new();
        for track in &self.tracks {
            if track.status != TrackStatus::Halted {
                continue;
            }
            let Some(occluder_id) = track.hidden_by else {
                continue;
            };
            let Some(occluder) = self.tracks.iter().find(|o| o.id == occluder_id) else {
                continue;
            };
            if let Some(pred) =
                predict_unhide(track, occluder, t, self.cfg.prediction_horizon as u32)
            {
                predictions.push(pred);
            }
        }
        let region = self.cfg.caution_region_for(image);
        hidden_entity_warning(
            &predictions,
            &region,
            "caution",
            t,
            self.cfg.warning_horizon as u32,
        )
    }

    pub fn finish(self) -> Explanation {
        Explanation {
            tracks: self.tracks,
            events: self.events,
            warnings: self.warnings,
            timings: self.timings,
            fluents: self.fluents,
            image: self
                .cfg
                .image_size
                .or(self.extent)
                .unwrap_or((1920.0, 1080.0)),
        }
    }
}

/// Run a whole detection stream through the engine.
pub fn process_sequence<I>(dets: I, cfg: &EngineConfig) -> Result<Explanation, EngineError>
where
    I: IntoIterator<Item = (u32, Vec<Detection>)>,
{
    let mut engine = Engine::new(cfg.clone());
    for (t, frame_dets) in dets {
        engine.step(t, &frame_dets)?;
    }
    Ok(engine.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{ClassLabel, FrameDetections};

    fn det(frame: u32, x: f64, y: f64) -> Detection {
        Detection {
            frame,
            rect: Rect::new(x, y, 30.0, 30.0).unwrap(),
            class_label: ClassLabel::Car,
            confidence: 0.9,
        }
    }

    #[test]
    fn empty_stream_is_empty_explanation() {
        let exp = process_sequence(FrameDetections::new(), &EngineConfig::default()).unwrap();
        assert!(exp.tracks.is_empty());
        assert!(exp.events.is_empty());
        assert!(exp.warnings.is_empty());
    }

    #[test]
    fn out_of_order_frames_rejected() {
        let mut engine = Engine::new(EngineConfig::default());
        engine.step(5, &[]).unwrap();
        assert!(matches!(
            engine.step(5, &[]),
            Err(EngineError::OutOfOrderFrame { got: 5, last: 5 })
        ));
    }

    #[test]
    fn gap_frames_advance_retirement() {
        let cfg = EngineConfig {
            max_halt_duration: 3,
            image_size: Some((1000.0, 1000.0)),
            ..EngineConfig::default()
        };
        let mut engine = Engine::new(cfg);
        engine.step(1, &[det(1, 400.0, 400.0)]).unwrap();
        // jump far ahead; the gap frames must halt and then retire the track
        engine.step(10, &[]).unwrap();
        assert_eq!(engine.tracks()[0].status, TrackStatus::Ended);
        assert_eq!(engine.timings.len(), 10);
    }

    #[test]
    fn single_linear_object_is_one_track_one_event() {
        let cfg = EngineConfig {
            image_size: Some((1000.0, 1000.0)),
            ..EngineConfig::default()
        };
        let mut frames = FrameDetections::new();
        for t in 1..=20 {
            frames.insert(t, vec![det(t, 100.0 + 5.0 * t as f64, 300.0)]);
        }
        let exp = process_sequence(frames, &cfg).unwrap();
        assert_eq!(exp.tracks.len(), 1);
        let track = &exp.tracks[0];
        assert_eq!(track.history.len(), 20);
        assert_eq!(track.status, TrackStatus::Active);
        assert_eq!(exp.events.len(), 1);
        assert!(matches!(exp.events[0].event, Event::EntersFov(_)));
        assert_eq!(exp.events[0].t, 1);
    }

    #[test]
    fn frames_without_detections_keep_tracks_coasting() {
        let cfg = EngineConfig {
            image_size: Some((1000.0, 1000.0)),
            ..EngineConfig::default()
        };
        let mut engine = Engine::new(cfg);
        for t in 1..=3 {
            engine.step(t, &[det(t, 100.0 + 5.0 * t as f64, 300.0)]).unwrap();
        }
        engine.step(4, &[]).unwrap();
        let out = engine.step(5, &[det(5, 125.0, 300.0)]).unwrap();
        // the track was halted on the empty frame and resumes here
        assert!(out
            .hypothesis
            .actions
            .iter()
            .any(|a| matches!(a, crate::abduction::Action::Resume { .. })));
        let track = &engine.tracks()[0];
        assert_eq!(track.status, TrackStatus::Active);
        assert_eq!(track.history.len(), 5);
        assert_eq!(engine.tracks().len(), 1);
    }
}
