//! Functional event calculus over track fluents.
//!
//! Fluent values persist by inertia and change only when an event with an
//! effect on them occurs. Values are stored as change points, so memory is
//! proportional to the number of changes, not to sequence length. An event
//! occurring at `t` takes effect at `t`: a track hidden at `t` is
//! fully occluded from `t` on until the unhide event.
//!
//! Besides the five abducible events of the association layer there are two
//! observation-derived records (`partially_occluded_by`,
//! `becomes_fully_visible`) that keep the informational partial-occlusion
//! value reproducible from the event log alone.

use crate::geometry::{occlusion_gate, Rect};
use crate::TrackId;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EventError {
    #[error("unknown track {0:?} at time {1}")]
    UnknownTrack(TrackId, u32),
    #[error("inconsistent events at time {t}: {first} vs {second}")]
    Inconsistent { t: u32, first: String, second: String },
    #[error("event at time {0} precedes already-applied time {1}")]
    TimeRegression(u32, u32),
    #[error("malformed event record: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Visibility {
    FullyVisible,
    PartiallyOccluded,
    FullyOccluded,
}

impl Visibility {
    pub fn name(self) -> &'static str {
        match self {
            Visibility::FullyVisible => "fully_visible",
            Visibility::PartiallyOccluded => "partially_occluded",
            Visibility::FullyOccluded => "fully_occluded",
        }
    }
}

/// Scene events. The first five explain appearance and disappearance and are
/// abducible by the association layer; the last two only mirror observed
/// partial overlap into the visibility fluent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Event {
    EntersFov(TrackId),
    LeavesFov(TrackId),
    HidesBehind(TrackId, TrackId),
    UnhidesFromBehind(TrackId, TrackId),
    MissingDetections(TrackId),
    PartiallyOccludedBy(TrackId, TrackId),
    BecomesFullyVisible(TrackId),
}

impl Event {
    pub fn name(&self) -> &'static str {
        match self {
            Event::EntersFov(_) => "enters_fov",
            Event::LeavesFov(_) => "leaves_fov",
            Event::HidesBehind(..) => "hides_behind",
            Event::UnhidesFromBehind(..) => "unhides_from_behind",
            Event::MissingDetections(_) => "missing_detections",
            Event::PartiallyOccludedBy(..) => "partially_occluded_by",
            Event::BecomesFullyVisible(_) => "becomes_fully_visible",
        }
    }

    pub fn args(&self) -> Vec<u64> {
        match self {
            Event::EntersFov(a)
            | Event::LeavesFov(a)
            | Event::MissingDetections(a)
            | Event::BecomesFullyVisible(a) => vec![a.0],
            Event::HidesBehind(a, b)
            | Event::UnhidesFromBehind(a, b)
            | Event::PartiallyOccludedBy(a, b) => vec![a.0, b.0],
        }
    }

    /// Track the event is about (first argument).
    pub fn subject(&self) -> TrackId {
        match self {
            Event::EntersFov(a)
            | Event::LeavesFov(a)
            | Event::MissingDetections(a)
            | Event::BecomesFullyVisible(a)
            | Event::HidesBehind(a, _)
            | Event::UnhidesFromBehind(a, _)
            | Event::PartiallyOccludedBy(a, _) => *a,
        }
    }

    pub fn from_parts(name: &str, args: &[u64]) -> Option<Event> {
        let one = |f: fn(TrackId) -> Event| {
            if args.len() == 1 {
                Some(f(TrackId(args[0])))
            } else {
                None
            }
        };
        let two = |f: fn(TrackId, TrackId) -> Event| {
            if args.len() == 2 {
                Some(f(TrackId(args[0]), TrackId(args[1])))
            } else {
                None
            }
        };
        match name {
            "enters_fov" => one(Event::EntersFov),
            "leaves_fov" => one(Event::LeavesFov),
            "missing_detections" => one(Event::MissingDetections),
            "becomes_fully_visible" => one(Event::BecomesFullyVisible),
            "hides_behind" => two(Event::HidesBehind),
            "unhides_from_behind" => two(Event::UnhidesFromBehind),
            "partially_occluded_by" => two(Event::PartiallyOccludedBy),
            _ => None,
        }
    }
}

/// An event stamped with its time point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord {
    pub t: u32,
    pub event: Event,
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    t: u32,
    event: String,
    args: Vec<u64>,
}

impl EventRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&RecordLine {
            t: self.t,
            event: self.event.name().to_string(),
            args: self.event.args(),
        })
        .expect("record serialization is infallible")
    }

    pub fn from_json_line(line: &str) -> Result<EventRecord, EventError> {
        let raw: RecordLine =
            serde_json::from_str(line).map_err(|e| EventError::Malformed(e.to_string()))?;
        let event = Event::from_parts(&raw.event, &raw.args)
            .ok_or_else(|| EventError::Malformed(format!("unknown event `{}`", raw.event)))?;
        Ok(EventRecord { t: raw.t, event })
    }
}

/// Fluent instances for the query interface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fluent {
    InFov(TrackId),
    HiddenBy(TrackId, TrackId),
    Visibility(TrackId),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FluentValue {
    Bool(bool),
    Visibility(Visibility),
}

/// Change-point timeline of one value.
#[derive(Debug, Clone, PartialEq)]
struct Timeline<V: Copy> {
    points: Vec<(u32, V)>,
}

impl<V: Copy> Default for Timeline<V> {
    fn default() -> Self {
        Timeline { points: Vec::new() }
    }
}

impl<V: Copy> Timeline<V> {
    fn set(&mut self, t: u32, v: V) {
        match self.points.last_mut() {
            Some(last) if last.0 == t => last.1 = v,
            _ => self.points.push((t, v)),
        }
    }

    fn at(&self, t: u32, default: V) -> V {
        match self.points.partition_point(|(pt, _)| *pt <= t) {
            0 => default,
            n => self.points[n - 1].1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct TrackFluents {
    born: u32,
    in_fov: Timeline<bool>,
    visibility: Timeline<Visibility>,
    hidden_by: Timeline<Option<TrackId>>,
}

/// Belief state: all fluent timelines plus the applied-time high-water mark.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FluentState {
    tracks: BTreeMap<TrackId, TrackFluents>,
    last_t: u32,
}

/// Predicted boxes backing the spatial precondition of occlusion events.
pub struct GeometryContext<'a> {
    pub boxes: &'a BTreeMap<TrackId, Rect>,
}

impl FluentState {
    pub fn new() -> FluentState {
        FluentState::default()
    }

    pub fn knows(&self, trk: TrackId) -> bool {
        self.tracks.contains_key(&trk)
    }

    pub fn in_fov(&self, trk: TrackId, t: u32) -> Result<bool, EventError> {
        let f = self.tracks.get(&trk).ok_or(EventError::UnknownTrack(trk, t))?;
        Ok(f.in_fov.at(t, false))
    }

    pub fn visibility(&self, trk: TrackId, t: u32) -> Result<Visibility, EventError> {
        let f = self.tracks.get(&trk).ok_or(EventError::UnknownTrack(trk, t))?;
        Ok(f.visibility.at(t, Visibility::FullyVisible))
    }

    pub fn hidden_by(&self, trk: TrackId, t: u32) -> Result<Option<TrackId>, EventError> {
        let f = self.tracks.get(&trk).ok_or(EventError::UnknownTrack(trk, t))?;
        Ok(f.hidden_by.at(t, None))
    }

    /// Value of a fluent instance at time `t` (latest change point at or
    /// before `t`; defaults before any change).
    pub fn holds_at(&self, fluent: &Fluent, t: u32) -> Result<FluentValue, EventError> {
        Ok(match fluent {
            Fluent::InFov(a) => FluentValue::Bool(self.in_fov(*a, t)?),
            Fluent::HiddenBy(a, b) => FluentValue::Bool(self.hidden_by(*a, t)? == Some(*b)),
            Fluent::Visibility(a) => FluentValue::Visibility(self.visibility(*a, t)?),
        })
    }

    /// Apply the effects of all events occurring at one time point. The batch
    /// is validated for mutual consistency first; on error the state is
    /// unchanged.
    pub fn step_effects(&mut self, t: u32, events: &[Event]) -> Result<(), EventError> {
        if t < self.last_t {
            return Err(EventError::TimeRegression(t, self.last_t));
        }
        self.validate_batch(t, events)?;
        // Births first so same-frame events may refer to the new track.
        let ordered = events
            .iter()
            .filter(|e| matches!(e, Event::EntersFov(_)))
            .chain(events.iter().filter(|e| !matches!(e, Event::EntersFov(_))));
        for event in ordered {
            match *event {
                Event::EntersFov(a) => {
                    let f = self.tracks.entry(a).or_insert_with(|| TrackFluents {
                        born: t,
                        ..TrackFluents::default()
                    });
                    if f.visibility.points.is_empty() {
                        f.visibility.set(t, Visibility::FullyVisible);
                    }
                    f.in_fov.set(t, true);
                }
                Event::LeavesFov(a) => {
                    self.tracks.get_mut(&a).unwrap().in_fov.set(t, false);
                }
                Event::HidesBehind(a, b) => {
                    let f = self.tracks.get_mut(&a).unwrap();
                    f.hidden_by.set(t, Some(b));
                    f.visibility.set(t, Visibility::FullyOccluded);
                }
                Event::UnhidesFromBehind(a, _) => {
                    let f = self.tracks.get_mut(&a).unwrap();
                    f.hidden_by.set(t, None);
                    f.visibility.set(t, Visibility::FullyVisible);
                }
                Event::MissingDetections(_) => {}
                Event::PartiallyOccludedBy(a, _) => {
                    let f = self.tracks.get_mut(&a).unwrap();
                    f.visibility.set(t, Visibility::PartiallyOccluded);
                }
                Event::BecomesFullyVisible(a) => {
                    let f = self.tracks.get_mut(&a).unwrap();
                    f.visibility.set(t, Visibility::FullyVisible);
                }
            }
        }
        self.last_t = t;
        Ok(())
    }

    fn validate_batch(&self, t: u32, events: &[Event]) -> Result<(), EventError> {
        let inconsistent = |a: &Event, b: &Event| EventError::Inconsistent {
            t,
            first: format!("{}({:?})", a.name(), a.args()),
            second: format!("{}({:?})", b.name(), b.args()),
        };
        // Births within this batch make their subject known to later events
        // of the same time point (replay feeds whole frames at once).
        let entering: Vec<TrackId> = events
            .iter()
            .filter_map(|e| match e {
                Event::EntersFov(a) => Some(*a),
                _ => None,
            })
            .collect();
        for (i, e) in events.iter().enumerate() {
            if let Event::HidesBehind(a, b)
            | Event::UnhidesFromBehind(a, b)
            | Event::PartiallyOccludedBy(a, b) = e
            {
                if a == b {
                    return Err(inconsistent(e, e));
                }
            }
            if !matches!(e, Event::EntersFov(_))
                && !self.knows(e.subject())
                && !entering.contains(&e.subject())
            {
                return Err(EventError::UnknownTrack(e.subject(), t));
            }
            for other in &events[i + 1..] {
                if e.subject() != other.subject() {
                    continue;
                }
                let conflict = matches!(
                    (e, other),
                    (Event::HidesBehind(..), Event::UnhidesFromBehind(..))
                        | (Event::UnhidesFromBehind(..), Event::HidesBehind(..))
                        | (Event::HidesBehind(..), Event::HidesBehind(..))
                        | (Event::EntersFov(_), Event::LeavesFov(_))
                        | (Event::LeavesFov(_), Event::EntersFov(_))
                );
                if conflict {
                    return Err(inconsistent(e, other));
                }
            }
        }
        Ok(())
    }

    /// Whether an event may occur at time `t` given the state just before it
    /// and the predicted geometry.
    pub fn check_preconditions(&self, event: &Event, t: u32, geo: &GeometryContext) -> bool {
        let before = t.saturating_sub(1);
        match *event {
            Event::EntersFov(a) => !self.knows(a) || !self.in_fov(a, before).unwrap_or(false),
            Event::LeavesFov(a) => self.in_fov(a, before).unwrap_or(false),
            Event::HidesBehind(a, b) => {
                a != b
                    && self
                        .visibility(a, before)
                        .map(|v| v != Visibility::FullyOccluded)
                        .unwrap_or(false)
                    && match (geo.boxes.get(&a), geo.boxes.get(&b)) {
                        (Some(ra), Some(rb)) => occlusion_gate(ra, rb),
                        _ => false,
                    }
            }
            Event::UnhidesFromBehind(a, b) => self.hidden_by(a, before).unwrap_or(None) == Some(b),
            Event::MissingDetections(a) => self.knows(a),
            Event::PartiallyOccludedBy(a, b) => {
                a != b
                    && self
                        .visibility(a, before)
                        .map(|v| v != Visibility::FullyOccluded)
                        .unwrap_or(false)
            }
            Event::BecomesFullyVisible(a) => {
                self.visibility(a, before)
                    .map(|v| v == Visibility::PartiallyOccluded)
                    .unwrap_or(false)
            }
        }
    }

    /// Rebuild a state by replaying a chronological event log (warnings and
    /// other non-event lines must already be filtered out).
    pub fn replay(records: &[EventRecord]) -> Result<FluentState, EventError> {
        let mut state = FluentState::new();
        let mut i = 0;
        while i < records.len() {
            let t = records[i].t;
            let mut batch = Vec::new();
            while i < records.len() && records[i].t == t {
                batch.push(records[i].event);
                i += 1;
            }
            state.step_effects(t, &batch)?;
        }
        Ok(state)
    }
}
