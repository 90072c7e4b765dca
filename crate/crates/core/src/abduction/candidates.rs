//! Candidate generation: the admissible action/event space of one frame.
//!
//! Choice-rule semantics: every track picks exactly one action from its
//! candidate list, every observation ends up in exactly one action. The
//! integrity constraints (IoU threshold, confidence threshold, type match,
//! lifecycle status, spatial and border gates) are realized here as
//! admissibility filters, so the solver only ever sees legal combinations.

use super::{Action, Objective, ProblemSpec, TrackStatus};
use crate::config::EngineConfig;
use crate::events::Event;
use crate::geometry::occlusion_gate;
use crate::TrackId;

/// One admissible action with its coupled event (if any) and its objective
/// contribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Choice {
    pub action: Action,
    /// Explaining event. `None` for plain assigns/ignores and for starts,
    /// whose entering event is materialized when the new id is allocated.
    pub event: Option<Event>,
    pub contribution: Objective,
}

/// Admissible candidate actions per track and per observation, in canonical
/// order (action kind, then observation index).
#[derive(Debug, Clone)]
pub struct CandidateSpace {
    pub per_track: Vec<Vec<Choice>>,
    /// Options for observations not consumed by a track action.
    pub per_obs: Vec<Vec<Choice>>,
}

/// For a track that could be hidden, the occluder whose predicted box covers
/// it best: largest overlap area, smaller id on ties.
fn best_occluder(p: &ProblemSpec, idx: usize) -> Option<TrackId> {
    let subject = &p.tracks[idx];
    let mut best: Option<(f64, TrackId)> = None;
    for (j, other) in p.tracks.iter().enumerate() {
        if j == idx || other.status != TrackStatus::Active {
            continue;
        }
        if !occlusion_gate(&subject.predicted, &other.predicted) {
            continue;
        }
        let overlap = subject.predicted.intersection_area(&other.predicted);
        let better = match best {
            None => true,
            Some((area, id)) => {
                overlap > area || (overlap == area && other.id < id)
            }
        };
        if better {
            best = Some((overlap, other.id));
        }
    }
    best.map(|(_, id)| id)
}

/// Enumerate the admissible action/event space for one frame.
pub fn enumerate_actions(p: &ProblemSpec, cfg: &EngineConfig) -> CandidateSpace {
    let mut per_track = Vec::with_capacity(p.tracks.len());
    for (i, trk) in p.tracks.iter().enumerate() {
        let mut choices = Vec::new();
        match trk.status {
            TrackStatus::Active => {
                for obs in 0..p.observations.len() {
                    if p.admissible_pair(i, obs, cfg) {
                        choices.push(Choice {
                            action: Action::Assign { track: trk.id, obs },
                            event: None,
                            contribution: Objective {
                                penalty: 0,
                                likelihood: p.scaled_likelihood(i, obs),
                                event_cost: 0,
                            },
                        });
                    }
                }
                // Leaving the scene is only plausible at the border band.
                if p.near_border(&trk.predicted, cfg) {
                    choices.push(Choice {
                        action: Action::End { track: trk.id },
                        event: Some(Event::LeavesFov(trk.id)),
                        contribution: Objective {
                            penalty: 0,
                            likelihood: 0,
                            event_cost: cfg.costs.end,
                        },
                    });
                }
                // Halting is explained by occlusion when the geometry
                // supports it, otherwise by missing detections.
                let (event, event_cost) = match best_occluder(p, i) {
                    Some(b) => (Event::HidesBehind(trk.id, b), cfg.costs.halt),
                    None => (
                        Event::MissingDetections(trk.id),
                        cfg.costs.halt + cfg.costs.missing,
                    ),
                };
                choices.push(Choice {
                    action: Action::Halt { track: trk.id },
                    event: Some(event),
                    contribution: Objective {
                        penalty: 0,
                        likelihood: 0,
                        event_cost,
                    },
                });
                choices.push(Choice {
                    action: Action::IgnoreTrk { track: trk.id },
                    event: None,
                    contribution: Objective {
                        penalty: 1,
                        likelihood: 0,
                        event_cost: 0,
                    },
                });
            }
            TrackStatus::Halted => {
                for obs in 0..p.observations.len() {
                    if p.admissible_pair(i, obs, cfg) {
                        choices.push(Choice {
                            action: Action::Resume { track: trk.id, obs },
                            event: trk.hidden_by.map(|b| Event::UnhidesFromBehind(trk.id, b)),
                            contribution: Objective {
                                penalty: 0,
                                likelihood: p.scaled_likelihood(i, obs),
                                event_cost: cfg.costs.resume,
                            },
                        });
                    }
                }
                // A hidden track waits for free; its absence is already
                // explained by the halt that hid it.
                choices.push(Choice {
                    action: Action::IgnoreTrk { track: trk.id },
                    event: None,
                    contribution: Objective::default(),
                });
            }
            TrackStatus::Ended => {
                unreachable!("ended tracks are excluded from the problem");
            }
        }
        per_track.push(choices);
    }

    let mut per_obs = Vec::with_capacity(p.observations.len());
    for (j, det) in p.observations.iter().enumerate() {
        let mut choices = Vec::new();
        let confident = det.confidence >= cfg.conf_threshold;
        if confident || cfg.allow_low_conf_starts {
            choices.push(Choice {
                action: Action::Start { obs: j },
                event: None,
                contribution: Objective {
                    penalty: 0,
                    likelihood: 0,
                    event_cost: cfg.costs.start,
                },
            });
        }
        choices.push(Choice {
            action: Action::IgnoreDet { obs: j },
            event: None,
            contribution: Objective {
                penalty: u64::from(confident),
                likelihood: 0,
                event_cost: cfg.costs.ignore_det,
            },
        });
        per_obs.push(choices);
    }

    CandidateSpace { per_track, per_obs }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abduction::build_problem;
    use crate::geometry::Rect;
    use crate::ingest::{ClassLabel, Detection};
    use crate::TrackId;

    fn det(x: f64, y: f64, w: f64, h: f64, conf: f64, class: ClassLabel) -> Detection {
        Detection {
            frame: 1,
            rect: Rect::new(x, y, w, h).unwrap(),
            class_label: class,
            confidence: conf,
        }
    }

    fn ctx(id: u64, status: TrackStatus, rect: Rect, hidden_by: Option<u64>) -> super::super::TrackCtx {
        super::super::TrackCtx {
            id: TrackId(id),
            class_label: ClassLabel::Car,
            status,
            hidden_by: hidden_by.map(TrackId),
            predicted: rect,
        }
    }

    fn problem(
        tracks: Vec<super::super::TrackCtx>,
        dets: Vec<Detection>,
    ) -> super::super::ProblemSpec {
        build_problem(tracks, dets, 1, (1000.0, 1000.0), 100, &EngineConfig::default()).unwrap()
    }

    fn kinds(choices: &[Choice]) -> Vec<u8> {
        choices.iter().map(|c| c.action.order()).collect()
    }

    #[test]
    fn class_mismatch_blocks_assign() {
        let r = Rect::new(100.0, 100.0, 20.0, 20.0).unwrap();
        let p = problem(
            vec![ctx(1, TrackStatus::Active, r, None)],
            vec![det(100.0, 100.0, 20.0, 20.0, 0.9, ClassLabel::Pedestrian)],
        );
        let space = enumerate_actions(&p, &EngineConfig::default());
        assert!(!kinds(&space.per_track[0]).contains(&0), "assign must be inadmissible");
    }

    #[test]
    fn low_confidence_leaves_only_ignore() {
        let p = problem(
            vec![],
            vec![det(100.0, 100.0, 20.0, 20.0, 0.3, ClassLabel::Car)],
        );
        let cfg = EngineConfig::default();
        let space = enumerate_actions(&p, &cfg);
        assert_eq!(kinds(&space.per_obs[0]), vec![5]); // ignore_det only
        let mut permissive = cfg.clone();
        permissive.allow_low_conf_starts = true;
        let space = enumerate_actions(&p, &permissive);
        assert_eq!(kinds(&space.per_obs[0]), vec![1, 5]);
    }

    /// Exhaustive status-machine check: which action kinds are admissible for
    /// each (status, has-admissible-observation) combination.
    #[test]
    fn status_machine() {
        let interior = Rect::new(400.0, 400.0, 20.0, 20.0).unwrap();
        for status in [TrackStatus::Active, TrackStatus::Halted] {
            for has_obs in [false, true] {
                let dets = if has_obs {
                    vec![det(400.0, 400.0, 20.0, 20.0, 0.9, ClassLabel::Car)]
                } else {
                    vec![]
                };
                let p = problem(vec![ctx(1, status, interior, None)], dets);
                let space = enumerate_actions(&p, &EngineConfig::default());
                let got = kinds(&space.per_track[0]);
                let expected: Vec<u8> = match (status, has_obs) {
                    // interior track: no end; halt + ignore always
                    (TrackStatus::Active, false) => vec![3, 6],
                    (TrackStatus::Active, true) => vec![0, 3, 6],
                    (TrackStatus::Halted, false) => vec![6],
                    (TrackStatus::Halted, true) => vec![4, 6],
                    (TrackStatus::Ended, _) => unreachable!(),
                };
                assert_eq!(got, expected, "status {status:?}, has_obs {has_obs}");
            }
        }
    }

    #[test]
    fn border_track_may_end() {
        let border = Rect::new(2.0, 400.0, 20.0, 20.0).unwrap();
        let p = problem(vec![ctx(1, TrackStatus::Active, border, None)], vec![]);
        let space = enumerate_actions(&p, &EngineConfig::default());
        assert_eq!(kinds(&space.per_track[0]), vec![2, 3, 6]);
        let end = &space.per_track[0][0];
        assert_eq!(end.event, Some(Event::LeavesFov(TrackId(1))));
    }

    #[test]
    fn halt_prefers_covering_occluder() {
        let hidden = Rect::new(100.0, 100.0, 20.0, 20.0).unwrap();
        let occluder = Rect::new(95.0, 95.0, 40.0, 40.0).unwrap();
        let p = problem(
            vec![
                ctx(1, TrackStatus::Active, hidden, None),
                ctx(2, TrackStatus::Active, occluder, None),
            ],
            vec![],
        );
        let space = enumerate_actions(&p, &EngineConfig::default());
        let halt = space.per_track[0]
            .iter()
            .find(|c| matches!(c.action, Action::Halt { .. }))
            .unwrap();
        assert_eq!(halt.event, Some(Event::HidesBehind(TrackId(1), TrackId(2))));
        assert_eq!(halt.contribution.event_cost, 4);
        // the occluder itself is not covered: its halt falls back to missing
        let halt2 = space.per_track[1]
            .iter()
            .find(|c| matches!(c.action, Action::Halt { .. }))
            .unwrap();
        assert_eq!(
            halt2.event,
            Some(Event::MissingDetections(TrackId(2)))
        );
        assert_eq!(halt2.contribution.event_cost, 10);
    }

    #[test]
    fn resume_carries_unhide_event() {
        let r = Rect::new(100.0, 100.0, 20.0, 20.0).unwrap();
        let p = problem(
            vec![ctx(1, TrackStatus::Halted, r, Some(5))],
            vec![det(102.0, 101.0, 20.0, 20.0, 0.9, ClassLabel::Car)],
        );
        let space = enumerate_actions(&p, &EngineConfig::default());
        let resume = &space.per_track[0][0];
        assert_eq!(
            resume.event,
            Some(Event::UnhidesFromBehind(TrackId(1), TrackId(5)))
        );
        // halted for missing detections: resume needs no event
        let p = problem(
            vec![ctx(1, TrackStatus::Halted, r, None)],
            vec![det(102.0, 101.0, 20.0, 20.0, 0.9, ClassLabel::Car)],
        );
        let space = enumerate_actions(&p, &EngineConfig::default());
        assert_eq!(space.per_track[0][0].event, None);
    }
}
