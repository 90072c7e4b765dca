//! Reference implementations and generators backing the test suites: a
//! brute-force enumeration of the full per-frame hypothesis space, an
//! invariant checker for solved hypotheses, and a random problem generator.
//!
//! Nothing here is used by the engine. The brute-force search derives
//! admissibility and costs directly from the problem data so it stays an
//! independent check on the candidate enumeration and the branch-and-bound
//! search.

use crate::abduction::{Action, Hypothesis, Objective, ProblemSpec, TrackCtx, TrackStatus};
use crate::config::EngineConfig;
use crate::events::Event;
use crate::geometry::{iou, occlusion_gate, Rect};
use crate::ingest::{ClassLabel, Detection};
use crate::TrackId;
use rand::Rng;

#[derive(Clone, Debug)]
struct Option_ {
    action: Action,
    penalty: u64,
    likelihood: i64,
    cost: u64,
}

fn pair_admissible(p: &ProblemSpec, cfg: &EngineConfig, i: usize, j: usize) -> bool {
    let v = iou(&p.tracks[i].predicted, &p.observations[j].rect);
    v > 0.0
        && v >= cfg.iou_threshold
        && p.observations[j].confidence >= cfg.conf_threshold
        && p.observations[j].class_label == p.tracks[i].class_label
}

fn scaled(p: &ProblemSpec, i: usize, j: usize) -> i64 {
    (iou(&p.tracks[i].predicted, &p.observations[j].rect) * 1000.0).floor() as i64
}

fn near_border(p: &ProblemSpec, r: &Rect, cfg: &EngineConfig) -> bool {
    let (w, h) = p.image;
    r.x < cfg.fov_margin_px
        || r.y < cfg.fov_margin_px
        || r.right() > w - cfg.fov_margin_px
        || r.bottom() > h - cfg.fov_margin_px
}

fn track_options(p: &ProblemSpec, cfg: &EngineConfig, i: usize) -> Vec<Option_> {
    let trk = &p.tracks[i];
    let mut out = Vec::new();
    match trk.status {
        TrackStatus::Active => {
            for j in 0..p.observations.len() {
                if pair_admissible(p, cfg, i, j) {
                    out.push(Option_ {
                        action: Action::Assign { track: trk.id, obs: j },
                        penalty: 0,
                        likelihood: scaled(p, i, j),
                        cost: 0,
                    });
                }
            }
            if near_border(p, &trk.predicted, cfg) {
                out.push(Option_ {
                    action: Action::End { track: trk.id },
                    penalty: 0,
                    likelihood: 0,
                    cost: cfg.costs.end,
                });
            }
            let covered = p.tracks.iter().enumerate().any(|(k, other)| {
                k != i
                    && other.status == TrackStatus::Active
                    && occlusion_gate(&trk.predicted, &other.predicted)
            });
            out.push(Option_ {
                action: Action::Halt { track: trk.id },
                penalty: 0,
                likelihood: 0,
                cost: if covered {
                    cfg.costs.halt
                } else {
                    cfg.costs.halt + cfg.costs.missing
                },
            });
            out.push(Option_ {
                action: Action::IgnoreTrk { track: trk.id },
                penalty: 1,
                likelihood: 0,
                cost: 0,
            });
        }
        TrackStatus::Halted => {
            for j in 0..p.observations.len() {
                if pair_admissible(p, cfg, i, j) {
                    out.push(Option_ {
                        action: Action::Resume { track: trk.id, obs: j },
                        penalty: 0,
                        likelihood: scaled(p, i, j),
                        cost: cfg.costs.resume,
                    });
                }
            }
            out.push(Option_ {
                action: Action::IgnoreTrk { track: trk.id },
                penalty: 0,
                likelihood: 0,
                cost: 0,
            });
        }
        TrackStatus::Ended => unreachable!("ended tracks are excluded from problems"),
    }
    out
}

fn obs_options(p: &ProblemSpec, cfg: &EngineConfig, j: usize) -> Vec<Option_> {
    let confident = p.observations[j].confidence >= cfg.conf_threshold;
    let mut out = Vec::new();
    if confident || cfg.allow_low_conf_starts {
        out.push(Option_ {
            action: Action::Start { obs: j },
            penalty: 0,
            likelihood: 0,
            cost: cfg.costs.start,
        });
    }
    out.push(Option_ {
        action: Action::IgnoreDet { obs: j },
        penalty: u64::from(confident),
        likelihood: 0,
        cost: cfg.costs.ignore_det,
    });
    out
}

/// Comparison key of one action for canonical tie-breaking.
fn action_key(a: &Action) -> (u8, i64) {
    (a.order(), a.obs().map(|o| o as i64).unwrap_or(-1))
}

/// Exhaustive enumeration of the full hypothesis space. Returns the optimal
/// objective and the canonically smallest action list achieving it. Only
/// viable for small problems.
pub fn brute_force_solve(p: &ProblemSpec, cfg: &EngineConfig) -> (Objective, Vec<Action>) {
    let n = p.tracks.len();
    let m = p.observations.len();
    let per_track: Vec<Vec<Option_>> = (0..n).map(|i| track_options(p, cfg, i)).collect();
    let per_obs: Vec<Vec<Option_>> = (0..m).map(|j| obs_options(p, cfg, j)).collect();

    let mut best: Option<(Objective, Vec<Action>)> = None;
    let mut track_pick = vec![0usize; n];

    // Odometer over track options, then over options of each free obs.
    fn rec_tracks(
        depth: usize,
        per_track: &[Vec<Option_>],
        per_obs: &[Vec<Option_>],
        track_pick: &mut Vec<usize>,
        taken: &mut Vec<bool>,
        best: &mut Option<(Objective, Vec<Action>)>,
    ) {
        if depth == per_track.len() {
            let mut free: Vec<usize> = (0..per_obs.len()).filter(|j| !taken[*j]).collect();
            let mut obs_pick = vec![0usize; free.len()];
            rec_obs(0, per_track, per_obs, track_pick, &mut free, &mut obs_pick, best);
            return;
        }
        for idx in 0..per_track[depth].len() {
            let obs = per_track[depth][idx].action.obs();
            if let Some(o) = obs {
                if taken[o] {
                    continue;
                }
                taken[o] = true;
            }
            track_pick[depth] = idx;
            rec_tracks(depth + 1, per_track, per_obs, track_pick, taken, best);
            if let Some(o) = obs {
                taken[o] = false;
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn rec_obs(
        depth: usize,
        per_track: &[Vec<Option_>],
        per_obs: &[Vec<Option_>],
        track_pick: &[usize],
        free: &mut Vec<usize>,
        obs_pick: &mut Vec<usize>,
        best: &mut Option<(Objective, Vec<Action>)>,
    ) {
        if depth == free.len() {
            let mut total = Objective::default();
            let mut actions = Vec::new();
            for (i, &idx) in track_pick.iter().enumerate() {
                let o = &per_track[i][idx];
                total = total.add(&Objective {
                    penalty: o.penalty,
                    likelihood: o.likelihood,
                    event_cost: o.cost,
                });
                actions.push(o.action);
            }
            for (k, &j) in free.iter().enumerate() {
                let o = &per_obs[j][obs_pick[k]];
                total = total.add(&Objective {
                    penalty: o.penalty,
                    likelihood: o.likelihood,
                    event_cost: o.cost,
                });
                actions.push(o.action);
            }
            let keys: Vec<(u8, i64)> = actions.iter().map(action_key).collect();
            let replace = match best {
                None => true,
                Some((b, a)) => {
                    let bk: Vec<(u8, i64)> = a.iter().map(action_key).collect();
                    (total.key(), keys.clone()) < (b.key(), bk)
                }
            };
            if replace {
                *best = Some((total, actions));
            }
            return;
        }
        let j = free[depth];
        for idx in 0..per_obs[j].len() {
            obs_pick[depth] = idx;
            rec_obs(depth + 1, per_track, per_obs, track_pick, free, obs_pick, best);
        }
    }

    let mut taken = vec![false; m];
    rec_tracks(0, &per_track, &per_obs, &mut track_pick, &mut taken, &mut best);
    best.expect("ignore-everything hypothesis always exists")
}

/// Validate a solved hypothesis against the exclusivity, admissibility and
/// event-coupling contracts. Returns the violations found.
pub fn check_hypothesis(p: &ProblemSpec, cfg: &EngineConfig, h: &Hypothesis) -> Vec<String> {
    let mut violations = Vec::new();
    let mut track_cover = vec![0u32; p.tracks.len()];
    let mut obs_cover = vec![0u32; p.observations.len()];
    for action in &h.actions {
        if let Some(id) = action.track() {
            match p.tracks.iter().position(|c| c.id == id) {
                Some(i) => track_cover[i] += 1,
                None => violations.push(format!("action on unknown track {id}")),
            }
        }
        if let Some(o) = action.obs() {
            if o < obs_cover.len() {
                obs_cover[o] += 1;
            } else {
                violations.push(format!("action on unknown observation {o}"));
            }
        }
    }
    for (i, &c) in track_cover.iter().enumerate() {
        if c != 1 {
            violations.push(format!("track {} covered {c} times", p.tracks[i].id));
        }
    }
    for (j, &c) in obs_cover.iter().enumerate() {
        if c != 1 {
            violations.push(format!("observation {j} covered {c} times"));
        }
    }

    let mut expected_starts = 0u64;
    for action in &h.actions {
        match *action {
            Action::Assign { track, obs } | Action::Resume { track, obs } => {
                let i = match p.tracks.iter().position(|c| c.id == track) {
                    Some(i) => i,
                    None => continue,
                };
                let v = iou(&p.tracks[i].predicted, &p.observations[obs].rect);
                if v < cfg.iou_threshold || v <= 0.0 {
                    violations.push(format!("pair ({track},{obs}) below IoU threshold: {v}"));
                }
                if p.observations[obs].confidence < cfg.conf_threshold {
                    violations.push(format!("pair ({track},{obs}) below confidence threshold"));
                }
                if p.observations[obs].class_label != p.tracks[i].class_label {
                    violations.push(format!("pair ({track},{obs}) class mismatch"));
                }
                let is_resume = matches!(action, Action::Resume { .. });
                let halted = p.tracks[i].status == TrackStatus::Halted;
                if is_resume != halted {
                    violations.push(format!(
                        "action {action:?} inconsistent with track status {:?}",
                        p.tracks[i].status
                    ));
                }
                if is_resume {
                    match p.tracks[i].hidden_by {
                        Some(b) => {
                            if !h.events.contains(&Event::UnhidesFromBehind(track, b)) {
                                violations
                                    .push(format!("resume of {track} lacks its unhide event"));
                            }
                        }
                        None => {
                            if h.events
                                .iter()
                                .any(|e| matches!(e, Event::UnhidesFromBehind(a, _) if *a == track))
                            {
                                violations.push(format!(
                                    "resume of missing-detections track {track} must not unhide"
                                ));
                            }
                        }
                    }
                }
            }
            Action::Start { .. } => expected_starts += 1,
            Action::End { track } => {
                if !h.events.contains(&Event::LeavesFov(track)) {
                    violations.push(format!("end of {track} lacks leaves_fov"));
                }
            }
            Action::Halt { track } => {
                let explained = h.events.iter().any(|e| {
                    matches!(e, Event::HidesBehind(a, _) if *a == track)
                        || matches!(e, Event::MissingDetections(a) if *a == track)
                });
                if !explained {
                    violations.push(format!("halt of {track} lacks an explanation"));
                }
            }
            Action::IgnoreDet { .. } | Action::IgnoreTrk { .. } => {}
        }
    }
    let enter_events = h
        .events
        .iter()
        .filter(|e| matches!(e, Event::EntersFov(_)))
        .count() as u64;
    if enter_events != expected_starts {
        violations.push(format!(
            "{expected_starts} starts but {enter_events} entering events"
        ));
    }
    violations
}

/// Random small association problem with overlapping geometry, mixed classes
/// and statuses. Confidence values straddle the threshold so every
/// admissibility filter is exercised.
pub fn random_problem(rng: &mut impl Rng, max_tracks: usize, max_obs: usize) -> ProblemSpec {
    let n = rng.gen_range(0..=max_tracks);
    let m = rng.gen_range(0..=max_obs);
    let image = (400.0, 400.0);
    let classes = [ClassLabel::Car, ClassLabel::Pedestrian];
    let mut tracks = Vec::new();
    for i in 0..n {
        let w = rng.gen_range(20.0..60.0);
        let h = rng.gen_range(20.0..60.0);
        let x = rng.gen_range(0.0..image.0 - w);
        let y = rng.gen_range(0.0..image.1 - h);
        let halted = rng.gen_bool(0.25);
        let own = i as u64 + 1;
        let occluder = {
            let b = rng.gen_range(1..=8u64);
            if b == own {
                b + 1
            } else {
                b
            }
        };
        tracks.push(TrackCtx {
            id: TrackId(own),
            class_label: classes[rng.gen_range(0..2)],
            status: if halted {
                TrackStatus::Halted
            } else {
                TrackStatus::Active
            },
            hidden_by: if halted && rng.gen_bool(0.5) {
                Some(TrackId(occluder))
            } else {
                None
            },
            predicted: Rect::new(x, y, w, h).unwrap(),
        });
    }
    let mut observations = Vec::new();
    for _ in 0..m {
        // Most observations perturb an existing track box so admissible
        // pairs and contested assignments occur.
        let rect = if !tracks.is_empty() && rng.gen_bool(0.6) {
            let base = tracks[rng.gen_range(0..tracks.len())].predicted;
            let dx = rng.gen_range(-10.0..10.0);
            let dy = rng.gen_range(-10.0..10.0);
            Rect::new(
                (base.x + dx).clamp(0.0, image.0 - base.w),
                (base.y + dy).clamp(0.0, image.1 - base.h),
                base.w,
                base.h,
            )
            .unwrap()
        } else {
            let w = rng.gen_range(20.0..60.0);
            let h = rng.gen_range(20.0..60.0);
            Rect::new(
                rng.gen_range(0.0..image.0 - w),
                rng.gen_range(0.0..image.1 - h),
                w,
                h,
            )
            .unwrap()
        };
        observations.push(Detection {
            frame: 1,
            rect,
            class_label: classes[rng.gen_range(0..2)],
            confidence: rng.gen_range(0.2..1.0),
        });
    }
    crate::abduction::build_problem(
        tracks,
        observations,
        1,
        image,
        1000,
        &EngineConfig::default(),
    )
    .expect("generated ids are unique")
}
