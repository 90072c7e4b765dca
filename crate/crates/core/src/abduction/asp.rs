//! Ground ASP program export: one self-contained program per frame whose
//! optimal answer set corresponds to the hypothesis returned by the native
//! solver. Used to cross-check the optimizer against an external answer-set
//! system; the native engine never parses these programs back.

use super::{ProblemSpec, TrackStatus};
use crate::config::EngineConfig;
use std::fmt::Write as _;

/// Emit the frame's association problem as an ASP-Core-2 ground program.
///
/// Candidate predicates are precomputed facts (the numeric geometry lives on
/// this side), the choice rules and optimization statements mirror the native
/// objective: level 3 penalizes unexplained leftovers, level 2 maximizes
/// matching likelihood, level 1 carries the event/association costs.
pub fn export_asp(p: &ProblemSpec, cfg: &EngineConfig) -> String {
    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(w, "% frame {}", p.t);
    let _ = writeln!(w, "frame({}).", p.t);
    let space = super::enumerate_actions(p, cfg);

    for trk in &p.tracks {
        let _ = writeln!(w, "trk({}).", trk.id);
        let _ = writeln!(w, "type_of(trk({}),{}).", trk.id, trk.class_label.name());
        let status = match trk.status {
            TrackStatus::Active => "active",
            TrackStatus::Halted => "halted",
            TrackStatus::Ended => unreachable!("ended tracks are excluded"),
        };
        let _ = writeln!(w, "status({},{}).", trk.id, status);
        if let Some(b) = trk.hidden_by {
            let _ = writeln!(w, "hidden({},{}).", trk.id, b);
        }
    }
    for (j, obs) in p.observations.iter().enumerate() {
        let _ = writeln!(w, "det({j}).");
        let _ = writeln!(w, "type_of(det({j}),{}).", obs.class_label.name());
        let _ = writeln!(
            w,
            "conf({j},{}).",
            (obs.confidence * 1000.0).floor() as i64
        );
        if obs.confidence >= cfg.conf_threshold {
            let _ = writeln!(w, "highconf({j}).");
        }
    }
    for (i, trk) in p.tracks.iter().enumerate() {
        for j in 0..p.observations.len() {
            if p.likelihoods[i][j] > 0.0 {
                let _ = writeln!(w, "iou({},{},{}).", trk.id, j, p.scaled_likelihood(i, j));
            }
        }
    }

    // Admissible candidates as facts.
    for (i, choices) in space.per_track.iter().enumerate() {
        let id = p.tracks[i].id;
        for c in choices {
            match c.action {
                super::Action::Assign { obs, .. } => {
                    let _ = writeln!(w, "cand_assign({id},{obs}).");
                }
                super::Action::Resume { obs, .. } => {
                    let _ = writeln!(w, "cand_resume({id},{obs}).");
                }
                super::Action::End { .. } => {
                    let _ = writeln!(w, "cand_end({id}).");
                }
                super::Action::Halt { .. } => {
                    match c.event {
                        Some(crate::events::Event::HidesBehind(_, b)) => {
                            let _ = writeln!(w, "cand_halt_hide({id},{b}).");
                        }
                        _ => {
                            let _ = writeln!(w, "cand_halt_miss({id}).");
                        }
                    }
                    let _ = writeln!(w, "cand_halt({id}).");
                }
                super::Action::IgnoreTrk { .. } => {}
                _ => {}
            }
        }
    }
    for (j, choices) in space.per_obs.iter().enumerate() {
        if choices
            .iter()
            .any(|c| matches!(c.action, super::Action::Start { .. }))
        {
            let _ = writeln!(w, "cand_start({j}).");
        }
    }

    let costs = &cfg.costs;
    let _ = write!(
        w,
        "\n% choice rules: exactly one action per track and per detection\n\
         1 {{ action(assign(T,D)) : cand_assign(T,D) ;\n\
         \x20    action(resume(T,D)) : cand_resume(T,D) ;\n\
         \x20    action(halt(T)) : cand_halt(T) ;\n\
         \x20    action(end(T)) : cand_end(T) ;\n\
         \x20    action(ignore_trk(T)) }} 1 :- trk(T).\n\
         1 {{ action(assign(T,D)) : cand_assign(T,D) ;\n\
         \x20    action(resume(T,D)) : cand_resume(T,D) ;\n\
         \x20    action(start(D)) : cand_start(D) ;\n\
         \x20    action(ignore_det(D)) }} 1 :- det(D).\n\
         \n% event generation coupled to the chosen actions\n\
         1 {{ ev(hides_behind(T,B)) : cand_halt_hide(T,B) ;\n\
         \x20    ev(missing_detections(T)) : cand_halt_miss(T) }} 1 :- action(halt(T)).\n\
         ev(enters_fov(D)) :- action(start(D)).\n\
         ev(leaves_fov(T)) :- action(end(T)).\n\
         ev(unhides_from_behind(T,B)) :- action(resume(T,_)), hidden(T,B).\n\
         occurs_at(E,{t}) :- ev(E).\n\
         \n% objective\n\
         :~ action(ignore_trk(T)), status(T,active). [1@3,unexp,T]\n\
         :~ action(ignore_det(D)), highconf(D). [1@3,unexpd,D]\n\
         :~ action(assign(T,D)), iou(T,D,V). [-V@2,lik,T,D]\n\
         :~ action(resume(T,D)), iou(T,D,V). [-V@2,likr,T,D]\n\
         :~ action(start(D)). [{cs}@1,cs,D]\n\
         :~ action(end(T)). [{ce}@1,ce,T]\n\
         :~ action(halt(T)). [{ch}@1,ch,T]\n\
         :~ ev(missing_detections(T)). [{cm}@1,cm,T]\n\
         :~ action(resume(T,D)). [{cr}@1,cr,T,D]\n\
         :~ action(ignore_det(D)). [{ci}@1,ci,D]\n\
         \n% zero-weight pads pin all three levels into the cost vector\n\
         :~ frame(F). [0@3,pad3,F]\n\
         :~ frame(F). [0@2,pad2,F]\n\
         :~ frame(F). [0@1,pad1,F]\n\
         \n#show action/1.\n#show occurs_at/2.\n",
        t = p.t,
        cs = costs.start,
        ce = costs.end,
        ch = costs.halt,
        cm = costs.missing,
        cr = costs.resume,
        ci = costs.ignore_det,
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abduction::{build_problem, TrackCtx};
    use crate::geometry::Rect;
    use crate::ingest::{ClassLabel, Detection};
    use crate::TrackId;

    #[test]
    fn empty_problem_is_rule_skeleton() {
        let p = build_problem(vec![], vec![], 1, (1000.0, 1000.0), 1, &EngineConfig::default())
            .unwrap();
        let text = export_asp(&p, &EngineConfig::default());
        let has_fact = |prefix: &str| text.lines().any(|l| l.starts_with(prefix));
        assert!(!has_fact("trk("));
        assert!(!has_fact("det("));
        assert!(text.contains(":- trk(T)"));
        assert!(text.contains("occurs_at(E,1)"));
    }

    #[test]
    fn facts_and_candidates_emitted() {
        let trk = TrackCtx {
            id: TrackId(3),
            class_label: ClassLabel::Car,
            status: crate::abduction::TrackStatus::Active,
            hidden_by: None,
            predicted: Rect::new(100.0, 100.0, 20.0, 20.0).unwrap(),
        };
        let obs = Detection {
            frame: 1,
            rect: Rect::new(101.0, 100.0, 20.0, 20.0).unwrap(),
            class_label: ClassLabel::Car,
            confidence: 0.87,
        };
        let p = build_problem(vec![trk], vec![obs], 5, (1000.0, 1000.0), 4, &EngineConfig::default())
            .unwrap();
        let text = export_asp(&p, &EngineConfig::default());
        for needle in [
            "trk(3).",
            "type_of(trk(3),car).",
            "status(3,active).",
            "det(0).",
            "conf(0,870).",
            "highconf(0).",
            "cand_assign(3,0).",
            "cand_halt(3).",
            "occurs_at(E,5)",
            "[1@3,unexp,T]",
        ] {
            assert!(text.contains(needle), "missing `{needle}` in:\n{text}");
        }
    }
}
