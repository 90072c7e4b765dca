//! The exported ASP program must carry everything needed to reproduce the
//! native optimum: this test parses the emitted text back (facts, candidate
//! atoms, weak-constraint weights), re-solves the optimization by brute force
//! over the parsed structure alone, and compares objectives with the native
//! solver. It exercises the same data channel an external answer-set solver
//! would consume.

use abdmot::abduction::{export_asp, solve};
use abdmot::config::EngineConfig;
use abdmot::testkit::random_problem;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};

/// Split `name(a,b(c),d)` into ("name", ["a", "b(c)", "d"]).
fn parse_fact(line: &str) -> Option<(&str, Vec<&str>)> {
    let body = line.strip_suffix('.')?;
    let open = body.find('(')?;
    let name = &body[..open];
    let inner = body[open + 1..].strip_suffix(')')?;
    let mut args = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    for (i, c) in inner.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                args.push(inner[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    args.push(inner[start..].trim());
    Some((name, args))
}

#[derive(Default, Debug)]
struct Parsed {
    tracks: Vec<u64>,
    dets: Vec<u64>,
    active: BTreeSet<u64>,
    highconf: BTreeSet<u64>,
    iou: BTreeMap<(u64, u64), i64>,
    cand_assign: Vec<(u64, u64)>,
    cand_resume: Vec<(u64, u64)>,
    cand_end: BTreeSet<u64>,
    cand_halt: BTreeSet<u64>,
    cand_halt_miss: BTreeSet<u64>,
    cand_start: BTreeSet<u64>,
    /// Weak-constraint weights by tuple tag (cs, ce, ch, cm, cr, ci).
    weights: BTreeMap<String, i64>,
}

fn parse_program(text: &str) -> Parsed {
    let mut p = Parsed::default();
    for raw in text.lines() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix(":~ ") {
            // e.g. `action(start(D)). [10@1,cs,D]`
            if let Some(bracket) = rest.find('[') {
                let inside = rest[bracket + 1..].trim_end_matches(']');
                let mut parts = inside.split(',');
                if let (Some(weight_at), Some(tag)) = (parts.next(), parts.next()) {
                    if let Some((w, _level)) = weight_at.split_once('@') {
                        if let Ok(w) = w.parse::<i64>() {
                            p.weights.insert(tag.to_string(), w);
                        }
                    }
                }
            }
            continue;
        }
        if line.starts_with('%') || line.contains(":-") || line.starts_with('#') || line.is_empty()
        {
            continue;
        }
        let Some((name, args)) = parse_fact(line) else {
            continue;
        };
        let id = |s: &str| s.parse::<u64>().expect("numeric id");
        match name {
            "trk" => p.tracks.push(id(args[0])),
            "det" => p.dets.push(id(args[0])),
            "status" => {
                if args[1] == "active" {
                    p.active.insert(id(args[0]));
                }
            }
            "highconf" => {
                p.highconf.insert(id(args[0]));
            }
            "iou" => {
                p.iou
                    .insert((id(args[0]), id(args[1])), args[2].parse().unwrap());
            }
            "cand_assign" => p.cand_assign.push((id(args[0]), id(args[1]))),
            "cand_resume" => p.cand_resume.push((id(args[0]), id(args[1]))),
            "cand_end" => {
                p.cand_end.insert(id(args[0]));
            }
            "cand_halt" => {
                p.cand_halt.insert(id(args[0]));
            }
            "cand_halt_miss" => {
                p.cand_halt_miss.insert(id(args[0]));
            }
            "cand_start" => {
                p.cand_start.insert(id(args[0]));
            }
            _ => {}
        }
    }
    p
}

#[derive(Clone, Copy)]
struct ParsedChoice {
    det: Option<u64>,
    penalty: i64,
    lik: i64,
    cost: i64,
}

/// Brute-force optimum over the parsed structure; key is (penalty, -lik,
/// cost), smaller is better.
fn solve_parsed(p: &Parsed) -> (i64, i64, i64) {
    let w = |tag: &str| p.weights[tag];
    let mut per_track: Vec<Vec<ParsedChoice>> = Vec::new();
    for &t in &p.tracks {
        let mut opts = Vec::new();
        for &(tt, d) in p.cand_assign.iter().filter(|(tt, _)| *tt == t) {
            opts.push(ParsedChoice { det: Some(d), penalty: 0, lik: p.iou[&(tt, d)], cost: 0 });
        }
        for &(tt, d) in p.cand_resume.iter().filter(|(tt, _)| *tt == t) {
            opts.push(ParsedChoice {
                det: Some(d),
                penalty: 0,
                lik: p.iou[&(tt, d)],
                cost: w("cr"),
            });
        }
        if p.cand_end.contains(&t) {
            opts.push(ParsedChoice { det: None, penalty: 0, lik: 0, cost: w("ce") });
        }
        if p.cand_halt.contains(&t) {
            let extra = if p.cand_halt_miss.contains(&t) { w("cm") } else { 0 };
            opts.push(ParsedChoice { det: None, penalty: 0, lik: 0, cost: w("ch") + extra });
        }
        opts.push(ParsedChoice {
            det: None,
            penalty: i64::from(p.active.contains(&t)),
            lik: 0,
            cost: 0,
        });
        per_track.push(opts);
    }

    fn rec(
        idx: usize,
        per_track: &[Vec<ParsedChoice>],
        p: &Parsed,
        taken: &mut BTreeSet<u64>,
        acc: (i64, i64, i64),
        best: &mut Option<(i64, i64, i64)>,
    ) {
        if idx == per_track.len() {
            let mut total = acc;
            let (ws, wi) = (p.weights["cs"], p.weights["ci"]);
            for d in &p.dets {
                if taken.contains(d) {
                    continue;
                }
                let ignore = (i64::from(p.highconf.contains(d)), 0i64, wi);
                let pick = if p.cand_start.contains(d) {
                    ignore.min((0, 0, ws))
                } else {
                    ignore
                };
                total = (total.0 + pick.0, total.1 + pick.1, total.2 + pick.2);
            }
            if best.is_none() || total < best.unwrap() {
                *best = Some(total);
            }
            return;
        }
        for opt in &per_track[idx] {
            if let Some(d) = opt.det {
                if !taken.insert(d) {
                    continue;
                }
            }
            rec(
                idx + 1,
                per_track,
                p,
                taken,
                (acc.0 + opt.penalty, acc.1 - opt.lik, acc.2 + opt.cost),
                best,
            );
            if let Some(d) = opt.det {
                taken.remove(&d);
            }
        }
    }

    let mut best = None;
    rec(0, &per_track, p, &mut BTreeSet::new(), (0, 0, 0), &mut best);
    best.expect("all-ignore always feasible")
}

#[test]
fn exported_program_reproduces_native_optimum() {
    let cfg = EngineConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x505);
    for case in 0..120 {
        let problem = random_problem(&mut rng, 4, 4);
        let native = solve(&problem, &cfg);
        let text = export_asp(&problem, &cfg);
        let parsed = parse_program(&text);
        let reproduced = solve_parsed(&parsed);
        let ours = (
            native.objective.penalty as i64,
            -native.objective.likelihood,
            native.objective.event_cost as i64,
        );
        assert_eq!(
            reproduced, ours,
            "case {case}: parsed-program optimum differs\n{text}"
        );
    }
}

#[test]
fn fact_parser_handles_nesting() {
    assert_eq!(
        parse_fact("type_of(trk(3),car)."),
        Some(("type_of", vec!["trk(3)", "car"]))
    );
    assert_eq!(parse_fact("frame(9)."), Some(("frame", vec!["9"])));
    assert_eq!(parse_fact("1 { x } 1 :- y."), None);
}
