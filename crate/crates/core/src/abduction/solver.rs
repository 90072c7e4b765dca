//! Exact optimization over the candidate space: depth-first branch and bound
//! with observation-exclusivity propagation and an admissible bound.
//!
//! Tracks are branched in id order and candidates in canonical order, and an
//! incumbent is only replaced on strict improvement, so the returned optimum
//! is the lexicographically smallest action list among equal-objective
//! hypotheses and the whole search is deterministic.

use super::candidates::{enumerate_actions, CandidateSpace, Choice};
use super::{Action, Hypothesis, Objective, ProblemSpec};
use crate::config::EngineConfig;
use crate::events::Event;
use crate::TrackId;

/// Solve one frame's association problem to optimality.
pub fn solve(p: &ProblemSpec, cfg: &EngineConfig) -> Hypothesis {
    let space = enumerate_actions(p, cfg);
    solve_space(p, &space)
}

struct Search<'a> {
    space: &'a CandidateSpace,
    /// Best action for each observation left unconsumed by track actions.
    free: Vec<&'a Choice>,
    /// Assign/resume likelihoods per track, descending, with their obs.
    lik_cands: Vec<Vec<(i64, usize)>>,
    /// Suffix sums of each track's cheapest event cost.
    min_cost_suffix: Vec<u64>,
    min_free_cost: u64,
    taken: Vec<bool>,
    untaken: usize,
    acc: Objective,
    /// Sum of free contributions over currently untaken observations.
    acc_free: Objective,
    chosen: Vec<usize>,
    best: Option<(Objective, Vec<usize>)>,
}

pub(super) fn solve_space(p: &ProblemSpec, space: &CandidateSpace) -> Hypothesis {
    let n = space.per_track.len();
    let m = space.per_obs.len();
    let free: Vec<&Choice> = space
        .per_obs
        .iter()
        .map(|cs| {
            cs.iter()
                .min_by_key(|c| (c.contribution.key(), c.action.order()))
                .expect("ignore_det is always a candidate")
        })
        .collect();
    let mut acc_free = Objective::default();
    for c in &free {
        acc_free = acc_free.add(&c.contribution);
    }
    let lik_cands: Vec<Vec<(i64, usize)>> = space
        .per_track
        .iter()
        .map(|cs| {
            let mut v: Vec<(i64, usize)> = cs
                .iter()
                .filter(|c| c.contribution.likelihood > 0)
                .filter_map(|c| c.action.obs().map(|o| (c.contribution.likelihood, o)))
                .collect();
            v.sort_by(|a, b| b.cmp(a));
            v
        })
        .collect();
    let mut min_cost_suffix = vec![0u64; n + 1];
    for i in (0..n).rev() {
        let track_min = space.per_track[i]
            .iter()
            .map(|c| c.contribution.event_cost)
            .min()
            .unwrap_or(0);
        min_cost_suffix[i] = min_cost_suffix[i + 1] + track_min;
    }
    let min_free_cost = free
        .iter()
        .map(|c| c.contribution.event_cost)
        .min()
        .unwrap_or(0);

    let mut search = Search {
        space,
        free,
        lik_cands,
        min_cost_suffix,
        min_free_cost,
        taken: vec![false; m],
        untaken: m,
        acc: Objective::default(),
        acc_free,
        chosen: vec![usize::MAX; n],
        best: None,
    };
    search.dfs(0, n);
    let (objective, chosen) = search.best.expect("all-ignore hypothesis is always feasible");
    assemble(p, space, &search.free, &chosen, objective)
}

impl<'a> Search<'a> {
    fn dfs(&mut self, depth: usize, n: usize) {
        if let Some((best, _)) = &self.best {
            let mut lik_ub = self.acc.likelihood;
            for cands in &self.lik_cands[depth..] {
                if let Some((lik, _)) = cands.iter().find(|(_, o)| !self.taken[*o]) {
                    lik_ub += lik;
                }
            }
            let leftover = self.untaken.saturating_sub(n - depth) as u64;
            let cost_lb =
                self.acc.event_cost + self.min_cost_suffix[depth] + leftover * self.min_free_cost;
            let bound = (self.acc.penalty, -lik_ub, cost_lb);
            if bound >= best.key() {
                return;
            }
        }
        if depth == n {
            let leaf = self.acc.add(&self.acc_free);
            let better = match &self.best {
                None => true,
                Some((best, _)) => leaf.key() < best.key(),
            };
            if better {
                self.best = Some((leaf, self.chosen.clone()));
            }
            return;
        }
        for (idx, choice) in self.space.per_track[depth].iter().enumerate() {
            let obs = choice.action.obs();
            if let Some(o) = obs {
                if self.taken[o] {
                    continue;
                }
                self.taken[o] = true;
                self.untaken -= 1;
                self.acc_free = sub(&self.acc_free, &self.free[o].contribution);
            }
            let saved = self.acc;
            self.acc = self.acc.add(&choice.contribution);
            self.chosen[depth] = idx;
            self.dfs(depth + 1, n);
            self.acc = saved;
            if let Some(o) = obs {
                self.taken[o] = false;
                self.untaken += 1;
                self.acc_free = self.acc_free.add(&self.free[o].contribution);
            }
        }
    }
}

fn sub(a: &Objective, b: &Objective) -> Objective {
    Objective {
        penalty: a.penalty - b.penalty,
        likelihood: a.likelihood - b.likelihood,
        event_cost: a.event_cost - b.event_cost,
    }
}

fn assemble(
    p: &ProblemSpec,
    space: &CandidateSpace,
    free: &[&Choice],
    chosen: &[usize],
    objective: Objective,
) -> Hypothesis {
    let mut actions = Vec::with_capacity(space.per_track.len() + space.per_obs.len());
    let mut events = Vec::new();
    let mut taken = vec![false; space.per_obs.len()];
    for (i, &idx) in chosen.iter().enumerate() {
        let choice = &space.per_track[i][idx];
        actions.push(choice.action);
        if let Some(event) = choice.event {
            events.push(event);
        }
        if let Some(o) = choice.action.obs() {
            taken[o] = true;
        }
    }
    let mut started = 0u64;
    for (j, was_taken) in taken.iter().enumerate() {
        if *was_taken {
            continue;
        }
        let choice = free[j];
        actions.push(choice.action);
        if matches!(choice.action, Action::Start { .. }) {
            events.push(Event::EntersFov(TrackId(p.next_track_id + started)));
            started += 1;
        }
    }
    Hypothesis {
        t: p.t,
        actions,
        events,
        objective,
    }
}
