//! CLEAR-MOT evaluation of hypothesis tracks against ground truth.
//!
//! Per frame, correspondences from the previous frame are kept while still
//! valid, the remainder is matched by maximum-total-IoU bipartite matching,
//! and the usual counts follow: unmatched ground truth is a miss, unmatched
//! hypotheses are false positives, a ground-truth trajectory changing its
//! matched id is an identity switch. All ground-truth entries are scored,
//! including occluded ones - a tracker that keeps reporting a plausible box
//! for a hidden object is rewarded for it.

use crate::geometry::{iou, Rect};
use crate::ingest::{GroundTruth, TrackFrames};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no ground truth boxes to evaluate")]
    EmptyGroundTruth,
    #[error("duplicate hypothesis id {id} in frame {frame}")]
    DuplicateHypId { frame: u32, id: u64 },
    #[error("duplicate ground-truth id {id} in frame {frame}")]
    DuplicateGtId { frame: u32, id: u64 },
}

/// Accumulated correspondence data for one evaluation run.
#[derive(Debug, Default, Clone)]
pub struct Correspondences {
    pub gt_total: u64,
    pub false_negatives: u64,
    pub false_positives: u64,
    pub id_switches: u64,
    pub matches: u64,
    pub iou_sum: f64,
    /// Per ground-truth trajectory: (present frames, matched flags per
    /// present frame in order).
    pub per_gt: BTreeMap<u64, Vec<bool>>,
}

/// CLEAR-MOT report. `mostly_tracked`/`mostly_lost` are fractions of
/// ground-truth trajectories matched on >= 80% / <= 20% of their lifespan.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub mota: f64,
    pub motp: f64,
    pub mostly_tracked: f64,
    pub mostly_lost: f64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub id_switches: u64,
    pub fragmentations: u64,
    pub gt_total: u64,
}

/// Frame-by-frame CLEAR-MOT correspondence between ground truth and
/// hypothesis tracks at the given IoU threshold (default convention: 0.5).
pub fn match_frames(
    gt: &GroundTruth,
    hyp: &TrackFrames,
    iou_match: f64,
) -> Result<Correspondences, MetricsError> {
    let mut corr = Correspondences::default();
    let mut prev: BTreeMap<u64, u64> = BTreeMap::new();
    let mut last_matched: BTreeMap<u64, u64> = BTreeMap::new();

    let frames: BTreeSet<u32> = gt.keys().chain(hyp.keys()).cloned().collect();
    for &t in &frames {
        let empty_gt = Vec::new();
        let empty_hyp = Vec::new();
        let gts = gt.get(&t).unwrap_or(&empty_gt);
        let hyps = hyp.get(&t).unwrap_or(&empty_hyp);
        for (i, e) in gts.iter().enumerate() {
            if gts[..i].iter().any(|o| o.id == e.id) {
                return Err(MetricsError::DuplicateGtId { frame: t, id: e.id });
            }
        }
        for (i, (id, _)) in hyps.iter().enumerate() {
            if hyps[..i].iter().any(|(o, _)| o == id) {
                return Err(MetricsError::DuplicateHypId { frame: t, id: *id });
            }
        }
        corr.gt_total += gts.len() as u64;

        let hyp_rect: BTreeMap<u64, Rect> = hyps.iter().cloned().collect();
        let mut matched: BTreeMap<u64, (u64, f64)> = BTreeMap::new();
        let mut hyp_used: BTreeSet<u64> = BTreeSet::new();

        // Keep still-valid correspondences from the previous frame.
        for e in gts {
            if let Some(&h) = prev.get(&e.id) {
                if let Some(hr) = hyp_rect.get(&h) {
                    let v = iou(&e.rect, hr);
                    if v >= iou_match {
                        matched.insert(e.id, (h, v));
                        hyp_used.insert(h);
                    }
                }
            }
        }

        // Optimal matching over what remains.
        let rem_gt: Vec<&crate::ingest::GtEntry> =
            gts.iter().filter(|e| !matched.contains_key(&e.id)).collect();
        let rem_hyp: Vec<(u64, Rect)> = hyps
            .iter()
            .filter(|(id, _)| !hyp_used.contains(id))
            .cloned()
            .collect();
        let weights: Vec<Vec<f64>> = rem_gt
            .iter()
            .map(|e| {
                rem_hyp
                    .iter()
                    .map(|(_, hr)| {
                        let v = iou(&e.rect, hr);
                        if v >= iou_match {
                            v
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        for (gi, hj) in max_weight_matching(&weights) {
            let (hid, _) = rem_hyp[hj];
            let v = weights[gi][hj];
            matched.insert(rem_gt[gi].id, (hid, v));
            hyp_used.insert(hid);
        }

        // Count.
        for e in gts {
            match matched.get(&e.id) {
                Some((h, v)) => {
                    if let Some(&prev_h) = last_matched.get(&e.id) {
                        if prev_h != *h {
                            corr.id_switches += 1;
                        }
                    }
                    last_matched.insert(e.id, *h);
                    corr.matches += 1;
                    corr.iou_sum += v;
                    corr.per_gt.entry(e.id).or_default().push(true);
                }
                None => {
                    corr.false_negatives += 1;
                    corr.per_gt.entry(e.id).or_default().push(false);
                }
            }
        }
        corr.false_positives += hyps.iter().filter(|(id, _)| !hyp_used.contains(id)).count() as u64;

        prev = matched.iter().map(|(g, (h, _))| (*g, *h)).collect();
    }
    Ok(corr)
}

/// Condense correspondences into the report; the arithmetic invariant
/// `mota = 1 - (fn + fp + idsw) / gt_total` holds exactly.
pub fn compute_report(corr: &Correspondences) -> Result<EvalReport, MetricsError> {
    if corr.gt_total == 0 {
        return Err(MetricsError::EmptyGroundTruth);
    }
    let mut fragmentations = 0u64;
    let mut mostly_tracked = 0u64;
    let mut mostly_lost = 0u64;
    for flags in corr.per_gt.values() {
        let lifespan = flags.len() as f64;
        let tracked = flags.iter().filter(|&&f| f).count() as f64;
        let ratio = tracked / lifespan;
        if ratio >= 0.8 {
            mostly_tracked += 1;
        }
        if ratio <= 0.2 {
            mostly_lost += 1;
        }
        // interruptions that are later recovered
        let mut remaining_matches: u64 = flags.iter().map(|&f| u64::from(f)).sum();
        for w in flags.windows(2) {
            if w[0] {
                remaining_matches -= 1;
            }
            if w[0] && !w[1] && remaining_matches > 0 {
                fragmentations += 1;
            }
        }
    }
    let n_traj = corr.per_gt.len().max(1) as f64;
    let mota = 1.0
        - (corr.false_negatives + corr.false_positives + corr.id_switches) as f64
            / corr.gt_total as f64;
    let motp = if corr.matches > 0 {
        corr.iou_sum / corr.matches as f64
    } else {
        0.0
    };
    Ok(EvalReport {
        mota,
        motp,
        mostly_tracked: mostly_tracked as f64 / n_traj,
        mostly_lost: mostly_lost as f64 / n_traj,
        false_positives: corr.false_positives,
        false_negatives: corr.false_negatives,
        id_switches: corr.id_switches,
        fragmentations,
        gt_total: corr.gt_total,
    })
}

/// Evaluate in one go.
pub fn evaluate(
    gt: &GroundTruth,
    hyp: &TrackFrames,
    iou_match: f64,
) -> Result<EvalReport, MetricsError> {
    compute_report(&match_frames(gt, hyp, iou_match)?)
}

impl EvalReport {
    pub fn table(&self) -> String {
        format!(
            "{:>8} {:>8} {:>7} {:>7} {:>7} {:>7} {:>6} {:>6} {:>8}\n\
             {:>8.2} {:>8.2} {:>6.1}% {:>6.1}% {:>7} {:>7} {:>6} {:>6} {:>8}\n",
            "MOTA%", "MOTP%", "MT", "ML", "FP", "FN", "IDsw", "Frag", "GT",
            self.mota * 100.0,
            self.motp * 100.0,
            self.mostly_tracked * 100.0,
            self.mostly_lost * 100.0,
            self.false_positives,
            self.false_negatives,
            self.id_switches,
            self.fragmentations,
            self.gt_total,
        )
    }
}

/// Maximum-total-weight bipartite matching; zero-weight pairs are forbidden.
/// Hungarian algorithm with potentials on the padded square matrix, weights
/// scaled to integers. Deterministic.
fn max_weight_matching(weights: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let n_rows = weights.len();
    let n_cols = weights.first().map(Vec::len).unwrap_or(0);
    if n_rows == 0 || n_cols == 0 {
        return Vec::new();
    }
    let n = n_rows.max(n_cols);
    // cost = negated scaled weight; padding and forbidden pairs cost 0
    let scale = 1_000_000.0;
    let cost = |i: usize, j: usize| -> i64 {
        if i < n_rows && j < n_cols && weights[i][j] > 0.0 {
            -((weights[i][j] * scale) as i64)
        } else {
            0
        }
    };
    // classic O(n^3) assignment with row/column potentials (1-indexed)
    const INF: i64 = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1]; // column -> row
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = INF;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut pairs = Vec::new();
    for j in 1..=n {
        let i = p[j];
        if i >= 1 && i - 1 < n_rows && j - 1 < n_cols && weights[i - 1][j - 1] > 0.0 {
            pairs.push((i - 1, j - 1));
        }
    }
    pairs.sort_unstable();
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{ClassLabel, GtEntry};
    use proptest::prelude::*;

    fn r(x: f64, y: f64, w: f64, h: f64) -> Rect {
        Rect::new(x, y, w, h).unwrap()
    }

    fn entry(id: u64, rect: Rect) -> GtEntry {
        GtEntry {
            id,
            rect,
            class_label: ClassLabel::Car,
            visible: true,
        }
    }

    /// Straight-line ground truth with per-frame boxes.
    fn straight_gt(ids: &[u64], frames: u32) -> GroundTruth {
        let mut gt = GroundTruth::new();
        for t in 1..=frames {
            let entries = ids
                .iter()
                .map(|&id| entry(id, r(100.0 * id as f64 + 2.0 * t as f64, 50.0, 20.0, 20.0)))
                .collect();
            gt.insert(t, entries);
        }
        gt
    }

    fn as_hyp(gt: &GroundTruth) -> TrackFrames {
        gt.iter()
            .map(|(t, es)| (*t, es.iter().map(|e| (e.id + 100, e.rect)).collect()))
            .collect()
    }

    #[test]
    fn identical_hypothesis_is_perfect() {
        let gt = straight_gt(&[1, 2], 10);
        let hyp = as_hyp(&gt);
        let report = evaluate(&gt, &hyp, 0.5).unwrap();
        assert_eq!(report.mota, 1.0);
        assert_eq!(report.motp, 1.0);
        assert_eq!(report.false_positives, 0);
        assert_eq!(report.false_negatives, 0);
        assert_eq!(report.id_switches, 0);
        assert_eq!(report.fragmentations, 0);
        assert_eq!(report.mostly_tracked, 1.0);
        assert_eq!(report.mostly_lost, 0.0);
    }

    #[test]
    fn absent_hypothesis_is_all_misses() {
        let gt = straight_gt(&[1], 10);
        let report = evaluate(&gt, &TrackFrames::new(), 0.5).unwrap();
        assert_eq!(report.false_negatives, 10);
        assert_eq!(report.gt_total, 10);
        assert_eq!(report.mota, 0.0);
        assert_eq!(report.mostly_lost, 1.0);
    }

    /// Two objects cross and the hypothesis swaps ids at the crossing:
    /// each trajectory changes its matched id once, so IDSW = 2.
    #[test]
    fn crossing_swap_counts_two_switches() {
        let mut gt = GroundTruth::new();
        let mut hyp = TrackFrames::new();
        for t in 1..=6u32 {
            let a = r(10.0 * t as f64, 10.0, 10.0, 10.0);
            let b = r(70.0 - 10.0 * t as f64, 10.0, 10.0, 10.0);
            gt.insert(t, vec![entry(1, a), entry(2, b)]);
            let (ha, hb) = if t <= 3 { (11, 12) } else { (12, 11) };
            hyp.insert(t, vec![(ha, a), (hb, b)]);
        }
        let report = evaluate(&gt, &hyp, 0.5).unwrap();
        assert_eq!(report.id_switches, 2);
        assert_eq!(report.false_negatives, 0);
        assert_eq!(report.false_positives, 0);
    }

    #[test]
    fn formula_micro_fixture() {
        // GT=100, FN=10, FP=5, IDSW=1 -> MOTA = 0.84
        let corr = Correspondences {
            gt_total: 100,
            false_negatives: 10,
            false_positives: 5,
            id_switches: 1,
            matches: 90,
            iou_sum: 90.0,
            per_gt: [(1u64, vec![true; 90])].into_iter().collect(),
        };
        let report = compute_report(&corr).unwrap();
        assert!((report.mota - 0.84).abs() < 1e-12);
        assert_eq!(format!("{:.4}", report.mota), "0.8400");
        assert_eq!(report.motp, 1.0);
    }

    #[test]
    fn empty_gt_is_error() {
        assert_eq!(
            compute_report(&Correspondences::default()),
            Err(MetricsError::EmptyGroundTruth)
        );
    }

    #[test]
    fn fragmentation_counts_recovered_gaps() {
        let mut gt = GroundTruth::new();
        let mut hyp = TrackFrames::new();
        for t in 1..=7u32 {
            let b = r(10.0 * t as f64, 10.0, 10.0, 10.0);
            gt.insert(t, vec![entry(1, b)]);
            // hypothesis misses frames 3 and 6-7
            if !matches!(t, 3 | 6 | 7) {
                hyp.insert(t, vec![(5, b)]);
            }
        }
        let report = evaluate(&gt, &hyp, 0.5).unwrap();
        // the gap at 3 is recovered, the tail gap is not
        assert_eq!(report.fragmentations, 1);
        assert_eq!(report.id_switches, 0);
        assert_eq!(report.false_negatives, 3);
    }

    #[test]
    fn duplicate_hyp_ids_rejected() {
        let gt = straight_gt(&[1], 2);
        let mut hyp = TrackFrames::new();
        hyp.insert(1, vec![(7, r(0.0, 0.0, 5.0, 5.0)), (7, r(50.0, 0.0, 5.0, 5.0))]);
        assert_eq!(
            match_frames(&gt, &hyp, 0.5).unwrap_err(),
            MetricsError::DuplicateHypId { frame: 1, id: 7 }
        );
    }

    /// Brute-force maximum matching over all injective row->col maps.
    fn brute_matching(weights: &[Vec<f64>]) -> f64 {
        fn rec(weights: &[Vec<f64>], row: usize, used: &mut Vec<bool>) -> f64 {
            if row == weights.len() {
                return 0.0;
            }
            // leave row unmatched
            let mut best = rec(weights, row + 1, used);
            for col in 0..used.len() {
                if !used[col] && weights[row][col] > 0.0 {
                    used[col] = true;
                    best = best.max(weights[row][col] + rec(weights, row + 1, used));
                    used[col] = false;
                }
            }
            best
        }
        let cols = weights.first().map(Vec::len).unwrap_or(0);
        rec(weights, 0, &mut vec![false; cols])
    }

    proptest! {
        #[test]
        fn hungarian_matches_brute_force(
            raw in proptest::collection::vec(proptest::collection::vec(0u32..100, 1..6), 1..6)
        ) {
            let cols = raw.iter().map(Vec::len).min().unwrap();
            let weights: Vec<Vec<f64>> = raw.iter()
                .map(|row| row[..cols].iter().map(|&v| v as f64 / 100.0).collect())
                .collect();
            let pairs = max_weight_matching(&weights);
            // injectivity
            let mut seen_r = std::collections::BTreeSet::new();
            let mut seen_c = std::collections::BTreeSet::new();
            let mut total = 0.0;
            for (i, j) in &pairs {
                prop_assert!(seen_r.insert(*i));
                prop_assert!(seen_c.insert(*j));
                total += weights[*i][*j];
            }
            let best = brute_matching(&weights);
            prop_assert!((total - best).abs() < 1e-6, "got {total}, brute {best}");
        }

        /// Globally relabeling hypothesis ids leaves every metric unchanged.
        #[test]
        fn relabeling_invariance(offset in 1u64..1000) {
            let gt = straight_gt(&[1, 2, 3], 8);
            let hyp = as_hyp(&gt);
            let relabeled: TrackFrames = hyp
                .iter()
                .map(|(t, rows)| {
                    (*t, rows.iter().map(|(id, r)| (id * 7 + offset, *r)).collect())
                })
                .collect();
            let a = evaluate(&gt, &hyp, 0.5).unwrap();
            let b = evaluate(&gt, &relabeled, 0.5).unwrap();
            prop_assert_eq!(a, b);
        }

        /// A spurious far-away box adds exactly its frame count to FP.
        #[test]
        fn spurious_box_adds_fp_only(k in 1u32..8) {
            let gt = straight_gt(&[1, 2], 8);
            let hyp = as_hyp(&gt);
            let mut spiked = hyp.clone();
            for t in 1..=k {
                spiked.entry(t).or_default().push((999, r(900.0, 900.0, 10.0, 10.0)));
            }
            let a = evaluate(&gt, &hyp, 0.5).unwrap();
            let b = evaluate(&gt, &spiked, 0.5).unwrap();
            prop_assert_eq!(b.false_positives, a.false_positives + u64::from(k));
            prop_assert_eq!(b.id_switches, a.id_switches);
            prop_assert_eq!(b.false_negatives, a.false_negatives);
        }
    }
}
