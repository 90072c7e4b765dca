//! Naive comparator: greedy frame-independent IoU matching with no motion
//! model, no coasting and no occlusion reasoning. A track lives exactly as
//! long as it is matched every frame; a single missed frame retires it.

use crate::geometry::{iou, Rect};
use crate::ingest::{ClassLabel, Detection, FrameDetections, TrackFrames};

struct LiveTrack {
    id: u64,
    rect: Rect,
    class_label: ClassLabel,
}

/// Run the greedy baseline over a detection stream and return its per-frame
/// track boxes.
pub fn greedy_track(
    dets: &FrameDetections,
    iou_threshold: f64,
    conf_threshold: f64,
) -> TrackFrames {
    let mut out = TrackFrames::new();
    let mut live: Vec<LiveTrack> = Vec::new();
    let mut next_id = 1u64;
    let (first, last) = match (dets.keys().next(), dets.keys().next_back()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return out,
    };
    let empty = Vec::new();
    for t in first..=last {
        let frame_dets: Vec<&Detection> = dets
            .get(&t)
            .unwrap_or(&empty)
            .iter()
            .filter(|d| d.confidence >= conf_threshold)
            .collect();
        // all candidate pairs above threshold, best overlap first
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (i, trk) in live.iter().enumerate() {
            for (j, det) in frame_dets.iter().enumerate() {
                if det.class_label != trk.class_label {
                    continue;
                }
                let v = iou(&trk.rect, &det.rect);
                if v >= iou_threshold && v > 0.0 {
                    pairs.push((v, i, j));
                }
            }
        }
        pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut track_used = vec![false; live.len()];
        let mut det_used = vec![false; frame_dets.len()];
        let mut survivors: Vec<LiveTrack> = Vec::new();
        let mut rows: Vec<(u64, Rect)> = Vec::new();
        for (_, i, j) in pairs {
            if track_used[i] || det_used[j] {
                continue;
            }
            track_used[i] = true;
            det_used[j] = true;
            let rect = frame_dets[j].rect;
            rows.push((live[i].id, rect));
            survivors.push(LiveTrack {
                id: live[i].id,
                rect,
                class_label: live[i].class_label,
            });
        }
        for (j, det) in frame_dets.iter().enumerate() {
            if det_used[j] {
                continue;
            }
            rows.push((next_id, det.rect));
            survivors.push(LiveTrack {
                id: next_id,
                rect: det.rect,
                class_label: det.class_label,
            });
            next_id += 1;
        }
        rows.sort_by_key(|(id, _)| *id);
        out.insert(t, rows);
        live = survivors;
    }
    out
}
