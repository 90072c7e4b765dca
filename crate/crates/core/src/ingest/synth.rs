//! Deterministic synthetic scenes: constant-velocity boxes in horizontal
//! lanes, a configurable share of lane-sharing pairs steered through crossing
//! events, detector noise as jitter plus dropout.
//!
//! Occlusion model: whenever two ground-truth boxes overlap with IoU above
//! 0.5, the one with the higher track index is behind; its detection is
//! suppressed and its visibility flag cleared. Lanes keep unrelated tracks
//! from ever overlapping, so occlusions happen exactly where they are
//! steered.

use super::{ClassLabel, Detection, FrameDetections, GroundTruth, GtEntry, IngestError};
use crate::geometry::{iou, Rect};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// IoU above which the rear box of an overlapping pair is considered hidden.
pub const OCCLUSION_IOU: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub n_tracks: usize,
    /// Fraction of track pairs steered through a crossing.
    pub overlap_fraction: f64,
    pub n_frames: u32,
    /// (width, height) in pixels.
    pub image_size: (f64, f64),
    /// Probability that a visible object's detection is dropped.
    pub dropout: f64,
    /// Standard deviation of the additive box jitter in pixels.
    pub jitter_std: f64,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            n_tracks: 4,
            overlap_fraction: 0.5,
            n_frames: 100,
            image_size: (960.0, 720.0),
            dropout: 0.0,
            jitter_std: 0.0,
            seed: 1,
        }
    }
}

struct Mover {
    cx: f64,
    cy: f64,
    vx: f64,
    w: f64,
    h: f64,
}

impl Mover {
    fn rect(&self) -> Rect {
        Rect::new(self.cx - self.w / 2.0, self.cy - self.h / 2.0, self.w, self.h)
            .expect("generator keeps extents positive")
    }

    /// Advance one frame, reflecting off the vertical image borders.
    fn step(&mut self, width: f64) {
        self.cx += self.vx;
        let half = self.w / 2.0;
        if self.cx - half < 0.0 {
            self.cx = 2.0 * half - self.cx;
            self.vx = -self.vx;
        }
        if self.cx + half > width {
            self.cx = 2.0 * (width - half) - self.cx;
            self.vx = -self.vx;
        }
    }
}

fn draw_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; keeps us on plain uniform draws.
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Generate ground truth and noisy detections for `spec`. Fully
/// deterministic: the same spec produces byte-identical output.
pub fn generate_synthetic_scene(
    spec: &SceneSpec,
) -> Result<(GroundTruth, FrameDetections), IngestError> {
    validate(spec)?;
    let (width, height) = spec.image_size;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let n_pairs_possible = spec.n_tracks / 2;
    let n_steered = (spec.overlap_fraction * n_pairs_possible as f64).round() as usize;
    let n_lanes = spec.n_tracks - n_steered; // each steered pair shares a lane
    let lane_height = height / n_lanes.max(1) as f64;

    let mut movers: Vec<Mover> = Vec::with_capacity(spec.n_tracks);
    let mut lane = 0usize;
    let mut remaining = spec.n_tracks;
    while remaining > 0 {
        let max_h = (lane_height - 2.0).max(4.0);
        let lane_mid = ((lane as f64 + 0.5) * lane_height)
            .clamp(max_h / 2.0 + 0.5, height - max_h / 2.0 - 0.5);
        if movers.len() / 2 < n_steered && remaining >= 2 {
            // Steered pair: equal boxes, same lane, opposite approach; the
            // lower-index (front) member comes from the right, the rear from
            // the left, so the rear is covered while they cross.
            let h = rng.gen_range(16.0..32.0_f64).min(max_h);
            let w = rng.gen_range(24.0..48.0_f64);
            let speed = rng.gen_range(4.0..5.0);
            let meet_frame = rng.gen_range(0.35..0.65) * spec.n_frames as f64;
            let meet_x = rng.gen_range(0.4..0.6) * width;
            movers.push(Mover {
                cx: meet_x + speed * meet_frame,
                cy: lane_mid,
                vx: -speed,
                w,
                h,
            });
            movers.push(Mover {
                cx: meet_x - speed * meet_frame,
                cy: lane_mid,
                vx: speed,
                w,
                h,
            });
            remaining -= 2;
        } else {
            let h = rng.gen_range(16.0..32.0_f64).min(max_h);
            let w = rng.gen_range(24.0..48.0_f64);
            let half = w / 2.0;
            movers.push(Mover {
                cx: rng.gen_range(half..(width - half)),
                cy: lane_mid,
                vx: rng.gen_range(-5.0..5.0),
                w,
                h,
            });
            remaining -= 1;
        }
        lane += 1;
    }

    // Initial positions of steered movers may start far outside; reflect them
    // into the image so every box starts in bounds.
    for m in movers.iter_mut() {
        let half = m.w / 2.0;
        while m.cx - half < 0.0 || m.cx + half > width {
            if m.cx - half < 0.0 {
                m.cx = 2.0 * half - m.cx;
                m.vx = -m.vx;
            } else {
                m.cx = 2.0 * (width - half) - m.cx;
                m.vx = -m.vx;
            }
        }
    }

    let mut gt = GroundTruth::new();
    let mut dets = FrameDetections::new();
    for frame in 1..=spec.n_frames {
        if frame > 1 {
            for m in movers.iter_mut() {
                m.step(width);
            }
        }
        let rects: Vec<Rect> = movers.iter().map(Mover::rect).collect();
        let mut entries = Vec::with_capacity(rects.len());
        for (i, rect) in rects.iter().enumerate() {
            let hidden = rects[..i].iter().any(|front| iou(front, rect) > OCCLUSION_IOU);
            entries.push(GtEntry {
                id: i as u64 + 1,
                rect: *rect,
                class_label: ClassLabel::Car,
                visible: !hidden,
            });
        }
        let mut frame_dets = Vec::new();
        for e in &entries {
            if !e.visible {
                continue;
            }
            if spec.dropout > 0.0 && rng.gen_range(0.0..1.0) < spec.dropout {
                continue;
            }
            let rect = if spec.jitter_std > 0.0 {
                let s = spec.jitter_std;
                let x = e.rect.x + s * draw_normal(&mut rng);
                let y = e.rect.y + s * draw_normal(&mut rng);
                let w = (e.rect.w + s * draw_normal(&mut rng)).max(2.0);
                let h = (e.rect.h + s * draw_normal(&mut rng)).max(2.0);
                Rect::new(x, y, w, h).expect("jittered extents clamped positive")
            } else {
                e.rect
            };
            frame_dets.push(Detection {
                frame,
                rect,
                class_label: e.class_label,
                confidence: rng.gen_range(0.6..1.0),
            });
        }
        gt.insert(frame, entries);
        dets.insert(frame, frame_dets);
    }
    Ok((gt, dets))
}

fn validate(spec: &SceneSpec) -> Result<(), IngestError> {
    if spec.n_tracks < 1 {
        return Err(IngestError::InvalidScene("n_tracks must be >= 1".into()));
    }
    if spec.n_frames < 1 {
        return Err(IngestError::InvalidScene("n_frames must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&spec.overlap_fraction) {
        return Err(IngestError::InvalidScene(
            "overlap_fraction must be in [0,1]".into(),
        ));
    }
    if spec.n_tracks < 2 && spec.overlap_fraction > 0.0 {
        return Err(IngestError::InvalidScene(
            "overlapping tracks require n_tracks >= 2".into(),
        ));
    }
    if !(0.0..=1.0).contains(&spec.dropout) {
        return Err(IngestError::InvalidScene("dropout must be in [0,1]".into()));
    }
    if spec.jitter_std < 0.0 || !spec.jitter_std.is_finite() {
        return Err(IngestError::InvalidScene("jitter_std must be >= 0".into()));
    }
    if spec.image_size.0 < 64.0 || spec.image_size.1 < 64.0 {
        return Err(IngestError::InvalidScene(
            "image size must be at least 64x64 px".into(),
        ));
    }
    Ok(())
}
