//! Detection ingestion: MOT and KITTI text formats, plus a deterministic
//! synthetic scene generator for testing and benchmarking.

mod formats;
mod synth;

pub use formats::{
    read_kitti_detections, read_mot_detections, read_mot_gt, read_mot_tracks,
    write_mot_detections, write_mot_gt, write_mot_tracks,
};
pub use synth::{generate_synthetic_scene, SceneSpec};

use crate::geometry::Rect;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid scene spec: {0}")]
    InvalidScene(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Object categories of the benchmark datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClassLabel {
    Car,
    Pedestrian,
    Cyclist,
    Van,
    Truck,
    Tram,
    PersonSitting,
    Misc,
}

impl ClassLabel {
    /// KITTI label-file type names.
    pub fn from_kitti(name: &str) -> Option<ClassLabel> {
        Some(match name {
            "Car" => ClassLabel::Car,
            "Pedestrian" => ClassLabel::Pedestrian,
            "Cyclist" => ClassLabel::Cyclist,
            "Van" => ClassLabel::Van,
            "Truck" => ClassLabel::Truck,
            "Tram" => ClassLabel::Tram,
            "Person_sitting" => ClassLabel::PersonSitting,
            "Misc" => ClassLabel::Misc,
            _ => return None,
        })
    }

    /// Integer code used in the ground-truth text format (pedestrian = 1 as
    /// in the MOT convention; remaining codes are ours).
    pub fn code(self) -> u32 {
        match self {
            ClassLabel::Pedestrian => 1,
            ClassLabel::Car => 3,
            ClassLabel::Cyclist => 4,
            ClassLabel::Van => 5,
            ClassLabel::Truck => 6,
            ClassLabel::Tram => 7,
            ClassLabel::PersonSitting => 8,
            ClassLabel::Misc => 9,
        }
    }

    pub fn from_code(code: u32) -> ClassLabel {
        match code {
            1 => ClassLabel::Pedestrian,
            3 => ClassLabel::Car,
            4 => ClassLabel::Cyclist,
            5 => ClassLabel::Van,
            6 => ClassLabel::Truck,
            7 => ClassLabel::Tram,
            8 => ClassLabel::PersonSitting,
            _ => ClassLabel::Misc,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::Car => "car",
            ClassLabel::Pedestrian => "pedestrian",
            ClassLabel::Cyclist => "cyclist",
            ClassLabel::Van => "van",
            ClassLabel::Truck => "truck",
            ClassLabel::Tram => "tram",
            ClassLabel::PersonSitting => "person_sitting",
            ClassLabel::Misc => "misc",
        }
    }
}

/// One visual observation: a detector box with type and confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    /// 1-based frame number.
    pub frame: u32,
    pub rect: Rect,
    pub class_label: ClassLabel,
    /// In [0, 1]; readers clamp out-of-range detector scores.
    pub confidence: f64,
}

/// Detections grouped by frame, frames ascending.
pub type FrameDetections = BTreeMap<u32, Vec<Detection>>;

/// One annotated object in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GtEntry {
    pub id: u64,
    pub rect: Rect,
    pub class_label: ClassLabel,
    /// False while the object is present but occluded (its detection is
    /// suppressed in synthetic scenes).
    pub visible: bool,
}

/// Ground-truth annotations grouped by frame.
pub type GroundTruth = BTreeMap<u32, Vec<GtEntry>>;

/// Hypothesis tracks grouped by frame: (track id, box).
pub type TrackFrames = BTreeMap<u32, Vec<(u64, Rect)>>;

/// Outcome of reading a detection or annotation file: parsed content plus
/// per-line warnings for rows that were skipped.
#[derive(Debug, Default)]
pub struct ReadWarnings(pub Vec<String>);

impl ReadWarnings {
    pub(crate) fn push(&mut self, line: usize, msg: impl Into<String>) {
        self.0.push(format!("line {line}: {}", msg.into()));
    }
}
