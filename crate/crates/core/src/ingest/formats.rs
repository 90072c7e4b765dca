//! Text formats: MOT detection/result/ground-truth files and KITTI tracking
//! labels.
//!
//! MOT detection rows are `frame,id,left,top,width,height,conf,x,y,z` with
//! `id` and the world coordinates unused (-1). KITTI rows are whitespace
//! separated with boxes as (left, top, right, bottom); KITTI frames are
//! 0-based and normalized here to 1-based.

use super::{
    ClassLabel, Detection, FrameDetections, GroundTruth, GtEntry, IngestError, ReadWarnings,
    TrackFrames,
};
use crate::geometry::Rect;
use std::fmt::Write as _;
use std::io::BufRead;

fn parse_f64(line: usize, field: &str, what: &str) -> Result<f64, IngestError> {
    field.trim().parse::<f64>().map_err(|e| IngestError::Parse {
        line,
        msg: format!("bad {what} `{}`: {e}", field.trim()),
    })
}

fn parse_frame(line: usize, field: &str, zero_based: bool) -> Result<u32, IngestError> {
    let raw = field
        .trim()
        .parse::<i64>()
        .map_err(|e| IngestError::Parse {
            line,
            msg: format!("bad frame `{}`: {e}", field.trim()),
        })?;
    let frame = if zero_based { raw + 1 } else { raw };
    if frame < 1 || frame > u32::MAX as i64 {
        return Err(IngestError::Parse {
            line,
            msg: format!("frame {raw} out of range"),
        });
    }
    Ok(frame as u32)
}

/// Read MOT-format detections. Rows with non-positive extent are skipped
/// with a warning; anything unparseable is a hard error naming the line.
pub fn read_mot_detections(
    source: impl BufRead,
) -> Result<(FrameDetections, ReadWarnings), IngestError> {
    let mut frames = FrameDetections::new();
    let mut warnings = ReadWarnings::default();
    for (idx, row) in source.lines().enumerate() {
        let line = idx + 1;
        let row = row?;
        let text = row.trim();
        if text.is_empty() {
            continue;
        }
        let fields: Vec<&str> = text.split(',').collect();
        if fields.len() < 7 {
            return Err(IngestError::Parse {
                line,
                msg: format!("expected at least 7 comma-separated fields, got {}", fields.len()),
            });
        }
        let frame = parse_frame(line, fields[0], false)?;
        let left = parse_f64(line, fields[2], "left")?;
        let top = parse_f64(line, fields[3], "top")?;
        let w = parse_f64(line, fields[4], "width")?;
        let h = parse_f64(line, fields[5], "height")?;
        let conf = parse_f64(line, fields[6], "confidence")?.clamp(0.0, 1.0);
        if w <= 0.0 || h <= 0.0 {
            warnings.push(line, format!("skipped box with non-positive extent {w}x{h}"));
            continue;
        }
        let rect = Rect::new(left, top, w, h).map_err(|e| IngestError::Parse {
            line,
            msg: e.to_string(),
        })?;
        frames.entry(frame).or_default().push(Detection {
            frame,
            rect,
            class_label: ClassLabel::Pedestrian,
            confidence: conf,
        });
    }
    Ok((frames, warnings))
}

/// Serialize detections in MOT format, two decimals, `-1` placeholders.
pub fn write_mot_detections(frames: &FrameDetections) -> String {
    let mut out = String::new();
    for dets in frames.values() {
        for d in dets {
            let _ = writeln!(
                out,
                "{},-1,{:.2},{:.2},{:.2},{:.2},{:.2},-1,-1,-1",
                d.frame, d.rect.x, d.rect.y, d.rect.w, d.rect.h, d.confidence
            );
        }
    }
    out
}

/// Read KITTI tracking labels as detections. `DontCare` rows are dropped;
/// degenerate boxes are skipped with a warning. The trailing score column is
/// optional (ground-truth labels lack it).
pub fn read_kitti_detections(
    source: impl BufRead,
) -> Result<(FrameDetections, ReadWarnings), IngestError> {
    let mut frames = FrameDetections::new();
    let mut warnings = ReadWarnings::default();
    for (idx, row) in source.lines().enumerate() {
        let line = idx + 1;
        let row = row?;
        let text = row.trim();
        if text.is_empty() {
            continue;
        }
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() < 10 {
            return Err(IngestError::Parse {
                line,
                msg: format!("expected at least 10 whitespace-separated fields, got {}", fields.len()),
            });
        }
        if fields[2] == "DontCare" {
            continue;
        }
        let class_label = match ClassLabel::from_kitti(fields[2]) {
            Some(c) => c,
            None => {
                warnings.push(line, format!("unknown object type `{}`, using misc", fields[2]));
                ClassLabel::Misc
            }
        };
        let frame = parse_frame(line, fields[0], true)?;
        let l = parse_f64(line, fields[6], "bbox left")?;
        let t = parse_f64(line, fields[7], "bbox top")?;
        let r = parse_f64(line, fields[8], "bbox right")?;
        let b = parse_f64(line, fields[9], "bbox bottom")?;
        if r <= l || b <= t {
            warnings.push(line, format!("skipped box with non-positive extent ({l},{t})-({r},{b})"));
            continue;
        }
        let confidence = if fields.len() >= 18 {
            parse_f64(line, fields[17], "score")?.clamp(0.0, 1.0)
        } else {
            1.0
        };
        let rect = Rect::new(l, t, r - l, b - t).map_err(|e| IngestError::Parse {
            line,
            msg: e.to_string(),
        })?;
        frames.entry(frame).or_default().push(Detection {
            frame,
            rect,
            class_label,
            confidence,
        });
    }
    Ok((frames, warnings))
}

/// Read ground truth in the MOT convention
/// `frame,id,left,top,width,height,flag,class,visibility`.
pub fn read_mot_gt(source: impl BufRead) -> Result<(GroundTruth, ReadWarnings), IngestError> {
    let mut gt = GroundTruth::new();
    let mut warnings = ReadWarnings::default();
    for (idx, row) in source.lines().enumerate() {
        let line = idx + 1;
        let row = row?;
        let text = row.trim();
        if text.is_empty() {
            continue;
        }
        let fields: Vec<&str> = text.split(',').collect();
        if fields.len() < 6 {
            return Err(IngestError::Parse {
                line,
                msg: format!("expected at least 6 fields, got {}", fields.len()),
            });
        }
        let frame = parse_frame(line, fields[0], false)?;
        let id = fields[1].trim().parse::<u64>().map_err(|e| IngestError::Parse {
            line,
            msg: format!("bad id `{}`: {e}", fields[1].trim()),
        })?;
        let left = parse_f64(line, fields[2], "left")?;
        let top = parse_f64(line, fields[3], "top")?;
        let w = parse_f64(line, fields[4], "width")?;
        let h = parse_f64(line, fields[5], "height")?;
        if w <= 0.0 || h <= 0.0 {
            warnings.push(line, format!("skipped box with non-positive extent {w}x{h}"));
            continue;
        }
        let class_label = if fields.len() >= 8 {
            ClassLabel::from_code(parse_f64(line, fields[7], "class")? as u32)
        } else {
            ClassLabel::Pedestrian
        };
        let visible = if fields.len() >= 9 {
            parse_f64(line, fields[8], "visibility")? >= 0.5
        } else {
            true
        };
        let rect = Rect::new(left, top, w, h).map_err(|e| IngestError::Parse {
            line,
            msg: e.to_string(),
        })?;
        gt.entry(frame).or_default().push(GtEntry {
            id,
            rect,
            class_label,
            visible,
        });
    }
    Ok((gt, warnings))
}

pub fn write_mot_gt(gt: &GroundTruth) -> String {
    let mut out = String::new();
    for (frame, entries) in gt {
        for e in entries {
            let _ = writeln!(
                out,
                "{},{},{:.2},{:.2},{:.2},{:.2},1,{},{:.1}",
                frame,
                e.id,
                e.rect.x,
                e.rect.y,
                e.rect.w,
                e.rect.h,
                e.class_label.code(),
                if e.visible { 1.0 } else { 0.0 }
            );
        }
    }
    out
}

/// Read tracker output in the MOT result convention (same layout as
/// detections, with real track ids).
pub fn read_mot_tracks(source: impl BufRead) -> Result<TrackFrames, IngestError> {
    let mut frames = TrackFrames::new();
    for (idx, row) in source.lines().enumerate() {
        let line = idx + 1;
        let row = row?;
        let text = row.trim();
        if text.is_empty() {
            continue;
        }
        let fields: Vec<&str> = text.split(',').collect();
        if fields.len() < 6 {
            return Err(IngestError::Parse {
                line,
                msg: format!("expected at least 6 fields, got {}", fields.len()),
            });
        }
        let frame = parse_frame(line, fields[0], false)?;
        let id = fields[1].trim().parse::<u64>().map_err(|e| IngestError::Parse {
            line,
            msg: format!("bad id `{}`: {e}", fields[1].trim()),
        })?;
        let left = parse_f64(line, fields[2], "left")?;
        let top = parse_f64(line, fields[3], "top")?;
        let w = parse_f64(line, fields[4], "width")?;
        let h = parse_f64(line, fields[5], "height")?;
        let rect = Rect::new(left, top, w, h).map_err(|e| IngestError::Parse {
            line,
            msg: e.to_string(),
        })?;
        frames.entry(frame).or_default().push((id, rect));
    }
    Ok(frames)
}

pub fn write_mot_tracks(frames: &TrackFrames) -> String {
    let mut out = String::new();
    for (frame, rows) in frames {
        for (id, rect) in rows {
            let _ = writeln!(
                out,
                "{},{},{:.2},{:.2},{:.2},{:.2},1,-1,-1,-1",
                frame, id, rect.x, rect.y, rect.w, rect.h
            );
        }
    }
    out
}
