//! Engine configuration: every tunable threshold, noise parameter, cost
//! weight and horizon in one place, loadable from a flat `key = value` file
//! with dotted keys.

use crate::geometry::Rect;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Malformed { line: usize, text: String },
    #[error("line {line}: unknown config key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: invalid value for `{key}`: {msg}")]
    BadValue {
        line: usize,
        key: String,
        msg: String,
    },
    #[error("config invariant violated: {0}")]
    Invalid(String),
}

/// Kalman filter noise parameters (pixel and pixel^2/frame units).
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanConfig {
    /// Process noise for the position/size part of the state.
    pub q_pos: f64,
    /// Process noise for the velocity part of the state.
    pub q_vel: f64,
    /// Measurement noise on the center coordinates.
    pub r_pos: f64,
    /// Measurement noise on area and aspect ratio.
    pub r_size: f64,
    /// Initial state uncertainty scale.
    pub p0: f64,
}

impl Default for KalmanConfig {
    fn default() -> Self {
        // Defaults keep a stationary box pinned within 3 frames while leaving
        // room for pixel-level detector jitter.
        KalmanConfig {
            q_pos: 1e-2,
            q_vel: 1e-2,
            r_pos: 1.0,
            r_size: 10.0,
            p0: 10.0,
        }
    }
}

/// Weights of the event / association cost level of the objective.
#[derive(Debug, Clone, PartialEq)]
pub struct CostWeights {
    pub start: u64,
    pub end: u64,
    pub halt: u64,
    pub resume: u64,
    pub missing: u64,
    pub ignore_det: u64,
}

impl Default for CostWeights {
    fn default() -> Self {
        CostWeights {
            start: 10,
            end: 10,
            halt: 4,
            resume: 2,
            missing: 6,
            ignore_det: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    /// Minimum IoU for an assign/resume pair to be admissible.
    pub iou_threshold: f64,
    /// Minimum detection confidence for assignment; detections below it can
    /// only be ignored (or start a track when `allow_low_conf_starts`).
    pub conf_threshold: f64,
    /// Frames a track may stay without a supporting observation before it is
    /// retired.
    pub max_halt_duration: u64,
    /// Width of the image border band in which entering/leaving the field of
    /// view is plausible.
    pub fov_margin_px: f64,
    /// Image extent; when absent it is inferred online from the detections
    /// seen so far.
    pub image_size: Option<(f64, f64)>,
    pub kalman: KalmanConfig,
    pub costs: CostWeights,
    /// How far ahead reappearance of a hidden track is extrapolated (frames).
    pub prediction_horizon: u64,
    /// Maximum lead time for which a reappearance warning fires (frames).
    pub warning_horizon: u64,
    /// Region that triggers HIDDEN_ENTITY warnings; when absent, the centered
    /// lower third of the image.
    pub caution_region: Option<Rect>,
    /// Whether detections below `conf_threshold` may start new tracks.
    pub allow_low_conf_starts: bool,
    /// Upper IoU bound below which an overlapped visible track is reported as
    /// partially occluded.
    pub partial_occlusion_gate: f64,
    /// Reserved for synthetic-scene generation; the engine itself is
    /// deterministic and does not draw random numbers.
    pub seed: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            iou_threshold: 0.3,
            conf_threshold: 0.5,
            max_halt_duration: 30,
            fov_margin_px: 16.0,
            image_size: None,
            kalman: KalmanConfig::default(),
            costs: CostWeights::default(),
            prediction_horizon: 60,
            warning_horizon: 30,
            caution_region: None,
            allow_low_conf_starts: false,
            partial_occlusion_gate: 0.5,
            seed: 0,
        }
    }
}

/// (key, default, description) for every config key.
const KEY_DOCS: &[(&str, &str, &str)] = &[
    ("iou_threshold", "0.3", "minimum IoU for assign/resume admissibility"),
    ("conf_threshold", "0.5", "minimum detection confidence for assignment"),
    ("max_halt_duration", "30", "frames without support before a track is retired"),
    ("fov_margin_px", "16", "border band width for enter/leave plausibility (px)"),
    ("image.width", "unset", "image width in px; inferred from detections when unset"),
    ("image.height", "unset", "image height in px; inferred from detections when unset"),
    ("kalman.q_pos", "0.01", "process noise, position/size components"),
    ("kalman.q_vel", "0.01", "process noise, velocity components"),
    ("kalman.r_pos", "1", "measurement noise, center coordinates"),
    ("kalman.r_size", "10", "measurement noise, area and aspect"),
    ("kalman.p0", "10", "initial state uncertainty scale"),
    ("cost.start", "10", "weight of starting a track"),
    ("cost.end", "10", "weight of ending a track"),
    ("cost.halt", "4", "weight of halting a track"),
    ("cost.resume", "2", "weight of resuming a halted track"),
    ("cost.missing", "6", "weight of the missing-detections explanation"),
    ("cost.ignore_det", "1", "weight of ignoring a detection"),
    ("horizon.prediction", "60", "reappearance extrapolation horizon (frames)"),
    ("horizon.warning", "30", "maximum warning lead time (frames)"),
    ("caution.x", "unset", "caution region left edge; default: centered lower third"),
    ("caution.y", "unset", "caution region top edge"),
    ("caution.w", "unset", "caution region width"),
    ("caution.h", "unset", "caution region height"),
    ("allow_low_conf_starts", "false", "let low-confidence detections start tracks"),
    ("partial_occlusion_gate", "0.5", "IoU bound for the partially-occluded report"),
    ("seed", "0", "seed reserved for synthetic generation"),
];

impl EngineConfig {
    /// Parse a flat `key = value` config text. Lines starting with `#` and
    /// blank lines are skipped. Unknown keys are hard errors.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = EngineConfig::default();
        let mut caution: [Option<f64>; 4] = [None; 4];
        let mut image: [Option<f64>; 2] = [None; 2];
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let stripped = raw.split('#').next().unwrap_or("").trim();
            if stripped.is_empty() {
                continue;
            }
            let (key, value) = stripped.split_once('=').ok_or(ConfigError::Malformed {
                line,
                text: raw.to_string(),
            })?;
            let key = key.trim();
            let value = value.trim();
            cfg.apply_key(key, value, line, &mut caution, &mut image)?;
        }
        if let [Some(w), Some(h)] = image {
            cfg.image_size = Some((w, h));
        } else if image.iter().any(Option::is_some) {
            return Err(ConfigError::Invalid(
                "image.width and image.height must be set together".into(),
            ));
        }
        if caution.iter().all(Option::is_some) {
            let r = Rect::new(
                caution[0].unwrap(),
                caution[1].unwrap(),
                caution[2].unwrap(),
                caution[3].unwrap(),
            )
            .map_err(|e| ConfigError::Invalid(format!("caution region: {e}")))?;
            cfg.caution_region = Some(r);
        } else if caution.iter().any(Option::is_some) {
            return Err(ConfigError::Invalid(
                "caution.{x,y,w,h} must be set together".into(),
            ));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Apply a batch of dotted-key overrides (the command-line `--set`
    /// flags). Grouped keys (`image.*`, `caution.*`) must be completed within
    /// one batch unless already set.
    pub fn apply_overrides(&mut self, pairs: &[(&str, &str)]) -> Result<(), ConfigError> {
        let mut caution = [
            self.caution_region.map(|r| r.x),
            self.caution_region.map(|r| r.y),
            self.caution_region.map(|r| r.w),
            self.caution_region.map(|r| r.h),
        ];
        let mut image = [self.image_size.map(|s| s.0), self.image_size.map(|s| s.1)];
        for (key, value) in pairs {
            self.apply_key(key, value, 0, &mut caution, &mut image)?;
        }
        match image {
            [Some(w), Some(h)] => self.image_size = Some((w, h)),
            [None, None] => {}
            _ => {
                return Err(ConfigError::Invalid(
                    "image.width and image.height must be set together".into(),
                ))
            }
        }
        if caution.iter().all(Option::is_some) {
            self.caution_region = Some(
                Rect::new(
                    caution[0].unwrap(),
                    caution[1].unwrap(),
                    caution[2].unwrap(),
                    caution[3].unwrap(),
                )
                .map_err(|e| ConfigError::Invalid(format!("caution region: {e}")))?,
            );
        } else if caution.iter().any(Option::is_some) {
            return Err(ConfigError::Invalid(
                "caution.{x,y,w,h} must be set together".into(),
            ));
        }
        self.validate()
    }

    /// Apply a single dotted-key override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        self.apply_overrides(&[(key, value)])
    }

    fn apply_key(
        &mut self,
        key: &str,
        value: &str,
        line: usize,
        caution: &mut [Option<f64>; 4],
        image: &mut [Option<f64>; 2],
    ) -> Result<(), ConfigError> {
        let bad = |key: &str, msg: String| ConfigError::BadValue {
            line,
            key: key.to_string(),
            msg,
        };
        let parse_f64 =
            |key: &str, v: &str| v.parse::<f64>().map_err(|e| bad(key, e.to_string()));
        let parse_u64 =
            |key: &str, v: &str| v.parse::<u64>().map_err(|e| bad(key, e.to_string()));
        let parse_bool =
            |key: &str, v: &str| v.parse::<bool>().map_err(|e| bad(key, e.to_string()));
        match key {
            "iou_threshold" => self.iou_threshold = parse_f64(key, value)?,
            "conf_threshold" => self.conf_threshold = parse_f64(key, value)?,
            "max_halt_duration" => self.max_halt_duration = parse_u64(key, value)?,
            "fov_margin_px" => self.fov_margin_px = parse_f64(key, value)?,
            "image.width" => image[0] = Some(parse_f64(key, value)?),
            "image.height" => image[1] = Some(parse_f64(key, value)?),
            "kalman.q_pos" => self.kalman.q_pos = parse_f64(key, value)?,
            "kalman.q_vel" => self.kalman.q_vel = parse_f64(key, value)?,
            "kalman.r_pos" => self.kalman.r_pos = parse_f64(key, value)?,
            "kalman.r_size" => self.kalman.r_size = parse_f64(key, value)?,
            "kalman.p0" => self.kalman.p0 = parse_f64(key, value)?,
            "cost.start" => self.costs.start = parse_u64(key, value)?,
            "cost.end" => self.costs.end = parse_u64(key, value)?,
            "cost.halt" => self.costs.halt = parse_u64(key, value)?,
            "cost.resume" => self.costs.resume = parse_u64(key, value)?,
            "cost.missing" => self.costs.missing = parse_u64(key, value)?,
            "cost.ignore_det" => self.costs.ignore_det = parse_u64(key, value)?,
            "horizon.prediction" => self.prediction_horizon = parse_u64(key, value)?,
            "horizon.warning" => self.warning_horizon = parse_u64(key, value)?,
            "caution.x" => caution[0] = Some(parse_f64(key, value)?),
            "caution.y" => caution[1] = Some(parse_f64(key, value)?),
            "caution.w" => caution[2] = Some(parse_f64(key, value)?),
            "caution.h" => caution[3] = Some(parse_f64(key, value)?),
            "allow_low_conf_starts" => self.allow_low_conf_starts = parse_bool(key, value)?,
            "partial_occlusion_gate" => self.partial_occlusion_gate = parse_f64(key, value)?,
            "seed" => self.seed = parse_u64(key, value)?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        if !in_unit(self.iou_threshold) {
            return Err(ConfigError::Invalid("iou_threshold must be in [0,1]".into()));
        }
        if !in_unit(self.conf_threshold) {
            return Err(ConfigError::Invalid("conf_threshold must be in [0,1]".into()));
        }
        if !in_unit(self.partial_occlusion_gate) {
            return Err(ConfigError::Invalid(
                "partial_occlusion_gate must be in [0,1]".into(),
            ));
        }
        if self.max_halt_duration < 1 {
            return Err(ConfigError::Invalid("max_halt_duration must be >= 1".into()));
        }
        if self.prediction_horizon < 1 || self.warning_horizon < 1 {
            return Err(ConfigError::Invalid("horizons must be >= 1".into()));
        }
        if self.fov_margin_px < 0.0 {
            return Err(ConfigError::Invalid("fov_margin_px must be >= 0".into()));
        }
        let k = &self.kalman;
        if [k.q_pos, k.q_vel, k.r_pos, k.r_size, k.p0]
            .iter()
            .any(|v| !v.is_finite() || *v < 0.0)
        {
            return Err(ConfigError::Invalid(
                "kalman noise parameters must be finite and >= 0".into(),
            ));
        }
        if let Some((w, h)) = self.image_size {
            if w <= 0.0 || h <= 0.0 {
                return Err(ConfigError::Invalid("image size must be positive".into()));
            }
        }
        Ok(())
    }

    /// Serialize the effective configuration back to the flat key format.
    /// `parse(dump(cfg))` is value-identical to `cfg`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("iou_threshold", format!("{}", self.iou_threshold));
        kv("conf_threshold", format!("{}", self.conf_threshold));
        kv("max_halt_duration", format!("{}", self.max_halt_duration));
        kv("fov_margin_px", format!("{}", self.fov_margin_px));
        if let Some((w, h)) = self.image_size {
            kv("image.width", format!("{w}"));
            kv("image.height", format!("{h}"));
        }
        kv("kalman.q_pos", format!("{}", self.kalman.q_pos));
        kv("kalman.q_vel", format!("{}", self.kalman.q_vel));
        kv("kalman.r_pos", format!("{}", self.kalman.r_pos));
        kv("kalman.r_size", format!("{}", self.kalman.r_size));
        kv("kalman.p0", format!("{}", self.kalman.p0));
        kv("cost.start", format!("{}", self.costs.start));
        kv("cost.end", format!("{}", self.costs.end));
        kv("cost.halt", format!("{}", self.costs.halt));
        kv("cost.resume", format!("{}", self.costs.resume));
        kv("cost.missing", format!("{}", self.costs.missing));
        kv("cost.ignore_det", format!("{}", self.costs.ignore_det));
        kv("horizon.prediction", format!("{}", self.prediction_horizon));
        kv("horizon.warning", format!("{}", self.warning_horizon));
        if let Some(r) = self.caution_region {
            kv("caution.x", format!("{}", r.x));
            kv("caution.y", format!("{}", r.y));
            kv("caution.w", format!("{}", r.w));
            kv("caution.h", format!("{}", r.h));
        }
        kv("allow_low_conf_starts", format!("{}", self.allow_low_conf_starts));
        kv(
            "partial_occlusion_gate",
            format!("{}", self.partial_occlusion_gate),
        );
        kv("seed", format!("{}", self.seed));
        out
    }

    /// Markdown reference table of all keys, defaults and meanings.
    pub fn reference_markdown() -> String {
        let mut out = String::from(
            "# Configuration reference\n\n\
             Flat `key = value` file; `#` starts a comment. Keys:\n\n\
             | Key | Default | Meaning |\n|---|---|---|\n",
        );
        for (key, default, doc) in KEY_DOCS {
            let _ = writeln!(out, "| `{key}` | {default} | {doc} |");
        }
        out
    }

    /// Effective caution region, defaulting to the centered lower third of
    /// the image extent.
    pub fn caution_region_for(&self, image: (f64, f64)) -> Rect {
        self.caution_region.unwrap_or_else(|| {
            let (w, h) = image;
            Rect::new(w / 3.0, 2.0 * h / 3.0, w / 3.0, h / 3.0)
                .expect("image extent is positive")
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        EngineConfig::default().validate().unwrap();
    }

    #[test]
    fn parse_overrides_and_comments() {
        let cfg = EngineConfig::parse(
            "# tracking setup\niou_threshold = 0.25\ncost.halt = 7\nimage.width = 640\nimage.height = 480\n",
        )
        .unwrap();
        assert_eq!(cfg.iou_threshold, 0.25);
        assert_eq!(cfg.costs.halt, 7);
        assert_eq!(cfg.image_size, Some((640.0, 480.0)));
    }

    #[test]
    fn unknown_key_is_reported() {
        let err = EngineConfig::parse("iuo_threshold = 0.3\n").unwrap_err();
        assert_eq!(
            err,
            ConfigError::UnknownKey {
                line: 1,
                key: "iuo_threshold".into()
            }
        );
    }

    #[test]
    fn dump_reload_round_trip() {
        let mut cfg = EngineConfig::default();
        cfg.apply_overrides(&[
            ("kalman.q_vel", "0.125"),
            ("caution.x", "100"),
            ("caution.y", "200"),
            ("caution.w", "50"),
            ("caution.h", "40"),
            ("image.width", "1024"),
            ("image.height", "768"),
        ])
        .unwrap();
        let reloaded = EngineConfig::parse(&cfg.dump()).unwrap();
        assert_eq!(cfg, reloaded);
    }

    #[test]
    fn partial_caution_override_rejected() {
        let mut cfg = EngineConfig::default();
        assert!(cfg.set("caution.x", "100").is_err());
    }

    #[test]
    fn out_of_range_threshold_rejected() {
        assert!(EngineConfig::parse("iou_threshold = 1.5\n").is_err());
    }

    #[test]
    fn default_caution_region_is_lower_third() {
        let cfg = EngineConfig::default();
        let r = cfg.caution_region_for((900.0, 600.0));
        assert_eq!((r.x, r.y, r.w, r.h), (300.0, 400.0, 300.0, 200.0));
    }
}
