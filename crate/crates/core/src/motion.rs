//! Constant-velocity Kalman filtering over bounding-box state.
//!
//! The state is (cx, cy, area, aspect) plus velocities; aspect is held with
//! zero velocity. Hidden tracks keep receiving time updates without
//! measurement updates, so they coast along their last estimated motion and
//! the engine can extrapolate where they will resurface.

use crate::config::KalmanConfig;
use crate::geometry::Rect;
use crate::TrackId;
use nalgebra::{SMatrix, SVector};
use thiserror::Error;

type Vec8 = SVector<f64, 8>;
type Mat8 = SMatrix<f64, 8, 8>;
type Vec4 = SVector<f64, 4>;
type Mat4 = SMatrix<f64, 4, 4>;
type Mat4x8 = SMatrix<f64, 4, 8>;

/// Smallest area/aspect the filter will report; predictions shrink toward
/// this floor instead of collapsing after long coasting.
const MIN_AREA: f64 = 1.0;
const MIN_ASPECT: f64 = 1e-3;

#[derive(Debug, Error, PartialEq)]
pub enum MotionError {
    #[error("measurement contains non-finite values")]
    NonFiniteMeasurement,
    #[error("innovation covariance not invertible")]
    NumericalFailure,
}

/// Filter state over (cx, cy, area, aspect, vcx, vcy, varea, vaspect).
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    mean: Vec8,
    covariance: Mat8,
    n_updates: u64,
}

/// One track's predicted box for the next time point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub track_id: TrackId,
    pub rect: Rect,
    /// False until the state has absorbed at least one measurement.
    pub valid: bool,
    /// Set when the predicted area hit the floor (long coasting).
    pub area_clamped: bool,
}

fn measurement_of(rect: &Rect) -> Result<Vec4, MotionError> {
    let (cx, cy) = rect.center();
    let z = Vec4::new(cx, cy, rect.area(), rect.w / rect.h);
    if z.iter().all(|v| v.is_finite()) {
        Ok(z)
    } else {
        Err(MotionError::NonFiniteMeasurement)
    }
}

fn rect_of(cx: f64, cy: f64, area: f64, aspect: f64) -> Rect {
    let area = area.max(MIN_AREA);
    let aspect = aspect.max(MIN_ASPECT);
    let w = (area * aspect).sqrt();
    let h = (area / aspect).sqrt();
    Rect::new(cx - w / 2.0, cy - h / 2.0, w, h).expect("positive extent by construction")
}

fn transition() -> Mat8 {
    let mut f = Mat8::identity();
    f[(0, 4)] = 1.0;
    f[(1, 5)] = 1.0;
    f[(2, 6)] = 1.0;
    // aspect row stays decoupled from its (unused) velocity slot
    f
}

fn observation() -> Mat4x8 {
    let mut h = Mat4x8::zeros();
    h[(0, 0)] = 1.0;
    h[(1, 1)] = 1.0;
    h[(2, 2)] = 1.0;
    h[(3, 3)] = 1.0;
    h
}

fn process_noise(cfg: &KalmanConfig) -> Mat8 {
    Mat8::from_diagonal(&Vec8::from_row_slice(&[
        cfg.q_pos, cfg.q_pos, cfg.q_pos, cfg.q_pos, cfg.q_vel, cfg.q_vel, cfg.q_vel, 0.0,
    ]))
}

fn measurement_noise(cfg: &KalmanConfig) -> Mat4 {
    Mat4::from_diagonal(&Vec4::new(cfg.r_pos, cfg.r_pos, cfg.r_size, cfg.r_size))
}

/// Initial covariance: position/size scale `p0`, velocities ten times looser,
/// aspect velocity pinned at zero.
fn initial_covariance(cfg: &KalmanConfig) -> Mat8 {
    let p = cfg.p0;
    Mat8::from_diagonal(&Vec8::from_row_slice(&[
        p,
        p,
        p,
        p,
        10.0 * p,
        10.0 * p,
        10.0 * p,
        0.0,
    ]))
}

impl KalmanState {
    /// Track birth: position and size from the detection, velocities zero.
    pub fn init(rect: &Rect, cfg: &KalmanConfig) -> KalmanState {
        let (cx, cy) = rect.center();
        let mut mean = Vec8::zeros();
        mean[0] = cx;
        mean[1] = cy;
        mean[2] = rect.area();
        mean[3] = rect.w / rect.h;
        KalmanState {
            mean,
            covariance: initial_covariance(cfg),
            n_updates: 1,
        }
    }

    /// Constant-velocity time update. Returns the advanced state and the
    /// predicted box.
    pub fn predict(&self, cfg: &KalmanConfig) -> (KalmanState, Rect, bool) {
        let f = transition();
        let mut mean = f * self.mean;
        let clamped = mean[2] <= MIN_AREA || mean[3] <= MIN_ASPECT;
        mean[2] = mean[2].max(MIN_AREA);
        mean[3] = mean[3].max(MIN_ASPECT);
        let covariance = f * self.covariance * f.transpose() + process_noise(cfg);
        let rect = rect_of(mean[0], mean[1], mean[2], mean[3]);
        (
            KalmanState {
                mean,
                covariance,
                n_updates: self.n_updates,
            },
            rect,
            clamped,
        )
    }

    /// Measurement update on (cx, cy, area, aspect). Joseph-form covariance
    /// update keeps the covariance symmetric PSD.
    pub fn update(&self, obs: &Rect, cfg: &KalmanConfig) -> Result<KalmanState, MotionError> {
        let z = measurement_of(obs)?;
        let h = observation();
        let r = measurement_noise(cfg);
        let innovation = z - h * self.mean;
        let s = h * self.covariance * h.transpose() + r;
        let chol = cholesky_with_jitter(&s).ok_or(MotionError::NumericalFailure)?;
        let gain = self.covariance * h.transpose() * chol.inverse();
        let mut mean = self.mean + gain * innovation;
        mean[2] = mean[2].max(MIN_AREA);
        mean[3] = mean[3].max(MIN_ASPECT);
        let ikh = Mat8::identity() - gain * h;
        let mut covariance = ikh * self.covariance * ikh.transpose() + gain * r * gain.transpose();
        covariance = (covariance + covariance.transpose()) * 0.5;
        Ok(KalmanState {
            mean,
            covariance,
            n_updates: self.n_updates + 1,
        })
    }

    /// Current state mean as a box.
    pub fn rect(&self) -> Rect {
        rect_of(self.mean[0], self.mean[1], self.mean[2], self.mean[3])
    }

    /// Closed-form constant-velocity extrapolation `steps` frames ahead of
    /// the current state (no covariance bookkeeping).
    pub fn rect_after(&self, steps: u64) -> Rect {
        let k = steps as f64;
        rect_of(
            self.mean[0] + k * self.mean[4],
            self.mean[1] + k * self.mean[5],
            self.mean[2] + k * self.mean[6],
            self.mean[3],
        )
    }

    pub fn velocity(&self) -> (f64, f64) {
        (self.mean[4], self.mean[5])
    }

    pub fn has_measurement(&self) -> bool {
        self.n_updates >= 1
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }

    pub fn covariance(&self) -> &Mat8 {
        &self.covariance
    }
}

fn cholesky_with_jitter(s: &Mat4) -> Option<nalgebra::Cholesky<f64, nalgebra::Const<4>>> {
    for jitter in [1e-12, 1e-9, 1e-6] {
        let jittered = s + Mat4::identity() * jitter;
        if let Some(c) = nalgebra::Cholesky::new(jittered) {
            return Some(c);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rect(x: f64, y: f64, w: f64, h: f64) -> Rect {
        Rect::new(x, y, w, h).unwrap()
    }

    fn zero_noise() -> KalmanConfig {
        KalmanConfig {
            q_pos: 0.0,
            q_vel: 0.0,
            r_pos: 0.0,
            r_size: 0.0,
            p0: 10.0,
        }
    }

    #[test]
    fn init_parameterization() {
        let cfg = KalmanConfig::default();
        let s = KalmanState::init(&rect(10.0, 10.0, 4.0, 4.0), &cfg);
        assert_eq!(&s.mean()[..4], &[12.0, 12.0, 16.0, 1.0]);
        assert_eq!(&s.mean()[4..], &[0.0; 4]);
        let t = KalmanState::init(&rect(0.0, 0.0, 2.0, 8.0), &cfg);
        assert_eq!(t.mean()[3], 0.25);
    }

    #[test]
    fn init_covariance_is_configured_diagonal() {
        let cfg = KalmanConfig::default();
        let s = KalmanState::init(&rect(0.0, 0.0, 2.0, 2.0), &cfg);
        assert_eq!(s.covariance, initial_covariance(&cfg));
    }

    #[test]
    fn zero_velocity_predict_is_fixpoint() {
        let cfg = KalmanConfig::default();
        let s = KalmanState::init(&rect(5.0, 6.0, 3.0, 4.0), &cfg);
        let (_, predicted, clamped) = s.predict(&cfg);
        assert!(!clamped);
        let r = s.rect();
        assert!((predicted.x - r.x).abs() < 1e-9 && (predicted.w - r.w).abs() < 1e-9);
    }

    #[test]
    fn linear_transition_moves_center() {
        let cfg = KalmanConfig::default();
        let mut s = KalmanState::init(&rect(-1.0, -1.0, 2.0, 2.0), &cfg);
        s.mean[4] = 5.0;
        let (next, predicted, _) = s.predict(&cfg);
        assert_eq!(next.mean[0], 5.0);
        let (cx, _) = predicted.center();
        assert!((cx - 5.0).abs() < 1e-9);
    }

    /// Independent 2-state (position, velocity) reference filter; mirrors the
    /// decoupled cx sub-problem of the 8-state filter.
    struct RefFilter {
        x: [f64; 2],
        p: [[f64; 2]; 2],
    }

    impl RefFilter {
        fn new(pos: f64, p0: f64) -> Self {
            RefFilter {
                x: [pos, 0.0],
                p: [[p0, 0.0], [0.0, 10.0 * p0]],
            }
        }
        fn predict(&mut self) {
            // F = [[1,1],[0,1]], Q = 0
            self.x = [self.x[0] + self.x[1], self.x[1]];
            let p = self.p;
            self.p = [
                [
                    p[0][0] + p[1][0] + p[0][1] + p[1][1],
                    p[0][1] + p[1][1],
                ],
                [p[1][0] + p[1][1], p[1][1]],
            ];
        }
        fn update(&mut self, z: f64) {
            // H = [1, 0], R = 0 with the same stabilizing jitter
            let s = self.p[0][0] + 1e-12;
            let k = [self.p[0][0] / s, self.p[1][0] / s];
            let y = z - self.x[0];
            self.x = [self.x[0] + k[0] * y, self.x[1] + k[1] * y];
            let p = self.p;
            self.p = [
                [(1.0 - k[0]) * p[0][0], (1.0 - k[0]) * p[0][1]],
                [p[1][0] - k[1] * p[0][0], p[1][1] - k[1] * p[0][1]],
            ];
        }
    }

    #[test]
    fn constant_velocity_recursion_matches_reference() {
        let cfg = zero_noise();
        let mut s = KalmanState::init(&rect(-5.0, -5.0, 10.0, 10.0), &cfg); // cx = 0
        let mut reference = RefFilter::new(0.0, cfg.p0);
        for z in [10.0, 20.0] {
            let (pred, _, _) = s.predict(&cfg);
            reference.predict();
            s = pred
                .update(&rect(z - 5.0, -5.0, 10.0, 10.0), &cfg)
                .unwrap();
            reference.update(z);
        }
        let (_, predicted, _) = s.predict(&cfg);
        reference.predict();
        let (cx, _) = predicted.center();
        assert!((cx - 30.0).abs() < 1e-6, "cx = {cx}");
        assert!((cx - reference.x[0]).abs() < 1e-9);
    }

    #[test]
    fn scalar_update_matches_textbook_gain() {
        let cfg = KalmanConfig::default();
        let s = KalmanState::init(&rect(-5.0, -5.0, 10.0, 10.0), &cfg); // cx = 0, var = p0
        let z = 4.0;
        let updated = s.update(&rect(z - 5.0, -5.0, 10.0, 10.0), &cfg).unwrap();
        let k = cfg.p0 / (cfg.p0 + cfg.r_pos);
        let expected = 0.0 + k * (z - 0.0);
        assert!((updated.mean()[0] - expected).abs() < 1e-9);
    }

    #[test]
    fn zero_innovation_keeps_mean() {
        let cfg = KalmanConfig::default();
        let s = KalmanState::init(&rect(2.0, 3.0, 4.0, 5.0), &cfg);
        let updated = s.update(&rect(2.0, 3.0, 4.0, 5.0), &cfg).unwrap();
        for i in 0..8 {
            assert!((updated.mean()[i] - s.mean()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn infinite_measurement_noise_keeps_mean() {
        let cfg = KalmanConfig {
            r_pos: 1e12,
            r_size: 1e12,
            ..KalmanConfig::default()
        };
        let s = KalmanState::init(&rect(0.0, 0.0, 4.0, 4.0), &cfg);
        let updated = s.update(&rect(10.0, 10.0, 4.0, 4.0), &cfg).unwrap();
        for i in 0..8 {
            assert!((updated.mean()[i] - s.mean()[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn non_finite_measurement_rejected() {
        let cfg = KalmanConfig::default();
        let s = KalmanState::init(&rect(0.0, 0.0, 4.0, 4.0), &cfg);
        let huge = Rect::new(0.0, 0.0, 1e308, 1e308).unwrap();
        assert_eq!(s.update(&huge, &cfg), Err(MotionError::NonFiniteMeasurement));
    }

    #[test]
    fn predict_is_deterministic() {
        let cfg = KalmanConfig::default();
        let s = KalmanState::init(&rect(1.0, 2.0, 3.0, 4.0), &cfg);
        let a = s.predict(&cfg);
        let b = s.predict(&cfg);
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn long_coasting_clamps_area() {
        let cfg = KalmanConfig::default();
        let mut s = KalmanState::init(&rect(0.0, 0.0, 3.0, 3.0), &cfg);
        s.mean[6] = -4.0; // shrinking fast
        let mut clamped = false;
        for _ in 0..10 {
            let (next, r, c) = s.predict(&cfg);
            s = next;
            clamped |= c;
            assert!(r.area() >= MIN_AREA - 1e-9);
        }
        assert!(clamped);
    }

    fn min_eigenvalue(m: &Mat8) -> f64 {
        let sym = (m + m.transpose()) * 0.5;
        sym.symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    proptest! {
        #[test]
        fn covariance_stays_psd(
            steps in proptest::collection::vec((0u8..2, -30i32..30, -30i32..30, 1i32..40, 1i32..40), 1..25),
            q in 0u32..100,
            r in 0u32..100,
        ) {
            let cfg = KalmanConfig {
                q_pos: q as f64 * 0.01,
                q_vel: q as f64 * 0.005,
                r_pos: r as f64 * 0.1,
                r_size: r as f64 * 0.5,
                p0: 10.0,
            };
            let mut s = KalmanState::init(&rect(0.0, 0.0, 10.0, 10.0), &cfg);
            for (op, x, y, w, h) in steps {
                if op == 0 {
                    s = s.predict(&cfg).0;
                } else {
                    s = s.update(&rect(x as f64, y as f64, w as f64, h as f64), &cfg).unwrap();
                }
                prop_assert!(min_eigenvalue(s.covariance()) >= -1e-9);
            }
        }

        #[test]
        fn exact_cv_trajectory_converges(v in -6i32..6, start in -40i32..40) {
            let cfg = zero_noise();
            let b = |cx: f64| rect(cx - 5.0, 0.0, 10.0, 10.0);
            let mut s = KalmanState::init(&b(start as f64), &cfg);
            let mut err = f64::INFINITY;
            for k in 1..=6u32 {
                let truth = (start + v * k as i32) as f64;
                let (pred, r, _) = s.predict(&cfg);
                let (cx, _) = r.center();
                err = (cx - truth).abs();
                s = pred.update(&b(truth), &cfg).unwrap();
            }
            prop_assert!(err < 1e-6, "error after 6 frames: {err}");
        }
    }
}
