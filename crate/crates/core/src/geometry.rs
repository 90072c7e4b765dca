//! Axis-aligned rectangle arithmetic and qualitative spatial relations.
//!
//! Rectangles are the spatial footprint of every tracked entity. Besides the
//! usual overlap measure (IoU) this module classifies pairs of rectangles
//! qualitatively: the 13 interval relations per axis, combined into a
//! rectangle-algebra relation. The qualitative layer is exact - boundary
//! coincidence maps to `meets`/`starts`/... with no epsilon fuzzing; tolerance
//! handling belongs to the thresholds of the association layer.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("rectangle has non-positive extent: w={w}, h={h}")]
    EmptyRect { w: f64, h: f64 },
    #[error("rectangle has non-finite coordinates")]
    NonFiniteRect,
    #[error("degenerate interval: lo == hi == {0}")]
    DegenerateInterval(f64),
}

/// Axis-aligned bounding box, top-left anchored, in pixels.
///
/// Coordinates are real-valued; detectors emit fractional boxes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self, GeometryError> {
        if !(x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite()) {
            return Err(GeometryError::NonFiniteRect);
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(GeometryError::EmptyRect { w, h });
        }
        Ok(Rect { x, y, w, h })
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    /// Overlap area with `other`; 0 when disjoint.
    pub fn intersection_area(&self, other: &Rect) -> f64 {
        let iw = (self.right().min(other.right()) - self.x.max(other.x)).max(0.0);
        let ih = (self.bottom().min(other.bottom()) - self.y.max(other.y)).max(0.0);
        iw * ih
    }

    pub fn x_extent(&self) -> Interval {
        Interval {
            lo: self.x,
            hi: self.right(),
        }
    }

    pub fn y_extent(&self) -> Interval {
        Interval {
            lo: self.y,
            hi: self.bottom(),
        }
    }
}

/// Intersection over union of two boxes. Symmetric, in [0, 1], and 1 only for
/// identical boxes.
pub fn iou(a: &Rect, b: &Rect) -> f64 {
    if a == b {
        // (x + w) - x need not equal w in floating point; keep the identity
        // case exact.
        return 1.0;
    }
    let inter = a.intersection_area(b);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    inter / union
}

/// Nondegenerate closed interval on one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self, GeometryError> {
        if lo >= hi {
            return Err(GeometryError::DegenerateInterval(lo));
        }
        Ok(Interval { lo, hi })
    }
}

/// The 13 interval relations. Exactly one holds for any ordered pair of
/// nondegenerate intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IaRelation {
    Before,
    After,
    During,
    Contains,
    Starts,
    StartedBy,
    Finishes,
    FinishedBy,
    Overlaps,
    OverlappedBy,
    Meets,
    MetBy,
    Equal,
}

impl IaRelation {
    /// The relation that holds with the arguments swapped.
    pub fn converse(self) -> IaRelation {
        use IaRelation::*;
        match self {
            Before => After,
            After => Before,
            During => Contains,
            Contains => During,
            Starts => StartedBy,
            StartedBy => Starts,
            Finishes => FinishedBy,
            FinishedBy => Finishes,
            Overlaps => OverlappedBy,
            OverlappedBy => Overlaps,
            Meets => MetBy,
            MetBy => Meets,
            Equal => Equal,
        }
    }
}

/// Classify the ordered pair (i, j).
pub fn ia_relation(i: &Interval, j: &Interval) -> IaRelation {
    use IaRelation::*;
    if i.hi < j.lo {
        return Before;
    }
    if i.lo > j.hi {
        return After;
    }
    if i.hi == j.lo {
        return Meets;
    }
    if i.lo == j.hi {
        return MetBy;
    }
    match (i.lo == j.lo, i.hi == j.hi) {
        (true, true) => Equal,
        (true, false) => {
            if i.hi < j.hi {
                Starts
            } else {
                StartedBy
            }
        }
        (false, true) => {
            if i.lo > j.lo {
                Finishes
            } else {
                FinishedBy
            }
        }
        (false, false) => {
            if i.lo > j.lo && i.hi < j.hi {
                During
            } else if i.lo < j.lo && i.hi > j.hi {
                Contains
            } else if i.lo < j.lo {
                Overlaps
            } else {
                OverlappedBy
            }
        }
    }
}

/// Rectangle-algebra relation: one interval relation per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RaRelation {
    pub horizontal: IaRelation,
    pub vertical: IaRelation,
}

pub fn ra_relation(a: &Rect, b: &Rect) -> RaRelation {
    RaRelation {
        horizontal: ia_relation(&a.x_extent(), &b.x_extent()),
        vertical: ia_relation(&a.y_extent(), &b.y_extent()),
    }
}

/// True when `r` says the first rectangle is covered by the second on this
/// axis: it does not extend past the right/bottom end of the other box.
pub fn covered_axis(r: IaRelation) -> bool {
    use IaRelation::*;
    matches!(r, During | Starts | Finishes | Equal | Overlaps)
}

/// Spatial gate for "a is hidden by b": boxes overlap and a is covered on
/// both axes.
pub fn occlusion_gate(a: &Rect, b: &Rect) -> bool {
    if iou(a, b) <= 0.0 {
        return false;
    }
    let r = ra_relation(a, b);
    covered_axis(r.horizontal) && covered_axis(r.vertical)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rect(x: f64, y: f64, w: f64, h: f64) -> Rect {
        Rect::new(x, y, w, h).unwrap()
    }

    #[test]
    fn iou_identity() {
        let a = rect(0.0, 0.0, 2.0, 2.0);
        assert_eq!(iou(&a, &a), 1.0);
    }

    #[test]
    fn iou_disjoint() {
        let a = rect(0.0, 0.0, 2.0, 2.0);
        let b = rect(5.0, 5.0, 2.0, 2.0);
        assert_eq!(iou(&a, &b), 0.0);
    }

    #[test]
    fn iou_partial_overlap() {
        // intersection 1, union 4 + 4 - 1 = 7
        let a = rect(0.0, 0.0, 2.0, 2.0);
        let b = rect(1.0, 1.0, 2.0, 2.0);
        let expected = 1.0 / 7.0;
        assert!((iou(&a, &b) - expected).abs() < 1e-12);
        assert!((iou(&b, &a) - expected).abs() < 1e-12);
    }

    #[test]
    fn rect_rejects_degenerate() {
        assert!(Rect::new(0.0, 0.0, 0.0, 2.0).is_err());
        assert!(Rect::new(0.0, 0.0, 2.0, -1.0).is_err());
        assert!(Rect::new(f64::NAN, 0.0, 2.0, 2.0).is_err());
    }

    #[test]
    fn interval_rejects_degenerate() {
        assert_eq!(
            Interval::new(3.0, 3.0),
            Err(GeometryError::DegenerateInterval(3.0))
        );
    }

    #[test]
    fn ia_basic_cases() {
        let i = |lo, hi| Interval::new(lo, hi).unwrap();
        assert_eq!(ia_relation(&i(0.0, 1.0), &i(2.0, 3.0)), IaRelation::Before);
        assert_eq!(ia_relation(&i(0.0, 2.0), &i(0.0, 2.0)), IaRelation::Equal);
        assert_eq!(ia_relation(&i(0.0, 2.0), &i(1.0, 3.0)), IaRelation::Overlaps);
        assert_eq!(ia_relation(&i(0.0, 1.0), &i(1.0, 3.0)), IaRelation::Meets);
        assert_eq!(ia_relation(&i(1.0, 2.0), &i(0.0, 3.0)), IaRelation::During);
        assert_eq!(ia_relation(&i(0.0, 1.0), &i(0.0, 3.0)), IaRelation::Starts);
        assert_eq!(ia_relation(&i(2.0, 3.0), &i(0.0, 3.0)), IaRelation::Finishes);
    }

    #[test]
    fn ra_examples() {
        let a = rect(0.0, 0.0, 2.0, 2.0);
        assert_eq!(
            ra_relation(&a, &a),
            RaRelation {
                horizontal: IaRelation::Equal,
                vertical: IaRelation::Equal
            }
        );
        let b = rect(1.0, 1.0, 2.0, 2.0);
        assert_eq!(
            ra_relation(&a, &b),
            RaRelation {
                horizontal: IaRelation::Overlaps,
                vertical: IaRelation::Overlaps
            }
        );
        let inner = rect(1.0, 1.0, 1.0, 1.0);
        let outer = rect(0.0, 0.0, 4.0, 4.0);
        assert_eq!(
            ra_relation(&inner, &outer),
            RaRelation {
                horizontal: IaRelation::During,
                vertical: IaRelation::During
            }
        );
    }

    /// Independent 13-case classification used as oracle: decides purely from
    /// the order signs of the four endpoint comparisons.
    fn allen_oracle(i: &Interval, j: &Interval) -> IaRelation {
        use std::cmp::Ordering as O;
        use IaRelation::*;
        let c = |a: f64, b: f64| a.partial_cmp(&b).unwrap();
        match (
            c(i.lo, j.lo),
            c(i.hi, j.hi),
            c(i.hi, j.lo),
            c(i.lo, j.hi),
        ) {
            (_, _, O::Less, _) => Before,
            (_, _, _, O::Greater) => After,
            (_, _, O::Equal, _) => Meets,
            (_, _, _, O::Equal) => MetBy,
            (O::Equal, O::Equal, _, _) => Equal,
            (O::Equal, O::Less, _, _) => Starts,
            (O::Equal, O::Greater, _, _) => StartedBy,
            (O::Greater, O::Equal, _, _) => Finishes,
            (O::Less, O::Equal, _, _) => FinishedBy,
            (O::Greater, O::Less, _, _) => During,
            (O::Less, O::Greater, _, _) => Contains,
            (O::Less, O::Less, _, _) => Overlaps,
            (O::Greater, O::Greater, _, _) => OverlappedBy,
        }
    }

    fn arb_interval() -> impl Strategy<Value = Interval> {
        // Coarse grid so boundary cases (meets, starts, ...) actually occur.
        (-8i32..8, 1i32..8)
            .prop_map(|(lo, len)| Interval::new(lo as f64, (lo + len) as f64).unwrap())
    }

    fn arb_rect() -> impl Strategy<Value = Rect> {
        (-50i32..50, -50i32..50, 1i32..40, 1i32..40)
            .prop_map(|(x, y, w, h)| rect(x as f64, y as f64, w as f64, h as f64))
    }

    proptest! {
        #[test]
        fn relation_matches_oracle_and_converse(i in arb_interval(), j in arb_interval()) {
            let r = ia_relation(&i, &j);
            prop_assert_eq!(r, allen_oracle(&i, &j));
            prop_assert_eq!(ia_relation(&j, &i), r.converse());
        }

        #[test]
        fn iou_symmetric_bounded(a in arb_rect(), b in arb_rect()) {
            let v = iou(&a, &b);
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert_eq!(v, iou(&b, &a));
        }

        #[test]
        fn iou_translation_invariant(a in arb_rect(), b in arb_rect(), dx in -20i32..20, dy in -20i32..20) {
            let shift = |r: &Rect| rect(r.x + dx as f64, r.y + dy as f64, r.w, r.h);
            prop_assert_eq!(iou(&a, &b), iou(&shift(&a), &shift(&b)));
        }

        #[test]
        fn during_both_axes_means_contained(a in arb_rect(), b in arb_rect()) {
            let r = ra_relation(&a, &b);
            if r.horizontal == IaRelation::During && r.vertical == IaRelation::During {
                prop_assert_eq!(a.intersection_area(&b), a.area());
            }
        }
    }
}
