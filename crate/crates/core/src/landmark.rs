//! Hand-landmark frames, the gesture alphabet, and the geometric
//! normalization that turns a raw 21-point observation into a pose feature
//! vector independent of hand position, size and handedness.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Points per frame in the standard hand topology.
pub const NUM_POINTS: usize = 21;
/// Flattened feature length (21 points x 3 axes).
pub const FEATURE_LEN: usize = NUM_POINTS * 3;
pub const WRIST: usize = 0;
pub const MIDDLE_MCP: usize = 9;
pub const FINGERTIPS: [usize; 5] = [4, 8, 12, 16, 20];
/// Bumped whenever `normalize` changes meaning; models record the version they were trained on.
pub const FEATURE_SPEC_VERSION: u32 = 1;
/// Minimum wrist to middle-MCP distance for a usable frame.
pub const DEGENERATE_EPS: f64 = 1e-9;

pub type Point<S> = [S; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hand {
    #[serde(alias = "Left", alias = "LEFT")]
    Left,
    #[serde(alias = "Right", alias = "RIGHT")]
    Right,
}

impl Hand {
    pub fn mirrored(self) -> Hand {
        match self {
            Hand::Left => Hand::Right,
            Hand::Right => Hand::Left,
        }
    }
}

/// Why a candidate frame was rejected.
#[derive(Debug, Clone, PartialEq)]
pub enum MalformedReason {
    Arity { found: usize },
    PointArity { point: usize, found: usize },
    NonFinite { point: usize, axis: usize },
    NonMonotoneSeq { previous: u64, got: u64 },
}

impl fmt::Display for MalformedReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MalformedReason::Arity { found } => {
                write!(f, "arity: expected {NUM_POINTS} points, found {found}")
            }
            MalformedReason::PointArity { point, found } => {
                write!(f, "arity: point {point} has {found} coordinates, expected 3")
            }
            MalformedReason::NonFinite { point, axis } => {
                write!(f, "non-finite coordinate at point {point} axis {axis}")
            }
            MalformedReason::NonMonotoneSeq { previous, got } => {
                write!(f, "non-monotone seq: {got} does not follow {previous}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FrameError {
    #[error("malformed frame: {0}")]
    Malformed(MalformedReason),
    #[error("degenerate hand: scale reference distance {distance:e} <= {DEGENERATE_EPS:e}")]
    DegenerateHand { distance: f64 },
}

/// One timestamped 21-point hand observation in sensor space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct LandmarkFrame<S> {
    pub seq: u64,
    pub ts_ms: u64,
    pub hand: Hand,
    pub pts: [Point<S>; NUM_POINTS],
}

impl<S: Scalar> LandmarkFrame<S> {
    pub fn new(seq: u64, ts_ms: u64, hand: Hand, pts: [Point<S>; NUM_POINTS]) -> Result<Self, FrameError> {
        let frame = LandmarkFrame { seq, ts_ms, hand, pts };
        frame.check_finite()?;
        Ok(frame)
    }

    pub fn check_finite(&self) -> Result<(), FrameError> {
        for (point, p) in self.pts.iter().enumerate() {
            for (axis, v) in p.iter().enumerate() {
                if !v.is_finite() {
                    return Err(FrameError::Malformed(MalformedReason::NonFinite { point, axis }));
                }
            }
        }
        Ok(())
    }

    /// Wrist to middle-finger MCP distance, the hand's scale reference.
    pub fn scale_reference(&self) -> S {
        distance(&self.pts[WRIST], &self.pts[MIDDLE_MCP])
    }

    /// Applies `f` to every point.
    pub fn map_points(&self, mut f: impl FnMut(Point<S>) -> Point<S>) -> Self {
        let mut out = self.clone();
        for p in out.pts.iter_mut() {
            *p = f(*p);
        }
        out
    }
}

pub(crate) fn distance<S: Scalar>(a: &Point<S>, b: &Point<S>) -> S {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Candidate frame as it arrives off the wire, before any shape checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct RawFrame<S> {
    pub seq: u64,
    pub ts_ms: u64,
    pub hand: Hand,
    pub pts: Vec<Vec<S>>,
}

/// Checks a candidate frame against the frame invariants. `previous_seq` is
/// the last accepted seq of the stream, if any.
pub fn validate_frame<S: Scalar>(raw: RawFrame<S>, previous_seq: Option<u64>) -> Result<LandmarkFrame<S>, FrameError> {
    let malformed = |r| Err(FrameError::Malformed(r));
    if raw.pts.len() != NUM_POINTS {
        return malformed(MalformedReason::Arity { found: raw.pts.len() });
    }
    if let Some(previous) = previous_seq {
        if raw.seq <= previous {
            return malformed(MalformedReason::NonMonotoneSeq { previous, got: raw.seq });
        }
    }
    let mut pts = [[S::zero(); 3]; NUM_POINTS];
    for (i, p) in raw.pts.iter().enumerate() {
        if p.len() != 3 {
            return malformed(MalformedReason::PointArity { point: i, found: p.len() });
        }
        pts[i] = [p[0], p[1], p[2]];
    }
    LandmarkFrame::new(raw.seq, raw.ts_ms, raw.hand, pts)
}

/// Stateful validator enforcing strictly increasing seq across a stream.
#[derive(Debug, Clone, Default)]
pub struct FrameValidator {
    last_seq: Option<u64>,
}

impl FrameValidator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn validate<S: Scalar>(&mut self, raw: RawFrame<S>) -> Result<LandmarkFrame<S>, FrameError> {
        let frame = validate_frame(raw, self.last_seq)?;
        self.last_seq = Some(frame.seq);
        Ok(frame)
    }

    pub fn last_seq(&self) -> Option<u64> {
        self.last_seq
    }

    pub fn reset(&mut self) {
        self.last_seq = None;
    }
}

/// Normalized, canonical-hand pose: 21 points flattened as x,y,z.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct FeatureVector<S> {
    values: Vec<S>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("dimension mismatch: expected {expected}, found {found}")]
pub struct DimensionMismatch {
    pub expected: usize,
    pub found: usize,
}

impl<S: Scalar> FeatureVector<S> {
    pub fn from_vec(values: Vec<S>) -> Result<Self, DimensionMismatch> {
        if values.len() != FEATURE_LEN {
            return Err(DimensionMismatch { expected: FEATURE_LEN, found: values.len() });
        }
        Ok(FeatureVector { values })
    }

    pub fn as_slice(&self) -> &[S] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<S> {
        self.values
    }

    pub fn point(&self, i: usize) -> Point<S> {
        [self.values[3 * i], self.values[3 * i + 1], self.values[3 * i + 2]]
    }

    /// Rebuilds a left-hand frame whose geometry is exactly this feature vector.
    pub fn to_left_frame(&self, seq: u64, ts_ms: u64) -> LandmarkFrame<S> {
        let mut pts = [[S::zero(); 3]; NUM_POINTS];
        for (i, p) in pts.iter_mut().enumerate() {
            *p = self.point(i);
        }
        LandmarkFrame { seq, ts_ms, hand: Hand::Left, pts }
    }
}

/// Translates the wrist to the origin, divides by the wrist to middle-MCP
/// distance, and mirrors right hands onto the left-hand frame.
pub fn normalize<S: Scalar>(frame: &LandmarkFrame<S>) -> Result<FeatureVector<S>, FrameError> {
    frame.check_finite()?;
    let scale = frame.scale_reference();
    if scale <= S::lit(DEGENERATE_EPS) {
        return Err(FrameError::DegenerateHand { distance: scale.as_f64() });
    }
    let wrist = frame.pts[WRIST];
    let mirror = if frame.hand == Hand::Right { -S::one() } else { S::one() };
    let mut values = Vec::with_capacity(FEATURE_LEN);
    for p in frame.pts.iter() {
        values.push(mirror * ((p[0] - wrist[0]) / scale));
        values.push((p[1] - wrist[1]) / scale);
        values.push((p[2] - wrist[2]) / scale);
    }
    Ok(FeatureVector { values })
}

/// The 26 letters plus the word-terminating Space gesture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GestureLabel {
    A, B, C, D, E, F, G, H, I, J, K, L, M,
    N, O, P, Q, R, S, T, U, V, W, X, Y, Z,
    Space,
}

impl GestureLabel {
    pub const COUNT: usize = 27;

    pub const ALL: [GestureLabel; 27] = {
        use GestureLabel::*;
        [A, B, C, D, E, F, G, H, I, J, K, L, M, N, O, P, Q, R, S, T, U, V, W, X, Y, Z, Space]
    };

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<GestureLabel> {
        Self::ALL.get(i).copied()
    }

    /// The letter, or `None` for Space.
    pub fn as_char(self) -> Option<char> {
        match self {
            GestureLabel::Space => None,
            l => Some((b'A' + l.index() as u8) as char),
        }
    }

    pub fn from_char(c: char) -> Option<GestureLabel> {
        if c.is_ascii_uppercase() {
            Self::from_index((c as u8 - b'A') as usize)
        } else {
            None
        }
    }

    pub fn as_str(self) -> &'static str {
        const NAMES: [&str; 27] = [
            "A", "B", "C", "D", "E", "F", "G", "H", "I", "J", "K", "L", "M", "N", "O", "P", "Q", "R",
            "S", "T", "U", "V", "W", "X", "Y", "Z", "SPACE",
        ];
        NAMES[self.index()]
    }
}

impl fmt::Display for GestureLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown gesture label {0:?}")]
pub struct UnknownLabel(pub String);

impl FromStr for GestureLabel {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("SPACE") {
            return Ok(GestureLabel::Space);
        }
        let mut chars = s.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => GestureLabel::from_char(c.to_ascii_uppercase()),
            _ => None,
        }
        .ok_or_else(|| UnknownLabel(s.to_string()))
    }
}

impl Serialize for GestureLabel {
    fn serialize<Ser: serde::Serializer>(&self, serializer: Ser) -> Result<Ser::Ok, Ser::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for GestureLabel {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_frame(hand: Hand) -> LandmarkFrame<f64> {
        let mut pts = [[0.0; 3]; NUM_POINTS];
        for (i, p) in pts.iter_mut().enumerate() {
            let t = i as f64;
            *p = [0.5 + 0.013 * t, 0.5 - 0.011 * t + 0.002 * (t * t).sin(), 0.001 * t];
        }
        pts[WRIST] = [0.5, 0.5, 0.0];
        pts[MIDDLE_MCP] = [0.5, 0.3, 0.0];
        LandmarkFrame::new(1, 0, hand, pts).unwrap()
    }

    #[test]
    fn wrist_anchor_and_unit_scale() {
        let f = normalize(&sample_frame(Hand::Left)).unwrap();
        assert_eq!(f.point(WRIST), [0.0, 0.0, 0.0]);
        let mcp = f.point(MIDDLE_MCP);
        let n = (mcp[0] * mcp[0] + mcp[1] * mcp[1] + mcp[2] * mcp[2]).sqrt();
        assert!((n - 1.0).abs() < 1e-12);
        assert_eq!(mcp, [0.0, -1.0, 0.0]);
    }

    #[test]
    fn translation_is_absorbed() {
        let f = sample_frame(Hand::Left);
        let g = f.map_points(|p| [p[0] + 3.7, p[1] - 1.2, p[2] + 0.4]);
        let a = normalize(&f).unwrap();
        let b = normalize(&g).unwrap();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn right_hand_mirrors_onto_left() {
        let left = sample_frame(Hand::Left);
        let mut right = left.map_points(|p| [-p[0], p[1], p[2]]);
        right.hand = Hand::Right;
        assert_eq!(normalize(&left).unwrap(), normalize(&right).unwrap());
    }

    #[test]
    fn degenerate_hand_rejected() {
        let mut f = sample_frame(Hand::Left);
        f.pts[MIDDLE_MCP] = f.pts[WRIST];
        assert!(matches!(normalize(&f), Err(FrameError::DegenerateHand { .. })));
    }

    #[test]
    fn non_finite_rejected_by_normalize() {
        let mut f = sample_frame(Hand::Left);
        f.pts[3][1] = f64::INFINITY;
        assert_eq!(
            normalize(&f),
            Err(FrameError::Malformed(MalformedReason::NonFinite { point: 3, axis: 1 }))
        );
    }

    #[test]
    fn works_for_f32() {
        let f = sample_frame(Hand::Right);
        let pts32 = f.pts.map(|p| p.map(|v| v as f32));
        let f32_frame = LandmarkFrame::new(1, 0, Hand::Right, pts32).unwrap();
        let a = normalize(&f32_frame).unwrap();
        let b = normalize(&f).unwrap();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((*x as f64 - y).abs() < 1e-4);
        }
    }

    fn raw(seq: u64, n: usize) -> RawFrame<f64> {
        RawFrame { seq, ts_ms: seq * 33, hand: Hand::Left, pts: (0..n).map(|i| vec![i as f64, 1.0, 0.0]).collect() }
    }

    #[test]
    fn validate_accepts_next_seq() {
        assert!(validate_frame(raw(5, 21), Some(4)).is_ok());
    }

    #[test]
    fn validate_rejects_wrong_arity() {
        assert_eq!(
            validate_frame(raw(5, 20), None),
            Err(FrameError::Malformed(MalformedReason::Arity { found: 20 }))
        );
        let mut r = raw(1, 21);
        r.pts[7].pop();
        assert!(matches!(
            validate_frame(r, None),
            Err(FrameError::Malformed(MalformedReason::PointArity { point: 7, found: 2 }))
        ));
    }

    #[test]
    fn validate_rejects_nan() {
        let mut r = raw(1, 21);
        r.pts[2][0] = f64::NAN;
        assert!(matches!(
            validate_frame(r, None),
            Err(FrameError::Malformed(MalformedReason::NonFinite { point: 2, axis: 0 }))
        ));
    }

    #[test]
    fn validator_tracks_seq() {
        let mut v = FrameValidator::new();
        v.validate(raw(4, 21)).unwrap();
        v.validate(raw(5, 21)).unwrap();
        let err = v.validate(raw(5, 21)).unwrap_err();
        assert_eq!(err, FrameError::Malformed(MalformedReason::NonMonotoneSeq { previous: 5, got: 5 }));
        assert_eq!(v.last_seq(), Some(5));
    }

    #[test]
    fn labels_round_trip() {
        assert_eq!(GestureLabel::ALL.len(), GestureLabel::COUNT);
        for (i, l) in GestureLabel::ALL.iter().enumerate() {
            assert_eq!(l.index(), i);
            assert_eq!(l.as_str().parse::<GestureLabel>().unwrap(), *l);
        }
        assert_eq!(GestureLabel::Space.as_char(), None);
        assert_eq!(GestureLabel::Z.as_char(), Some('Z'));
        assert!("AB".parse::<GestureLabel>().is_err());
    }
}
