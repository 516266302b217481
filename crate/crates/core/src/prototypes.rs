//! Procedural handshape prototypes, one per gesture label, produced by a
//! fixed forward-kinematic hand model. Stands in for a recorded gesture set.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::augment::{augment_frame, sample_rng, AugmentConfig, LabeledFrame};
use crate::landmark::{GestureLabel, Hand, LandmarkFrame, Point, RawFrame, NUM_POINTS};
use crate::replay::ScriptFrame;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Curl {
    Extended,
    Half,
    Closed,
}

impl Curl {
    /// Flexion at the (MCP, PIP, DIP) joints in degrees.
    fn flexion(self) -> [f64; 3] {
        match self {
            Curl::Extended => [0.0, 0.0, 0.0],
            Curl::Half => [40.0, 50.0, 30.0],
            Curl::Closed => [80.0, 100.0, 70.0],
        }
    }
}

/// Per-letter handshape: curl of thumb, index, middle, ring, pinky, and
/// whether the thumb is abducted away from the palm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HandShape {
    pub curls: [Curl; 5],
    pub thumb_abducted: bool,
}

const fn shape(curls: [Curl; 5], thumb_abducted: bool) -> HandShape {
    HandShape { curls, thumb_abducted }
}

/// Templates indexed like `GestureLabel::ALL`.
pub const TEMPLATES: [HandShape; 27] = {
    use Curl::{Closed as C, Extended as E, Half as H};
    [
        shape([E, C, C, C, C], false), // A
        shape([C, E, E, E, E], false), // B
        shape([H, H, H, H, H], true),  // C
        shape([H, E, C, C, C], false), // D
        shape([C, C, C, C, C], false), // E
        shape([H, C, E, E, E], false), // F
        shape([E, H, C, C, C], true),  // G
        shape([E, E, E, C, C], false), // H
        shape([C, C, C, C, E], false), // I
        shape([E, C, C, C, E], false), // J
        shape([E, E, H, C, C], false), // K
        shape([E, E, C, C, C], true),  // L
        shape([C, H, H, H, C], false), // M
        shape([C, H, H, C, C], false), // N
        shape([H, H, H, H, H], false), // O
        shape([E, E, H, C, C], true),  // P
        shape([E, H, C, C, C], false), // Q
        shape([H, E, E, C, C], false), // R
        shape([H, C, C, C, C], false), // S
        shape([H, H, C, C, C], false), // T
        shape([C, E, E, C, C], false), // U
        shape([C, E, E, C, C], true),  // V
        shape([C, E, E, E, C], false), // W
        shape([C, H, C, C, C], false), // X
        shape([E, C, C, C, E], true),  // Y
        shape([C, E, C, C, C], false), // Z
        shape([E, E, E, E, E], true),  // SPACE
    ]
};

struct FingerGeometry {
    base: [f64; 2],
    /// Splay from the palm's vertical axis, degrees (positive towards the pinky side).
    splay_deg: f64,
    segments: [f64; 3],
}

const FINGERS: [FingerGeometry; 4] = [
    FingerGeometry { base: [-0.33, 0.93], splay_deg: -8.0, segments: [0.45, 0.27, 0.20] },
    FingerGeometry { base: [0.0, 1.0], splay_deg: 0.0, segments: [0.50, 0.30, 0.22] },
    FingerGeometry { base: [0.30, 0.93], splay_deg: 8.0, segments: [0.46, 0.28, 0.20] },
    FingerGeometry { base: [0.55, 0.82], splay_deg: 16.0, segments: [0.36, 0.22, 0.18] },
];

const THUMB_CMC: [f64; 3] = [-0.30, 0.25, 0.0];
const THUMB_SEGMENTS: [f64; 3] = [0.40, 0.32, 0.27];

fn add(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [a[0] + t * b[0], a[1] + t * b[1], a[2] + t * b[2]]
}

/// Walks a three-segment chain from `start`, bending progressively from
/// `axis` towards `bend` (both unit vectors, orthogonal).
fn chain(start: [f64; 3], axis: [f64; 3], bend: [f64; 3], segments: [f64; 3], flexion: [f64; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    let mut p = start;
    let mut angle = 0.0f64;
    for k in 0..3 {
        angle += flexion[k].to_radians();
        let dir = [
            axis[0] * angle.cos() + bend[0] * angle.sin(),
            axis[1] * angle.cos() + bend[1] * angle.sin(),
            axis[2] * angle.cos() + bend[2] * angle.sin(),
        ];
        p = add(p, dir, segments[k]);
        out[k] = p;
    }
    out
}

/// Hand-local geometry (wrist at origin, middle MCP at unit distance,
/// fingers along +v, palm normal along +w).
pub fn hand_geometry(shape: &HandShape) -> [[f64; 3]; NUM_POINTS] {
    let mut pts = [[0.0; 3]; NUM_POINTS];
    // Palm faces the camera; fingers flex towards it.
    let palm_normal = [0.0, 0.0, 1.0];

    let thumb_angle = if shape.thumb_abducted { -60.0f64 } else { -20.0f64 }.to_radians();
    let thumb_axis = [thumb_angle.sin(), thumb_angle.cos(), 0.0];
    // Thumb flexion sweeps across the palm.
    let across = [0.5f64.sqrt(), 0.0, 0.5f64.sqrt()];
    pts[1] = THUMB_CMC;
    let thumb = chain(THUMB_CMC, thumb_axis, across, THUMB_SEGMENTS, shape.curls[0].flexion());
    pts[2..5].copy_from_slice(&thumb);

    for (f, geom) in FINGERS.iter().enumerate() {
        let splay = geom.splay_deg.to_radians();
        let axis = [splay.sin(), splay.cos(), 0.0];
        let base = [geom.base[0], geom.base[1], 0.0];
        let first = 5 + 4 * f;
        pts[first] = base;
        let joints = chain(base, axis, palm_normal, geom.segments, shape.curls[f + 1].flexion());
        pts[first + 1..first + 4].copy_from_slice(&joints);
    }
    pts
}

/// One prototype frame per label, in `GestureLabel::ALL` order. The seed only
/// varies image placement, size and handedness, none of which survive
/// normalization.
pub fn synth_prototypes<S: Scalar>(seed: u64) -> Vec<LabeledFrame<S>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    GestureLabel::ALL
        .iter()
        .zip(TEMPLATES.iter())
        .enumerate()
        .map(|(i, (label, shape))| {
            let center = [rng.random_range(0.35..0.65), rng.random_range(0.55..0.8)];
            let size = rng.random_range(0.12..0.22);
            let hand = if rng.random_bool(0.5) { Hand::Left } else { Hand::Right };
            let mirror = if hand == Hand::Right { -1.0 } else { 1.0 };
            let local = hand_geometry(shape);
            let mut pts: [Point<S>; NUM_POINTS] = [[S::zero(); 3]; NUM_POINTS];
            for (p, l) in pts.iter_mut().zip(local.iter()) {
                // Image y grows downward, so the fingers point towards smaller y.
                *p = [S::lit(center[0] + mirror * size * l[0]), S::lit(center[1] - size * l[1]), S::lit(size * l[2])];
            }
            let frame = LandmarkFrame { seq: i as u64, ts_ms: 0, hand, pts };
            LabeledFrame { frame, label: *label }
        })
        .collect()
}

/// Frames spelling `sequence`, `frames_per_label` jittered copies of each
/// prototype at 30 fps, each tagged with the label it shows.
pub fn spell_stream<S: Scalar>(
    sequence: &[GestureLabel],
    frames_per_label: usize,
    jitter_sigma: f64,
    seed: u64,
) -> Vec<ScriptFrame<S>> {
    let protos = synth_prototypes::<S>(seed);
    let cfg = AugmentConfig { jitter_sigma, seed, ..AugmentConfig::identity() };
    let mut out = Vec::with_capacity(sequence.len() * frames_per_label);
    for (pos, label) in sequence.iter().enumerate() {
        let proto = &protos[label.index()].frame;
        for k in 0..frames_per_label {
            let seq = out.len() as u64;
            let mut rng = sample_rng(seed, pos as u64, k as u64);
            let frame = augment_frame(proto, &cfg, &mut rng).expect("prototypes are non-degenerate");
            let raw = RawFrame {
                seq,
                ts_ms: seq * 33,
                hand: frame.hand,
                pts: frame.pts.iter().map(|p| p.to_vec()).collect(),
            };
            out.push(ScriptFrame { raw, label: Some(*label) });
        }
    }
    out
}
