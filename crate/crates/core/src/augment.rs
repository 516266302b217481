//! Training-time landmark augmentation: in-plane rotation, isotropic scaling
//! and mirroring about the wrist, plus Gaussian keypoint jitter standing in
//! for photometric perturbation of the upstream tracker.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::landmark::{FrameError, GestureLabel, LandmarkFrame, DEGENERATE_EPS, WRIST};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    /// Rotation range in degrees, applied in the image (x-y) plane.
    pub rot_deg_range: [f64; 2],
    pub scale_range: [f64; 2],
    pub flip_prob: f64,
    /// Jitter standard deviation in hand-scale units.
    pub jitter_sigma: f64,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            rot_deg_range: [-25.0, 25.0],
            scale_range: [0.7, 1.3],
            flip_prob: 0.5,
            jitter_sigma: 0.02,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AugmentError {
    #[error("invalid augment config: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Frame(#[from] FrameError),
}

impl AugmentConfig {
    /// No-op configuration: every transform disabled.
    pub fn identity() -> Self {
        AugmentConfig { rot_deg_range: [0.0, 0.0], scale_range: [1.0, 1.0], flip_prob: 0.0, jitter_sigma: 0.0, seed: 0 }
    }

    pub fn validate(&self) -> Result<(), AugmentError> {
        let interval_ok = |r: [f64; 2]| r[0].is_finite() && r[1].is_finite() && r[0] <= r[1];
        if !interval_ok(self.rot_deg_range) {
            return Err(AugmentError::InvalidConfig("rot_deg_range must be a finite non-empty interval"));
        }
        if !interval_ok(self.scale_range) || self.scale_range[0] <= 0.0 {
            return Err(AugmentError::InvalidConfig("scale_range must be a finite positive interval"));
        }
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return Err(AugmentError::InvalidConfig("flip_prob must lie in [0, 1]"));
        }
        if !(self.jitter_sigma >= 0.0 && self.jitter_sigma.is_finite()) {
            return Err(AugmentError::InvalidConfig("jitter_sigma must be finite and >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct LabeledFrame<S> {
    #[serde(flatten)]
    pub frame: LandmarkFrame<S>,
    pub label: GestureLabel,
}

fn sample_range<R: Rng + ?Sized>(rng: &mut R, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..=r[1])
    }
}

/// Rotates by `theta` radians about the wrist in the x-y plane.
pub fn rotate_about_wrist<S: Scalar>(frame: &LandmarkFrame<S>, theta: f64) -> LandmarkFrame<S> {
    let (sin, cos) = theta.sin_cos();
    let (sin, cos) = (S::lit(sin), S::lit(cos));
    let w = frame.pts[WRIST];
    frame.map_points(|p| {
        let dx = p[0] - w[0];
        let dy = p[1] - w[1];
        [w[0] + cos * dx - sin * dy, w[1] + sin * dx + cos * dy, p[2]]
    })
}

pub fn scale_about_wrist<S: Scalar>(frame: &LandmarkFrame<S>, s: f64) -> LandmarkFrame<S> {
    let s = S::lit(s);
    let w = frame.pts[WRIST];
    frame.map_points(|p| [w[0] + s * (p[0] - w[0]), w[1] + s * (p[1] - w[1]), w[2] + s * (p[2] - w[2])])
}

/// Mirrors x about the wrist and toggles the hand label.
pub fn flip_about_wrist<S: Scalar>(frame: &LandmarkFrame<S>) -> LandmarkFrame<S> {
    let w = frame.pts[WRIST];
    let mut out = frame.map_points(|p| [w[0] + w[0] - p[0], p[1], p[2]]);
    out.hand = frame.hand.mirrored();
    out
}

/// Applies rotate, scale, flip, jitter in that order. Deterministic in `rng`.
pub fn augment_frame<S: Scalar, R: Rng + ?Sized>(
    frame: &LandmarkFrame<S>,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Result<LandmarkFrame<S>, AugmentError> {
    cfg.validate()?;
    frame.check_finite()?;
    let reference = frame.scale_reference();
    if reference <= S::lit(DEGENERATE_EPS) {
        return Err(FrameError::DegenerateHand { distance: reference.as_f64() }.into());
    }

    let theta = sample_range(rng, cfg.rot_deg_range).to_radians();
    let s = sample_range(rng, cfg.scale_range);
    let flip = cfg.flip_prob > 0.0 && rng.random_bool(cfg.flip_prob);

    let mut out = frame.clone();
    if theta != 0.0 {
        out = rotate_about_wrist(&out, theta);
    }
    if s != 1.0 {
        out = scale_about_wrist(&out, s);
    }
    if flip {
        out = flip_about_wrist(&out);
    }
    if cfg.jitter_sigma > 0.0 {
        let sd = cfg.jitter_sigma * out.scale_reference().as_f64();
        let noise = Normal::new(0.0, sd).map_err(|_| AugmentError::InvalidConfig("jitter_sigma"))?;
        for p in out.pts.iter_mut() {
            for v in p.iter_mut() {
                *v = *v + S::lit(noise.sample(rng));
            }
        }
    }
    Ok(out)
}

/// splitmix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent RNG for copy `copy` of sample `sample`, so expansion does not
/// depend on iteration order.
pub fn sample_rng(seed: u64, sample: u64, copy: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix64(mix64(mix64(seed) ^ sample) ^ copy))
}

/// Returns each original followed by `copies_per_sample` augmented variants.
pub fn expand_dataset<S: Scalar>(
    data: &[LabeledFrame<S>],
    copies_per_sample: usize,
    cfg: &AugmentConfig,
) -> Result<Vec<LabeledFrame<S>>, AugmentError> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(data.len() * (1 + copies_per_sample));
    for (i, sample) in data.iter().enumerate() {
        out.push(sample.clone());
        for c in 0..copies_per_sample {
            let mut rng = sample_rng(cfg.seed, i as u64, c as u64);
            let frame = augment_frame(&sample.frame, cfg, &mut rng)?;
            out.push(LabeledFrame { frame, label: sample.label });
        }
    }
    Ok(out)
}
