//! Word error rate, prediction flip rate and latency percentiles.

use crate::lexicon::edit_distance;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("reference is empty")]
    EmptyReference,
    #[error("need at least 2 events, got {0}")]
    TooFewEvents(usize),
}

/// Word-level edit distance divided by the reference length. May exceed 1.
pub fn wer<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> Result<f64, MetricError> {
    if reference.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    Ok(edit_distance(reference, hypothesis) as f64 / reference.len() as f64)
}

/// Fraction of adjacent pairs whose labels differ.
pub fn flip_rate<T: PartialEq>(labels: &[T]) -> Result<f64, MetricError> {
    if labels.len() < 2 {
        return Err(MetricError::TooFewEvents(labels.len()));
    }
    Ok(flips(labels) as f64 / (labels.len() - 1) as f64)
}

pub fn flips<T: PartialEq>(labels: &[T]) -> usize {
    labels.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Nearest-rank percentile of unsorted samples; `None` when empty.
pub fn percentile(samples: &[f64], p: f64) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}
