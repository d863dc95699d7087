//! Seeded percentile-bootstrap confidence intervals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A mean with its 95% bootstrap interval.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MeanCi {
    pub mean: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub n: usize,
}

pub fn mean(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

/// Percentile bootstrap of the sample mean at 95% confidence, seeded for
/// reproducibility. Bounds are widened to bracket the sample mean, which
/// is otherwise only almost-surely true.
pub fn bootstrap_mean_ci(samples: &[f64], bootstrap_samples: usize, seed: u64) -> Option<MeanCi> {
    if samples.is_empty() || bootstrap_samples == 0 {
        return None;
    }
    let sample_mean = mean(samples);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means = Vec::with_capacity(bootstrap_samples);
    for _ in 0..bootstrap_samples {
        let mut total = 0.0;
        for _ in 0..samples.len() {
            total += samples[rng.gen_range(0..samples.len())];
        }
        means.push(total / samples.len() as f64);
    }
    means.sort_by(f64::total_cmp);
    let lower = percentile(&means, 0.025);
    let upper = percentile(&means, 0.975);
    Some(MeanCi {
        mean: sample_mean,
        ci_lower: lower.min(sample_mean),
        ci_upper: upper.max(sample_mean),
        n: samples.len(),
    })
}

/// Linear-interpolated percentile of a sorted slice.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let position = q * (sorted.len() - 1) as f64;
    let low = position.floor() as usize;
    let high = position.ceil() as usize;
    if low == high {
        sorted[low]
    } else {
        let weight = position - low as f64;
        sorted[low] * (1.0 - weight) + sorted[high] * weight
    }
}
