//! Softmax, cross-entropy, Gumbel sampling and the temperature schedule.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits
        .iter()
        .map(|&l| (l - max).exp())
        .sum::<f64>()
        .ln();
    logits.iter().map(|&l| l - max - log_sum).collect()
}

/// Cross-entropy of one supervision: `-log softmax(logits)[target]`,
/// multiplied by `weights[target]` when class weights are supplied.
pub fn xent_loss(logits: &[f64], target: usize, weights: Option<&[f64]>) -> f64 {
    debug_assert!(target < logits.len());
    let w = weights.map(|w| w[target]).unwrap_or(1.0);
    -w * log_softmax(logits)[target]
}

/// Gradient of [`xent_loss`] with respect to the logits:
/// `w * (softmax(logits) - onehot(target))`.
pub fn xent_grad(logits: &[f64], target: usize, weights: Option<&[f64]>) -> Vec<f64> {
    let w = weights.map(|w| w[target]).unwrap_or(1.0);
    let mut grad = softmax(logits);
    grad[target] -= 1.0;
    for g in &mut grad {
        *g *= w;
    }
    grad
}

/// One Gumbel-softmax draw.
///
/// Adds independent Gumbel noise to the logits; the hard sample is the
/// argmax, whose distribution equals `softmax(logits)` exactly regardless
/// of `tau`, while the returned soft vector `softmax((logits + g) / tau)`
/// sharpens toward one-hot as `tau` shrinks.
pub fn gumbel_sample<R: Rng>(logits: &[f64], tau: f64, rng: &mut R) -> (usize, Vec<f64>) {
    assert!(tau > 0.0, "temperature must be positive");
    let perturbed: Vec<f64> = logits
        .iter()
        .map(|&l| {
            let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            l - (-u.ln()).ln()
        })
        .collect();
    let hard = perturbed
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite perturbed logits"))
        .map(|(i, _)| i)
        .expect("nonempty logits");
    let scaled: Vec<f64> = perturbed.iter().map(|&z| z / tau).collect();
    (hard, softmax(&scaled))
}

/// Linear temperature descent across training epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub tau_max: f64,
    pub tau_min: f64,
    pub total_epochs: usize,
}

impl AnnealSchedule {
    /// The standard path: 5.0 down to 1.0 over the run.
    pub fn linear(total_epochs: usize) -> Self {
        AnnealSchedule {
            tau_max: 5.0,
            tau_min: 1.0,
            total_epochs,
        }
    }
}

/// Temperature for `epoch`, clamped to `[tau_min, tau_max]` outside the
/// schedule.
pub fn anneal_tau(epoch: usize, schedule: &AnnealSchedule) -> f64 {
    debug_assert!(schedule.tau_max >= schedule.tau_min && schedule.tau_min > 0.0);
    if schedule.total_epochs <= 1 {
        return schedule.tau_min;
    }
    let span = schedule.tau_max - schedule.tau_min;
    let t = schedule.tau_max - span * epoch as f64 / (schedule.total_epochs - 1) as f64;
    t.clamp(schedule.tau_min, schedule.tau_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_logits_loss_is_ln_c() {
        for c in [2usize, 4, 6] {
            let logits = vec![0.7; c];
            let loss = xent_loss(&logits, 0, None);
            assert!((loss - (c as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn saturated_logit_loss_is_near_zero() {
        let mut logits = vec![0.0; 4];
        logits[2] = 50.0;
        assert!(xent_loss(&logits, 2, None) < 1e-9);
    }

    #[test]
    fn class_weight_scales_loss() {
        let logits = vec![0.3, -0.2, 1.0, 0.0];
        let weights = vec![1.0, 1.0, 1.0, 1.0 / 0.97];
        let unweighted = xent_loss(&logits, 3, None);
        let weighted = xent_loss(&logits, 3, Some(&weights));
        assert!((weighted - unweighted / 0.97).abs() < 1e-12);
    }

    #[test]
    fn softmax_sums_to_one() {
        let p = softmax(&[-3.0, 0.0, 2.5, 100.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn dominant_logit_always_wins() {
        let mut logits = vec![0.0; 5];
        logits[3] = 50.0;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut hits = 0;
        for _ in 0..10_000 {
            let (hard, soft) = gumbel_sample(&logits, 1.0, &mut rng);
            assert!((soft.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            if hard == 3 {
                hits += 1;
            }
        }
        assert!(hits as f64 / 10_000.0 > 0.999);
    }

    #[test]
    fn uniform_logits_sample_uniformly() {
        let logits = vec![0.0; 4];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut counts = [0usize; 4];
        let draws = 100_000;
        for _ in 0..draws {
            let (hard, _) = gumbel_sample(&logits, 2.0, &mut rng);
            counts[hard] += 1;
        }
        for &c in &counts {
            let freq = c as f64 / draws as f64;
            assert!((freq - 0.25).abs() < 0.01, "freq {freq}");
        }
    }

    #[test]
    fn low_tau_sharpens_soft_vector() {
        let mean_max = |logits: &[f64], tau: f64, seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let draws = 5_000;
            (0..draws)
                .map(|_| {
                    let (_, soft) = gumbel_sample(logits, tau, &mut rng);
                    soft.iter().cloned().fold(0.0, f64::max)
                })
                .sum::<f64>()
                / draws as f64
        };
        assert!(mean_max(&[4.0, 0.0, -2.0], 0.1, 3) > 0.99);
        // Sharpening is monotone in tau even with close logits.
        let close = [0.4, -0.3, 0.1];
        assert!(mean_max(&close, 0.1, 4) > mean_max(&close, 1.0, 4));
    }

    #[test]
    fn hard_sample_distribution_is_tau_independent() {
        let logits = vec![1.0, 0.0, -1.0];
        let expected = softmax(&logits);
        for tau in [0.5, 5.0] {
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            let mut counts = [0usize; 3];
            let draws = 200_000;
            for _ in 0..draws {
                counts[gumbel_sample(&logits, tau, &mut rng).0] += 1;
            }
            for (c, e) in counts.iter().zip(&expected) {
                assert!((*c as f64 / draws as f64 - e).abs() < 0.01);
            }
        }
    }

    #[test]
    fn anneal_endpoints_and_midpoint() {
        let s = AnnealSchedule::linear(101);
        assert_eq!(anneal_tau(0, &s), 5.0);
        assert_eq!(anneal_tau(100, &s), 1.0);
        assert!((anneal_tau(50, &s) - 3.0).abs() < 1e-12);
        // Out of range clamps.
        assert_eq!(anneal_tau(500, &s), 1.0);
        // Degenerate one-epoch schedule lands on tau_min.
        assert_eq!(anneal_tau(0, &AnnealSchedule::linear(1)), 1.0);
    }
}
