//! The Monte Carlo Shapley loop shared by the causal and marginal estimators.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use super::sampler::CoalitionSampler;
use super::SamplerConfig;
use crate::error::Result;
use crate::model::Predictor;
use crate::rng::task_rng;

const SUBSET_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;

/// `|S|! (n-|S|-1)! / n!` for every coalition size `0..n`.
pub fn shapley_kernel(n: usize) -> Vec<f64> {
    (0..n)
        .map(|s| {
            // 1 / (n * C(n-1, s)), with the binomial built multiplicatively in log space.
            let log_binom: f64 = (1..=s).map(|k| ((n - 1 - s + k) as f64).ln() - (k as f64).ln()).sum();
            (-(n as f64).ln() - log_binom).exp()
        })
        .collect()
}

pub(crate) struct LoopOutput {
    pub raw: Vec<f64>,
    pub variance: Vec<f64>,
    pub tasks: usize,
    pub exhaustive: bool,
}

struct TaskOutput {
    contribution: Vec<f64>,
    variance: Vec<f64>,
}

pub(crate) fn coalition_for_task(n: usize, exhaustive: bool, seed: u64, instance: u64, t: u64) -> Vec<bool> {
    if exhaustive {
        (0..n).map(|k| t >> k & 1 == 1).collect()
    } else {
        let mut rng = task_rng(seed, &[instance, t, SUBSET_STREAM]);
        (0..n).map(|_| rng.random_bool(0.5)).collect()
    }
}

/// Accumulates `scale · w(S) · feature_weight_i · [v(S ∪ {i}) − v(S)]` over the
/// configured coalitions. Within a task one noise table serves every coalition.
pub(crate) fn shapley_loop<S: CoalitionSampler>(
    model: &dyn Predictor,
    x: &[f64],
    sampler: &S,
    feature_weights: &[f64],
    config: &SamplerConfig,
    instance: u64,
    unbiased_scale: bool,
) -> Result<LoopOutput> {
    let n = sampler.n_features();
    let exhaustive = n <= config.exhaustive_max_features;
    let tasks = if exhaustive { 1usize << n } else { config.mc_iterations };
    let kernel = shapley_kernel(n);
    let scale = if exhaustive || !unbiased_scale {
        1.0
    } else {
        (n as f64 * std::f64::consts::LN_2 - (tasks as f64).ln()).exp()
    };
    let m = config.mc_samples;
    let outputs: Vec<TaskOutput> = (0..tasks as u64)
        .into_par_iter()
        .map(|t| {
            let coalition = coalition_for_task(n, exhaustive, config.seed, instance, t);
            let active: Vec<usize> = (0..n)
                .filter(|&i| !coalition[i] && feature_weights[i] != 0.0)
                .collect();
            let mut contribution = vec![0.0; n];
            let mut variance = vec![0.0; n];
            if active.is_empty() {
                return Ok(TaskOutput { contribution, variance });
            }
            let noise = sampler.draw_noise(m, &mut task_rng(config.seed, &[instance, t, NOISE_STREAM]));
            let mut buf = Vec::with_capacity((active.len() + 1) * m * n);
            sampler.fill(x, &coalition, &noise, &mut buf);
            let mut with_i = coalition.clone();
            for &i in &active {
                with_i[i] = true;
                sampler.fill(x, &with_i, &noise, &mut buf);
                with_i[i] = false;
            }
            let preds = model.predict_batch(&DMatrix::from_row_slice((active.len() + 1) * m, n, &buf))?;
            let base = &preds[..m];
            let w = kernel[coalition.iter().filter(|&&b| b).count()] * scale;
            for (a, &i) in active.iter().enumerate() {
                let block = &preds[(a + 1) * m..(a + 2) * m];
                let diffs: Vec<f64> = block.iter().zip(base).map(|(p, q)| p - q).collect();
                let mean = diffs.iter().sum::<f64>() / m as f64;
                let var = if m > 1 {
                    diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (m - 1) as f64
                } else {
                    0.0
                };
                let wi = w * feature_weights[i];
                contribution[i] = wi * mean;
                variance[i] = wi * wi * var / m as f64;
            }
            Ok(TaskOutput { contribution, variance })
        })
        .collect::<Result<_>>()?;
    let mut raw = vec![0.0; n];
    let mut var = vec![0.0; n];
    for o in &outputs {
        for i in 0..n {
            raw[i] += o.contribution[i];
            var[i] += o.variance[i];
        }
    }
    Ok(LoopOutput {
        raw,
        variance: var,
        tasks,
        exhaustive,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_weights() {
        let w = shapley_kernel(3);
        assert!((w[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((w[1] - 1.0 / 6.0).abs() < 1e-15);
        assert!((w[2] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(shapley_kernel(1), vec![1.0]);
        // Weights over all subsets not containing i sum to 1.
        for n in 1..15usize {
            let w = shapley_kernel(n);
            let mut total = 0.0;
            let mut binom = 1.0;
            for (s, ws) in w.iter().enumerate() {
                total += binom * ws;
                binom = binom * (n - 1 - s) as f64 / (s + 1) as f64;
            }
            assert!((total - 1.0).abs() < 1e-12, "n={n}: {total}");
        }
    }

    #[test]
    fn exhaustive_coalitions_enumerate_bits() {
        assert_eq!(coalition_for_task(3, true, 0, 0, 5), vec![true, false, true]);
        let a = coalition_for_task(10, false, 4, 2, 7);
        assert_eq!(a, coalition_for_task(10, false, 4, 2, 7));
    }
}
