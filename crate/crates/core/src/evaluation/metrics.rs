use crate::error::{Error, Result};

const CLAMP: f64 = 1e-7;

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Evaluation(format!("length mismatch: {a} vs {b}")));
    }
    if a == 0 {
        return Err(Error::Evaluation("empty input".into()));
    }
    Ok(())
}

fn check_binary(labels: &[f64]) -> Result<()> {
    if let Some(v) = labels.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::Evaluation(format!("label {v} is not binary")));
    }
    Ok(())
}

/// Probability that a random positive outscores a random negative, ties counting one half.
pub fn auroc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    check_lengths(scores.len(), labels.len())?;
    check_binary(labels)?;
    let positives = labels.iter().filter(|&&l| l == 1.0).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Evaluation("AUROC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Midranks of tied groups.
    let mut rank_sum_pos = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let midrank = (start + end + 1) as f64 / 2.0;
        rank_sum_pos += midrank * order[start..end].iter().filter(|&&i| labels[i] == 1.0).count() as f64;
        start = end;
    }
    let p = positives as f64;
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * negatives as f64))
}

fn check_probabilities(p: &[f64]) -> Result<()> {
    if let Some(v) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Evaluation(format!("probability {v} outside [0, 1]")));
    }
    Ok(())
}

/// Mean negative log-likelihood (natural log) with probabilities clamped to `[1e-7, 1 − 1e-7]`.
pub fn cross_entropy(probabilities: &[f64], labels: &[f64]) -> Result<f64> {
    check_lengths(probabilities.len(), labels.len())?;
    check_probabilities(probabilities)?;
    let total: f64 = probabilities
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(CLAMP, 1.0 - CLAMP);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    Ok(total / labels.len() as f64)
}

pub fn brier(probabilities: &[f64], labels: &[f64]) -> Result<f64> {
    check_lengths(probabilities.len(), labels.len())?;
    check_probabilities(probabilities)?;
    Ok(probabilities.iter().zip(labels).map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / labels.len() as f64)
}

pub fn rmse(a: &[f64], b: &[f64]) -> Result<f64> {
    check_lengths(a.len(), b.len())?;
    Ok((a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64).sqrt())
}
