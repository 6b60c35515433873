use crate::error::{domain, Result};

pub fn mse_loss(predictions: &[f64], labels: &[f64]) -> Result<f64> {
    if predictions.is_empty() || predictions.len() != labels.len() {
        return domain(format!("mse needs equal non-empty lists, got {} and {}", predictions.len(), labels.len()));
    }
    let sum: f64 = predictions.iter().zip(labels).map(|(p, y)| (p - y) * (p - y)).sum();
    Ok(sum / predictions.len() as f64)
}

/// Numerically stable softmax.
pub fn softmax(v: &[f64]) -> Vec<f64> {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

fn log_softmax(v: &[f64]) -> Vec<f64> {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
    v.iter().map(|x| x - lse).collect()
}

fn check_list(scores: &[f64], targets: &[f64], temperature: f64) -> Result<()> {
    if scores.len() < 2 || scores.len() != targets.len() {
        return domain(format!("ranking lists need k >= 2 matching entries, got {} and {}", scores.len(), targets.len()));
    }
    if !(temperature.is_finite() && temperature > 0.0) {
        return domain(format!("temperature must be positive, got {temperature}"));
    }
    if scores.iter().chain(targets).any(|v| !v.is_finite()) {
        return domain("ranking inputs must be finite");
    }
    Ok(())
}

fn target_distribution(targets: &[f64], temperature: f64) -> Vec<f64> {
    softmax(&targets.iter().map(|t| t / temperature).collect::<Vec<_>>())
}

/// ListNet top-one loss `−Σ p_i ln q_i` with `p = softmax(targets/τ)`, `q = softmax(scores)`.
pub fn listnet_topone_loss(scores: &[f64], targets: &[f64], temperature: f64) -> Result<f64> {
    check_list(scores, targets, temperature)?;
    let p = target_distribution(targets, temperature);
    let log_q = log_softmax(scores);
    Ok(-p.iter().zip(&log_q).map(|(pi, lq)| pi * lq).sum::<f64>())
}

/// Loss and `∂loss/∂scores = q − p`.
pub fn listnet_topone_grad(scores: &[f64], targets: &[f64], temperature: f64) -> Result<(f64, Vec<f64>)> {
    let loss = listnet_topone_loss(scores, targets, temperature)?;
    let p = target_distribution(targets, temperature);
    let q = softmax(scores);
    Ok((loss, q.iter().zip(&p).map(|(qi, pi)| qi - pi).collect()))
}

/// `mse + λ · mean(rank)`; an absent component contributes 0.
pub fn combine_losses(mse: Option<f64>, rank_losses: &[f64], lambda_rank: f64) -> Result<f64> {
    if mse.is_none() && rank_losses.is_empty() {
        return domain("both the real batch and the list batch are empty");
    }
    let rank = if rank_losses.is_empty() {
        0.0
    } else {
        rank_losses.iter().sum::<f64>() / rank_losses.len() as f64
    };
    Ok(mse.unwrap_or(0.0) + lambda_rank * rank)
}
