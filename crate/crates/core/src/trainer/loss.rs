use crate::{Error, Result};

/// Row-wise softmax.
pub fn softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn check(scores: &[Vec<f64>], gold: &[usize]) -> Result<()> {
    if scores.len() != gold.len() {
        return Err(Error::InvalidArgument(format!(
            "{} score rows for {} gold labels",
            scores.len(),
            gold.len()
        )));
    }
    for (i, (row, &g)) in scores.iter().zip(gold).enumerate() {
        if g >= row.len() {
            return Err(Error::GoldMissing(format!("row {i}, column {g}")));
        }
    }
    Ok(())
}

/// Mean cross-entropy of each row's softmax against its gold column.
pub fn nce_loss(scores: &[Vec<f64>], gold: &[usize]) -> Result<f64> {
    check(scores, gold)?;
    if scores.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = scores
        .iter()
        .zip(gold)
        .map(|(row, &g)| log_sum_exp(row) - row[g])
        .sum();
    Ok(total / scores.len() as f64)
}

/// [`nce_loss`] together with its gradient with respect to every score.
pub fn nce_loss_grad(scores: &[Vec<f64>], gold: &[usize]) -> Result<(f64, Vec<Vec<f64>>)> {
    let loss = nce_loss(scores, gold)?;
    let n = scores.len().max(1) as f64;
    let grads = scores
        .iter()
        .zip(gold)
        .map(|(row, &g)| {
            let mut p = softmax(row);
            p[g] -= 1.0;
            p.iter_mut().for_each(|x| *x /= n);
            p
        })
        .collect();
    Ok((loss, grads))
}
