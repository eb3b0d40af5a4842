//! Numerically stable softmax and sigmoid cross-entropy primitives shared by
//! the pretraining and fine-tuning objectives.

use ndarray::{Array1, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// `log Σ exp(x)`, shifted by the row maximum.
pub fn log_sum_exp(row: ArrayView1<f64>) -> f64 {
    let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + row.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

pub fn softmax(row: ArrayView1<f64>) -> Array1<f64> {
    let lse = log_sum_exp(row);
    row.mapv(|x| (x - lse).exp())
}

/// `-log softmax(row)[target]`.
pub fn softmax_xent(row: ArrayView1<f64>, target: usize) -> f64 {
    log_sum_exp(row) - row[target]
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of `sigmoid(x)` against `t`, written as
/// `max(x, 0) - x·t + ln(1 + e^-|x|)` so it never overflows.
pub fn bce_with_logits(x: f64, t: f64) -> f64 {
    x.max(0.0) - x * t + (-x.abs()).exp().ln_1p()
}

pub(crate) fn check_finite(what: &str, a: ArrayView2<f64>) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} contains non-finite values")))
    }
}

/// Mean softmax cross-entropy of each row against its class index, with
/// the per-row gradient `softmax - onehot` scaled by `1 / rows`.
pub(crate) fn mean_softmax_xent(
    what: &str,
    logits: ArrayView2<f64>,
    targets: &[usize],
) -> Result<f64> {
    check_rows(what, logits, targets)?;
    if targets.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = logits
        .rows()
        .into_iter()
        .zip(targets)
        .map(|(row, &t)| softmax_xent(row, t))
        .sum();
    Ok(total / targets.len() as f64)
}

pub(crate) fn mean_softmax_xent_grad(
    what: &str,
    logits: ArrayView2<f64>,
    targets: &[usize],
) -> Result<ndarray::Array2<f64>> {
    check_rows(what, logits, targets)?;
    let mut grad = logits.to_owned();
    let scale = 1.0 / targets.len().max(1) as f64;
    for (mut row, &t) in grad.rows_mut().into_iter().zip(targets) {
        let p = softmax(row.view());
        row.assign(&p);
        row[t] -= 1.0;
        row *= scale;
    }
    Ok(grad)
}

fn check_rows(what: &str, logits: ArrayView2<f64>, targets: &[usize]) -> Result<()> {
    if logits.nrows() != targets.len() {
        return Err(Error::invalid(format!(
            "{what}: {} logit rows for {} targets",
            logits.nrows(),
            targets.len()
        )));
    }
    if let Some(&t) = targets.iter().find(|&&t| t >= logits.ncols()) {
        return Err(Error::invalid(format!(
            "{what}: target class {t} outside 0..{}",
            logits.ncols()
        )));
    }
    check_finite(what, logits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn log_sum_exp_is_shift_stable() {
        let a = array![1000.0, 1000.0];
        assert!((log_sum_exp(a.view()) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        let b = array![-1000.0, -1000.0, -1000.0];
        assert!((log_sum_exp(b.view()) - (-1000.0 + 3f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn bce_matches_direct_form_in_safe_range() {
        for &x in &[-5.0f64, -0.3, 0.0, 0.7, 4.0] {
            for &t in &[0.0, 1.0] {
                let p: f64 = 1.0 / (1.0 + (-x).exp());
                let direct = -(t * p.ln() + (1.0 - t) * (1.0 - p).ln());
                assert!((bce_with_logits(x, t) - direct).abs() < 1e-12);
            }
        }
        assert!(bce_with_logits(1e4, 1.0) < 1e-12);
        assert!(bce_with_logits(-1e4, 0.0) < 1e-12);
        assert!((sigmoid(-1e4)).abs() < 1e-300);
    }
}
