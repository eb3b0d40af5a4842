//! MMLM, MCM and TT losses and their analytic gradients, as pure functions
//! of supplied model outputs. Every loss is a per-example mean: over masked
//! positions for MMLM and MCM, over tokens for TT.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::doctok::{TokenTags, NUM_TAG_CLASSES};
use crate::error::{Error, Result};
use crate::loss::{bce_with_logits, check_finite, mean_softmax_xent, mean_softmax_xent_grad, sigmoid};

/// Weights of the crop and tagging terms relative to MMLM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { alpha: 1.0, beta: 1.0 }
    }
}

impl LossWeights {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha >= 0.0 && beta >= 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(Error::invalid("loss weights must be finite and non-negative"));
        }
        Ok(LossWeights { alpha, beta })
    }
}

/// Cross-entropy of vocabulary logits (one row per masked position)
/// against the original token ids.
pub fn mmlm_loss(logits: ArrayView2<f64>, targets: &[u32]) -> Result<f64> {
    mean_softmax_xent("MMLM", logits, &as_classes(targets))
}

/// Mean squared L2 distance between predicted and original crops, one row
/// per masked position.
pub fn mcm_loss(pred: ArrayView2<f64>, target: ArrayView2<f64>) -> Result<f64> {
    check_same_shape("MCM", pred, target)?;
    if pred.nrows() == 0 {
        return Ok(0.0);
    }
    let total: f64 = pred.iter().zip(target.iter()).map(|(p, t)| (p - t).powi(2)).sum();
    Ok(total / pred.nrows() as f64)
}

/// Sum over the six tag classes of sigmoid binary cross-entropy, averaged
/// over tokens.
pub fn tt_loss(logits: ArrayView2<f64>, targets: &[TokenTags]) -> Result<f64> {
    check_tags(logits, targets)?;
    if targets.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = logits
        .rows()
        .into_iter()
        .zip(targets)
        .map(|(row, t)| {
            row.iter()
                .zip(t)
                .map(|(&x, &y)| bce_with_logits(x, f64::from(y)))
                .sum::<f64>()
        })
        .sum();
    Ok(total / targets.len() as f64)
}

/// `L_mmlm + α·L_mcm + β·L_tt`; the tagging term is dropped for examples
/// without tag targets.
pub fn pretrain_loss(l_mmlm: f64, l_mcm: f64, l_tt: Option<f64>, weights: LossWeights) -> f64 {
    l_mmlm + weights.alpha * l_mcm + weights.beta * l_tt.unwrap_or(0.0)
}

/// Inputs of one loss, for evaluating it or its gradient generically.
#[derive(Debug, Clone, Copy)]
pub enum LossInput<'a> {
    Mmlm {
        logits: ArrayView2<'a, f64>,
        targets: &'a [u32],
    },
    Mcm {
        pred: ArrayView2<'a, f64>,
        target: ArrayView2<'a, f64>,
    },
    Tt {
        logits: ArrayView2<'a, f64>,
        targets: &'a [TokenTags],
    },
}

impl LossInput<'_> {
    /// The array the gradient is taken with respect to.
    pub fn variable(&self) -> ArrayView2<'_, f64> {
        match *self {
            LossInput::Mmlm { logits, .. } | LossInput::Tt { logits, .. } => logits,
            LossInput::Mcm { pred, .. } => pred,
        }
    }

    /// Same targets, different logits or predictions.
    pub fn with_variable<'b>(&'b self, v: ArrayView2<'b, f64>) -> LossInput<'b> {
        match *self {
            LossInput::Mmlm { targets, .. } => LossInput::Mmlm { logits: v, targets },
            LossInput::Mcm { target, .. } => LossInput::Mcm { pred: v, target },
            LossInput::Tt { targets, .. } => LossInput::Tt { logits: v, targets },
        }
    }

    pub fn loss(&self) -> Result<f64> {
        match *self {
            LossInput::Mmlm { logits, targets } => mmlm_loss(logits, targets),
            LossInput::Mcm { pred, target } => mcm_loss(pred, target),
            LossInput::Tt { logits, targets } => tt_loss(logits, targets),
        }
    }
}

/// Analytic gradient of the loss with respect to the logits (MMLM, TT) or
/// the predicted crops (MCM), including the mean normalization.
pub fn loss_gradients(input: &LossInput) -> Result<Array2<f64>> {
    match *input {
        LossInput::Mmlm { logits, targets } => {
            mean_softmax_xent_grad("MMLM", logits, &as_classes(targets))
        }
        LossInput::Mcm { pred, target } => {
            check_same_shape("MCM", pred, target)?;
            let scale = 2.0 / pred.nrows().max(1) as f64;
            Ok((&pred - &target) * scale)
        }
        LossInput::Tt { logits, targets } => {
            check_tags(logits, targets)?;
            let scale = 1.0 / targets.len().max(1) as f64;
            let mut grad = logits.mapv(sigmoid);
            for (mut row, t) in grad.rows_mut().into_iter().zip(targets) {
                for (g, &y) in row.iter_mut().zip(t) {
                    *g = (*g - f64::from(y)) * scale;
                }
            }
            Ok(grad)
        }
    }
}

fn as_classes(ids: &[u32]) -> Vec<usize> {
    ids.iter().map(|&i| i as usize).collect()
}

fn check_same_shape(what: &str, a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::invalid(format!(
            "{what}: prediction shape {:?} does not match target shape {:?}",
            a.dim(),
            b.dim()
        )));
    }
    check_finite(what, a)?;
    check_finite(what, b)
}

fn check_tags(logits: ArrayView2<f64>, targets: &[TokenTags]) -> Result<()> {
    if logits.dim() != (targets.len(), NUM_TAG_CLASSES) {
        return Err(Error::invalid(format!(
            "TT: logits shape {:?} for {} tokens of {NUM_TAG_CLASSES} classes",
            logits.dim(),
            targets.len()
        )));
    }
    if targets.iter().flatten().any(|&t| t > 1) {
        return Err(Error::invalid("TT: targets must be 0 or 1"));
    }
    check_finite("TT", logits)
}
