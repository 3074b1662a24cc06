use crate::error::{PrsError, Result};

/// Probability clamp used inside the cross-entropy.
pub const BCE_EPS: f64 = 1e-7;

const P_MIN: f64 = f64::MIN_POSITIVE;
const P_MAX: f64 = 1.0 - f64::EPSILON / 2.0;

/// Logistic function without overflow, clamped to the open interval (0, 1).
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    let p = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    p.clamp(P_MIN, P_MAX)
}

/// Checked variant of [`sigmoid`] that rejects non-finite input.
pub fn sigmoid_stable(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(PrsError::Domain(format!("sigmoid of non-finite value {x}")));
    }
    Ok(sigmoid(x))
}

#[inline]
pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Mean binary cross-entropy over the masked-in positions.
pub fn bce_loss(labels: &[bool], probs: &[f64], mask: &[bool]) -> Result<f64> {
    if labels.len() != probs.len() || labels.len() != mask.len() {
        return Err(PrsError::Shape(format!(
            "bce inputs have lengths {}/{}/{}",
            labels.len(),
            probs.len(),
            mask.len()
        )));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for ((&y, &p), &m) in labels.iter().zip(probs).zip(mask) {
        if m {
            total += bce_single(y, p);
            count += 1;
        }
    }
    if count == 0 {
        return Err(PrsError::Domain("bce over zero masked-in positions".into()));
    }
    Ok(total / count as f64)
}

/// Cross-entropy of one prediction with the probability clamped to `[ε, 1−ε]`.
#[inline]
pub fn bce_single(label: bool, prob: f64) -> f64 {
    let p = prob.clamp(BCE_EPS, 1.0 - BCE_EPS);
    if label {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Derivative of [`bce_single`] with respect to `prob`; zero where the clamp is active.
#[inline]
pub fn bce_single_grad(label: bool, prob: f64) -> f64 {
    if !(BCE_EPS..=1.0 - BCE_EPS).contains(&prob) {
        return 0.0;
    }
    if label {
        -1.0 / prob
    } else {
        1.0 / (1.0 - prob)
    }
}

/// `bce_single(label, σ(z)) − ln 2` evaluated from the logit without forming
/// the probability, so values near `z = 0` keep full relative precision.
///
/// Unclamped. Meant for finite-difference checks, where the loss near ln 2
/// would otherwise be quantized at one ulp of ln 2.
pub fn bce_logit_centered(label: bool, z: f64) -> f64 {
    // ln((1 + e^x) / 2) with x = −z for a click and z otherwise.
    let x = if label { -z } else { z };
    if x > 30.0 {
        x - std::f64::consts::LN_2 + (-x).exp().ln_1p()
    } else {
        (x.exp_m1() / 2.0).ln_1p()
    }
}
