//! Numerically stable scalar primitives shared by the loss and the decoder.

/// Logistic sigmoid, evaluated without overflow for any finite input.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// Derivative of [`sigmoid`] at `x`.
pub fn sigmoid_grad(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 - s)
}

/// Binary cross entropy between a target in `[0, 1]` and `sigmoid(logit)`,
/// computed in logit space: `max(x, 0) - t*x + ln(1 + exp(-|x|))`.
///
/// Probabilities are never materialized, so saturated logits (|x| up to the
/// hundreds) stay finite.
pub fn bce_with_logit(target: f64, logit: f64) -> f64 {
    logit.max(0.0) - target * logit + libm::log1p(libm::exp(-logit.abs()))
}

/// Derivative of [`bce_with_logit`] with respect to the logit:
/// `sigmoid(logit) - target`.
pub fn bce_grad_logit(target: f64, logit: f64) -> f64 {
    sigmoid(logit) - target
}
