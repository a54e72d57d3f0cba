use super::scalar::Scalar;

/// Probabilities are clamped to `[CLAMP, 1 - CLAMP]` before taking logs.
pub const CLAMP: f64 = 1e-7;

/// Mean over every component of `-[y ln p + (1 - y) ln(1 - p)]`.
pub fn bce_loss<T: Scalar>(predictions: &[T], targets: &[T]) -> T {
    assert_eq!(predictions.len(), targets.len(), "shape mismatch");
    if predictions.is_empty() {
        return T::zero();
    }
    let lo = T::lit(CLAMP);
    let hi = T::one() - lo;
    let total: T = predictions
        .iter()
        .zip(targets)
        .map(|(&p, &y)| {
            let p = p.max(lo).min(hi);
            -(y * p.ln() + (T::one() - y) * (T::one() - p).ln())
        })
        .sum();
    total / T::lit(predictions.len() as f64)
}

/// Mean over rows of `-sum_i y_i ln p_i`.
pub fn cross_entropy_loss<T: Scalar>(predictions: &[T], targets: &[T], width: usize) -> T {
    assert_eq!(predictions.len(), targets.len(), "shape mismatch");
    let rows = predictions.len() / width.max(1);
    if rows == 0 {
        return T::zero();
    }
    let lo = T::lit(CLAMP);
    let total: T = predictions
        .iter()
        .zip(targets)
        .map(|(&p, &y)| -(y * p.max(lo).ln()))
        .sum();
    total / T::lit(rows as f64)
}
