use crate::error::{Error, Result};

/// Probabilities are clamped into `[PROB_CLAMP, 1 - PROB_CLAMP]` before any
/// log is taken.
pub const PROB_CLAMP: f64 = 1e-7;

pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

fn validate_labels(probs: &[f64], labels: &[f64]) -> Result<()> {
    if probs.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} probabilities vs {} labels",
            probs.len(),
            labels.len()
        )));
    }
    if probs.is_empty() {
        return Err(Error::Validation("empty batch in cross entropy".into()));
    }
    for (i, &y) in labels.iter().enumerate() {
        if y != 0.0 && y != 1.0 {
            return Err(Error::Validation(format!(
                "label {y} at index {i} is outside {{0,1}}"
            )));
        }
    }
    Ok(())
}

/// Mean binary cross-entropy.
pub fn cross_entropy(probs: &[f64], labels: &[f64]) -> Result<f64> {
    validate_labels(probs, labels)?;
    let mut total = 0.0;
    for (&p, &y) in probs.iter().zip(labels) {
        let p = clamp_prob(p);
        total -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
    }
    Ok(total / probs.len() as f64)
}

/// Gradient of the mean binary cross-entropy w.r.t. each probability.
pub fn cross_entropy_grad(probs: &[f64], labels: &[f64]) -> Result<Vec<f64>> {
    validate_labels(probs, labels)?;
    let n = probs.len() as f64;
    Ok(probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = clamp_prob(p);
            (-y / p + (1.0 - y) / (1.0 - p)) / n
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_probability_costs_ln_two() {
        let ce = cross_entropy(&[0.5], &[1.0]).unwrap();
        assert!((ce - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn confident_correct_prediction_is_nearly_free() {
        let ce = cross_entropy(&[1.0 - 1e-7], &[1.0]).unwrap();
        assert!(ce >= 0.0 && ce < 1e-6);
    }

    #[test]
    fn hand_evaluated_two_point_batch() {
        // -(ln 0.8 + ln 0.8)/2 = -ln 0.8
        let ce = cross_entropy(&[0.8, 0.2], &[1.0, 0.0]).unwrap();
        assert!((ce - 0.2231435513).abs() < 1e-9);
    }

    #[test]
    fn bad_label_is_rejected() {
        assert!(matches!(
            cross_entropy(&[0.5], &[0.4]),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn out_of_range_probability_is_clamped_not_infinite() {
        let ce = cross_entropy(&[0.0], &[1.0]).unwrap();
        assert!(ce.is_finite() && ce > 0.0);
    }
}
