//! Gaussian marginals recovered from a mean and tail probabilities.

use serde::{Deserialize, Serialize};

use super::normal::inverse_normal_cdf;
use crate::error::StatError;

/// `P(X <= value) = prob`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileConstraint {
    pub value: f64,
    pub prob: f64,
}

impl QuantileConstraint {
    pub fn new(value: f64, prob: f64) -> Self {
        Self { value, prob }
    }

    /// Lower tail: a fraction `rate` of samples falls below `value`.
    pub fn below(value: f64, rate: f64) -> Self {
        Self::new(value, rate)
    }

    /// Upper tail: a fraction `rate` of samples exceeds `value`.
    pub fn above(value: f64, rate: f64) -> Self {
        Self::new(value, 1.0 - rate)
    }

    /// Sample minimum of `n` draws, placed at its expected CDF `1/(n+1)`.
    pub fn sample_min(value: f64, n: usize) -> Self {
        Self::new(value, 1.0 / (n as f64 + 1.0))
    }

    /// Sample maximum of `n` draws, placed at `n/(n+1)`.
    pub fn sample_max(value: f64, n: usize) -> Self {
        Self::new(value, n as f64 / (n as f64 + 1.0))
    }
}

/// Result of fitting sigma against one or more quantile constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaFit {
    /// One sigma per constraint, in input order.
    pub solutions: Vec<f64>,
    /// Arithmetic mean of `solutions`.
    pub sigma: f64,
    /// `(max - min) / sigma`; small values support the Gaussian shape.
    pub relative_spread: f64,
}

/// `sigma = (q_value − mean) / Φ⁻¹(q_prob)`.
pub fn fit_sigma_from_quantile(mean: f64, q_value: f64, q_prob: f64) -> Result<f64, StatError> {
    if !(q_prob > 0.0 && q_prob < 1.0) {
        return Err(StatError::ProbabilityOutOfRange(q_prob));
    }
    if q_prob == 0.5 {
        return Err(StatError::MedianQuantile);
    }
    let below = q_value < mean;
    if q_value == mean || below != (q_prob < 0.5) {
        return Err(StatError::SignInconsistent {
            mean,
            value: q_value,
            prob: q_prob,
        });
    }
    Ok((q_value - mean) / inverse_normal_cdf(q_prob)?)
}

pub fn fit_sigma(mean: f64, constraints: &[QuantileConstraint]) -> Result<SigmaFit, StatError> {
    if constraints.is_empty() {
        return Err(StatError::NoConstraints);
    }
    let solutions = constraints
        .iter()
        .map(|c| fit_sigma_from_quantile(mean, c.value, c.prob))
        .collect::<Result<Vec<_>, _>>()?;
    let sigma = solutions.iter().sum::<f64>() / solutions.len() as f64;
    let lo = solutions.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = solutions.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(SigmaFit {
        solutions,
        sigma,
        relative_spread: (hi - lo) / sigma,
    })
}

/// Mean and sigma from two quantiles of the same Gaussian.
pub fn fit_location_scale(
    a: QuantileConstraint,
    b: QuantileConstraint,
) -> Result<(f64, f64), StatError> {
    let za = inverse_normal_cdf(a.prob)?;
    let zb = inverse_normal_cdf(b.prob)?;
    if za == zb {
        return Err(StatError::InvalidModel(
            "two quantile constraints at the same probability".into(),
        ));
    }
    let sigma = (b.value - a.value) / (zb - za);
    if !(sigma > 0.0) {
        return Err(StatError::SignInconsistent {
            mean: f64::NAN,
            value: b.value,
            prob: b.prob,
        });
    }
    Ok((a.value - za * sigma, sigma))
}

/// Two-tail fit where the published mean is only known to `half_step`
/// (rounding). The location solving both tails is clamped to
/// `[mean - half_step, mean + half_step]`; sigma is then the
/// [`fit_sigma`] average at that location.
pub fn fit_two_tails_rounded_mean(
    mean: f64,
    half_step: f64,
    a: QuantileConstraint,
    b: QuantileConstraint,
) -> Result<(f64, SigmaFit), StatError> {
    if !(half_step >= 0.0) {
        return Err(StatError::InvalidModel(format!(
            "rounding half-step {half_step} must be >= 0"
        )));
    }
    let (mu, _) = fit_location_scale(a, b)?;
    let mu = mu.clamp(mean - half_step, mean + half_step);
    Ok((mu, fit_sigma(mu, &[a, b])?))
}

/// Largest sigma keeping `P(X > limit) <= rate` for a Gaussian at `mean`.
pub fn sigma_upper_bound(mean: f64, limit: f64, rate: f64) -> Result<f64, StatError> {
    fit_sigma_from_quantile(mean, limit, 1.0 - rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gain_tails_of_the_0p4ma_design() {
        let lo = fit_sigma_from_quantile(10.4, 10.0, 0.22).unwrap();
        assert!((lo - 0.518_005_070_039_712).abs() < 1e-9);
        let hi = fit_sigma_from_quantile(10.4, 11.0, 0.89).unwrap();
        assert!((hi - 0.489_185_686_164_367).abs() < 1e-9);

        let fit = fit_sigma(
            10.4,
            &[
                QuantileConstraint::below(10.0, 0.22),
                QuantileConstraint::above(11.0, 0.11),
            ],
        )
        .unwrap();
        assert_eq!(fit.solutions.len(), 2);
        assert!((fit.sigma - 0.503_595_378).abs() < 1e-6);
        assert!(fit.relative_spread < 0.06);
    }

    #[test]
    fn iip3_tail() {
        let s = fit_sigma_from_quantile(0.7, -4.0, 0.14).unwrap();
        assert!((s - 4.350_565_450_817_98).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_constraints() {
        assert_eq!(
            fit_sigma_from_quantile(1.0, 0.0, 0.5),
            Err(StatError::MedianQuantile)
        );
        assert!(matches!(
            fit_sigma_from_quantile(1.0, 0.0, 0.8),
            Err(StatError::SignInconsistent { .. })
        ));
        assert!(matches!(
            fit_sigma_from_quantile(1.0, 2.0, 0.2),
            Err(StatError::SignInconsistent { .. })
        ));
        assert!(fit_sigma_from_quantile(1.0, 2.0, 1.0).is_err());
        assert!(fit_sigma(1.0, &[]).is_err());
    }

    #[test]
    fn location_scale_recovers_known_gaussian() {
        let (m, s) = (-16.0, 3.2);
        let a = QuantileConstraint::new(m + s * inverse_normal_cdf(0.97).unwrap(), 0.97);
        let b = QuantileConstraint::new(m + s * inverse_normal_cdf(0.999).unwrap(), 0.999);
        let (fm, fs) = fit_location_scale(a, b).unwrap();
        assert!((fm - m).abs() < 1e-12 && (fs - s).abs() < 1e-12);
    }

    #[test]
    fn extreme_positions() {
        assert!((QuantileConstraint::sample_min(0.0, 1000).prob - 1.0 / 1001.0).abs() < 1e-18);
        assert!((QuantileConstraint::sample_max(0.0, 1000).prob - 1000.0 / 1001.0).abs() < 1e-15);
    }

    #[test]
    fn nf_bound_for_zero_violations() {
        let s = sigma_upper_bound(2.8, 3.0, 0.0005).unwrap();
        assert!((s - 0.2 / 3.290_526_731_491_895).abs() < 1e-9);
    }
}
