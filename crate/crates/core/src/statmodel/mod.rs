//! Gaussian marginals fitted from published tail data and the correlated
//! latent-factor die model built on top of them.

pub mod calibrate;
pub mod fit;
mod latent;
pub mod normal;

pub use calibrate::{
    calibrate, CalibrationContext, CalibrationResult, CalibrationSettings, CalibrationTarget, Knob,
    SelectionMetric, Statistic,
};
pub use fit::{fit_sigma, fit_sigma_from_quantile, QuantileConstraint, SigmaFit};
pub use latent::{
    die_rng, sample_die, Bounds, CorrelationTargets, DieSample, LatentDieModel, MarginalSpec,
    ModeBlock, ModeMarginals, ParamRow, RfParam, DEFAULT_FACTOR_COUNT, GAIN_FACTOR,
    LINEARITY_FACTOR, MODEL_SCHEMA_VERSION, NOISE_FACTOR,
};
pub use normal::{inverse_normal_cdf, normal_cdf};
