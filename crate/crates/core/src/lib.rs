//! Statistical yield analysis for traditional and programmable CMOS low-noise
//! amplifiers.
//!
//! The crate models die-to-die variation of LNA RF parameters, pushes every
//! sampled die through the receiver cascade equations, applies digital mode
//! selection to a three-mode programmable LNA and compares the resulting
//! yield/power trade-off against fixed-bias designs.
//!
//! Module map:
//!
//! * [`budget`]: dB/linear conversions, Friis noise and IIP3 cascades,
//!   stage-two limit derivation and receiver classification. Generic over
//!   [`Real`].
//! * [`statmodel`]: inverse normal CDF, quantile-based sigma fits, the
//!   latent-factor die model and its calibration.
//! * [`designs`]: traditional and programmable LNA data, the built-in dataset
//!   and the JSON config.
//! * [`montecarlo`]: deterministic populations and summary statistics.
//! * [`selection`]: Best Gain / Best Receiver / fixed-mode strategies.
//! * [`explorer`]: grid sweep, constraint filter and best-IIP3 pick.
//! * [`report`]: ΔS/ΔP comparison, table rendering and run manifests.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod budget;
pub mod designs;
pub mod error;
pub mod explorer;
pub mod format;
pub mod montecarlo;
pub mod report;
mod scalar;
pub mod selection;
pub mod statmodel;

pub use error::{Error, Result};
pub use scalar::Real;

pub use budget::{classify_receiver, ComplianceFlags};
pub use designs::{PlnaDesign, PlnaMode, TraditionalDesign};
pub use montecarlo::{generate_population, summarize, violation_rates, DiePopulation};
pub use selection::{apply_strategy, SelectionReport, SelectionStrategy};
pub use statmodel::{DieSample, LatentDieModel, MarginalSpec};

/// Double-precision budget types; the default everywhere in the crate.
pub type DecibelGain = budget::DecibelGain<f64>;
pub type LinearGain = budget::LinearGain<f64>;
pub type NoiseFigureDb = budget::NoiseFigureDb<f64>;
pub type NoiseFactor = budget::NoiseFactor<f64>;
pub type PowerDbm = budget::PowerDbm<f64>;
pub type PowerMw = budget::PowerMw<f64>;
pub type RfQuantities = budget::RfQuantities<f64>;
pub type LnaSpecCorner = budget::LnaSpecCorner<f64>;
pub type ReceiverTargets = budget::ReceiverTargets<f64>;
pub type StageTwoLimits = budget::StageTwoLimits<f64>;

/// Single-precision variants for embedded/BIST-style evaluation.
pub type RfQuantitiesF32 = budget::RfQuantities<f32>;
pub type LnaSpecCornerF32 = budget::LnaSpecCorner<f32>;
pub type ReceiverTargetsF32 = budget::ReceiverTargets<f32>;
pub type StageTwoLimitsF32 = budget::StageTwoLimits<f32>;
