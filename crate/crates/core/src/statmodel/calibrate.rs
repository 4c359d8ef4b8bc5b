//! Coordinate-descent calibration of a latent die model against observed
//! statistics.
//!
//! Every evaluation regenerates a population with the same seed, so the
//! objective is a deterministic function of the knob values.

use serde::{Deserialize, Serialize};

use super::latent::{LatentDieModel, RfParam};
use crate::error::{Error, StatError};
use crate::montecarlo::{
    generate_population, quantile, receiver_compliance, violation_rates_of, DiePopulation,
    SpecClause,
};
use crate::selection::{apply_with, SelectionReport, SelectionStrategy, Selector};
use crate::{LnaSpecCorner, ReceiverTargets, StageTwoLimits};

/// Smallest population allowed per objective evaluation.
pub const MIN_CALIBRATION_N: usize = 10_000;

/// A free parameter of the search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Knob {
    /// Total sigma of one (mode, parameter); the idiosyncratic part follows.
    Sigma {
        mode: usize,
        param: RfParam,
    },
    GainCrossMode,
    NfCrossMode,
    Iip3CrossMode,
    GainIip3,
}

impl Knob {
    pub fn get(&self, model: &LatentDieModel) -> f64 {
        let c = &model.correlation;
        match *self {
            Knob::Sigma { mode, param } => model.modes[mode].marginals.get(param).sigma,
            Knob::GainCrossMode => c.gain_cross_mode,
            Knob::NfCrossMode => c.nf_cross_mode,
            Knob::Iip3CrossMode => c.iip3_cross_mode,
            Knob::GainIip3 => c.gain_iip3,
        }
    }

    /// Set the knob and rebuild the loadings. On error `model` is unchanged.
    pub fn set(&self, model: &mut LatentDieModel, v: f64) -> Result<(), StatError> {
        let mut m = model.clone();
        match *self {
            Knob::Sigma { mode, param } => {
                m.modes
                    .get_mut(mode)
                    .ok_or_else(|| StatError::InvalidModel(format!("no mode {mode}")))?
                    .marginals
                    .get_mut(param)
                    .sigma = v
            }
            Knob::GainCrossMode => m.correlation.gain_cross_mode = v,
            Knob::NfCrossMode => m.correlation.nf_cross_mode = v,
            Knob::Iip3CrossMode => m.correlation.iip3_cross_mode = v,
            Knob::GainIip3 => m.correlation.gain_iip3 = v,
        }
        m.rebuild()?;
        *model = m;
        Ok(())
    }

    fn range(&self, start: f64) -> (f64, f64) {
        match self {
            Knob::Sigma { .. } if start > 0.0 => (0.5 * start, 2.0 * start),
            Knob::Sigma { .. } => (0.0, 1.0),
            Knob::GainIip3 => (-0.95, 0.95),
            _ => (0.0, 0.999),
        }
    }

    fn initial_step(&self, start: f64) -> f64 {
        match self {
            Knob::Sigma { .. } if start > 0.0 => 0.1 * start,
            Knob::Sigma { .. } => 0.05,
            _ => 0.05,
        }
    }

    fn check(&self, model: &LatentDieModel) -> Result<(), StatError> {
        if let Knob::Sigma { mode, .. } = *self {
            if mode >= model.mode_count() {
                return Err(StatError::Calibration(format!(
                    "knob refers to mode {mode}, model has {}",
                    model.mode_count()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReceiverMetric {
    Compliance,
    NfFail,
    Iip3Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMetric {
    Compliance,
    NfFail,
    Iip3Fail,
    AveragePower,
    /// Empirical quantile of the selected gain.
    GainQuantile {
        prob: f64,
    },
}

/// A population statistic that can be matched to an observed value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Statistic {
    ModeMean {
        mode: usize,
        param: RfParam,
    },
    ModeQuantile {
        mode: usize,
        param: RfParam,
        prob: f64,
    },
    Violation {
        mode: usize,
        clause: SpecClause,
    },
    Receiver {
        mode: usize,
        metric: ReceiverMetric,
    },
    Selection {
        strategy: SelectionStrategy,
        metric: SelectionMetric,
    },
}

impl Statistic {
    fn mode(&self) -> Option<usize> {
        match *self {
            Statistic::ModeMean { mode, .. }
            | Statistic::ModeQuantile { mode, .. }
            | Statistic::Violation { mode, .. }
            | Statistic::Receiver { mode, .. } => Some(mode),
            Statistic::Selection { .. } => None,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Statistic::ModeMean { mode, param } => format!("mean {} [mode {mode}]", param.name()),
            Statistic::ModeQuantile { mode, param, prob } => {
                format!("q{prob} {} [mode {mode}]", param.name())
            }
            Statistic::Violation { mode, clause } => {
                format!("violation {} [mode {mode}]", clause.key())
            }
            Statistic::Receiver { mode, metric } => format!("receiver {metric:?} [mode {mode}]"),
            Statistic::Selection { strategy, metric } => format!("{} {metric:?}", strategy.name()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTarget {
    pub statistic: Statistic,
    pub value: f64,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

impl CalibrationTarget {
    pub fn new(statistic: Statistic, value: f64) -> Self {
        Self {
            statistic,
            value,
            weight: 1.0,
        }
    }

    pub fn weighted(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }
}

/// Spec, receiver budget and (for PLNA statistics) the mode selector.
#[derive(Debug, Clone, Copy)]
pub struct CalibrationContext {
    pub spec: LnaSpecCorner,
    pub limits: StageTwoLimits,
    pub targets: ReceiverTargets,
    pub selector: Option<Selector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSettings {
    pub n: usize,
    pub seed: u64,
    pub knobs: Vec<Knob>,
    pub max_evaluations: usize,
    /// Steps are halved until they fall below `initial_step / 2^refinements`.
    pub refinements: u32,
}

impl CalibrationSettings {
    pub fn new(knobs: Vec<Knob>, seed: u64) -> Self {
        Self {
            n: 20_000,
            seed,
            knobs,
            max_evaluations: 400,
            refinements: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetResidual {
    pub statistic: Statistic,
    pub target: f64,
    pub achieved: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub model: LatentDieModel,
    pub residuals: Vec<TargetResidual>,
    pub initial_objective: f64,
    pub final_objective: f64,
    pub evaluations: usize,
    /// Set when the search could not improve the start or ran out of budget.
    pub diagnostic: Option<String>,
}

/// Value of each statistic on a population of `model`.
pub fn evaluate_statistics(
    model: &LatentDieModel,
    statistics: &[Statistic],
    ctx: &CalibrationContext,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>, Error> {
    let pop = generate_population("calibration", model, n, seed)?;
    let mut reports: Vec<SelectionReport> = Vec::new();
    statistics
        .iter()
        .map(|s| statistic_value(s, &pop, ctx, &mut reports))
        .collect()
}

fn statistic_value(
    s: &Statistic,
    pop: &DiePopulation,
    ctx: &CalibrationContext,
    reports: &mut Vec<SelectionReport>,
) -> Result<f64, Error> {
    let column = |mode: usize, param: RfParam| -> Vec<f64> {
        pop.mode_values(mode).map(|q| param.get(q)).collect()
    };
    Ok(match *s {
        Statistic::ModeMean { mode, param } => {
            let v = column(mode, param);
            v.iter().sum::<f64>() / v.len() as f64
        }
        Statistic::ModeQuantile { mode, param, prob } => quantile(&mut column(mode, param), prob)?,
        Statistic::Violation { mode, clause } => {
            violation_rates_of("", pop.mode_values(mode), &ctx.spec)?.get(clause)
        }
        Statistic::Receiver { mode, metric } => {
            let r = receiver_compliance(pop, mode, &ctx.limits, &ctx.targets)?;
            match metric {
                ReceiverMetric::Compliance => r.compliance,
                ReceiverMetric::NfFail => r.nf_fail,
                ReceiverMetric::Iip3Fail => r.iip3_fail,
            }
        }
        Statistic::Selection { strategy, metric } => {
            let idx = match reports.iter().position(|r| r.strategy == strategy) {
                Some(i) => i,
                None => {
                    let base = ctx.selector.ok_or_else(|| {
                        StatError::Calibration("selection statistics need a PLNA selector".into())
                    })?;
                    let selector = Selector {
                        target_gain_db: strategy.target_db(),
                        ..base
                    };
                    reports.push(apply_with(
                        pop,
                        strategy,
                        &ctx.limits,
                        &ctx.targets,
                        &selector,
                    )?);
                    reports.len() - 1
                }
            };
            let r = &reports[idx];
            match metric {
                SelectionMetric::Compliance => r.compliance,
                SelectionMetric::NfFail => r.nf_fail,
                SelectionMetric::Iip3Fail => r.iip3_fail,
                SelectionMetric::AveragePower => r.average_power_mw,
                SelectionMetric::GainQuantile { prob } => {
                    quantile(&mut r.selected_gains(pop), prob)?
                }
            }
        }
    })
}

fn objective(values: &[f64], targets: &[CalibrationTarget]) -> f64 {
    values
        .iter()
        .zip(targets)
        .map(|(v, t)| t.weight * (v - t.value).powi(2))
        .sum()
}

/// Coordinate descent over `settings.knobs`, minimizing the weighted squared
/// error between simulated and target statistics. The input model is not
/// touched.
pub fn calibrate(
    model: &LatentDieModel,
    targets: &[CalibrationTarget],
    ctx: &CalibrationContext,
    settings: &CalibrationSettings,
) -> Result<CalibrationResult, Error> {
    if settings.n < MIN_CALIBRATION_N {
        return Err(StatError::Calibration(format!(
            "n = {} per evaluation is below the minimum {MIN_CALIBRATION_N}",
            settings.n
        ))
        .into());
    }
    if targets.is_empty() {
        return Err(StatError::Calibration("no targets".into()).into());
    }
    if settings.knobs.is_empty() {
        return Err(StatError::Calibration("no knobs to tune".into()).into());
    }
    model.validate()?;
    for k in &settings.knobs {
        k.check(model)?;
    }
    for t in targets {
        if t.statistic.mode().is_some_and(|m| m >= model.mode_count()) {
            return Err(StatError::Calibration(format!(
                "target '{}' refers to a mode the model does not have",
                t.statistic.describe()
            ))
            .into());
        }
        if !(t.weight >= 0.0) || !t.value.is_finite() {
            return Err(StatError::Calibration(format!(
                "target '{}' has a bad value or weight",
                t.statistic.describe()
            ))
            .into());
        }
    }

    let statistics: Vec<Statistic> = targets.iter().map(|t| t.statistic).collect();
    let eval = |m: &LatentDieModel| -> Result<(f64, Vec<f64>), Error> {
        let v = evaluate_statistics(m, &statistics, ctx, settings.n, settings.seed)?;
        Ok((objective(&v, targets), v))
    };

    let mut current = model.clone();
    let (initial_objective, mut values) = eval(&current)?;
    let mut best = initial_objective;
    let mut evaluations = 1;

    let starts: Vec<f64> = settings.knobs.iter().map(|k| k.get(model)).collect();
    let mut steps: Vec<f64> = settings
        .knobs
        .iter()
        .zip(&starts)
        .map(|(k, &s)| k.initial_step(s))
        .collect();
    let min_steps: Vec<f64> = steps
        .iter()
        .map(|s| s / f64::from(1u32 << settings.refinements.min(20)))
        .collect();

    'search: while steps.iter().zip(&min_steps).any(|(s, m)| s >= m) {
        for (ki, knob) in settings.knobs.iter().enumerate() {
            if steps[ki] < min_steps[ki] {
                continue;
            }
            let (lo, hi) = knob.range(starts[ki]);
            let mut moved = false;
            for dir in [1.0, -1.0] {
                loop {
                    if evaluations >= settings.max_evaluations {
                        break 'search;
                    }
                    let from = knob.get(&current);
                    let to = (from + dir * steps[ki]).clamp(lo, hi);
                    if to == from {
                        break;
                    }
                    let mut candidate = current.clone();
                    if knob.set(&mut candidate, to).is_err() {
                        break;
                    }
                    let (obj, v) = eval(&candidate)?;
                    evaluations += 1;
                    if obj < best {
                        best = obj;
                        values = v;
                        current = candidate;
                        moved = true;
                    } else {
                        break;
                    }
                }
                if moved {
                    break;
                }
            }
            if !moved {
                steps[ki] *= 0.5;
            }
        }
    }

    let diagnostic = if best >= initial_objective && initial_objective > 0.0 {
        Some(format!(
            "no move improved on the starting model (objective {initial_objective:.3e}); returning it unchanged"
        ))
    } else if evaluations >= settings.max_evaluations {
        Some(format!(
            "evaluation budget of {} exhausted; best objective {best:.3e}",
            settings.max_evaluations
        ))
    } else {
        None
    };
    let residuals = targets
        .iter()
        .zip(&values)
        .map(|(t, &v)| TargetResidual {
            statistic: t.statistic,
            target: t.value,
            achieved: v,
            residual: v - t.value,
        })
        .collect();
    Ok(CalibrationResult {
        model: current,
        residuals,
        initial_objective,
        final_objective: best,
        evaluations,
        diagnostic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::budget::derive_stage2_limits;
    use crate::designs::paper::paper_traditional;
    use crate::statmodel::fit::fit_sigma_from_quantile;

    fn ctx() -> CalibrationContext {
        let spec = LnaSpecCorner::default();
        let targets = ReceiverTargets::default();
        CalibrationContext {
            spec,
            limits: derive_stage2_limits(&spec, &targets).unwrap(),
            targets,
            selector: None,
        }
    }

    #[test]
    fn fixed_point_returns_input() {
        let model = paper_traditional(0.4).latent_model().unwrap();
        let stats = [Statistic::Violation {
            mode: 0,
            clause: SpecClause::GainLow,
        }];
        let now = evaluate_statistics(&model, &stats, &ctx(), 10_000, 3).unwrap();
        let targets = [CalibrationTarget::new(stats[0], now[0])];
        let settings = CalibrationSettings {
            n: 10_000,
            ..CalibrationSettings::new(
                vec![Knob::Sigma {
                    mode: 0,
                    param: RfParam::Gain,
                }],
                3,
            )
        };
        let r = calibrate(&model, &targets, &ctx(), &settings).unwrap();
        assert_eq!(r.model, model);
        assert_eq!(r.final_objective, 0.0);
    }

    #[test]
    fn single_sigma_matches_closed_form() {
        let mut model = paper_traditional(0.4).latent_model().unwrap();
        Knob::Sigma {
            mode: 0,
            param: RfParam::Gain,
        }
        .set(&mut model, 0.4)
        .unwrap();
        let targets = [CalibrationTarget::new(
            Statistic::Violation {
                mode: 0,
                clause: SpecClause::GainLow,
            },
            0.22,
        )];
        let settings = CalibrationSettings {
            refinements: 7,
            ..CalibrationSettings::new(
                vec![Knob::Sigma {
                    mode: 0,
                    param: RfParam::Gain,
                }],
                11,
            )
        };
        let r = calibrate(&model, &targets, &ctx(), &settings).unwrap();
        let want = fit_sigma_from_quantile(10.4, 10.0, 0.22).unwrap();
        let got = r.model.modes[0].marginals.gain.sigma;
        assert!((got - want).abs() < 0.02, "{got} vs {want}");
        assert!(r.final_objective < r.initial_objective);
        r.model.validate().unwrap();
    }

    #[test]
    fn rejects_small_n_and_bad_modes() {
        let model = paper_traditional(0.4).latent_model().unwrap();
        let t = [CalibrationTarget::new(
            Statistic::ModeMean {
                mode: 0,
                param: RfParam::Gain,
            },
            10.4,
        )];
        let mut s = CalibrationSettings::new(vec![Knob::GainIip3], 1);
        s.n = 500;
        assert!(calibrate(&model, &t, &ctx(), &s).is_err());
        let s = CalibrationSettings::new(
            vec![Knob::Sigma {
                mode: 2,
                param: RfParam::Gain,
            }],
            1,
        );
        assert!(calibrate(&model, &t, &ctx(), &s).is_err());
        let s = CalibrationSettings::new(vec![Knob::GainIip3], 1);
        let sel = [CalibrationTarget::new(
            Statistic::Selection {
                strategy: SelectionStrategy::best_gain(),
                metric: SelectionMetric::Compliance,
            },
            0.85,
        )];
        assert!(calibrate(&model, &sel, &ctx(), &s).is_err());
    }

    #[test]
    fn unreachable_target_reports_diagnostic() {
        let model = paper_traditional(0.4).latent_model().unwrap();
        let t = [CalibrationTarget::new(
            Statistic::ModeMean {
                mode: 0,
                param: RfParam::Gain,
            },
            50.0,
        )];
        let s = CalibrationSettings {
            n: 10_000,
            ..CalibrationSettings::new(vec![Knob::NfCrossMode], 1)
        };
        let r = calibrate(&model, &t, &ctx(), &s).unwrap();
        assert!(r.diagnostic.is_some());
        assert_eq!(r.model, model);
        assert!(r.residuals[0].residual < -30.0);
    }
}
