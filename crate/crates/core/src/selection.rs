//! Per-die mode selection for the programmable LNA.

use std::cmp::Ordering;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::budget::{classify_receiver, receiver_metrics};
use crate::designs::config::DEFAULT_TARGET_GAIN_DB;
use crate::designs::{PlnaDesign, PlnaMode};
use crate::error::{Error, ReportError, SelectionError};
use crate::format::csv_num;
use crate::montecarlo::{summarize_quantities, DiePopulation, ModeSummary, ReceiverCompliance};
use crate::statmodel::DieSample;
use crate::{ComplianceFlags, ReceiverTargets, RfQuantities, StageTwoLimits};

pub const OUTCOME_CSV_HEADER: [&str; 5] = [
    "die_index",
    "chosen_mode",
    "nf_pass",
    "iip3_pass",
    "power_mw",
];

/// Mode powers of the published PLNA (HG, MG_LP, LG), mW.
const NOMINAL_POWERS_MW: [f64; 3] = [0.672, 0.516, 0.672];

/// Fallback score for Best Receiver when no mode meets the NF target.
pub type ScoreFn = fn(&RfQuantities, &StageTwoLimits, &ReceiverTargets) -> f64;

/// `IIP3_rx (dBm) − NF_rx (dB)`. Higher is better.
pub fn dynamic_range_score(
    q: &RfQuantities,
    limits: &StageTwoLimits,
    _targets: &ReceiverTargets,
) -> f64 {
    let m = receiver_metrics(q, limits);
    m.iip3_dbm() - m.nf_db()
}

/// Selection rules plus the per-mode data they need for tie-breaking.
#[derive(Debug, Clone, Copy)]
pub struct Selector {
    pub powers_mw: [f64; 3],
    pub target_gain_db: f64,
    pub score: ScoreFn,
}

impl Selector {
    pub fn new(powers_mw: [f64; 3], target_gain_db: f64) -> Self {
        Self {
            powers_mw,
            target_gain_db,
            score: dynamic_range_score,
        }
    }

    pub fn for_design(design: &PlnaDesign, target_gain_db: f64) -> Self {
        Self::new(design.mode_powers_mw(), target_gain_db)
    }

    pub fn with_score(mut self, score: ScoreFn) -> Self {
        self.score = score;
        self
    }

    fn deviation(&self, modes: &[RfQuantities], i: usize) -> f64 {
        (modes[i].gain_db - self.target_gain_db).abs()
    }

    /// Smallest gain deviation; ties go to lower power, then HG before LG.
    pub fn best_gain(&self, modes: &[RfQuantities]) -> PlnaMode {
        let pick = (0..3)
            .min_by(|&a, &b| {
                self.deviation(modes, a)
                    .total_cmp(&self.deviation(modes, b))
                    .then(self.powers_mw[a].total_cmp(&self.powers_mw[b]))
                    .then(a.cmp(&b))
            })
            .expect("three modes");
        PlnaMode::ALL[pick]
    }

    fn tier_order(&self, modes: &[RfQuantities], a: usize, b: usize) -> Ordering {
        self.powers_mw[a]
            .total_cmp(&self.powers_mw[b])
            .then(
                self.deviation(modes, a)
                    .total_cmp(&self.deviation(modes, b)),
            )
            .then(a.cmp(&b))
    }

    /// Both specs met, else NF met, else the best fallback score.
    pub fn best_receiver(
        &self,
        modes: &[RfQuantities],
        limits: &StageTwoLimits,
        targets: &ReceiverTargets,
    ) -> PlnaMode {
        let flags: Vec<ComplianceFlags> = modes
            .iter()
            .map(|q| classify_receiver(q, limits, targets))
            .collect();
        self.best_receiver_with_flags(modes, &flags, limits, targets)
    }

    fn best_receiver_with_flags(
        &self,
        modes: &[RfQuantities],
        flags: &[ComplianceFlags],
        limits: &StageTwoLimits,
        targets: &ReceiverTargets,
    ) -> PlnaMode {
        let tier = |f: &ComplianceFlags| {
            if f.both() {
                0
            } else if f.nf_pass {
                1
            } else {
                2
            }
        };
        let best_tier = flags.iter().map(tier).min().expect("three modes");
        let candidates = (0..3).filter(|&i| tier(&flags[i]) == best_tier);
        let pick = if best_tier < 2 {
            candidates.min_by(|&a, &b| self.tier_order(modes, a, b))
        } else {
            let scores: Vec<f64> = modes
                .iter()
                .map(|q| (self.score)(q, limits, targets))
                .collect();
            candidates.min_by(|&a, &b| {
                scores[b]
                    .total_cmp(&scores[a])
                    .then(self.tier_order(modes, a, b))
            })
        };
        PlnaMode::ALL[pick.expect("three modes")]
    }
}

/// Best Gain with the published PLNA's power ordering.
pub fn select_best_gain(die: &DieSample, target_db: f64) -> PlnaMode {
    Selector::new(NOMINAL_POWERS_MW, target_db).best_gain(&die.modes)
}

/// Best Receiver with the published PLNA's power ordering and a 10.5 dB target.
pub fn select_best_receiver(
    die: &DieSample,
    limits: &StageTwoLimits,
    targets: &ReceiverTargets,
) -> PlnaMode {
    Selector::new(NOMINAL_POWERS_MW, DEFAULT_TARGET_GAIN_DB)
        .best_receiver(&die.modes, limits, targets)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SelectionStrategy {
    BestGain { target_db: f64 },
    BestReceiver { target_db: f64 },
    FixedMode { mode: PlnaMode },
}

impl SelectionStrategy {
    pub fn best_gain() -> Self {
        SelectionStrategy::BestGain {
            target_db: DEFAULT_TARGET_GAIN_DB,
        }
    }

    pub fn best_receiver() -> Self {
        SelectionStrategy::BestReceiver {
            target_db: DEFAULT_TARGET_GAIN_DB,
        }
    }

    pub fn name(&self) -> String {
        match self {
            SelectionStrategy::BestGain { .. } => "best-gain".into(),
            SelectionStrategy::BestReceiver { .. } => "best-receiver".into(),
            SelectionStrategy::FixedMode { mode } => {
                format!("fixed-{}", mode.label().to_ascii_lowercase())
            }
        }
    }

    pub fn target_db(&self) -> f64 {
        match *self {
            SelectionStrategy::BestGain { target_db }
            | SelectionStrategy::BestReceiver { target_db } => target_db,
            SelectionStrategy::FixedMode { .. } => DEFAULT_TARGET_GAIN_DB,
        }
    }

    pub fn with_target(self, target_db: f64) -> Self {
        match self {
            SelectionStrategy::BestGain { .. } => SelectionStrategy::BestGain { target_db },
            SelectionStrategy::BestReceiver { .. } => SelectionStrategy::BestReceiver { target_db },
            other => other,
        }
    }
}

impl std::str::FromStr for SelectionStrategy {
    type Err = SelectionParseError;
    /// `best-gain`, `best-receiver`, `fixed-hg`, `fixed-mg_lp`, `fixed-lg`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase().replace('_', "-");
        match lower.as_str() {
            "best-gain" => Ok(Self::best_gain()),
            "best-receiver" => Ok(Self::best_receiver()),
            _ => lower
                .strip_prefix("fixed-")
                .and_then(|m| m.parse::<PlnaMode>().ok())
                .map(|mode| SelectionStrategy::FixedMode { mode })
                .ok_or_else(|| SelectionParseError(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error(
    "unknown strategy '{0}' (expected best-gain, best-receiver, fixed-hg, fixed-mg-lp or fixed-lg)"
)]
pub struct SelectionParseError(pub String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionOutcome {
    pub die_index: u64,
    pub chosen: PlnaMode,
    pub flags: ComplianceFlags,
    pub power_mw: f64,
    pub per_mode: [ComplianceFlags; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub design_id: String,
    pub strategy: SelectionStrategy,
    pub n: usize,
    pub seed: u64,
    pub targets: ReceiverTargets,
    pub limits: StageTwoLimits,
    /// Fraction of dies per mode, HG, MG_LP, LG.
    pub occupancy: [f64; 3],
    pub compliance: f64,
    pub nf_fail: f64,
    pub iip3_fail: f64,
    pub average_power_mw: f64,
    pub post_selection: ModeSummary,
    #[serde(skip)]
    pub outcomes: Vec<SelectionOutcome>,
}

impl SelectionReport {
    pub fn receiver(&self) -> ReceiverCompliance {
        ReceiverCompliance {
            compliance: self.compliance,
            nf_fail: self.nf_fail,
            iip3_fail: self.iip3_fail,
        }
    }

    /// Gains of the chosen modes, in die order.
    pub fn selected_gains(&self, pop: &DiePopulation) -> Vec<f64> {
        self.outcomes
            .iter()
            .zip(&pop.dies)
            .map(|(o, d)| d.modes[o.chosen.index()].gain_db)
            .collect()
    }

    pub fn write_outcomes_csv<W: Write>(&self, out: W) -> Result<(), Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(OUTCOME_CSV_HEADER)
            .map_err(ReportError::from)?;
        for o in &self.outcomes {
            w.write_record([
                o.die_index.to_string(),
                o.chosen.label().to_string(),
                o.flags.nf_pass.to_string(),
                o.flags.iip3_pass.to_string(),
                csv_num(o.power_mw),
            ])
            .map_err(ReportError::from)?;
        }
        w.flush().map_err(|e| ReportError::Io {
            path: "<outcome csv>".into(),
            source: e,
        })?;
        Ok(())
    }
}

pub fn apply_strategy(
    pop: &DiePopulation,
    strategy: SelectionStrategy,
    limits: &StageTwoLimits,
    targets: &ReceiverTargets,
    design: &PlnaDesign,
) -> Result<SelectionReport, Error> {
    apply_with(
        pop,
        strategy,
        limits,
        targets,
        &Selector::for_design(design, strategy.target_db()),
    )
}

/// [`apply_strategy`] with an explicit selector (custom powers or score).
pub fn apply_with(
    pop: &DiePopulation,
    strategy: SelectionStrategy,
    limits: &StageTwoLimits,
    targets: &ReceiverTargets,
    selector: &Selector,
) -> Result<SelectionReport, Error> {
    if pop.mode_count() != 3 {
        return Err(SelectionError::ModeCountMismatch {
            expected: 3,
            found: pop.mode_count(),
        }
        .into());
    }
    if pop.dies.is_empty() {
        return Err(crate::error::StatError::EmptyPopulation.into());
    }
    if let Some(bad) = pop.dies.iter().find(|d| d.modes.len() != 3) {
        return Err(SelectionError::ModeCountMismatch {
            expected: 3,
            found: bad.modes.len(),
        }
        .into());
    }
    let outcomes: Vec<SelectionOutcome> = pop
        .dies
        .par_iter()
        .map(|die| {
            let per_mode: [ComplianceFlags; 3] =
                std::array::from_fn(|i| classify_receiver(&die.modes[i], limits, targets));
            let chosen = match strategy {
                SelectionStrategy::BestGain { .. } => selector.best_gain(&die.modes),
                SelectionStrategy::BestReceiver { .. } => {
                    selector.best_receiver_with_flags(&die.modes, &per_mode, limits, targets)
                }
                SelectionStrategy::FixedMode { mode } => mode,
            };
            SelectionOutcome {
                die_index: die.index,
                chosen,
                flags: per_mode[chosen.index()],
                power_mw: selector.powers_mw[chosen.index()],
                per_mode,
            }
        })
        .collect();

    let n = outcomes.len();
    let mut counts = [0usize; 3];
    let mut power_sum = 0.0;
    for o in &outcomes {
        counts[o.chosen.index()] += 1;
        power_sum += o.power_mw;
    }
    let rx = ReceiverCompliance::from_flags(outcomes.iter().map(|o| o.flags))?;
    let post_selection = summarize_quantities(
        "selected",
        outcomes
            .iter()
            .zip(&pop.dies)
            .map(|(o, d)| &d.modes[o.chosen.index()]),
    )?;
    Ok(SelectionReport {
        design_id: pop.design_id.clone(),
        strategy,
        n,
        seed: pop.seed,
        targets: *targets,
        limits: *limits,
        occupancy: counts.map(|c| c as f64 / n as f64),
        compliance: rx.compliance,
        nf_fail: rx.nf_fail,
        iip3_fail: rx.iip3_fail,
        average_power_mw: power_sum / n as f64,
        post_selection,
        outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::budget::derive_stage2_limits;
    use crate::designs::paper::paper_plna;
    use crate::montecarlo::generate_population;
    use crate::LnaSpecCorner;

    fn q(g: f64, nf: f64, i: f64) -> RfQuantities {
        RfQuantities {
            gain_db: g,
            nf_db: nf,
            iip3_dbm: i,
            s11_db: -20.0,
            s22_db: -15.0,
        }
    }

    fn die(modes: [RfQuantities; 3]) -> DieSample {
        DieSample {
            index: 0,
            factors: vec![],
            modes: modes.to_vec(),
        }
    }

    fn limits() -> StageTwoLimits {
        derive_stage2_limits(&LnaSpecCorner::default(), &ReceiverTargets::default()).unwrap()
    }

    #[test]
    fn best_gain_examples() {
        let d = die([q(11.9, 2.5, 2.3), q(10.5, 2.9, -1.5), q(9.5, 3.6, 2.4)]);
        assert_eq!(select_best_gain(&d, 10.5), PlnaMode::MgLp);
        let d = die([q(10.6, 2.5, 2.3), q(8.9, 2.9, -1.5), q(7.9, 3.6, 2.4)]);
        assert_eq!(select_best_gain(&d, 10.5), PlnaMode::Hg);
        let d = die([q(11.0, 2.5, 2.3), q(10.0, 2.9, -1.5), q(7.9, 3.6, 2.4)]);
        assert_eq!(select_best_gain(&d, 10.5), PlnaMode::MgLp);
        let d = die([q(11.0, 2.5, 2.3), q(7.0, 2.9, -1.5), q(10.0, 3.6, 2.4)]);
        assert_eq!(select_best_gain(&d, 10.5), PlnaMode::Hg);
    }

    #[test]
    fn best_receiver_examples() {
        let (l, t) = (limits(), ReceiverTargets::default());
        let d = die([q(10.4, 2.5, 2.3), q(8.9, 2.9, 0.0), q(9.5, 3.6, 2.4)]);
        assert!(!classify_receiver(&d.modes[1], &l, &t).nf_pass);
        assert!(classify_receiver(&d.modes[0], &l, &t).both());
        assert_eq!(select_best_receiver(&d, &l, &t), PlnaMode::Hg);

        let d = die([q(11.0, 2.5, 2.3), q(10.5, 2.9, 0.0), q(10.2, 2.9, 2.4)]);
        assert_eq!(select_best_receiver(&d, &l, &t), PlnaMode::MgLp);

        let d = die([q(8.0, 3.0, -3.0), q(7.5, 3.2, 2.0), q(7.0, 3.6, 5.0)]);
        let scores: Vec<f64> = d
            .modes
            .iter()
            .map(|m| dynamic_range_score(m, &l, &t))
            .collect();
        assert!(d
            .modes
            .iter()
            .all(|m| !classify_receiver(m, &l, &t).nf_pass));
        let brute = (0..3)
            .max_by(|&a, &b| scores[a].total_cmp(&scores[b]))
            .unwrap();
        assert_eq!(select_best_receiver(&d, &l, &t), PlnaMode::ALL[brute]);
    }

    #[test]
    fn dynamic_range_of_mean_mg_die() {
        let s = dynamic_range_score(&q(10.5, 2.9, -1.5), &limits(), &ReceiverTargets::default());
        assert!((s - (-24.1010107312072)).abs() < 1e-9, "{s}");
    }

    #[test]
    fn score_monotone_in_each_component() {
        let (l, t) = (limits(), ReceiverTargets::default());
        let base = dynamic_range_score(&q(10.0, 2.9, -1.5), &l, &t);
        assert!(dynamic_range_score(&q(10.0, 2.9, -1.0), &l, &t) > base);
        assert!(dynamic_range_score(&q(10.0, 2.7, -1.5), &l, &t) > base);
    }

    #[test]
    fn zero_variance_population() {
        let mut d = paper_plna();
        for m in &mut d.modes {
            for p in crate::statmodel::RfParam::ALL {
                m.variability.get_mut(p).sigma = 0.0;
            }
        }
        let model = d.latent_model().unwrap();
        let pop = generate_population(&d.id, &model, 50, 1).unwrap();
        let (l, t) = (limits(), ReceiverTargets::default());
        for s in [
            SelectionStrategy::best_gain(),
            SelectionStrategy::best_receiver(),
        ] {
            let r = apply_strategy(&pop, s, &l, &t, &d).unwrap();
            assert_eq!(r.compliance, 1.0);
            assert_eq!(r.occupancy, [0.0, 1.0, 0.0]);
            assert!((r.average_power_mw - 0.516).abs() < 1e-12);
        }
    }

    #[test]
    fn mode_count_mismatch() {
        let d = paper_plna();
        let model = crate::designs::paper::paper_traditional(0.4)
            .latent_model()
            .unwrap();
        let pop = generate_population("t", &model, 10, 1).unwrap();
        let err = apply_strategy(
            &pop,
            SelectionStrategy::best_gain(),
            &limits(),
            &ReceiverTargets::default(),
            &d,
        );
        assert!(matches!(
            err,
            Err(Error::Selection(SelectionError::ModeCountMismatch {
                expected: 3,
                found: 1
            }))
        ));
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!(
            "best-gain".parse::<SelectionStrategy>().unwrap(),
            SelectionStrategy::best_gain()
        );
        assert_eq!(
            "fixed-mg-lp".parse::<SelectionStrategy>().unwrap(),
            SelectionStrategy::FixedMode {
                mode: PlnaMode::MgLp
            }
        );
        assert!("worst".parse::<SelectionStrategy>().is_err());
        for s in [
            SelectionStrategy::best_gain(),
            SelectionStrategy::best_receiver(),
            SelectionStrategy::FixedMode { mode: PlnaMode::Lg },
        ] {
            assert_eq!(s.name().parse::<SelectionStrategy>().unwrap(), s);
        }
    }
}
