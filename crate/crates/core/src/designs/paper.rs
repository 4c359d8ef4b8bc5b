//! Built-in dataset: the published 130 nm / 1.2 V LNA tables and the
//! marginals fitted from them.
//!
//! Extreme values (per-parameter min/max over 1000 Monte Carlo runs) enter
//! the fits as quantiles at `1/1001` and `1000/1001`. S11/S22 table entries
//! are worst cases, not means.

use super::{
    ModeSpec, PlnaDesign, PlnaMode, Sizing, TraditionalDesign, DEFAULT_BIAS_OVERHEAD_MA,
    DEFAULT_SUPPLY_V,
};
use crate::selection::{SelectionStrategy, Selector};
use crate::statmodel::calibrate::{
    calibrate, CalibrationContext, CalibrationResult, CalibrationSettings, CalibrationTarget, Knob,
    SelectionMetric, Statistic,
};
use crate::statmodel::fit::{
    fit_location_scale, fit_sigma, fit_sigma_from_quantile, fit_two_tails_rounded_mean,
    sigma_upper_bound, QuantileConstraint,
};
use crate::statmodel::normal::inverse_normal_cdf;
use crate::statmodel::{Bounds, CorrelationTargets, MarginalSpec, ModeMarginals, RfParam};
use crate::{Error, LnaSpecCorner, ReceiverTargets, StageTwoLimits};

/// Runs behind every published min/max.
pub const PAPER_RUNS: usize = 1000;
pub const DEFAULT_NF_SIGMA_DB: f64 = 0.1;
/// Largest tail rate compatible with "0 %" out of 1000 runs.
pub const ZERO_VIOLATION_RATE: f64 = 0.0005;
pub const TRADITIONAL_S11_SIGMA_DB: f64 = 2.0;
/// Published means carry one decimal.
pub const MEAN_ROUNDING_DB: f64 = 0.05;
/// Post-selection means shared by all PLNA modes.
pub const PLNA_S11_MEAN_DB: f64 = -23.0;
pub const PLNA_S22_MEAN_DB: f64 = -19.0;

/// Monte Carlo summary of one traditional LNA (min/mean/max and tail rates).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraditionalTable {
    pub current_ma: f64,
    pub sizing: Sizing,
    pub gain_min: f64,
    pub gain_mean: f64,
    pub gain_max: f64,
    pub nf_mean: f64,
    pub iip3_min: f64,
    pub iip3_mean: f64,
    pub s11_worst: f64,
    pub s22_worst: f64,
    pub viol_gain_low: f64,
    pub viol_gain_high: f64,
    pub viol_nf: f64,
    pub viol_iip3: f64,
    pub viol_s11: f64,
    pub viol_s22: f64,
    pub rx_both: f64,
    pub rx_nf_fail: f64,
    pub rx_iip3_fail: f64,
}

const fn sizing(w1: f64, ls: f64, lg: f64, cx: f64, c1: f64, cp: f64) -> Sizing {
    Sizing {
        w1_um: w1,
        l1_um: 0.12,
        w3_um: None,
        ls_nh: ls,
        lg_nh: lg,
        cx_ff: cx,
        c1_ff: c1,
        cp_pf: cp,
        ld_nh: 10.5,
    }
}

pub const TRADITIONAL_TABLES: [TraditionalTable; 4] = [
    TraditionalTable {
        current_ma: 0.4,
        sizing: sizing(40.0, 2.51, 11.8, 246.0, 439.0, 1.71),
        gain_min: 8.64,
        gain_mean: 10.4,
        gain_max: 11.7,
        nf_mean: 2.8,
        iip3_min: -10.4,
        iip3_mean: 0.7,
        s11_worst: -15.0,
        s22_worst: -6.1,
        viol_gain_low: 0.22,
        viol_gain_high: 0.11,
        viol_nf: 0.0,
        viol_iip3: 0.14,
        viol_s11: 0.0,
        viol_s22: 0.03,
        rx_both: 0.77,
        rx_nf_fail: 0.21,
        rx_iip3_fail: 0.06,
    },
    TraditionalTable {
        current_ma: 0.5,
        sizing: sizing(56.0, 2.51, 7.40, 383.0, 429.0, 1.62),
        gain_min: 8.23,
        gain_mean: 10.4,
        gain_max: 11.6,
        nf_mean: 2.8,
        iip3_min: -9.6,
        iip3_mean: 4.2,
        s11_worst: -16.0,
        s22_worst: -6.3,
        viol_gain_low: 0.23,
        viol_gain_high: 0.10,
        viol_nf: 0.0,
        viol_iip3: 0.08,
        viol_s11: 0.0,
        viol_s22: 0.03,
        rx_both: 0.79,
        rx_nf_fail: 0.21,
        rx_iip3_fail: 0.003,
    },
    TraditionalTable {
        current_ma: 0.6,
        sizing: sizing(64.0, 2.51, 6.06, 453.0, 425.0, 1.61),
        gain_min: 8.92,
        gain_mean: 10.5,
        gain_max: 11.6,
        nf_mean: 2.7,
        iip3_min: -6.6,
        iip3_mean: 5.4,
        s11_worst: -17.0,
        s22_worst: -6.4,
        viol_gain_low: 0.16,
        viol_gain_high: 0.11,
        viol_nf: 0.0,
        viol_iip3: 0.01,
        viol_s11: 0.0,
        viol_s22: 0.02,
        rx_both: 0.86,
        rx_nf_fail: 0.14,
        rx_iip3_fail: 0.0,
    },
    TraditionalTable {
        current_ma: 0.7,
        sizing: sizing(80.0, 2.65, 5.02, 532.0, 416.0, 1.54),
        gain_min: 8.67,
        gain_mean: 10.4,
        gain_max: 11.4,
        nf_mean: 2.7,
        iip3_min: -5.8,
        iip3_mean: 5.4,
        s11_worst: -17.0,
        s22_worst: -6.8,
        viol_gain_low: 0.16,
        viol_gain_high: 0.07,
        viol_nf: 0.0,
        viol_iip3: 0.001,
        viol_s11: 0.0,
        viol_s22: 0.02,
        rx_both: 0.86,
        rx_nf_fail: 0.14,
        rx_iip3_fail: 0.0,
    },
];

/// Monte Carlo summary of one PLNA mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlnaModeTable {
    pub mode: PlnaMode,
    pub supply_current_ma: f64,
    pub gain_offset_db: f64,
    pub gain_min: f64,
    pub gain_mean: f64,
    pub gain_max: f64,
    pub nf_mean: f64,
    pub iip3_min: f64,
    pub iip3_mean: f64,
    pub s11_worst: f64,
    pub s22_worst: f64,
}

pub const PLNA_MODE_TABLES: [PlnaModeTable; 3] = [
    PlnaModeTable {
        mode: PlnaMode::Hg,
        supply_current_ma: 0.56,
        gain_offset_db: 1.5,
        gain_min: 10.1,
        gain_mean: 11.9,
        gain_max: 13.1,
        nf_mean: 2.5,
        iip3_min: -8.9,
        iip3_mean: 2.3,
        s11_worst: -14.0,
        s22_worst: -8.3,
    },
    PlnaModeTable {
        mode: PlnaMode::MgLp,
        supply_current_ma: 0.43,
        gain_offset_db: 0.0,
        gain_min: 8.48,
        gain_mean: 10.5,
        gain_max: 11.9,
        nf_mean: 2.9,
        iip3_min: -11.0,
        iip3_mean: -1.5,
        s11_worst: -16.0,
        s22_worst: -8.1,
    },
    PlnaModeTable {
        mode: PlnaMode::Lg,
        supply_current_ma: 0.56,
        gain_offset_db: -1.0,
        gain_min: 7.58,
        gain_mean: 9.5,
        gain_max: 10.8,
        nf_mean: 3.6,
        iip3_min: -9.2,
        iip3_mean: 2.4,
        s11_worst: -14.0,
        s22_worst: -8.2,
    },
];

pub const PLNA_SIZING: Sizing = Sizing {
    w1_um: 42.0,
    l1_um: 0.12,
    w3_um: Some(14.0),
    ls_nh: 2.38,
    lg_nh: 11.23,
    cx_ff: 246.0,
    c1_ff: 426.0,
    cp_pf: 1.59,
    ld_nh: 10.5,
};
pub const PLNA_CORE_CURRENT_MA: f64 = 0.4;

/// Post-selection results for one strategy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionTable {
    pub gain_min: f64,
    pub gain_mean: f64,
    pub gain_max: f64,
    pub nf_mean: f64,
    pub nf_max: f64,
    pub iip3_min: f64,
    pub iip3_mean: f64,
    pub s11_mean: f64,
    pub s11_max: f64,
    pub s22_mean: f64,
    pub s22_max: f64,
    pub rx_both: f64,
    pub rx_nf_fail: f64,
    pub rx_iip3_fail: f64,
}

pub const BEST_GAIN_TABLE: SelectionTable = SelectionTable {
    gain_min: 9.73,
    gain_mean: 10.5,
    gain_max: 11.3,
    nf_mean: 2.4,
    nf_max: 2.99,
    iip3_min: -9.0,
    iip3_mean: -0.7,
    s11_mean: -23.0,
    s11_max: -14.0,
    s22_mean: -19.0,
    s22_max: -8.1,
    rx_both: 0.85,
    rx_nf_fail: 0.07,
    rx_iip3_fail: 0.09,
};

pub const BEST_RECEIVER_TABLE: SelectionTable = SelectionTable {
    gain_min: 9.97,
    gain_mean: 10.7,
    gain_max: 11.8,
    nf_mean: 2.3,
    nf_max: 2.98,
    iip3_min: -8.9,
    iip3_mean: -0.9,
    s11_mean: -24.0,
    s11_max: -14.0,
    s22_mean: -19.0,
    s22_max: -8.1,
    rx_both: 0.92,
    rx_nf_fail: 0.0,
    rx_iip3_fail: 0.08,
};

/// Power comparisons quoted for the ΔS/ΔP figure, as (ΔS, ΔP) fractions.
pub mod comparison_anchors {
    pub const BEST_GAIN_VS_0P4: (f64, f64) = (0.08, 0.09);
    pub const BEST_GAIN_VS_0P6: (f64, f64) = (0.0, -0.26);
    pub const BEST_GAIN_VS_0P7_POWER: f64 = -0.35;
    pub const BEST_RECEIVER_VS_0P4: (f64, f64) = (0.15, 0.05);
}

pub fn traditional_id(current_ma: f64) -> String {
    format!("paper-{current_ma:.1}mA")
}

pub const PLNA_ID: &str = "paper-plna";

fn nf_marginal(mean: f64, spec: &LnaSpecCorner) -> MarginalSpec {
    let sigma = if mean < spec.nf_max_db {
        sigma_upper_bound(mean, spec.nf_max_db, ZERO_VIOLATION_RATE)
            .expect("mean below limit")
            .min(DEFAULT_NF_SIGMA_DB)
    } else {
        DEFAULT_NF_SIGMA_DB
    };
    MarginalSpec::new(mean, sigma)
}

fn reflection(mean: f64, sigma: f64) -> MarginalSpec {
    MarginalSpec::new(mean, sigma).with_bounds(Bounds::upper(0.0))
}

/// Marginals of one traditional design fitted from its table row.
pub fn traditional_marginals(t: &TraditionalTable, spec: &LnaSpecCorner) -> ModeMarginals {
    let (gain_mean, gain) = fit_two_tails_rounded_mean(
        t.gain_mean,
        MEAN_ROUNDING_DB,
        QuantileConstraint::below(spec.gain_min_db, t.viol_gain_low),
        QuantileConstraint::above(spec.gain_max_db, t.viol_gain_high),
    )
    .expect("published gain tails are consistent");
    let iip3_sigma = fit_sigma_from_quantile(t.iip3_mean, spec.iip3_min_dbm, t.viol_iip3)
        .expect("published IIP3 tail is consistent");
    let z_max =
        inverse_normal_cdf(QuantileConstraint::sample_max(0.0, PAPER_RUNS).prob).expect("valid p");
    let s11_mean = t.s11_worst - z_max * TRADITIONAL_S11_SIGMA_DB;
    let (s22_mean, s22_sigma) = fit_location_scale(
        QuantileConstraint::above(spec.s22_max_db, t.viol_s22),
        QuantileConstraint::sample_max(t.s22_worst, PAPER_RUNS),
    )
    .expect("S22 tail below worst case");
    ModeMarginals {
        gain: MarginalSpec::new(gain_mean, gain.sigma),
        nf: nf_marginal(t.nf_mean, spec),
        iip3: MarginalSpec::new(t.iip3_mean, iip3_sigma),
        s11: reflection(s11_mean, TRADITIONAL_S11_SIGMA_DB),
        s22: reflection(s22_mean, s22_sigma),
    }
}

/// Marginals of one PLNA mode fitted from its min/mean/max row.
pub fn plna_mode_marginals(t: &PlnaModeTable, spec: &LnaSpecCorner) -> ModeMarginals {
    let gain = fit_sigma(
        t.gain_mean,
        &[
            QuantileConstraint::sample_min(t.gain_min, PAPER_RUNS),
            QuantileConstraint::sample_max(t.gain_max, PAPER_RUNS),
        ],
    )
    .expect("gain extremes bracket the mean");
    let lo = QuantileConstraint::sample_min(t.iip3_min, PAPER_RUNS);
    let iip3_sigma =
        fit_sigma_from_quantile(t.iip3_mean, lo.value, lo.prob).expect("IIP3 min below mean");
    let hi = |worst: f64, mean: f64| {
        let q = QuantileConstraint::sample_max(worst, PAPER_RUNS);
        fit_sigma_from_quantile(mean, q.value, q.prob).expect("worst case above mean")
    };
    ModeMarginals {
        gain: MarginalSpec::new(t.gain_mean, gain.sigma),
        nf: nf_marginal(t.nf_mean, spec),
        iip3: MarginalSpec::new(t.iip3_mean, iip3_sigma),
        s11: reflection(PLNA_S11_MEAN_DB, hi(t.s11_worst, PLNA_S11_MEAN_DB)),
        s22: reflection(PLNA_S22_MEAN_DB, hi(t.s22_worst, PLNA_S22_MEAN_DB)),
    }
}

pub fn paper_traditional(current_ma: f64) -> TraditionalDesign {
    let t = TRADITIONAL_TABLES
        .iter()
        .find(|t| (t.current_ma - current_ma).abs() < 1e-9)
        .unwrap_or_else(|| panic!("no published design at {current_ma} mA"));
    let spec = LnaSpecCorner::default();
    TraditionalDesign {
        id: traditional_id(t.current_ma),
        nominal_current_ma: t.current_ma,
        supply_voltage_v: DEFAULT_SUPPLY_V,
        bias_overhead_ma: DEFAULT_BIAS_OVERHEAD_MA,
        sizing: Some(t.sizing),
        variability: traditional_marginals(t, &spec),
        correlation: CorrelationTargets::default(),
    }
}

pub fn paper_plna() -> PlnaDesign {
    let spec = LnaSpecCorner::default();
    PlnaDesign {
        id: PLNA_ID.into(),
        supply_voltage_v: DEFAULT_SUPPLY_V,
        w1_um: PLNA_SIZING.w1_um,
        w3_um: PLNA_SIZING.w3_um.unwrap_or(0.0),
        core_current_ma: PLNA_CORE_CURRENT_MA,
        sizing: Some(PLNA_SIZING),
        modes: PLNA_MODE_TABLES
            .iter()
            .map(|t| ModeSpec {
                mode: t.mode,
                supply_current_ma: t.supply_current_ma,
                gain_offset_db: t.gain_offset_db,
                variability: plna_mode_marginals(t, &spec),
            })
            .collect(),
        correlation: CorrelationTargets::default(),
    }
}

/// Average PLNA power implied by each strategy's power anchors, mW.
pub fn anchor_average_powers() -> (f64, f64) {
    use comparison_anchors::*;
    let base = |c: f64| paper_traditional(c).power_mw();
    let bg = [
        base(0.4) * (1.0 + BEST_GAIN_VS_0P4.1),
        base(0.6) * (1.0 + BEST_GAIN_VS_0P6.1),
        base(0.7) * (1.0 + BEST_GAIN_VS_0P7_POWER),
    ];
    let br = base(0.4) * (1.0 + BEST_RECEIVER_VS_0P4.1);
    (bg.iter().sum::<f64>() / bg.len() as f64, br)
}

/// Post-selection statistics the PLNA's free parameters are tuned against:
/// compliance and failure rates for both strategies, the anchored average
/// powers, and the extremes of the Best Gain gain distribution.
pub fn plna_calibration_targets(target_gain_db: f64) -> Vec<CalibrationTarget> {
    let bg = SelectionStrategy::BestGain {
        target_db: target_gain_db,
    };
    let br = SelectionStrategy::BestReceiver {
        target_db: target_gain_db,
    };
    let (bg_power, br_power) = anchor_average_powers();
    let t = |strategy, metric, value| {
        CalibrationTarget::new(Statistic::Selection { strategy, metric }, value)
    };
    let lo = QuantileConstraint::sample_min(BEST_GAIN_TABLE.gain_min, PAPER_RUNS);
    let hi = QuantileConstraint::sample_max(BEST_GAIN_TABLE.gain_max, PAPER_RUNS);
    let mut out = Vec::new();
    for (s, table) in [(bg, &BEST_GAIN_TABLE), (br, &BEST_RECEIVER_TABLE)] {
        out.push(t(s, SelectionMetric::Compliance, table.rx_both));
        out.push(t(s, SelectionMetric::NfFail, table.rx_nf_fail));
        out.push(t(s, SelectionMetric::Iip3Fail, table.rx_iip3_fail));
    }
    out.push(t(bg, SelectionMetric::AveragePower, bg_power));
    out.push(t(br, SelectionMetric::AveragePower, br_power));
    out.push(
        t(
            bg,
            SelectionMetric::GainQuantile { prob: lo.prob },
            lo.value,
        )
        .weighted(0.05),
    );
    out.push(
        t(
            bg,
            SelectionMetric::GainQuantile { prob: hi.prob },
            hi.value,
        )
        .weighted(0.05),
    );
    out
}

/// Per-mode gain sigmas plus the gain and IIP3 correlation structure.
pub fn plna_calibration_knobs() -> Vec<Knob> {
    let mut knobs: Vec<Knob> = PlnaMode::ALL
        .iter()
        .map(|m| Knob::Sigma {
            mode: m.index(),
            param: RfParam::Gain,
        })
        .collect();
    knobs.extend([Knob::GainCrossMode, Knob::Iip3CrossMode, Knob::GainIip3]);
    knobs
}

/// Seed of the common random numbers used by [`calibrate_plna`] by default.
pub const PLNA_CALIBRATION_SEED: u64 = 2024;

/// Tune the PLNA's gain sigmas and correlations against the published
/// post-selection results with default search settings. Returns the updated
/// design and the search record.
pub fn calibrate_plna(
    design: &PlnaDesign,
    spec: &LnaSpecCorner,
    limits: &StageTwoLimits,
    targets: &ReceiverTargets,
    target_gain_db: f64,
    seed: u64,
) -> Result<(PlnaDesign, CalibrationResult), Error> {
    let settings = CalibrationSettings::new(plna_calibration_knobs(), seed);
    calibrate_plna_with(design, spec, limits, targets, target_gain_db, &settings)
}

/// [`calibrate_plna`] with explicit settings.
pub fn calibrate_plna_with(
    design: &PlnaDesign,
    spec: &LnaSpecCorner,
    limits: &StageTwoLimits,
    targets: &ReceiverTargets,
    target_gain_db: f64,
    settings: &CalibrationSettings,
) -> Result<(PlnaDesign, CalibrationResult), Error> {
    let ctx = CalibrationContext {
        spec: *spec,
        limits: *limits,
        targets: *targets,
        selector: Some(Selector::for_design(design, target_gain_db)),
    };
    let result = calibrate(
        &design.latent_model()?,
        &plna_calibration_targets(target_gain_db),
        &ctx,
        settings,
    )?;
    let mut out = design.clone();
    out.adopt_model(&result.model)?;
    Ok((out, result))
}

/// The four traditional designs plus the PLNA.
#[derive(Debug, Clone, PartialEq)]
pub struct PaperDesigns {
    pub traditional: Vec<TraditionalDesign>,
    pub plna: PlnaDesign,
}

pub fn builtin_paper_designs() -> PaperDesigns {
    PaperDesigns {
        traditional: TRADITIONAL_TABLES
            .iter()
            .map(|t| paper_traditional(t.current_ma))
            .collect(),
        plna: paper_plna(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn traditional_gain_fit_uses_both_tails() {
        // 0.6 mA: the exact two-tail location sits just below 10.45.
        let d = paper_traditional(0.6);
        assert!((d.variability.gain.mean - 10.45).abs() < 1e-12);
        let lo = fit_sigma_from_quantile(10.45, 10.0, 0.16).unwrap();
        let hi = fit_sigma_from_quantile(10.45, 11.0, 0.89).unwrap();
        assert!((d.variability.gain.sigma - 0.5 * (lo + hi)).abs() < 1e-12);
        // 0.4 mA: both tails are met exactly inside the rounding interval.
        let d = paper_traditional(0.4);
        assert!((d.variability.gain.mean - 10.4).abs() <= MEAN_ROUNDING_DB);
        let lo = fit_sigma_from_quantile(d.variability.gain.mean, 10.0, 0.22).unwrap();
        assert!((d.variability.gain.sigma - lo).abs() < 1e-9);
    }

    #[test]
    fn nf_sigma_respects_zero_violation_bound() {
        let spec = LnaSpecCorner::default();
        for t in &TRADITIONAL_TABLES {
            let m = traditional_marginals(t, &spec);
            assert!(m.nf.sigma <= DEFAULT_NF_SIGMA_DB);
            let z = (spec.nf_max_db - m.nf.mean) / m.nf.sigma;
            assert!(z >= 3.29, "{}: z = {z}", t.current_ma);
        }
        let lg = plna_mode_marginals(&PLNA_MODE_TABLES[2], &spec);
        assert_eq!(lg.nf.sigma, DEFAULT_NF_SIGMA_DB);
    }

    #[test]
    fn s22_reproduces_tail_and_worst_case() {
        let spec = LnaSpecCorner::default();
        let m = traditional_marginals(&TRADITIONAL_TABLES[0], &spec);
        let z_tail = (spec.s22_max_db - m.s22.mean) / m.s22.sigma;
        assert!((crate::statmodel::normal::normal_cdf(z_tail) - 0.97).abs() < 1e-12);
        assert!(m.s22.mean < -10.0);
    }

    #[test]
    fn plna_mg_iip3_sigma_from_extreme() {
        let d = paper_plna();
        let mg = &d.mode(PlnaMode::MgLp).variability;
        assert_eq!(mg.iip3.mean, -1.5);
        // (−11.0 − (−1.5)) / z(1/1001)
        assert!((mg.iip3.sigma - 9.5 / 3.090_529_137_925_268).abs() < 1e-9);
    }

    #[test]
    fn builtin_validates() {
        let all = builtin_paper_designs();
        assert_eq!(all.traditional.len(), 4);
        for d in &all.traditional {
            d.validate().unwrap();
            d.latent_model().unwrap().validate().unwrap();
        }
        all.plna.validate().unwrap();
        all.plna.latent_model().unwrap().validate().unwrap();
        assert_eq!(all.traditional[0].id, "paper-0.4mA");
    }
}
