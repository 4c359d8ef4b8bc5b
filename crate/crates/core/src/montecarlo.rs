//! Deterministic Monte Carlo populations and their summary statistics.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::budget::classify_receiver;
use crate::error::{Error, StatError};
use crate::format::csv_num;
use crate::statmodel::{sample_die, DieSample, LatentDieModel, RfParam};
use crate::{LnaSpecCorner, ReceiverTargets, RfQuantities, StageTwoLimits};

/// Population size used by the acceptance runs.
pub const DEFAULT_N: usize = 100_000;

pub const POPULATION_CSV_HEADER: [&str; 7] = [
    "die_index",
    "mode",
    "gain_db",
    "nf_db",
    "iip3_dbm",
    "s11_db",
    "s22_db",
];

#[derive(Debug, Clone, PartialEq)]
pub struct DiePopulation {
    pub design_id: String,
    pub seed: u64,
    pub mode_labels: Vec<String>,
    pub dies: Vec<DieSample>,
}

impl DiePopulation {
    pub fn n(&self) -> usize {
        self.dies.len()
    }

    pub fn mode_count(&self) -> usize {
        self.mode_labels.len()
    }

    pub fn mode_values(&self, mode: usize) -> impl Iterator<Item = &RfQuantities> + '_ {
        self.dies.iter().map(move |d| &d.modes[mode])
    }
}

/// Dies `0..n` of `model`. Die `i` depends only on `(model, seed, i)`.
pub fn generate_population(
    design_id: &str,
    model: &LatentDieModel,
    n: usize,
    seed: u64,
) -> Result<DiePopulation, StatError> {
    if n == 0 {
        return Err(StatError::ZeroSize);
    }
    model.validate()?;
    let dies: Vec<DieSample> = (0..n as u64)
        .into_par_iter()
        .map(|i| sample_die(model, seed, i))
        .collect();
    Ok(DiePopulation {
        design_id: design_id.to_string(),
        seed,
        mode_labels: model.mode_labels(),
        dies,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamStats {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

/// Streaming min/mean/max with an incremental mean update.
#[derive(Debug, Clone, Copy)]
struct Accumulator {
    count: u64,
    min: f64,
    mean: f64,
    max: f64,
}

impl Accumulator {
    fn new() -> Self {
        Self {
            count: 0,
            min: f64::INFINITY,
            mean: 0.0,
            max: f64::NEG_INFINITY,
        }
    }

    fn push(&mut self, x: f64) {
        self.count += 1;
        self.mean += (x - self.mean) / self.count as f64;
        self.min = self.min.min(x);
        self.max = self.max.max(x);
    }

    fn finish(self) -> ParamStats {
        ParamStats {
            min: self.min,
            mean: self.mean.clamp(self.min, self.max),
            max: self.max,
        }
    }
}

/// Min/mean/max of all five parameters for one mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub label: String,
    pub gain_db: ParamStats,
    pub nf_db: ParamStats,
    pub iip3_dbm: ParamStats,
    pub s11_db: ParamStats,
    pub s22_db: ParamStats,
}

impl ModeSummary {
    pub fn get(&self, p: RfParam) -> &ParamStats {
        match p {
            RfParam::Gain => &self.gain_db,
            RfParam::Nf => &self.nf_db,
            RfParam::Iip3 => &self.iip3_dbm,
            RfParam::S11 => &self.s11_db,
            RfParam::S22 => &self.s22_db,
        }
    }
}

/// Summary of any non-empty sequence of parameter sets.
pub fn summarize_quantities<'a>(
    label: &str,
    values: impl IntoIterator<Item = &'a RfQuantities>,
) -> Result<ModeSummary, StatError> {
    let mut acc = [Accumulator::new(); 5];
    for q in values {
        for (a, p) in acc.iter_mut().zip(RfParam::ALL) {
            a.push(p.get(q));
        }
    }
    if acc[0].count == 0 {
        return Err(StatError::EmptyPopulation);
    }
    let [g, nf, i, s11, s22] = acc.map(Accumulator::finish);
    Ok(ModeSummary {
        label: label.to_string(),
        gain_db: g,
        nf_db: nf,
        iip3_dbm: i,
        s11_db: s11,
        s22_db: s22,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub design_id: String,
    pub n: usize,
    pub modes: Vec<ModeSummary>,
}

pub fn summarize(pop: &DiePopulation) -> Result<SummaryStats, StatError> {
    if pop.dies.is_empty() {
        return Err(StatError::EmptyPopulation);
    }
    let modes = pop
        .mode_labels
        .iter()
        .enumerate()
        .map(|(m, label)| summarize_quantities(label, pop.mode_values(m)))
        .collect::<Result<_, _>>()?;
    Ok(SummaryStats {
        design_id: pop.design_id.clone(),
        n: pop.n(),
        modes,
    })
}

/// One LNA-level spec clause; each is checked on its own.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpecClause {
    GainLow,
    GainHigh,
    NfHigh,
    Iip3Low,
    S11High,
    S22High,
}

impl SpecClause {
    pub const ALL: [SpecClause; 6] = [
        SpecClause::GainLow,
        SpecClause::GainHigh,
        SpecClause::NfHigh,
        SpecClause::Iip3Low,
        SpecClause::S11High,
        SpecClause::S22High,
    ];

    pub fn violated(self, q: &RfQuantities, spec: &LnaSpecCorner) -> bool {
        match self {
            SpecClause::GainLow => q.gain_db < spec.gain_min_db,
            SpecClause::GainHigh => q.gain_db > spec.gain_max_db,
            SpecClause::NfHigh => q.nf_db > spec.nf_max_db,
            SpecClause::Iip3Low => q.iip3_dbm < spec.iip3_min_dbm,
            SpecClause::S11High => q.s11_db > spec.s11_max_db,
            SpecClause::S22High => q.s22_db > spec.s22_max_db,
        }
    }

    /// Row label, e.g. `G<10 dB`.
    pub fn describe(self, spec: &LnaSpecCorner) -> String {
        let v = |x: f64| crate::format::sig(x, 4);
        match self {
            SpecClause::GainLow => format!("G<{} dB", v(spec.gain_min_db)),
            SpecClause::GainHigh => format!("G>{} dB", v(spec.gain_max_db)),
            SpecClause::NfHigh => format!("NF>{} dB", v(spec.nf_max_db)),
            SpecClause::Iip3Low => format!("IIP3<{} dBm", v(spec.iip3_min_dbm)),
            SpecClause::S11High => format!("S11>{} dB", v(spec.s11_max_db)),
            SpecClause::S22High => format!("S22>{} dB", v(spec.s22_max_db)),
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            SpecClause::GainLow => "gain_low",
            SpecClause::GainHigh => "gain_high",
            SpecClause::NfHigh => "nf_high",
            SpecClause::Iip3Low => "iip3_low",
            SpecClause::S11High => "s11_high",
            SpecClause::S22High => "s22_high",
        }
    }
}

/// Violation fraction per clause, in [`SpecClause::ALL`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationRates {
    pub label: String,
    pub rates: [f64; 6],
}

impl ViolationRates {
    pub fn get(&self, clause: SpecClause) -> f64 {
        self.rates[SpecClause::ALL
            .iter()
            .position(|&c| c == clause)
            .expect("clause listed")]
    }
}

pub fn violation_rates_of<'a>(
    label: &str,
    values: impl IntoIterator<Item = &'a RfQuantities>,
    spec: &LnaSpecCorner,
) -> Result<ViolationRates, StatError> {
    let mut counts = [0u64; 6];
    let mut n = 0u64;
    for q in values {
        n += 1;
        for (c, clause) in counts.iter_mut().zip(SpecClause::ALL) {
            *c += u64::from(clause.violated(q, spec));
        }
    }
    if n == 0 {
        return Err(StatError::EmptyPopulation);
    }
    Ok(ViolationRates {
        label: label.to_string(),
        rates: counts.map(|c| c as f64 / n as f64),
    })
}

/// Per-mode violation rates.
pub fn violation_rates(
    pop: &DiePopulation,
    spec: &LnaSpecCorner,
) -> Result<Vec<ViolationRates>, StatError> {
    if pop.dies.is_empty() {
        return Err(StatError::EmptyPopulation);
    }
    pop.mode_labels
        .iter()
        .enumerate()
        .map(|(m, label)| violation_rates_of(label, pop.mode_values(m), spec))
        .collect()
}

/// Receiver-level compliance fractions. Fail categories may overlap.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ReceiverCompliance {
    pub compliance: f64,
    pub nf_fail: f64,
    pub iip3_fail: f64,
}

impl ReceiverCompliance {
    pub fn from_flags(
        flags: impl IntoIterator<Item = crate::ComplianceFlags>,
    ) -> Result<Self, StatError> {
        let (mut n, mut both, mut nf, mut ip) = (0u64, 0u64, 0u64, 0u64);
        for f in flags {
            n += 1;
            both += u64::from(f.both());
            nf += u64::from(!f.nf_pass);
            ip += u64::from(!f.iip3_pass);
        }
        if n == 0 {
            return Err(StatError::EmptyPopulation);
        }
        let n = n as f64;
        Ok(Self {
            compliance: both as f64 / n,
            nf_fail: nf as f64 / n,
            iip3_fail: ip as f64 / n,
        })
    }
}

/// Receiver compliance of mode `mode` of every die.
pub fn receiver_compliance(
    pop: &DiePopulation,
    mode: usize,
    limits: &StageTwoLimits,
    targets: &ReceiverTargets,
) -> Result<ReceiverCompliance, StatError> {
    if mode >= pop.mode_count() {
        return Err(StatError::InvalidModel(format!(
            "mode index {mode} out of range for {} modes",
            pop.mode_count()
        )));
    }
    ReceiverCompliance::from_flags(
        pop.mode_values(mode)
            .map(|q| classify_receiver(q, limits, targets)),
    )
}

/// Linear-interpolated empirical quantile (type 7). Sorts `values` in place.
pub fn quantile(values: &mut [f64], p: f64) -> Result<f64, StatError> {
    if values.is_empty() {
        return Err(StatError::EmptyPopulation);
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(StatError::ProbabilityOutOfRange(p));
    }
    values.sort_by(f64::total_cmp);
    let h = (values.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Ok(values[lo] + (h - lo as f64) * (values[hi] - values[lo]))
}

/// One row per die per mode.
pub fn write_population_csv<W: Write>(pop: &DiePopulation, out: W) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(POPULATION_CSV_HEADER)
        .map_err(crate::error::ReportError::from)?;
    for die in &pop.dies {
        for (label, q) in pop.mode_labels.iter().zip(&die.modes) {
            w.write_record([
                die.index.to_string(),
                label.clone(),
                csv_num(q.gain_db),
                csv_num(q.nf_db),
                csv_num(q.iip3_dbm),
                csv_num(q.s11_db),
                csv_num(q.s22_db),
            ])
            .map_err(crate::error::ReportError::from)?;
        }
    }
    w.flush().map_err(|e| crate::error::ReportError::Io {
        path: "<population csv>".into(),
        source: e,
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designs::paper::paper_traditional;
    use crate::statmodel::{CorrelationTargets, MarginalSpec, ModeMarginals};

    fn q(g: f64, nf: f64, i: f64, s11: f64, s22: f64) -> RfQuantities {
        RfQuantities {
            gain_db: g,
            nf_db: nf,
            iip3_dbm: i,
            s11_db: s11,
            s22_db: s22,
        }
    }

    fn hand_population(values: Vec<RfQuantities>) -> DiePopulation {
        DiePopulation {
            design_id: "hand".into(),
            seed: 0,
            mode_labels: vec!["NOM".into()],
            dies: values
                .into_iter()
                .enumerate()
                .map(|(i, v)| DieSample {
                    index: i as u64,
                    factors: vec![],
                    modes: vec![v],
                })
                .collect(),
        }
    }

    fn zero_variance_model(m: RfQuantities) -> LatentDieModel {
        let spec = |x| MarginalSpec::new(x, 0.0);
        let mm = ModeMarginals {
            gain: spec(m.gain_db),
            nf: spec(m.nf_db),
            iip3: spec(m.iip3_dbm),
            s11: spec(m.s11_db),
            s22: spec(m.s22_db),
        };
        LatentDieModel::from_marginals([("NOM", mm)], CorrelationTargets::default()).unwrap()
    }

    #[test]
    fn single_zero_variance_die() {
        let means = q(10.5, 2.8, 0.7, -15.0, -12.0);
        let pop = generate_population("z", &zero_variance_model(means), 1, 5).unwrap();
        assert_eq!(pop.n(), 1);
        assert_eq!(pop.dies[0].modes[0], means);
        let s = summarize(&pop).unwrap();
        let g = s.modes[0].gain_db;
        assert_eq!((g.min, g.mean, g.max), (10.5, 10.5, 10.5));
        let v = violation_rates(&pop, &LnaSpecCorner::default()).unwrap();
        assert!(v[0].rates.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn hand_built_three_dies() {
        let pop = hand_population(vec![
            q(9.8, 2.9, -5.0, -12.0, -9.0),
            q(10.6, 3.1, 1.0, -14.0, -12.0),
            q(11.2, 2.6, 0.5, -9.5, -13.0),
        ]);
        let s = summarize(&pop).unwrap();
        let m = &s.modes[0];
        assert_eq!((m.gain_db.min, m.gain_db.max), (9.8, 11.2));
        assert!((m.gain_db.mean - 31.6 / 3.0).abs() < 1e-12);
        assert!((m.iip3_dbm.mean - (-3.5 / 3.0)).abs() < 1e-12);
        assert_eq!(m.s11_db.max, -9.5);
        let v = violation_rates(&pop, &LnaSpecCorner::default()).unwrap();
        let third = 1.0 / 3.0;
        assert_eq!(v[0].rates, [third, third, third, third, third, third]);
    }

    #[test]
    fn empty_population_errors() {
        let pop = hand_population(vec![]);
        assert!(matches!(summarize(&pop), Err(StatError::EmptyPopulation)));
        assert!(violation_rates(&pop, &LnaSpecCorner::default()).is_err());
        let model = zero_variance_model(q(10.5, 2.8, 0.7, -15.0, -12.0));
        assert!(matches!(
            generate_population("z", &model, 0, 1),
            Err(StatError::ZeroSize)
        ));
    }

    #[test]
    fn halving_n_gives_prefix() {
        let model = paper_traditional(0.5).latent_model().unwrap();
        let full = generate_population("d", &model, 2000, 9).unwrap();
        let half = generate_population("d", &model, 1000, 9).unwrap();
        assert_eq!(&full.dies[..1000], &half.dies[..]);
    }

    #[test]
    fn parallel_generation_matches_serial() {
        let model = paper_traditional(0.6).latent_model().unwrap();
        let pop = generate_population("d", &model, 3000, 77).unwrap();
        for (i, d) in pop.dies.iter().enumerate() {
            assert_eq!(*d, sample_die(&model, 77, i as u64));
        }
    }

    #[test]
    fn traditional_gain_mean_and_tail() {
        let model = paper_traditional(0.4).latent_model().unwrap();
        let pop = generate_population("d", &model, 1000, 7).unwrap();
        let s = summarize(&pop).unwrap();
        assert!((s.modes[0].gain_db.mean - 10.4).abs() < 0.05);
        let big = generate_population("d", &model, 100_000, 7).unwrap();
        let v = violation_rates(&big, &LnaSpecCorner::default()).unwrap();
        assert!((v[0].get(SpecClause::GainLow) - 0.22).abs() < 0.01);
        assert!((v[0].get(SpecClause::Iip3Low) - 0.14).abs() < 0.01);
    }

    #[test]
    fn quantile_interpolates() {
        let mut v = vec![3.0, 1.0, 2.0, 4.0];
        assert_eq!(quantile(&mut v, 0.0).unwrap(), 1.0);
        assert_eq!(quantile(&mut v, 1.0).unwrap(), 4.0);
        assert!((quantile(&mut v, 0.5).unwrap() - 2.5).abs() < 1e-12);
        assert!(quantile(&mut [], 0.5).is_err());
    }

    #[test]
    fn csv_has_header_and_one_row_per_die_mode() {
        let pop = hand_population(vec![q(10.123456789, 2.8, 0.7, -15.0, -12.0)]);
        let mut buf = Vec::new();
        write_population_csv(&pop, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "die_index,mode,gain_db,nf_db,iip3_dbm,s11_db,s22_db\n0,NOM,10.1235,2.8,0.7,-15,-12\n"
        );
    }
}
