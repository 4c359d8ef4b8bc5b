//! Design-space sweep over bias current and input-device width.
//!
//! [`Surrogate`] is a synthetic, smooth stand-in for a circuit simulator.
//! Its coefficients are arbitrary and carry no physical fidelity: NF falls
//! with current, IIP3 peaks at a current density in moderate inversion, and
//! input match degrades once the device is too narrow for the current.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, ReportError};
use crate::format::csv_num;
use crate::RfQuantities;

pub const EXPLORER_CSV_HEADER: [&str; 9] = [
    "i_d_ma", "w1_um", "gain_db", "nf_db", "iip3_dbm", "s11_db", "s22_db", "feasible", "selected",
];

/// `(i_d, w1) → RfQuantities`. Errors flag the cell invalid.
pub trait PerformanceModel: Sync {
    fn evaluate(&self, i_d_ma: f64, w1_um: f64) -> Result<RfQuantities, String>;
}

impl<F> PerformanceModel for F
where
    F: Fn(f64, f64) -> Result<RfQuantities, String> + Sync,
{
    fn evaluate(&self, i_d_ma: f64, w1_um: f64) -> Result<RfQuantities, String> {
        self(i_d_ma, w1_um)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Surrogate {
    pub gain_ref_db: f64,
    pub gain_ref_width_um: f64,
    pub gain_slope_db_per_um: f64,
    pub nf_floor_db: f64,
    pub nf_current_coeff: f64,
    pub nf_width_coeff: f64,
    pub iip3_peak_dbm: f64,
    /// Below this current the IIP3 peak drops quadratically.
    pub iip3_knee_ma: f64,
    pub iip3_knee_curvature: f64,
    pub optimal_density_ma_per_um: f64,
    pub iip3_density_curvature: f64,
    pub s11_floor_db: f64,
    pub s11_mismatch_db: f64,
    /// Width at which the match just degrades, times current.
    pub s11_width_current_um_ma: f64,
    pub s22_db: f64,
}

impl Default for Surrogate {
    fn default() -> Self {
        Self {
            gain_ref_db: 10.6,
            gain_ref_width_um: 50.0,
            gain_slope_db_per_um: -0.004,
            nf_floor_db: 2.3,
            nf_current_coeff: 0.12,
            nf_width_coeff: 0.002,
            iip3_peak_dbm: 5.5,
            iip3_knee_ma: 0.62,
            iip3_knee_curvature: 100.0,
            optimal_density_ma_per_um: 0.0095,
            iip3_density_curvature: 8.0,
            s11_floor_db: -22.5,
            s11_mismatch_db: 7.0,
            s11_width_current_um_ma: 9.6,
            s22_db: -18.0,
        }
    }
}

impl PerformanceModel for Surrogate {
    fn evaluate(&self, i: f64, w: f64) -> Result<RfQuantities, String> {
        if !(i > 0.0) || !(w > 0.0) {
            return Err(format!("i_d = {i} mA, w1 = {w} um: both must be > 0"));
        }
        let peak = self.iip3_peak_dbm
            - self.iip3_knee_curvature * (self.iip3_knee_ma - i).max(0.0).powi(2);
        let density = (i / w / self.optimal_density_ma_per_um).log10();
        let w_min = self.s11_width_current_um_ma / i;
        let q = RfQuantities {
            gain_db: self.gain_ref_db + self.gain_slope_db_per_um * (w - self.gain_ref_width_um),
            nf_db: self.nf_floor_db + self.nf_current_coeff / i + self.nf_width_coeff * w,
            iip3_dbm: peak - self.iip3_density_curvature * density * density,
            s11_db: (self.s11_floor_db + self.s11_mismatch_db * (w_min / w).powi(2)).min(0.0),
            s22_db: self.s22_db.min(0.0),
        };
        if [q.gain_db, q.nf_db, q.iip3_dbm, q.s11_db, q.s22_db]
            .iter()
            .all(|v| v.is_finite())
        {
            Ok(q)
        } else {
            Err(format!(
                "non-finite prediction at i_d = {i} mA, w1 = {w} um"
            ))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    pub i_d_ma: f64,
    pub w1_um: f64,
    /// `None` when the model failed at this cell.
    pub predicted: Option<RfQuantities>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invalid_reason: Option<String>,
}

impl DesignPoint {
    pub fn is_valid(&self) -> bool {
        self.predicted.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConstraints {
    pub s11_max_db: f64,
    pub s22_max_db: f64,
    pub gain_min_db: f64,
    pub gain_max_db: f64,
    pub nf_max_db: f64,
    pub iip3_min_dbm: f64,
}

impl Default for SweepConstraints {
    fn default() -> Self {
        Self {
            s11_max_db: -15.0,
            s22_max_db: -15.0,
            gain_min_db: 10.3,
            gain_max_db: 10.9,
            nf_max_db: 3.0,
            iip3_min_dbm: -4.0,
        }
    }
}

impl SweepConstraints {
    pub fn validate(&self) -> Result<(), String> {
        let all = [
            self.s11_max_db,
            self.s22_max_db,
            self.gain_min_db,
            self.gain_max_db,
            self.nf_max_db,
            self.iip3_min_dbm,
        ];
        if !all.iter().all(|v| v.is_finite()) {
            return Err("constraints must be finite".into());
        }
        if self.gain_min_db > self.gain_max_db {
            return Err(format!(
                "empty gain window [{}, {}]",
                self.gain_min_db, self.gain_max_db
            ));
        }
        Ok(())
    }

    /// Gain window inclusive; the other limits strict.
    pub fn satisfied_by(&self, q: &RfQuantities) -> bool {
        q.s11_db < self.s11_max_db
            && q.s22_db < self.s22_max_db
            && q.gain_db >= self.gain_min_db
            && q.gain_db <= self.gain_max_db
            && q.nf_db < self.nf_max_db
            && q.iip3_dbm > self.iip3_min_dbm
    }

    pub fn admits(&self, p: &DesignPoint) -> bool {
        p.predicted.as_ref().is_some_and(|q| self.satisfied_by(q))
    }
}

/// One point per grid cell, row-major by current then width.
pub fn sweep<M: PerformanceModel + ?Sized>(
    currents_ma: &[f64],
    widths_um: &[f64],
    model: &M,
) -> Result<Vec<DesignPoint>, Error> {
    if currents_ma.is_empty() || widths_um.is_empty() {
        return Err(crate::error::DesignError::Invalid("explorer grid is empty".into()).into());
    }
    let cols = widths_um.len();
    Ok((0..currents_ma.len() * cols)
        .into_par_iter()
        .map(|k| {
            let (i, w) = (currents_ma[k / cols], widths_um[k % cols]);
            match model.evaluate(i, w) {
                Ok(q) => DesignPoint {
                    i_d_ma: i,
                    w1_um: w,
                    predicted: Some(q),
                    invalid_reason: None,
                },
                Err(e) => DesignPoint {
                    i_d_ma: i,
                    w1_um: w,
                    predicted: None,
                    invalid_reason: Some(e),
                },
            }
        })
        .collect())
}

pub fn filter_feasible(points: &[DesignPoint], constraints: &SweepConstraints) -> Vec<DesignPoint> {
    points
        .iter()
        .filter(|p| constraints.admits(p))
        .cloned()
        .collect()
}

/// Map key ordering currents by `f64::total_cmp`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CurrentKey(pub f64);

impl PartialEq for CurrentKey {
    fn eq(&self, other: &Self) -> bool {
        self.0.total_cmp(&other.0).is_eq()
    }
}

impl Eq for CurrentKey {}

impl PartialOrd for CurrentKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for CurrentKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// `true` if `a` beats `b`: higher IIP3, then smaller width.
fn better(a: &DesignPoint, b: &DesignPoint) -> bool {
    let (qa, qb) = match (&a.predicted, &b.predicted) {
        (Some(x), Some(y)) => (x, y),
        (Some(_), None) => return true,
        _ => return false,
    };
    qa.iip3_dbm > qb.iip3_dbm || (qa.iip3_dbm == qb.iip3_dbm && a.w1_um < b.w1_um)
}

/// Highest-IIP3 point per current; currents without a point are absent.
pub fn pick_best_per_current(feasible: &[DesignPoint]) -> BTreeMap<CurrentKey, DesignPoint> {
    let mut best: BTreeMap<CurrentKey, DesignPoint> = BTreeMap::new();
    for p in feasible.iter().filter(|p| p.is_valid()) {
        match best.get(&CurrentKey(p.i_d_ma)) {
            Some(cur) if !better(p, cur) => {}
            _ => {
                best.insert(CurrentKey(p.i_d_ma), p.clone());
            }
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplorerConfig {
    pub currents_ma: Vec<f64>,
    pub widths_um: Vec<f64>,
    #[serde(default)]
    pub constraints: SweepConstraints,
    #[serde(default)]
    pub surrogate: Surrogate,
}

impl Default for ExplorerConfig {
    fn default() -> Self {
        Self {
            currents_ma: vec![0.3, 0.4, 0.5, 0.6, 0.7],
            widths_um: (0..=30).map(|k| 20.0 + 2.0 * k as f64).collect(),
            constraints: SweepConstraints::default(),
            surrogate: Surrogate::default(),
        }
    }
}

impl ExplorerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.currents_ma.is_empty() || self.widths_um.is_empty() {
            return Err("currents_ma and widths_um must be non-empty".into());
        }
        if !self
            .currents_ma
            .iter()
            .chain(&self.widths_um)
            .all(|v| v.is_finite() && *v > 0.0)
        {
            return Err("grid values must be finite and > 0".into());
        }
        self.constraints.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exploration {
    pub points: Vec<DesignPoint>,
    pub feasible: Vec<bool>,
    pub selected: BTreeMap<CurrentKey, DesignPoint>,
}

impl Exploration {
    pub fn is_selected(&self, p: &DesignPoint) -> bool {
        self.selected
            .get(&CurrentKey(p.i_d_ma))
            .is_some_and(|s| s.w1_um == p.w1_um)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(EXPLORER_CSV_HEADER)
            .map_err(ReportError::from)?;
        for (p, &feasible) in self.points.iter().zip(&self.feasible) {
            let nums = match &p.predicted {
                Some(q) => [q.gain_db, q.nf_db, q.iip3_dbm, q.s11_db, q.s22_db].map(csv_num),
                None => Default::default(),
            };
            let mut row = vec![csv_num(p.i_d_ma), csv_num(p.w1_um)];
            row.extend(nums);
            row.push(feasible.to_string());
            row.push(self.is_selected(p).to_string());
            w.write_record(&row).map_err(ReportError::from)?;
        }
        w.flush().map_err(|e| ReportError::Io {
            path: "<explorer csv>".into(),
            source: e,
        })?;
        Ok(())
    }
}

/// Sweep, filter and pick in one go.
pub fn explore<M: PerformanceModel + ?Sized>(
    currents_ma: &[f64],
    widths_um: &[f64],
    constraints: &SweepConstraints,
    model: &M,
) -> Result<Exploration, Error> {
    let points = sweep(currents_ma, widths_um, model)?;
    let feasible: Vec<bool> = points.iter().map(|p| constraints.admits(p)).collect();
    let selected = pick_best_per_current(&filter_feasible(&points, constraints));
    Ok(Exploration {
        points,
        feasible,
        selected,
    })
}

pub fn run_explorer(config: &ExplorerConfig) -> Result<Exploration, Error> {
    config
        .validate()
        .map_err(|e| crate::error::DesignError::Invalid(format!("explorer: {e}")))?;
    explore(
        &config.currents_ma,
        &config.widths_um,
        &config.constraints,
        &config.surrogate,
    )
}

/// Single pass over the raw grid: feasibility and per-current argmax together.
pub fn brute_force_best<M: PerformanceModel + ?Sized>(
    currents_ma: &[f64],
    widths_um: &[f64],
    constraints: &SweepConstraints,
    model: &M,
) -> BTreeMap<CurrentKey, (f64, f64)> {
    let mut best: BTreeMap<CurrentKey, (f64, f64)> = BTreeMap::new();
    for &i in currents_ma {
        for &w in widths_um {
            let Ok(q) = model.evaluate(i, w) else {
                continue;
            };
            if !constraints.satisfied_by(&q) {
                continue;
            }
            let e = best.entry(CurrentKey(i)).or_insert((w, q.iip3_dbm));
            if q.iip3_dbm > e.1 || (q.iip3_dbm == e.1 && w < e.0) {
                *e = (w, q.iip3_dbm);
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[test]
    fn grid_cardinality_and_order() {
        let s = Surrogate::default();
        let one = sweep(&[0.4], &[42.0], &s).unwrap();
        assert_eq!(one.len(), 1);
        let currents = [0.3, 0.4, 0.5, 0.6, 0.7];
        let widths: Vec<f64> = (1..=10).map(|k| 10.0 * k as f64).collect();
        let pts = sweep(&currents, &widths, &s).unwrap();
        assert_eq!(pts.len(), 50);
        for (k, p) in pts.iter().enumerate() {
            assert_eq!((p.i_d_ma, p.w1_um), (currents[k / 10], widths[k % 10]));
            assert_eq!(p.predicted.unwrap(), s.evaluate(p.i_d_ma, p.w1_um).unwrap());
        }
        assert!(sweep(&[], &widths, &s).is_err());
    }

    #[test]
    fn each_cell_evaluated_once() {
        let calls = AtomicUsize::new(0);
        let model = |i: f64, w: f64| {
            calls.fetch_add(1, Ordering::Relaxed);
            Surrogate::default().evaluate(i, w)
        };
        sweep(&[0.3, 0.4, 0.5], &[20.0, 30.0, 40.0, 50.0], &model).unwrap();
        assert_eq!(calls.load(Ordering::Relaxed), 12);
    }

    #[test]
    fn failures_are_flagged_not_dropped() {
        let pts = sweep(&[-0.1, 0.4], &[42.0], &Surrogate::default()).unwrap();
        assert_eq!(pts.len(), 2);
        assert!(!pts[0].is_valid());
        assert!(pts[0].invalid_reason.is_some());
        assert!(!SweepConstraints::default().admits(&pts[0]));
    }

    #[test]
    fn filter_examples() {
        let c = SweepConstraints::default();
        let mut q = RfQuantities {
            gain_db: 10.5,
            nf_db: 2.7,
            iip3_dbm: 0.0,
            s11_db: -18.0,
            s22_db: -18.0,
        };
        let p = |q| DesignPoint {
            i_d_ma: 0.4,
            w1_um: 40.0,
            predicted: Some(q),
            invalid_reason: None,
        };
        assert_eq!(filter_feasible(&[p(q)], &c).len(), 1);
        q.iip3_dbm = -4.5;
        assert!(filter_feasible(&[p(q)], &c).is_empty());
    }

    #[test]
    fn default_surrogate_discards_lowest_current() {
        let x = run_explorer(&ExplorerConfig::default()).unwrap();
        assert!(!x.selected.contains_key(&CurrentKey(0.3)));
        for i in [0.4, 0.5, 0.6, 0.7] {
            assert!(x.selected.contains_key(&CurrentKey(i)), "{i}");
        }
        let best = &x.selected[&CurrentKey(0.4)];
        assert!(best.predicted.unwrap().iip3_dbm > -4.0);
    }

    #[test]
    fn width_tie_goes_to_narrower() {
        let flat = |_: f64, w: f64| {
            Ok(RfQuantities {
                gain_db: 10.5,
                nf_db: 2.5,
                iip3_dbm: if w > 35.0 { 1.0 } else { 0.0 },
                s11_db: -20.0,
                s22_db: -20.0,
            })
        };
        let x = explore(
            &[0.5],
            &[30.0, 60.0, 40.0, 50.0],
            &SweepConstraints::default(),
            &flat,
        )
        .unwrap();
        assert_eq!(x.selected[&CurrentKey(0.5)].w1_um, 40.0);
    }

    #[test]
    fn signed_zero_iip3_is_a_tie() {
        let m = |_: f64, w: f64| {
            Ok(RfQuantities {
                gain_db: 10.5,
                nf_db: 2.5,
                iip3_dbm: if w < 45.0 { -0.0 } else { 0.0 },
                s11_db: -20.0,
                s22_db: -20.0,
            })
        };
        let x = explore(&[0.5], &[50.0, 40.0], &SweepConstraints::default(), &m).unwrap();
        assert_eq!(x.selected[&CurrentKey(0.5)].w1_um, 40.0);
    }

    #[test]
    fn csv_marks_selection() {
        let x = run_explorer(&ExplorerConfig {
            currents_ma: vec![0.3, 0.4],
            widths_um: vec![40.0, 42.0],
            ..Default::default()
        })
        .unwrap();
        let mut buf = Vec::new();
        x.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], EXPLORER_CSV_HEADER.join(","));
        assert_eq!(lines.len(), 5);
        assert_eq!(lines.iter().filter(|l| l.ends_with(",true")).count(), 1);
    }
}
