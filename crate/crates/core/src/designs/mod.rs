//! Traditional and programmable LNA designs.

pub mod config;
pub mod paper;

use num_traits::Num;
use serde::{Deserialize, Serialize};

use crate::error::{DesignError, StatError};
use crate::statmodel::{CorrelationTargets, LatentDieModel, ModeMarginals};

pub use config::{parse_config, Config, CONFIG_SCHEMA_VERSION};

pub const DEFAULT_SUPPLY_V: f64 = 1.2;
pub const DEFAULT_BIAS_OVERHEAD_MA: f64 = 0.03;

/// Passive and device sizing. Carried through and serialized, never computed on.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Sizing {
    pub w1_um: f64,
    pub l1_um: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w3_um: Option<f64>,
    pub ls_nh: f64,
    pub lg_nh: f64,
    pub cx_ff: f64,
    pub c1_ff: f64,
    pub cp_pf: f64,
    pub ld_nh: f64,
}

/// Fixed-bias common-source LNA.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraditionalDesign {
    pub id: String,
    pub nominal_current_ma: f64,
    #[serde(default = "default_supply")]
    pub supply_voltage_v: f64,
    /// Bias-mirror current added to the nominal core current for power.
    #[serde(default = "default_overhead")]
    pub bias_overhead_ma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sizing: Option<Sizing>,
    pub variability: ModeMarginals,
    #[serde(default)]
    pub correlation: CorrelationTargets,
}

fn default_supply() -> f64 {
    DEFAULT_SUPPLY_V
}

fn default_overhead() -> f64 {
    DEFAULT_BIAS_OVERHEAD_MA
}

impl TraditionalDesign {
    pub fn validate(&self) -> Result<(), DesignError> {
        if !(self.nominal_current_ma > 0.0) {
            return Err(DesignError::Invalid(format!(
                "{}: nominal_current_ma must be > 0",
                self.id
            )));
        }
        if !(self.supply_voltage_v > 0.0) {
            return Err(DesignError::Invalid(format!(
                "{}: supply_voltage_v must be > 0",
                self.id
            )));
        }
        if !(self.bias_overhead_ma >= 0.0) {
            return Err(DesignError::Invalid(format!(
                "{}: bias_overhead_ma must be >= 0",
                self.id
            )));
        }
        Ok(())
    }

    /// `(I_nom + I_bias) · VDD`, mW.
    pub fn power_mw(&self) -> f64 {
        (self.nominal_current_ma + self.bias_overhead_ma) * self.supply_voltage_v
    }

    pub fn latent_model(&self) -> Result<LatentDieModel, StatError> {
        LatentDieModel::from_marginals([("NOM", self.variability)], self.correlation)
    }
}

/// Operating modes of the programmable LNA.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PlnaMode {
    #[serde(rename = "HG")]
    Hg,
    #[serde(rename = "MG_LP")]
    MgLp,
    #[serde(rename = "LG")]
    Lg,
}

impl PlnaMode {
    /// Storage order of per-mode data everywhere in the crate.
    pub const ALL: [PlnaMode; 3] = [PlnaMode::Hg, PlnaMode::MgLp, PlnaMode::Lg];

    pub fn index(self) -> usize {
        match self {
            PlnaMode::Hg => 0,
            PlnaMode::MgLp => 1,
            PlnaMode::Lg => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            PlnaMode::Hg => "HG",
            PlnaMode::MgLp => "MG_LP",
            PlnaMode::Lg => "LG",
        }
    }

    /// `(Φ, Φg)` driving the cascode current switches.
    pub fn control_bits(self) -> (bool, bool) {
        match self {
            PlnaMode::Hg => (true, false),
            PlnaMode::Lg => (false, true),
            PlnaMode::MgLp => (false, false),
        }
    }

    /// Inverse of [`control_bits`](Self::control_bits). `(1, 1)` selects nothing.
    pub fn from_control_bits(phi: bool, phi_g: bool) -> Result<Self, DesignError> {
        match (phi, phi_g) {
            (true, false) => Ok(PlnaMode::Hg),
            (false, true) => Ok(PlnaMode::Lg),
            (false, false) => Ok(PlnaMode::MgLp),
            (true, true) => Err(DesignError::InvalidControlBits { phi, phi_g }),
        }
    }
}

impl std::fmt::Display for PlnaMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for PlnaMode {
    type Err = DesignError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "HG" => Ok(PlnaMode::Hg),
            "MG_LP" | "MG" => Ok(PlnaMode::MgLp),
            "LG" => Ok(PlnaMode::Lg),
            _ => Err(DesignError::Invalid(format!("unknown PLNA mode '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSpec {
    pub mode: PlnaMode,
    /// Total supply current including bias circuitry.
    pub supply_current_ma: f64,
    pub gain_offset_db: f64,
    pub variability: ModeMarginals,
}

/// Programmable LNA: main branch plus a switchable auxiliary branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlnaDesign {
    pub id: String,
    #[serde(default = "default_supply")]
    pub supply_voltage_v: f64,
    pub w1_um: f64,
    pub w3_um: f64,
    /// Main-branch drain current in the low-power mode.
    pub core_current_ma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sizing: Option<Sizing>,
    pub modes: Vec<ModeSpec>,
    #[serde(default)]
    pub correlation: CorrelationTargets,
}

impl PlnaDesign {
    pub fn validate(&self) -> Result<(), DesignError> {
        let err = |m: String| Err(DesignError::Invalid(format!("{}: {m}", self.id)));
        if self.modes.len() != 3 {
            return err(format!("expected 3 modes, found {}", self.modes.len()));
        }
        for (spec, mode) in self.modes.iter().zip(PlnaMode::ALL) {
            if spec.mode != mode {
                return err("modes must be listed as HG, MG_LP, LG".into());
            }
            if !(spec.supply_current_ma > 0.0) {
                return err(format!("{mode}: supply_current_ma must be > 0"));
            }
        }
        let [hg, mg, lg] = [&self.modes[0], &self.modes[1], &self.modes[2]];
        if !(mg.supply_current_ma < hg.supply_current_ma
            && mg.supply_current_ma < lg.supply_current_ma)
        {
            return err("MG_LP must draw the lowest supply current".into());
        }
        if hg.supply_current_ma != lg.supply_current_ma {
            return err("HG and LG must share the same supply current".into());
        }
        if !(self.w1_um > 0.0) || !(self.w3_um >= 0.0) || !(self.core_current_ma > 0.0) {
            return err("w1_um, core_current_ma must be > 0 and w3_um >= 0".into());
        }
        if !(self.supply_voltage_v > 0.0) {
            return err("supply_voltage_v must be > 0".into());
        }
        Ok(())
    }

    pub fn mode(&self, mode: PlnaMode) -> &ModeSpec {
        &self.modes[mode.index()]
    }

    pub fn mode_power_mw(&self, mode: PlnaMode) -> f64 {
        mode_power(self.mode(mode), self.supply_voltage_v)
    }

    /// Powers in [`PlnaMode::ALL`] order.
    pub fn mode_powers_mw(&self) -> [f64; 3] {
        PlnaMode::ALL.map(|m| self.mode_power_mw(m))
    }

    /// Operating point shared by HG and LG (both branches conducting).
    pub fn high_power_operating_point(&self) -> Result<(f64, f64), DesignError> {
        equivalent_operating_point(self.w1_um, self.core_current_ma, self.w3_um)
    }

    pub fn latent_model(&self) -> Result<LatentDieModel, StatError> {
        LatentDieModel::from_marginals(
            self.modes.iter().map(|m| (m.mode.label(), m.variability)),
            self.correlation,
        )
    }

    /// Write a (possibly calibrated) model's marginals and correlation back.
    pub fn adopt_model(&mut self, model: &LatentDieModel) -> Result<(), DesignError> {
        if model.mode_count() != self.modes.len() {
            return Err(DesignError::Invalid(format!(
                "model has {} modes, design has {}",
                model.mode_count(),
                self.modes.len()
            )));
        }
        for (spec, block) in self.modes.iter_mut().zip(&model.modes) {
            spec.variability = block.marginals;
        }
        self.correlation = model.correlation;
        Ok(())
    }
}

/// `I_DD · VDD` in mW.
pub fn mode_power(mode: &ModeSpec, supply_voltage_v: f64) -> f64 {
    mode.supply_current_ma * supply_voltage_v
}

/// Width and current of the combined device when a branch of width `w3` is
/// added at the same current density as the main branch (`id1/w1`).
///
/// Generic over any numeric type, so it can be evaluated exactly with
/// rationals.
pub fn equivalent_operating_point<T>(w1: T, id1: T, w3: T) -> Result<(T, T), DesignError>
where
    T: Num + PartialOrd + Copy,
{
    if !(w1 > T::zero()) {
        return Err(DesignError::NonPositiveWidth);
    }
    if !(id1 > T::zero()) || !(w3 >= T::zero()) {
        return Err(DesignError::Invalid(
            "operating point needs id1 > 0 and w3 >= 0".into(),
        ));
    }
    let w_eq = w1 + w3;
    Ok((w_eq, id1 * w_eq / w1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_operating_point() {
        let (w, i) = equivalent_operating_point(42.0f64, 0.4, 14.0).unwrap();
        assert_eq!(w, 56.0);
        assert!((i - 0.533_333_333_333_333_3).abs() < 1e-15);
        assert!(((i / w) - 0.4 / 42.0).abs() / (0.4 / 42.0) < 1e-12);
        assert_eq!(
            equivalent_operating_point(42.0, 0.4, 0.0).unwrap(),
            (42.0, 0.4)
        );
        let (w, i) = equivalent_operating_point(30.0f64, 0.3, 10.0).unwrap();
        assert_eq!(w, 40.0);
        assert!((i - 0.4).abs() < 1e-15);
        assert_eq!(
            equivalent_operating_point(0.0, 0.4, 1.0),
            Err(DesignError::NonPositiveWidth)
        );
        assert!(equivalent_operating_point(-1.0, 0.4, 1.0).is_err());
    }

    #[test]
    fn exact_rational_operating_point() {
        use num_rational::Ratio;
        let r = |n: i64, d: i64| Ratio::new(n, d);
        let (w, i) = equivalent_operating_point(r(42, 1), r(2, 5), r(14, 1)).unwrap();
        assert_eq!(w, r(56, 1));
        assert_eq!(i, r(8, 15));
        assert_eq!(i / w, r(2, 5) / r(42, 1));
    }

    #[test]
    fn control_bits_bijection() {
        for m in PlnaMode::ALL {
            let (a, b) = m.control_bits();
            assert_eq!(PlnaMode::from_control_bits(a, b).unwrap(), m);
        }
        assert!(matches!(
            PlnaMode::from_control_bits(true, true),
            Err(DesignError::InvalidControlBits { .. })
        ));
        let mut seen: Vec<_> = PlnaMode::ALL.iter().map(|m| m.control_bits()).collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 3);
    }

    #[test]
    fn mode_powers() {
        let d = paper::paper_plna();
        assert!((d.mode_power_mw(PlnaMode::MgLp) - 0.516).abs() < 1e-12);
        assert!((d.mode_power_mw(PlnaMode::Hg) - 0.672).abs() < 1e-12);
        assert_eq!(d.mode_power_mw(PlnaMode::Hg), d.mode_power_mw(PlnaMode::Lg));
        let t = paper::paper_traditional(0.4);
        assert!((t.power_mw() - 0.516).abs() < 1e-12);
    }

    #[test]
    fn plna_validation() {
        let mut d = paper::paper_plna();
        d.validate().unwrap();
        d.modes.swap(0, 2);
        assert!(d.validate().is_err());
        let mut d = paper::paper_plna();
        d.modes[1].supply_current_ma = 0.9;
        assert!(d.validate().is_err());
        let mut d = paper::paper_plna();
        d.modes.pop();
        assert!(d.validate().is_err());
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("mg-lp".parse::<PlnaMode>().unwrap(), PlnaMode::MgLp);
        assert_eq!("HG".parse::<PlnaMode>().unwrap(), PlnaMode::Hg);
        assert!("XX".parse::<PlnaMode>().is_err());
    }
}
