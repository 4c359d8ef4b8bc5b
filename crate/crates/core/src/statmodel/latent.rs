//! Latent-factor die model.
//!
//! Each die draws three shared standard-normal factors (gain, noise,
//! linearity). Every (mode, parameter) value is
//! `mean + loadings · factors + idiosyncratic · e` with its own `e ~ N(0,1)`.
//! Sharing a factor across modes produces cross-mode correlation; loading
//! IIP3 on the gain factor produces within-die gain/IIP3 correlation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::StatError;
use crate::RfQuantities;

pub const MODEL_SCHEMA_VERSION: u32 = 1;

pub const GAIN_FACTOR: usize = 0;
pub const NOISE_FACTOR: usize = 1;
pub const LINEARITY_FACTOR: usize = 2;
pub const DEFAULT_FACTOR_COUNT: usize = 3;

const VARIANCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RfParam {
    Gain,
    Nf,
    Iip3,
    S11,
    S22,
}

impl RfParam {
    pub const ALL: [RfParam; 5] = [
        RfParam::Gain,
        RfParam::Nf,
        RfParam::Iip3,
        RfParam::S11,
        RfParam::S22,
    ];

    pub fn get(self, q: &RfQuantities) -> f64 {
        match self {
            RfParam::Gain => q.gain_db,
            RfParam::Nf => q.nf_db,
            RfParam::Iip3 => q.iip3_dbm,
            RfParam::S11 => q.s11_db,
            RfParam::S22 => q.s22_db,
        }
    }

    fn set(self, q: &mut RfQuantities, v: f64) {
        match self {
            RfParam::Gain => q.gain_db = v,
            RfParam::Nf => q.nf_db = v,
            RfParam::Iip3 => q.iip3_dbm = v,
            RfParam::S11 => q.s11_db = v,
            RfParam::S22 => q.s22_db = v,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RfParam::Gain => "gain_db",
            RfParam::Nf => "nf_db",
            RfParam::Iip3 => "iip3_dbm",
            RfParam::S11 => "s11_db",
            RfParam::S22 => "s22_db",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            RfParam::Gain => "G (dB)",
            RfParam::Nf => "NF (dB)",
            RfParam::Iip3 => "IIP3 (dBm)",
            RfParam::S11 => "S11 (dB)",
            RfParam::S22 => "S22 (dB)",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Physical clamp applied after sampling (e.g. reflection coefficients ≤ 0 dB).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Bounds {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
}

impl Bounds {
    pub fn upper(v: f64) -> Self {
        Self {
            lower: None,
            upper: Some(v),
        }
    }

    pub fn lower(v: f64) -> Self {
        Self {
            lower: Some(v),
            upper: None,
        }
    }

    fn clamp(&self, x: f64) -> f64 {
        let x = self.lower.map_or(x, |l| x.max(l));
        self.upper.map_or(x, |u| x.min(u))
    }
}

/// Gaussian marginal in dB/dBm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalSpec {
    pub mean: f64,
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Bounds>,
}

impl MarginalSpec {
    pub fn new(mean: f64, sigma: f64) -> Self {
        Self {
            mean,
            sigma,
            bounds: None,
        }
    }

    pub fn with_bounds(mut self, bounds: Bounds) -> Self {
        self.bounds = Some(bounds);
        self
    }

    pub fn validate(&self) -> Result<(), StatError> {
        if !self.mean.is_finite() {
            return Err(StatError::InvalidModel(format!(
                "mean must be finite, got {}",
                self.mean
            )));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(StatError::InvalidModel(format!(
                "sigma must be >= 0, got {}",
                self.sigma
            )));
        }
        if let Some(Bounds {
            lower: Some(l),
            upper: Some(u),
        }) = self.bounds
        {
            if l > u {
                return Err(StatError::InvalidModel("bounds: lower > upper".into()));
            }
        }
        Ok(())
    }
}

/// The five marginals of one mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeMarginals {
    pub gain: MarginalSpec,
    pub nf: MarginalSpec,
    pub iip3: MarginalSpec,
    pub s11: MarginalSpec,
    pub s22: MarginalSpec,
}

impl ModeMarginals {
    pub fn get(&self, p: RfParam) -> &MarginalSpec {
        match p {
            RfParam::Gain => &self.gain,
            RfParam::Nf => &self.nf,
            RfParam::Iip3 => &self.iip3,
            RfParam::S11 => &self.s11,
            RfParam::S22 => &self.s22,
        }
    }

    pub fn get_mut(&mut self, p: RfParam) -> &mut MarginalSpec {
        match p {
            RfParam::Gain => &mut self.gain,
            RfParam::Nf => &mut self.nf,
            RfParam::Iip3 => &mut self.iip3,
            RfParam::S11 => &mut self.s11,
            RfParam::S22 => &mut self.s22,
        }
    }

    pub fn means(&self) -> RfQuantities {
        RfQuantities {
            gain_db: self.gain.mean,
            nf_db: self.nf.mean,
            iip3_dbm: self.iip3.mean,
            s11_db: self.s11.mean,
            s22_db: self.s22.mean,
        }
    }

    pub fn validate(&self) -> Result<(), StatError> {
        for p in RfParam::ALL {
            self.get(p)
                .validate()
                .map_err(|e| StatError::InvalidModel(format!("{}: {e}", p.name())))?;
        }
        Ok(())
    }
}

/// Correlation structure the loadings are built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTargets {
    /// Correlation of gain between two modes of the same die.
    pub gain_cross_mode: f64,
    pub nf_cross_mode: f64,
    pub iip3_cross_mode: f64,
    /// Within-die correlation between gain and IIP3.
    pub gain_iip3: f64,
}

impl Default for CorrelationTargets {
    fn default() -> Self {
        Self {
            gain_cross_mode: 0.95,
            nf_cross_mode: 0.95,
            iip3_cross_mode: 0.9,
            gain_iip3: 0.6,
        }
    }
}

impl CorrelationTargets {
    /// Loading of IIP3 on the gain factor, per unit IIP3 sigma.
    fn iip3_gain_share(&self) -> f64 {
        if self.gain_cross_mode == 0.0 {
            0.0
        } else {
            self.gain_iip3 / self.gain_cross_mode.sqrt()
        }
    }

    pub fn validate(&self) -> Result<(), StatError> {
        for (name, v) in [
            ("gain_cross_mode", self.gain_cross_mode),
            ("nf_cross_mode", self.nf_cross_mode),
            ("iip3_cross_mode", self.iip3_cross_mode),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(StatError::InvalidModel(format!(
                    "{name} must lie in [0, 1], got {v}"
                )));
            }
        }
        if !(-1.0..=1.0).contains(&self.gain_iip3) {
            return Err(StatError::InvalidModel(format!(
                "gain_iip3 must lie in [-1, 1], got {}",
                self.gain_iip3
            )));
        }
        if self.gain_cross_mode == 0.0 && self.gain_iip3 != 0.0 {
            return Err(StatError::InvalidModel(
                "gain_iip3 needs a shared gain factor (gain_cross_mode > 0)".into(),
            ));
        }
        let a = self.iip3_gain_share();
        if a * a > self.iip3_cross_mode + 1e-12 {
            return Err(StatError::InvalidModel(format!(
                "gain_iip3^2 / gain_cross_mode = {} exceeds iip3_cross_mode = {}",
                a * a,
                self.iip3_cross_mode
            )));
        }
        Ok(())
    }
}

/// One (mode, parameter) row of the loading matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRow {
    pub param: RfParam,
    pub mean: f64,
    pub loadings: Vec<f64>,
    pub idiosyncratic: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Bounds>,
}

impl ParamRow {
    pub fn variance(&self) -> f64 {
        self.loadings.iter().map(|l| l * l).sum::<f64>() + self.idiosyncratic * self.idiosyncratic
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeBlock {
    pub label: String,
    pub marginals: ModeMarginals,
    pub rows: Vec<ParamRow>,
}

/// Loadings plus idiosyncratic sigmas for every (mode, parameter) of a die.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentDieModel {
    pub schema_version: u32,
    pub factor_count: usize,
    pub correlation: CorrelationTargets,
    pub modes: Vec<ModeBlock>,
}

impl LatentDieModel {
    pub fn from_marginals<S: Into<String>>(
        modes: impl IntoIterator<Item = (S, ModeMarginals)>,
        correlation: CorrelationTargets,
    ) -> Result<Self, StatError> {
        let modes: Vec<ModeBlock> = modes
            .into_iter()
            .map(|(label, marginals)| ModeBlock {
                label: label.into(),
                marginals,
                rows: Vec::new(),
            })
            .collect();
        let mut model = Self {
            schema_version: MODEL_SCHEMA_VERSION,
            factor_count: DEFAULT_FACTOR_COUNT,
            correlation,
            modes,
        };
        model.rebuild()?;
        Ok(model)
    }

    /// Recompute every row from the marginals and the correlation targets.
    /// Idiosyncratic terms are derived last so each row's variance equals its
    /// marginal sigma².
    pub fn rebuild(&mut self) -> Result<(), StatError> {
        if self.modes.is_empty() {
            return Err(StatError::InvalidModel("model has no modes".into()));
        }
        self.correlation.validate()?;
        let c = self.correlation;
        let a = c.iip3_gain_share();
        let b = (c.iip3_cross_mode - a * a).max(0.0).sqrt();
        self.factor_count = DEFAULT_FACTOR_COUNT;
        for block in &mut self.modes {
            block
                .marginals
                .validate()
                .map_err(|e| StatError::InvalidModel(format!("mode {}: {e}", block.label)))?;
            block.rows = RfParam::ALL
                .iter()
                .map(|&p| {
                    let m = block.marginals.get(p);
                    let mut loadings = vec![0.0; DEFAULT_FACTOR_COUNT];
                    match p {
                        RfParam::Gain => loadings[GAIN_FACTOR] = m.sigma * c.gain_cross_mode.sqrt(),
                        RfParam::Nf => loadings[NOISE_FACTOR] = m.sigma * c.nf_cross_mode.sqrt(),
                        RfParam::Iip3 => {
                            loadings[GAIN_FACTOR] = m.sigma * a;
                            loadings[LINEARITY_FACTOR] = m.sigma * b;
                        }
                        RfParam::S11 | RfParam::S22 => {}
                    }
                    let shared: f64 = loadings.iter().map(|l| l * l).sum();
                    ParamRow {
                        param: p,
                        mean: m.mean,
                        loadings,
                        idiosyncratic: (m.sigma * m.sigma - shared).max(0.0).sqrt(),
                        bounds: m.bounds,
                    }
                })
                .collect();
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), StatError> {
        if self.schema_version != MODEL_SCHEMA_VERSION {
            return Err(StatError::InvalidModel(format!(
                "unsupported model schema_version {}",
                self.schema_version
            )));
        }
        if self.modes.is_empty() {
            return Err(StatError::InvalidModel("model has no modes".into()));
        }
        self.correlation.validate()?;
        for block in &self.modes {
            block.marginals.validate()?;
            if block.rows.len() != RfParam::ALL.len() {
                return Err(StatError::InvalidModel(format!(
                    "mode {}: expected {} rows, found {}",
                    block.label,
                    RfParam::ALL.len(),
                    block.rows.len()
                )));
            }
            for (row, p) in block.rows.iter().zip(RfParam::ALL) {
                if row.param != p {
                    return Err(StatError::InvalidModel(format!(
                        "mode {}: row order must be gain, nf, iip3, s11, s22",
                        block.label
                    )));
                }
                if row.loadings.len() != self.factor_count {
                    return Err(StatError::InvalidModel(format!(
                        "mode {} {}: {} loadings for {} factors",
                        block.label,
                        p.name(),
                        row.loadings.len(),
                        self.factor_count
                    )));
                }
                if !row.loadings.iter().all(|l| l.is_finite()) || !(row.idiosyncratic >= 0.0) {
                    return Err(StatError::InvalidModel(format!(
                        "mode {} {}: non-finite loading or negative idiosyncratic sigma",
                        block.label,
                        p.name()
                    )));
                }
                let m = block.marginals.get(p);
                let target = m.sigma * m.sigma;
                if (row.variance() - target).abs() > VARIANCE_TOL * target.max(1.0)
                    || row.mean != m.mean
                {
                    return Err(StatError::InvalidModel(format!(
                        "mode {} {}: row variance {} does not match marginal sigma^2 {}",
                        block.label,
                        p.name(),
                        row.variance(),
                        target
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    pub fn mode_labels(&self) -> Vec<String> {
        self.modes.iter().map(|m| m.label.clone()).collect()
    }

    fn row(&self, mode: usize, p: RfParam) -> &ParamRow {
        &self.modes[mode].rows[p.index()]
    }

    /// Model-implied correlation between two (mode, parameter) entries.
    pub fn implied_correlation(&self, mode_a: usize, a: RfParam, mode_b: usize, b: RfParam) -> f64 {
        let ra = self.row(mode_a, a);
        let rb = self.row(mode_b, b);
        let mut cov: f64 = ra
            .loadings
            .iter()
            .zip(&rb.loadings)
            .map(|(x, y)| x * y)
            .sum();
        if mode_a == mode_b && a == b {
            cov += ra.idiosyncratic * rb.idiosyncratic;
        }
        let denom = (ra.variance() * rb.variance()).sqrt();
        if denom == 0.0 {
            0.0
        } else {
            cov / denom
        }
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(text: &str) -> Result<Self, StatError> {
        let model: Self =
            serde_json::from_str(text).map_err(|e| StatError::InvalidModel(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }
}

/// One Monte Carlo run: shared factors and per-mode RF parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DieSample {
    pub index: u64,
    pub factors: Vec<f64>,
    pub modes: Vec<RfQuantities>,
}

/// Per-die random stream: ChaCha8 keyed by `seed`, stream selected by the die
/// index. Die `i` never depends on how many other dies were drawn.
pub fn die_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn sample_die(model: &LatentDieModel, seed: u64, index: u64) -> DieSample {
    let mut rng = die_rng(seed, index);
    let factors: Vec<f64> = (0..model.factor_count)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let modes = model
        .modes
        .iter()
        .map(|block| {
            let mut q = RfQuantities::default();
            for row in &block.rows {
                let e: f64 = StandardNormal.sample(&mut rng);
                let shared: f64 = row.loadings.iter().zip(&factors).map(|(l, z)| l * z).sum();
                let mut v = row.mean + shared + row.idiosyncratic * e;
                if let Some(b) = &row.bounds {
                    v = b.clamp(v);
                }
                row.param.set(&mut q, v);
            }
            q
        })
        .collect();
    DieSample {
        index,
        factors,
        modes,
    }
}
