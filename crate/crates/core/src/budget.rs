//! Receiver budget math.
//!
//! Everything in here works in the linear domain (power ratios, noise
//! factors, milliwatts); decibels only appear at the edges through the
//! newtypes below. All functions are pure and generic over [`Real`].

use serde::{Deserialize, Serialize};

use crate::error::BudgetError;
use crate::Real;

/// Relative slack applied to the pass/fail comparisons so that a die sitting
/// exactly on a budget corner is not failed by the last rounding bit.
const BOUNDARY_SLACK: f64 = 1e-12;

fn finite<T: Real>(what: &'static str, x: T) -> Result<T, BudgetError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(BudgetError::NonFinite {
            what,
            value: x.as_f64(),
        })
    }
}

/// `10^(x/10)`.
pub fn db_to_linear<T: Real>(db: T) -> Result<T, BudgetError> {
    finite("dB value", db)?;
    finite("linear value", T::lit(10.0).powf(db / T::lit(10.0)))
}

/// `10·log10(x)` for strictly positive `x`.
pub fn linear_to_db<T: Real>(lin: T) -> Result<T, BudgetError> {
    finite("linear value", lin)?;
    if lin <= T::zero() {
        return Err(BudgetError::NonPositive {
            what: "linear value",
            value: lin.as_f64(),
        });
    }
    Ok(T::lit(10.0) * lin.log10())
}

pub fn dbm_to_mw<T: Real>(dbm: T) -> Result<T, BudgetError> {
    db_to_linear(dbm)
}

pub fn mw_to_dbm<T: Real>(mw: T) -> Result<T, BudgetError> {
    if mw <= T::zero() {
        return Err(BudgetError::NonPositive {
            what: "power in mW",
            value: mw.as_f64(),
        });
    }
    linear_to_db(mw)
}

#[inline]
fn db_raw<T: Real>(db: T) -> T {
    T::lit(10.0).powf(db / T::lit(10.0))
}

#[inline]
fn to_db_raw<T: Real>(lin: T) -> T {
    T::lit(10.0) * lin.log10()
}

/// Power gain in dB.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DecibelGain<T = f64>(T);

impl<T: Real> DecibelGain<T> {
    pub fn new(db: T) -> Result<Self, BudgetError> {
        finite("gain in dB", db).map(Self)
    }

    pub fn value(self) -> T {
        self.0
    }

    pub fn to_linear(self) -> Result<LinearGain<T>, BudgetError> {
        db_to_linear(self.0).map(LinearGain)
    }
}

/// Dimensionless power ratio, never negative.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LinearGain<T = f64>(T);

impl<T: Real> LinearGain<T> {
    pub fn new(ratio: T) -> Result<Self, BudgetError> {
        finite("linear gain", ratio)?;
        if ratio < T::zero() {
            return Err(BudgetError::NonPositive {
                what: "linear gain",
                value: ratio.as_f64(),
            });
        }
        Ok(Self(ratio))
    }

    pub fn value(self) -> T {
        self.0
    }

    pub fn to_db(self) -> Result<DecibelGain<T>, BudgetError> {
        linear_to_db(self.0).map(DecibelGain)
    }
}

/// Noise figure in dB.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NoiseFigureDb<T = f64>(T);

impl<T: Real> NoiseFigureDb<T> {
    pub fn new(db: T) -> Result<Self, BudgetError> {
        finite("noise figure", db).map(Self)
    }

    pub fn value(self) -> T {
        self.0
    }

    pub fn to_factor(self) -> Result<NoiseFactor<T>, BudgetError> {
        NoiseFactor::new(db_to_linear(self.0)?)
    }
}

/// Linear noise factor, `F >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct NoiseFactor<T = f64>(T);

impl<T: Real> NoiseFactor<T> {
    pub fn new(factor: T) -> Result<Self, BudgetError> {
        finite("noise factor", factor)?;
        if factor < T::one() {
            return Err(BudgetError::NoiseFactorBelowOne(factor.as_f64()));
        }
        Ok(Self(factor))
    }

    pub fn value(self) -> T {
        self.0
    }

    pub fn to_db(self) -> NoiseFigureDb<T> {
        NoiseFigureDb(to_db_raw(self.0))
    }
}

impl<T: Real> Serialize for NoiseFactor<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.0.as_f64())
    }
}

impl<'de, T: Real> Deserialize<'de> for NoiseFactor<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        Self::new(T::lit(v)).map_err(serde::de::Error::custom)
    }
}

/// Power level in dBm.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PowerDbm<T = f64>(T);

impl<T: Real> PowerDbm<T> {
    pub fn new(dbm: T) -> Result<Self, BudgetError> {
        finite("power in dBm", dbm).map(Self)
    }

    pub fn value(self) -> T {
        self.0
    }

    pub fn to_mw(self) -> Result<PowerMw<T>, BudgetError> {
        PowerMw::new(dbm_to_mw(self.0)?)
    }
}

/// Power in milliwatts, `> 0`. `+inf` is accepted and models an ideal stage.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct PowerMw<T = f64>(T);

impl<T: Real> PowerMw<T> {
    pub fn new(mw: T) -> Result<Self, BudgetError> {
        if mw.is_nan() {
            return Err(BudgetError::NonFinite {
                what: "power in mW",
                value: f64::NAN,
            });
        }
        if mw <= T::zero() {
            return Err(BudgetError::NonPositive {
                what: "power in mW",
                value: mw.as_f64(),
            });
        }
        Ok(Self(mw))
    }

    pub fn value(self) -> T {
        self.0
    }

    pub fn to_dbm(self) -> PowerDbm<T> {
        PowerDbm(to_db_raw(self.0))
    }
}

impl<T: Real> Serialize for PowerMw<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.0.as_f64())
    }
}

impl<'de, T: Real> Deserialize<'de> for PowerMw<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        Self::new(T::lit(v)).map_err(serde::de::Error::custom)
    }
}

/// The five RF parameters of one die (or one mode of one die).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RfQuantities<T = f64> {
    pub gain_db: T,
    pub nf_db: T,
    pub iip3_dbm: T,
    pub s11_db: T,
    pub s22_db: T,
}

impl<T: Real> RfQuantities<T> {
    pub fn new(
        gain_db: T,
        nf_db: T,
        iip3_dbm: T,
        s11_db: T,
        s22_db: T,
    ) -> Result<Self, BudgetError> {
        let q = Self {
            gain_db,
            nf_db,
            iip3_dbm,
            s11_db,
            s22_db,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<(), BudgetError> {
        finite("gain_db", self.gain_db)?;
        finite("nf_db", self.nf_db)?;
        finite("iip3_dbm", self.iip3_dbm)?;
        finite("s11_db", self.s11_db)?;
        finite("s22_db", self.s22_db)?;
        if self.nf_db <= T::zero() {
            return Err(BudgetError::Invalid {
                what: "nf_db",
                reason: format!("must be > 0, got {}", self.nf_db),
            });
        }
        if self.s11_db > T::zero() || self.s22_db > T::zero() {
            return Err(BudgetError::Invalid {
                what: "reflection coefficient",
                reason: "s11_db and s22_db must be <= 0".into(),
            });
        }
        Ok(())
    }
}

/// LNA-level specification corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LnaSpecCorner<T = f64> {
    pub gain_min_db: T,
    pub gain_max_db: T,
    pub nf_max_db: T,
    pub iip3_min_dbm: T,
    pub s11_max_db: T,
    pub s22_max_db: T,
}

impl<T: Real> Default for LnaSpecCorner<T> {
    /// ZigBee LNA target: 10.5 ± 0.5 dB, NF < 3 dB, IIP3 > −4 dBm, S11/S22 < −10 dB.
    fn default() -> Self {
        Self {
            gain_min_db: T::lit(10.0),
            gain_max_db: T::lit(11.0),
            nf_max_db: T::lit(3.0),
            iip3_min_dbm: T::lit(-4.0),
            s11_max_db: T::lit(-10.0),
            s22_max_db: T::lit(-10.0),
        }
    }
}

impl<T: Real> LnaSpecCorner<T> {
    pub fn validate(&self) -> Result<(), BudgetError> {
        for (what, v) in [
            ("gain_min_db", self.gain_min_db),
            ("gain_max_db", self.gain_max_db),
            ("nf_max_db", self.nf_max_db),
            ("iip3_min_dbm", self.iip3_min_dbm),
            ("s11_max_db", self.s11_max_db),
            ("s22_max_db", self.s22_max_db),
        ] {
            finite(what, v)?;
        }
        if self.gain_min_db >= self.gain_max_db {
            return Err(BudgetError::Invalid {
                what: "spec corner",
                reason: "gain_min_db must be < gain_max_db".into(),
            });
        }
        Ok(())
    }
}

/// Receiver-level targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReceiverTargets<T = f64> {
    pub nf_rx_max_db: T,
    pub iip3_rx_min_dbm: T,
}

impl<T: Real> Default for ReceiverTargets<T> {
    fn default() -> Self {
        Self {
            nf_rx_max_db: T::lit(15.5),
            iip3_rx_min_dbm: T::lit(-10.0),
        }
    }
}

impl<T: Real> ReceiverTargets<T> {
    pub fn validate(&self) -> Result<(), BudgetError> {
        finite("nf_rx_max_db", self.nf_rx_max_db)?;
        finite("iip3_rx_min_dbm", self.iip3_rx_min_dbm)?;
        if self.nf_rx_max_db <= T::zero() {
            return Err(BudgetError::Invalid {
                what: "receiver targets",
                reason: "nf_rx_max_db must be > 0".into(),
            });
        }
        Ok(())
    }

    pub fn f_rx_max(&self) -> T {
        db_raw(self.nf_rx_max_db)
    }

    pub fn iip3_rx_min_mw(&self) -> T {
        db_raw(self.iip3_rx_min_dbm)
    }
}

/// Limits for everything after the LNA: worst allowed noise factor and
/// minimum IIP3 of the remainder of the chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct StageTwoLimits<T = f64> {
    pub f2_max: NoiseFactor<T>,
    pub iip3_2_min: PowerMw<T>,
}

impl<T: Real> StageTwoLimits<T> {
    pub fn nf2_max_db(&self) -> T {
        self.f2_max.to_db().value()
    }

    pub fn iip3_2_min_dbm(&self) -> T {
        self.iip3_2_min.to_dbm().value()
    }
}

/// Receiver noise and linearity verdicts for one die; the two are independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ComplianceFlags {
    pub nf_pass: bool,
    pub iip3_pass: bool,
}

impl ComplianceFlags {
    pub fn both(self) -> bool {
        self.nf_pass && self.iip3_pass
    }
}

/// Friis: `F_rx = F_lna + (F2 − 1)/G_lna`.
pub fn cascade_noise<T: Real>(
    f_lna: NoiseFactor<T>,
    g_lna: LinearGain<T>,
    f2: NoiseFactor<T>,
) -> Result<NoiseFactor<T>, BudgetError> {
    if g_lna.0 <= T::zero() {
        return Err(BudgetError::NonPositive {
            what: "LNA gain",
            value: g_lna.0.as_f64(),
        });
    }
    NoiseFactor::new(f_lna.0 + (f2.0 - T::one()) / g_lna.0)
}

/// `1/IIP3_rx = 1/IIP3_lna + G_lna/IIP3_2`.
pub fn cascade_iip3<T: Real>(
    iip3_lna: PowerMw<T>,
    g_lna: LinearGain<T>,
    iip3_2: PowerMw<T>,
) -> Result<PowerMw<T>, BudgetError> {
    if g_lna.0 <= T::zero() {
        return Err(BudgetError::NonPositive {
            what: "LNA gain",
            value: g_lna.0.as_f64(),
        });
    }
    PowerMw::new(T::one() / (T::one() / iip3_lna.0 + g_lna.0 / iip3_2.0))
}

/// Worst-case budgeting of the post-LNA chain.
///
/// The noise limit is sized with the LNA at its minimum gain and maximum NF,
/// the linearity limit with the LNA at its maximum gain and minimum IIP3, so
/// any LNA inside the spec corner yields a compliant receiver.
pub fn derive_stage2_limits<T: Real>(
    spec: &LnaSpecCorner<T>,
    targets: &ReceiverTargets<T>,
) -> Result<StageTwoLimits<T>, BudgetError> {
    spec.validate()?;
    targets.validate()?;
    let f_rx_max = db_to_linear(targets.nf_rx_max_db)?;
    let f_lna = db_to_linear(spec.nf_max_db)?;
    if f_rx_max <= f_lna {
        return Err(BudgetError::Infeasible(format!(
            "receiver NF target {} dB leaves no room after an LNA at NF {} dB",
            targets.nf_rx_max_db, spec.nf_max_db
        )));
    }
    let iip3_rx_min = dbm_to_mw(targets.iip3_rx_min_dbm)?;
    let iip3_lna = dbm_to_mw(spec.iip3_min_dbm)?;
    if iip3_rx_min >= iip3_lna {
        return Err(BudgetError::Infeasible(format!(
            "receiver IIP3 target {} dBm is not below the LNA IIP3 corner {} dBm",
            targets.iip3_rx_min_dbm, spec.iip3_min_dbm
        )));
    }
    let g_min = db_to_linear(spec.gain_min_db)?;
    let g_max = db_to_linear(spec.gain_max_db)?;
    let f2_max = (f_rx_max - f_lna) * g_min + T::one();
    let iip3_2_min = g_max / (T::one() / iip3_rx_min - T::one() / iip3_lna);
    Ok(StageTwoLimits {
        f2_max: NoiseFactor::new(f2_max)?,
        iip3_2_min: PowerMw::new(iip3_2_min)?,
    })
}

/// Receiver noise factor and IIP3 with a given LNA in front of the limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverMetrics<T = f64> {
    pub noise_factor: T,
    pub iip3_mw: T,
}

impl<T: Real> ReceiverMetrics<T> {
    pub fn nf_db(&self) -> T {
        to_db_raw(self.noise_factor)
    }

    pub fn iip3_dbm(&self) -> T {
        to_db_raw(self.iip3_mw)
    }
}

pub fn receiver_metrics<T: Real>(
    q: &RfQuantities<T>,
    limits: &StageTwoLimits<T>,
) -> ReceiverMetrics<T> {
    let g = db_raw(q.gain_db);
    let f = db_raw(q.nf_db);
    let iip3 = db_raw(q.iip3_dbm);
    ReceiverMetrics {
        noise_factor: f + (limits.f2_max.0 - T::one()) / g,
        iip3_mw: T::one() / (T::one() / iip3 + g / limits.iip3_2_min.0),
    }
}

/// Pass/fail of the receiver built from this LNA and a stage two sized at
/// `limits`. S11/S22 do not enter.
pub fn classify_receiver<T: Real>(
    q: &RfQuantities<T>,
    limits: &StageTwoLimits<T>,
    targets: &ReceiverTargets<T>,
) -> ComplianceFlags {
    let m = receiver_metrics(q, limits);
    let slack = T::lit(BOUNDARY_SLACK);
    ComplianceFlags {
        nf_pass: m.noise_factor <= targets.f_rx_max() * (T::one() + slack),
        iip3_pass: m.iip3_mw >= targets.iip3_rx_min_mw() * (T::one() - slack),
    }
}
