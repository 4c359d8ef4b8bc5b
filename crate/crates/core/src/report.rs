//! ΔS/ΔP comparison, table rendering and artifact emission.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::designs::TraditionalDesign;
use crate::error::{Error, ReportError};
use crate::format::{csv_num, text_num};
use crate::montecarlo::{
    receiver_compliance, DiePopulation, ReceiverCompliance, SpecClause, SummaryStats,
    ViolationRates,
};
use crate::selection::SelectionReport;
use crate::statmodel::RfParam;
use crate::{LnaSpecCorner, ReceiverTargets, StageTwoLimits};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Receiver compliance and power of a fixed-bias design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub design_id: String,
    pub n: usize,
    pub seed: u64,
    pub targets: ReceiverTargets,
    pub limits: StageTwoLimits,
    pub receiver: ReceiverCompliance,
    pub power_mw: f64,
}

pub fn evaluate_baseline(
    pop: &DiePopulation,
    design: &TraditionalDesign,
    limits: &StageTwoLimits,
    targets: &ReceiverTargets,
) -> Result<BaselineSummary, Error> {
    if pop.mode_count() != 1 {
        return Err(ReportError::Mismatch(format!(
            "baseline {} expects a single-mode population, got {} modes",
            design.id,
            pop.mode_count()
        ))
        .into());
    }
    Ok(BaselineSummary {
        design_id: design.id.clone(),
        n: pop.n(),
        seed: pop.seed,
        targets: *targets,
        limits: *limits,
        receiver: receiver_compliance(pop, 0, limits, targets)?,
        power_mw: design.power_mw(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub strategy: String,
    pub baseline_id: String,
    /// Compliance fraction of the PLNA minus that of the baseline.
    pub delta_compliance: f64,
    /// `(P_plna − P_base) / P_base`.
    pub delta_power: f64,
}

/// `(ΔS, ΔP)` of design A relative to design B.
pub fn deltas(compliance_a: f64, power_a: f64, compliance_b: f64, power_b: f64) -> (f64, f64) {
    (compliance_a - compliance_b, (power_a - power_b) / power_b)
}

pub fn compare(
    plna: &SelectionReport,
    baselines: &[BaselineSummary],
) -> Result<Vec<ComparisonRow>, ReportError> {
    baselines
        .iter()
        .map(|b| {
            if b.n != plna.n {
                return Err(ReportError::Mismatch(format!(
                    "{} was simulated with n = {}, the PLNA with n = {}",
                    b.design_id, b.n, plna.n
                )));
            }
            if b.targets != plna.targets || b.limits != plna.limits {
                return Err(ReportError::Mismatch(format!(
                    "{} uses different receiver targets or stage-two limits",
                    b.design_id
                )));
            }
            if !(b.power_mw > 0.0) {
                return Err(ReportError::Mismatch(format!(
                    "{} has no positive power",
                    b.design_id
                )));
            }
            let (ds, dp) = deltas(
                plna.compliance,
                plna.average_power_mw,
                b.receiver.compliance,
                b.power_mw,
            );
            Ok(ComparisonRow {
                strategy: plna.strategy.name(),
                baseline_id: b.design_id.clone(),
                delta_compliance: ds,
                delta_power: dp,
            })
        })
        .collect()
}

/// Which free parameter would have to move to reach a ΔP anchor.
///
/// The PLNA's average power is a convex combination of its mode powers, so
/// the anchor is reachable through mode occupancy only if the required power
/// lies between the lowest and highest mode power. Otherwise the baseline's
/// bias overhead is what binds.
pub fn power_gap_explanation(
    plna_mode_powers_mw: [f64; 3],
    achieved_power_mw: f64,
    baseline: &TraditionalDesign,
    anchor_delta_power: f64,
) -> String {
    let base = baseline.power_mw();
    let needed = base * (1.0 + anchor_delta_power);
    let lo = plna_mode_powers_mw
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let hi = plna_mode_powers_mw
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if (lo..=hi).contains(&needed) {
        let share = if hi > lo {
            (hi - needed) / (hi - lo)
        } else {
            1.0
        };
        format!(
            "mode occupancy binds: ΔP {:+.3} needs an average of {:.4} mW (low-power share {:.3}); achieved {:.4} mW",
            anchor_delta_power,
            needed,
            share,
            achieved_power_mw
        )
    } else {
        let overhead = achieved_power_mw / (1.0 + anchor_delta_power) / baseline.supply_voltage_v
            - baseline.nominal_current_ma;
        format!(
            "bias overhead binds: ΔP {:+.3} needs {:.4} mW, outside the mode-power range [{lo:.4}, {hi:.4}]; \
             matching it would take a {:.4} mA overhead on {}",
            anchor_delta_power, needed, overhead, baseline.id
        )
    }
}

/// Everything one run reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSet {
    pub schema_version: u32,
    pub spec: LnaSpecCorner,
    pub summaries: Vec<SummaryStats>,
    pub violations: Vec<DesignViolations>,
    pub baselines: Vec<BaselineSummary>,
    pub selections: Vec<SelectionReport>,
    pub comparisons: Vec<ComparisonRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignViolations {
    pub design_id: String,
    pub modes: Vec<ViolationRates>,
}

impl Default for ReportSet {
    fn default() -> Self {
        Self::new(LnaSpecCorner::default())
    }
}

impl ReportSet {
    pub fn new(spec: LnaSpecCorner) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            spec,
            summaries: Vec::new(),
            violations: Vec::new(),
            baselines: Vec::new(),
            selections: Vec::new(),
            comparisons: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.summaries.is_empty()
            && self.violations.is_empty()
            && self.baselines.is_empty()
            && self.selections.is_empty()
            && self.comparisons.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    Text,
}

/// Rendered artifacts, file name → contents.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Rendered {
    pub files: Vec<(String, String)>,
}

impl Rendered {
    pub fn get(&self, name: &str) -> Option<&str> {
        self.files
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, c)| c.as_str())
    }
}

fn csv_string(header: &[&str], rows: Vec<Vec<String>>) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| ReportError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub const SUMMARY_CSV_HEADER: [&str; 6] = ["design_id", "mode", "parameter", "min", "mean", "max"];
pub const COMPLIANCE_CSV_HEADER: [&str; 6] = [
    "design_id",
    "strategy",
    "compliance",
    "nf_fail",
    "iip3_fail",
    "power_mw",
];
pub const OCCUPANCY_CSV_HEADER: [&str; 5] = [
    "design_id",
    "strategy",
    "occupancy_hg",
    "occupancy_mg_lp",
    "occupancy_lg",
];
pub const POST_SELECTION_CSV_HEADER: [&str; 6] =
    ["design_id", "strategy", "parameter", "min", "mean", "max"];
pub const COMPARISON_CSV_HEADER: [&str; 4] =
    ["strategy", "baseline_id", "delta_compliance", "delta_power"];

fn violation_columns(set: &ReportSet) -> Vec<(String, &ViolationRates)> {
    set.violations
        .iter()
        .flat_map(|d| {
            let single = d.modes.len() == 1;
            d.modes.iter().map(move |m| {
                let name = if single {
                    d.design_id.clone()
                } else {
                    format!("{}:{}", d.design_id, m.label)
                };
                (name, m)
            })
        })
        .collect()
}

pub fn render_csv(set: &ReportSet) -> Result<Rendered, ReportError> {
    let mut files = Vec::new();

    let mut rows = Vec::new();
    for s in &set.summaries {
        for m in &s.modes {
            for p in RfParam::ALL {
                let st = m.get(p);
                rows.push(vec![
                    s.design_id.clone(),
                    m.label.clone(),
                    p.name().to_string(),
                    csv_num(st.min),
                    csv_num(st.mean),
                    csv_num(st.max),
                ]);
            }
        }
    }
    files.push((
        "summary.csv".to_string(),
        csv_string(&SUMMARY_CSV_HEADER, rows)?,
    ));

    let cols = violation_columns(set);
    let mut header = vec!["clause".to_string()];
    header.extend(cols.iter().map(|(n, _)| n.clone()));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = SpecClause::ALL
        .iter()
        .map(|&c| {
            let mut r = vec![c.key().to_string()];
            r.extend(cols.iter().map(|(_, v)| csv_num(v.get(c))));
            r
        })
        .collect();
    files.push((
        "violations.csv".to_string(),
        csv_string(&header_refs, rows)?,
    ));

    let mut rows: Vec<Vec<String>> = set
        .baselines
        .iter()
        .map(|b| {
            vec![
                b.design_id.clone(),
                "fixed".into(),
                csv_num(b.receiver.compliance),
                csv_num(b.receiver.nf_fail),
                csv_num(b.receiver.iip3_fail),
                csv_num(b.power_mw),
            ]
        })
        .collect();
    rows.extend(set.selections.iter().map(|s| {
        vec![
            s.design_id.clone(),
            s.strategy.name(),
            csv_num(s.compliance),
            csv_num(s.nf_fail),
            csv_num(s.iip3_fail),
            csv_num(s.average_power_mw),
        ]
    }));
    files.push((
        "compliance.csv".to_string(),
        csv_string(&COMPLIANCE_CSV_HEADER, rows)?,
    ));

    let rows = set
        .selections
        .iter()
        .map(|s| {
            let mut r = vec![s.design_id.clone(), s.strategy.name()];
            r.extend(s.occupancy.iter().map(|&x| csv_num(x)));
            r
        })
        .collect();
    files.push((
        "occupancy.csv".to_string(),
        csv_string(&OCCUPANCY_CSV_HEADER, rows)?,
    ));

    let mut rows = Vec::new();
    for s in &set.selections {
        for p in RfParam::ALL {
            let st = s.post_selection.get(p);
            rows.push(vec![
                s.design_id.clone(),
                s.strategy.name(),
                p.name().to_string(),
                csv_num(st.min),
                csv_num(st.mean),
                csv_num(st.max),
            ]);
        }
    }
    files.push((
        "post_selection.csv".to_string(),
        csv_string(&POST_SELECTION_CSV_HEADER, rows)?,
    ));

    let rows = set
        .comparisons
        .iter()
        .map(|c| {
            vec![
                c.strategy.clone(),
                c.baseline_id.clone(),
                csv_num(c.delta_compliance),
                csv_num(c.delta_power),
            ]
        })
        .collect();
    files.push((
        "comparison.csv".to_string(),
        csv_string(&COMPARISON_CSV_HEADER, rows)?,
    ));
    Ok(Rendered { files })
}

pub fn render_json(set: &ReportSet) -> Result<Rendered, ReportError> {
    let mut text = serde_json::to_string_pretty(set)?;
    text.push('\n');
    Ok(Rendered {
        files: vec![("report.json".to_string(), text)],
    })
}

fn table(out: &mut String, title: &str, header: &[String], rows: &[Vec<String>]) {
    let widths: Vec<usize> = (0..header.len())
        .map(|c| {
            rows.iter()
                .map(|r| r[c].chars().count())
                .chain([header[c].chars().count()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: &[String]| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect::<Vec<_>>()
            .join("  ")
    };
    let _ = writeln!(out, "{title}");
    let _ = writeln!(out, "{}", line(header));
    for r in rows {
        let _ = writeln!(out, "{}", line(r));
    }
    let _ = writeln!(out);
}

fn pct(x: f64) -> String {
    format!("{}%", text_num(100.0 * x))
}

pub fn render_text(set: &ReportSet) -> Rendered {
    let mut out = String::new();
    let s = |x: &str| x.to_string();

    let mut rows = Vec::new();
    for sm in &set.summaries {
        for m in &sm.modes {
            for p in RfParam::ALL {
                let st = m.get(p);
                rows.push(vec![
                    sm.design_id.clone(),
                    m.label.clone(),
                    s(p.label()),
                    text_num(st.min),
                    text_num(st.mean),
                    text_num(st.max),
                ]);
            }
        }
    }
    table(
        &mut out,
        "Min/mean/max per parameter",
        &["design", "mode", "parameter", "min", "mean", "max"].map(s),
        &rows,
    );

    let cols = violation_columns(set);
    let mut header = vec![s("clause")];
    header.extend(cols.iter().map(|(n, _)| n.clone()));
    let rows: Vec<Vec<String>> = SpecClause::ALL
        .iter()
        .map(|&c| {
            let mut r = vec![c.describe(&set.spec)];
            r.extend(cols.iter().map(|(_, v)| pct(v.get(c))));
            r
        })
        .collect();
    table(&mut out, "Spec-violation rates", &header, &rows);

    let mut rows: Vec<Vec<String>> = set
        .baselines
        .iter()
        .map(|b| {
            vec![
                b.design_id.clone(),
                s("fixed"),
                pct(b.receiver.compliance),
                pct(b.receiver.nf_fail),
                pct(b.receiver.iip3_fail),
                text_num(b.power_mw),
            ]
        })
        .collect();
    rows.extend(set.selections.iter().map(|r| {
        vec![
            r.design_id.clone(),
            r.strategy.name(),
            pct(r.compliance),
            pct(r.nf_fail),
            pct(r.iip3_fail),
            text_num(r.average_power_mw),
        ]
    }));
    table(
        &mut out,
        "Receiver compliance",
        &[
            "design",
            "strategy",
            "compliant",
            "NF fail",
            "IIP3 fail",
            "P (mW)",
        ]
        .map(s),
        &rows,
    );

    let rows: Vec<Vec<String>> = set
        .selections
        .iter()
        .map(|r| {
            let mut row = vec![r.design_id.clone(), r.strategy.name()];
            row.extend(r.occupancy.iter().map(|&x| pct(x)));
            row
        })
        .collect();
    table(
        &mut out,
        "Mode occupancy",
        &["design", "strategy", "HG", "MG_LP", "LG"].map(s),
        &rows,
    );

    let rows: Vec<Vec<String>> = set
        .comparisons
        .iter()
        .map(|c| {
            vec![
                c.strategy.clone(),
                c.baseline_id.clone(),
                format!("{:+} pp", text_num(100.0 * c.delta_compliance)),
                format!("{:+}%", text_num(100.0 * c.delta_power)),
            ]
        })
        .collect();
    table(
        &mut out,
        "PLNA vs fixed designs",
        &["strategy", "baseline", "dS", "dP"].map(s),
        &rows,
    );

    Rendered {
        files: vec![("report.txt".to_string(), out)],
    }
}

pub fn render_tables(set: &ReportSet, format: OutputFormat) -> Result<Rendered, ReportError> {
    match format {
        OutputFormat::Csv => render_csv(set),
        OutputFormat::Json => render_json(set),
        OutputFormat::Text => Ok(render_text(set)),
    }
}

/// Write `contents` to `path` via a temp file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), ReportError> {
    use std::io::Write;
    let io = |e: std::io::Error| ReportError::Io {
        path: path.display().to_string(),
        source: e,
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn write_rendered(dir: &Path, rendered: &Rendered) -> Result<Vec<PathBuf>, ReportError> {
    rendered
        .files
        .iter()
        .map(|(name, contents)| {
            let p = dir.join(name);
            write_atomic(&p, contents.as_bytes())?;
            Ok(p)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub step: String,
    pub millis: f64,
}

/// Provenance of one CLI run. Only `timings` varies between identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub command: String,
    pub seed: u64,
    pub n: usize,
    pub config_digest: String,
    pub outputs: Vec<String>,
    pub timings: Vec<Timing>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, n: usize, config_digest: String) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            n,
            config_digest,
            outputs: Vec::new(),
            timings: Vec::new(),
        }
    }

    pub fn time<T>(&mut self, step: &str, f: impl FnOnce() -> T) -> T {
        let t0 = std::time::Instant::now();
        let out = f();
        self.timings.push(Timing {
            step: step.to_string(),
            millis: t0.elapsed().as_secs_f64() * 1e3,
        });
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, ReportError> {
        let p = dir.join("manifest.json");
        write_atomic(&p, self.to_json().as_bytes())?;
        Ok(p)
    }
}
