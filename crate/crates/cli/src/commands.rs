use std::path::Path;

use plna_yield::designs::config::{is_builtin_name, parse_config, Config, DesignRef};
use plna_yield::designs::paper::{
    calibrate_plna, calibrate_plna_with, plna_calibration_knobs, PLNA_CALIBRATION_SEED,
};
use plna_yield::explorer::run_explorer;
use plna_yield::format::{csv_num, text_num};
use plna_yield::montecarlo::{
    generate_population, summarize, violation_rates, write_population_csv, DEFAULT_N,
};
use plna_yield::report::{
    compare, evaluate_baseline, render_tables, write_atomic, BaselineSummary, DesignViolations,
    OutputFormat, ReportSet, RunManifest,
};
use plna_yield::selection::apply_strategy;
use plna_yield::statmodel::fit::{fit_sigma, QuantileConstraint};
use plna_yield::statmodel::{CalibrationResult, CalibrationSettings, RfParam};
use plna_yield::{
    LatentDieModel, PlnaDesign, ReceiverTargets, SelectionReport, SelectionStrategy, StageTwoLimits,
};

use crate::{
    CalibrateArgs, Cli, CliError, Command, CompareArgs, FitArgs, ReportArgs, SelectArgs,
    SimulateArgs,
};

const DEFAULT_SEED: u64 = 7;
const DEFAULT_CALIBRATION_N: usize = 20_000;

/// Loaded inputs plus everything written so far.
struct Run {
    config: Config,
    /// Design named by a built-in `--config` such as `paper-0.4mA`.
    preselect: Option<String>,
    limits: StageTwoLimits,
    seed: u64,
    n: usize,
    format: OutputFormat,
    out_dir: std::path::PathBuf,
    manifest: RunManifest,
}

impl Run {
    fn write(&mut self, name: &str, contents: &[u8]) -> Result<(), CliError> {
        write_atomic(&self.out_dir.join(name), contents)?;
        self.manifest.outputs.push(name.to_string());
        Ok(())
    }

    fn write_set(&mut self, set: &ReportSet) -> Result<(), CliError> {
        let rendered = render_tables(set, self.format)?;
        for (name, content) in &rendered.files {
            self.write(name, content.as_bytes())?;
            if self.format == OutputFormat::Text {
                print!("{content}");
            }
        }
        Ok(())
    }

    fn targets(&self) -> ReceiverTargets {
        self.config.targets
    }

    fn target_gain(&self, over: Option<f64>) -> Result<f64, CliError> {
        let t = over.unwrap_or(self.config.target_gain_db);
        if !t.is_finite() {
            return Err(CliError::Validation(format!(
                "target gain {t} dB is not finite"
            )));
        }
        Ok(t)
    }

    fn plna(&self) -> Result<PlnaDesign, CliError> {
        Ok(self.config.plna()?.clone())
    }

    fn calibrated_plna(&self, target_gain: f64) -> Result<PlnaDesign, CliError> {
        let plna = self.plna()?;
        let (d, result) = calibrate_plna(
            &plna,
            &self.config.spec,
            &self.limits,
            &self.targets(),
            target_gain,
            PLNA_CALIBRATION_SEED,
        )?;
        if let Some(diag) = &result.diagnostic {
            eprintln!("plna-yield: calibration: {diag}");
        }
        Ok(d)
    }

    fn select(
        &self,
        plna: &PlnaDesign,
        strategies: &[SelectionStrategy],
        target_gain: f64,
    ) -> Result<Vec<SelectionReport>, CliError> {
        let pop = generate_population(&plna.id, &plna.latent_model()?, self.n, self.seed)?;
        strategies
            .iter()
            .map(|s| {
                Ok(apply_strategy(
                    &pop,
                    s.with_target(target_gain),
                    &self.limits,
                    &self.config.targets,
                    plna,
                )?)
            })
            .collect()
    }

    fn baseline(&self, key: &str) -> Result<BaselineSummary, CliError> {
        let d = self
            .config
            .find_traditional(key)
            .ok_or_else(|| CliError::Validation(format!("designs: unknown baseline '{key}'")))?;
        let pop = generate_population(&d.id, &d.latent_model()?, self.n, self.seed)?;
        Ok(evaluate_baseline(
            &pop,
            d,
            &self.limits,
            &self.config.targets,
        )?)
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Fit(_) => "fit",
        Command::Calibrate(_) => "calibrate",
        Command::Simulate(_) => "simulate",
        Command::Select(_) => "select",
        Command::Compare(_) => "compare",
        Command::Explore => "explore",
        Command::Report(_) => "report",
    }
}

fn read_input(path: &Path, what: &str) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| {
        let msg = format!("cannot read {what} {}: {e}", path.display());
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::Validation(msg)
        } else {
            CliError::Runtime(msg)
        }
    })
}

fn load_config(cli: &Cli) -> Result<(Config, Option<String>), CliError> {
    let g = &cli.global;
    let (mut config, preselect) = if is_builtin_name(&g.config) {
        let c = Config::paper();
        if g.config == "paper" {
            (c, None)
        } else if c.design(&g.config).is_some() {
            (c, Some(g.config.clone()))
        } else {
            return Err(CliError::Validation(format!(
                "unknown built-in dataset '{}' (expected paper or one of {})",
                g.config,
                c.design_ids().join(", ")
            )));
        }
    } else {
        (
            parse_config(&read_input(Path::new(&g.config), "config")?)?,
            None,
        )
    };
    if let Some((nf, iip3)) = g.targets {
        config.targets = ReceiverTargets {
            nf_rx_max_db: nf,
            iip3_rx_min_dbm: iip3,
        };
    }
    if let Some(path) = &g.model {
        let model = LatentDieModel::from_json(&read_input(path, "model")?)?;
        let plna = config.plna.as_mut().ok_or_else(|| {
            CliError::Validation("config: --model given but no programmable LNA is defined".into())
        })?;
        plna.adopt_model(&model)?;
    }
    config.validate()?;
    Ok((config, preselect))
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let g = &cli.global;
    let calibrating = matches!(cli.command, Command::Calibrate(_));
    let seed = g.seed.unwrap_or(if calibrating {
        PLNA_CALIBRATION_SEED
    } else {
        DEFAULT_SEED
    });
    let n = g.n.unwrap_or(if calibrating {
        DEFAULT_CALIBRATION_N
    } else {
        DEFAULT_N
    });
    if n == 0 {
        return Err(CliError::Validation("--n must be >= 1".into()));
    }
    let (config, preselect) = load_config(cli)?;
    let limits = config.stage_two_limits()?;
    std::fs::create_dir_all(&g.out_dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", g.out_dir.display())))?;
    let manifest = RunManifest::new(command_name(&cli.command), seed, n, config.digest());
    let mut run = Run {
        config,
        preselect,
        limits,
        seed,
        n,
        format: g.format.into(),
        out_dir: g.out_dir.clone(),
        manifest,
    };
    let t0 = std::time::Instant::now();
    let result = match &cli.command {
        Command::Fit(a) => fit(&mut run, a),
        Command::Calibrate(a) => calibrate(&mut run, a),
        Command::Simulate(a) => simulate(&mut run, a),
        Command::Select(a) => select(&mut run, a),
        Command::Compare(a) => compare_cmd(&mut run, a),
        Command::Explore => explore(&mut run),
        Command::Report(a) => report(&mut run, a),
    };
    run.manifest.timings.push(plna_yield::report::Timing {
        step: "total".into(),
        millis: t0.elapsed().as_secs_f64() * 1e3,
    });
    run.manifest.outputs.sort();
    let written = run.manifest.write(&run.out_dir);
    result?;
    written?;
    Ok(())
}

fn fit(run: &mut Run, a: &FitArgs) -> Result<(), CliError> {
    let Some(mean) = a.mean else {
        if !a.below.is_empty()
            || !a.above.is_empty()
            || a.sample_min.is_some()
            || a.sample_max.is_some()
        {
            return Err(CliError::Validation(
                "fit: tail constraints need --mean".into(),
            ));
        }
        return fit_all(run);
    };
    let mut cs: Vec<(&str, QuantileConstraint)> = Vec::new();
    cs.extend(
        a.below
            .iter()
            .map(|&(v, r)| ("below", QuantileConstraint::below(v, r))),
    );
    cs.extend(
        a.above
            .iter()
            .map(|&(v, r)| ("above", QuantileConstraint::above(v, r))),
    );
    cs.extend(
        a.sample_min
            .map(|v| ("sample_min", QuantileConstraint::sample_min(v, a.runs))),
    );
    cs.extend(
        a.sample_max
            .map(|v| ("sample_max", QuantileConstraint::sample_max(v, a.runs))),
    );
    let constraints: Vec<QuantileConstraint> = cs.iter().map(|c| c.1).collect();
    let f = run.manifest.time("fit", || fit_sigma(mean, &constraints))?;
    match run.format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut rec = |r: [String; 5]| {
                w.write_record(&r)
                    .map_err(|e| CliError::Runtime(e.to_string()))
            };
            rec(["constraint", "value", "prob", "mean", "sigma"].map(String::from))?;
            for ((kind, c), s) in cs.iter().zip(&f.solutions) {
                rec([
                    kind.to_string(),
                    csv_num(c.value),
                    csv_num(c.prob),
                    csv_num(mean),
                    csv_num(*s),
                ])?;
            }
            rec([
                "average".into(),
                String::new(),
                String::new(),
                csv_num(mean),
                csv_num(f.sigma),
            ])?;
            let bytes = w
                .into_inner()
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            run.write("fit.csv", &bytes)?;
        }
        OutputFormat::Json => {
            let v = serde_json::json!({
                "mean": mean,
                "constraints": cs.iter().zip(&f.solutions).map(|((kind, c), s)| serde_json::json!({
                    "kind": kind, "value": c.value, "prob": c.prob, "sigma": s,
                })).collect::<Vec<_>>(),
                "sigma": f.sigma,
                "relative_spread": f.relative_spread,
            });
            run.write("fit.json", pretty(&v).as_bytes())?;
        }
        OutputFormat::Text => {
            let mut t = String::new();
            for ((kind, c), s) in cs.iter().zip(&f.solutions) {
                t.push_str(&format!(
                    "{kind:<11} {:>8} at p = {:<8} sigma {}\n",
                    text_num(c.value),
                    text_num(c.prob),
                    text_num(*s)
                ));
            }
            t.push_str(&format!(
                "mean {} sigma {} (relative spread {})\n",
                text_num(mean),
                text_num(f.sigma),
                text_num(f.relative_spread)
            ));
            print!("{t}");
            run.write("fit.txt", t.as_bytes())?;
        }
    }
    Ok(())
}

/// Fitted marginals of every design in the config.
fn fit_all(run: &mut Run) -> Result<(), CliError> {
    let mut rows: Vec<(String, String, RfParam, f64, f64)> = Vec::new();
    for d in &run.config.traditional {
        for p in RfParam::ALL {
            let m = d.variability.get(p);
            rows.push((d.id.clone(), "NOM".into(), p, m.mean, m.sigma));
        }
    }
    if let Some(plna) = &run.config.plna {
        for mode in &plna.modes {
            for p in RfParam::ALL {
                let m = mode.variability.get(p);
                rows.push((
                    plna.id.clone(),
                    mode.mode.label().into(),
                    p,
                    m.mean,
                    m.sigma,
                ));
            }
        }
    }
    match run.format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let err = |e: csv::Error| CliError::Runtime(e.to_string());
            w.write_record(["design_id", "mode", "parameter", "mean", "sigma"])
                .map_err(err)?;
            for (id, mode, p, mean, sigma) in &rows {
                w.write_record([
                    id.clone(),
                    mode.clone(),
                    p.name().into(),
                    csv_num(*mean),
                    csv_num(*sigma),
                ])
                .map_err(err)?;
            }
            let bytes = w
                .into_inner()
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            run.write("marginals.csv", &bytes)?;
        }
        OutputFormat::Json => {
            let v: Vec<_> = rows
                .iter()
                .map(|(id, mode, p, mean, sigma)| {
                    serde_json::json!({"design_id": id, "mode": mode, "parameter": p.name(), "mean": mean, "sigma": sigma})
                })
                .collect();
            run.write("marginals.json", pretty(&v).as_bytes())?;
        }
        OutputFormat::Text => {
            let mut t = format!(
                "{:<14} {:<6} {:<9} {:>8} {:>8}\n",
                "design", "mode", "param", "mean", "sigma"
            );
            for (id, mode, p, mean, sigma) in &rows {
                t.push_str(&format!(
                    "{id:<14} {mode:<6} {:<9} {:>8} {:>8}\n",
                    p.name(),
                    text_num(*mean),
                    text_num(*sigma)
                ));
            }
            print!("{t}");
            run.write("marginals.txt", t.as_bytes())?;
        }
    }
    Ok(())
}

fn calibrate(run: &mut Run, a: &CalibrateArgs) -> Result<(), CliError> {
    let target_gain = run.target_gain(a.target_gain)?;
    let plna = run.plna()?;
    let mut settings = CalibrationSettings::new(plna_calibration_knobs(), run.seed);
    settings.n = run.n;
    if let Some(m) = a.max_evaluations {
        settings.max_evaluations = m;
    }
    let (spec, limits, targets) = (run.config.spec, run.limits, run.targets());
    let (design, result) = run.manifest.time("calibrate", || {
        calibrate_plna_with(&plna, &spec, &limits, &targets, target_gain, &settings)
    })?;
    if let Some(diag) = &result.diagnostic {
        eprintln!("plna-yield: calibration: {diag}");
    }
    let mut calibrated = run.config.clone();
    calibrated.plna = Some(design);
    let mut text = calibrated.to_json();
    text.push('\n');
    run.write("calibrated_config.json", text.as_bytes())?;
    let mut model = result
        .model
        .to_json()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    model.push('\n');
    run.write("model.json", model.as_bytes())?;
    write_calibration(run, &result)
}

fn write_calibration(run: &mut Run, r: &CalibrationResult) -> Result<(), CliError> {
    match run.format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let err = |e: csv::Error| CliError::Runtime(e.to_string());
            w.write_record(["statistic", "target", "achieved", "residual"])
                .map_err(err)?;
            for t in &r.residuals {
                w.write_record([
                    t.statistic.describe(),
                    csv_num(t.target),
                    csv_num(t.achieved),
                    csv_num(t.residual),
                ])
                .map_err(err)?;
            }
            let bytes = w
                .into_inner()
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            run.write("calibration.csv", &bytes)
        }
        OutputFormat::Json => {
            let v = serde_json::json!({
                "initial_objective": r.initial_objective,
                "final_objective": r.final_objective,
                "evaluations": r.evaluations,
                "diagnostic": r.diagnostic,
                "residuals": r.residuals,
            });
            run.write("calibration.json", pretty(&v).as_bytes())
        }
        OutputFormat::Text => {
            let mut t = format!(
                "objective {} -> {} after {} evaluations\n",
                text_num(r.initial_objective),
                text_num(r.final_objective),
                r.evaluations
            );
            for x in &r.residuals {
                t.push_str(&format!(
                    "{:<44} target {:>8} achieved {:>8}\n",
                    x.statistic.describe(),
                    text_num(x.target),
                    text_num(x.achieved)
                ));
            }
            print!("{t}");
            run.write("calibration.txt", t.as_bytes())
        }
    }
}

fn simulate(run: &mut Run, a: &SimulateArgs) -> Result<(), CliError> {
    let ids: Vec<String> = if !a.design.is_empty() {
        a.design.clone()
    } else if let Some(p) = &run.preselect {
        vec![p.clone()]
    } else {
        run.config.design_ids()
    };
    let mut set = ReportSet::new(run.config.spec);
    for key in &ids {
        let design = match run.config.design(key) {
            Some(d) => d,
            None => run
                .config
                .find_traditional(key)
                .map(DesignRef::Traditional)
                .ok_or_else(|| CliError::Validation(format!("designs: unknown design '{key}'")))?,
        };
        let (id, model) = match design {
            DesignRef::Traditional(d) => (d.id.clone(), d.latent_model()?),
            DesignRef::Plna(p) => (p.id.clone(), p.latent_model()?),
        };
        let (n, seed) = (run.n, run.seed);
        let pop = run.manifest.time(&format!("simulate {id}"), || {
            generate_population(&id, &model, n, seed)
        })?;
        set.summaries.push(summarize(&pop)?);
        set.violations.push(DesignViolations {
            design_id: id.clone(),
            modes: violation_rates(&pop, &run.config.spec)?,
        });
        if let DesignRef::Traditional(d) = design {
            set.baselines.push(evaluate_baseline(
                &pop,
                d,
                &run.limits,
                &run.config.targets,
            )?);
        }
        if !a.no_population {
            let mut buf = Vec::new();
            write_population_csv(&pop, &mut buf)?;
            run.write(&format!("population_{id}.csv"), &buf)?;
        }
    }
    run.write_set(&set)
}

fn select(run: &mut Run, a: &SelectArgs) -> Result<(), CliError> {
    let target = run.target_gain(a.target_gain)?;
    let plna = if a.calibrate {
        run.calibrated_plna(target)?
    } else {
        run.plna()?
    };
    let reports = run.select(&plna, &a.strategy, target)?;
    let mut set = ReportSet::new(run.config.spec);
    for r in reports {
        let mut buf = Vec::new();
        r.write_outcomes_csv(&mut buf)?;
        run.write(&format!("outcomes_{}.csv", r.strategy.name()), &buf)?;
        run.write(
            &format!("selection_{}.json", r.strategy.name()),
            pretty(&r).as_bytes(),
        )?;
        set.selections.push(r);
    }
    run.write_set(&set)
}

/// Selection reports saved by an earlier `select` in the output directory.
fn saved_selections(dir: &Path) -> Result<Vec<SelectionReport>, CliError> {
    let Ok(entries) = std::fs::read_dir(dir) else {
        return Ok(Vec::new());
    };
    let mut paths: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("selection_") && n.ends_with(".json"))
        })
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            serde_json::from_str(&read_input(p, "selection report")?)
                .map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))
        })
        .collect()
}

fn compare_cmd(run: &mut Run, a: &CompareArgs) -> Result<(), CliError> {
    let target = run.target_gain(a.target_gain)?;
    let saved = if a.strategy.is_empty() {
        saved_selections(&run.out_dir)?
    } else {
        Vec::new()
    };
    let selections = if saved.is_empty() {
        let strategies = if a.strategy.is_empty() {
            vec![
                SelectionStrategy::best_gain(),
                SelectionStrategy::best_receiver(),
            ]
        } else {
            a.strategy.clone()
        };
        let plna = if a.calibrate {
            run.calibrated_plna(target)?
        } else {
            run.plna()?
        };
        run.select(&plna, &strategies, target)?
    } else {
        saved
    };
    let mut set = ReportSet::new(run.config.spec);
    for key in &a.baselines {
        set.baselines.push(run.baseline(key)?);
    }
    for s in &selections {
        set.comparisons.extend(compare(s, &set.baselines)?);
    }
    set.selections = selections;
    run.write_set(&set)
}

fn explore(run: &mut Run) -> Result<(), CliError> {
    let cfg = run.config.explorer.clone().unwrap_or_default();
    let x = run.manifest.time("explore", || run_explorer(&cfg))?;
    let mut buf = Vec::new();
    x.write_csv(&mut buf)?;
    run.write("explorer.csv", &buf)?;
    match run.format {
        OutputFormat::Csv => Ok(()),
        OutputFormat::Json => run.write("explorer.json", pretty(&x).as_bytes()),
        OutputFormat::Text => {
            let mut t = format!(
                "{:>8} {:>8} {:>8} {:>8} {:>8}\n",
                "i_d_ma", "w1_um", "gain_db", "nf_db", "iip3_dbm"
            );
            for p in x.selected.values() {
                let q = p.predicted.expect("selected points are valid");
                t.push_str(&format!(
                    "{:>8} {:>8} {:>8} {:>8} {:>8}\n",
                    text_num(p.i_d_ma),
                    text_num(p.w1_um),
                    text_num(q.gain_db),
                    text_num(q.nf_db),
                    text_num(q.iip3_dbm)
                ));
            }
            let feasible = x.feasible.iter().filter(|&&f| f).count();
            t.push_str(&format!(
                "{feasible} of {} grid points feasible\n",
                x.points.len()
            ));
            print!("{t}");
            run.write("explorer.txt", t.as_bytes())
        }
    }
}

fn report(run: &mut Run, a: &ReportArgs) -> Result<(), CliError> {
    let target = run.target_gain(a.target_gain)?;
    let mut set = ReportSet::new(run.config.spec);
    let traditional = run.config.traditional.clone();
    for d in &traditional {
        let pop = generate_population(&d.id, &d.latent_model()?, run.n, run.seed)?;
        set.summaries.push(summarize(&pop)?);
        set.violations.push(DesignViolations {
            design_id: d.id.clone(),
            modes: violation_rates(&pop, &run.config.spec)?,
        });
        set.baselines.push(evaluate_baseline(
            &pop,
            d,
            &run.limits,
            &run.config.targets,
        )?);
    }
    if run.config.plna.is_some() {
        let plna = if a.calibrate {
            run.calibrated_plna(target)?
        } else {
            run.plna()?
        };
        let pop = generate_population(&plna.id, &plna.latent_model()?, run.n, run.seed)?;
        set.summaries.push(summarize(&pop)?);
        set.violations.push(DesignViolations {
            design_id: plna.id.clone(),
            modes: violation_rates(&pop, &run.config.spec)?,
        });
        for s in [
            SelectionStrategy::best_gain(),
            SelectionStrategy::best_receiver(),
        ] {
            let r = apply_strategy(
                &pop,
                s.with_target(target),
                &run.limits,
                &run.config.targets,
                &plna,
            )?;
            set.comparisons.extend(compare(&r, &set.baselines)?);
            set.selections.push(r);
        }
    }
    run.write_set(&set)
}

fn pretty<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}
