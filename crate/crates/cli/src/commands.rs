//! Subcommand bodies. Each returns `Ok` on success and a [`CliError`] whose
//! variant decides the exit code.

use std::io::Write;
use std::path::{Path, PathBuf};

use fairfed::data::{
    count_table, generate_synthetic, load_csv, partition, save_csv, CsvSchema, Dataset, Partition, PartitionOptions,
    Scheme, SyntheticParams,
};
use fairfed::eval::{
    analytic_synthetic_risks, client_risks, cross_validate, evaluate_groups, minimax_oracle, pooled_optimum, RiskTable,
};
use fairfed::federation::{run_method, RunReport};

use crate::check::{run_suite, Suite, SuiteOutcome};
use crate::report::{label_dir, summary_header, summary_row, write_json, ExperimentEcho, ModelFile, RunReportFile};
use crate::spec::{DataSource, ExperimentSpec, MethodSpec};
use crate::{CliError, CliResult};

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Failure(format!("{}: {e}", path.display()))
}

fn group_summary(data: &Dataset) -> String {
    let positives = data.samples().iter().filter(|s| s.y == 1).count();
    let groups: Vec<String> = data
        .group_counts()
        .iter()
        .enumerate()
        .map(|(a, c)| format!("group {a}: {c}"))
        .collect();
    format!("{} rows ({}), label 1: {positives}", data.len(), groups.join(", "))
}

pub fn gen_data(params: &SyntheticParams, out: &Path) -> CliResult<()> {
    let data = generate_synthetic(params)?;
    save_csv(&data, out).map_err(|e| io_err(out, e))?;
    println!("wrote {}: {}", out.display(), group_summary(&data));
    Ok(())
}

pub fn partition_data(data_path: &Path, schema: CsvSchema, opts: &PartitionOptions, out: &Path) -> CliResult<()> {
    let data = load_csv(data_path, schema)?;
    let part = partition(&data, opts)?;
    std::fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let counts = count_table(&part);
    let width = part.num_clients().saturating_sub(1).to_string().len().max(3);
    let mut stdout = std::io::stdout().lock();
    for (k, client) in part.clients().iter().enumerate() {
        let path = out.join(format!("client_{k:0width$}.csv"));
        save_csv(client, &path).map_err(|e| io_err(&path, e))?;
        let per_group: Vec<String> = (0..counts.per_group.len()).map(|a| counts.n_ak(a, k).to_string()).collect();
        writeln!(stdout, "client {k}: n={} groups [{}]", counts.per_client[k], per_group.join(", "))?;
    }
    writeln!(stdout, "{} clients written to {}", part.num_clients(), out.display())?;
    Ok(())
}

pub fn load_data(source: &DataSource) -> CliResult<Dataset> {
    match source {
        DataSource::Synthetic(p) => Ok(generate_synthetic(p)?),
        DataSource::Csv { resolved, .. } => Ok(load_csv(resolved, source.csv_schema().expect("csv source"))?),
    }
}

pub struct MethodOutcome {
    pub label: String,
    pub report: RunReport,
    pub file: RunReportFile,
}

fn partition_options(spec: &ExperimentSpec, seed: u64) -> PartitionOptions {
    let mut opts = PartitionOptions::new(spec.scheme, spec.num_clients, seed);
    opts.imbalance_period = spec.imbalance_period;
    opts
}

/// Trains one method on the full data (the recorded trajectory) and builds
/// its risk table: cross-validated when `folds >= 2`, otherwise measured on
/// the training data.
pub fn run_one(spec: &ExperimentSpec, m: &MethodSpec, data: &Dataset, full: &Partition) -> CliResult<MethodOutcome> {
    let config = m.trainer_config(data.feature_dim(), data.num_classes())?;
    let report = run_method(m.method, &config, full)?;
    let mut table = if spec.folds >= 2 {
        let runner = |train: &Dataset, seed: u64| {
            let p = partition(train, &partition_options(spec, seed))?;
            let mut c = config.clone();
            c.seed = seed;
            Ok(run_method(m.method, &c, &p)?.model().clone())
        };
        cross_validate(runner, data, spec.folds, &[spec.seed], config.execution)?
    } else {
        RiskTable::from_evaluations(&[evaluate_groups(report.model(), data)?])
    };
    table.client_risk = Some(client_risks(report.model(), full)?);
    let echo = ExperimentEcho {
        data: spec.data.clone(),
        scheme: spec.scheme,
        clients: spec.num_clients,
        imbalance_period: spec.imbalance_period,
        folds: spec.folds,
        seed: spec.seed,
    };
    let file = RunReportFile::new(&m.label, &report, echo, table);
    Ok(MethodOutcome {
        label: m.label.clone(),
        report,
        file,
    })
}

/// Runs every method of the experiment spec. With `parallel` the methods run on
/// separate threads; results are collected in spec order either way.
pub fn run_experiment(spec: &ExperimentSpec, parallel: bool) -> CliResult<Vec<MethodOutcome>> {
    let data = load_data(&spec.data)?;
    let full = partition(&data, &partition_options(spec, spec.seed))?;
    if parallel {
        std::thread::scope(|s| {
            let handles: Vec<_> = spec
                .methods
                .iter()
                .map(|m| s.spawn(|| run_one(spec, m, &data, &full)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().map_err(|_| CliError::Failure("training thread panicked".into()))?)
                .collect()
        })
    } else {
        spec.methods.iter().map(|m| run_one(spec, m, &data, &full)).collect()
    }
}

pub fn write_outputs(outcomes: &[MethodOutcome], out: &Path) -> CliResult<()> {
    std::fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let groups = outcomes.first().map_or(0, |o| o.file.risk_table.group_risk.len());
    let mut summary = summary_header(groups);
    summary.push('\n');
    for o in outcomes {
        let dir = label_dir(out, &o.label);
        std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        write_json(&dir.join("run_report.json"), &o.file)?;
        write_json(&dir.join("model.json"), &ModelFile::new(o.report.model(), o.report.output_mode()))?;
        summary.push_str(&summary_row(&o.file));
        summary.push('\n');
    }
    let path = out.join("summary.csv");
    std::fs::write(&path, summary).map_err(|e| io_err(&path, e))
}

pub fn train(spec_path: &Path, out_flag: Option<PathBuf>, parallel: bool, seed_override: Option<u64>) -> CliResult<()> {
    let spec = ExperimentSpec::load(spec_path, seed_override)?;
    let out = out_flag
        .or_else(|| spec.out.as_ref().map(|o| spec_path.parent().unwrap_or(Path::new(".")).join(o)))
        .ok_or_else(|| CliError::Usage("no output directory: pass --out or set 'out' in the experiment spec".into()))?;
    let outcomes = run_experiment(&spec, parallel)?;
    write_outputs(&outcomes, &out)?;
    for o in &outcomes {
        let t = &o.file.risk_table;
        println!(
            "{:<14} worst group {} risk {:.4} ± {:.4} | best group {} risk {:.4} ± {:.4}",
            o.label, t.worst_group, t.worst_risk.mean, t.worst_risk.std, t.best_group, t.best_risk.mean, t.best_risk.std
        );
    }
    println!("reports written to {}", out.display());
    Ok(())
}

pub fn eval_model(model_path: &Path, data_path: &Path, schema: CsvSchema) -> CliResult<()> {
    let model = ModelFile::load(model_path)?;
    let data = load_csv(data_path, schema)?;
    let e = evaluate_groups(&model, &data)?;
    for (a, (r, acc)) in e.risks.iter().zip(&e.accuracies).enumerate() {
        println!("group {a}: risk {r:.6} accuracy {acc:.4}");
    }
    let table = RiskTable::from_evaluations(&[e]);
    println!(
        "worst group {} ({:.6}), best group {} ({:.6})",
        table.worst_group, table.worst_risk.mean, table.best_group, table.best_risk.mean
    );
    Ok(())
}

/// Closed-form reference for the synthetic task.
pub fn eval_oracle(params: &SyntheticParams, resolution: usize) -> CliResult<()> {
    params.validate()?;
    let mm = minimax_oracle(params, resolution)?;
    let [m0, m1] = analytic_synthetic_risks(params, mm.q_low, mm.q_high);
    println!(
        "minimax predictor q = ({:.4}, {:.4}): group risks ({m0:.4}, {m1:.4}), worst {:.4}",
        mm.q_low, mm.q_high, mm.risk
    );
    let (pl, ph) = pooled_optimum(params);
    let [p0, p1] = analytic_synthetic_risks(params, pl, ph);
    println!("pooled predictor  q = ({pl:.4}, {ph:.4}): group risks ({p0:.4}, {p1:.4})");
    Ok(())
}

pub fn check(suites: &[Suite], lr_mismatch: f64) -> CliResult<Vec<SuiteOutcome>> {
    let suites = if suites.is_empty() { &Suite::ALL[..] } else { suites };
    let outcomes: Vec<SuiteOutcome> = suites.iter().map(|&s| run_suite(s, lr_mismatch)).collect();
    for o in &outcomes {
        println!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
    }
    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.passed).map(|o| o.name).collect();
    if failed.is_empty() {
        Ok(outcomes)
    } else {
        Err(CliError::Failure(format!("failed suites: {}", failed.join(", "))))
    }
}

pub fn parse_scheme(s: &str) -> CliResult<Scheme> {
    s.parse().map_err(|e: fairfed::Error| CliError::Usage(e.to_string()))
}
