use std::path::Path;

use serde::Serialize;

use regret_tree::analysis::{regret_report, RegretReport};
use regret_tree::dataset::{
    load_csv, make_stable_unstable, make_synthetic, split_indices, Dataset, Schema,
};
use regret_tree::oracle::{
    fit_logistic, leaf_size_sweep_with, validate_decomposition, SweepConfig, DEFAULT_MAX_ITER,
    DEFAULT_TOL,
};
use regret_tree::regret::Resampling;
use regret_tree::rng::derive_seed;
use regret_tree::selective::{hard_predictions, recall_coverage_curve, SelectiveCurve, Strategy};

use crate::config::{DatasetConfig, DatasetSource, ResampleMode, RunConfig};
use crate::output::{self, TableRow};
use crate::svg::{self, Series};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Validate,
    Sweep,
    Table,
    Selective,
}

/// Seed tag for the train/test split, shared by every command.
const SPLIT_TAG: u64 = 1;

pub fn load_dataset(ds: &DatasetConfig) -> Result<Dataset, CliError> {
    let config_err = |e: regret_tree::Error| CliError::Config(format!("dataset {}: {e}", ds.name));
    match &ds.source {
        DatasetSource::Synthetic {
            n,
            d,
            weights,
            intercept,
            seed,
        } => Ok(make_synthetic(*n, *d, weights, *intercept, *seed)
            .map_err(config_err)?
            .0),
        DatasetSource::StableUnstable {
            n,
            stable_fraction,
            unstable_p,
            seed,
        } => Ok(
            make_stable_unstable(*n, *stable_fraction, *unstable_p, *seed)
                .map_err(config_err)?
                .0,
        ),
        DatasetSource::Csv { path, schema } => {
            let schema = Schema::load(schema).map_err(config_err)?;
            load_csv(path, &schema).map_err(config_err)
        }
    }
}

fn split(data: &Dataset, config: &RunConfig) -> Result<(Dataset, Dataset), CliError> {
    let (train, test) = split_indices(
        data.n(),
        config.test_fraction,
        derive_seed(config.seed, SPLIT_TAG),
    )?;
    Ok((data.subset(&train), data.subset(&test)))
}

pub fn run_command(command: Command, config: &RunConfig) -> Result<String, CliError> {
    config.validate()?;
    std::fs::create_dir_all(&config.out)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", config.out.display())))?;
    match command {
        Command::Validate => cmd_validate(config),
        Command::Sweep => cmd_sweep(config),
        Command::Table => cmd_regret_table(config),
        Command::Selective => cmd_selective(config),
    }
}

/// Decomposition check on the first dataset. Returns the printed summary.
pub fn cmd_validate(config: &RunConfig) -> Result<String, CliError> {
    let ds = &config.datasets[0];
    let data = load_dataset(ds)?;
    let (train, test) = split(&data, config)?;
    let k = config.eval_points.min(test.n());
    let points: Vec<&[f64]> = test.rows().take(k).collect();
    let report = validate_decomposition(
        &train,
        config.realizations,
        &config.tree_params(),
        &points,
        config.seed,
    )?;
    let out = &config.out;
    output::write_file(
        &out.join("decomposition.csv"),
        &output::decomposition_csv(&report),
    )?;
    output::write_file(&out.join("decomposition.json"), &output::to_json(&report)?)?;
    let pts: Vec<(f64, f64)> = report
        .points
        .iter()
        .map(|d| (d.total_estimated, d.total_simulated))
        .collect();
    output::write_file(
        &out.join("fig1.svg"),
        &svg::identity_scatter(
            &format!("Variance decomposition: {}", ds.name),
            "estimated total variance",
            "simulated total variance",
            &pts,
        ),
    )?;
    Ok(format!(
        "dataset={} points={} realizations={}\ncorrelation={}\nmedian_relative_error={}\n",
        ds.name,
        report.points.len(),
        report.realizations,
        report.correlation,
        report.median_relative_error
    ))
}

pub fn cmd_sweep(config: &RunConfig) -> Result<String, CliError> {
    let ds = &config.datasets[0];
    let data = load_dataset(ds)?;
    let sweep = SweepConfig {
        max_depth: config.sweep_max_depth,
        test_fraction: config.test_fraction,
    };
    let report = leaf_size_sweep_with(
        &data,
        &config.sweep_grid,
        config.sweep_realizations,
        config.seed,
        &sweep,
    )?;
    let out = &config.out;
    output::write_file(&out.join("sweep.csv"), &output::sweep_csv(&report))?;
    output::write_file(&out.join("sweep.json"), &output::to_json(&report)?)?;
    let regret = Series {
        name: "leaf regret",
        points: report
            .points
            .iter()
            .map(|p| (p.min_leaf as f64, p.leaf_regret))
            .collect(),
    };
    let loss = Series {
        name: "held-out log loss",
        points: report
            .points
            .iter()
            .map(|p| (p.min_leaf as f64, p.log_loss))
            .collect(),
    };
    output::write_file(
        &out.join("fig2.svg"),
        &svg::dual_axis(
            &format!("Minimum leaf size: {}", ds.name),
            "min_leaf",
            &regret,
            &loss,
            report.points.len() > 1,
        ),
    )?;
    let mut summary = format!("dataset={} realizations={}\n", ds.name, report.realizations);
    for p in &report.points {
        summary.push_str(&format!(
            "min_leaf={} leaf_regret={} log_loss={}\n",
            p.min_leaf, p.leaf_regret, p.log_loss
        ));
    }
    Ok(summary)
}

fn dataset_report(data: &Dataset, config: &RunConfig) -> Result<(Dataset, RegretReport), CliError> {
    let (train, test) = split(data, config)?;
    let params = config.tree_params();
    let report = match config.resample {
        ResampleMode::Bootstrap => regret_report(
            &train,
            &test,
            &params,
            config.bootstrap,
            config.seed,
            Resampling::Bootstrap,
        )?,
        ResampleMode::LabelRedraw => {
            let oracle = fit_logistic(&train, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
            let p_star = oracle.probs(&train)?;
            regret_report(
                &train,
                &test,
                &params,
                config.bootstrap,
                config.seed,
                Resampling::LabelRedraw { p_star: &p_star },
            )?
        }
    }
    .1;
    Ok((test, report))
}

/// One row per configured dataset, plus a per-instance report for each.
pub fn cmd_regret_table(config: &RunConfig) -> Result<String, CliError> {
    let mut rows = Vec::with_capacity(config.datasets.len());
    for ds in &config.datasets {
        let data = load_dataset(ds)?;
        let (_, report) = dataset_report(&data, config)?;
        write_regret_report(&config.out, &ds.name, &report)?;
        rows.push(TableRow::new(
            &ds.name,
            report.mean_leaf,
            report.mean_structural,
        ));
    }
    output::write_file(&config.out.join("table1.csv"), &output::table_csv(&rows))?;
    let text = output::table_text(&rows);
    output::write_file(&config.out.join("table1.txt"), &text)?;
    Ok(text)
}

fn write_regret_report(dir: &Path, name: &str, report: &RegretReport) -> Result<(), CliError> {
    output::write_file(
        &dir.join(format!("regret_{name}.csv")),
        &output::regret_csv(report),
    )?;
    output::write_file(
        &dir.join(format!("regret_{name}.json")),
        &output::to_json(report)?,
    )
}

#[derive(Serialize)]
struct SelectiveSummary<'a> {
    dataset: &'a str,
    /// How recall is defined on a partially retained set.
    recall: &'static str,
    resampling: &'a str,
    replications: usize,
    seed: u64,
    curves: &'a [SelectiveCurve],
}

pub const RECALL_DEFINITION: &str =
    "recall over the retained subset: true positives / positives among retained instances";

pub fn cmd_selective(config: &RunConfig) -> Result<String, CliError> {
    let ds = &config.datasets[0];
    let data = load_dataset(ds)?;
    let (test, report) = dataset_report(&data, config)?;
    write_regret_report(&config.out, &ds.name, &report)?;
    let predictions = hard_predictions(&report.predictions());
    let scores = report.scores()?;
    let curves = Strategy::ALL
        .iter()
        .map(|&s| {
            recall_coverage_curve(
                &predictions,
                test.labels(),
                &scores,
                s,
                &config.coverage_grid,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let out = &config.out;
    output::write_file(&out.join("selective.csv"), &output::selective_csv(&curves))?;
    let summary = SelectiveSummary {
        dataset: &ds.name,
        recall: RECALL_DEFINITION,
        resampling: &report.resampling,
        replications: report.replications,
        seed: report.seed,
        curves: &curves,
    };
    output::write_file(&out.join("selective.json"), &output::to_json(&summary)?)?;
    let series: Vec<Series> = curves
        .iter()
        .map(|c| Series {
            name: c.strategy.as_str(),
            points: c
                .points
                .iter()
                .filter_map(|p| p.recall.map(|r| (p.coverage, r)))
                .collect(),
        })
        .collect();
    output::write_file(
        &out.join("fig3.svg"),
        &svg::lines(
            &format!("Selective prediction: {}", ds.name),
            "coverage",
            "recall (retained subset)",
            &series,
            true,
        ),
    )?;
    let mut text = format!("dataset={} ({})\n", ds.name, RECALL_DEFINITION);
    for c in &curves {
        let first = c.points.first().and_then(|p| p.recall);
        let last = c.points.last();
        text.push_str(&format!(
            "{}: recall@{}={} recall@{}={}\n",
            c.strategy,
            c.points[0].coverage,
            fmt_opt(first),
            last.map(|p| p.coverage).unwrap_or(f64::NAN),
            fmt_opt(last.and_then(|p| p.recall)),
        ));
    }
    Ok(text)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string())
        .unwrap_or_else(|| "undefined".into())
}
