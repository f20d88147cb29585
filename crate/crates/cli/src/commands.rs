//! The four subcommands. Each writes its artifacts into an output directory
//! and returns a one-line summary for the terminal.

use std::path::{Path, PathBuf};
use std::time::Instant;

use gar_core::estimator::{self, FitSettings, Gamma, TuningGrid};
use gar_core::graph::{parse_edge_list, write_edge_list, Adjacency, GraphTopology};
use gar_core::linalg::sample_covariance;
use gar_core::simulate::{self, GarTruth, IsolationPolicy, SimDesign};
use serde_json::{json, Value};

use crate::config::{Command, RunConfig};
use crate::data::{self, Table};
use crate::error::{CliError, Result};
use crate::report::{self, envelope, matrix_from_rows, matrix_rows, model_json, number, read_json, write_json};

pub const DATA_FILE: &str = "data.csv";
pub const TRUTH_FILE: &str = "truth.json";
pub const TRUTH_EDGES_FILE: &str = "truth_edges.tsv";
pub const EDGES_FILE: &str = "edges.tsv";

/// Outcome of a run: terminal summary and warnings for stderr.
#[derive(Debug, Default)]
pub struct Outcome {
    pub summary: String,
    pub warnings: Vec<String>,
}

/// Run `config` into `out_dir`, writing the config echo and wall-clock timings alongside.
pub fn execute(config: &RunConfig, out_dir: &Path, threads: usize) -> Result<Outcome> {
    std::fs::create_dir_all(out_dir).map_err(CliError::io(out_dir))?;
    let start = Instant::now();
    let outcome = match config.command {
        Command::Simulate => simulate(config, out_dir)?,
        Command::Fit => fit(config, out_dir)?,
        Command::Gof => gof(config, out_dir)?,
        Command::Eval => eval(config, out_dir)?,
    };
    // kept out of the report so that reruns are byte-identical
    let timings = json!({ "seconds": start.elapsed().as_secs_f64(), "threads": threads });
    write_json(&out_dir.join(report::TIMINGS_FILE), &timings)?;
    report::write_text(&out_dir.join(report::CONFIG_FILE), &config.to_text())?;
    Ok(outcome)
}

pub fn design_from(config: &RunConfig) -> Result<SimDesign> {
    let p: usize = config.parse("p")?;
    let n: usize = config.parse("n")?;
    let isolation = match config.get("isolation") {
        "condition" => IsolationPolicy::Condition,
        "resample" => IsolationPolicy::Resample,
        "self-loop" => IsolationPolicy::SelfLoop,
        other => return Err(CliError::Config(format!("invalid value {other:?} for `isolation`"))),
    };
    let base = SimDesign::baseline(p, n, config.parse("seed")?);
    let design = SimDesign {
        edge_prob: config.parse_auto("edge_prob")?.unwrap_or(base.edge_prob),
        self_loop_prob: config.parse("self_loop_prob")?,
        weight_range: (config.parse("weight_min")?, config.parse("weight_max")?),
        theta0: config.parse("theta0")?,
        theta1: config.parse("theta1")?,
        isolation,
        ..base
    };
    design.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(design)
}

fn simulate(config: &RunConfig, out_dir: &Path) -> Result<Outcome> {
    let design = design_from(config)?;
    let truth = GarTruth::from_design(&design)?;
    let y = simulate::sample_gar(&design, &truth.l_normalized)?;
    data::write_csv(&out_dir.join(DATA_FILE), &y)?;
    report::write_text(&out_dir.join(TRUTH_EDGES_FILE), &write_edge_list(&truth.l, &truth.topology))?;
    let mut doc = envelope(config);
    doc["truth"] = json!({
        "p": design.p,
        "n": design.n,
        "edge_prob": design.edge_prob,
        "theta0": truth.theta0,
        "theta1": truth.theta1,
        "edges": truth.topology.len(),
        "self_loops": truth.adjacency.self_loop_count(),
        "resamples": truth.resamples,
        "patched": truth.patched,
        "adjacency": matrix_rows(truth.adjacency.weights()),
        "laplacian": matrix_rows(&truth.l),
        "v0": truth.v0.as_slice(),
    });
    write_json(&out_dir.join(TRUTH_FILE), &doc)?;
    Ok(Outcome {
        summary: format!("simulated n = {}, p = {} with {} true edges", design.n, design.p, truth.topology.len()),
        warnings: vec![],
    })
}

fn settings_from(config: &RunConfig) -> Result<FitSettings> {
    let mut settings = FitSettings::default();
    settings.admm.eps_abs = config.parse("eps_abs")?;
    settings.admm.eps_rel = config.parse("eps_rel")?;
    settings.admm.max_iter = config.parse("max_iter")?;
    settings.admm.rho = config.parse_auto("rho")?;
    settings.admm.validate().map_err(|e| CliError::Config(e.to_string()))?;
    settings.eigvec = gar_core::admm::AdmmSettings { rho: settings.eigvec.rho, ..settings.admm.clone() };
    Ok(settings)
}

fn load_table(config: &RunConfig) -> Result<(PathBuf, Table)> {
    let path = PathBuf::from(config.required("data")?);
    let mut table = data::read_csv(&path)?;
    if table.data.nrows() < 2 {
        return Err(CliError::Csv { path, message: format!("need at least 2 data rows, found {}", table.data.nrows()) });
    }
    if config.parse_bool("standardize")? {
        data::standardize(&mut table)?;
    }
    Ok((path, table))
}

fn data_json(table: &Table) -> Value {
    json!({ "n": table.data.nrows(), "p": table.data.ncols(), "header": table.had_header, "columns": table.names })
}

fn fit(config: &RunConfig, out_dir: &Path) -> Result<Outcome> {
    let (_, table) = load_table(config)?;
    let (n, p) = table.data.shape();
    let mut settings = settings_from(config)?;
    settings.gamma = match config.parse_auto::<f64>("gamma")? {
        None => Gamma::Auto,
        Some(g) if (0.0..=1.0).contains(&g) => Gamma::Fixed(g),
        Some(g) => return Err(CliError::Config(format!("gamma must lie in [0, 1], got {g}"))),
    };
    settings.warm_start = config.parse_bool("warm_start")?;
    let default = TuningGrid::default_for(p, n);
    let grid = TuningGrid {
        lambda_values: config.parse_list("lambda")?.unwrap_or(default.lambda_values),
        eps_thre_values: config.parse_list("eps_thre")?.unwrap_or(default.eps_thre_values),
    };
    grid.validate().map_err(|e| CliError::Config(e.to_string()))?;

    let fitted = estimator::fit_full(&table.data, &grid, &settings)?;
    let cell = fitted.selected_cell();
    report::write_text(&out_dir.join(EDGES_FILE), &write_edge_list(fitted.model.l(), &fitted.topology))?;

    let mut doc = envelope(config);
    doc["data"] = data_json(&table);
    doc["fit"] = json!({
        "gamma": fitted.gamma,
        "theta0_initial": fitted.theta0_initial,
        "grid": fitted.grid,
        "cells": fitted.cells,
        "selected": { "index": fitted.selected, "lambda": cell.lambda, "eps_thre": cell.eps_thre },
        "model": model_json(&fitted.model),
        "edges": fitted.topology.len(),
        "neg_loglik": fitted.neg_loglik,
        "loglik": fitted.loglik,
        "n_params": fitted.n_params,
    });
    doc["converged"] = json!({
        "selected": cell.converged,
        "all_cells": fitted.cells.iter().all(|c| c.converged),
        "failed_cells": fitted.cells.iter().filter(|c| c.error.is_some()).count(),
    });
    write_json(&out_dir.join(report::REPORT_FILE), &doc)?;

    let mut warnings = vec![];
    if !cell.converged {
        warnings.push("the selected cell hit the iteration cap; see `cells` in the report".into());
    }
    Ok(Outcome {
        summary: format!(
            "selected lambda = {:.4e}, eps_thre = {:.4e}: {} edges, loglik = {:.4}, {} parameters",
            cell.lambda,
            cell.eps_thre,
            fitted.topology.len(),
            fitted.loglik,
            fitted.n_params
        ),
        warnings,
    })
}

fn gof(config: &RunConfig, out_dir: &Path) -> Result<Outcome> {
    let (_, table) = load_table(config)?;
    let (n, p) = table.data.shape();
    let settings = settings_from(config)?;
    let b: usize = config.parse("bootstrap_b")?;
    if b == 0 {
        return Err(CliError::Config("bootstrap_b must be at least 1".into()));
    }
    let lambda = config.parse_auto::<f64>("lambda")?;
    let cov = sample_covariance(&table.data, true)?;
    let result = estimator::goodness_of_fit_covariance(&cov, lambda, b, config.parse("seed")?, &settings)?;

    let mut warnings = vec![];
    if p > n {
        warnings.push(format!(
            "p = {p} exceeds n = {n}; this goodness-of-fit measure is known to fail when p > n, so read GF with care"
        ));
    }
    if result.failed > 0 {
        warnings.push(format!("{} of {b} bootstrap refits failed and were excluded", result.failed));
    }
    let mut doc = envelope(config);
    doc["data"] = data_json(&table);
    doc["gof"] = json!(result);
    doc["converged"] = json!({ "unconverged_refits": result.unconverged });
    doc["warnings"] = json!(warnings);
    write_json(&out_dir.join(report::REPORT_FILE), &doc)?;
    Ok(Outcome { summary: format!("GF = {} over {} draws at lambda = {:.4e}", result.gf, result.ell_boot.len(), result.lambda), warnings })
}

/// Truth bundle written by `simulate`.
pub fn load_truth(dir: &Path) -> Result<GarTruth> {
    let path = dir.join(TRUTH_FILE);
    let doc = read_json(&path)?;
    let t = &doc["truth"];
    let adjacency = Adjacency::new(matrix_from_rows(&t["adjacency"], "truth.adjacency", &path)?)?;
    GarTruth::from_adjacency(adjacency, number(&t["theta0"], "truth.theta0", &path)?, number(&t["theta1"], "truth.theta1", &path)?, 0, vec![])
        .map_err(Into::into)
}

fn eval(config: &RunConfig, out_dir: &Path) -> Result<Outcome> {
    let fit_dir = PathBuf::from(config.required("fit_dir")?);
    let truth = load_truth(Path::new(config.required("truth_dir")?))?;
    let report_path = fit_dir.join(report::REPORT_FILE);
    let fit_doc = read_json(&report_path)?;
    let model = report::model_from_json(&fit_doc["fit"]["model"], &report_path)?;
    let edges_path = fit_dir.join(EDGES_FILE);
    let text = std::fs::read_to_string(&edges_path).map_err(CliError::io(&edges_path))?;
    let topology = GraphTopology::from_pairs(model.p(), parse_edge_list(&text)?.into_iter().map(|e| (e.i, e.j)))?;
    let metrics = simulate::evaluate(&model, &topology, &truth)?;

    let mut doc = envelope(config);
    doc["metrics"] = json!(metrics);
    doc["edges"] = json!({ "true": truth.topology.len(), "estimated": topology.len() });
    write_json(&out_dir.join(report::REPORT_FILE), &doc)?;
    Ok(Outcome {
        summary: format!(
            "power = {:.4}, fdr = {:.4}, f1 = {:.4}, relative L error = {:.4e}",
            metrics.power, metrics.fdr, metrics.f1, metrics.l_err
        ),
        warnings: vec![],
    })
}
