//! End-to-end experiment commands. Each reads an [`ExperimentConfig`], writes
//! its artefacts under `output_dir` together with the effective config, and
//! returns a summary. With `deterministic` set, no report contains timings,
//! so reruns are byte-identical.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{fit_with, initial_params, Ablation, FitOptions, FitReport, LearnFlags, Problem};
use crate::io::{create_dir, load_trace, read_json, save_trace, write_json, write_text, ExperimentConfig, LoadedTrace};
use crate::matrix::Matrix;
use crate::metrics::{assign_all, community_report, rel_err, CommunityReport, EmbeddingTable};
use crate::model::{HyperParams, ModelParams, Trace};
use crate::network::{export_graph, mwsf, GraphFormat, InfluenceGraph};
use crate::predict::{evaluate_topk, PredictionResult};
use crate::simulate::{generate_trace, SimOutput};

pub fn ablation_name(ablation: Ablation) -> &'static str {
    match ablation {
        Ablation::Full => "full",
        Ablation::NoInfluence => "no_influence",
        Ablation::NoBase => "no_base",
        Ablation::NoCategory => "no_category",
    }
}

/// Category factor used when ranking venues.
pub fn uses_category(ablation: Ablation) -> bool {
    ablation != Ablation::NoCategory
}

pub fn model_file(dir: &Path, ablation: Ablation) -> PathBuf {
    dir.join(format!("model_{}.json", ablation_name(ablation)))
}

/// A fitted model as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub ablation: Ablation,
    pub params: ModelParams,
    pub hyper: HyperParams,
    /// Original user ids by index.
    pub users: Vec<String>,
    pub train_events: usize,
    pub elbo_trace: Vec<f64>,
    pub final_elbo: f64,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_secs: Option<f64>,
}

fn timing(config: &ExperimentConfig, secs: f64) -> Option<f64> {
    (!config.deterministic).then_some(secs)
}

fn prepare_output(config: &ExperimentConfig) -> Result<()> {
    create_dir(&config.output_dir)?;
    write_json(&config.output_dir.join("config.json"), config)
}

fn load_split(config: &ExperimentConfig) -> Result<(LoadedTrace, Trace, Trace)> {
    let loaded = load_trace(config.require_trace()?, &config.load)?;
    let (train, test) = loaded.trace.split_at_fraction(config.train_fraction)?;
    Ok((loaded, train, test))
}

fn load_model(config: &ExperimentConfig, ablation: Ablation) -> Result<FittedModel> {
    let path = model_file(config.model_dir(), ablation);
    if !path.exists() {
        return Err(Error::config(format!("missing model file {}; run `fit` first", path.display())));
    }
    read_json(&path)
}

/// `model,K,hits,n_test` rows.
pub fn topk_csv(rows: &[(Ablation, PredictionResult)]) -> String {
    let mut out = String::from("model,K,hits,n_test\n");
    for (ablation, result) in rows {
        for (k, hits) in result.ks.iter().zip(&result.hits) {
            out.push_str(&format!("{},{k},{hits},{}\n", ablation_name(*ablation), result.n_test));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub n_events: usize,
    pub t_end: f64,
    pub truncated: bool,
    pub proposals: u64,
    pub accepted: u64,
    pub max_ratio: f64,
}

impl SimulationSummary {
    fn of(out: &SimOutput) -> Self {
        SimulationSummary {
            n_events: out.trace.len(),
            t_end: out.trace.region.t_end,
            truncated: out.truncated,
            proposals: out.stats.proposals,
            accepted: out.stats.accepted,
            max_ratio: out.stats.max_ratio,
        }
    }
}

fn write_simulation(config: &ExperimentConfig, out: &SimOutput) -> Result<SimulationSummary> {
    let dir = &config.output_dir;
    save_trace(&LoadedTrace::from_trace(out.trace.clone()), &dir.join("trace.csv"))?;
    write_json(&dir.join("true_params.json"), &out.params)?;
    write_json(&dir.join("hyper.json"), &out.hyper)?;
    let summary = SimulationSummary::of(out);
    write_json(&dir.join("simulation.json"), &summary)?;
    Ok(summary)
}

/// Generates a synthetic trace: `trace.csv`, `true_params.json`, `hyper.json`, `simulation.json`.
pub fn cmd_simulate(config: &ExperimentConfig) -> Result<SimulationSummary> {
    prepare_output(config)?;
    let out = generate_trace(&config.sim_config())?;
    if out.truncated {
        log::warn!("horizon reached after {} of {} events", out.trace.len(), config.sim.n_events);
    }
    write_simulation(config, &out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryResult {
    pub ablation: Ablation,
    pub rel_err_a: f64,
    pub rel_err_phi: f64,
    pub final_elbo: f64,
    pub converged: bool,
    pub elbo_trace: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_secs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopKRow {
    pub ablation: Ablation,
    pub ks: Vec<usize>,
    pub hits: Vec<usize>,
    pub n_test: usize,
    pub n_candidates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthReport {
    pub simulation: SimulationSummary,
    /// Full model, then the no-category ablation.
    pub recovery: Vec<RecoveryResult>,
    pub train_events: usize,
    pub test_events: usize,
    pub topk: Vec<TopKRow>,
}

impl SynthReport {
    pub fn recovery_for(&self, ablation: Ablation) -> Option<&RecoveryResult> {
        self.recovery.iter().find(|r| r.ablation == ablation)
    }

    pub fn topk_for(&self, ablation: Ablation) -> Option<&TopKRow> {
        self.topk.iter().find(|r| r.ablation == ablation)
    }
}

/// Starting point and options for a synthetic fit. Under the recovery protocol
/// μ, η, θ and π are the truth, A starts from the data-driven guess and φ is uniform.
fn synthetic_start(config: &ExperimentConfig, truth: &ModelParams, trace: &Trace, hyper: &HyperParams, ablation: Ablation) -> Result<(Option<ModelParams>, FitOptions)> {
    let mut options = FitOptions { ablation, ..config.fit.clone() };
    if !config.recover_influence_only {
        return Ok((None, options));
    }
    let guess = initial_params(&Problem::new(trace, hyper)?, config.seed)?;
    let mut init = truth.clone();
    init.a = guess.a;
    init.phi = Matrix::uniform_rows(truth.n_users(), truth.n_communities());
    options.learn = LearnFlags::influence_and_posterior();
    Ok((Some(init), options))
}

fn synthetic_fit(config: &ExperimentConfig, truth: &ModelParams, trace: &Trace, hyper: &HyperParams, ablation: Ablation) -> Result<FitReport> {
    let (init, options) = synthetic_start(config, truth, trace, hyper, ablation)?;
    log::info!("fitting {} on {} events", ablation_name(ablation), trace.len());
    fit_with(trace, hyper, init, &options)
}

/// Generate, recover A and φ, and compare ablations on next-venue prediction.
/// Writes `trace.csv`, `true_params.json`, `fitted_params.json`, `recovery.json`,
/// `topk.csv` and `report.json`.
pub fn cmd_synth_recover(config: &ExperimentConfig) -> Result<SynthReport> {
    prepare_output(config)?;
    let dir = &config.output_dir;
    let sim = config.sim_config();
    let out = generate_trace(&sim)?;
    let simulation = write_simulation(config, &out)?;
    let mut hyper = out.hyper.clone();
    config.model.apply_inference_settings(&mut hyper);
    hyper.seed = config.seed;
    let truth = &out.params;

    let mut recovery = Vec::new();
    for ablation in [Ablation::Full, Ablation::NoCategory] {
        let report = synthetic_fit(config, truth, &out.trace, &hyper, ablation)?;
        if ablation == Ablation::Full {
            write_json(&dir.join("fitted_params.json"), &report.params)?;
        }
        recovery.push(RecoveryResult {
            ablation,
            rel_err_a: rel_err(&truth.a, &report.params.a)?,
            rel_err_phi: rel_err(&truth.phi, &report.params.phi)?,
            final_elbo: report.final_elbo.value,
            converged: report.converged,
            elbo_trace: report.elbo_trace,
            wall_clock_secs: timing(config, report.wall_clock_secs),
        });
    }
    write_json(&dir.join("recovery.json"), &recovery)?;

    let (train, test) = out.trace.split_at_fraction(config.train_fraction)?;
    let mut rows = Vec::new();
    for &ablation in &config.ablations {
        let report = synthetic_fit(config, truth, &train, &hyper, ablation)?;
        let result = evaluate_topk(&report.params, &hyper, &train, &test, &config.ks, uses_category(ablation))?;
        rows.push((ablation, result));
    }
    write_text(&dir.join("topk.csv"), &topk_csv(&rows))?;
    let report = SynthReport {
        simulation,
        recovery,
        train_events: train.len(),
        test_events: test.len(),
        topk: rows
            .into_iter()
            .map(|(ablation, r)| TopKRow { ablation, ks: r.ks, hits: r.hits, n_test: r.n_test, n_candidates: r.n_candidates })
            .collect(),
    };
    write_json(&dir.join("report.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub ablation: Ablation,
    pub final_elbo: f64,
    pub epochs: usize,
    pub converged: bool,
    pub path: PathBuf,
}

/// Fits every configured ablation on the training split; writes `model_<name>.json`.
pub fn cmd_fit(config: &ExperimentConfig) -> Result<Vec<FitSummary>> {
    prepare_output(config)?;
    let (loaded, train, _) = load_split(config)?;
    let hyper = config.model.hyper_for(&train, config.seed)?;
    let mut summaries = Vec::new();
    for &ablation in &config.ablations {
        let start = Instant::now();
        let options = FitOptions { ablation, ..config.fit.clone() };
        log::info!("fitting {} on {} events", ablation_name(ablation), train.len());
        let report = fit_with(&train, &hyper, None, &options)?;
        let model = FittedModel {
            ablation,
            params: report.params,
            hyper: hyper.clone(),
            users: loaded.users.clone(),
            train_events: train.len(),
            final_elbo: report.final_elbo.value,
            converged: report.converged,
            elbo_trace: report.elbo_trace,
            wall_clock_secs: timing(config, start.elapsed().as_secs_f64()),
        };
        let path = model_file(&config.output_dir, ablation);
        write_json(&path, &model)?;
        summaries.push(FitSummary { ablation, final_elbo: model.final_elbo, epochs: model.elbo_trace.len(), converged: model.converged, path });
    }
    let mut csv = String::from("model,final_elbo,epochs,converged\n");
    for s in &summaries {
        csv.push_str(&format!("{},{},{},{}\n", ablation_name(s.ablation), s.final_elbo, s.epochs, s.converged));
    }
    write_text(&config.output_dir.join("fit_summary.csv"), &csv)?;
    Ok(summaries)
}

/// Top-K hits of every configured ablation on the test split; writes `predictions.csv`.
pub fn cmd_predict(config: &ExperimentConfig) -> Result<Vec<(Ablation, PredictionResult)>> {
    prepare_output(config)?;
    let (_, train, test) = load_split(config)?;
    let mut rows = Vec::new();
    for &ablation in &config.ablations {
        let model = load_model(config, ablation)?;
        let result = evaluate_topk(&model.params, &model.hyper, &train, &test, &config.ks, uses_category(ablation))?;
        rows.push((ablation, result));
    }
    write_text(&config.output_dir.join("predictions.csv"), &topk_csv(&rows))?;
    Ok(rows)
}

/// Category and location losses of the full model's communities on the
/// training split; writes `communities.csv` and `community_report.json`.
pub fn cmd_eval_communities(config: &ExperimentConfig) -> Result<CommunityReport> {
    prepare_output(config)?;
    let embeddings_path = config.embeddings.as_deref().ok_or_else(|| Error::config("no embeddings file configured"))?;
    let embeddings = EmbeddingTable::load(embeddings_path)?;
    let (_, train, _) = load_split(config)?;
    let model = load_model(config, Ablation::Full)?;
    let assignments = assign_all(&model.params, &model.hyper, &train, true, config.soft_assignments)?;
    let report = community_report(&assignments, &train, &embeddings, &config.k_cats, model.params.n_communities())?;
    let mut csv = String::from("metric,k_cat,mean,sum\n");
    for loss in &report.category_loss {
        csv.push_str(&format!("category,{},{},{}\n", loss.k_cat, loss.mean, loss.sum));
    }
    csv.push_str(&format!("location,,{},{}\n", report.location_loss, report.location_loss * train.len() as f64));
    write_text(&config.output_dir.join("communities.csv"), &csv)?;
    write_json(&config.output_dir.join("community_report.json"), &report)?;
    Ok(report)
}

/// Directed influence edges of the full model plus, per threshold, the
/// spanning forest as GraphML and CSV.
pub fn cmd_export_network(config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    prepare_output(config)?;
    let model = load_model(config, Ablation::Full)?;
    let graph = InfluenceGraph::from_influence(&model.params.a, Some(model.users.clone()))?;
    let mut written = Vec::new();
    let all = config.output_dir.join("influence_edges.csv");
    export_graph(&graph, &graph.edges, true, &all, GraphFormat::Csv)?;
    written.push(all);
    for &threshold in &config.thresholds {
        let forest = mwsf(&graph, threshold)?;
        for format in [GraphFormat::GraphMl, GraphFormat::Csv] {
            let path = config.output_dir.join(format!("forest_t{threshold:.2}.{}", format.extension()));
            export_graph(&graph, &forest, false, &path, format)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Sizes the global worker pool. Results do not depend on the thread count.
pub fn init_thread_pool(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    }
    Ok(())
}
