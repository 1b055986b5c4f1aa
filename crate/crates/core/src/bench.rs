//! Experiment configuration, run matrix, error metric and report emission.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::{CoeffInit, FreqInit};
use crate::model::{init_params, load_for, read_checkpoint, write_checkpoint, Activation, Arch, FeatureConfig, Model, NetworkSpec};
use crate::pde::{build_oracle, OracleGrid, OracleResolution, PdeProblem, Point, ProblemId, ReferenceSolution};
use crate::spectra::{slq_density, EigSummary, SlqConfig, SpectralDensity, DENSITY_THRESHOLDS};
use crate::training::{
    run_schedule, sample_collocation, LossWeights, Phase, PinnObjective, RunOptions, ScheduleKind, ScheduleSpec,
    Sizes, TrainReport,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    Pinn,
    Fls,
    Wpinn,
    Rba,
    Rff,
    Rbf,
    Rbfp,
    Safenet,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Pinn,
        Method::Fls,
        Method::Wpinn,
        Method::Rba,
        Method::Rff,
        Method::Rbf,
        Method::Rbfp,
        Method::Safenet,
    ];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format!("{self:?}").to_uppercase())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let t: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_uppercase();
        Method::ALL
            .into_iter()
            .find(|m| m.to_string() == t)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

impl TryFrom<String> for Method {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.to_string()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    #[default]
    Desk,
    Full,
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "desk" => Ok(Preset::Desk),
            "full" => Ok(Preset::Full),
            _ => Err(Error::Config(format!("unknown preset '{s}'"))),
        }
    }
}

impl Preset {
    pub fn sizes(self) -> Sizes {
        match self {
            Preset::Desk => Sizes::DESK,
            Preset::Full => Sizes::FULL,
        }
    }

    pub fn features(self) -> usize {
        match self {
            Preset::Desk => 64,
            Preset::Full => 128,
        }
    }

    pub fn seeds(self) -> Vec<u64> {
        match self {
            Preset::Desk => vec![0, 1, 2],
            Preset::Full => vec![0, 1, 2, 3, 4],
        }
    }

    pub fn schedule(self, kind: ScheduleKind) -> ScheduleSpec {
        match self {
            Preset::Desk => ScheduleSpec::desk(kind),
            Preset::Full => ScheduleSpec::full(kind),
        }
    }
}

/// One cell of the experiment matrix. Unset options fall back to the preset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemId,
    pub method: Method,
    pub schedule: ScheduleKind,
    pub preset: Preset,
    pub seeds: Option<Vec<u64>>,
    /// Fourier feature width for the trainable feature network.
    pub features: Option<usize>,
    pub activation: Activation,
    pub depth: Option<usize>,
    pub normalize: bool,
    pub dkf: bool,
    pub freq_init: FreqInit,
    pub coeff_init: CoeffInit,
    pub sizes: Option<Sizes>,
    /// Caps every phase at this global iteration.
    pub max_iterations: Option<usize>,
    /// Use the full first-phase learning-rate grid at desk scale.
    pub full_lr_grid: bool,
    pub log_every: usize,
    /// Evaluate the error metric at every logged row.
    pub track_l2re: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            problem: ProblemId::Wave,
            method: Method::Safenet,
            schedule: ScheduleKind::S1,
            preset: Preset::Desk,
            seeds: None,
            features: None,
            activation: Activation::Tanh,
            depth: None,
            normalize: true,
            dkf: true,
            freq_init: FreqInit::Harmonic,
            coeff_init: CoeffInit::Unit,
            sizes: None,
            max_iterations: None,
            full_lr_grid: false,
            log_every: 100,
            track_l2re: true,
        }
    }
}

impl ExperimentConfig {
    pub fn new(problem: ProblemId, method: Method, schedule: ScheduleKind) -> Self {
        ExperimentConfig {
            problem,
            method,
            schedule,
            ..Default::default()
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.seeds.clone().unwrap_or_else(|| self.preset.seeds())
    }

    pub fn sizes(&self) -> Sizes {
        self.sizes.unwrap_or_else(|| self.preset.sizes())
    }

    pub fn key(&self) -> String {
        format!("{}/{}/{}", self.problem.key(), self.method, self.schedule)
    }

    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        let d = Sha256::digest(json);
        d.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.as_ref().is_some_and(Vec::is_empty) {
            return Err(Error::Config("seed list is empty".into()));
        }
        if self.features == Some(0) || self.depth == Some(0) {
            return Err(Error::Config("feature count and depth must be positive".into()));
        }
        let s = self.sizes();
        if s.n_res == 0 || s.n_bc == 0 || s.n_ic == 0 {
            return Err(Error::Config("collocation sizes must be positive".into()));
        }
        if self.log_every == 0 {
            return Err(Error::Config("log_every must be positive".into()));
        }
        Ok(())
    }

    pub fn network_spec(&self) -> NetworkSpec {
        let raw = FeatureConfig::Raw;
        let mut spec = match self.method {
            Method::Pinn | Method::Wpinn => NetworkSpec::mlp(Arch::Mlp4x50, raw),
            Method::Fls => NetworkSpec::mlp(Arch::Fls4x50, raw),
            Method::Rba => NetworkSpec::mlp(Arch::Mlp6x50, FeatureConfig::Periodic { m: 5 }),
            Method::Rff => NetworkSpec::mlp(
                Arch::Mlp4x50,
                FeatureConfig::Rff {
                    m: 64,
                    sigma_spatial: 200.0,
                    sigma_temporal: 10.0,
                },
            ),
            Method::Rbf => NetworkSpec::mlp(Arch::Mlp4x50, FeatureConfig::Rbf { m: 128, poly_order: 0 }),
            Method::Rbfp => NetworkSpec::mlp(Arch::Mlp4x50, FeatureConfig::Rbf { m: 128, poly_order: 2 }),
            Method::Safenet => {
                let mut s = NetworkSpec::safenet(self.features.unwrap_or_else(|| self.preset.features()));
                if let FeatureConfig::Fourier { dkf, normalize, .. } = &mut s.features {
                    *dkf = self.dkf;
                    *normalize = self.normalize;
                }
                s
            }
        };
        spec.activation = self.activation;
        if let Some(d) = self.depth {
            spec.depth = d;
        }
        spec
    }

    pub fn schedule_spec(&self) -> ScheduleSpec {
        let mut s = self.preset.schedule(self.schedule);
        if self.full_lr_grid && self.schedule == ScheduleKind::S2 {
            s.adam1_lr_grid = ScheduleSpec::full(ScheduleKind::S2).adam1_lr_grid;
        }
        if let Some(cap) = self.max_iterations {
            for p in &mut s.phases {
                match p {
                    Phase::Adam { until, .. } | Phase::AdamPlateau { until, .. } | Phase::Lbfgs { until } => {
                        *until = (*until).min(cap)
                    }
                }
            }
        }
        s
    }
}

/// Accepts a single config object, an array, or `{"experiments": [...]}`.
pub fn parse_configs(text: &str) -> Result<Vec<ExperimentConfig>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Doc {
        Many(Vec<ExperimentConfig>),
        Wrapped { experiments: Vec<ExperimentConfig> },
        One(Box<ExperimentConfig>),
    }
    let v: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let doc: Doc = serde_json::from_value(v.clone()).map_err(|_| {
        // re-parse as a single object for a precise message
        match serde_json::from_value::<ExperimentConfig>(v) {
            Err(e) => Error::Config(e.to_string()),
            Ok(_) => Error::Config("unrecognized config layout".into()),
        }
    })?;
    let list = match doc {
        Doc::Many(v) | Doc::Wrapped { experiments: v } => v,
        Doc::One(c) => vec![*c],
    };
    for c in &list {
        c.validate()?;
    }
    Ok(list)
}

pub fn load_configs(path: &Path) -> Result<Vec<ExperimentConfig>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_configs(&text)
}

// ---------------------------------------------------------------------------
// Error metric

/// `||pred - truth|| / ||truth||`.
pub fn l2re(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch(pred.len(), truth.len()));
    }
    let den: f64 = truth.iter().map(|v| v * v).sum::<f64>().sqrt();
    if den == 0.0 {
        return Err(Error::ZeroTruthNorm);
    }
    let num: f64 = pred.iter().zip(truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    Ok(num / den)
}

/// 101 x 101 nodes in `(x, t)`, or 64 x 64 x 11 in `(x, y, t)`.
pub fn eval_grid(problem: &PdeProblem) -> Vec<Point> {
    let d = &problem.domain;
    let t = d.time();
    match d.y {
        Some(y) => {
            let mut v = Vec::with_capacity(64 * 64 * 11);
            for k in 0..11 {
                for j in 0..64 {
                    for i in 0..64 {
                        v.push(Point::new_2d(d.x.node(i, 64), y.node(j, 64), t.node(k, 11)));
                    }
                }
            }
            v
        }
        None => {
            let mut v = Vec::with_capacity(101 * 101);
            for k in 0..101 {
                for i in 0..101 {
                    v.push(Point::new(d.x.node(i, 101), t.node(k, 101)));
                }
            }
            v
        }
    }
}

pub fn oracle_path(dir: &Path, id: ProblemId) -> PathBuf {
    dir.join(format!("{}.oracle", id.key()))
}

/// Problem with a usable reference, loading or building oracles as needed.
pub fn prepare_problem(id: ProblemId, oracle_dir: Option<&Path>) -> Result<PdeProblem> {
    let p = PdeProblem::new(id);
    if !matches!(p.reference, ReferenceSolution::Pending) {
        return Ok(p);
    }
    if let Some(dir) = oracle_dir {
        let path = oracle_path(dir, id);
        if path.exists() {
            return Ok(p.with_reference(ReferenceSolution::OracleGrid(OracleGrid::read(&path)?)));
        }
    }
    let r = build_oracle(&p, &OracleResolution::default())?;
    if let (Some(dir), ReferenceSolution::OracleGrid(g)) = (oracle_dir, &r) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        g.write(&oracle_path(dir, id))?;
    }
    Ok(p.with_reference(r))
}

pub fn truth_on_grid(problem: &PdeProblem) -> Result<(Vec<Point>, Vec<f64>)> {
    let grid = eval_grid(problem);
    let truth = grid.iter().map(|&p| problem.reference_eval(p)).collect::<Result<Vec<_>>>()?;
    Ok((grid, truth))
}

// ---------------------------------------------------------------------------
// Runs

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseLoss {
    pub phase: String,
    pub end_iter: usize,
    pub loss: f64,
    pub stop: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub config_hash: String,
    pub problem: ProblemId,
    pub method: Method,
    pub schedule: ScheduleKind,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l2re: Option<f64>,
    pub final_loss: f64,
    pub phase_losses: Vec<PhaseLoss>,
    pub runtime_s: f64,
    pub divergence: bool,
    pub selected_lr: Option<f64>,
    pub n_params: usize,
}

pub struct RunOutcome {
    pub config: ExperimentConfig,
    pub row: ResultRow,
    pub report: TrainReport,
    pub model: Model,
}

#[derive(Clone, Debug, Default)]
pub struct RunContext {
    pub oracle_dir: Option<PathBuf>,
    /// Iterations at which parameter snapshots are kept.
    pub snapshots: Vec<usize>,
}

/// Model, collocation loss and initial parameters for one `(config, seed)`.
pub fn setup_run(cfg: &ExperimentConfig, problem: &PdeProblem, seed: u64) -> Result<(Model, PinnObjective, Vec<f64>)> {
    let model = Model::new(&cfg.network_spec(), problem, seed)?;
    let params = init_params(&model, seed, cfg.freq_init, cfg.coeff_init).values;
    let colloc = sample_collocation(problem, seed, cfg.sizes());
    let obj = PinnObjective::new(problem, &model, &colloc, LossWeights::default(), cfg.method == Method::Rba)?;
    Ok((model, obj, params))
}

pub fn run_single(cfg: &ExperimentConfig, seed: u64, ctx: &RunContext) -> Result<RunOutcome> {
    cfg.validate()?;
    let problem = prepare_problem(cfg.problem, ctx.oracle_dir.as_deref())?;
    let (grid, truth) = truth_on_grid(&problem)?;
    let (model, mut obj, params) = setup_run(cfg, &problem, seed)?;
    let colloc = sample_collocation(&problem, seed, cfg.sizes());
    let metric = |x: &[f64]| -> Option<f64> {
        let pred = model.forward_many(x, &grid).ok()?;
        let e = l2re(&pred, &truth).ok()?;
        e.is_finite().then_some(e)
    };
    let opts = RunOptions {
        log_every: cfg.log_every,
        wpinn: (cfg.method == Method::Wpinn).then_some((&colloc, 1000)),
        l2re: if cfg.track_l2re { Some(&metric) } else { None },
        snapshots: &ctx.snapshots,
    };
    let t0 = Instant::now();
    let report = run_schedule(&cfg.schedule_spec(), &mut obj, &params, &opts);
    let runtime_s = t0.elapsed().as_secs_f64();
    let final_l2re = if report.diverged() { None } else { metric(&report.params) };
    let phase_losses = report
        .phases
        .iter()
        .map(|ph| PhaseLoss {
            phase: ph.name.clone(),
            end_iter: ph.end,
            loss: report
                .rows
                .iter()
                .rev()
                .find(|r| r.iter <= ph.end)
                .map_or(f64::NAN, |r| r.loss),
            stop: ph.stop.clone(),
        })
        .collect();
    let row = ResultRow {
        config_hash: cfg.hash(),
        problem: cfg.problem,
        method: cfg.method,
        schedule: cfg.schedule,
        seed,
        l2re: final_l2re,
        final_loss: report.final_loss,
        phase_losses,
        runtime_s,
        divergence: report.diverged(),
        selected_lr: report.selected_lr,
        n_params: model.n_params,
    };
    Ok(RunOutcome {
        config: cfg.clone(),
        row,
        report,
        model,
    })
}

/// One run per `(config, seed)` on a pool of `jobs` workers, in input order.
pub fn run_matrix(configs: &[ExperimentConfig], jobs: usize, ctx: &RunContext) -> Result<Vec<RunOutcome>> {
    for c in configs {
        c.validate()?;
    }
    // build each oracle once before fanning out
    let mut seen = Vec::new();
    for c in configs {
        if !seen.contains(&c.problem) {
            seen.push(c.problem);
            prepare_problem(c.problem, ctx.oracle_dir.as_deref())?;
        }
    }
    let tasks: Vec<(&ExperimentConfig, u64)> =
        configs.iter().flat_map(|c| c.seeds().into_iter().map(move |s| (c, s))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| tasks.par_iter().map(|(c, s)| run_single(c, *s, ctx)).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub median_l2re: Option<f64>,
    pub completed: usize,
    pub total: usize,
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Medians over completed seeds keyed by `problem/METHOD/schedule`.
pub fn summarize(rows: &[ResultRow]) -> BTreeMap<String, SummaryEntry> {
    let mut groups: BTreeMap<String, Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        groups
            .entry(format!("{}/{}/{}", r.problem.key(), r.method, r.schedule))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|(k, rs)| {
            let done: Vec<f64> = rs.iter().filter(|r| !r.divergence).filter_map(|r| r.l2re).collect();
            (
                k,
                SummaryEntry {
                    median_l2re: median(&done),
                    completed: done.len(),
                    total: rs.len(),
                },
            )
        })
        .collect()
}

/// `(1 - new / baseline) * 100`.
pub fn improvement_pct(baseline: f64, new: f64) -> f64 {
    (1.0 - new / baseline) * 100.0
}

/// Improvement of every schedule over S1 for each `(problem, method)`.
pub fn schedule_improvements(summary: &BTreeMap<String, SummaryEntry>) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for (k, e) in summary {
        let Some((prefix, sched)) = k.rsplit_once('/') else { continue };
        if sched == "S1" {
            continue;
        }
        let base = summary.get(&format!("{prefix}/S1")).and_then(|b| b.median_l2re);
        if let (Some(b), Some(n)) = (base, e.median_l2re) {
            out.insert(format!("{prefix}/S1->{sched}"), improvement_pct(b, n));
        }
    }
    out
}

pub fn run_stem(row: &ResultRow) -> String {
    format!(
        "{}_{}_{}_{}_seed{}",
        row.problem.key(),
        row.method,
        row.schedule,
        row.config_hash,
        row.seed
    )
}

/// Relative error of a stored checkpoint against the reference, with the
/// evaluation grid and both fields.
pub struct Evaluation {
    pub l2re: f64,
    pub spatial_dims: usize,
    pub grid: Vec<Point>,
    pub pred: Vec<f64>,
    pub truth: Vec<f64>,
}

pub fn evaluate_checkpoint(cfg: &ExperimentConfig, path: &Path, oracle_dir: Option<&Path>) -> Result<Evaluation> {
    let problem = prepare_problem(cfg.problem, oracle_dir)?;
    let (header, _) = read_checkpoint(path)?;
    let model = Model::new(&cfg.network_spec(), &problem, header.seed)?;
    let (_, params) = load_for(&model, path)?;
    let (grid, truth) = truth_on_grid(&problem)?;
    let pred = model.forward_many(&params, &grid)?;
    Ok(Evaluation {
        l2re: l2re(&pred, &truth)?,
        spatial_dims: problem.domain.spatial_dims,
        grid,
        pred,
        truth,
    })
}

impl Evaluation {
    pub fn to_csv(&self) -> String {
        let two_d = self.spatial_dims == 2;
        let mut s = String::from(if two_d { "x,y,t,pred,truth\n" } else { "x,t,pred,truth\n" });
        for ((p, a), b) in self.grid.iter().zip(&self.pred).zip(&self.truth) {
            if two_d {
                s.push_str(&format!("{},{},{},{},{}\n", p.x, p.y, p.t, a, b));
            } else {
                s.push_str(&format!("{},{},{},{}\n", p.x, p.t, a, b));
            }
        }
        s
    }
}

fn write(path: &Path, data: &str) -> Result<()> {
    std::fs::write(path, data).map_err(|e| Error::io(path, e))
}

/// Trajectory CSVs, final checkpoints, `results.json`, `results.csv` and
/// `summary.json`.
pub fn emit_reports(out: &Path, outcomes: &[RunOutcome]) -> Result<()> {
    let runs = out.join("runs");
    let ckpt = out.join("checkpoints");
    for d in [&runs, &ckpt] {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    for o in outcomes {
        let stem = run_stem(&o.row);
        write(&runs.join(format!("{stem}.csv")), &o.report.to_csv())?;
        write_checkpoint(&ckpt.join(format!("{stem}.ckpt")), &o.model, o.row.seed, &o.report.params)?;
    }
    let rows: Vec<ResultRow> = outcomes.iter().map(|o| o.row.clone()).collect();
    write(&out.join("results.json"), &serde_json::to_string_pretty(&rows).expect("rows serialize"))?;
    let mut csv = String::from("config_hash,problem,method,schedule,seed,l2re,final_loss,runtime_s,divergence\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{:.3},{}\n",
            r.config_hash,
            r.problem.key(),
            r.method,
            r.schedule,
            r.seed,
            r.l2re.map(|v| v.to_string()).unwrap_or_default(),
            r.final_loss,
            r.runtime_s,
            r.divergence
        ));
    }
    write(&out.join("results.csv"), &csv)?;
    let summary = summarize(&rows);
    let doc = serde_json::json!({
        "summary": summary,
        "improvements": schedule_improvements(&summary),
    });
    write(&out.join("summary.json"), &serde_json::to_string_pretty(&doc).expect("summary serializes"))
}

// ---------------------------------------------------------------------------
// Spectral study

pub struct SpectralOutcome {
    pub summaries: Vec<EigSummary>,
    pub densities: Vec<(usize, SpectralDensity)>,
    pub run: RunOutcome,
}

/// Adam-only training with SLQ densities of the training loss at the given
/// iterations.
pub fn spectral_study(
    cfg: &ExperimentConfig,
    seed: u64,
    checkpoints: &[usize],
    slq: &SlqConfig,
    oracle_dir: Option<&Path>,
) -> Result<SpectralOutcome> {
    let mut c = cfg.clone();
    c.schedule = ScheduleKind::S4;
    let last = checkpoints.iter().copied().max().unwrap_or(0);
    c.max_iterations = Some(last);
    c.track_l2re = false;
    let ctx = RunContext {
        oracle_dir: oracle_dir.map(Path::to_path_buf),
        snapshots: checkpoints.to_vec(),
    };
    let run = run_single(&c, seed, &ctx)?;
    let problem = prepare_problem(c.problem, oracle_dir)?;
    let (_, obj, _) = setup_run(&c, &problem, seed)?;
    let mut summaries = Vec::new();
    let mut densities = Vec::new();
    for (it, params) in &run.report.snapshots {
        let d = slq_density(&obj, params, slq);
        summaries.push(EigSummary {
            label: format!("{}@{it}", c.method),
            lambda_max: d.lambda_max(),
            lambda_min: d.lambda_min(),
            mass_above: DENSITY_THRESHOLDS.iter().map(|&t| (t, d.mass_above(t))).collect(),
        });
        densities.push((*it, d));
    }
    Ok(SpectralOutcome {
        summaries,
        densities,
        run,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l2re_examples() {
        assert_eq!(l2re(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(l2re(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 1.0);
        assert!((l2re(&[0.0, 1.0], &[1.0, 0.0]).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!(matches!(l2re(&[1.0], &[0.0]), Err(Error::ZeroTruthNorm)));
        assert!(matches!(l2re(&[1.0], &[0.0, 1.0]), Err(Error::LengthMismatch(1, 2))));
    }

    #[test]
    fn improvement_from_reported_numbers() {
        let v = improvement_pct(1.21e-4, 8.23e-5);
        assert!((v - 31.98).abs() < 0.01, "{v}");
    }

    #[test]
    fn grids() {
        assert_eq!(eval_grid(&PdeProblem::new(ProblemId::Wave)).len(), 101 * 101);
        assert_eq!(eval_grid(&PdeProblem::new(ProblemId::Heat2D)).len(), 64 * 64 * 11);
    }

    #[test]
    fn config_parsing() {
        let one = parse_configs(r#"{"problem": "wave", "method": "SAFENET", "schedule": "S1"}"#).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].key(), "wave/SAFENET/S1");
        assert_eq!(one[0].seeds(), vec![0, 1, 2]);
        let many = parse_configs(r#"{"experiments": [{"method": "PINN"}, {"method": "RBA", "seeds": [4]}]}"#).unwrap();
        assert_eq!(many.len(), 2);
        assert_eq!(many[1].seeds(), vec![4]);
        assert!(parse_configs(r#"{"seeds": []}"#).is_err());
        assert!(parse_configs(r#"{"method": "XYZ"}"#).is_err());
        assert!(parse_configs(r#"{"bogus": 1}"#).is_err());
        assert_eq!("safe-net".parse::<Method>().unwrap(), Method::Safenet);
    }

    #[test]
    fn summary_medians_skip_divergent_runs() {
        let row = |seed, l2re: Option<f64>, div| ResultRow {
            config_hash: "h".into(),
            problem: ProblemId::Wave,
            method: Method::Safenet,
            schedule: ScheduleKind::S1,
            seed,
            l2re,
            final_loss: 0.0,
            phase_losses: vec![],
            runtime_s: 0.0,
            divergence: div,
            selected_lr: None,
            n_params: 1,
        };
        let s = summarize(&[row(0, Some(0.3), false), row(1, Some(0.1), false), row(2, None, true)]);
        let e = &s["wave/SAFENET/S1"];
        assert_eq!((e.completed, e.total), (2, 3));
        assert!((e.median_l2re.unwrap() - 0.2).abs() < 1e-15);
        let json = serde_json::to_value(row(2, None, true)).unwrap();
        assert_eq!(json["divergence"], true);
        assert!(json.get("l2re").is_none());
        assert!(summarize(&[]).is_empty());
    }

    #[test]
    fn schedule_cap_applies_to_all_phases() {
        let mut c = ExperimentConfig::new(ProblemId::Wave, Method::Safenet, ScheduleKind::S1);
        c.max_iterations = Some(100);
        assert_eq!(c.schedule_spec().total(), 100);
    }
}
