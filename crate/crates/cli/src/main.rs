use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use safenet_core::bench::{
    emit_reports, evaluate_checkpoint, load_configs, oracle_path, run_matrix, spectral_study, summarize,
    ExperimentConfig, Method, Preset, RunContext,
};
use safenet_core::features::FeatureBank;
use safenet_core::pde::{build_oracle, OracleResolution, PdeProblem, ProblemId, ReferenceSolution};
use safenet_core::spectra::{gram_conditioning, periodic_grid, SlqConfig};
use safenet_core::training::ScheduleKind;
use safenet_core::Error;

#[derive(Parser)]
#[command(name = "safenet", version, about = "Physics-informed Fourier feature network benchmarks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train one configuration (or every entry of a config file) over its seeds.
    Train(TrainArgs),
    /// Run the cross product of problems, methods and schedules.
    Sweep(SweepArgs),
    /// Relative L2 error of a stored checkpoint.
    Evaluate(EvalArgs),
    /// Hessian spectral densities along an Adam-only run.
    Spectral(SpectralArgs),
    /// Conditioning of the Fourier feature Gram matrix.
    GramCheck(GramArgs),
    /// Build reference grids for problems without a closed form.
    OracleBuild(OracleArgs),
}

#[derive(Args)]
struct Common {
    /// JSON config: an object, an array, or {"experiments": [...]}.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "desk")]
    preset: Preset,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Comma-separated seed list overriding the preset.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Cap on the global iteration count of every schedule.
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Directory for cached reference grids (default `<out>/oracles`).
    #[arg(long)]
    oracle_dir: Option<PathBuf>,
}

impl Common {
    fn oracle_dir(&self) -> PathBuf {
        self.oracle_dir.clone().unwrap_or_else(|| self.out.join("oracles"))
    }

    fn apply(&self, c: &mut ExperimentConfig, from_file: bool) {
        if !from_file {
            c.preset = self.preset;
        }
        if self.seeds.is_some() {
            c.seeds = self.seeds.clone();
        }
        if self.max_iterations.is_some() {
            c.max_iterations = self.max_iterations;
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "wave")]
    problem: ProblemId,
    #[arg(long, default_value = "SAFENET")]
    method: Method,
    #[arg(long, default_value = "S1")]
    schedule: ScheduleKind,
    #[arg(long)]
    features: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_delimiter = ',', default_value = "wave,convection,reaction,diffusion")]
    problems: Vec<ProblemId>,
    #[arg(long, value_delimiter = ',', default_value = "PINN,SAFENET")]
    methods: Vec<Method>,
    #[arg(long, value_delimiter = ',', default_value = "S1")]
    schedules: Vec<ScheduleKind>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Config describing the network; flags below are used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "wave")]
    problem: ProblemId,
    #[arg(long, default_value = "SAFENET")]
    method: Method,
    #[arg(long, default_value = "desk")]
    preset: Preset,
    #[arg(long)]
    features: Option<usize>,
    /// Write `x,t,pred,truth` rows here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "out/oracles")]
    oracle_dir: PathBuf,
}

#[derive(Args)]
struct SpectralArgs {
    #[arg(long, default_value = "wave")]
    problem: ProblemId,
    #[arg(long, value_delimiter = ',', default_value = "SAFENET,PINN")]
    methods: Vec<Method>,
    #[arg(long, value_delimiter = ',', default_value = "0,1000,3000")]
    checkpoints: Vec<usize>,
    #[arg(long, default_value = "desk")]
    preset: Preset,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    probes: usize,
    #[arg(long, default_value_t = 200)]
    steps: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    oracle_dir: Option<PathBuf>,
}

#[derive(Args)]
struct GramArgs {
    /// Number of Fourier sets.
    #[arg(long, default_value_t = 4)]
    sets: usize,
    #[arg(long, default_value_t = 1.0)]
    k: f64,
    /// Points per axis of the periodic grid.
    #[arg(long, default_value_t = 32)]
    grid: usize,
    /// Coefficient placed on the first feature.
    #[arg(long, default_value_t = 1.0)]
    first_coeff: f64,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, value_delimiter = ',', default_value = "burgers,allen-cahn")]
    problems: Vec<ProblemId>,
    #[arg(long, default_value = "oracles")]
    out: PathBuf,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    nt: Option<usize>,
    #[arg(long)]
    level: Option<usize>,
}

#[derive(Debug)]
enum Exit {
    Diverged,
    Failed(Error),
}

impl From<Error> for Exit {
    fn from(e: Error) -> Self {
        Exit::Failed(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Train(a) => train(a),
        Cmd::Sweep(a) => sweep(a),
        Cmd::Evaluate(a) => evaluate(a),
        Cmd::Spectral(a) => spectral(a),
        Cmd::GramCheck(a) => gram(a),
        Cmd::OracleBuild(a) => oracle(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Exit::Diverged) => {
            eprintln!("one or more runs diverged");
            ExitCode::from(3)
        }
        Err(Exit::Failed(e)) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn config_file(path: &Path) -> Result<Vec<ExperimentConfig>, Exit> {
    load_configs(path).map_err(|e| match e {
        // unreadable or malformed config files are configuration errors
        Error::Io { .. } | Error::Format { .. } => Error::Config(e.to_string()),
        e => e,
    })
    .map_err(Exit::from)
}

fn train(a: TrainArgs) -> Result<(), Exit> {
    let mut configs = match &a.common.config {
        Some(p) => config_file(p)?,
        None => {
            let mut c = ExperimentConfig::new(a.problem, a.method, a.schedule);
            c.features = a.features;
            vec![c]
        }
    };
    let from_file = a.common.config.is_some();
    for c in &mut configs {
        a.common.apply(c, from_file);
    }
    execute(&configs, &a.common)
}

fn sweep(a: SweepArgs) -> Result<(), Exit> {
    let from_file = a.common.config.is_some();
    let mut configs = match &a.common.config {
        Some(p) => config_file(p)?,
        None => {
            let mut v = Vec::new();
            for &p in &a.problems {
                for &m in &a.methods {
                    for &s in &a.schedules {
                        v.push(ExperimentConfig::new(p, m, s));
                    }
                }
            }
            v
        }
    };
    for c in &mut configs {
        a.common.apply(c, from_file);
    }
    execute(&configs, &a.common)
}

fn execute(configs: &[ExperimentConfig], common: &Common) -> Result<(), Exit> {
    let ctx = RunContext {
        oracle_dir: Some(common.oracle_dir()),
        snapshots: Vec::new(),
    };
    let outcomes = run_matrix(configs, common.jobs, &ctx)?;
    emit_reports(&common.out, &outcomes)?;
    let rows: Vec<_> = outcomes.iter().map(|o| o.row.clone()).collect();
    println!("{:<28} {:>5} {:>12} {:>12} {:>9}", "run", "seed", "L2RE", "loss", "time[s]");
    for r in &rows {
        let l2 = r.l2re.map_or("diverged".to_string(), |v| format!("{v:.3e}"));
        let key = format!("{}/{}/{}", r.problem.key(), r.method, r.schedule);
        println!("{key:<28} {:>5} {l2:>12} {:>12.3e} {:>9.1}", r.seed, r.final_loss, r.runtime_s);
    }
    for (k, e) in summarize(&rows) {
        let m = e.median_l2re.map_or("-".to_string(), |v| format!("{v:.3e}"));
        println!("median {k}: {m} ({}/{} completed)", e.completed, e.total);
    }
    if rows.iter().any(|r| r.divergence) {
        return Err(Exit::Diverged);
    }
    Ok(())
}

fn evaluate(a: EvalArgs) -> Result<(), Exit> {
    let cfg = match &a.config {
        Some(p) => config_file(p)?
            .into_iter()
            .next()
            .ok_or_else(|| Error::Config("config file has no experiments".into()))?,
        None => {
            let mut c = ExperimentConfig::new(a.problem, a.method, ScheduleKind::S1);
            c.preset = a.preset;
            c.features = a.features;
            c
        }
    };
    let ev = evaluate_checkpoint(&cfg, &a.checkpoint, Some(&a.oracle_dir))?;
    if let Some(out) = &a.out {
        std::fs::write(out, ev.to_csv()).map_err(|e| Error::io(out, e))?;
    }
    println!("L2RE {:.6e}", ev.l2re);
    Ok(())
}

fn spectral(a: SpectralArgs) -> Result<(), Exit> {
    let dir = a.out.join("spectral");
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let oracles = a.oracle_dir.clone().unwrap_or_else(|| a.out.join("oracles"));
    let slq = SlqConfig {
        n_probes: a.probes,
        lanczos_steps: a.steps,
        seed: a.seed,
        ..SlqConfig::default()
    };
    let mut all = Vec::new();
    for &m in &a.methods {
        let mut cfg = ExperimentConfig::new(a.problem, m, ScheduleKind::S4);
        cfg.preset = a.preset;
        let st = spectral_study(&cfg, a.seed, &a.checkpoints, &slq, Some(&oracles))?;
        for (it, d) in &st.densities {
            let path = dir.join(format!("{}_{}_iter{it}.csv", a.problem.key(), m));
            std::fs::write(&path, d.smoothed_csv(400)).map_err(|e| Error::io(&path, e))?;
        }
        for s in &st.summaries {
            println!("{:<20} lambda_max {:>12.4e} lambda_min {:>12.4e}", s.label, s.lambda_max, s.lambda_min);
        }
        all.extend(st.summaries);
    }
    let path = dir.join("summary.json");
    let json = serde_json::to_string_pretty(&all).expect("summaries serialize");
    std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(())
}

fn gram(a: GramArgs) -> Result<(), Exit> {
    if a.sets == 0 || a.grid == 0 {
        return Err(Error::Config("sets and grid must be positive".into()).into());
    }
    let mut bank = FeatureBank::harmonic(a.sets, a.k);
    bank.coeffs[0] = a.first_coeff;
    let period = 2.0 / a.k;
    let r = gram_conditioning(&bank, &periodic_grid(a.grid, period));
    println!("{}", serde_json::to_string_pretty(&r).expect("report serializes"));
    Ok(())
}

fn oracle(a: OracleArgs) -> Result<(), Exit> {
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let d = OracleResolution::default();
    let res = OracleResolution {
        nx: a.nx.unwrap_or(d.nx),
        nt: a.nt.unwrap_or(d.nt),
        level: a.level.unwrap_or(d.level),
    };
    for &id in &a.problems {
        if id.has_closed_form() {
            println!("{id}: closed form available, nothing to build");
            continue;
        }
        if let ReferenceSolution::OracleGrid(g) = build_oracle(&PdeProblem::new(id), &res)? {
            let path = oracle_path(&a.out, id);
            g.write(&path)?;
            println!("{} -> {}", id, path.display());
        }
    }
    Ok(())
}
