//! Command-line front end: `optimize`, `sweep`, `evaluate`, `fit` and
//! `export-tree`.
//!
//! Exit codes: 0 success, 1 other failure, 2 bad arguments or input files,
//! 3 refused evaluation, 4 I/O.

mod config;
mod policy_file;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use crate::error::{Error, Result};
use crate::eval::fit_scaling;
use crate::gls::{export_decision_tree, DeltaIndexing};
use crate::pso::{sweep, SweepLevel, SweepObserver};
use crate::rng::StreamKey;
use crate::symstate::InputStateKind;

pub use config::{noise_from_parts, RunConfig, DEFAULT_EVAL_TRIALS};
pub use policy_file::{
    evaluate_policy, evaluation_key, exact_for, policy_path, policy_sha256, read_scaling_points, write_rows,
    EvaluationRecord, PolicyFile, Provenance, SweepRow, TrainingRecord, POLICY_FORMAT_VERSION,
};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "PHASE_PSO_OUT";

pub const SWEEP_CSV: &str = "sweep.csv";

#[derive(Debug, Parser)]
#[command(name = "phase-pso", version, about = "Learn and benchmark adaptive phase-estimation policies")]
pub struct Cli {
    /// Worker threads for trial simulation (default: all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learn a policy for one N
    Optimize(RunArgs),
    /// Learn policies for a range of N, bootstrapping each from the last
    Sweep(RunArgs),
    /// Benchmark a stored policy
    Evaluate(EvaluateArgs),
    /// Fit V_H ∝ N^−α to a sweep table
    Fit(FitArgs),
    /// Print a policy's decision tree as Graphviz DOT
    ExportTree(TreeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StateArg {
    /// Sine-weighted entangled state
    Psi,
    /// Product state |0…0⟩
    Zero,
}

impl From<StateArg> for InputStateKind {
    fn from(s: StateArg) -> Self {
        match s {
            StateArg::Psi => InputStateKind::PsiOpt,
            StateArg::Zero => InputStateKind::ProductZero,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IndexingArg {
    Measurement,
    Photon,
}

impl From<IndexingArg> for DeltaIndexing {
    fn from(i: IndexingArg) -> Self {
        match i {
            IndexingArg::Measurement => DeltaIndexing::Measurement,
            IndexingArg::Photon => DeltaIndexing::Photon,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct NoiseArgs {
    /// Standard deviation of the rotation angle θ (radians)
    #[arg(long)]
    pub sigma_theta: Option<f64>,
    /// Per-component standard deviation of the rotation axis
    #[arg(long)]
    pub sigma_n: Option<f64>,
    /// Skewness of skew-normal noise (0 selects Gaussian noise)
    #[arg(long, allow_negative_numbers = true)]
    pub skewness: Option<f64>,
    /// Photon loss probability
    #[arg(long)]
    pub loss: Option<f64>,
}

impl NoiseArgs {
    fn is_empty(&self) -> bool {
        self.sigma_theta.is_none() && self.sigma_n.is_none() && self.skewness.is_none() && self.loss.is_none()
    }

    fn apply(&self, base: &crate::channel::NoiseModel<f64>) -> crate::channel::NoiseModel<f64> {
        if self.is_empty() {
            return *base;
        }
        let (st, sn, sk, l) = config::noise_parts(base);
        noise_from_parts(
            self.sigma_theta.unwrap_or(st),
            self.sigma_n.unwrap_or(sn),
            self.skewness.unwrap_or(sk),
            self.loss.unwrap_or(l),
        )
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML run configuration; flags below override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of qubits (sets both ends of the range)
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub n_min: Option<usize>,
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Input state
    #[arg(long, value_enum)]
    pub state: Option<StateArg>,
    #[command(flatten)]
    pub noise: NoiseArgs,
    /// Increment indexing when photons are lost
    #[arg(long, value_enum)]
    pub indexing: Option<IndexingArg>,
    /// Master seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Independent restarts per N
    #[arg(long)]
    pub restarts: Option<usize>,
    /// PSO iterations
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Particles in the swarm
    #[arg(long)]
    pub swarm_size: Option<usize>,
    /// Trials per sharpness sample
    #[arg(long)]
    pub trials: Option<usize>,
    /// Ring neighborhood radius
    #[arg(long)]
    pub ring_radius: Option<usize>,
    /// Trials for the stored re-evaluation
    #[arg(long)]
    pub eval_trials: Option<usize>,
    /// Also record the exact sharpness (noiseless channel, N ≤ 20)
    #[arg(long)]
    pub exact: bool,
    /// Bootstrap parent policy file
    #[arg(long)]
    pub parent: Option<PathBuf>,
    /// Output directory
    #[arg(long, env = OUT_DIR_ENV)]
    pub out: Option<PathBuf>,
}

impl RunArgs {
    /// Config file (if any) with every given flag applied on top.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(n) = self.n {
            c.n_min = n;
            c.n_max = n;
        }
        if let Some(n) = self.n_min {
            c.n_min = n;
        }
        if let Some(n) = self.n_max {
            c.n_max = n;
        }
        if let Some(s) = self.state {
            c.input = s.into();
        }
        c.noise = self.noise.apply(&c.noise);
        if let Some(i) = self.indexing {
            c.indexing = i.into();
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(r) = self.restarts {
            c.restarts = r;
        }
        c.pso.iterations = self.iterations.or(c.pso.iterations);
        c.pso.swarm_size = self.swarm_size.or(c.pso.swarm_size);
        c.pso.trials_per_eval = self.trials.or(c.pso.trials_per_eval);
        c.pso.ring_radius = self.ring_radius.or(c.pso.ring_radius);
        if let Some(k) = self.eval_trials {
            c.eval_trials = k;
        }
        c.exact |= self.exact;
        if self.parent.is_some() {
            c.parent.clone_from(&self.parent);
        }
        if let Some(o) = &self.out {
            c.out_dir.clone_from(o);
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Policy file to benchmark
    pub policy: PathBuf,
    /// Input state (default: the one it was trained with)
    #[arg(long, value_enum)]
    pub state: Option<StateArg>,
    /// Noise overrides (default: the training noise)
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[arg(long, value_enum)]
    pub indexing: Option<IndexingArg>,
    /// Trials (default: as stored)
    #[arg(long)]
    pub trials: Option<usize>,
    /// Master seed (default: as stored)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also compute the exact sharpness
    #[arg(long)]
    pub exact: bool,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// CSV with `N` and `V_H` columns
    pub csv: PathBuf,
    /// Write the residual table here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TreeArgs {
    /// Policy file
    pub policy: PathBuf,
    /// Tree depth (default: the policy's N)
    #[arg(long)]
    pub depth: Option<usize>,
    /// Write DOT here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Argument(_) | Error::Format(_) | Error::Capacity { .. } => 2,
        Error::Refused(_) => 3,
        Error::Io(_) => 4,
        Error::State(_) | Error::DegenerateBranch { .. } => 1,
    }
}

fn init_threads(threads: Option<usize>) -> Result<()> {
    let Some(t) = threads else { return Ok(()) };
    if t == 0 {
        return Err(Error::Argument("threads must be at least 1".into()));
    }
    // Only the first pool in a process sticks; later requests are ignored.
    if rayon::ThreadPoolBuilder::new().num_threads(t).build_global().is_err() {
        warn!("thread pool already initialized, ignoring threads = {t}");
    }
    Ok(())
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let resolved = match &cli.command {
        Command::Optimize(a) | Command::Sweep(a) => Some(a.resolve()?),
        _ => None,
    };
    init_threads(cli.threads.or(resolved.as_ref().and_then(|c| c.threads)))?;
    match (&cli.command, resolved) {
        (Command::Optimize(_), Some(c)) => cmd_optimize(&c, out).map(|_| ()),
        (Command::Sweep(_), Some(c)) => cmd_sweep(&c, out).map(|_| ()),
        (Command::Evaluate(a), _) => cmd_evaluate(a, out),
        (Command::Fit(a), _) => cmd_fit(a, out),
        (Command::ExportTree(a), _) => cmd_export_tree(a, out),
        _ => unreachable!("run commands always resolve a config"),
    }
}

/// Persists each level into the output directory and resumes from it.
struct DirectoryStore<'a> {
    config: &'a RunConfig,
    /// Serve persisted levels for every N, not only the bootstrap parent.
    resume_all: bool,
    written: Vec<PathBuf>,
}

impl DirectoryStore<'_> {
    fn load_matching(&self, path: &Path) -> Result<PolicyFile> {
        let f = PolicyFile::load(path)?;
        let c = self.config;
        if f.input != c.input || f.training.noise != c.noise || f.training.indexing != c.indexing {
            return Err(Error::Argument(format!(
                "{} was trained under different conditions; pick another output directory",
                path.display()
            )));
        }
        Ok(f)
    }
}

impl SweepObserver<f64> for DirectoryStore<'_> {
    fn resume(&mut self, n: usize) -> Result<Option<SweepLevel<f64>>> {
        let is_parent = n + 1 == self.config.n_min;
        if is_parent {
            if let Some(p) = &self.config.parent {
                return Ok(Some(PolicyFile::load(p)?.to_level()));
            }
        }
        if !is_parent && !self.resume_all {
            return Ok(None);
        }
        let path = policy_path(&self.config.out_dir, n);
        if !path.exists() {
            return Ok(None);
        }
        info!("resuming N = {n} from {}", path.display());
        Ok(Some(self.load_matching(&path)?.to_level()))
    }

    fn level_done(&mut self, level: &SweepLevel<f64>) -> Result<()> {
        let c = self.config;
        let file = PolicyFile::from_level(level, c.input, &c.noise, c.indexing, c.seed, c.eval_trials, c.exact)?;
        let path = policy_path(&c.out_dir, level.n_qubits);
        file.save(&path)?;
        self.written.push(path);
        Ok(())
    }
}

fn report_level(out: &mut dyn Write, file: &PolicyFile, path: &Path) -> Result<()> {
    let e = &file.evaluation;
    writeln!(
        out,
        "N = {:2}  S̄ = {:.6}  S̃ = {:.6} ± {:.1e} (K = {})  V_H = {:.6e}  V_H·N = {:.4}  trials = {}  -> {}",
        file.n_qubits,
        file.training.mean_sharpness,
        e.sharpness,
        e.std_error,
        e.trials,
        e.holevo_variance,
        e.holevo_variance * file.n_qubits as f64,
        file.training.trials_used,
        path.display()
    )?;
    if let Some(s) = e.exact_sharpness {
        writeln!(out, "        exact S = {s:.10}  V_H = {:.6e}", crate::eval::holevo_variance(s))?;
    }
    Ok(())
}

/// Learns one policy and writes it to `<out>/policy_nNN.json`.
pub fn cmd_optimize(config: &RunConfig, out: &mut dyn Write) -> Result<PolicyFile> {
    if config.n_min != config.n_max {
        return Err(Error::Argument("optimize takes a single N; use sweep for a range".into()));
    }
    let n = config.n_min;
    std::fs::create_dir_all(&config.out_dir)?;
    let threshold = config.pso.apply(n).bootstrap_threshold;
    if n > threshold && config.parent.is_none() && !policy_path(&config.out_dir, n - 1).exists() {
        return Err(Error::Argument(format!(
            "N = {n} needs an (N−1)-qubit parent policy: pass --parent or put {} in place",
            policy_path(&config.out_dir, n - 1).display()
        )));
    }
    let start = Instant::now();
    let mut store = DirectoryStore {
        config,
        resume_all: false,
        written: Vec::new(),
    };
    let levels = sweep(&config.sweep_plan(), StreamKey::root(config.seed), &mut store).map_err(|a| a.source)?;
    let path = store.written.pop().expect("one level written");
    let file = PolicyFile::load(&path)?;
    debug_assert_eq!(levels.len(), 1);
    report_level(out, &file, &path)?;
    writeln!(out, "wall time {:.1} s", start.elapsed().as_secs_f64())?;
    Ok(file)
}

/// Learns policies for `n_min..=n_max`, resuming from persisted levels, and
/// writes `<out>/sweep.csv`.
pub fn cmd_sweep(config: &RunConfig, out: &mut dyn Write) -> Result<Vec<SweepRow>> {
    std::fs::create_dir_all(&config.out_dir)?;
    let start = Instant::now();
    let mut store = DirectoryStore {
        config,
        resume_all: true,
        written: Vec::new(),
    };
    let result = sweep(&config.sweep_plan(), StreamKey::root(config.seed), &mut store);
    let csv_path = config.out_dir.join(SWEEP_CSV);
    let mut rows = Vec::new();
    for n in config.n_min..=config.n_max {
        let path = policy_path(&config.out_dir, n);
        if path.exists() {
            let file = store.load_matching(&path)?;
            report_level(out, &file, &path)?;
            rows.push(SweepRow::from_file(&file));
        }
    }
    write_rows(&csv_path, &rows)?;
    writeln!(out, "{} rows -> {}", rows.len(), csv_path.display())?;
    writeln!(out, "wall time {:.1} s", start.elapsed().as_secs_f64())?;
    match result {
        Ok(_) => Ok(rows),
        Err(abort) => {
            warn!("{abort}");
            Err(abort.source)
        }
    }
}

pub fn cmd_evaluate(args: &EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let file = PolicyFile::load(&args.policy)?;
    let policy = file.policy();
    let n = file.n_qubits;
    let input = args.state.map_or(file.input, Into::into);
    let noise = args.noise.apply(&file.training.noise);
    noise.validate()?;
    let indexing = args.indexing.map_or(file.training.indexing, Into::into);
    let trials = args.trials.unwrap_or(file.evaluation.trials);
    if trials == 0 {
        return Err(Error::Argument("trials must be at least 1".into()));
    }
    let seed = args.seed.unwrap_or(file.training.master_seed);
    // Refuse before spending time on sampling.
    let exact = if args.exact { Some(exact_for(&policy, input, &noise)?) } else { None };
    let est = evaluate_policy(&policy, input, &noise, indexing, trials, evaluation_key(seed, n))?;
    writeln!(out, "policy   {} (N = {n})", args.policy.display())?;
    writeln!(out, "S~       {:.8} ± {:.2e} (K = {trials}, seed {seed})", est.sharpness, est.std_error)?;
    writeln!(out, "V_H      {:.8e} ± {:.2e}", est.holevo_variance, est.holevo_std_error())?;
    writeln!(out, "V_H·N    {:.6}", est.holevo_variance * n as f64)?;
    if let Some(s) = exact {
        let v = crate::eval::holevo_variance(s);
        writeln!(out, "S exact  {s:.12}")?;
        writeln!(out, "V_H exact {v:.10e}  (V_H·N = {:.6})", v * n as f64)?;
    }
    Ok(())
}

pub fn cmd_fit(args: &FitArgs, out: &mut dyn Write) -> Result<()> {
    let points = read_scaling_points(&args.csv)?;
    let fit = fit_scaling(&points)?;
    writeln!(out, "# alpha = {:.6} ± {:.6}", fit.alpha, fit.alpha_stderr)?;
    writeln!(out, "# log_prefactor = {:.6}", fit.log_prefactor)?;
    writeln!(out, "# N = {}..{} ({} points)", fit.n_min, fit.n_max, points.len())?;
    let mut table = String::from("N,V_H,V_H_fit,log_residual\n");
    for ((n, v), (_, r)) in points.iter().zip(&fit.residuals) {
        table.push_str(&format!("{n},{v:e},{:e},{r:e}\n", fit.predict(*n)));
    }
    match &args.out {
        Some(p) => {
            std::fs::write(p, table)?;
            writeln!(out, "# residuals -> {}", p.display())?;
        }
        None => out.write_all(table.as_bytes())?,
    }
    Ok(())
}

pub fn cmd_export_tree(args: &TreeArgs, out: &mut dyn Write) -> Result<()> {
    let file = PolicyFile::load(&args.policy)?;
    let depth = args.depth.unwrap_or(file.n_qubits);
    if depth > file.n_qubits {
        return Err(Error::Argument(format!("depth {depth} exceeds the policy's {} qubits", file.n_qubits)));
    }
    let dot = export_decision_tree(&file.policy().prefix(depth), depth)?;
    match &args.out {
        Some(p) => std::fs::write(p, dot)?,
        None => out.write_all(dot.as_bytes())?,
    }
    Ok(())
}
