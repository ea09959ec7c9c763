use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use d4l::engine::Horizon;
use d4l::error::{Error, Result};
use d4l::harness::{check_saved_state, compare, gen_data, gen_graph, run_experiment, ExperimentConfig};

/// Decentralized dictionary-learning simulator.
#[derive(Parser)]
#[command(name = "d4l", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the configured graph sequence to `--out` (a file).
    GenGraph(Common),
    /// Write the configured data matrix (and ground truth or images) into `--out`.
    GenData(Common),
    /// Run one experiment; writes trace.csv, summary.json and state.json.
    Run(Common),
    /// Run several configs on the same problem and merge their traces.
    Compare(Common),
    /// Verify a saved final state against the configured problem.
    Check {
        #[command(flatten)]
        common: Common,
        /// state.json written by `run`.
        #[arg(long)]
        state: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// Experiment file (JSON); repeat for `compare`.
    #[arg(long, required = true)]
    config: Vec<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Iteration horizon.
    #[arg(long, conflicts_with = "msg_budget")]
    horizon: Option<usize>,
    /// Message-exchange budget.
    #[arg(long)]
    msg_budget: Option<u64>,
    /// Update agents in parallel (same results as sequential).
    #[arg(long)]
    parallel: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override any config field, e.g. `--set tau_d=5` or `--set problem.params.lambda=0.2`.
    #[arg(long = "set", value_name = "PATH=JSON")]
    overrides: Vec<String>,
    #[arg(long)]
    inner_tol: Option<f64>,
    #[arg(long)]
    inner_max_iters: Option<usize>,
    #[arg(long)]
    inner_step0: Option<f64>,
    #[arg(long)]
    inner_eps: Option<f64>,
}

impl Common {
    fn load(&self) -> Result<Vec<ExperimentConfig>> {
        self.config
            .iter()
            .map(|path| {
                let mut cfg = ExperimentConfig::load(path, &self.overrides)?;
                if let Some(seed) = self.seed {
                    cfg.set_seed(seed);
                }
                if let Some(n) = self.horizon {
                    cfg.set_horizon(Horizon::Iterations(n));
                }
                if let Some(m) = self.msg_budget {
                    cfg.set_horizon(Horizon::Messages(m));
                }
                if self.parallel {
                    cfg.control.parallel = true;
                }
                if let Some(out) = &self.out {
                    cfg.out = out.clone();
                }
                let inner = &mut cfg.inner;
                if let Some(v) = self.inner_tol {
                    inner.tol = v;
                }
                if let Some(v) = self.inner_max_iters {
                    inner.max_iters = v;
                }
                if let Some(v) = self.inner_step0 {
                    inner.step0 = v;
                }
                if let Some(v) = self.inner_eps {
                    inner.eps_inner = v;
                }
                Ok(cfg)
            })
            .collect()
    }

    fn single(&self) -> Result<ExperimentConfig> {
        let mut cfgs = self.load()?;
        if cfgs.len() != 1 {
            return Err(Error::Config("this command takes exactly one --config".into()));
        }
        Ok(cfgs.remove(0))
    }

    fn out_dir(&self, cfg: &ExperimentConfig) -> PathBuf {
        self.out.clone().unwrap_or_else(|| cfg.out.clone())
    }
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(v)?;
    writeln!(std::io::stdout().lock(), "{text}").map_err(|e| Error::io("<stdout>", e))
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::GenGraph(c) => {
            let cfg = c.single()?;
            let path = c.out.clone().unwrap_or_else(|| cfg.out.join("graph.txt"));
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            let seq = gen_graph(&cfg, &path)?;
            println!("{} slot(s), {} nodes -> {}", seq.len(), seq.num_nodes(), path.display());
        }
        Command::GenData(c) => {
            let cfg = c.single()?;
            for p in gen_data(&cfg, &c.out_dir(&cfg))? {
                println!("{}", p.display());
            }
        }
        Command::Run(c) => print_json(&run_experiment(&c.single()?)?)?,
        Command::Compare(c) => {
            let cfgs = c.load()?;
            let out = cfgs.first().map(|f| c.out_dir(f)).unwrap_or_default();
            println!("{}", compare(&cfgs, &out)?.display());
        }
        Command::Check { common, state } => {
            let cfg = common.single()?;
            print_json(&check_saved_state(&cfg, &state)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
