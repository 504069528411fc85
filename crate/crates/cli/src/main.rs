//! `iaswarm`: run interference-alignment PSO/CPSO campaigns.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use iaswarm::harness::{
    paper_bundle, render_summary_table, run_experiment, summarize, write_outputs, Algorithm,
    ExperimentConfig, RunRecord,
};
use iaswarm::{Error, Execution, OmegaMode, Result};

#[derive(Debug, Parser)]
#[command(name = "iaswarm", version, about = "Interference alignment by particle swarm optimization")]
struct Cli {
    /// JSON experiment config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Run all twelve published campaigns (K = 3..13, PSO and CPSO).
    #[arg(long, conflicts_with = "config")]
    paper: bool,

    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,

    /// pso or cpso.
    #[arg(long)]
    algo: Option<Algorithm>,

    #[arg(long)]
    swarm_size: Option<usize>,

    /// Fixed ω.
    #[arg(long, conflicts_with = "omega_c")]
    omega: Option<f64>,

    /// Scaled ω = c·r₃.
    #[arg(long)]
    omega_c: Option<f64>,

    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    init_lo: Option<f64>,
    #[arg(long)]
    init_hi: Option<f64>,
    #[arg(long)]
    rank_tol: Option<f64>,

    #[arg(long)]
    out_dir: Option<PathBuf>,

    /// Write per-run trace CSVs (default).
    #[arg(long, overrides_with = "no_trace")]
    trace: bool,
    #[arg(long, overrides_with = "trace")]
    no_trace: bool,

    /// Accept scenarios with fewer variables than alignment equations.
    #[arg(long)]
    allow_improper: bool,

    /// Evaluate sequentially even when built with the parallel feature.
    #[arg(long)]
    sequential: bool,

    /// Print the resolved config as JSON and exit.
    #[arg(long)]
    print_config: bool,
}

impl Cli {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(k) = self.k {
            cfg.scenario.k = k;
        }
        if let Some(m) = self.m {
            cfg.scenario.m = m;
        }
        if let Some(n) = self.n {
            cfg.scenario.n = n;
        }
        if let Some(d) = self.d {
            cfg.scenario.d = d;
        }
        if let Some(a) = self.algo {
            cfg.algorithm = a;
        }
        if let Some(s) = self.swarm_size {
            cfg.swarm_size = s;
        }
        if let Some(w) = self.omega {
            cfg.omega = OmegaMode::Fixed(w);
        }
        if let Some(c) = self.omega_c {
            cfg.omega = OmegaMode::Scaled(c);
        }
        if let Some(i) = self.iters {
            cfg.max_iters = i;
        }
        if let Some(r) = self.runs {
            cfg.runs = r;
        }
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        if let Some(lo) = self.init_lo {
            cfg.init_range.0 = lo;
        }
        if let Some(hi) = self.init_hi {
            cfg.init_range.1 = hi;
        }
        if let Some(t) = self.rank_tol {
            cfg.rank_tol = t;
        }
        if self.out_dir.is_some() {
            cfg.out_dir = self.out_dir.clone();
        }
        if self.trace {
            cfg.write_traces = true;
        }
        if self.no_trace {
            cfg.write_traces = false;
        }
        if self.allow_improper {
            cfg.allow_improper = true;
        }
        if self.sequential {
            cfg.execution = Execution::Sequential;
        }
    }

    fn configs(&self) -> Result<Vec<ExperimentConfig>> {
        if self.paper {
            let mut configs = paper_bundle(None);
            for cfg in &mut configs {
                // The bundle fixes the algorithm-specific swarm settings.
                let algorithm = cfg.algorithm;
                let (size, omega) = (cfg.swarm_size, cfg.omega);
                self.apply(cfg);
                cfg.algorithm = algorithm;
                if self.swarm_size.is_none() {
                    cfg.swarm_size = size;
                }
                if self.omega.is_none() && self.omega_c.is_none() {
                    cfg.omega = omega;
                }
                cfg.out_dir = None;
            }
            return Ok(configs);
        }
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        self.apply(&mut cfg);
        Ok(vec![cfg])
    }
}

fn run(cli: &Cli) -> Result<()> {
    let configs = cli.configs()?;
    if cli.print_config {
        for cfg in &configs {
            println!("{}", serde_json::to_string_pretty(cfg)?);
        }
        return Ok(());
    }
    let mut all: Vec<RunRecord> = Vec::new();
    for cfg in &configs {
        eprintln!(
            "running {} {} ({} runs x {} iterations)",
            cfg.scenario.id(),
            cfg.algorithm,
            cfg.runs,
            cfg.max_iters
        );
        all.extend(run_experiment(cfg)?);
    }
    if cli.paper {
        if let Some(dir) = &cli.out_dir {
            write_outputs(&all, dir)?;
        }
    }
    print!("{}", render_summary_table(&summarize(&all)?));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{line}");
            match e {
                Error::Io(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}
