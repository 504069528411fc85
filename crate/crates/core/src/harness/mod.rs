//! Seeded experiment campaigns.
//!
//! A campaign draws one channel realization from the master seed, then
//! optimizes it `runs` times with optimizer seeds `master_seed + run`.

mod report;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cpso::run_cpso;
use crate::error::{Error, Result};
use crate::mimo::{generate_channels, ProblemSpec, Properness};
use crate::objective::{LeakageObjective, DEFAULT_RANK_TOL};
use crate::par::{map_indexed, Execution};
use crate::swarm::{run_pso, OmegaMode, PsoConfig, RunOutcome};

pub use report::{
    emit_plot_data, format_float, render_runs_csv, render_summary_csv, render_summary_table,
    summarize, write_outputs, write_trace, SummaryRow, SUMMARY_HEADER, TRACE_HEADER,
};

/// Values of K in the reference bundle.
pub const PAPER_KS: [usize; 6] = [3, 5, 7, 9, 11, 13];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Pso,
    Cpso,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Pso => "pso",
            Algorithm::Cpso => "cpso",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pso" => Ok(Algorithm::Pso),
            "cpso" => Ok(Algorithm::Cpso),
            other => Err(Error::InvalidConfig(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// Homogeneous `(M × N, d)^K` scenario.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub k: usize,
    pub m: usize,
    pub n: usize,
    pub d: usize,
}

impl Scenario {
    pub fn new(k: usize, m: usize, n: usize, d: usize) -> Self {
        Scenario { k, m, n, d }
    }

    pub fn id(&self) -> String {
        format!("K{}_M{}_N{}_d{}", self.k, self.m, self.n, self.d)
    }

    pub fn problem(&self, properness: Properness) -> Result<ProblemSpec> {
        ProblemSpec::new(self.k, self.m, self.n, self.d, properness)
    }

    /// `2·(K·N·d) + 2·(K·M·d)`.
    pub fn dimension(&self) -> usize {
        2 * (self.k * self.n * self.d) + 2 * (self.k * self.m * self.d)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub algorithm: Algorithm,
    pub swarm_size: usize,
    pub omega: OmegaMode,
    pub max_iters: usize,
    pub runs: usize,
    pub master_seed: u64,
    pub init_range: (f64, f64),
    pub rank_tol: f64,
    pub out_dir: Option<PathBuf>,
    pub write_traces: bool,
    /// Run scenarios with fewer variables than alignment equations.
    pub allow_improper: bool,
    pub execution: Execution,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig::paper(3, Algorithm::Cpso)
    }
}

impl ExperimentConfig {
    /// The published settings for `(5 × 5, 2)^K`: PSO with 100 particles and
    /// ω = 3, CPSO with 50 particles per swarm and ω = 1e-3, 5000 iterations,
    /// 10 runs.
    pub fn paper(k: usize, algorithm: Algorithm) -> Self {
        let (swarm_size, omega) = match algorithm {
            Algorithm::Pso => (100, 3.0),
            Algorithm::Cpso => (50, 1e-3),
        };
        ExperimentConfig {
            scenario: Scenario::new(k, 5, 5, 2),
            algorithm,
            swarm_size,
            omega: OmegaMode::Fixed(omega),
            max_iters: 5000,
            runs: 10,
            master_seed: 0,
            init_range: (-1.0, 1.0),
            rank_tol: DEFAULT_RANK_TOL,
            out_dir: None,
            write_traces: true,
            allow_improper: false,
            execution: Execution::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn properness(&self) -> Properness {
        if self.allow_improper {
            Properness::Allow
        } else {
            Properness::Require
        }
    }

    pub fn pso_config(&self) -> PsoConfig {
        PsoConfig {
            swarm_size: self.swarm_size,
            omega: self.omega,
            init_range: self.init_range,
            max_iters: self.max_iters,
            target_cost: None,
            execution: self.execution,
        }
    }

    pub fn run_seed(&self, run: usize) -> u64 {
        self.master_seed.wrapping_add(run as u64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::InvalidConfig("runs must be at least 1".into()));
        }
        if !(self.rank_tol > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "rank tolerance must be positive, got {}",
                self.rank_tol
            )));
        }
        self.pso_config().validate()
    }
}

/// One optimization run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRecord {
    pub scenario: String,
    pub algorithm: Algorithm,
    pub k: usize,
    pub dimension: usize,
    pub run: usize,
    pub seed: u64,
    pub final_il: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub rank_pass: bool,
    pub ranks: Vec<usize>,
    pub wall_s: f64,
    pub trace_path: Option<PathBuf>,
    #[serde(skip)]
    pub trace: Vec<f64>,
    #[serde(skip)]
    pub best_position: Vec<f64>,
}

pub fn trace_file_name(scenario: &str, algorithm: Algorithm, run: usize) -> PathBuf {
    Path::new("traces").join(format!("{scenario}_{algorithm}_run{run:03}.csv"))
}

/// Runs every seed of a campaign without touching the filesystem.
pub fn execute(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let spec = cfg.scenario.problem(cfg.properness())?;
    let channels = generate_channels(&spec, cfg.master_seed);
    let objective = LeakageObjective::new(&spec, &channels)?;
    let pso = cfg.pso_config();
    let scenario = cfg.scenario.id();

    let outcomes = map_indexed(cfg.execution, cfg.runs, |run| {
        let seed = cfg.run_seed(run);
        let start = Instant::now();
        let outcome: Result<RunOutcome> = match cfg.algorithm {
            Algorithm::Pso => run_pso(spec.dim_real(), &|x: &[f64]| objective.evaluate(x), &pso, seed),
            Algorithm::Cpso => run_cpso(&objective, &pso, seed),
        };
        outcome.map(|o| (o, start.elapsed().as_secs_f64()))
    });

    let mut records = Vec::with_capacity(cfg.runs);
    for (run, outcome) in outcomes.into_iter().enumerate() {
        let (outcome, wall_s) = outcome?;
        let report = objective.rank_check(&outcome.best_position, cfg.rank_tol)?;
        let final_il = *outcome.trace.last().expect("at least one iteration");
        records.push(RunRecord {
            scenario: scenario.clone(),
            algorithm: cfg.algorithm,
            k: spec.k(),
            dimension: spec.dim_real(),
            run,
            seed: cfg.run_seed(run),
            final_il,
            iterations: outcome.iterations(),
            evaluations: outcome.evaluations,
            rank_pass: report.passed(),
            ranks: report.ranks,
            wall_s,
            trace_path: cfg
                .write_traces
                .then(|| trace_file_name(&scenario, cfg.algorithm, run)),
            trace: outcome.trace,
            best_position: outcome.best_position,
        });
    }
    Ok(records)
}

/// Runs a campaign and, when `out_dir` is set, writes traces, summaries and
/// plot data there.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    if let Some(dir) = &cfg.out_dir {
        std::fs::create_dir_all(dir)?;
    }
    let records = execute(cfg)?;
    if let Some(dir) = &cfg.out_dir {
        write_outputs(&records, dir)?;
    }
    Ok(records)
}

/// All twelve reference campaigns (six values of K, both
/// algorithms), optionally with a reduced iteration budget.
pub fn paper_bundle(max_iters: Option<usize>) -> Vec<ExperimentConfig> {
    let mut out = Vec::new();
    for algorithm in [Algorithm::Pso, Algorithm::Cpso] {
        for k in PAPER_KS {
            let mut cfg = ExperimentConfig::paper(k, algorithm);
            cfg.allow_improper = true;
            if let Some(iters) = max_iters {
                cfg.max_iters = iters;
            }
            out.push(cfg);
        }
    }
    out
}
