//! Derivative-free particle swarm minimizer.
//!
//! Velocity update for particle `i`, component `d`:
//!
//! ```text
//! v_id ← ω·|p_i'd − p_id|·sign(v_id) + r·(p_id − x_id) + (1 − r)·(p_gd − x_id)
//! x_id ← x_id + v_id
//! ```
//!
//! `r ~ U[0, 1)` and the partner index `i' ~ U{0, …, N−1}` (self allowed) are
//! drawn once per particle per iteration and shared across components. With
//! [`OmegaMode::Scaled`], `ω = c·r₃` is redrawn per particle as well.
//!
//! All draws of an iteration happen before any cost is evaluated, so the
//! trajectory does not depend on [`Execution`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{fill_indexed, Execution};
use crate::rng::{stream_rng, SimRng, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "lowercase")]
pub enum OmegaMode {
    /// Constant ω.
    Fixed(f64),
    /// ω = c·r₃ with r₃ ~ U[0, 1) redrawn per particle update.
    Scaled(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsoConfig {
    pub swarm_size: usize,
    pub omega: OmegaMode,
    pub init_range: (f64, f64),
    pub max_iters: usize,
    #[serde(default)]
    pub target_cost: Option<f64>,
    #[serde(default)]
    pub execution: Execution,
}

impl PsoConfig {
    pub fn new(swarm_size: usize, omega: OmegaMode, max_iters: usize) -> Self {
        PsoConfig {
            swarm_size,
            omega,
            init_range: (-1.0, 1.0),
            max_iters,
            target_cost: None,
            execution: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.swarm_size < 2 {
            return Err(Error::InvalidConfig(format!(
                "swarm size must be at least 2, got {}",
                self.swarm_size
            )));
        }
        let (lo, hi) = self.init_range;
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidConfig(format!("bad init range [{lo}, {hi}]")));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        match self.omega {
            OmegaMode::Fixed(w) | OmegaMode::Scaled(w) if w > 0.0 && w.is_finite() => {}
            other => return Err(Error::InvalidConfig(format!("ω must be positive: {other:?}"))),
        }
        if let Some(t) = self.target_cost {
            if t.is_nan() || t < 0.0 {
                return Err(Error::InvalidConfig(format!("bad target cost {t}")));
            }
        }
        Ok(())
    }
}

/// Sign with `sign(0) = 0`.
#[inline]
pub fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// One component of the velocity update.
#[inline]
pub fn update_velocity(
    x: f64,
    v: f64,
    p_self: f64,
    p_other: f64,
    p_global: f64,
    omega: f64,
    r: f64,
) -> f64 {
    omega * (p_other - p_self).abs() * sign(v) + r * (p_self - x) + (1.0 - r) * (p_global - x)
}

/// Random numbers consumed by one particle update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParticleDraw {
    pub r: f64,
    pub partner: usize,
    pub omega: f64,
}

impl ParticleDraw {
    pub fn sample(cfg: &PsoConfig, rng: &mut SimRng) -> Self {
        let r = rng.random::<f64>();
        let partner = rng.random_range(0..cfg.swarm_size);
        let omega = match cfg.omega {
            OmegaMode::Fixed(w) => w,
            OmegaMode::Scaled(c) => c * rng.random::<f64>(),
        };
        ParticleDraw { r, partner, omega }
    }
}

/// Uniform initial position and velocity for one component.
pub(crate) fn sample_component(cfg: &PsoConfig, rng: &mut SimRng) -> (f64, f64) {
    let (lo, hi) = cfg.init_range;
    let width = hi - lo;
    let x = lo + rng.random::<f64>() * width;
    let v = -width + rng.random::<f64>() * 2.0 * width;
    (x, v)
}

pub(crate) fn check_finite(value: f64, iteration: usize) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteCost { iteration, value })
    }
}

/// Positions, velocities and bests of one swarm, stored particle-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SwarmState {
    dim: usize,
    positions: Vec<f64>,
    velocities: Vec<f64>,
    best_positions: Vec<f64>,
    best_costs: Vec<f64>,
    global_best: usize,
    iteration: usize,
    evaluations: usize,
}

impl SwarmState {
    /// Draws positions in `init_range^dim` and velocities in
    /// `[−w, w]^dim` (`w = hi − lo`), particle by particle, then evaluates
    /// them.
    pub fn init<F>(dim: usize, cost: &F, cfg: &PsoConfig, rng: &mut SimRng) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        cfg.validate()?;
        if dim == 0 {
            return Err(Error::InvalidConfig("dimension must be at least 1".into()));
        }
        let size = cfg.swarm_size;
        let mut positions = Vec::with_capacity(size * dim);
        let mut velocities = Vec::with_capacity(size * dim);
        for _ in 0..size {
            let (xs, vs): (Vec<f64>, Vec<f64>) =
                (0..dim).map(|_| sample_component(cfg, rng)).unzip();
            positions.extend(xs);
            velocities.extend(vs);
        }
        let mut costs = vec![0.0; size];
        fill_indexed(cfg.execution, &mut costs, |i| cost(&positions[i * dim..(i + 1) * dim]));
        for &c in &costs {
            check_finite(c, 0)?;
        }
        let mut global_best = 0;
        for i in 1..size {
            if costs[i] < costs[global_best] {
                global_best = i;
            }
        }
        Ok(SwarmState {
            dim,
            best_positions: positions.clone(),
            positions,
            velocities,
            best_costs: costs,
            global_best,
            iteration: 0,
            evaluations: size,
        })
    }

    /// Builds a state from explicit arrays; bests start at the positions
    /// with the given costs.
    pub fn from_parts(
        dim: usize,
        positions: Vec<f64>,
        velocities: Vec<f64>,
        costs: Vec<f64>,
    ) -> Result<Self> {
        let size = costs.len();
        if dim == 0 || size == 0 || positions.len() != size * dim || velocities.len() != size * dim {
            return Err(Error::ShapeMismatch(format!(
                "{size} particles of dimension {dim} need {} positions and velocities",
                size * dim
            )));
        }
        let mut global_best = 0;
        for i in 1..size {
            if costs[i] < costs[global_best] {
                global_best = i;
            }
        }
        Ok(SwarmState {
            dim,
            best_positions: positions.clone(),
            positions,
            velocities,
            best_costs: costs,
            global_best,
            iteration: 0,
            evaluations: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn size(&self) -> usize {
        self.best_costs.len()
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn velocity(&self, i: usize) -> &[f64] {
        &self.velocities[i * self.dim..(i + 1) * self.dim]
    }

    pub fn best_position(&self, i: usize) -> &[f64] {
        &self.best_positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn best_cost(&self, i: usize) -> f64 {
        self.best_costs[i]
    }

    pub fn global_best_index(&self) -> usize {
        self.global_best
    }

    pub fn global_best_position(&self) -> &[f64] {
        self.best_position(self.global_best)
    }

    pub fn global_best_cost(&self) -> f64 {
        self.best_costs[self.global_best]
    }

    /// Mean Euclidean distance of the particles from their centroid.
    pub fn dispersion(&self) -> f64 {
        let size = self.size();
        let mut centroid = vec![0.0; self.dim];
        for i in 0..size {
            for (c, x) in centroid.iter_mut().zip(self.position(i)) {
                *c += x / size as f64;
            }
        }
        (0..size)
            .map(|i| {
                self.position(i)
                    .iter()
                    .zip(&centroid)
                    .map(|(x, c)| (x - c) * (x - c))
                    .sum::<f64>()
                    .sqrt()
            })
            .sum::<f64>()
            / size as f64
    }

    /// Moves every particle once using pre-drawn randomness; does not
    /// evaluate.
    pub fn advance(&mut self, draws: &[ParticleDraw]) {
        let dim = self.dim;
        let g = self.global_best;
        for (i, draw) in draws.iter().enumerate() {
            for d in 0..dim {
                let k = i * dim + d;
                let v = update_velocity(
                    self.positions[k],
                    self.velocities[k],
                    self.best_positions[k],
                    self.best_positions[draw.partner * dim + d],
                    self.best_positions[g * dim + d],
                    draw.omega,
                    draw.r,
                );
                self.velocities[k] = v;
                self.positions[k] += v;
            }
        }
    }

    /// One full iteration: draw, move, evaluate, update bests.
    pub fn step<F>(&mut self, cost: &F, cfg: &PsoConfig, rng: &mut SimRng) -> Result<()>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let draws: Vec<ParticleDraw> = (0..self.size())
            .map(|_| ParticleDraw::sample(cfg, rng))
            .collect();
        self.advance(&draws);

        let dim = self.dim;
        let mut costs = vec![0.0; self.size()];
        let positions = &self.positions;
        fill_indexed(cfg.execution, &mut costs, |i| cost(&positions[i * dim..(i + 1) * dim]));
        self.iteration += 1;
        self.evaluations += costs.len();
        for &c in &costs {
            check_finite(c, self.iteration)?;
        }

        for (i, &c) in costs.iter().enumerate() {
            if c < self.best_costs[i] {
                self.best_costs[i] = c;
                self.best_positions[i * dim..(i + 1) * dim]
                    .copy_from_slice(&self.positions[i * dim..(i + 1) * dim]);
            }
        }
        for i in 0..self.size() {
            if self.best_costs[i] < self.best_costs[self.global_best] {
                self.global_best = i;
            }
        }
        Ok(())
    }
}

pub fn init_swarm<F>(dim: usize, cost: &F, cfg: &PsoConfig, seed: u64) -> Result<SwarmState>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    SwarmState::init(dim, cost, cfg, &mut stream_rng(seed, Stream::Optimizer))
}

/// Result of one optimizer run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunOutcome {
    pub best_position: Vec<f64>,
    pub best_cost: f64,
    /// Best-so-far cost after each iteration.
    pub trace: Vec<f64>,
    /// Objective evaluations, including initialization.
    pub evaluations: usize,
}

impl RunOutcome {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

pub fn run_pso<F>(dim: usize, cost: &F, cfg: &PsoConfig, seed: u64) -> Result<RunOutcome>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let mut rng = stream_rng(seed, Stream::Optimizer);
    let mut state = SwarmState::init(dim, cost, cfg, &mut rng)?;
    let mut trace = Vec::with_capacity(cfg.max_iters);
    for _ in 0..cfg.max_iters {
        state.step(cost, cfg, &mut rng)?;
        trace.push(state.global_best_cost());
        if cfg.target_cost.is_some_and(|t| state.global_best_cost() <= t) {
            break;
        }
    }
    Ok(RunOutcome {
        best_position: state.global_best_position().to_vec(),
        best_cost: state.global_best_cost(),
        trace,
        evaluations: state.evaluations(),
    })
}
