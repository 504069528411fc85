//! Cooperative PSO with one-dimensional subswarms.
//!
//! The `n`-dimensional problem is split into `n` swarms of scalars. Particle
//! `z` of swarm `j` is scored as `f(b(j, z))`, where `b(j, z)` is the context
//! vector of all swarm bests with component `j` replaced by `z`.
//!
//! Per outer iteration, swarms are processed in ascending order. For swarm
//! `j`:
//!
//! 1. draw randomness and move every particle (same update as
//!    [`crate::swarm`], with `p_g` = component `j` of the context);
//! 2. evaluate `f(b(j, x_i))` and `f(b(j, y_i))` for every particle under the
//!    current context;
//! 3. for each particle in order, replace `y_i` by `x_i` on strict
//!    improvement, then replace the swarm best by `y_i` if `f(b(j, y_i))`
//!    beats the context cost.
//!
//! Initialization draws all swarms, seeds the context with each swarm's first
//! particle and runs one evaluation sweep (step 3 with `y_i = x_i`), so every
//! particle's first scoring happens right after it is drawn or moved.
//!
//! Evaluation budget: `n·s + 1` during initialization and exactly
//! [`evaluations_per_iteration`]`(n, s) = 2·n·s` per outer iteration.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::par::fill_indexed;
use crate::rng::{stream_rng, SimRng, Stream};
use crate::swarm::{check_finite, sample_component, update_velocity, ParticleDraw, PsoConfig, RunOutcome};

/// A cost function that can be re-scored cheaply when a single coordinate of
/// a bound point changes.
pub trait ContextCost: Sync {
    type Context: Send + Sync;

    fn dim(&self) -> usize;

    /// Prepares `x` for probing.
    fn bind(&self, x: &[f64]) -> Self::Context;

    fn cost_of(&self, ctx: &Self::Context) -> f64;

    /// Cost of the bound point with coordinate `j` set to `z`.
    fn probe(&self, ctx: &Self::Context, j: usize, z: f64) -> f64;

    /// Sets coordinate `j` of the bound point to `z`.
    fn commit(&self, ctx: &mut Self::Context, j: usize, z: f64);
}

/// Adapts a plain cost function by re-evaluating the full vector.
pub struct DenseCost<F> {
    dim: usize,
    f: F,
}

impl<F> DenseCost<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        DenseCost { dim, f }
    }
}

#[derive(Clone, Debug)]
pub struct DenseContext {
    x: Vec<f64>,
    cost: f64,
}

impl<F> ContextCost for DenseCost<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    type Context = DenseContext;

    fn dim(&self) -> usize {
        self.dim
    }

    fn bind(&self, x: &[f64]) -> DenseContext {
        DenseContext {
            x: x.to_vec(),
            cost: (self.f)(x),
        }
    }

    fn cost_of(&self, ctx: &DenseContext) -> f64 {
        ctx.cost
    }

    fn probe(&self, ctx: &DenseContext, j: usize, z: f64) -> f64 {
        let mut y = ctx.x.clone();
        y[j] = z;
        (self.f)(&y)
    }

    fn commit(&self, ctx: &mut DenseContext, j: usize, z: f64) {
        ctx.x[j] = z;
        ctx.cost = (self.f)(&ctx.x);
    }
}

pub fn evaluations_per_iteration(n: usize, swarm_size: usize) -> usize {
    2 * n * swarm_size
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Subswarm {
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
    pub best_positions: Vec<f64>,
    /// `f(b(j, y_i))` as of the last time this swarm was evaluated.
    pub best_costs: Vec<f64>,
}

pub struct CpsoState<X> {
    swarms: Vec<Subswarm>,
    context: Vec<f64>,
    context_cost: f64,
    bound: X,
    iteration: usize,
    evaluations: usize,
}

impl<X> CpsoState<X> {
    pub fn dim(&self) -> usize {
        self.context.len()
    }

    pub fn swarm(&self, j: usize) -> &Subswarm {
        &self.swarms[j]
    }

    /// The vector of swarm bests.
    pub fn context(&self) -> &[f64] {
        &self.context
    }

    pub fn context_cost(&self) -> f64 {
        self.context_cost
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }
}

impl<X> CpsoState<X> {
    /// Builds a state from explicit swarms and context (bests start at the
    /// positions with the given costs).
    pub fn from_parts<C>(cost: &C, swarms: Vec<Subswarm>, context: Vec<f64>) -> Result<Self>
    where
        C: ContextCost<Context = X>,
    {
        if swarms.len() != context.len() || context.len() != cost.dim() {
            return Err(Error::ShapeMismatch(format!(
                "{} swarms, context of {}, cost of dimension {}",
                swarms.len(),
                context.len(),
                cost.dim()
            )));
        }
        let bound = cost.bind(&context);
        Ok(CpsoState {
            swarms,
            context_cost: cost.cost_of(&bound),
            context,
            bound,
            iteration: 0,
            evaluations: 1,
        })
    }
}

/// `b(j, z)`: the context vector with component `j` replaced by `z`.
pub fn compose_context<X>(state: &CpsoState<X>, j: usize, z: f64) -> Result<Vec<f64>> {
    if j >= state.context.len() {
        return Err(Error::IndexOutOfRange {
            index: j,
            len: state.context.len(),
        });
    }
    let mut b = state.context.clone();
    b[j] = z;
    Ok(b)
}

/// Applies step 3 of the swarm update given fresh `f(b(j, x_i))` and
/// `f(b(j, y_i))` values.
fn absorb<C: ContextCost>(
    state: &mut CpsoState<C::Context>,
    cost: &C,
    j: usize,
    fx: &[f64],
    fy: &[f64],
) {
    let swarm = &mut state.swarms[j];
    for i in 0..swarm.positions.len() {
        let mut best = fy[i];
        if fx[i] < best {
            swarm.best_positions[i] = swarm.positions[i];
            best = fx[i];
        }
        swarm.best_costs[i] = best;
        if best < state.context_cost {
            let z = swarm.best_positions[i];
            cost.commit(&mut state.bound, j, z);
            state.context[j] = z;
            state.context_cost = best;
            debug_assert_eq!(cost.cost_of(&state.bound).to_bits(), best.to_bits());
        }
    }
}

pub fn init_cpso<C: ContextCost>(
    cost: &C,
    cfg: &PsoConfig,
    rng: &mut SimRng,
) -> Result<CpsoState<C::Context>> {
    cfg.validate()?;
    let n = cost.dim();
    if n == 0 {
        return Err(Error::InvalidConfig("dimension must be at least 1".into()));
    }
    let s = cfg.swarm_size;
    let swarms: Vec<Subswarm> = (0..n)
        .map(|_| {
            let (positions, velocities): (Vec<f64>, Vec<f64>) =
                (0..s).map(|_| sample_component(cfg, rng)).unzip();
            Subswarm {
                best_positions: positions.clone(),
                positions,
                velocities,
                best_costs: vec![f64::INFINITY; s],
            }
        })
        .collect();
    let context: Vec<f64> = swarms.iter().map(|sw| sw.positions[0]).collect();
    let mut state = CpsoState::from_parts(cost, swarms, context)?;
    check_finite(state.context_cost, 0)?;

    let mut fx = vec![0.0; s];
    for j in 0..n {
        let bound = &state.bound;
        let positions = &state.swarms[j].positions;
        fill_indexed(cfg.execution, &mut fx, |i| cost.probe(bound, j, positions[i]));
        state.evaluations += s;
        for &c in &fx {
            check_finite(c, 0)?;
        }
        absorb(&mut state, cost, j, &fx, &fx);
    }
    Ok(state)
}

/// One outer iteration over all swarms.
pub fn cpso_iteration<C: ContextCost>(
    state: &mut CpsoState<C::Context>,
    cost: &C,
    cfg: &PsoConfig,
    rng: &mut SimRng,
) -> Result<()> {
    let s = cfg.swarm_size;
    let mut scores = vec![0.0; 2 * s];
    state.iteration += 1;
    for j in 0..state.dim() {
        let draws: Vec<ParticleDraw> = (0..s).map(|_| ParticleDraw::sample(cfg, rng)).collect();
        let p_global = state.context[j];
        let swarm = &mut state.swarms[j];
        for (i, draw) in draws.iter().enumerate() {
            let v = update_velocity(
                swarm.positions[i],
                swarm.velocities[i],
                swarm.best_positions[i],
                swarm.best_positions[draw.partner],
                p_global,
                draw.omega,
                draw.r,
            );
            swarm.velocities[i] = v;
            swarm.positions[i] += v;
        }

        let bound = &state.bound;
        let swarm = &state.swarms[j];
        fill_indexed(cfg.execution, &mut scores, |k| {
            let z = if k < s {
                swarm.positions[k]
            } else {
                swarm.best_positions[k - s]
            };
            cost.probe(bound, j, z)
        });
        state.evaluations += 2 * s;
        for &c in &scores {
            check_finite(c, state.iteration)?;
        }
        let (fx, fy) = scores.split_at(s);
        absorb(state, cost, j, fx, fy);
    }
    Ok(())
}

pub fn run_cpso<C: ContextCost>(cost: &C, cfg: &PsoConfig, seed: u64) -> Result<RunOutcome> {
    let mut rng = stream_rng(seed, Stream::Optimizer);
    let mut state = init_cpso(cost, cfg, &mut rng)?;
    let mut trace = Vec::with_capacity(cfg.max_iters);
    for _ in 0..cfg.max_iters {
        cpso_iteration(&mut state, cost, cfg, &mut rng)?;
        trace.push(state.context_cost);
        if cfg.target_cost.is_some_and(|t| state.context_cost <= t) {
            break;
        }
    }
    Ok(RunOutcome {
        best_position: state.context,
        best_cost: state.context_cost,
        trace,
        evaluations: state.evaluations,
    })
}

/// [`run_cpso`] for a plain cost function.
pub fn run_cpso_fn<F>(dim: usize, f: F, cfg: &PsoConfig, seed: u64) -> Result<RunOutcome>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    run_cpso(&DenseCost::new(dim, f), cfg, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::par::Execution;
    use crate::swarm::{run_pso, OmegaMode};

    fn sphere(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    fn cfg(size: usize, omega: f64, iters: usize) -> PsoConfig {
        PsoConfig::new(size, OmegaMode::Fixed(omega), iters)
    }

    fn state(n: usize, seed: u64) -> CpsoState<DenseContext> {
        let cost = DenseCost::new(n, sphere);
        init_cpso(&cost, &cfg(5, 1.0, 1), &mut stream_rng(seed, Stream::Optimizer)).unwrap()
    }

    #[test]
    fn compose_replaces_one_component() {
        let cost = DenseCost::new(3, sphere);
        let sw = |x: f64| Subswarm {
            positions: vec![x, x],
            velocities: vec![0.0; 2],
            best_positions: vec![x, x],
            best_costs: vec![0.0; 2],
        };
        let st = CpsoState::from_parts(&cost, vec![sw(1.0), sw(2.0), sw(3.0)], vec![1.0, 2.0, 3.0])
            .unwrap();
        assert_eq!(compose_context(&st, 1, 9.0).unwrap(), vec![1.0, 9.0, 3.0]);
        assert_eq!(compose_context(&st, 0, 1.0).unwrap(), st.context());
        assert!(matches!(
            compose_context(&st, 3, 0.0),
            Err(Error::IndexOutOfRange { index: 3, len: 3 })
        ));
    }

    #[test]
    fn context_cost_is_consistent_with_swarm_bests() {
        let st = state(4, 3);
        for j in 0..4 {
            let b = compose_context(&st, j, st.context()[j]).unwrap();
            assert_eq!(sphere(&b), st.context_cost());
        }
    }

    #[test]
    fn evaluation_budget_is_constant() {
        let cost = DenseCost::new(6, sphere);
        let c = cfg(7, 1.0, 1);
        let mut rng = stream_rng(1, Stream::Optimizer);
        let mut st = init_cpso(&cost, &c, &mut rng).unwrap();
        assert_eq!(st.evaluations(), 6 * 7 + 1);
        for k in 1..=5 {
            cpso_iteration(&mut st, &cost, &c, &mut rng).unwrap();
            assert_eq!(st.evaluations(), 6 * 7 + 1 + k * evaluations_per_iteration(6, 7));
        }
    }

    #[test]
    fn settled_swarms_keep_their_cost() {
        // Every particle sits on the optimum with zero velocity.
        let cost = DenseCost::new(3, sphere);
        let sw = || Subswarm {
            positions: vec![0.0; 4],
            velocities: vec![0.0; 4],
            best_positions: vec![0.0; 4],
            best_costs: vec![0.0; 4],
        };
        let mut st = CpsoState::from_parts(&cost, vec![sw(), sw(), sw()], vec![0.0; 3]).unwrap();
        let c = cfg(4, 1.0, 1);
        let mut rng = stream_rng(2, Stream::Optimizer);
        for _ in 0..3 {
            cpso_iteration(&mut st, &cost, &c, &mut rng).unwrap();
            assert_eq!(st.context_cost(), 0.0);
            assert_eq!(st.context(), &[0.0; 3]);
        }
    }

    #[test]
    fn context_cost_never_increases_within_an_iteration() {
        let f = |x: &[f64]| sphere(x) + 0.3 * (4.0 * x[0] * x[1]).cos();
        let cost = DenseCost::new(4, f);
        let c = cfg(6, 0.5, 1);
        let mut rng = stream_rng(5, Stream::Optimizer);
        let mut st = init_cpso(&cost, &c, &mut rng).unwrap();
        let mut last = st.context_cost();
        for _ in 0..30 {
            cpso_iteration(&mut st, &cost, &c, &mut rng).unwrap();
            assert!(st.context_cost() <= last);
            assert_eq!(f(st.context()), st.context_cost());
            last = st.context_cost();
        }
    }

    #[test]
    fn one_dimension_matches_pso() {
        for omega in [OmegaMode::Fixed(1.0), OmegaMode::Scaled(2.0)] {
            let mut c = PsoConfig::new(8, omega, 40);
            c.init_range = (-4.0, 2.0);
            let f = |x: &[f64]| (x[0] - 0.7).powi(2) + 0.1 * (9.0 * x[0]).sin();
            let a = run_pso(1, &f, &c, 11).unwrap();
            let b = run_cpso_fn(1, f, &c, 11).unwrap();
            assert_eq!(a.trace, b.trace);
            assert_eq!(a.best_position, b.best_position);
        }
    }

    #[test]
    fn runs_are_reproducible_in_every_mode() {
        let mut c = cfg(10, 0.5, 30);
        let a = run_cpso_fn(5, sphere, &c, 8).unwrap();
        let b = run_cpso_fn(5, sphere, &c, 8).unwrap();
        assert_eq!(a, b);
        c.execution = Execution::Sequential;
        let d = run_cpso_fn(5, sphere, &c, 8).unwrap();
        assert_eq!(a, d);
    }

    #[test]
    fn non_finite_cost_aborts() {
        let c = cfg(4, 1.0, 5);
        let res = run_cpso_fn(2, |x: &[f64]| if x[1] > 0.0 { f64::INFINITY } else { 1.0 }, &c, 3);
        assert!(matches!(res, Err(Error::NonFiniteCost { .. })));
    }

    #[test]
    fn separable_sphere() {
        // Reference run: every seed ends below 1e-53.
        let c = cfg(20, 1.0, 200);
        let hits = (0..10)
            .filter(|&seed| run_cpso_fn(10, sphere, &c, seed).unwrap().best_cost < 1e-6)
            .count();
        assert!(hits >= 9, "{hits}/10 seeds reached 1e-6");
    }
}
