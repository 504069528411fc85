//! Interference leakage and the rank condition.
//!
//! Residual blocks are `r_ij = vec(U_i^H H_ij V_j)` for every ordered pair
//! `i ≠ j`, enumerated receiver-major and column-stacked. The leakage is
//! `f(x) = r(x)^H r(x)`.
//!
//! Every residual entry is computed the same way on every path: first the
//! row `g = U_i^H[s, :] · H_ij`, then `g · V_j[:, t]`, then the squared moduli
//! are summed in canonical order. The coordinate-probe path used by the
//! cooperative optimizer therefore returns bit-identical costs to a full
//! evaluation of the modified vector.

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::Serialize;
use smallvec::SmallVec;

use crate::cpso::ContextCost;
use crate::error::{Error, Result};
use crate::mimo::{
    complex_at, generate_channels, make_problem, pack, unpack, CMatrix, ChannelSet, MatrixBundle,
    ProblemSpec, Slot, SolutionVector,
};

pub const DEFAULT_RANK_TOL: f64 = 1e-8;

type Row = SmallVec<[Complex64; 16]>;

/// Residuals in canonical order.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualVector(pub Vec<Complex64>);

impl ResidualVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankReport {
    pub ranks: Vec<usize>,
    pub pass: Vec<bool>,
    pub tol: f64,
}

impl RankReport {
    pub fn passed(&self) -> bool {
        self.pass.iter().all(|&p| p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Block {
    rx: usize,
    tx: usize,
    /// Index of the block's first entry in the residual vector.
    offset: usize,
}

fn enumerate_blocks(spec: &ProblemSpec) -> Vec<Block> {
    let mut blocks = Vec::with_capacity(spec.k() * spec.k().saturating_sub(1));
    let mut offset = 0;
    for rx in 0..spec.k() {
        for tx in 0..spec.k() {
            if rx != tx {
                blocks.push(Block { rx, tx, offset });
                offset += spec.d()[rx] * spec.d()[tx];
            }
        }
    }
    debug_assert_eq!(offset, spec.ne_complex());
    blocks
}

#[inline]
fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

#[inline]
fn column(h: &CMatrix, col: usize) -> &[Complex64] {
    let rows = h.nrows();
    &h.as_slice()[col * rows..(col + 1) * rows]
}

#[inline]
fn with_part(z: Complex64, imaginary: bool, value: f64) -> Complex64 {
    if imaginary {
        Complex64::new(z.re, value)
    } else {
        Complex64::new(value, z.im)
    }
}

/// Evaluates leakage, residuals and coordinate probes for one scenario and
/// channel realization.
#[derive(Clone, Debug)]
pub struct LeakageObjective<'a> {
    spec: &'a ProblemSpec,
    channels: &'a ChannelSet,
    blocks: Vec<Block>,
    slots: Vec<Slot>,
}

impl<'a> LeakageObjective<'a> {
    pub fn new(spec: &'a ProblemSpec, channels: &'a ChannelSet) -> Result<Self> {
        channels.check(spec)?;
        let slots = (0..spec.nv_complex())
            .map(|c| spec.locate(c).expect("index within vector"))
            .collect();
        Ok(LeakageObjective {
            spec,
            channels,
            blocks: enumerate_blocks(spec),
            slots,
        })
    }

    pub fn spec(&self) -> &ProblemSpec {
        self.spec
    }

    pub fn channels(&self) -> &ChannelSet {
        self.channels
    }

    pub fn dim(&self) -> usize {
        self.spec.dim_real()
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.spec.dim_real() {
            return Err(Error::DimensionMismatch(format!(
                "vector has length {}, scenario needs {}",
                x.len(),
                self.spec.dim_real()
            )));
        }
        Ok(())
    }

    fn uh_row(&self, x: &[f64], user: usize, s: usize) -> Row {
        let (n, d) = (self.spec.n()[user], self.spec.d()[user]);
        let off = self.spec.uh_offset(user);
        (0..n).map(|a| complex_at(x, off + a * d + s)).collect()
    }

    fn v_col(&self, x: &[f64], user: usize, t: usize) -> Row {
        let m = self.spec.m()[user];
        let off = self.spec.v_offset(user) + t * m;
        (0..m).map(|b| complex_at(x, off + b)).collect()
    }

    fn g_row(&self, uh_row: &[Complex64], block: &Block) -> Row {
        let h = self.channels.get(block.rx, block.tx);
        (0..h.ncols()).map(|b| cdot(uh_row, column(h, b))).collect()
    }

    /// Visits every residual entry in canonical order.
    fn for_each_residual(&self, x: &[f64], mut f: impl FnMut(Complex64)) {
        for block in &self.blocks {
            let (di, dj) = (self.spec.d()[block.rx], self.spec.d()[block.tx]);
            let g: SmallVec<[Row; 4]> = (0..di)
                .map(|s| self.g_row(&self.uh_row(x, block.rx, s), block))
                .collect();
            for t in 0..dj {
                let v = self.v_col(x, block.tx, t);
                for g_s in &g {
                    f(cdot(g_s, &v));
                }
            }
        }
    }

    /// Leakage without the length check; panics on a short vector.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let mut total = 0.0;
        self.for_each_residual(x, |r| total += r.norm_sqr());
        total
    }

    pub fn leakage(&self, x: &[f64]) -> Result<f64> {
        self.check_len(x)?;
        Ok(self.evaluate(x))
    }

    pub fn residuals(&self, x: &[f64]) -> Result<ResidualVector> {
        self.check_len(x)?;
        let mut out = Vec::with_capacity(self.spec.ne_complex());
        self.for_each_residual(x, |r| out.push(r));
        Ok(ResidualVector(out))
    }

    pub fn rank_check(&self, x: &[f64], tol: f64) -> Result<RankReport> {
        if !(tol > 0.0) {
            return Err(Error::InvalidConfig(format!("rank tolerance must be positive, got {tol}")));
        }
        self.check_len(x)?;
        let bundle = unpack(x, self.spec)?;
        let mut ranks = Vec::with_capacity(self.spec.k());
        let mut pass = Vec::with_capacity(self.spec.k());
        for i in 0..self.spec.k() {
            let desired = bundle.u[i].adjoint() * self.channels.get(i, i) * &bundle.v[i];
            let sv = desired.singular_values();
            let max = sv.iter().cloned().fold(0.0, f64::max);
            let rank = if max > 0.0 {
                sv.iter().filter(|&&s| s > tol * max).count()
            } else {
                0
            };
            ranks.push(rank);
            pass.push(rank == self.spec.d()[i]);
        }
        Ok(RankReport { ranks, pass, tol })
    }

    fn sum_sq(r_sq: &[f64]) -> f64 {
        let mut total = 0.0;
        for v in r_sq {
            total += v;
        }
        total
    }
}

/// Cached decomposition of one point for coordinate-wise probing.
#[derive(Clone, Debug)]
pub struct LeakageContext {
    /// `U_i^H`, row-major `d_i × N_i`.
    uh: Vec<Vec<Complex64>>,
    /// `V_j`, column-major `M_j × d_j`.
    v: Vec<Vec<Complex64>>,
    /// Per block `U_i^H H_ij`, row-major `d_i × M_j`.
    g: Vec<Vec<Complex64>>,
    r_sq: Vec<f64>,
    total: f64,
}

impl ContextCost for LeakageObjective<'_> {
    type Context = LeakageContext;

    fn dim(&self) -> usize {
        self.spec.dim_real()
    }

    fn bind(&self, x: &[f64]) -> LeakageContext {
        let spec = self.spec;
        let uh = (0..spec.k())
            .map(|i| {
                (0..spec.d()[i])
                    .flat_map(|s| self.uh_row(x, i, s))
                    .collect()
            })
            .collect();
        let v = (0..spec.k())
            .map(|j| (0..spec.d()[j]).flat_map(|t| self.v_col(x, j, t)).collect())
            .collect::<Vec<Vec<_>>>();
        let mut ctx = LeakageContext {
            uh,
            v,
            g: Vec::with_capacity(self.blocks.len()),
            r_sq: vec![0.0; spec.ne_complex()],
            total: 0.0,
        };
        for block in &self.blocks {
            let (ni, mj) = (spec.n()[block.rx], spec.m()[block.tx]);
            let g = (0..spec.d()[block.rx])
                .flat_map(|s| self.g_row(&ctx.uh[block.rx][s * ni..(s + 1) * ni], block))
                .collect::<Vec<_>>();
            debug_assert_eq!(g.len(), spec.d()[block.rx] * mj);
            ctx.g.push(g);
        }
        for (bi, block) in self.blocks.iter().enumerate() {
            let (di, dj, mj) = (spec.d()[block.rx], spec.d()[block.tx], spec.m()[block.tx]);
            for t in 0..dj {
                let v = &ctx.v[block.tx][t * mj..(t + 1) * mj];
                for s in 0..di {
                    let r = cdot(&ctx.g[bi][s * mj..(s + 1) * mj], v);
                    ctx.r_sq[block.offset + t * di + s] = r.norm_sqr();
                }
            }
        }
        ctx.total = Self::sum_sq(&ctx.r_sq);
        ctx
    }

    fn cost_of(&self, ctx: &LeakageContext) -> f64 {
        ctx.total
    }

    fn probe(&self, ctx: &LeakageContext, j: usize, z: f64) -> f64 {
        let spec = self.spec;
        let imaginary = j % 2 == 1;
        let mut total = 0.0;
        match self.slots[j / 2] {
            Slot::Precoder { user, row, col } => {
                let m = spec.m()[user];
                let mut v: Row = ctx.v[user][col * m..(col + 1) * m].iter().copied().collect();
                v[row] = with_part(v[row], imaginary, z);
                for (bi, block) in self.blocks.iter().enumerate() {
                    let len = spec.d()[block.rx] * spec.d()[block.tx];
                    let entries = &ctx.r_sq[block.offset..block.offset + len];
                    if block.tx != user {
                        for e in entries {
                            total += e;
                        }
                        continue;
                    }
                    let di = spec.d()[block.rx];
                    for (e, old) in entries.iter().enumerate() {
                        if e / di == col {
                            let s = e % di;
                            total += cdot(&ctx.g[bi][s * m..(s + 1) * m], &v).norm_sqr();
                        } else {
                            total += old;
                        }
                    }
                }
            }
            Slot::DecoderHermitian { user, row, col } => {
                let n = spec.n()[user];
                let di = spec.d()[user];
                let mut uh: Row = ctx.uh[user][row * n..(row + 1) * n].iter().copied().collect();
                uh[col] = with_part(uh[col], imaginary, z);
                for block in &self.blocks {
                    let len = spec.d()[block.rx] * spec.d()[block.tx];
                    let entries = &ctx.r_sq[block.offset..block.offset + len];
                    if block.rx != user {
                        for e in entries {
                            total += e;
                        }
                        continue;
                    }
                    let mj = spec.m()[block.tx];
                    let g = self.g_row(&uh, block);
                    for (e, old) in entries.iter().enumerate() {
                        if e % di == row {
                            let t = e / di;
                            total += cdot(&g, &ctx.v[block.tx][t * mj..(t + 1) * mj]).norm_sqr();
                        } else {
                            total += old;
                        }
                    }
                }
            }
        }
        total
    }

    fn commit(&self, ctx: &mut LeakageContext, j: usize, z: f64) {
        let spec = self.spec;
        let imaginary = j % 2 == 1;
        match self.slots[j / 2] {
            Slot::Precoder { user, row, col } => {
                let m = spec.m()[user];
                let idx = col * m + row;
                ctx.v[user][idx] = with_part(ctx.v[user][idx], imaginary, z);
                for (bi, block) in self.blocks.iter().enumerate() {
                    if block.tx != user {
                        continue;
                    }
                    let di = spec.d()[block.rx];
                    let v = &ctx.v[user][col * m..(col + 1) * m];
                    for s in 0..di {
                        let r = cdot(&ctx.g[bi][s * m..(s + 1) * m], v);
                        ctx.r_sq[block.offset + col * di + s] = r.norm_sqr();
                    }
                }
            }
            Slot::DecoderHermitian { user, row, col } => {
                let n = spec.n()[user];
                let di = spec.d()[user];
                let idx = row * n + col;
                ctx.uh[user][idx] = with_part(ctx.uh[user][idx], imaginary, z);
                for (bi, block) in self.blocks.iter().enumerate() {
                    if block.rx != user {
                        continue;
                    }
                    let mj = spec.m()[block.tx];
                    let g = self.g_row(&ctx.uh[user][row * n..(row + 1) * n], block);
                    ctx.g[bi][row * mj..(row + 1) * mj].copy_from_slice(&g);
                    for t in 0..spec.d()[block.tx] {
                        let r = cdot(&g, &ctx.v[block.tx][t * mj..(t + 1) * mj]);
                        ctx.r_sq[block.offset + t * di + row] = r.norm_sqr();
                    }
                }
            }
        }
        ctx.total = Self::sum_sq(&ctx.r_sq);
    }
}

pub fn residuals(x: &[f64], ch: &ChannelSet, spec: &ProblemSpec) -> Result<ResidualVector> {
    LeakageObjective::new(spec, ch)?.residuals(x)
}

pub fn leakage(x: &[f64], ch: &ChannelSet, spec: &ProblemSpec) -> Result<f64> {
    LeakageObjective::new(spec, ch)?.leakage(x)
}

pub fn rank_check(x: &[f64], ch: &ChannelSet, spec: &ProblemSpec, tol: f64) -> Result<RankReport> {
    LeakageObjective::new(spec, ch)?.rank_check(x, tol)
}

fn to_matrix2(h: &CMatrix) -> Matrix2<Complex64> {
    Matrix2::new(h[(0, 0)], h[(0, 1)], h[(1, 0)], h[(1, 1)])
}

fn inverse(h: &CMatrix, name: &str) -> Result<Matrix2<Complex64>> {
    let m = to_matrix2(h);
    let scale = m.iter().map(|z| z.norm_sqr()).sum::<f64>();
    if m.determinant().norm_sqr() <= 1e-24 * scale * scale {
        return Err(Error::SingularChannel(format!("{name} is numerically singular")));
    }
    m.try_inverse()
        .ok_or_else(|| Error::SingularChannel(format!("{name} is not invertible")))
}

/// Unit-norm eigenvector of a 2 × 2 complex matrix.
fn eigenvector2(e: &Matrix2<Complex64>) -> nalgebra::Vector2<Complex64> {
    let (a, b, c, d) = (e[(0, 0)], e[(0, 1)], e[(1, 0)], e[(1, 1)]);
    let half_tr = (a + d) * 0.5;
    let disc = (half_tr * half_tr - (a * d - b * c)).sqrt();
    let lambda = half_tr + disc;
    // Both (b, λ − a) and (λ − d, c) solve (E − λI)v = 0; take the better
    // conditioned one.
    let v1 = nalgebra::Vector2::new(b, lambda - a);
    let v2 = nalgebra::Vector2::new(lambda - d, c);
    let v = if v1.norm() >= v2.norm() { v1 } else { v2 };
    if v.norm() == 0.0 {
        return nalgebra::Vector2::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
    }
    v.unscale(v.norm())
}

/// Unit vector `u` with `u^H w = 0`.
fn orthogonal2(w: &nalgebra::Vector2<Complex64>) -> nalgebra::Vector2<Complex64> {
    let u = nalgebra::Vector2::new(w[1].conj(), -w[0].conj());
    u.unscale(u.norm())
}

/// Exact alignment for the `(2 × 2, 1)^3` system.
///
/// `V_1` is an eigenvector of `H_31^{-1} H_32 H_12^{-1} H_13 H_23^{-1} H_21`,
/// `V_2 = H_32^{-1} H_31 V_1` and `V_3 = H_23^{-1} H_21 V_1`; each decoder
/// spans the orthogonal complement of the single interference direction at
/// its receiver. All columns have unit norm.
pub fn closed_form_3user(ch: &ChannelSet) -> Result<SolutionVector> {
    let spec = make_problem(3, 2, 2, 1)?;
    ch.check(&spec)?;
    let h = |rx: usize, tx: usize| to_matrix2(ch.get(rx - 1, tx - 1));
    let inv = |rx: usize, tx: usize| inverse(ch.get(rx - 1, tx - 1), &format!("H_{rx}{tx}"));

    let e = inv(3, 1)? * h(3, 2) * inv(1, 2)? * h(1, 3) * inv(2, 3)? * h(2, 1);
    let v1 = eigenvector2(&e);
    let v2 = inv(3, 2)? * h(3, 1) * v1;
    let v3 = inv(2, 3)? * h(2, 1) * v1;
    let v = [v1, v2.unscale(v2.norm()), v3.unscale(v3.norm())];

    // Interference direction at each receiver; either interferer works once
    // aligned, so take the stronger one.
    let interference = |rx: usize| {
        let others: Vec<_> = (1..=3)
            .filter(|&tx| tx != rx)
            .map(|tx| h(rx, tx) * v[tx - 1])
            .collect();
        if others[0].norm() >= others[1].norm() {
            others[0]
        } else {
            others[1]
        }
    };
    let u: Vec<_> = (1..=3).map(|rx| orthogonal2(&interference(rx))).collect();

    let bundle = MatrixBundle {
        v: v.iter().map(|c| CMatrix::from_column_slice(2, 1, c.as_slice())).collect(),
        u: u.iter().map(|c| CMatrix::from_column_slice(2, 1, c.as_slice())).collect(),
    };
    pack(&bundle, &spec)
}

/// Draws channels for the `(2 × 2, 1)^3` system from `seed`, skipping seeds
/// whose realization makes the closed form singular.
pub fn closed_form_instance(seed: u64) -> (ProblemSpec, ChannelSet, SolutionVector) {
    let spec = make_problem(3, 2, 2, 1).expect("proper system");
    let mut s = seed;
    loop {
        let ch = generate_channels(&spec, s);
        if let Ok(x) = closed_form_3user(&ch) {
            return (spec, ch, x);
        }
        s = s.wrapping_add(1);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mimo::{Properness, ProblemSpec};
    use crate::rng::{stream_rng, Stream};
    use proptest::prelude::*;
    use rand::Rng;

    /// Σ_a Σ_b conj(U_i[a, s]) H_ij[a, b] V_j[b, t], straight from the
    /// matrices with no shared code.
    fn oracle_residuals(b: &MatrixBundle, ch: &ChannelSet, spec: &ProblemSpec) -> Vec<Complex64> {
        let mut out = Vec::new();
        for i in 0..spec.k() {
            for j in 0..spec.k() {
                if i == j {
                    continue;
                }
                let h = ch.get(i, j);
                for t in 0..spec.d()[j] {
                    for s in 0..spec.d()[i] {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for a in 0..spec.n()[i] {
                            for bb in 0..spec.m()[j] {
                                acc += b.u[i][(a, s)].conj() * h[(a, bb)] * b.v[j][(bb, t)];
                            }
                        }
                        out.push(acc);
                    }
                }
            }
        }
        out
    }

    fn random_x(spec: &ProblemSpec, seed: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, Stream::Optimizer);
        (0..spec.dim_real()).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn zero_vector_has_zero_residuals() {
        let spec = make_problem(3, 5, 5, 2).unwrap();
        let ch = generate_channels(&spec, 1);
        let x = vec![0.0; 120];
        assert!(residuals(&x, &ch, &spec).unwrap().0.iter().all(|z| z.norm() == 0.0));
        assert_eq!(leakage(&x, &ch, &spec).unwrap(), 0.0);
        let report = rank_check(&x, &ch, &spec, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(report.ranks, vec![0, 0, 0]);
        assert!(!report.passed());
    }

    #[test]
    fn single_user_has_empty_residuals() {
        let spec = make_problem(1, 2, 2, 1).unwrap();
        let ch = generate_channels(&spec, 1);
        let x = random_x(&spec, 3);
        assert!(residuals(&x, &ch, &spec).unwrap().is_empty());
        assert_eq!(leakage(&x, &ch, &spec).unwrap(), 0.0);
    }

    #[test]
    fn residuals_match_triple_loop() {
        let spec = make_problem(3, 2, 2, 1).unwrap();
        let ch = generate_channels(&spec, 5);
        let x = random_x(&spec, 6);
        let got = residuals(&x, &ch, &spec).unwrap();
        let want = oracle_residuals(&unpack(&x, &spec).unwrap(), &ch, &spec);
        assert_eq!(got.len(), want.len());
        for (g, w) in got.0.iter().zip(&want) {
            assert!((g - w).norm() <= 1e-12 * w.norm().max(1e-300), "{g} vs {w}");
        }
        let oracle_il: f64 = want.iter().map(|z| z.norm_sqr()).sum();
        assert!(rel(leakage(&x, &ch, &spec).unwrap(), oracle_il) < 1e-12);
    }

    #[test]
    fn leakage_scales_quadratically_in_precoders() {
        let spec = make_problem(3, 5, 5, 2).unwrap();
        let ch = generate_channels(&spec, 2);
        let x = random_x(&spec, 4);
        let base = leakage(&x, &ch, &spec).unwrap();
        let t = 2.5;
        let mut y = x.clone();
        for v in &mut y[..2 * spec.uh_offset(0)] {
            *v *= t;
        }
        assert!(rel(leakage(&y, &ch, &spec).unwrap(), t * t * base) < 1e-12);
    }

    #[test]
    fn dimension_errors() {
        let spec = make_problem(3, 5, 5, 2).unwrap();
        let ch = generate_channels(&spec, 2);
        assert!(matches!(
            leakage(&[0.0; 10], &ch, &spec),
            Err(Error::DimensionMismatch(_))
        ));
        let other = make_problem(3, 2, 2, 1).unwrap();
        assert!(matches!(
            leakage(&[0.0; 12], &ch, &other),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            rank_check(&[0.0; 120], &ch, &spec, 0.0),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn random_points_pass_rank_check() {
        let spec = make_problem(3, 5, 5, 2).unwrap();
        for seed in 0..100 {
            let ch = generate_channels(&spec, seed);
            let x = random_x(&spec, seed + 1000);
            let report = rank_check(&x, &ch, &spec, DEFAULT_RANK_TOL).unwrap();
            assert!(report.passed(), "seed {seed}: {report:?}");
        }
    }

    #[test]
    fn repeated_precoder_column_loses_rank() {
        let spec = make_problem(3, 5, 5, 2).unwrap();
        let ch = generate_channels(&spec, 8);
        let mut x = random_x(&spec, 9);
        // V_1 is 5 × 2: copy column 0 onto column 1.
        let (a, b) = x.split_at_mut(10);
        b[..10].copy_from_slice(a);
        let report = rank_check(&x, &ch, &spec, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(report.ranks[0], 1);
        assert_eq!(report.pass, vec![false, true, true]);
    }

    #[test]
    fn closed_form_aligns_seed_7() {
        let spec = make_problem(3, 2, 2, 1).unwrap();
        let ch = generate_channels(&spec, 7);
        let x = closed_form_3user(&ch).unwrap();
        assert!(leakage(x.as_slice(), &ch, &spec).unwrap() < 1e-12);
        assert!(rank_check(x.as_slice(), &ch, &spec, DEFAULT_RANK_TOL).unwrap().passed());
        let b = unpack(x.as_slice(), &spec).unwrap();
        for m in b.u.iter().chain(&b.v) {
            assert!((m.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn perturbing_the_aligned_point_increases_leakage() {
        let (spec, ch, x) = closed_form_instance(7);
        let base = leakage(x.as_slice(), &ch, &spec).unwrap();
        let mut rng = stream_rng(77, Stream::Optimizer);
        let y: Vec<f64> = x
            .as_slice()
            .iter()
            .map(|v| v + 1e-3 * rng.random_range(-1.0..1.0))
            .collect();
        assert!(leakage(&y, &ch, &spec).unwrap() > base);
    }

    #[test]
    fn closed_form_rejects_wrong_scenario() {
        let spec = make_problem(3, 5, 5, 2).unwrap();
        let ch = generate_channels(&spec, 1);
        assert!(closed_form_3user(&ch).is_err());
    }

    #[test]
    fn closed_form_reports_singular_channel() {
        let spec = make_problem(3, 2, 2, 1).unwrap();
        let ch = generate_channels(&spec, 1);
        let mut h: Vec<CMatrix> = ch.iter().cloned().collect();
        // H_31 is rank one.
        h[6] = CMatrix::from_element(2, 2, Complex64::new(1.0, 0.5));
        let ch = ChannelSet::from_matrices(&spec, 1, h).unwrap();
        assert!(matches!(closed_form_3user(&ch), Err(Error::SingularChannel(_))));
    }

    fn arb_small_spec() -> impl Strategy<Value = ProblemSpec> {
        (1usize..=3)
            .prop_flat_map(|k| {
                (
                    Just(k),
                    proptest::collection::vec((1usize..=3, 1usize..=3, 1usize..=2), k),
                )
            })
            .prop_map(|(k, users)| {
                let d: Vec<usize> = users.iter().map(|u| u.2.min(u.0).min(u.1)).collect();
                let m: Vec<usize> = users.iter().map(|u| u.0).collect();
                let n: Vec<usize> = users.iter().map(|u| u.1).collect();
                ProblemSpec::new(k, m, n, d, Properness::Allow).unwrap()
            })
    }

    proptest! {
        #[test]
        fn residual_length_is_equation_count(spec in arb_small_spec(), seed in 0u64..1000) {
            let ch = generate_channels(&spec, seed);
            let x = random_x(&spec, seed);
            prop_assert_eq!(residuals(&x, &ch, &spec).unwrap().len(), spec.ne_complex());
        }

        #[test]
        fn residuals_are_linear_in_precoders(spec in arb_small_spec(), seed in 0u64..1000) {
            let ch = generate_channels(&spec, seed);
            let obj = LeakageObjective::new(&spec, &ch).unwrap();
            let split = 2 * spec.uh_offset(0);
            let x = random_x(&spec, seed);
            let y = random_x(&spec, seed + 1);
            // Same decoders, precoders x_V + 2 y_V.
            let mut sum = x.clone();
            for i in 0..split {
                sum[i] += 2.0 * y[i];
            }
            let mut y_only = x.clone();
            y_only[..split].copy_from_slice(&y[..split]);
            let rx = obj.residuals(&x).unwrap().0;
            let ry = obj.residuals(&y_only).unwrap().0;
            let rs = obj.residuals(&sum).unwrap().0;
            for k in 0..rs.len() {
                let want = rx[k] + ry[k] * 2.0;
                prop_assert!((rs[k] - want).norm() <= 1e-12 * (1.0 + want.norm()));
            }
        }

        #[test]
        fn residuals_are_conjugate_linear_in_decoders(spec in arb_small_spec(), seed in 0u64..1000) {
            let ch = generate_channels(&spec, seed);
            let obj = LeakageObjective::new(&spec, &ch).unwrap();
            let split = 2 * spec.uh_offset(0);
            let x = random_x(&spec, seed);
            let y = random_x(&spec, seed + 1);
            // Scale decoders by a complex α: U -> αU means U^H -> conj(α) U^H.
            let alpha = Complex64::new(0.3, -1.7);
            let b = unpack(&x, &spec).unwrap();
            let mut scaled = b.clone();
            for u in &mut scaled.u {
                *u *= alpha;
            }
            let xs = pack(&scaled, &spec).unwrap();
            let r0 = obj.residuals(&x).unwrap().0;
            let r1 = obj.residuals(xs.as_slice()).unwrap().0;
            for k in 0..r0.len() {
                let want = r0[k] * alpha.conj();
                prop_assert!((r1[k] - want).norm() <= 1e-12 * (1.0 + want.norm()));
            }
            // Additivity in U for fixed V.
            let mut sum = x.clone();
            let mut y_only = x.clone();
            for i in split..x.len() {
                sum[i] += y[i];
                y_only[i] = y[i];
            }
            let ry = obj.residuals(&y_only).unwrap().0;
            let rs = obj.residuals(&sum).unwrap().0;
            for k in 0..rs.len() {
                let want = r0[k] + ry[k];
                prop_assert!((rs[k] - want).norm() <= 1e-12 * (1.0 + want.norm()));
            }
        }

        #[test]
        fn probe_and_commit_match_full_evaluation_bitwise(
            spec in arb_small_spec(),
            seed in 0u64..1000,
            moves in proptest::collection::vec((any::<prop::sample::Index>(), -2.0f64..2.0), 1..20),
        ) {
            let ch = generate_channels(&spec, seed);
            let obj = LeakageObjective::new(&spec, &ch).unwrap();
            let mut x = random_x(&spec, seed);
            let mut ctx = obj.bind(&x);
            prop_assert_eq!(obj.cost_of(&ctx).to_bits(), obj.evaluate(&x).to_bits());
            for (idx, z) in moves {
                let j = idx.index(x.len());
                let mut y = x.clone();
                y[j] = z;
                let probed = obj.probe(&ctx, j, z);
                prop_assert_eq!(probed.to_bits(), obj.evaluate(&y).to_bits());
                obj.commit(&mut ctx, j, z);
                x = y;
                prop_assert_eq!(obj.cost_of(&ctx).to_bits(), probed.to_bits());
            }
        }
    }
}
