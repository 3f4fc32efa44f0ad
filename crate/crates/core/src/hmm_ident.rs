//! Recursive split-likelihood identification of finite hidden Markov models.
//!
//! A candidate model is parameterized by row-softmax logits
//! `θ = (θ_p, θ_q)` for its transition table `p_θ(x′|x)` (`N_x×N_x`) and its
//! emission table `q_θ(y|x)` (`N_x×N_y`), so `d_θ = N_x² + N_x·N_y`. The
//! initial law of every block is uniform and does not depend on `θ`.
//!
//! With `R_θ(y)_{x′x} = q_θ(y|x′) p_θ(x′|x)` the optimal filter evolves as
//! `u′ = R_θ(y)u / eᵀR_θ(y)u` and contributes `Φ = log eᵀR_θ(y)u` to the
//! log-likelihood. `Ψ = ∇_θΦ + Vᵀ∇_uΦ` is its total derivative along the
//! tangent filter `V = ∇_θ u`.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finite_markov::{
    ergodicity_margin, invariant_distribution, ProbabilityVector, StochasticMatrix,
};
use crate::rng::{categorical, seeded, SimRng};
use crate::sgd_core::{
    run_with_rng, ParamVector, ProjectionPolicy, RunOptions, StepSchedule, Trajectory,
};
use crate::stats::{mean_and_se, VectorBatchMeans};

/// Enumeration budget for [`exact_f_n`].
pub const ENUMERATION_BUDGET: u128 = 1_000_000;

/// Data-generating hidden Markov model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HmmDocument", into = "HmmDocument")]
pub struct TrueHmm {
    transition: StochasticMatrix,
    /// `[x][y]`
    emission: Vec<f64>,
    n_obs: usize,
    stationary: ProbabilityVector,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct HmmDocument {
    transition: StochasticMatrix,
    emission: Vec<Vec<f64>>,
}

impl TryFrom<HmmDocument> for TrueHmm {
    type Error = Error;
    fn try_from(doc: HmmDocument) -> Result<Self> {
        TrueHmm::new(doc.transition, doc.emission)
    }
}

impl From<TrueHmm> for HmmDocument {
    fn from(m: TrueHmm) -> Self {
        HmmDocument {
            emission: m.emission.chunks(m.n_obs).map(<[f64]>::to_vec).collect(),
            transition: m.transition,
        }
    }
}

impl TrueHmm {
    pub fn new(transition: StochasticMatrix, emission: Vec<Vec<f64>>) -> Result<Self> {
        let nx = transition.dim();
        if emission.len() != nx {
            return Err(Error::InvalidModel(format!(
                "emission has {} rows, expected {nx}",
                emission.len()
            )));
        }
        let n_obs = emission[0].len();
        if n_obs == 0 {
            return Err(Error::InvalidModel("emission rows are empty".into()));
        }
        for (x, row) in emission.iter().enumerate() {
            if row.len() != n_obs {
                return Err(Error::InvalidModel(format!(
                    "emission row {x} has wrong length"
                )));
            }
            ProbabilityVector::new(row.clone())
                .map_err(|e| Error::InvalidModel(format!("emission row {x}: {e}")))?;
        }
        let margin = ergodicity_margin(&transition)?;
        if margin >= 1.0 - 1e-9 {
            return Err(Error::InvalidModel(format!(
                "hidden chain is not geometrically ergodic (margin {margin})"
            )));
        }
        let stationary = invariant_distribution(&transition)?;
        Ok(Self {
            transition,
            emission: emission.into_iter().flatten().collect(),
            n_obs,
            stationary,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Random model with entries bounded away from zero.
    pub fn random<R: Rng + ?Sized>(n_states: usize, n_obs: usize, rng: &mut R) -> Self {
        let mut row = |n: usize| -> Vec<f64> {
            let raw: Vec<f64> = (0..n).map(|_| 0.1 + rng.random::<f64>()).collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|r| r / s).collect()
        };
        let transition = StochasticMatrix::new((0..n_states).map(|_| row(n_states)).collect())
            .expect("normalized rows");
        let emission = (0..n_states).map(|_| row(n_obs)).collect();
        Self::new(transition, emission).expect("positive tables are ergodic")
    }

    pub fn n_states(&self) -> usize {
        self.transition.dim()
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn transition(&self) -> &StochasticMatrix {
        &self.transition
    }

    pub fn emission(&self, x: usize) -> &[f64] {
        &self.emission[x * self.n_obs..(x + 1) * self.n_obs]
    }

    pub fn stationary(&self) -> &ProbabilityVector {
        &self.stationary
    }

    /// Log-probability logits that reproduce this model exactly.
    pub fn true_theta(&self) -> ParamVector {
        let mut t: Vec<f64> = self.transition.rows().flatten().map(|p| p.ln()).collect();
        t.extend(self.emission.iter().map(|q| q.ln()));
        ParamVector(t)
    }

    pub fn param_dim(&self) -> usize {
        CandidateHmm::dim_for(self.n_states(), self.n_obs)
    }
}

/// Endless stationary output stream of a [`TrueHmm`].
#[derive(Debug, Clone)]
pub struct OutputStream<'a> {
    model: &'a TrueHmm,
    state: usize,
}

impl<'a> OutputStream<'a> {
    /// Starts the hidden chain from its stationary law.
    pub fn new(model: &'a TrueHmm, rng: &mut SimRng) -> Self {
        let state = categorical(rng, model.stationary());
        Self { model, state }
    }

    pub fn state(&self) -> usize {
        self.state
    }

    /// Moves the hidden chain one step and emits from the new state.
    pub fn next_obs(&mut self, rng: &mut SimRng) -> usize {
        self.state = categorical(rng, self.model.transition.row(self.state));
        categorical(rng, self.model.emission(self.state))
    }

    pub fn fill(&mut self, out: &mut [usize], rng: &mut SimRng) {
        for o in out {
            *o = self.next_obs(rng);
        }
    }
}

/// Stationary observations `Y_1..Y_length`.
pub fn simulate_output(model: &TrueHmm, length: usize, rng: &mut SimRng) -> Vec<usize> {
    let mut stream = OutputStream::new(model, rng);
    let mut out = vec![0; length];
    stream.fill(&mut out, rng);
    out
}

/// Candidate model evaluated at one `θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateHmm {
    nx: usize,
    ny: usize,
    /// `p_θ(x′|x)` at `[x][x′]`
    p: Vec<f64>,
    /// `q_θ(y|x)` at `[x][y]`
    q: Vec<f64>,
}

fn softmax_rows(logits: &[f64], width: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(logits.len());
    for row in logits.chunks(width) {
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = row.iter().map(|l| (l - m).exp()).collect();
        let s: f64 = e.iter().sum();
        out.extend(e.iter().map(|v| v / s));
    }
    out
}

impl CandidateHmm {
    pub fn dim_for(nx: usize, ny: usize) -> usize {
        nx * nx + nx * ny
    }

    pub fn new(nx: usize, ny: usize, theta: &[f64]) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidModel(
                "empty state or observation space".into(),
            ));
        }
        let d = Self::dim_for(nx, ny);
        if theta.len() != d {
            return Err(Error::Dimension {
                expected: d,
                got: theta.len(),
            });
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidModel("non-finite logit".into()));
        }
        Ok(Self {
            nx,
            ny,
            p: softmax_rows(&theta[..nx * nx], nx),
            q: softmax_rows(&theta[nx * nx..], ny),
        })
    }

    pub fn n_states(&self) -> usize {
        self.nx
    }

    pub fn n_obs(&self) -> usize {
        self.ny
    }

    pub fn dim(&self) -> usize {
        Self::dim_for(self.nx, self.ny)
    }

    pub fn transition(&self, x: usize, xp: usize) -> f64 {
        self.p[x * self.nx + xp]
    }

    pub fn emission(&self, x: usize, y: usize) -> f64 {
        self.q[x * self.ny + y]
    }

    /// `Σ_x p_θ(x′|x) u_x` for every `x′`.
    fn predict(&self, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (x, &ux) in u.iter().enumerate() {
            for (o, p) in out.iter_mut().zip(&self.p[x * self.nx..(x + 1) * self.nx]) {
                *o += p * ux;
            }
        }
    }
}

/// Optimal filter `u` and tangent filter `V = ∇_θ u`.
///
/// `V` is stored column by column: entry `(x, j)` lives at `j·N_x + x`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterPair {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl FilterPair {
    /// Uniform `u` with `V = 0`.
    pub fn initial(nx: usize, dim: usize) -> Self {
        Self {
            u: vec![1.0 / nx as f64; nx],
            v: vec![0.0; nx * dim],
        }
    }

    pub fn tangent(&self, x: usize, j: usize) -> f64 {
        self.v[j * self.u.len() + x]
    }
}

/// One filter update; returns `(u′, Φ)`.
pub fn filter_step(cand: &CandidateHmm, u: &[f64], y: usize) -> (Vec<f64>, f64) {
    let mut a = vec![0.0; cand.nx];
    cand.predict(u, &mut a);
    for (x, ax) in a.iter_mut().enumerate() {
        *ax *= cand.emission(x, y);
    }
    let s: f64 = a.iter().sum();
    a.iter_mut().for_each(|v| *v /= s);
    (a, s.ln())
}

/// Reusable work space for [`tangent_step_into`].
#[derive(Debug, Clone)]
pub struct TangentScratch {
    pred: Vec<f64>,
    a: Vec<f64>,
    da: Vec<f64>,
    pv: Vec<f64>,
}

impl TangentScratch {
    pub fn new(nx: usize, dim: usize) -> Self {
        Self {
            pred: vec![0.0; nx],
            a: vec![0.0; nx],
            da: vec![0.0; nx * dim],
            pv: vec![0.0; nx],
        }
    }
}

/// In-place filter and tangent update; writes `Ψ` into `psi` and returns `Φ`.
pub fn tangent_step_into(
    cand: &CandidateHmm,
    pair: &mut FilterPair,
    y: usize,
    psi: &mut [f64],
    scratch: &mut TangentScratch,
) -> f64 {
    let (nx, ny) = (cand.nx, cand.ny);
    let d = cand.dim();
    cand.predict(&pair.u, &mut scratch.pred);
    for x in 0..nx {
        scratch.a[x] = cand.emission(x, y) * scratch.pred[x];
    }
    let s: f64 = scratch.a.iter().sum();

    // da_j = (∂_j R) u + R V_j
    for j in 0..d {
        let col = &pair.v[j * nx..(j + 1) * nx];
        cand.predict(col, &mut scratch.pv);
        let da = &mut scratch.da[j * nx..(j + 1) * nx];
        for x in 0..nx {
            da[x] = cand.emission(x, y) * scratch.pv[x];
        }
        if j < nx * nx {
            let (r, k) = (j / nx, j % nx);
            let ur = pair.u[r];
            let pk = cand.transition(r, k);
            for x in 0..nx {
                let dp = cand.transition(r, x) * (if x == k { 1.0 } else { 0.0 } - pk);
                da[x] += cand.emission(x, y) * dp * ur;
            }
        } else {
            let jj = j - nx * nx;
            let (r, k) = (jj / ny, jj % ny);
            let dq = cand.emission(r, y) * (if y == k { 1.0 } else { 0.0 } - cand.emission(r, k));
            da[r] += dq * scratch.pred[r];
        }
    }
    for x in 0..nx {
        pair.u[x] = scratch.a[x] / s;
    }
    for j in 0..d {
        let da = &scratch.da[j * nx..(j + 1) * nx];
        let total: f64 = da.iter().sum();
        psi[j] = total / s;
        let col = &mut pair.v[j * nx..(j + 1) * nx];
        for x in 0..nx {
            col[x] = (da[x] - pair.u[x] * total) / s;
        }
    }
    s.ln()
}

/// Filter plus tangent update; returns the new pair and `Ψ`.
pub fn tangent_step(cand: &CandidateHmm, pair: &FilterPair, y: usize) -> (FilterPair, ParamVector) {
    let mut next = pair.clone();
    let mut psi = vec![0.0; cand.dim()];
    let mut scratch = TangentScratch::new(cand.nx, cand.dim());
    tangent_step_into(cand, &mut next, y, &mut psi, &mut scratch);
    (next, ParamVector(psi))
}

fn check_block(cand: &CandidateHmm, ys: &[usize]) -> Result<()> {
    if ys.is_empty() {
        return Err(Error::config("block", "block length must be at least 1"));
    }
    if let Some(&y) = ys.iter().find(|&&y| y >= cand.ny) {
        return Err(Error::InvalidModel(format!("observation {y} out of range")));
    }
    Ok(())
}

/// `φ_N = −(1/N) Σ_i Φ(y_{i+1}, u_i)` from a uniform start.
pub fn block_negloglik(cand: &CandidateHmm, ys: &[usize]) -> Result<f64> {
    check_block(cand, ys)?;
    let mut u = vec![1.0 / cand.nx as f64; cand.nx];
    let mut total = 0.0;
    for &y in ys {
        let (next, phi) = filter_step(cand, &u, y);
        u = next;
        total += phi;
    }
    Ok(-total / ys.len() as f64)
}

/// `(φ_N, ψ_N)` with `ψ_N = −(1/N) Σ_i Ψ(y_{i+1}, u_i, V_i)`.
pub fn block_value_and_score(cand: &CandidateHmm, ys: &[usize]) -> Result<(f64, ParamVector)> {
    check_block(cand, ys)?;
    let d = cand.dim();
    let mut pair = FilterPair::initial(cand.nx, d);
    let mut scratch = TangentScratch::new(cand.nx, d);
    let mut psi = vec![0.0; d];
    let mut grad = vec![0.0; d];
    let mut value = 0.0;
    for &y in ys {
        value += tangent_step_into(cand, &mut pair, y, &mut psi, &mut scratch);
        for (g, p) in grad.iter_mut().zip(&psi) {
            *g += p;
        }
    }
    let n = ys.len() as f64;
    grad.iter_mut().for_each(|g| *g /= -n);
    Ok((-value / n, ParamVector(grad)))
}

pub fn block_score(cand: &CandidateHmm, ys: &[usize]) -> Result<ParamVector> {
    Ok(block_value_and_score(cand, ys)?.1)
}

/// `θ_{n+1} = θ_n − α_n ψ_{N,θ_n}(block)`.
pub fn split_likelihood_step(
    n_states: usize,
    n_obs: usize,
    theta: &[f64],
    block: &[usize],
    alpha: f64,
) -> Result<ParamVector> {
    let cand = CandidateHmm::new(n_states, n_obs, theta)?;
    let score = block_score(&cand, block)?;
    Ok(ParamVector(
        theta
            .iter()
            .zip(score.iter())
            .map(|(t, s)| t - alpha * s)
            .collect(),
    ))
}

/// Settings of a split-likelihood run.
#[derive(Debug, Clone)]
pub struct HmmRun {
    pub block_len: usize,
    pub schedule: StepSchedule,
    /// Number of blocks, one parameter update per block.
    pub blocks: usize,
    pub projection: Option<ProjectionPolicy>,
    pub record_every: usize,
}

/// Runs the recursion on a stationary output stream of `truth`.
pub fn run_split_likelihood(
    truth: &TrueHmm,
    theta0: ParamVector,
    settings: &HmmRun,
    seed: u64,
) -> Result<Trajectory> {
    let (nx, ny) = (truth.n_states(), truth.n_obs());
    if theta0.len() != CandidateHmm::dim_for(nx, ny) {
        return Err(Error::Dimension {
            expected: CandidateHmm::dim_for(nx, ny),
            got: theta0.len(),
        });
    }
    if settings.block_len == 0 {
        return Err(Error::config("block_len", "must be at least 1"));
    }
    let mut rng = seeded(seed);
    let mut stream = OutputStream::new(truth, &mut rng);
    let mut block = vec![0; settings.block_len];
    let estimator = |theta: &[f64], _n: usize, rng: &mut SimRng, out: &mut [f64]| {
        stream.fill(&mut block, rng);
        match CandidateHmm::new(nx, ny, theta).and_then(|c| block_score(&c, &block)) {
            Ok(s) => out.copy_from_slice(&s),
            Err(_) => out.fill(f64::NAN),
        }
    };
    run_with_rng(
        estimator,
        &settings.schedule,
        theta0,
        settings.blocks,
        settings.projection.clone(),
        seed,
        &mut rng,
        RunOptions {
            record_every: settings.record_every,
        },
    )
}

/// Number of length-`n` blocks over `n_obs` symbols, or `None` on overflow.
fn block_count(n_obs: usize, n: usize) -> Option<u128> {
    (n_obs as u128).checked_pow(u32::try_from(n).ok()?)
}

/// Enumerates every block `y_{1:N}` with its stationary probability.
fn enumerate_blocks(
    truth: &TrueHmm,
    cand: &CandidateHmm,
    n: usize,
    with_score: bool,
) -> Result<(f64, Vec<f64>)> {
    if truth.n_obs() != cand.ny || truth.n_states() == 0 {
        return Err(Error::Dimension {
            expected: truth.n_obs(),
            got: cand.ny,
        });
    }
    if n == 0 {
        return Err(Error::config("block_len", "must be at least 1"));
    }
    let blocks = block_count(cand.ny, n).unwrap_or(u128::MAX);
    if blocks > ENUMERATION_BUDGET {
        return Err(Error::BudgetExceeded {
            blocks,
            budget: ENUMERATION_BUDGET,
        });
    }
    struct Walk<'a> {
        truth: &'a TrueHmm,
        cand: &'a CandidateHmm,
        n: usize,
        with_score: bool,
        value: f64,
        grad: Vec<f64>,
        psi: Vec<f64>,
        scratch: TangentScratch,
    }
    impl Walk<'_> {
        // `alpha` holds Pr(X_t = x, y_{1:t}) under the true model.
        fn visit(
            &mut self,
            depth: usize,
            alpha: &[f64],
            pair: &FilterPair,
            phi_sum: f64,
            psi_sum: &[f64],
        ) {
            if depth == self.n {
                let prob: f64 = alpha.iter().sum();
                let scale = -prob / self.n as f64;
                self.value += scale * phi_sum;
                for (g, p) in self.grad.iter_mut().zip(psi_sum) {
                    *g += scale * p;
                }
                return;
            }
            let nx_true = self.truth.n_states();
            for y in 0..self.cand.ny {
                let mut next_alpha = vec![0.0; nx_true];
                for (x, na) in next_alpha.iter_mut().enumerate() {
                    let mut s = 0.0;
                    for (j, a) in alpha.iter().enumerate() {
                        s += self.truth.transition.get(j, x) * a;
                    }
                    *na = s * self.truth.emission(x)[y];
                }
                let mut next_pair = pair.clone();
                let (phi, next_psi) = if self.with_score {
                    let phi = tangent_step_into(
                        self.cand,
                        &mut next_pair,
                        y,
                        &mut self.psi,
                        &mut self.scratch,
                    );
                    let acc: Vec<f64> = psi_sum.iter().zip(&self.psi).map(|(a, b)| a + b).collect();
                    (phi, acc)
                } else {
                    let (u, phi) = filter_step(self.cand, &pair.u, y);
                    next_pair.u = u;
                    (phi, Vec::new())
                };
                self.visit(depth + 1, &next_alpha, &next_pair, phi_sum + phi, &next_psi);
            }
        }
    }
    let d = cand.dim();
    let mut walk = Walk {
        truth,
        cand,
        n,
        with_score,
        value: 0.0,
        grad: vec![0.0; if with_score { d } else { 0 }],
        psi: vec![0.0; d],
        scratch: TangentScratch::new(cand.nx, d),
    };
    let start = FilterPair {
        u: vec![1.0 / cand.nx as f64; cand.nx],
        v: if with_score {
            vec![0.0; cand.nx * d]
        } else {
            Vec::new()
        },
    };
    let psi0 = vec![0.0; if with_score { d } else { 0 }];
    walk.visit(0, truth.stationary(), &start, 0.0, &psi0);
    Ok((walk.value, walk.grad))
}

/// `f_N(θ) = E φ_{N,θ}(Y_{1:N})` under the stationary true output law.
pub fn exact_f_n(truth: &TrueHmm, cand: &CandidateHmm, n: usize) -> Result<f64> {
    Ok(enumerate_blocks(truth, cand, n, false)?.0)
}

/// `(f_N, ∇f_N)` by enumeration.
pub fn exact_f_n_and_gradient(
    truth: &TrueHmm,
    cand: &CandidateHmm,
    n: usize,
) -> Result<(f64, ParamVector)> {
    let (v, g) = enumerate_blocks(truth, cand, n, true)?;
    Ok((v, ParamVector(g)))
}

/// Long-run estimate of `∇f(θ) = −lim E Ψ` along one stationary path of
/// length `path_len`, with batch-means standard errors.
pub fn longrun_score(
    truth: &TrueHmm,
    cand: &CandidateHmm,
    path_len: usize,
    rng: &mut SimRng,
) -> Result<(ParamVector, Vec<f64>)> {
    if truth.n_obs() != cand.ny {
        return Err(Error::Dimension {
            expected: truth.n_obs(),
            got: cand.ny,
        });
    }
    let d = cand.dim();
    let burn_in = (path_len / 100).min(1000);
    let mut stream = OutputStream::new(truth, rng);
    let mut pair = FilterPair::initial(cand.nx, d);
    let mut scratch = TangentScratch::new(cand.nx, d);
    let mut psi = vec![0.0; d];
    let mut acc = VectorBatchMeans::new(d, path_len, 100);
    for _ in 0..burn_in {
        let y = stream.next_obs(rng);
        tangent_step_into(cand, &mut pair, y, &mut psi, &mut scratch);
    }
    for _ in 0..path_len {
        let y = stream.next_obs(rng);
        tangent_step_into(cand, &mut pair, y, &mut psi, &mut scratch);
        psi.iter_mut().for_each(|p| *p = -*p);
        acc.push(&psi);
    }
    let (mean, se) = acc.finish();
    Ok((ParamVector(mean), se))
}

/// Split-likelihood bias at one block length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmBiasRow {
    pub block_len: usize,
    pub bias: Vec<f64>,
    pub bias_se: Vec<f64>,
    pub norm: f64,
    pub norm_se: f64,
    /// `N·‖η_N‖`
    pub scaled_norm: f64,
    pub blocks: usize,
}

/// Measures `η_N = ∇f_N(θ) − ∇f(θ)` for each block length.
///
/// One stationary path feeds two filters: a long-run filter that never
/// restarts, and for each `N` a filter restarted from the uniform law at the
/// start of every block. Per block the estimate is
/// `ψ_N(fresh) − (−(1/N) Σ Ψ_longrun)`; both terms see the same
/// observations, so their difference only carries the start-up transient.
pub fn measure_hmm_bias(
    truth: &TrueHmm,
    cand: &CandidateHmm,
    block_lens: &[usize],
    path_len: usize,
    seed: u64,
) -> Result<Vec<HmmBiasRow>> {
    if truth.n_obs() != cand.ny {
        return Err(Error::Dimension {
            expected: truth.n_obs(),
            got: cand.ny,
        });
    }
    if block_lens.is_empty() || block_lens.contains(&0) {
        return Err(Error::config(
            "block_lens",
            "need at least one positive block length",
        ));
    }
    let d = cand.dim();
    let nx = cand.nx;
    let mut rng = seeded(seed);
    let mut stream = OutputStream::new(truth, &mut rng);
    let mut long = FilterPair::initial(nx, d);
    let mut scratch = TangentScratch::new(nx, d);
    let mut psi_long = vec![0.0; d];
    let mut psi_fresh = vec![0.0; d];
    for _ in 0..1000 {
        let y = stream.next_obs(&mut rng);
        tangent_step_into(cand, &mut long, y, &mut psi_long, &mut scratch);
    }
    struct PerLen {
        n: usize,
        pair: FilterPair,
        pos: usize,
        diff: Vec<f64>,
        per_block: Vec<Vec<f64>>,
    }
    let mut lens: Vec<PerLen> = block_lens
        .iter()
        .map(|&n| PerLen {
            n,
            pair: FilterPair::initial(nx, d),
            pos: 0,
            diff: vec![0.0; d],
            per_block: Vec::with_capacity(path_len / n),
        })
        .collect();
    for _ in 0..path_len {
        let y = stream.next_obs(&mut rng);
        tangent_step_into(cand, &mut long, y, &mut psi_long, &mut scratch);
        for l in lens.iter_mut() {
            tangent_step_into(cand, &mut l.pair, y, &mut psi_fresh, &mut scratch);
            for ((df, f), g) in l.diff.iter_mut().zip(&psi_fresh).zip(&psi_long) {
                *df += f - g;
            }
            l.pos += 1;
            if l.pos == l.n {
                let scale = -1.0 / l.n as f64;
                l.per_block.push(l.diff.iter().map(|v| v * scale).collect());
                l.diff.iter_mut().for_each(|v| *v = 0.0);
                l.pair = FilterPair::initial(nx, d);
                l.pos = 0;
            }
        }
    }
    let mut rows = Vec::with_capacity(lens.len());
    for l in lens {
        if l.per_block.len() < 2 {
            return Err(Error::config(
                "path_len",
                format!("too short for block length {}", l.n),
            ));
        }
        let mut bias = Vec::with_capacity(d);
        let mut se = Vec::with_capacity(d);
        for j in 0..d {
            let col: Vec<f64> = l.per_block.iter().map(|b| b[j]).collect();
            let (m, s) = mean_and_se(&col);
            bias.push(m);
            se.push(s);
        }
        let norm = crate::stats::norm2(&bias);
        let norm_se = if norm > 0.0 {
            bias.iter()
                .zip(&se)
                .map(|(b, s)| (b / norm * s).powi(2))
                .sum::<f64>()
                .sqrt()
        } else {
            crate::stats::norm2(&se)
        };
        rows.push(HmmBiasRow {
            block_len: l.n,
            scaled_norm: norm * l.n as f64,
            bias,
            bias_se: se,
            norm,
            norm_se,
            blocks: l.per_block.len(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::norm2;
    use approx::assert_abs_diff_eq;

    fn random_theta(d: usize, rng: &mut SimRng) -> Vec<f64> {
        (0..d).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect()
    }

    /// Σ over hidden paths of π(x0) Π p(x_i|x_{i−1}) q(y_i|x_i), and the
    /// posterior of the last state.
    fn brute_force(cand: &CandidateHmm, ys: &[usize]) -> (f64, Vec<f64>) {
        let nx = cand.n_states();
        let n = ys.len();
        let mut post = vec![0.0; nx];
        let mut total = 0.0;
        let paths = nx.pow(n as u32 + 1);
        for code in 0..paths {
            let xs: Vec<usize> = (0..=n).map(|i| (code / nx.pow(i as u32)) % nx).collect();
            let mut w = 1.0 / nx as f64;
            for i in 1..=n {
                w *= cand.transition(xs[i - 1], xs[i]) * cand.emission(xs[i], ys[i - 1]);
            }
            total += w;
            post[xs[n]] += w;
        }
        post.iter_mut().for_each(|p| *p /= total);
        (total, post)
    }

    #[test]
    fn single_state_filter_and_likelihood() {
        let theta = [0.0, 0.3, -0.4, 1.0];
        let cand = CandidateHmm::new(1, 3, &theta).unwrap();
        let (u, phi) = filter_step(&cand, &[1.0], 2);
        assert_eq!(u, vec![1.0]);
        assert_abs_diff_eq!(phi, cand.emission(0, 2).ln(), epsilon = 1e-15);
        let ys = [0, 2, 2, 1];
        let expect = -ys.iter().map(|&y| cand.emission(0, y).ln()).sum::<f64>() / 4.0;
        assert_abs_diff_eq!(
            block_negloglik(&cand, &ys).unwrap(),
            expect,
            epsilon = 1e-14
        );
    }

    #[test]
    fn uninformative_emission_predicts() {
        let mut rng = seeded(1);
        let mut theta = random_theta(3 * 3 + 3 * 2, &mut rng);
        for x in 0..3 {
            theta[9 + 2 * x] = 0.4;
            theta[9 + 2 * x + 1] = -0.1;
        }
        let cand = CandidateHmm::new(3, 2, &theta).unwrap();
        let u = [0.2, 0.5, 0.3];
        let (next, phi) = filter_step(&cand, &u, 1);
        let mut pred = vec![0.0; 3];
        cand.predict(&u, &mut pred);
        for x in 0..3 {
            assert_abs_diff_eq!(next[x], pred[x], epsilon = 1e-15);
        }
        assert_abs_diff_eq!(phi, cand.emission(0, 1).ln(), epsilon = 1e-14);
    }

    #[test]
    fn uniform_candidate_gives_log_alphabet() {
        let cand = CandidateHmm::new(2, 3, &[0.0; 10]).unwrap();
        let v = block_negloglik(&cand, &[0, 1, 2, 2, 1]).unwrap();
        assert_abs_diff_eq!(v, 3f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn filter_matches_path_enumeration() {
        let mut rng = seeded(2);
        for n in 1..=6 {
            let cand = CandidateHmm::new(2, 2, &random_theta(8, &mut rng)).unwrap();
            let ys: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
            let (lik, post) = brute_force(&cand, &ys);
            let mut u = vec![0.5, 0.5];
            for &y in &ys {
                u = filter_step(&cand, &u, y).0;
            }
            for x in 0..2 {
                assert_abs_diff_eq!(u[x], post[x], epsilon = 1e-12);
            }
            let v = block_negloglik(&cand, &ys).unwrap();
            assert_abs_diff_eq!(v, -lik.ln() / n as f64, epsilon = 1e-10);
        }
    }

    #[test]
    fn score_matches_finite_differences() {
        let mut rng = seeded(3);
        let d = 8;
        let theta = random_theta(d, &mut rng);
        let ys: Vec<usize> = (0..16).map(|_| rng.random_range(0..2)).collect();
        let cand = CandidateHmm::new(2, 2, &theta).unwrap();
        let score = block_score(&cand, &ys).unwrap();
        let h = 1e-5;
        let fd: Vec<f64> = (0..d)
            .map(|j| {
                let mut tp = theta.clone();
                let mut tm = theta.clone();
                tp[j] += h;
                tm[j] -= h;
                let fp = block_negloglik(&CandidateHmm::new(2, 2, &tp).unwrap(), &ys).unwrap();
                let fm = block_negloglik(&CandidateHmm::new(2, 2, &tm).unwrap(), &ys).unwrap();
                (fp - fm) / (2.0 * h)
            })
            .collect();
        let err: f64 = score
            .iter()
            .zip(&fd)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(
            err <= 1e-6 * norm2(&fd),
            "relative error {}",
            err / norm2(&fd)
        );
    }

    #[test]
    fn tangent_columns_sum_to_zero_and_match_fd() {
        let mut rng = seeded(4);
        let d = CandidateHmm::dim_for(3, 2);
        let theta = random_theta(d, &mut rng);
        let cand = CandidateHmm::new(3, 2, &theta).unwrap();
        let mut pair = FilterPair::initial(3, d);
        for _ in 0..100 {
            let y = rng.random_range(0..2);
            pair = tangent_step(&cand, &pair, y).0;
            for j in 0..d {
                let s: f64 = (0..3).map(|x| pair.tangent(x, j)).sum();
                assert!(s.abs() < 1e-10);
            }
        }
        // one more step from this pair against finite differences of u ↦ u′,
        // holding the incoming (u, V) fixed except through θ
        let y = 1;
        let (next, _) = tangent_step(&cand, &pair, y);
        let h = 1e-6;
        for j in 0..d {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[j] += h;
            tm[j] -= h;
            let up: Vec<f64> = pair
                .u
                .iter()
                .enumerate()
                .map(|(x, u)| u + h * pair.tangent(x, j))
                .collect();
            let um: Vec<f64> = pair
                .u
                .iter()
                .enumerate()
                .map(|(x, u)| u - h * pair.tangent(x, j))
                .collect();
            let (fp, _) = filter_step(&CandidateHmm::new(3, 2, &tp).unwrap(), &up, y);
            let (fm, _) = filter_step(&CandidateHmm::new(3, 2, &tm).unwrap(), &um, y);
            for x in 0..3 {
                let fd = (fp[x] - fm[x]) / (2.0 * h);
                assert!((fd - next.tangent(x, j)).abs() <= 1e-6 * fd.abs().max(1e-3));
            }
        }
    }

    #[test]
    fn identical_rows_give_centered_scores() {
        let mut theta = vec![0.0; 8];
        theta[..4].copy_from_slice(&[0.3, -0.2, 0.3, -0.2]);
        theta[4..].copy_from_slice(&[1.0, 0.1, 1.0, 0.1]);
        let cand = CandidateHmm::new(2, 2, &theta).unwrap();
        let s = block_score(&cand, &[0, 1, 1, 0, 1]).unwrap();
        for row in s.chunks(2) {
            assert!((row[0] + row[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn split_step_examples() {
        let theta = vec![0.1, -0.3, 0.2, 0.0, 0.5, -0.5, 0.1, 0.2];
        let same = split_likelihood_step(2, 2, &theta, &[0, 1, 1], 0.0).unwrap();
        assert_eq!(same.0, theta);
        // single-state candidate at the maximum-likelihood emission law
        let ys = [0, 0, 1, 0];
        let opt = [0.0, (0.75f64).ln(), (0.25f64).ln()];
        let moved = split_likelihood_step(1, 2, &opt, &ys, 0.7).unwrap();
        for (a, b) in moved.iter().zip(&opt) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn output_frequencies() {
        let truth = TrueHmm::new(StochasticMatrix::identity(1), vec![vec![0.2, 0.3, 0.5]]).unwrap();
        let mut rng = seeded(5);
        let ys = simulate_output(&truth, 100_000, &mut rng);
        for (y, p) in [0.2, 0.3, 0.5].iter().enumerate() {
            let f = ys.iter().filter(|&&o| o == y).count() as f64 / ys.len() as f64;
            assert!((f - p).abs() < 3.0 * (p * (1.0 - p) / 1e5f64).sqrt());
        }
        let again = simulate_output(&truth, 1000, &mut seeded(7));
        assert_eq!(again, simulate_output(&truth, 1000, &mut seeded(7)));
    }

    #[test]
    fn one_hot_emission_reveals_transitions() {
        let p = StochasticMatrix::new(vec![vec![0.7, 0.3], vec![0.4, 0.6]]).unwrap();
        let truth = TrueHmm::new(p.clone(), vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let ys = simulate_output(&truth, 200_000, &mut seeded(6));
        let mut counts = [[0f64; 2]; 2];
        for w in ys.windows(2) {
            counts[w[0]][w[1]] += 1.0;
        }
        for x in 0..2 {
            let n = counts[x][0] + counts[x][1];
            for xp in 0..2 {
                let f = counts[x][xp] / n;
                let pr = p.get(x, xp);
                assert!((f - pr).abs() < 3.0 * (pr * (1.0 - pr) / n).sqrt() + 1e-12);
            }
        }
    }

    #[test]
    fn enumeration_examples() {
        let mu = [0.6, 0.4];
        let truth = TrueHmm::new(StochasticMatrix::identity(1), vec![mu.to_vec()]).unwrap();
        let cand = CandidateHmm::new(1, 2, &[0.0, 0.2, -0.3]).unwrap();
        let expect = -(mu[0] * cand.emission(0, 0).ln() + mu[1] * cand.emission(0, 1).ln());
        for n in [1, 3, 5] {
            assert_abs_diff_eq!(
                exact_f_n(&truth, &cand, n).unwrap(),
                expect,
                epsilon = 1e-13
            );
        }
        let truth = TrueHmm::random(2, 2, &mut seeded(8));
        assert!(matches!(
            exact_f_n(&truth, &CandidateHmm::new(2, 2, &[0.0; 8]).unwrap(), 21),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn enumerated_gradient_matches_finite_differences() {
        let mut rng = seeded(9);
        let truth = TrueHmm::random(2, 2, &mut rng);
        let theta = random_theta(8, &mut rng);
        let cand = CandidateHmm::new(2, 2, &theta).unwrap();
        let (f, g) = exact_f_n_and_gradient(&truth, &cand, 5).unwrap();
        assert_abs_diff_eq!(f, exact_f_n(&truth, &cand, 5).unwrap(), epsilon = 1e-14);
        let h = 1e-5;
        for j in 0..8 {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[j] += h;
            tm[j] -= h;
            let fd = (exact_f_n(&truth, &CandidateHmm::new(2, 2, &tp).unwrap(), 5).unwrap()
                - exact_f_n(&truth, &CandidateHmm::new(2, 2, &tm).unwrap(), 5).unwrap())
                / (2.0 * h);
            assert!((fd - g[j]).abs() <= 1e-8);
        }
    }

    #[test]
    fn single_state_longrun_and_bias() {
        let mu = [0.6, 0.4];
        let truth = TrueHmm::new(StochasticMatrix::identity(1), vec![mu.to_vec()]).unwrap();
        let theta = [0.0, 0.2, -0.3];
        let cand = CandidateHmm::new(1, 2, &theta).unwrap();
        let (g, se) = longrun_score(&truth, &cand, 100_000, &mut seeded(10)).unwrap();
        // ∇ of the cross-entropy −Σ μ log q: q − μ on the emission logits
        for y in 0..2 {
            let exact = cand.emission(0, y) - mu[y];
            assert!((g[1 + y] - exact).abs() <= 3.0 * se[1 + y] + 1e-12);
        }
        let rows = measure_hmm_bias(&truth, &cand, &[2, 4], 10_000, 11).unwrap();
        for r in rows {
            assert!(r.norm < 1e-14, "{r:?}");
        }
    }

    #[test]
    fn json_round_trip() {
        let truth = TrueHmm::random(2, 3, &mut seeded(12));
        let text = serde_json::to_string(&truth).unwrap();
        let back: TrueHmm = serde_json::from_str(&text).unwrap();
        assert_eq!(truth.transition(), back.transition());
        assert!(serde_json::from_str::<TrueHmm>(
            r#"{"transition":[[1.0,0.0],[0.0,1.0]],"emission":[[1.0],[1.0]]}"#
        )
        .is_err());
    }
}
