//! Average-cost MDPs under softmax randomized policies.
//!
//! Policies are `q_θ(y|x) ∝ exp(θ·ψ(x,y))` for a feature table `ψ`. Without
//! explicit features the table is the identity, which gives one logit per
//! state-action pair. The learning rule is the discounted-trace recursion
//!
//! ```text
//! W_{n+1} = λ W_n + s_{θ_n}(X_{n+1}, Y_{n+1})
//! θ_{n+1} = θ_n − α_n φ(X_{n+1}, Y_{n+1}) W_{n+1}
//! ```
//!
//! and the exact oracles evaluate `f = φᵀν`, `∇f` and the trace bias `η`
//! through deviation-matrix series on the joint chain over `V = X×Y`.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finite_markov::{
    discounted_series, invariant_distribution, DeviationSeries, ProbabilityVector, StochasticMatrix,
};
use crate::rng::{categorical, seeded, SimRng};
use crate::sgd_core::{
    run_with_rng, ParamVector, ProjectionPolicy, RunOptions, StepSchedule, Trajectory,
};
use crate::stats::{norm2, VectorBatchMeans};

const ROW_SUM_TOL: f64 = 1e-12;

/// Finite MDP with transition law `p(x′|x,y)`, cost `φ(x,y)` and policy
/// features `ψ(x,y) ∈ ℝ^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MdpDocument", into = "MdpDocument")]
pub struct MdpModel {
    n_states: usize,
    n_actions: usize,
    dim: usize,
    tabular: bool,
    /// `[x][y][x′]`
    transition: Vec<f64>,
    /// `[x][y]`
    cost: Vec<f64>,
    /// `[x][y][j]`
    features: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MdpDocument {
    n_states: usize,
    n_actions: usize,
    transition: Vec<Vec<Vec<f64>>>,
    cost: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    features: Option<Vec<Vec<Vec<f64>>>>,
}

impl TryFrom<MdpDocument> for MdpModel {
    type Error = Error;
    fn try_from(doc: MdpDocument) -> Result<Self> {
        MdpModel::new(
            doc.n_states,
            doc.n_actions,
            doc.transition,
            doc.cost,
            doc.features,
        )
    }
}

impl From<MdpModel> for MdpDocument {
    fn from(m: MdpModel) -> Self {
        let (nx, ny, d) = (m.n_states, m.n_actions, m.dim);
        let transition = (0..nx)
            .map(|x| (0..ny).map(|y| m.next_state_law(x, y).to_vec()).collect())
            .collect();
        let cost = m.cost.chunks(ny).map(<[f64]>::to_vec).collect();
        let features = (!m.tabular).then(|| {
            (0..nx)
                .map(|x| (0..ny).map(|y| m.feature(x, y).to_vec()).collect())
                .collect()
        });
        debug_assert!(m.tabular || d > 0);
        MdpDocument {
            n_states: nx,
            n_actions: ny,
            transition,
            cost,
            features,
        }
    }
}

impl MdpModel {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transition: Vec<Vec<Vec<f64>>>,
        cost: Vec<Vec<f64>>,
        features: Option<Vec<Vec<Vec<f64>>>>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidModel(
                "n_states and n_actions must be positive".into(),
            ));
        }
        let shape = |what: &str, x: usize, got: usize, want: usize| {
            Error::InvalidModel(format!("{what}[{x}] has {got} entries, expected {want}"))
        };
        if transition.len() != n_states {
            return Err(shape("transition", 0, transition.len(), n_states));
        }
        if cost.len() != n_states {
            return Err(shape("cost", 0, cost.len(), n_states));
        }
        let mut flat_p = Vec::with_capacity(n_states * n_actions * n_states);
        for (x, per_action) in transition.iter().enumerate() {
            if per_action.len() != n_actions {
                return Err(shape("transition", x, per_action.len(), n_actions));
            }
            for (y, row) in per_action.iter().enumerate() {
                if row.len() != n_states {
                    return Err(Error::InvalidModel(format!(
                        "transition[{x}][{y}] has {} entries, expected {n_states}",
                        row.len()
                    )));
                }
                if row.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
                    return Err(Error::InvalidModel(format!(
                        "transition[{x}][{y}] has a negative or non-finite entry"
                    )));
                }
                let s: f64 = row.iter().sum();
                if (s - 1.0).abs() > ROW_SUM_TOL {
                    return Err(Error::InvalidModel(format!(
                        "transition[{x}][{y}] sums to {s}"
                    )));
                }
                flat_p.extend(row);
            }
        }
        let mut flat_c = Vec::with_capacity(n_states * n_actions);
        for (x, row) in cost.iter().enumerate() {
            if row.len() != n_actions {
                return Err(shape("cost", x, row.len(), n_actions));
            }
            if row.iter().any(|&c| !(c >= 0.0 && c.is_finite())) {
                return Err(Error::InvalidModel(format!(
                    "cost[{x}] has a negative or non-finite entry"
                )));
            }
            flat_c.extend(row);
        }
        let nv = n_states * n_actions;
        let (dim, tabular, flat_f) = match features {
            None => {
                let mut f = vec![0.0; nv * nv];
                for v in 0..nv {
                    f[v * nv + v] = 1.0;
                }
                (nv, true, f)
            }
            Some(table) => {
                let dim = table.first().and_then(|r| r.first()).map_or(0, Vec::len);
                if dim == 0 {
                    return Err(Error::InvalidModel(
                        "features must have positive length".into(),
                    ));
                }
                let mut f = Vec::with_capacity(nv * dim);
                if table.len() != n_states {
                    return Err(shape("features", 0, table.len(), n_states));
                }
                for (x, per_action) in table.iter().enumerate() {
                    if per_action.len() != n_actions {
                        return Err(shape("features", x, per_action.len(), n_actions));
                    }
                    for (y, psi) in per_action.iter().enumerate() {
                        if psi.len() != dim || psi.iter().any(|v| !v.is_finite()) {
                            return Err(Error::InvalidModel(format!(
                                "features[{x}][{y}] must hold {dim} finite values"
                            )));
                        }
                        f.extend(psi);
                    }
                }
                (dim, false, f)
            }
        };
        Ok(Self {
            n_states,
            n_actions,
            dim,
            tabular,
            transition: flat_p,
            cost: flat_c,
            features: flat_f,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Random model with strictly positive transition rows and costs in
    /// `[0,1)`; tabular features.
    pub fn random<R: Rng + ?Sized>(n_states: usize, n_actions: usize, rng: &mut R) -> Self {
        let transition = (0..n_states)
            .map(|_| {
                (0..n_actions)
                    .map(|_| {
                        let raw: Vec<f64> =
                            (0..n_states).map(|_| 0.05 + rng.random::<f64>()).collect();
                        let s: f64 = raw.iter().sum();
                        raw.iter().map(|r| r / s).collect()
                    })
                    .collect()
            })
            .collect();
        let cost = (0..n_states)
            .map(|_| (0..n_actions).map(|_| rng.random::<f64>()).collect())
            .collect();
        Self::new(n_states, n_actions, transition, cost, None).expect("random model is valid")
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// Number of joint states `N_x·N_y`.
    pub fn n_joint(&self) -> usize {
        self.n_states * self.n_actions
    }

    /// Parameter dimension `d_θ`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_tabular(&self) -> bool {
        self.tabular
    }

    pub fn next_state_law(&self, x: usize, y: usize) -> &[f64] {
        let o = (x * self.n_actions + y) * self.n_states;
        &self.transition[o..o + self.n_states]
    }

    pub fn cost(&self, x: usize, y: usize) -> f64 {
        self.cost[x * self.n_actions + y]
    }

    /// Cost as a vector over joint states `v = x·N_y + y`.
    pub fn cost_vector(&self) -> &[f64] {
        &self.cost
    }

    pub fn feature(&self, x: usize, y: usize) -> &[f64] {
        let o = (x * self.n_actions + y) * self.dim;
        &self.features[o..o + self.dim]
    }

    /// Same model with every cost replaced by `c`.
    pub fn with_constant_cost(&self, c: f64) -> Self {
        let mut m = self.clone();
        m.cost.iter_mut().for_each(|v| *v = c);
        m
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: theta.len(),
            });
        }
        Ok(())
    }

    /// Writes `q_θ(·|x)` into `out`.
    pub fn policy_row(&self, theta: &[f64], x: usize, out: &mut [f64]) {
        let mut max = f64::NEG_INFINITY;
        for (y, o) in out.iter_mut().enumerate() {
            *o = dot(theta, self.feature(x, y));
            max = max.max(*o);
        }
        let mut s = 0.0;
        for o in out.iter_mut() {
            *o = (*o - max).exp();
            s += *o;
        }
        out.iter_mut().for_each(|o| *o /= s);
    }

    /// Writes `s_θ(x,y) = ψ(x,y) − Σ_{y′} q_θ(y′|x) ψ(x,y′)` into `out`, given
    /// the row `q_θ(·|x)`.
    pub fn score_into(&self, x: usize, y: usize, row: &[f64], out: &mut [f64]) {
        out.copy_from_slice(self.feature(x, y));
        for (yp, q) in row.iter().enumerate() {
            for (o, f) in out.iter_mut().zip(self.feature(x, yp)) {
                *o -= q * f;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Tabulated softmax policy and its score function at one `θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxPolicy {
    n_actions: usize,
    dim: usize,
    probs: Vec<f64>,
    scores: Vec<f64>,
}

impl SoftmaxPolicy {
    pub fn new(model: &MdpModel, theta: &[f64]) -> Result<Self> {
        model.check_theta(theta)?;
        let (nx, ny, d) = (model.n_states, model.n_actions, model.dim);
        let mut probs = vec![0.0; nx * ny];
        let mut scores = vec![0.0; nx * ny * d];
        for x in 0..nx {
            let row = &mut probs[x * ny..(x + 1) * ny];
            model.policy_row(theta, x, row);
            for y in 0..ny {
                let o = (x * ny + y) * d;
                model.score_into(x, y, &probs[x * ny..(x + 1) * ny], &mut scores[o..o + d]);
            }
        }
        Ok(Self {
            n_actions: ny,
            dim: d,
            probs,
            scores,
        })
    }

    pub fn prob(&self, x: usize, y: usize) -> f64 {
        self.probs[x * self.n_actions + y]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.probs[x * self.n_actions..(x + 1) * self.n_actions]
    }

    pub fn score(&self, x: usize, y: usize) -> &[f64] {
        let o = (x * self.n_actions + y) * self.dim;
        &self.scores[o..o + self.dim]
    }

    /// Score at joint state `v`.
    pub fn joint_score(&self, v: usize) -> &[f64] {
        &self.scores[v * self.dim..(v + 1) * self.dim]
    }

    /// `max_v ‖s_θ(v)‖`.
    pub fn max_score_norm(&self) -> f64 {
        self.scores.chunks(self.dim).map(norm2).fold(0.0, f64::max)
    }
}

/// `r_θ(v′|v) = q_θ(y′|x′) p(x′|x,y)` with `v = x·N_y + y`.
pub fn joint_chain(model: &MdpModel, theta: &[f64]) -> Result<StochasticMatrix> {
    let policy = SoftmaxPolicy::new(model, theta)?;
    Ok(joint_chain_with(model, &policy))
}

fn joint_chain_with(model: &MdpModel, policy: &SoftmaxPolicy) -> StochasticMatrix {
    let (nx, ny) = (model.n_states, model.n_actions);
    let nv = nx * ny;
    let mut data = vec![0.0; nv * nv];
    for x in 0..nx {
        for y in 0..ny {
            let v = x * ny + y;
            for (xp, &p) in model.next_state_law(x, y).iter().enumerate() {
                for yp in 0..ny {
                    data[v * nv + xp * ny + yp] = p * policy.prob(xp, yp);
                }
            }
        }
    }
    StochasticMatrix::from_flat(nv, data).expect("product of stochastic tables is stochastic")
}

/// Joint chain, its invariant law and the policy at one `θ`.
#[derive(Debug, Clone)]
pub struct PgExact {
    pub policy: SoftmaxPolicy,
    pub chain: StochasticMatrix,
    pub invariant: ProbabilityVector,
    cost: Vec<f64>,
    dim: usize,
}

/// Exact gradient together with trace biases for several discounts.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientAndBias {
    pub gradient: Vec<f64>,
    pub biases: Vec<Vec<f64>>,
}

impl PgExact {
    pub fn new(model: &MdpModel, theta: &[f64]) -> Result<Self> {
        let policy = SoftmaxPolicy::new(model, theta)?;
        let chain = joint_chain_with(model, &policy);
        let invariant = invariant_distribution(&chain)?;
        Ok(Self {
            policy,
            chain,
            invariant,
            cost: model.cost.clone(),
            dim: model.dim,
        })
    }

    pub fn average_cost(&self) -> f64 {
        self.invariant.dot(&self.cost)
    }

    /// `h_j = Σ_n νᵀ S_j R̃ⁿ φ` and `η_j(λ) = −Σ_n (1 − λⁿ) νᵀ S_j R̃ⁿ φ`,
    /// where `S_j = diag(s_j)`.
    pub fn gradient_and_bias(&self, discounts: &[f64], tol: f64) -> Result<GradientAndBias> {
        let series =
            DeviationSeries::with_invariant(self.chain.clone(), self.invariant.clone(), tol);
        let sums = discounted_series(&series, &self.cost, discounts)?;
        let project = |vals: &[f64], sign: f64| -> Vec<f64> {
            let mut out = vec![0.0; self.dim];
            for (v, (&nu, &h)) in self.invariant.iter().zip(vals).enumerate() {
                let w = sign * nu * h;
                for (o, s) in out.iter_mut().zip(self.policy.joint_score(v)) {
                    *o += w * s;
                }
            }
            out
        };
        Ok(GradientAndBias {
            gradient: project(&sums.full, 1.0),
            biases: sums.deficits.iter().map(|d| project(d, -1.0)).collect(),
        })
    }
}

/// `f(θ) = φᵀν_θ`.
pub fn average_cost(model: &MdpModel, theta: &[f64]) -> Result<f64> {
    Ok(PgExact::new(model, theta)?.average_cost())
}

pub fn exact_gradient(model: &MdpModel, theta: &[f64], tol: f64) -> Result<ParamVector> {
    let g = PgExact::new(model, theta)?.gradient_and_bias(&[], tol)?;
    Ok(ParamVector(g.gradient))
}

pub fn exact_bias(model: &MdpModel, theta: &[f64], lambda: f64, tol: f64) -> Result<ParamVector> {
    check_lambda(lambda)?;
    let mut g = PgExact::new(model, theta)?.gradient_and_bias(&[lambda], tol)?;
    Ok(ParamVector(g.biases.remove(0)))
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::config(
            "lambda",
            format!("must lie in [0,1), got {lambda}"),
        ));
    }
    Ok(())
}

/// State of the policy-gradient recursion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgState {
    pub theta: ParamVector,
    pub trace: Vec<f64>,
    pub x: usize,
    pub y: usize,
    pub step: u64,
}

impl PgState {
    /// `W₀ = 0`, `X₀ = x0` and `Y₀ ~ q_θ(·|x0)`.
    pub fn start(
        model: &MdpModel,
        theta: ParamVector,
        x0: usize,
        rng: &mut SimRng,
    ) -> Result<Self> {
        model.check_theta(&theta)?;
        if x0 >= model.n_states {
            return Err(Error::InvalidModel(format!(
                "start state {x0} out of range"
            )));
        }
        let mut row = vec![0.0; model.n_actions];
        model.policy_row(&theta, x0, &mut row);
        let y = categorical(rng, &row);
        Ok(Self {
            trace: vec![0.0; model.dim],
            theta,
            x: x0,
            y,
            step: 0,
        })
    }
}

/// Scratch buffers for the chain move.
struct Mover {
    row: Vec<f64>,
    score: Vec<f64>,
}

impl Mover {
    fn new(model: &MdpModel) -> Self {
        Self {
            row: vec![0.0; model.n_actions],
            score: vec![0.0; model.dim],
        }
    }

    /// Draws `X′ ~ p(·|x,y)` then `Y′ ~ q_θ(·|X′)`, updates the trace and
    /// returns `φ(X′,Y′)`.
    #[allow(clippy::too_many_arguments)]
    fn advance(
        &mut self,
        model: &MdpModel,
        theta: &[f64],
        x: &mut usize,
        y: &mut usize,
        trace: &mut [f64],
        lambda: f64,
        rng: &mut SimRng,
    ) -> f64 {
        let xp = categorical(rng, model.next_state_law(*x, *y));
        model.policy_row(theta, xp, &mut self.row);
        let yp = categorical(rng, &self.row);
        model.score_into(xp, yp, &self.row, &mut self.score);
        for (w, s) in trace.iter_mut().zip(&self.score) {
            *w = lambda * *w + s;
        }
        *x = xp;
        *y = yp;
        model.cost(xp, yp)
    }
}

/// One step of the recursion with step size `alpha`.
pub fn simulate_step(
    model: &MdpModel,
    state: &PgState,
    lambda: f64,
    alpha: f64,
    rng: &mut SimRng,
) -> Result<PgState> {
    check_lambda(lambda)?;
    model.check_theta(&state.theta)?;
    let mut next = state.clone();
    let mut mover = Mover::new(model);
    let c = mover.advance(
        model,
        &state.theta,
        &mut next.x,
        &mut next.y,
        &mut next.trace,
        lambda,
        rng,
    );
    for (t, w) in next.theta.iter_mut().zip(&next.trace) {
        *t -= alpha * c * w;
    }
    next.step += 1;
    Ok(next)
}

/// Burn-in steps before [`estimator_mean`] starts averaging.
pub const DEFAULT_BURN_IN: usize = 10_000;

/// Mean of `φ(V_n)W_n` at frozen `θ` with batch-means standard errors.
pub fn estimator_mean(
    model: &MdpModel,
    theta: &[f64],
    lambda: f64,
    burn_in: usize,
    samples: usize,
    rng: &mut SimRng,
) -> Result<(ParamVector, Vec<f64>)> {
    check_lambda(lambda)?;
    let mut state = PgState::start(model, ParamVector(theta.to_vec()), 0, rng)?;
    let mut mover = Mover::new(model);
    let mut acc = VectorBatchMeans::new(model.dim, samples, 100);
    let mut sample = vec![0.0; model.dim];
    for k in 0..burn_in + samples {
        let c = mover.advance(
            model,
            theta,
            &mut state.x,
            &mut state.y,
            &mut state.trace,
            lambda,
            rng,
        );
        if k >= burn_in {
            for (s, w) in sample.iter_mut().zip(&state.trace) {
                *s = c * w;
            }
            acc.push(&sample);
        }
    }
    let (mean, se) = acc.finish();
    Ok((ParamVector(mean), se))
}

/// Settings of a policy-gradient run.
#[derive(Debug, Clone)]
pub struct PgRun {
    pub lambda: f64,
    pub schedule: StepSchedule,
    pub steps: usize,
    pub projection: Option<ProjectionPolicy>,
    pub record_every: usize,
    pub start_state: usize,
}

/// Runs the discounted-trace recursion from `θ₀` through the generic engine.
pub fn run_policy_gradient(
    model: &MdpModel,
    theta0: ParamVector,
    settings: &PgRun,
    seed: u64,
) -> Result<Trajectory> {
    check_lambda(settings.lambda)?;
    let mut rng = seeded(seed);
    let start = PgState::start(model, theta0.clone(), settings.start_state, &mut rng)?;
    let (mut x, mut y, mut trace) = (start.x, start.y, start.trace);
    let mut mover = Mover::new(model);
    let lambda = settings.lambda;
    let estimator = |theta: &[f64], _n: usize, rng: &mut SimRng, out: &mut [f64]| {
        let c = mover.advance(model, theta, &mut x, &mut y, &mut trace, lambda, rng);
        for (o, w) in out.iter_mut().zip(&trace) {
            *o = c * w;
        }
    };
    run_with_rng(
        estimator,
        &settings.schedule,
        theta0,
        settings.steps,
        settings.projection.clone(),
        seed,
        &mut rng,
        RunOptions {
            record_every: settings.record_every,
        },
    )
}

/// Joint state and trace `z = (v, w)` of the augmented chain.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceState {
    pub v: usize,
    pub w: Vec<f64>,
}

/// Largest residual of the Poisson equation `F̃ − ΠF̃ = F − ∇f` over the
/// given states, with `F(θ,z) = φ(v)w − η(θ)`.
///
/// `F̃` is assembled from the closed form of `ΠⁿF`; `ΠF̃` is then evaluated
/// independently as the one-step expectation over `v′ ~ r_θ(·|v)` with
/// `w′ = λw + s_θ(v′)`.
pub fn check_poisson_identity(
    model: &MdpModel,
    theta: &[f64],
    lambda: f64,
    states: &[TraceState],
    tol: f64,
) -> Result<f64> {
    check_lambda(lambda)?;
    let exact = PgExact::new(model, theta)?;
    let series_tol = tol * 1e-3;
    let gb = exact.gradient_and_bias(&[lambda], series_tol)?;
    let (grad, eta) = (&gb.gradient, &gb.biases[0]);
    let d = model.dim;
    let nv = model.n_joint();
    let r = &exact.chain;
    let phi = model.cost_vector();
    let limit: Vec<f64> = grad.iter().zip(eta).map(|(g, e)| g + e).collect();

    // A_n = Rⁿφ and B_n^j = Σ_{i<n} λ^i R^{n−i} S_j R^i φ, so that
    // (ΠⁿF_j)(v,w) = −η_j + B_n^j(v) + λⁿ w_j A_n(v).
    let mut a = phi.to_vec();
    let mut b = vec![vec![0.0; nv]; d];
    let mut lam_n = 1.0;
    // F̃_j(v,w) = C_j(v) + w_j D(v)
    let mut c = vec![vec![0.0; nv]; d];
    let mut dvec = vec![0.0; nv];
    let w_max = states
        .iter()
        .map(|z| crate::stats::max_abs(&z.w))
        .fold(1.0, f64::max);
    let cap = crate::finite_markov::DEFAULT_MAX_TERMS;
    let mut converged = false;
    for _ in 0..cap {
        let mut change: f64 = 0.0;
        for j in 0..d {
            for v in 0..nv {
                let term = b[j][v] - limit[j];
                c[j][v] += term;
            }
        }
        for v in 0..nv {
            dvec[v] += lam_n * a[v];
        }
        // advance B, then A
        for (j, bj) in b.iter_mut().enumerate() {
            let inner: Vec<f64> = (0..nv)
                .map(|v| bj[v] + lam_n * exact.policy.joint_score(v)[j] * a[v])
                .collect();
            let next = r.apply(&inner);
            for v in 0..nv {
                change = change.max((next[v] - limit[j]).abs());
            }
            *bj = next;
        }
        a = r.apply(&a);
        lam_n *= lambda;
        if change <= series_tol && lam_n * w_max * crate::stats::max_abs(&a) <= series_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::SlowMixing {
            ratio: lambda,
            terms: cap,
        });
    }

    let mut worst: f64 = 0.0;
    for z in states {
        if z.v >= nv || z.w.len() != d {
            return Err(Error::Dimension {
                expected: d,
                got: z.w.len(),
            });
        }
        let mut diff = vec![0.0; d];
        for j in 0..d {
            let lhs = phi[z.v] * z.w[j] - eta[j] - grad[j];
            let f_tilde = c[j][z.v] + z.w[j] * dvec[z.v];
            let mut pf = 0.0;
            for vp in 0..nv {
                let wp = lambda * z.w[j] + exact.policy.joint_score(vp)[j];
                pf += r.get(z.v, vp) * (c[j][vp] + wp * dvec[vp]);
            }
            diff[j] = lhs - (f_tilde - pf);
        }
        worst = worst.max(norm2(&diff));
    }
    Ok(worst)
}
