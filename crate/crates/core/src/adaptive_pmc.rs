//! Adaptive population Monte Carlo on `𝒳 = [0,1]`.
//!
//! Particles move by sampling importance resampling: each particle proposes
//! from the mixture kernel `p_θ(·|x) = Σ_k w_k(θ) κ_k(·|x)`, proposals are
//! weighted by `q(x̃)/p_θ(x̃|x)` and the next generation is drawn
//! multinomially in proportion to the weights. The softmax logits `θ` of the
//! mixture weights adapt along
//!
//! ```text
//! θ_{n+1} = θ_n + (α_n/N) Σ_i s_θ(X_n(i), X_{n+1}(i)),   s_θ = ∇_θ log p_θ,
//! ```
//!
//! a descent recursion for `f(θ) = −∬ log p_θ(x′|x) p(x′) p(x) dx′ dx`.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};
use crate::rng::{categorical, seeded, SimRng};
use crate::sgd_core::{
    run_with_rng, ParamVector, ProjectionPolicy, RunOptions, StepSchedule, Trajectory,
};
use crate::stats::{norm2, VectorBatchMeans};

/// Default quadrature grid size.
pub const DEFAULT_GRID: usize = 401;
/// Frozen-θ burn-in before bias measurements.
pub const DEFAULT_BURN_IN: usize = 200;

/// One Gaussian bump `weight · exp(−(x − center)² / spread)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub weight: f64,
    pub center: f64,
    pub spread: f64,
}

type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Unnormalized target `q` on `[0,1]` with its Simpson grid.
#[derive(Clone, Serialize, Deserialize)]
pub struct TargetSpec {
    bumps: Vec<Bump>,
    grid_size: usize,
    #[serde(skip)]
    custom: Option<DensityFn>,
}

impl fmt::Debug for TargetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TargetSpec")
            .field("bumps", &self.bumps)
            .field("grid_size", &self.grid_size)
            .field("custom", &self.custom.is_some())
            .finish()
    }
}

impl Default for TargetSpec {
    /// `q(x) = exp(−(x−0.25)²/0.005) + 0.7·exp(−(x−0.75)²/0.01)`.
    fn default() -> Self {
        Self {
            bumps: vec![
                Bump {
                    weight: 1.0,
                    center: 0.25,
                    spread: 0.005,
                },
                Bump {
                    weight: 0.7,
                    center: 0.75,
                    spread: 0.01,
                },
            ],
            grid_size: DEFAULT_GRID,
            custom: None,
        }
    }
}

impl TargetSpec {
    pub fn from_bumps(bumps: Vec<Bump>, grid_size: usize) -> Result<Self> {
        if bumps.is_empty() {
            return Err(Error::config("target.bumps", "need at least one bump"));
        }
        for (i, b) in bumps.iter().enumerate() {
            if !(b.weight > 0.0 && b.spread > 0.0 && b.center.is_finite()) {
                return Err(Error::config(
                    format!("target.bumps[{i}]"),
                    "weight and spread must be positive",
                ));
            }
        }
        let t = Self {
            bumps,
            grid_size,
            custom: None,
        };
        t.validate()?;
        Ok(t)
    }

    /// Any positive callback.
    pub fn custom(
        density: impl Fn(f64) -> f64 + Send + Sync + 'static,
        grid_size: usize,
    ) -> Result<Self> {
        let t = Self {
            bumps: Vec::new(),
            grid_size,
            custom: Some(Arc::new(density)),
        };
        t.validate()?;
        Ok(t)
    }

    /// Checks the grid size and positivity of `q` on every node.
    pub fn validate(&self) -> Result<()> {
        if self.grid_size < 3 || self.grid_size.is_multiple_of(2) {
            return Err(Error::config(
                "grid_size",
                format!("must be odd and at least 3, got {}", self.grid_size),
            ));
        }
        if self.custom.is_none() && self.bumps.is_empty() {
            return Err(Error::config("target.bumps", "need at least one bump"));
        }
        let grid = SimpsonGrid::new(self.grid_size);
        if let Some(x) = grid.nodes.iter().find(|&&x| !(self.density(x) > 0.0)) {
            return Err(Error::config(
                "target",
                format!("density must be positive on the grid, fails at x = {x}"),
            ));
        }
        Ok(())
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn density(&self, x: f64) -> f64 {
        match &self.custom {
            Some(f) => f(x),
            None => self
                .bumps
                .iter()
                .map(|b| b.weight * (-(x - b.center).powi(2) / b.spread).exp())
                .sum(),
        }
    }
}

/// Composite Simpson rule on `M` equispaced nodes of `[0,1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimpsonGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl SimpsonGrid {
    pub fn new(m: usize) -> Self {
        assert!(m >= 3 && m % 2 == 1, "Simpson grid needs an odd node count");
        let h = 1.0 / (m - 1) as f64;
        let nodes = (0..m).map(|i| i as f64 * h).collect();
        let weights = (0..m)
            .map(|i| {
                let c = if i == 0 || i == m - 1 {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                c * h / 3.0
            })
            .collect();
        Self { nodes, weights }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, w)| w * f(x))
            .sum()
    }
}

/// A fixed mixture component `κ_k(x′|x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Component {
    /// `∝ exp(−(x′ − x − shift)²/(2·width²))` truncated to `[0,1]`.
    Gaussian { shift: f64, width: f64 },
    /// The normalized target itself, independent of `x`.
    Independent,
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

fn std_normal_quantile(p: f64) -> f64 {
    -SQRT_2 * erfc_inv(2.0 * p)
}

/// Mass of the standard normal on `[a, b]`, accurate in both tails.
fn normal_mass(a: f64, b: f64) -> f64 {
    if a > 0.0 {
        std_normal_cdf(-a) - std_normal_cdf(-b)
    } else {
        std_normal_cdf(b) - std_normal_cdf(a)
    }
}

/// `∫_0^1 exp(−(x′ − x − shift)²/(2·width²)) dx′`.
fn gaussian_mass(shift: f64, width: f64, x: f64) -> f64 {
    width * (2.0 * PI).sqrt() * normal_mass((-x - shift) / width, (1.0 - x - shift) / width)
}

/// Standard normal truncated to `[a, b]` by inversion.
fn sample_truncated_normal<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    if a > 0.0 {
        let (lo, hi) = (std_normal_cdf(-b), std_normal_cdf(-a));
        -std_normal_quantile(lo + u * (hi - lo))
    } else {
        let (lo, hi) = (std_normal_cdf(a), std_normal_cdf(b));
        std_normal_quantile(lo + u * (hi - lo))
    }
}

/// Mixture kernel `p_θ(x′|x) = Σ_k softmax(θ)_k κ_k(x′|x)`.
#[derive(Debug, Clone)]
pub struct MixtureKernel {
    components: Vec<Component>,
    target: TargetSpec,
    target_norm: f64,
    target_envelope: f64,
    /// Per component, Simpson mass over erf mass at each grid source.
    grid_correction: Vec<Vec<f64>>,
}

impl MixtureKernel {
    pub fn new(components: Vec<Component>, target: &TargetSpec) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::config("kernel", "need at least one component"));
        }
        for (k, c) in components.iter().enumerate() {
            if let Component::Gaussian { shift, width } = c {
                if !(width > &0.0 && shift.is_finite()) {
                    return Err(Error::config(
                        format!("kernel[{k}]"),
                        "width must be positive and shift finite",
                    ));
                }
            }
        }
        target.validate()?;
        let grid = SimpsonGrid::new(target.grid_size);
        let target_norm = grid.integrate(|x| target.density(x));
        let target_envelope = grid
            .nodes
            .iter()
            .map(|&x| target.density(x))
            .fold(0.0, f64::max)
            * 1.25;
        let grid_correction = components
            .iter()
            .map(|c| match *c {
                Component::Gaussian { shift, width } => grid
                    .nodes
                    .iter()
                    .map(|&x| {
                        let simpson = grid.integrate(|xp| {
                            let z = (xp - x - shift) / width;
                            (-0.5 * z * z).exp()
                        });
                        simpson / gaussian_mass(shift, width, x)
                    })
                    .collect(),
                Component::Independent => Vec::new(),
            })
            .collect();
        Ok(Self {
            components,
            target: target.clone(),
            target_norm,
            target_envelope,
            grid_correction,
        })
    }

    /// Gaussian components with the given `(shift, width)` pairs.
    pub fn gaussian(pairs: &[(f64, f64)], target: &TargetSpec) -> Result<Self> {
        Self::new(
            pairs
                .iter()
                .map(|&(shift, width)| Component::Gaussian { shift, width })
                .collect(),
            target,
        )
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    /// Normalized target `p(x) = q(x)/∫q`.
    pub fn target_pdf(&self, x: f64) -> f64 {
        self.target.density(x) / self.target_norm
    }

    /// Normalizing mass of component `k` at source `x`, or 1 if it needs none.
    ///
    /// Gaussian components are renormalized on the Simpson grid, so that
    /// `p_θ(·|x)` integrates to one under the same quadrature as the objective.
    /// Off-grid sources interpolate the grid-to-erf ratio linearly.
    pub fn component_mass(&self, k: usize, x: f64) -> f64 {
        match self.components[k] {
            Component::Gaussian { shift, width } => {
                let ratio = &self.grid_correction[k];
                let pos = x.clamp(0.0, 1.0) * (ratio.len() - 1) as f64;
                let i = (pos.floor() as usize).min(ratio.len() - 2);
                let t = pos - i as f64;
                let r = if t == 0.0 {
                    ratio[i]
                } else {
                    ratio[i] + t * (ratio[i + 1] - ratio[i])
                };
                gaussian_mass(shift, width, x) * r
            }
            Component::Independent => 1.0,
        }
    }

    /// `κ_k(x′|x)` given the mass from [`Self::component_mass`].
    pub fn component_pdf_with_mass(&self, k: usize, xp: f64, x: f64, mass: f64) -> f64 {
        match self.components[k] {
            Component::Gaussian { shift, width } => {
                let z = (xp - x - shift) / width;
                (-0.5 * z * z).exp() / mass
            }
            Component::Independent => self.target_pdf(xp),
        }
    }

    pub fn component_pdf(&self, k: usize, xp: f64, x: f64) -> f64 {
        self.component_pdf_with_mass(k, xp, x, self.component_mass(k, x))
    }

    /// `p_θ(x′|x)`.
    pub fn pdf(&self, weights: &[f64], xp: f64, x: f64) -> f64 {
        weights
            .iter()
            .enumerate()
            .map(|(k, w)| w * self.component_pdf(k, xp, x))
            .sum()
    }

    /// Draws `x′ ~ κ_k(·|x)`.
    pub fn sample_component<R: Rng + ?Sized>(&self, k: usize, x: f64, rng: &mut R) -> f64 {
        match self.components[k] {
            Component::Gaussian { shift, width } => {
                let a = (-x - shift) / width;
                let b = (1.0 - x - shift) / width;
                let z = sample_truncated_normal(a, b, rng);
                (x + shift + width * z).clamp(0.0, 1.0)
            }
            Component::Independent => loop {
                let cand: f64 = rng.random();
                let u: f64 = rng.random();
                if u * self.target_envelope <= self.target.density(cand) {
                    break cand;
                }
            },
        }
    }

    /// `s_θ(x,x′)_k = w_k κ_k(x′|x)/p_θ(x′|x) − w_k`, written into `out`.
    pub fn score_into(&self, weights: &[f64], x: f64, xp: f64, out: &mut [f64]) {
        let mut total = 0.0;
        for (k, o) in out.iter_mut().enumerate() {
            *o = weights[k] * self.component_pdf(k, xp, x);
            total += *o;
        }
        for (o, w) in out.iter_mut().zip(weights) {
            *o = *o / total - w;
        }
    }
}

/// `softmax(θ)`.
pub fn mixture_weights(theta: &[f64]) -> Vec<f64> {
    let m = theta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = theta.iter().map(|t| (t - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

fn check_theta(kernel: &MixtureKernel, theta: &[f64]) -> Result<()> {
    if theta.len() != kernel.len() {
        return Err(Error::Dimension {
            expected: kernel.len(),
            got: theta.len(),
        });
    }
    Ok(())
}

/// Particle cloud after one SIR step.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    /// Current particles `X(1..N)`.
    pub particles: Vec<f64>,
    /// Proposals `X̃(1..N)` of the step that produced `particles`.
    pub proposals: Vec<f64>,
    /// Importance weights of the proposals.
    pub weights: Vec<f64>,
    /// Selected proposal index for each particle.
    pub ancestors: Vec<usize>,
}

impl ParticleEnsemble {
    /// `N` particles drawn uniformly from `[0,1]`.
    pub fn uniform<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        Self::from_particles((0..n).map(|_| rng.random()).collect())
    }

    pub fn from_particles(particles: Vec<f64>) -> Self {
        let n = particles.len();
        Self {
            particles,
            proposals: Vec::with_capacity(n),
            weights: Vec::with_capacity(n),
            ancestors: Vec::with_capacity(n),
        }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }
}

/// Multinomial draw of `n` indices with probabilities proportional to `weights`.
pub fn multinomial_indices<R: Rng + ?Sized>(
    weights: &[f64],
    n: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let mut cumulative = Vec::with_capacity(weights.len());
    let mut total = 0.0;
    for w in weights {
        total += w;
        cumulative.push(total);
    }
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::DegenerateWeights(total));
    }
    let last = weights.len() - 1;
    Ok((0..n)
        .map(|_| {
            let u = rng.random::<f64>() * total;
            cumulative.partition_point(|&c| c <= u).min(last)
        })
        .collect())
}

/// One SIR step: propose from `p_θ(·|X(i))`, weight by `q/p_θ`, resample.
pub fn sir_step(
    target: &TargetSpec,
    kernel: &MixtureKernel,
    ensemble: &ParticleEnsemble,
    theta: &[f64],
    rng: &mut SimRng,
) -> Result<ParticleEnsemble> {
    check_theta(kernel, theta)?;
    let w = mixture_weights(theta);
    let n = ensemble.len();
    let mut proposals = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let mut masses = vec![0.0; kernel.len()];
    for &x in &ensemble.particles {
        for (k, m) in masses.iter_mut().enumerate() {
            *m = kernel.component_mass(k, x);
        }
        let k = categorical(rng, &w);
        let xt = kernel.sample_component(k, x, rng);
        let p: f64 = (0..kernel.len())
            .map(|j| w[j] * kernel.component_pdf_with_mass(j, xt, x, masses[j]))
            .sum();
        proposals.push(xt);
        weights.push(target.density(xt) / p);
    }
    let ancestors = multinomial_indices(&weights, n, rng)?;
    let particles = ancestors.iter().map(|&i| proposals[i]).collect();
    Ok(ParticleEnsemble {
        particles,
        proposals,
        weights,
        ancestors,
    })
}

/// `−(1/N) Σ_i s_θ(X(i), X′(i))`.
pub fn score_estimator(
    kernel: &MixtureKernel,
    prev: &[f64],
    next: &[f64],
    theta: &[f64],
) -> Result<ParamVector> {
    check_theta(kernel, theta)?;
    if prev.len() != next.len() || prev.is_empty() {
        return Err(Error::Dimension {
            expected: prev.len(),
            got: next.len(),
        });
    }
    let w = mixture_weights(theta);
    let k = kernel.len();
    let mut acc = vec![0.0; k];
    let mut s = vec![0.0; k];
    for (&x, &xp) in prev.iter().zip(next) {
        kernel.score_into(&w, x, xp, &mut s);
        for (a, v) in acc.iter_mut().zip(&s) {
            *a += v;
        }
    }
    let scale = -1.0 / prev.len() as f64;
    Ok(ParamVector(acc.iter().map(|a| a * scale).collect()))
}

/// Kernel tables on the Simpson grid, reused across `θ`.
#[derive(Debug, Clone)]
pub struct KlQuadrature {
    grid: SimpsonGrid,
    /// `p(x_i)`
    target: Vec<f64>,
    /// `κ_k(x_l|x_i)` at `[k][i][l]`
    table: Vec<f64>,
    k: usize,
}

impl KlQuadrature {
    pub fn new(target: &TargetSpec, kernel: &MixtureKernel) -> Self {
        let grid = SimpsonGrid::new(target.grid_size);
        let m = grid.nodes.len();
        let k = kernel.len();
        let norm = grid.integrate(|x| target.density(x));
        let p = grid
            .nodes
            .iter()
            .map(|&x| target.density(x) / norm)
            .collect();
        let mut table = vec![0.0; k * m * m];
        for c in 0..k {
            for (i, &x) in grid.nodes.iter().enumerate() {
                let mass = kernel.component_mass(c, x);
                for (l, &xp) in grid.nodes.iter().enumerate() {
                    table[(c * m + i) * m + l] = kernel.component_pdf_with_mass(c, xp, x, mass);
                }
            }
        }
        Self {
            grid,
            target: p,
            table,
            k,
        }
    }

    fn m(&self) -> usize {
        self.grid.nodes.len()
    }

    fn mixture(&self, w: &[f64], i: usize, l: usize) -> f64 {
        let m = self.m();
        (0..self.k)
            .map(|c| w[c] * self.table[(c * m + i) * m + l])
            .sum()
    }

    /// `f(θ) = −∬ log p_θ(x′|x) p(x′)p(x)`.
    pub fn objective(&self, theta: &[f64]) -> f64 {
        let w = mixture_weights(theta);
        let m = self.m();
        let mut total = 0.0;
        for i in 0..m {
            let wi = self.grid.weights[i] * self.target[i];
            let mut inner = 0.0;
            for l in 0..m {
                inner += self.grid.weights[l] * self.target[l] * self.mixture(&w, i, l).ln();
            }
            total += wi * inner;
        }
        -total
    }

    /// `∇f(θ) = −∬ s_θ(x,x′) p(x)p(x′)`.
    pub fn gradient(&self, theta: &[f64]) -> ParamVector {
        let w = mixture_weights(theta);
        let m = self.m();
        let mut g = vec![0.0; self.k];
        for i in 0..m {
            let wi = self.grid.weights[i] * self.target[i];
            for l in 0..m {
                let wl = wi * self.grid.weights[l] * self.target[l];
                let p = self.mixture(&w, i, l);
                for (c, gc) in g.iter_mut().enumerate() {
                    let s = w[c] * self.table[(c * m + i) * m + l] / p - w[c];
                    *gc -= wl * s;
                }
            }
        }
        ParamVector(g)
    }

    /// `−∫ p log p`.
    pub fn entropy(&self) -> f64 {
        -self
            .grid
            .weights
            .iter()
            .zip(&self.target)
            .map(|(w, p)| w * p * p.ln())
            .sum::<f64>()
    }

    /// `max_x |∫ p_θ(x′|x) dx′ − 1|` over grid sources.
    pub fn normalization_error(&self, theta: &[f64]) -> f64 {
        let w = mixture_weights(theta);
        let m = self.m();
        (0..m)
            .map(|i| {
                let s: f64 = (0..m)
                    .map(|l| self.grid.weights[l] * self.mixture(&w, i, l))
                    .sum();
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }
}

pub fn kl_objective(target: &TargetSpec, kernel: &MixtureKernel, theta: &[f64]) -> Result<f64> {
    check_theta(kernel, theta)?;
    Ok(KlQuadrature::new(target, kernel).objective(theta))
}

pub fn kl_gradient(
    target: &TargetSpec,
    kernel: &MixtureKernel,
    theta: &[f64],
) -> Result<ParamVector> {
    check_theta(kernel, theta)?;
    Ok(KlQuadrature::new(target, kernel).gradient(theta))
}

/// Settings of an adaptive PMC run.
#[derive(Debug, Clone)]
pub struct PmcRun {
    pub particles: usize,
    pub schedule: StepSchedule,
    pub steps: usize,
    pub projection: Option<ProjectionPolicy>,
    pub record_every: usize,
}

/// Alternates SIR steps with `θ_{n+1} = θ_n + (α_n/N) Σ s_θ(X_n(i), X_{n+1}(i))`.
///
/// The engine subtracts `α_n` times its estimate, so it is fed the score
/// estimator `−(1/N) Σ s`, which reproduces the plus sign above.
pub fn run_adaptive_pmc(
    target: &TargetSpec,
    kernel: &MixtureKernel,
    theta0: ParamVector,
    settings: &PmcRun,
    seed: u64,
) -> Result<Trajectory> {
    check_theta(kernel, &theta0)?;
    if settings.particles == 0 {
        return Err(Error::config("particles", "need at least one particle"));
    }
    let mut rng = seeded(seed);
    let mut ensemble = ParticleEnsemble::uniform(settings.particles, &mut rng);
    let mut failure = None;
    let estimator = |theta: &[f64], _n: usize, rng: &mut SimRng, out: &mut [f64]| {
        let step = sir_step(target, kernel, &ensemble, theta, rng).and_then(|next| {
            let g = score_estimator(kernel, &ensemble.particles, &next.particles, theta)?;
            ensemble = next;
            Ok(g)
        });
        match step {
            Ok(g) => out.copy_from_slice(&g),
            Err(e) => {
                failure.get_or_insert(e);
                out.fill(0.0);
            }
        }
    };
    let traj = run_with_rng(
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
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(traj),
    }
}

/// Empirical estimator bias at one particle count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmcBias {
    pub particles: usize,
    pub bias: Vec<f64>,
    pub bias_se: Vec<f64>,
    pub norm: f64,
    pub norm_se: f64,
    pub replicates: usize,
}

/// Batches used for the standard error in [`measure_bias`].
pub const BIAS_BATCHES: usize = 50;

/// `η(θ) = E[−(1/N) Σ s_θ(X_n(i), X_{n+1}(i))] − ∇f(θ)` at frozen `θ`.
///
/// One particle chain runs [`DEFAULT_BURN_IN`] SIR steps from uniform
/// particles, then the estimator is averaged over `replicates` consecutive
/// steps. Standard errors use batch means.
pub fn measure_bias(
    target: &TargetSpec,
    kernel: &MixtureKernel,
    theta: &[f64],
    particles: usize,
    replicates: usize,
    seed: u64,
) -> Result<PmcBias> {
    check_theta(kernel, theta)?;
    if replicates < 100 {
        return Err(Error::config(
            "replicates",
            format!("need at least 100, got {replicates}"),
        ));
    }
    if particles == 0 {
        return Err(Error::config("particles", "need at least one particle"));
    }
    let grad = KlQuadrature::new(target, kernel).gradient(theta);
    let mut rng = seeded(seed);
    let mut ens = ParticleEnsemble::uniform(particles, &mut rng);
    for _ in 0..DEFAULT_BURN_IN {
        ens = sir_step(target, kernel, &ens, theta, &mut rng)?;
    }
    let mut acc = VectorBatchMeans::new(kernel.len(), replicates, BIAS_BATCHES);
    for _ in 0..replicates {
        let next = sir_step(target, kernel, &ens, theta, &mut rng)?;
        let g = score_estimator(kernel, &ens.particles, &next.particles, theta)?;
        acc.push(&g);
        ens = next;
    }
    let (mean, bias_se) = acc.finish();
    let bias: Vec<f64> = mean.iter().zip(grad.iter()).map(|(m, g)| m - g).collect();
    let norm = norm2(&bias);
    let norm_se = if norm > 0.0 {
        bias.iter()
            .zip(&bias_se)
            .map(|(b, s)| (b / norm * s).powi(2))
            .sum::<f64>()
            .sqrt()
    } else {
        norm2(&bias_se)
    };
    Ok(PmcBias {
        particles,
        bias,
        bias_se,
        norm,
        norm_se,
        replicates,
    })
}
