//! Sweeps, stationary-point search, verification suites and report output.
//!
//! A sweep runs one algorithm at several values of its bias control (`λ` for
//! policy gradient, `N` for the particle and block methods), measures the
//! estimator bias with the module's exact or empirical operation, computes
//! tail statistics against the module's gradient oracle, and fits log-log
//! slopes against the control `c = 1 − λ` or `c = 1/N`.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adaptive_pmc::{
    self, Bump, Component, KlQuadrature, MixtureKernel, PmcRun, TargetSpec, DEFAULT_GRID,
};
use crate::error::{Error, Result};
use crate::finite_markov::{
    deviation_power_apply, invariant_distribution, poisson_solve, DeviationSeries, StochasticMatrix,
};
use crate::hmm_ident::{
    self, block_negloglik, block_score, block_value_and_score, filter_step, CandidateHmm, HmmRun,
    TrueHmm,
};
use crate::policy_gradient::{
    self, average_cost, exact_bias, exact_gradient, MdpModel, PgRun, SoftmaxPolicy, TraceState,
};
use crate::rng::{seeded, sub_seed};
use crate::sgd_core::{
    run, tail_stats, ParamVector, ProjectionPolicy, StepSchedule, TailStats, Trajectory,
};
use crate::stats::{loglog_fit, norm2, SlopeFit};

/// Iteration cap of [`locate_stationary_point`].
pub const MAX_SEARCH_ITERATIONS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    PolicyGradient,
    AdaptivePmc,
    HmmIdent,
}

impl Algorithm {
    fn control_label(self) -> &'static str {
        match self {
            Algorithm::PolicyGradient => "1-lambda",
            _ => "1/N",
        }
    }

    fn row_tag(self, value: f64) -> String {
        match self {
            Algorithm::PolicyGradient => format!("lambda{value}"),
            _ => format!("n{value}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionConfig {
    pub base_radius: f64,
    pub growth: f64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self {
            base_radius: ProjectionPolicy::DEFAULT_BASE_RADIUS,
            growth: ProjectionPolicy::DEFAULT_GROWTH,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PgSettings {
    /// Initial state `x₀` of the simulated chain.
    pub start_state: usize,
    /// Truncation tolerance of the exact series.
    pub series_tol: f64,
}

impl Default for PgSettings {
    fn default() -> Self {
        Self {
            start_state: 0,
            series_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PmcSettings {
    pub grid_size: usize,
    /// Target bumps; the bimodal default when absent.
    pub target: Option<Vec<Bump>>,
    pub components: Vec<Component>,
    /// Particle moves per bias measurement; each row averages the estimator
    /// over `max(100, budget/N)` consecutive SIR steps.
    pub bias_particle_steps: usize,
}

impl Default for PmcSettings {
    fn default() -> Self {
        Self {
            grid_size: DEFAULT_GRID,
            target: None,
            components: vec![
                Component::Gaussian {
                    shift: 0.0,
                    width: 0.1,
                },
                Component::Gaussian {
                    shift: 0.5,
                    width: 0.08,
                },
                Component::Gaussian {
                    shift: -0.5,
                    width: 0.08,
                },
            ],
            bias_particle_steps: 10_000_000,
        }
    }
}

impl PmcSettings {
    pub fn target(&self) -> Result<TargetSpec> {
        match &self.target {
            Some(b) => TargetSpec::from_bumps(b.clone(), self.grid_size),
            None => {
                let d = TargetSpec::default();
                if self.grid_size == d.grid_size() {
                    Ok(d)
                } else {
                    TargetSpec::from_bumps(
                        vec![
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
                        self.grid_size,
                    )
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HmmSettings {
    /// Observations used by the bias measurement.
    pub bias_path_len: usize,
    /// Length of the fixed observation path whose normalized negative
    /// log-likelihood serves as objective oracle for tail statistics.
    pub oracle_path_len: usize,
}

impl Default for HmmSettings {
    fn default() -> Self {
        Self {
            bias_path_len: 2_000_000,
            oracle_path_len: 20_000,
        }
    }
}

fn default_window() -> f64 {
    0.2
}

fn default_stationary_tol() -> f64 {
    1e-10
}

fn default_search_iterations() -> usize {
    2_000
}

/// Sweep description, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub algorithm: Algorithm,
    /// `λ` values, or particle counts / block lengths.
    pub values: Vec<f64>,
    /// Iterations per row: recursion steps, SIR steps, or observations.
    pub steps: usize,
    #[serde(default)]
    pub schedule: StepSchedule,
    #[serde(default)]
    pub seed: u64,
    /// Model file (MDP or HMM), relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Initial iterate; zeros when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta0: Option<Vec<f64>>,
    /// Parameter at which the bias is measured; `theta0` when absent, or the
    /// true parameter for HMM sweeps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias_theta: Option<Vec<f64>>,
    /// Recording stride; `steps/1000` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_every: Option<usize>,
    #[serde(default = "default_window")]
    pub tail_window: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projection: Option<ProjectionConfig>,
    #[serde(default = "default_stationary_tol")]
    pub stationary_tol: f64,
    #[serde(default = "default_search_iterations")]
    pub stationary_max_iterations: usize,
    #[serde(default)]
    pub write_trajectories: bool,
    #[serde(default)]
    pub pg: PgSettings,
    #[serde(default)]
    pub pmc: PmcSettings,
    #[serde(default)]
    pub hmm: HmmSettings,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl SweepConfig {
    /// Reads and validates a config; relative paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut cfg: SweepConfig =
            serde_json::from_str(&text).map_err(|e| Error::config("config", e.to_string()))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.len() < 3 {
            return Err(Error::config(
                "values",
                format!("a sweep needs at least 3 values, got {}", self.values.len()),
            ));
        }
        match self.algorithm {
            Algorithm::PolicyGradient => {
                for (i, &l) in self.values.iter().enumerate() {
                    if !(0.0..1.0).contains(&l) {
                        return Err(Error::config(
                            format!("values[{i}]"),
                            format!("lambda {l} outside [0,1)"),
                        ));
                    }
                }
            }
            _ => {
                for (i, &n) in self.values.iter().enumerate() {
                    if !(n >= 1.0 && n.fract() == 0.0 && n <= 1e9) {
                        return Err(Error::config(
                            format!("values[{i}]"),
                            format!("{n} is not a positive integer"),
                        ));
                    }
                    if i > 0 && n <= self.values[i - 1] {
                        return Err(Error::config(
                            format!("values[{i}]"),
                            "values must be strictly increasing",
                        ));
                    }
                }
            }
        }
        if self.steps == 0 {
            return Err(Error::config("steps", "must be positive"));
        }
        self.schedule
            .validated()
            .map_err(|e| Error::config("schedule", e.to_string()))?;
        if !(self.tail_window > 0.0 && self.tail_window < 1.0) {
            return Err(Error::config("tail_window", "must lie in (0,1)"));
        }
        if !(self.stationary_tol > 0.0) {
            return Err(Error::config("stationary_tol", "must be positive"));
        }
        if self.record_every == Some(0) {
            return Err(Error::config("record_every", "must be positive"));
        }
        if matches!(
            self.algorithm,
            Algorithm::PolicyGradient | Algorithm::HmmIdent
        ) && self.model.is_none()
        {
            return Err(Error::config("model", "this algorithm needs a model file"));
        }
        if self.algorithm == Algorithm::AdaptivePmc {
            if self.pmc.components.is_empty() {
                return Err(Error::config(
                    "pmc.components",
                    "need at least one component",
                ));
            }
            if self.pmc.bias_particle_steps == 0 {
                return Err(Error::config("pmc.bias_particle_steps", "must be positive"));
            }
        }
        if self.algorithm == Algorithm::HmmIdent {
            let largest = *self.values.last().unwrap() as usize;
            if self.steps < largest {
                return Err(Error::config("steps", "shorter than the largest block"));
            }
            if self.hmm.oracle_path_len == 0 {
                return Err(Error::config("hmm.oracle_path_len", "must be positive"));
            }
        }
        Ok(())
    }

    pub fn model_path(&self) -> Option<PathBuf> {
        self.model.as_ref().map(|m| {
            if m.is_absolute() {
                m.clone()
            } else {
                self.base_dir.join(m)
            }
        })
    }

    /// SHA-256 over the config (without output location) and the model bytes.
    pub fn hash(&self) -> Result<String> {
        let mut canon = self.clone();
        canon.output = None;
        canon.model = None;
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&canon)?);
        if let Some(p) = self.model_path() {
            h.update(std::fs::read(p)?);
        }
        Ok(hex::encode(h.finalize()))
    }

    fn record_every(&self, iterations: usize) -> usize {
        self.record_every.unwrap_or((iterations / 1000).max(1))
    }

    fn projection(&self, anchor: &ParamVector) -> Result<Option<ProjectionPolicy>> {
        self.projection
            .map(|p| ProjectionPolicy::new(p.base_radius, p.growth, anchor.clone()))
            .transpose()
    }

    fn theta_or_zeros(
        &self,
        given: &Option<Vec<f64>>,
        dim: usize,
        field: &str,
    ) -> Result<ParamVector> {
        match given {
            Some(t) if t.len() != dim => Err(Error::config(
                field,
                format!("expected {dim} entries, got {}", t.len()),
            )),
            Some(t) => Ok(ParamVector(t.clone())),
            None => Ok(ParamVector::zeros(dim)),
        }
    }
}

/// Named pass/fail outcome with the measured value and its threshold.
///
/// Only `required` checks decide the overall verdict; the others are reported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
    pub required: bool,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            passed: value <= threshold,
            required: true,
        }
    }

    fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            passed: value >= threshold,
            required: true,
        }
    }

    fn informational(mut self, yes: bool) -> Self {
        self.required = !yes;
        self
    }
}

fn verdict(checks: &[Check]) -> bool {
    checks.iter().filter(|c| c.required).all(|c| c.passed)
}

/// One control value of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub control: f64,
    pub bias: Vec<f64>,
    pub bias_se: Vec<f64>,
    pub bias_norm: f64,
    pub bias_norm_se: f64,
    pub tail_sup_grad_norm: f64,
    pub tail_mean_grad_norm: f64,
    pub tail_objective_oscillation: f64,
    /// Tail distances to `stationary_point`; absent if the search failed.
    pub tail_max_distance: Option<f64>,
    pub tail_mean_distance: Option<f64>,
    pub stationary_point: Option<Vec<f64>>,
    pub stationary_grad_norm: Option<f64>,
    pub final_theta: Vec<f64>,
    pub projections: u32,
}

/// Result of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub config_hash: String,
    pub control: String,
    pub tail_window: f64,
    pub rows: Vec<SweepRow>,
    /// Slope of `log ‖η‖` against `log c`.
    pub bias_slope: SlopeFit,
    /// Slope of `log sup‖∇f‖` over the tail against `log c`.
    pub tail_gradient_slope: SlopeFit,
    /// `L` fitted so that the row with the largest control meets
    /// `sup‖∇f‖ = L·c^{1/2}`.
    pub bound_constant: f64,
    /// Whether tail distances strictly decrease as `c` shrinks.
    pub distance_decreasing: bool,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl BiasReport {
    /// Writes `report.json` and `rows.csv` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        std::fs::write(dir.join("report.json"), json)?;
        let mut csv = std::io::BufWriter::new(std::fs::File::create(dir.join("rows.csv"))?);
        writeln!(
            csv,
            "value,control,bias_norm,bias_norm_se,tail_sup_grad_norm,tail_mean_grad_norm,tail_objective_oscillation,tail_max_distance,tail_mean_distance,projections"
        )?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        for r in &self.rows {
            writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{},{}",
                r.value,
                r.control,
                r.bias_norm,
                r.bias_norm_se,
                r.tail_sup_grad_norm,
                r.tail_mean_grad_norm,
                r.tail_objective_oscillation,
                opt(r.tail_max_distance),
                opt(r.tail_mean_distance),
                r.projections
            )?;
        }
        csv.flush()?;
        Ok(())
    }
}

/// Gradient descent with backtracking until `‖∇f‖ ≤ tol`.
///
/// A step is accepted on sufficient decrease of `f`, or, once `f` no longer
/// resolves the change, on a strict decrease of `‖∇f‖`.
pub fn locate_stationary_point(
    objective: impl Fn(&[f64]) -> f64,
    gradient: impl Fn(&[f64]) -> Vec<f64>,
    start: &[f64],
    tol: f64,
) -> Result<ParamVector> {
    locate_stationary_point_with(objective, gradient, start, tol, MAX_SEARCH_ITERATIONS)
}

pub fn locate_stationary_point_with(
    objective: impl Fn(&[f64]) -> f64,
    gradient: impl Fn(&[f64]) -> Vec<f64>,
    start: &[f64],
    tol: f64,
    max_iterations: usize,
) -> Result<ParamVector> {
    let mut theta = start.to_vec();
    let mut f = objective(&theta);
    let mut g = gradient(&theta);
    let mut gn = norm2(&g);
    let mut step = 1.0;
    for _ in 0..max_iterations {
        if gn <= tol {
            return Ok(ParamVector(theta));
        }
        let mut accepted = false;
        for _ in 0..80 {
            let cand: Vec<f64> = theta.iter().zip(&g).map(|(t, d)| t - step * d).collect();
            let fc = objective(&cand);
            if fc.is_finite() {
                let gc = gradient(&cand);
                let gcn = norm2(&gc);
                let sufficient = fc <= f - 1e-4 * step * gn * gn;
                let flat = fc <= f + 1e-13 * f.abs().max(1.0) && gcn < gn;
                if sufficient || flat {
                    theta = cand;
                    f = fc;
                    g = gc;
                    gn = gcn;
                    accepted = true;
                    step *= 2.0;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if gn <= tol {
        return Ok(ParamVector(theta));
    }
    Err(Error::NoConvergence {
        iterations: max_iterations,
        grad_norm: gn,
    })
}

struct RowRun {
    traj: Trajectory,
    final_projections: u32,
}

fn row_run(traj: Trajectory) -> RowRun {
    let final_projections = traj.counters.last().copied().unwrap_or(0);
    RowRun {
        traj,
        final_projections,
    }
}

/// Tail statistics and stationary reference of one row.
fn assess_row(
    cfg: &SweepConfig,
    traj: &Trajectory,
    objective: &dyn Fn(&[f64]) -> f64,
    gradient: &dyn Fn(&[f64]) -> Vec<f64>,
) -> Result<(TailStats, Option<(ParamVector, f64)>)> {
    let reference = locate_stationary_point_with(
        objective,
        gradient,
        traj.last(),
        cfg.stationary_tol,
        cfg.stationary_max_iterations,
    )
    .ok()
    .map(|p| {
        let gn = norm2(&gradient(&p));
        (p, gn)
    });
    let stats = tail_stats(
        traj,
        cfg.tail_window,
        gradient,
        objective,
        reference.as_ref().map(|(p, _)| &p[..]),
    )?;
    Ok((stats, reference))
}

struct RowBias {
    bias: Vec<f64>,
    se: Vec<f64>,
    norm: f64,
    norm_se: f64,
}

fn build_row(
    value: f64,
    control: f64,
    bias: RowBias,
    run: &RowRun,
    stats: TailStats,
    reference: Option<(ParamVector, f64)>,
) -> SweepRow {
    let has_ref = reference.is_some();
    SweepRow {
        value,
        control,
        bias: bias.bias,
        bias_se: bias.se,
        bias_norm: bias.norm,
        bias_norm_se: bias.norm_se,
        tail_sup_grad_norm: stats.sup_grad_norm,
        tail_mean_grad_norm: stats.mean_grad_norm,
        tail_objective_oscillation: stats.objective_oscillation,
        tail_max_distance: has_ref.then_some(stats.max_distance),
        tail_mean_distance: has_ref.then_some(stats.mean_distance),
        stationary_grad_norm: reference.as_ref().map(|r| r.1),
        stationary_point: reference.map(|r| r.0 .0),
        final_theta: run.traj.last().0.clone(),
        projections: run.final_projections,
    }
}

fn write_trajectory(
    cfg: &SweepConfig,
    traj: &mut Trajectory,
    tag: &str,
    objective: &dyn Fn(&[f64]) -> f64,
    gradient: &dyn Fn(&[f64]) -> Vec<f64>,
) -> Result<()> {
    if !cfg.write_trajectories {
        return Ok(());
    }
    let Some(dir) = &cfg.output else {
        return Ok(());
    };
    std::fs::create_dir_all(dir)?;
    traj.attach_diagnostics(objective, gradient);
    let file = std::fs::File::create(dir.join(format!("trajectory_{tag}.csv")))?;
    traj.write_csv(std::io::BufWriter::new(file))
}

fn bias_tolerance(algorithm: Algorithm) -> f64 {
    match algorithm {
        Algorithm::PolicyGradient => 0.1,
        _ => 0.3,
    }
}

fn finish_report(cfg: &SweepConfig, rows: Vec<SweepRow>) -> Result<BiasReport> {
    let controls: Vec<f64> = rows.iter().map(|r| r.control).collect();
    let biases: Vec<f64> = rows.iter().map(|r| r.bias_norm).collect();
    let sups: Vec<f64> = rows.iter().map(|r| r.tail_sup_grad_norm).collect();
    let bias_slope = loglog_fit(&controls, &biases);
    let tail_gradient_slope = loglog_fit(&controls, &sups);
    // order rows by decreasing control; the first fixes L
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| controls[b].total_cmp(&controls[a]));
    let bound_constant = sups[order[0]] / controls[order[0]].sqrt();
    let distance_decreasing = order.windows(2).all(|w| {
        match (rows[w[0]].tail_max_distance, rows[w[1]].tail_max_distance) {
            (Some(a), Some(b)) => b < a,
            _ => false,
        }
    });
    let worst_bound = order[1..]
        .iter()
        .map(|&i| sups[i] / (bound_constant * controls[i].sqrt()))
        .fold(0.0, f64::max);
    let tol = bias_tolerance(cfg.algorithm);
    // Tail behaviour of the Monte Carlo methods is noise-dominated at desk
    // scale, so only the policy-gradient sweep gates on it.
    let tail_info = cfg.algorithm != Algorithm::PolicyGradient;
    let checks = vec![
        Check::at_most("bias_slope_deviation", (bias_slope.slope - 1.0).abs(), tol),
        Check::at_most("tail_gradient_bound_ratio", worst_bound, 1.0).informational(tail_info),
        Check::at_least(
            "tail_distance_decreasing",
            if distance_decreasing { 1.0 } else { 0.0 },
            1.0,
        )
        .informational(tail_info),
    ];
    let passed = verdict(&checks);
    Ok(BiasReport {
        algorithm: cfg.algorithm,
        seed: cfg.seed,
        config_hash: cfg.hash()?,
        control: cfg.algorithm.control_label().to_string(),
        tail_window: cfg.tail_window,
        rows,
        bias_slope,
        tail_gradient_slope,
        bound_constant,
        distance_decreasing,
        checks,
        passed,
    })
}

/// Runs the sweep named by `cfg.algorithm`.
pub fn sweep(cfg: &SweepConfig) -> Result<BiasReport> {
    cfg.validate()?;
    match cfg.algorithm {
        Algorithm::PolicyGradient => pg_sweep(cfg),
        Algorithm::AdaptivePmc => pmc_sweep(cfg),
        Algorithm::HmmIdent => hmm_sweep(cfg),
    }
}

fn load_mdp(cfg: &SweepConfig) -> Result<MdpModel> {
    let path = cfg
        .model_path()
        .ok_or_else(|| Error::config("model", "missing"))?;
    MdpModel::load(&path).map_err(|e| Error::config("model", format!("{}: {e}", path.display())))
}

fn pg_settings(cfg: &SweepConfig, lambda: f64, theta0: &ParamVector) -> Result<PgRun> {
    Ok(PgRun {
        lambda,
        schedule: cfg.schedule,
        steps: cfg.steps,
        projection: cfg.projection(theta0)?,
        record_every: cfg.record_every(cfg.steps),
        start_state: cfg.pg.start_state,
    })
}

pub fn pg_sweep(cfg: &SweepConfig) -> Result<BiasReport> {
    let model = load_mdp(cfg)?;
    let theta0 = cfg.theta_or_zeros(&cfg.theta0, model.dim(), "theta0")?;
    let bias_theta = cfg.theta_or_zeros(&cfg.bias_theta, model.dim(), "bias_theta")?;
    let bias_theta = if cfg.bias_theta.is_some() {
        bias_theta
    } else {
        theta0.clone()
    };
    let tol = cfg.pg.series_tol;
    let objective = |t: &[f64]| average_cost(&model, t).unwrap_or(f64::NAN);
    let gradient = |t: &[f64]| {
        exact_gradient(&model, t, tol)
            .map(|g| g.0)
            .unwrap_or_else(|_| vec![f64::NAN; t.len()])
    };
    let mut rows = Vec::with_capacity(cfg.values.len());
    for (i, &lambda) in cfg.values.iter().enumerate() {
        let eta = exact_bias(&model, &bias_theta, lambda, tol)?;
        let settings = pg_settings(cfg, lambda, &theta0)?;
        let mut traj = policy_gradient::run_policy_gradient(
            &model,
            theta0.clone(),
            &settings,
            sub_seed(cfg.seed, i as u64),
        )?;
        let (stats, reference) = assess_row(cfg, &traj, &objective, &gradient)?;
        write_trajectory(
            cfg,
            &mut traj,
            &cfg.algorithm.row_tag(lambda),
            &objective,
            &gradient,
        )?;
        let run = row_run(traj);
        let bias = RowBias {
            norm: eta.norm(),
            se: vec![0.0; eta.len()],
            bias: eta.0,
            norm_se: 0.0,
        };
        rows.push(build_row(
            lambda,
            1.0 - lambda,
            bias,
            &run,
            stats,
            reference,
        ));
    }
    finish_report(cfg, rows)
}

pub fn pmc_sweep(cfg: &SweepConfig) -> Result<BiasReport> {
    let target = cfg.pmc.target()?;
    let kernel = MixtureKernel::new(cfg.pmc.components.clone(), &target)?;
    let k = kernel.len();
    let theta0 = cfg.theta_or_zeros(&cfg.theta0, k, "theta0")?;
    let bias_theta = if cfg.bias_theta.is_some() {
        cfg.theta_or_zeros(&cfg.bias_theta, k, "bias_theta")?
    } else {
        theta0.clone()
    };
    let quad = KlQuadrature::new(&target, &kernel);
    let objective = |t: &[f64]| quad.objective(t);
    let gradient = |t: &[f64]| quad.gradient(t).0;
    let mut rows = Vec::with_capacity(cfg.values.len());
    for (i, &value) in cfg.values.iter().enumerate() {
        let n = value as usize;
        let b = adaptive_pmc::measure_bias(
            &target,
            &kernel,
            &bias_theta,
            n,
            (cfg.pmc.bias_particle_steps / n).max(100),
            sub_seed(cfg.seed, 1000 + i as u64),
        )?;
        let settings = PmcRun {
            particles: n,
            schedule: cfg.schedule,
            steps: cfg.steps,
            projection: cfg.projection(&theta0)?,
            record_every: cfg.record_every(cfg.steps),
        };
        let mut traj = adaptive_pmc::run_adaptive_pmc(
            &target,
            &kernel,
            theta0.clone(),
            &settings,
            sub_seed(cfg.seed, i as u64),
        )?;
        let (stats, reference) = assess_row(cfg, &traj, &objective, &gradient)?;
        write_trajectory(
            cfg,
            &mut traj,
            &cfg.algorithm.row_tag(value),
            &objective,
            &gradient,
        )?;
        let run = row_run(traj);
        let bias = RowBias {
            bias: b.bias,
            se: b.bias_se,
            norm: b.norm,
            norm_se: b.norm_se,
        };
        rows.push(build_row(value, 1.0 / value, bias, &run, stats, reference));
    }
    finish_report(cfg, rows)
}

pub fn hmm_sweep(cfg: &SweepConfig) -> Result<BiasReport> {
    let path = cfg
        .model_path()
        .ok_or_else(|| Error::config("model", "missing"))?;
    let truth = TrueHmm::load(&path)
        .map_err(|e| Error::config("model", format!("{}: {e}", path.display())))?;
    let (nx, ny) = (truth.n_states(), truth.n_obs());
    let d = truth.param_dim();
    let theta0 = cfg.theta_or_zeros(&cfg.theta0, d, "theta0")?;
    let bias_theta = if cfg.bias_theta.is_some() {
        cfg.theta_or_zeros(&cfg.bias_theta, d, "bias_theta")?
    } else {
        // a symmetric θ has identical hidden states, where the bias vanishes
        truth.true_theta()
    };
    let lens: Vec<usize> = cfg.values.iter().map(|&v| v as usize).collect();
    let cand = CandidateHmm::new(nx, ny, &bias_theta)?;
    let bias_rows = hmm_ident::measure_hmm_bias(
        &truth,
        &cand,
        &lens,
        cfg.hmm.bias_path_len,
        sub_seed(cfg.seed, 999),
    )?;
    let mut rng = seeded(sub_seed(cfg.seed, 777));
    let path_obs = hmm_ident::simulate_output(&truth, cfg.hmm.oracle_path_len, &mut rng);
    let objective = |t: &[f64]| {
        CandidateHmm::new(nx, ny, t)
            .and_then(|c| block_negloglik(&c, &path_obs))
            .unwrap_or(f64::NAN)
    };
    let gradient = |t: &[f64]| {
        CandidateHmm::new(nx, ny, t)
            .and_then(|c| block_score(&c, &path_obs))
            .map(|g| g.0)
            .unwrap_or_else(|_| vec![f64::NAN; t.len()])
    };
    let mut rows = Vec::with_capacity(lens.len());
    for (i, (&n, b)) in lens.iter().zip(bias_rows).enumerate() {
        let blocks = cfg.steps / n;
        let settings = HmmRun {
            block_len: n,
            schedule: cfg.schedule,
            blocks,
            projection: cfg.projection(&theta0)?,
            record_every: cfg.record_every(blocks),
        };
        let mut traj = hmm_ident::run_split_likelihood(
            &truth,
            theta0.clone(),
            &settings,
            sub_seed(cfg.seed, i as u64),
        )?;
        let (stats, reference) = assess_row(cfg, &traj, &objective, &gradient)?;
        write_trajectory(
            cfg,
            &mut traj,
            &cfg.algorithm.row_tag(n as f64),
            &objective,
            &gradient,
        )?;
        let run = row_run(traj);
        let bias = RowBias {
            bias: b.bias,
            se: b.bias_se,
            norm: b.norm,
            norm_se: b.norm_se,
        };
        rows.push(build_row(
            n as f64,
            1.0 / n as f64,
            bias,
            &run,
            stats,
            reference,
        ));
    }
    finish_report(cfg, rows)
}

/// Tail summary of one policy-gradient run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub lambda: f64,
    pub seed: u64,
    pub steps: usize,
    pub final_theta: Vec<f64>,
    pub projections: u32,
    pub tail: TailStats,
    pub stationary_point: Option<Vec<f64>>,
}

/// Runs the policy-gradient recursion once per `λ` and writes
/// `trajectory_<tag>.csv` files plus `runs.json` into the output directory.
pub fn pg_run(cfg: &SweepConfig) -> Result<Vec<RunSummary>> {
    if cfg.algorithm != Algorithm::PolicyGradient {
        return Err(Error::config(
            "algorithm",
            "pg-run needs a policy_gradient config",
        ));
    }
    cfg.validate()?;
    let model = load_mdp(cfg)?;
    let theta0 = cfg.theta_or_zeros(&cfg.theta0, model.dim(), "theta0")?;
    let tol = cfg.pg.series_tol;
    let objective = |t: &[f64]| average_cost(&model, t).unwrap_or(f64::NAN);
    let gradient = |t: &[f64]| {
        exact_gradient(&model, t, tol)
            .map(|g| g.0)
            .unwrap_or_else(|_| vec![f64::NAN; t.len()])
    };
    let mut out = Vec::new();
    for (i, &lambda) in cfg.values.iter().enumerate() {
        let seed = sub_seed(cfg.seed, i as u64);
        let settings = pg_settings(cfg, lambda, &theta0)?;
        let mut traj =
            policy_gradient::run_policy_gradient(&model, theta0.clone(), &settings, seed)?;
        let (tail, reference) = assess_row(cfg, &traj, &objective, &gradient)?;
        if let Some(dir) = &cfg.output {
            std::fs::create_dir_all(dir)?;
            traj.attach_diagnostics(objective, gradient);
            let file = std::fs::File::create(
                dir.join(format!("trajectory_{}.csv", cfg.algorithm.row_tag(lambda))),
            )?;
            traj.write_csv(std::io::BufWriter::new(file))?;
        }
        out.push(RunSummary {
            lambda,
            seed,
            steps: cfg.steps,
            final_theta: traj.last().0.clone(),
            projections: traj.counters.last().copied().unwrap_or(0),
            tail,
            stationary_point: reference.map(|r| r.0 .0),
        });
    }
    if let Some(dir) = &cfg.output {
        let mut json = serde_json::to_string_pretty(&out)?;
        json.push('\n');
        std::fs::write(dir.join("runs.json"), json)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Markov,
    Pg,
    Pmc,
    Hmm,
    Core,
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "markov" => Ok(Suite::Markov),
            "pg" => Ok(Suite::Pg),
            "pmc" => Ok(Suite::Pmc),
            "hmm" => Ok(Suite::Hmm),
            "core" => Ok(Suite::Core),
            other => Err(Error::config(
                "suite",
                format!("unknown suite `{other}` (expected markov, pg, pmc, hmm or core)"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub checks: Vec<Check>,
    pub passed: bool,
}

/// Runs one invariant suite on seeded random instances.
pub fn verify(suite: Suite) -> Result<VerifyReport> {
    let checks = match suite {
        Suite::Markov => verify_markov()?,
        Suite::Pg => verify_pg()?,
        Suite::Pmc => verify_pmc()?,
        Suite::Hmm => verify_hmm()?,
        Suite::Core => verify_core()?,
    };
    let passed = verdict(&checks);
    Ok(VerifyReport {
        suite,
        checks,
        passed,
    })
}

fn random_positive_matrix(d: usize, rng: &mut impl rand::Rng) -> StochasticMatrix {
    let rows = (0..d)
        .map(|_| {
            let r: Vec<f64> = (0..d).map(|_| 0.01 + rng.random::<f64>()).collect();
            let s: f64 = r.iter().sum();
            r.iter().map(|v| v / s).collect()
        })
        .collect();
    StochasticMatrix::new(rows).expect("rows are normalized")
}

fn verify_markov() -> Result<Vec<Check>> {
    let mut rng = seeded(11);
    let (mut fixed, mut poisson, mut deviation) = (0.0f64, 0.0f64, 0.0f64);
    for case in 0..100 {
        let d = 1 + case % 10;
        let p = random_positive_matrix(d, &mut rng);
        let nu = invariant_distribution(&p)?;
        let moved = p.apply_left(nu.as_slice());
        for (a, b) in moved.iter().zip(nu.iter()) {
            fixed = fixed.max((a - b).abs());
        }
        let g: Vec<f64> = (0..d).map(|_| rng.random::<f64>() - 0.5).collect();
        let mean = nu.dot(&g);
        let centered: Vec<f64> = g.iter().map(|v| v - mean).collect();
        let h = poisson_solve(&p, &nu, &centered, 1e-12)?;
        let ph = p.apply(&h);
        for i in 0..d {
            poisson = poisson.max((h[i] - ph[i] - centered[i]).abs());
        }
        let series = DeviationSeries::with_invariant(p.clone(), nu.clone(), 1e-12);
        for n in 1..4 {
            let lhs = deviation_power_apply(&series, n, &g);
            let rhs = p.pow(n as u32).apply(&g);
            for i in 0..d {
                deviation = deviation.max((lhs[i] - (rhs[i] - mean)).abs());
            }
        }
    }
    Ok(vec![
        Check::at_most("invariant_fixed_point", fixed, 1e-10),
        Check::at_most("poisson_residual", poisson, 1e-8),
        Check::at_most("deviation_identity", deviation, 1e-10),
    ])
}

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm2(&diff) / norm2(b).max(1e-12)
}

fn central_difference(f: impl Fn(&[f64]) -> f64, theta: &[f64], h: f64) -> Vec<f64> {
    (0..theta.len())
        .map(|j| {
            let mut tp = theta.to_vec();
            let mut tm = theta.to_vec();
            tp[j] += h;
            tm[j] -= h;
            (f(&tp) - f(&tm)) / (2.0 * h)
        })
        .collect()
}

fn verify_pg() -> Result<Vec<Check>> {
    let mut rng = seeded(12);
    let mut fd_err = 0.0f64;
    let mut softmax_err = 0.0f64;
    for case in 0..20 {
        let nx = 1 + case % 4;
        let ny = 1 + case % 3;
        let model = MdpModel::random(nx.max(2), ny.max(2), &mut rng);
        let theta: Vec<f64> = (0..model.dim())
            .map(|_| 2.0 * rng.random::<f64>() - 1.0)
            .collect();
        let g = exact_gradient(&model, &theta, 1e-13)?;
        let fd = central_difference(
            |t| average_cost(&model, t).unwrap_or(f64::NAN),
            &theta,
            1e-5,
        );
        fd_err = fd_err.max(relative_error(&g, &fd));
        let policy = SoftmaxPolicy::new(&model, &theta)?;
        for x in 0..model.n_states() {
            softmax_err = softmax_err.max((policy.row(x).iter().sum::<f64>() - 1.0).abs());
            let mut centered = vec![0.0; model.dim()];
            for y in 0..model.n_actions() {
                for (c, s) in centered.iter_mut().zip(policy.score(x, y)) {
                    *c += policy.prob(x, y) * s;
                }
            }
            softmax_err = softmax_err.max(crate::stats::max_abs(&centered));
        }
    }
    let model = MdpModel::random(2, 2, &mut rng);
    let theta: Vec<f64> = (0..model.dim())
        .map(|_| rng.random::<f64>() - 0.5)
        .collect();
    let states: Vec<TraceState> = (0..20)
        .map(|_| TraceState {
            v: rng.random_range(0..model.n_joint()),
            w: (0..model.dim())
                .map(|_| 4.0 * rng.random::<f64>() - 2.0)
                .collect(),
        })
        .collect();
    let residual = policy_gradient::check_poisson_identity(&model, &theta, 0.5, &states, 1e-8)?;
    let model = MdpModel::random(3, 2, &mut rng);
    let theta: Vec<f64> = (0..model.dim())
        .map(|_| rng.random::<f64>() - 0.5)
        .collect();
    let ratio = exact_bias(&model, &theta, 0.999, 1e-13)?.norm()
        / exact_bias(&model, &theta, 0.99, 1e-13)?.norm();
    Ok(vec![
        Check::at_most("gradient_fd_relative_error", fd_err, 1e-6),
        Check::at_most("softmax_identities", softmax_err, 1e-12),
        Check::at_most("poisson_identity_residual", residual, 1e-8),
        Check::at_most("bias_ratio_deviation", (ratio - 0.1).abs(), 0.01),
    ])
}

fn verify_pmc() -> Result<Vec<Check>> {
    let target = TargetSpec::default();
    let kernel = MixtureKernel::new(PmcSettings::default().components, &target)?;
    let quad = KlQuadrature::new(&target, &kernel);
    let mut rng = seeded(13);
    let (mut norm_err, mut fd_err, mut gibbs_gap, mut score_err) =
        (0.0f64, 0.0f64, f64::INFINITY, 0.0f64);
    let entropy = quad.entropy();
    for _ in 0..5 {
        let theta: Vec<f64> = (0..kernel.len())
            .map(|_| 4.0 * rng.random::<f64>() - 2.0)
            .collect();
        norm_err = norm_err.max(quad.normalization_error(&theta));
        let g = quad.gradient(&theta);
        let fd = central_difference(|t| quad.objective(t), &theta, 1e-5);
        fd_err = fd_err.max(relative_error(&g, &fd));
        gibbs_gap = gibbs_gap.min(quad.objective(&theta) - entropy);
    }
    for _ in 0..50 {
        let theta: Vec<f64> = (0..kernel.len())
            .map(|_| 4.0 * rng.random::<f64>() - 2.0)
            .collect();
        let (x, xp): (f64, f64) = (rng.random(), rng.random());
        let w = adaptive_pmc::mixture_weights(&theta);
        let mut s = vec![0.0; kernel.len()];
        kernel.score_into(&w, x, xp, &mut s);
        let fd = central_difference(
            |t| kernel.pdf(&adaptive_pmc::mixture_weights(t), xp, x).ln(),
            &theta,
            1e-6,
        );
        score_err = score_err.max(relative_error(&s, &fd));
    }
    Ok(vec![
        Check::at_most("kernel_normalization", norm_err, 1e-8),
        Check::at_most("kl_gradient_fd_relative_error", fd_err, 1e-6),
        Check::at_least("gibbs_gap", gibbs_gap, -1e-12),
        Check::at_most("score_fd_relative_error", score_err, 1e-6),
    ])
}

/// `−(1/N) log Σ_{x_0..x_N} u₀(x_0) Π p(x_k|x_{k−1}) q(y_k|x_k)` by brute force.
fn brute_force_negloglik(cand: &CandidateHmm, ys: &[usize]) -> f64 {
    let nx = cand.n_states();
    let n = ys.len();
    let total_paths = nx.pow(n as u32 + 1);
    let mut total = 0.0;
    for code in 0..total_paths {
        let mut c = code;
        let mut path = Vec::with_capacity(n + 1);
        for _ in 0..=n {
            path.push(c % nx);
            c /= nx;
        }
        let mut w = 1.0 / nx as f64;
        for k in 1..=n {
            w *= cand.transition(path[k - 1], path[k]) * cand.emission(path[k], ys[k - 1]);
        }
        total += w;
    }
    -total.ln() / n as f64
}

fn verify_hmm() -> Result<Vec<Check>> {
    let mut rng = seeded(14);
    let (mut fd_err, mut lik_err, mut filter_err) = (0.0f64, 0.0f64, 0.0f64);
    for case in 0..50 {
        let (nx, ny) = (2 + case % 2, 2);
        let theta: Vec<f64> = (0..CandidateHmm::dim_for(nx, ny))
            .map(|_| 2.0 * rng.random::<f64>() - 1.0)
            .collect();
        let cand = CandidateHmm::new(nx, ny, &theta)?;
        let ys: Vec<usize> = (0..1 + case % 6).map(|_| rng.random_range(0..ny)).collect();
        let (value, score) = block_value_and_score(&cand, &ys)?;
        let fd = central_difference(
            |t| {
                CandidateHmm::new(nx, ny, t)
                    .and_then(|c| block_negloglik(&c, &ys))
                    .unwrap_or(f64::NAN)
            },
            &theta,
            1e-5,
        );
        fd_err = fd_err.max(relative_error(&score, &fd));
        lik_err = lik_err.max((value - brute_force_negloglik(&cand, &ys)).abs());
        // posterior of the final state from the filter vs Bayes over paths
        let mut u = vec![1.0 / nx as f64; nx];
        for &y in &ys {
            u = filter_step(&cand, &u, y).0;
        }
        let mut joint = vec![0.0; nx];
        let total_paths = nx.pow(ys.len() as u32 + 1);
        for code in 0..total_paths {
            let mut c = code;
            let mut path = Vec::with_capacity(ys.len() + 1);
            for _ in 0..=ys.len() {
                path.push(c % nx);
                c /= nx;
            }
            let mut w = 1.0 / nx as f64;
            for k in 1..=ys.len() {
                w *= cand.transition(path[k - 1], path[k]) * cand.emission(path[k], ys[k - 1]);
            }
            joint[path[ys.len()]] += w;
        }
        let z: f64 = joint.iter().sum();
        for (a, b) in u.iter().zip(&joint) {
            filter_err = filter_err.max((a - b / z).abs());
        }
    }
    Ok(vec![
        Check::at_most("block_score_fd_relative_error", fd_err, 1e-6),
        Check::at_most("likelihood_vs_path_sum", lik_err, 1e-10),
        Check::at_most("filter_vs_bayes_posterior", filter_err, 1e-12),
    ])
}

fn verify_core() -> Result<Vec<Check>> {
    // gradient descent on a strictly convex quadratic with exact gradients
    let target = [1.0, -2.0, 0.5];
    let scales = [1.0, 0.5, 2.0];
    let grad = move |t: &[f64]| -> Vec<f64> {
        t.iter()
            .zip(&target)
            .zip(&scales)
            .map(|((a, b), s)| s * (a - b))
            .collect()
    };
    let obj = move |t: &[f64]| -> f64 {
        t.iter()
            .zip(&target)
            .zip(&scales)
            .map(|((a, b), s)| 0.5 * s * (a - b).powi(2))
            .sum()
    };
    let schedule = StepSchedule::default();
    let estimator = |t: &[f64], _n: usize, _rng: &mut crate::rng::SimRng, out: &mut [f64]| {
        out.copy_from_slice(&grad(t))
    };
    let traj = run(
        estimator,
        &schedule,
        ParamVector::zeros(3),
        100_000,
        None,
        1,
    )?;
    let tail = tail_stats(&traj, 0.2, grad, obj, Some(&target))?;

    // determinism and projection soundness under heavy noise
    let noisy = |t: &[f64], _n: usize, rng: &mut crate::rng::SimRng, out: &mut [f64]| {
        for (o, v) in out.iter_mut().zip(t) {
            let u: f64 = rng.random::<f64>().max(1e-300);
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            *o = v + sign * u.powf(-0.7);
        }
    };
    let anchor = ParamVector::zeros(3);
    let policy = ProjectionPolicy::with_defaults(anchor.clone())?;
    let a = run(
        noisy,
        &schedule,
        anchor.clone(),
        20_000,
        Some(policy.clone()),
        5,
    )?;
    let b = run(noisy, &schedule, anchor.clone(), 20_000, Some(policy), 5)?;
    let mut violations = 0usize;
    for (i, theta) in a.iterates.iter().enumerate().skip(1) {
        let counter = a.counters[i - 1];
        let radius = ProjectionPolicy::DEFAULT_BASE_RADIUS
            * ProjectionPolicy::DEFAULT_GROWTH.powi(counter as i32);
        if theta.norm() > radius && *theta != anchor {
            violations += 1;
        }
    }
    let sum_alpha: f64 = (0..1_000_000u64).map(|n| schedule.step_size(n)).sum();
    Ok(vec![
        Check::at_most("quadratic_tail_gradient", tail.sup_grad_norm, 1e-6),
        Check::at_most("determinism_mismatch", if a == b { 0.0 } else { 1.0 }, 0.0),
        Check::at_most("projection_violations", violations as f64, 0.0),
        Check::at_least("schedule_partial_sum", sum_alpha, 100.0),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(name: &str) -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("fixtures")
            .join(name)
    }

    #[test]
    fn quadratic_stationary_point() {
        let star = [0.3, -1.2];
        let f = |t: &[f64]| 0.5 * ((t[0] - star[0]).powi(2) + (t[1] - star[1]).powi(2));
        let g = |t: &[f64]| vec![t[0] - star[0], t[1] - star[1]];
        let p = locate_stationary_point(f, g, &[5.0, 5.0], 1e-12).unwrap();
        assert!(p.distance(&star) <= 1e-12);
        let q = locate_stationary_point(f, g, &star, 1e-12).unwrap();
        assert_eq!(q.0, star.to_vec());
    }

    #[test]
    fn search_reports_no_convergence() {
        let f = |t: &[f64]| t[0];
        let g = |_: &[f64]| vec![1.0];
        assert!(matches!(
            locate_stationary_point_with(f, g, &[0.0], 1e-8, 50),
            Err(Error::NoConvergence { .. })
        ));
    }

    #[test]
    fn pg_fixture_stationary_point() {
        let model = MdpModel::load(fixture("pg_vicinity.json")).unwrap();
        let p = locate_stationary_point(
            |t| average_cost(&model, t).unwrap(),
            |t| exact_gradient(&model, t, 1e-14).unwrap().0,
            &[0.0],
            1e-10,
        )
        .unwrap();
        assert!(exact_gradient(&model, &p, 1e-14).unwrap().norm() <= 1e-10);
        assert!((p[0] + 2.2109761108682138).abs() < 1e-6);
    }

    fn pg_config() -> SweepConfig {
        SweepConfig {
            algorithm: Algorithm::PolicyGradient,
            values: vec![0.9, 0.99, 0.999],
            steps: 20_000,
            schedule: StepSchedule::default(),
            seed: 3,
            model: Some(fixture("pg_vicinity.json")),
            output: None,
            theta0: None,
            bias_theta: None,
            record_every: None,
            tail_window: 0.2,
            projection: Some(ProjectionConfig::default()),
            stationary_tol: 1e-10,
            stationary_max_iterations: 2_000,
            write_trajectories: false,
            pg: PgSettings::default(),
            pmc: PmcSettings::default(),
            hmm: HmmSettings::default(),
            base_dir: PathBuf::new(),
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = pg_config();
        assert!(cfg.validate().is_ok());
        cfg.values = vec![0.9, 0.99];
        assert!(matches!(cfg.validate(), Err(Error::Config { .. })));
        cfg.values = vec![0.9, 0.99, 1.0];
        assert!(cfg.validate().is_err());
        let mut cfg = pg_config();
        cfg.algorithm = Algorithm::AdaptivePmc;
        cfg.values = vec![10.0, 100.0, 100.0];
        assert!(cfg.validate().is_err());
        cfg.values = vec![10.0, 100.0, 1000.0];
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn pg_sweep_exact_bias_slope() {
        let cfg = pg_config();
        let report = sweep(&cfg).unwrap();
        assert_eq!(report.rows.len(), 3);
        assert!(
            (report.bias_slope.slope - 1.0).abs() <= 0.1,
            "{:?}",
            report.bias_slope
        );
        assert_eq!(report.seed, 3);
        assert_eq!(report.config_hash.len(), 64);
        let again = sweep(&cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&report).unwrap(),
            serde_json::to_string(&again).unwrap()
        );
    }

    #[test]
    fn suites_pass() {
        for suite in [
            Suite::Markov,
            Suite::Pg,
            Suite::Pmc,
            Suite::Hmm,
            Suite::Core,
        ] {
            let r = verify(suite).unwrap();
            assert!(r.passed, "{:?}", r);
        }
        assert!("nope".parse::<Suite>().is_err());
    }
}
