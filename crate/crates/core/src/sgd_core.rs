//! Generic engine for biased stochastic gradient recursions.
//!
//! The recursion is `θ_{n+1} = θ_n − α_n · estimate(θ_n)`, optionally
//! followed by the random-projection reset: whenever the raw update leaves
//! the current ball of radius `β_σ`, the iterate jumps back to the anchor
//! `θ₀` and the counter `σ` grows, which enlarges the ball geometrically.

use std::io::Write;
use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{seeded, SimRng};
use crate::stats::norm2;

/// Iterate of a stochastic gradient recursion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn zeros(dim: usize) -> Self {
        ParamVector(vec![0.0; dim])
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn distance(&self, other: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

impl Deref for ParamVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        ParamVector(v)
    }
}

/// Step sizes `α_n = a / (n + n₀)^γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    scale: f64,
    exponent: f64,
    offset: u64,
}

impl StepSchedule {
    /// Builds a schedule with `γ ∈ (1/2, 1]`, `a > 0`.
    ///
    /// `offset` must be at least 1 so that `α_0` is finite.
    pub fn new(scale: f64, exponent: f64, offset: u64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidSchedule(format!(
                "scale must be > 0, got {scale}"
            )));
        }
        if !(exponent > 0.5 && exponent <= 1.0) {
            return Err(Error::InvalidSchedule(format!(
                "exponent must lie in (1/2, 1], got {exponent}"
            )));
        }
        if offset == 0 {
            return Err(Error::InvalidSchedule("offset must be >= 1".into()));
        }
        Ok(Self {
            scale,
            exponent,
            offset,
        })
    }

    /// Constant step size. Outside the decreasing-schedule family; meant for
    /// diagnostics and closed-form checks.
    pub fn constant(alpha: f64) -> Self {
        Self {
            scale: alpha,
            exponent: 0.0,
            offset: 1,
        }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn offset(&self) -> u64 {
        self.offset
    }

    /// Re-validates a deserialized schedule.
    pub fn validated(self) -> Result<Self> {
        if self.exponent == 0.0 && self.scale > 0.0 {
            return Ok(self);
        }
        Self::new(self.scale, self.exponent, self.offset)
    }

    pub fn step_size(&self, n: u64) -> f64 {
        let base = (n + self.offset) as f64;
        if self.exponent == 1.0 {
            self.scale / base
        } else {
            self.scale / base.powf(self.exponent)
        }
    }
}

impl Default for StepSchedule {
    fn default() -> Self {
        Self {
            scale: 1.0,
            exponent: 0.75,
            offset: 1,
        }
    }
}

/// Free-function form of [`StepSchedule::step_size`].
pub fn step_size(schedule: &StepSchedule, n: u64) -> f64 {
    schedule.step_size(n)
}

/// Reset-to-anchor stabilization with growing radii `β_σ = β₀ c^σ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionPolicy {
    base_radius: f64,
    growth: f64,
    counter: u32,
    anchor: ParamVector,
}

impl ProjectionPolicy {
    pub const DEFAULT_BASE_RADIUS: f64 = 10.0;
    pub const DEFAULT_GROWTH: f64 = 2.0;

    pub fn new(base_radius: f64, growth: f64, anchor: ParamVector) -> Result<Self> {
        if !(base_radius > 0.0 && base_radius.is_finite()) {
            return Err(Error::InvalidProjection(format!(
                "base radius must be > 0, got {base_radius}"
            )));
        }
        if !(growth > 1.0 && growth.is_finite()) {
            return Err(Error::InvalidProjection(format!(
                "growth factor must be > 1, got {growth}"
            )));
        }
        if anchor.norm() > base_radius {
            return Err(Error::InvalidProjection(format!(
                "anchor norm {} exceeds base radius {base_radius}",
                anchor.norm()
            )));
        }
        Ok(Self {
            base_radius,
            growth,
            counter: 0,
            anchor,
        })
    }

    /// `β₀ = 10`, `c = 2`.
    pub fn with_defaults(anchor: ParamVector) -> Result<Self> {
        Self::new(Self::DEFAULT_BASE_RADIUS, Self::DEFAULT_GROWTH, anchor)
    }

    pub fn counter(&self) -> u32 {
        self.counter
    }

    pub fn anchor(&self) -> &ParamVector {
        &self.anchor
    }

    pub fn radius(&self) -> f64 {
        self.base_radius * self.growth.powi(self.counter as i32)
    }

    /// Applies the reset rule to a raw update. The boundary `‖ϑ‖ = β_σ` is
    /// accepted; a non-finite candidate always counts as a violation.
    pub fn project(&self, candidate: ParamVector) -> (ParamVector, ProjectionPolicy) {
        let n = candidate.norm();
        if n.is_finite() && n <= self.radius() {
            (candidate, self.clone())
        } else {
            let mut next = self.clone();
            next.counter += 1;
            (self.anchor.clone(), next)
        }
    }

    fn project_in_place(&mut self, theta: &mut [f64]) -> bool {
        let n = norm2(theta);
        if n.is_finite() && n <= self.radius() {
            false
        } else {
            theta.copy_from_slice(&self.anchor);
            self.counter += 1;
            true
        }
    }
}

/// Free-function form of [`ProjectionPolicy::project`].
pub fn project_step(
    candidate: ParamVector,
    policy: &ProjectionPolicy,
) -> (ParamVector, ProjectionPolicy) {
    policy.project(candidate)
}

/// Recorded iterates of one run.
///
/// With `record_every = 1` every iterate `θ_0..θ_steps` is kept; larger values
/// keep every `record_every`-th iterate plus the final one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub seed: u64,
    pub steps: usize,
    pub record_every: usize,
    /// Step index `n` of each recorded iterate.
    pub indices: Vec<usize>,
    pub iterates: Vec<ParamVector>,
    /// `α_n` at each recorded index.
    pub step_sizes: Vec<f64>,
    /// Steps `n` at which the raw update `ϑ_n` was reset to the anchor.
    pub projection_events: Vec<usize>,
    /// Projection counter `σ` at each recorded iterate.
    pub counters: Vec<u32>,
    /// `(f(θ_n), ‖∇f(θ_n)‖)` per recorded iterate, when attached.
    pub diagnostics: Option<Vec<(f64, f64)>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.iterates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterates.is_empty()
    }

    pub fn last(&self) -> &ParamVector {
        self.iterates.last().expect("trajectory holds θ₀")
    }

    pub fn attach_diagnostics(
        &mut self,
        objective: impl Fn(&[f64]) -> f64,
        gradient: impl Fn(&[f64]) -> Vec<f64>,
    ) {
        self.diagnostics = Some(
            self.iterates
                .iter()
                .map(|t| (objective(t), norm2(&gradient(t))))
                .collect(),
        );
    }

    /// CSV export: `step, alpha, theta_0..theta_{d-1}, [grad_norm, f,] projected`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let dim = self.iterates.first().map_or(0, |t| t.len());
        let mut header = vec!["step".to_string(), "alpha".to_string()];
        header.extend((0..dim).map(|j| format!("theta_{j}")));
        if self.diagnostics.is_some() {
            header.push("grad_norm".into());
            header.push("f".into());
        }
        header.push("projected".into());
        writeln!(out, "{}", header.join(","))?;
        let mut ev = self.projection_events.iter().peekable();
        let mut prev = None;
        for (k, theta) in self.iterates.iter().enumerate() {
            let idx = self.indices[k];
            let mut projected = false;
            while let Some(&&e) = ev.peek() {
                // event at step e produces iterate e+1
                if e < idx && prev.is_none_or(|p| e + 1 > p) {
                    projected = true;
                    ev.next();
                } else if e < idx {
                    ev.next();
                } else {
                    break;
                }
            }
            let mut row = vec![idx.to_string(), format!("{:e}", self.step_sizes[k])];
            row.extend(theta.iter().map(|v| format!("{v:e}")));
            if let Some(d) = &self.diagnostics {
                row.push(format!("{:e}", d[k].1));
                row.push(format!("{:e}", d[k].0));
            }
            row.push(if projected { "1".into() } else { "0".into() });
            writeln!(out, "{}", row.join(","))?;
            prev = Some(idx);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub record_every: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { record_every: 1 }
    }
}

/// Runs the recursion with every iterate recorded.
///
/// The estimator receives `(θ_n, n, rng, out)` and writes its estimate of
/// `∇f(θ_n)` into `out`.
pub fn run<E>(
    estimator: E,
    schedule: &StepSchedule,
    theta0: ParamVector,
    steps: usize,
    projection: Option<ProjectionPolicy>,
    seed: u64,
) -> Result<Trajectory>
where
    E: FnMut(&[f64], usize, &mut SimRng, &mut [f64]),
{
    let mut rng = seeded(seed);
    run_with_rng(
        estimator,
        schedule,
        theta0,
        steps,
        projection,
        seed,
        &mut rng,
        RunOptions::default(),
    )
}

/// Like [`run`] but drawing from a caller-owned stream and with thinning.
#[allow(clippy::too_many_arguments)]
pub fn run_with_rng<E>(
    mut estimator: E,
    schedule: &StepSchedule,
    theta0: ParamVector,
    steps: usize,
    mut projection: Option<ProjectionPolicy>,
    seed: u64,
    rng: &mut SimRng,
    options: RunOptions,
) -> Result<Trajectory>
where
    E: FnMut(&[f64], usize, &mut SimRng, &mut [f64]),
{
    let every = options.record_every.max(1);
    let dim = theta0.len();
    let capacity = steps / every + 2;
    let mut traj = Trajectory {
        seed,
        steps,
        record_every: every,
        indices: Vec::with_capacity(capacity),
        iterates: Vec::with_capacity(capacity),
        step_sizes: Vec::with_capacity(capacity),
        projection_events: Vec::new(),
        counters: Vec::with_capacity(capacity),
        diagnostics: None,
    };
    let counter = |p: &Option<ProjectionPolicy>| p.as_ref().map_or(0, |p| p.counter());
    traj.indices.push(0);
    traj.step_sizes.push(schedule.step_size(0));
    traj.counters.push(counter(&projection));
    traj.iterates.push(theta0.clone());

    let mut theta = theta0;
    let mut grad = vec![0.0; dim];
    let mut until_record = every;
    for n in 0..steps {
        let alpha = schedule.step_size(n as u64);
        estimator(&theta, n, rng, &mut grad);
        for (t, g) in theta.iter_mut().zip(&grad) {
            *t -= alpha * g;
        }
        match projection.as_mut() {
            Some(p) => {
                if p.project_in_place(&mut theta) {
                    traj.projection_events.push(n);
                }
            }
            None => {
                if !theta.is_finite() {
                    return Err(Error::NonFiniteIterate { step: n });
                }
            }
        }
        let m = n + 1;
        until_record -= 1;
        if until_record == 0 || m == steps {
            until_record = every;
            traj.indices.push(m);
            traj.step_sizes.push(schedule.step_size(m as u64));
            traj.counters.push(counter(&projection));
            traj.iterates.push(theta.clone());
        }
    }
    Ok(traj)
}

/// Tail diagnostics standing in for the limsup/liminf quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailStats {
    pub window_fraction: f64,
    pub window_len: usize,
    pub sup_grad_norm: f64,
    pub mean_grad_norm: f64,
    pub objective_oscillation: f64,
    pub max_distance: f64,
    pub mean_distance: f64,
}

/// Statistics over the last `⌈w·len⌉` recorded iterates.
pub fn tail_stats(
    traj: &Trajectory,
    window_fraction: f64,
    gradient: impl Fn(&[f64]) -> Vec<f64>,
    objective: impl Fn(&[f64]) -> f64,
    reference: Option<&[f64]>,
) -> Result<TailStats> {
    if !(window_fraction > 0.0 && window_fraction < 1.0) {
        return Err(Error::config(
            "window_fraction",
            format!("must lie in (0,1), got {window_fraction}"),
        ));
    }
    let len = traj.len();
    let count = (window_fraction * len as f64).ceil() as usize;
    if count == 0 {
        return Err(Error::EmptyWindow);
    }
    let tail = &traj.iterates[len - count..];
    let mut sup_g = 0.0f64;
    let mut sum_g = 0.0;
    let mut fmin = f64::INFINITY;
    let mut fmax = f64::NEG_INFINITY;
    let mut max_d = 0.0f64;
    let mut sum_d = 0.0;
    for theta in tail {
        let g = norm2(&gradient(theta));
        sup_g = sup_g.max(g);
        sum_g += g;
        let f = objective(theta);
        fmin = fmin.min(f);
        fmax = fmax.max(f);
        let d = reference.map_or(0.0, |r| theta.distance(r));
        max_d = max_d.max(d);
        sum_d += d;
    }
    Ok(TailStats {
        window_fraction,
        window_len: count,
        sup_grad_norm: sup_g,
        mean_grad_norm: sum_g / count as f64,
        objective_oscillation: fmax - fmin,
        max_distance: max_d,
        mean_distance: sum_d / count as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    #[test]
    fn step_size_examples() {
        let s = StepSchedule::new(1.0, 1.0, 1).unwrap();
        assert_eq!(s.step_size(0), 1.0);
        assert_relative_eq!(s.step_size(9), 0.1, max_relative = 1e-15);
        let s = StepSchedule::new(2.0, 0.6, 1).unwrap();
        assert_relative_eq!(
            s.step_size(31),
            2.0 * 32f64.powf(-0.6),
            max_relative = 1e-15
        );
    }

    #[test]
    fn schedule_rejects_bad_parameters() {
        assert!(StepSchedule::new(1.0, 0.5, 1).is_err());
        assert!(StepSchedule::new(1.0, 1.1, 1).is_err());
        assert!(StepSchedule::new(0.0, 0.75, 1).is_err());
        assert!(StepSchedule::new(-1.0, 0.75, 1).is_err());
    }

    #[test]
    fn schedule_sums() {
        for gamma in [0.51, 0.75, 1.0] {
            let s = StepSchedule::new(1.0, gamma, 1).unwrap();
            let mut sum = 0.0;
            let mut sq_tail = 0.0;
            let mut prev = f64::INFINITY;
            for n in 0..2_000_000u64 {
                let a = s.step_size(n);
                assert!(a > 0.0 && a < prev);
                prev = a;
                sum += a;
                if n >= 1_000_000 {
                    sq_tail += a * a;
                }
            }
            assert!(sum > 14.0, "partial sum {sum} for gamma {gamma}");
            // Σ_{N≤n<2N} α_n² ≤ ∫_N^{2N} x^{−2γ} dx, which vanishes as N grows
            let (lo, hi, p) = (1_000_000f64, 2_000_000f64, 1.0 - 2.0 * gamma);
            let bound = if gamma == 1.0 {
                1.0 / lo - 1.0 / hi
            } else {
                (hi.powf(p) - lo.powf(p)) / p
            };
            assert!(
                sq_tail <= bound * (1.0 + 1e-9),
                "square tail {sq_tail} for gamma {gamma}"
            );
        }
    }

    #[test]
    fn zero_estimator_gives_constant_trajectory() {
        let theta0 = ParamVector(vec![0.3, -1.2]);
        let traj = run(
            |_, _, _, out: &mut [f64]| out.fill(0.0),
            &StepSchedule::default(),
            theta0.clone(),
            50,
            None,
            1,
        )
        .unwrap();
        assert_eq!(traj.len(), 51);
        assert!(traj.iterates.iter().all(|t| *t == theta0));
    }

    #[test]
    fn linear_contraction() {
        let traj = run(
            |th, _, _, out: &mut [f64]| out.copy_from_slice(th),
            &StepSchedule::constant(0.1),
            ParamVector(vec![1.0]),
            100,
            None,
            0,
        )
        .unwrap();
        for (n, t) in traj.iterates.iter().enumerate() {
            assert_relative_eq!(t[0], 0.9f64.powi(n as i32), max_relative = 1e-12);
        }
    }

    #[test]
    fn same_seed_same_trajectory() {
        let est = |th: &[f64], _: usize, rng: &mut SimRng, out: &mut [f64]| {
            for (o, t) in out.iter_mut().zip(th) {
                *o = t + rng.random::<f64>() - 0.5;
            }
        };
        let a = run(
            est,
            &StepSchedule::default(),
            ParamVector(vec![1.0, 2.0]),
            500,
            None,
            42,
        )
        .unwrap();
        let b = run(
            est,
            &StepSchedule::default(),
            ParamVector(vec![1.0, 2.0]),
            500,
            None,
            42,
        )
        .unwrap();
        assert_eq!(a, b);
        let c = run(
            est,
            &StepSchedule::default(),
            ParamVector(vec![1.0, 2.0]),
            500,
            None,
            43,
        )
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn non_finite_iterate_is_reported() {
        let err = run(
            |_, _, _, out: &mut [f64]| out.fill(f64::NAN),
            &StepSchedule::default(),
            ParamVector(vec![1.0]),
            5,
            None,
            0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonFiniteIterate { step: 0 }));
    }

    #[test]
    fn projection_boundary_and_resets() {
        let policy = ProjectionPolicy::new(2.0, 3.0, ParamVector(vec![0.0, 0.5])).unwrap();
        let (out, next) = policy.project(ParamVector(vec![2.0, 0.0]));
        assert_eq!(out.0, vec![2.0, 0.0]);
        assert_eq!(next.counter(), 0);

        let (out, next) = policy.project(ParamVector(vec![3.0, 0.0]));
        assert_eq!(out.0, vec![0.0, 0.5]);
        assert_eq!(next.counter(), 1);

        let mut p = policy.clone();
        for _ in 0..3 {
            let far = ParamVector(vec![p.radius() + 1.0, 0.0]);
            p = p.project(far).1;
        }
        assert_eq!(p.counter(), 3);
        assert_relative_eq!(p.radius(), 2.0 * 27.0, max_relative = 1e-15);
    }

    #[test]
    fn projection_rejects_bad_policy() {
        assert!(ProjectionPolicy::new(1.0, 2.0, ParamVector(vec![2.0])).is_err());
        assert!(ProjectionPolicy::new(1.0, 1.0, ParamVector(vec![0.0])).is_err());
        assert!(ProjectionPolicy::new(0.0, 2.0, ParamVector(vec![0.0])).is_err());
    }

    #[test]
    fn projected_run_stays_in_balls() {
        let policy = ProjectionPolicy::new(1.0, 2.0, ParamVector(vec![0.0])).unwrap();
        let traj = run(
            |_, n, _, out: &mut [f64]| out[0] = -((n % 7) as f64) * 3.0,
            &StepSchedule::constant(1.0),
            ParamVector(vec![0.0]),
            200,
            Some(policy),
            0,
        )
        .unwrap();
        for k in 1..traj.len() {
            let bound = 2f64.powi(traj.counters[k - 1] as i32);
            let t = &traj.iterates[k];
            assert!(t.norm() <= bound || t.0 == vec![0.0]);
        }
        assert!(!traj.projection_events.is_empty());
        assert!(traj.projection_events.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn tail_stats_examples() {
        let constant = run(
            |_, _, _, out: &mut [f64]| out.fill(0.0),
            &StepSchedule::default(),
            ParamVector(vec![1.0]),
            10,
            None,
            0,
        )
        .unwrap();
        let ts = tail_stats(
            &constant,
            0.2,
            |t| t.to_vec(),
            |t| 0.5 * t[0] * t[0],
            Some(&[1.0]),
        )
        .unwrap();
        assert_eq!(ts.objective_oscillation, 0.0);
        assert_eq!(ts.max_distance, 0.0);

        let alternating = run(
            |th, _, _, out: &mut [f64]| out[0] = if th[0] == 1.0 { -2.0 } else { 2.0 },
            &StepSchedule::constant(1.0),
            ParamVector(vec![1.0]),
            20,
            None,
            0,
        )
        .unwrap();
        // f = θ on {1, 3}
        let ts = tail_stats(&alternating, 0.5, |_| vec![1.0], |t| t[0], None).unwrap();
        assert_eq!(ts.objective_oscillation, 2.0);

        let steps = 100;
        let contraction = run(
            |th, _, _, out: &mut [f64]| out.copy_from_slice(th),
            &StepSchedule::constant(0.1),
            ParamVector(vec![1.0]),
            steps,
            None,
            0,
        )
        .unwrap();
        // window of ⌈0.1·101⌉ = 11 iterates starts at n = 90
        let ts = tail_stats(
            &contraction,
            0.1,
            |t| t.to_vec(),
            |t| 0.5 * t[0] * t[0],
            None,
        )
        .unwrap();
        assert_relative_eq!(ts.sup_grad_norm, 0.9f64.powi(90), max_relative = 1e-10);
    }

    #[test]
    fn tail_stats_rejects_bad_window() {
        let traj = run(
            |_, _, _, out: &mut [f64]| out.fill(0.0),
            &StepSchedule::default(),
            ParamVector(vec![1.0]),
            3,
            None,
            0,
        )
        .unwrap();
        assert!(tail_stats(&traj, 0.0, |t| t.to_vec(), |_| 0.0, None).is_err());
        assert!(tail_stats(&traj, 1.0, |t| t.to_vec(), |_| 0.0, None).is_err());
    }

    #[test]
    fn csv_export_marks_projection() {
        let policy = ProjectionPolicy::new(1.0, 2.0, ParamVector(vec![0.0])).unwrap();
        let traj = run(
            |_, n, _, out: &mut [f64]| out[0] = if n == 2 { -10.0 } else { 0.0 },
            &StepSchedule::constant(1.0),
            ParamVector(vec![0.0]),
            4,
            Some(policy),
            0,
        )
        .unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "step,alpha,theta_0,projected");
        assert!(lines[4].ends_with(",1"), "{text}");
        assert_eq!(lines.iter().filter(|l| l.ends_with(",1")).count(), 1);
    }
}
