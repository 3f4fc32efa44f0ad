//! Dense finite-state Markov chain utilities.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ROW_SUM_TOL: f64 = 1e-12;
const SINGULAR_TOL: f64 = 1e-12;

/// Default series cap for [`poisson_solve`].
pub const DEFAULT_MAX_TERMS: usize = 100_000;

/// Row-stochastic `d×d` matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct StochasticMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl StochasticMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != dim {
                return Err(Error::InvalidModel(format!(
                    "row {i} has {} entries, expected {dim}",
                    row.len()
                )));
            }
            data.extend(row);
        }
        Self::from_flat(dim, data)
    }

    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidModel("empty state space".into()));
        }
        if data.len() != dim * dim {
            return Err(Error::Dimension {
                expected: dim * dim,
                got: data.len(),
            });
        }
        for i in 0..dim {
            let row = &data[i * dim..(i + 1) * dim];
            if let Some(j) = row.iter().position(|&p| !(p >= 0.0 && p.is_finite())) {
                return Err(Error::InvalidModel(format!(
                    "entry ({i},{j}) = {} is not a probability",
                    row[j]
                )));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidModel(format!("row {i} sums to {s}")));
            }
        }
        Ok(Self { dim, data })
    }

    pub fn identity(dim: usize) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    /// `P·v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.rows()
            .map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `vᵀ·P`.
    pub fn apply_left(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (vi, r) in v.iter().zip(self.rows()) {
            for (o, p) in out.iter_mut().zip(r) {
                *o += vi * p;
            }
        }
        out
    }

    pub fn mul(&self, other: &StochasticMatrix) -> StochasticMatrix {
        let d = self.dim;
        let mut data = vec![0.0; d * d];
        for i in 0..d {
            for k in 0..d {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..d {
                    data[i * d + j] += a * other.get(k, j);
                }
            }
        }
        StochasticMatrix { dim: d, data }
    }

    pub fn pow(&self, n: u32) -> StochasticMatrix {
        (0..n).fold(Self::identity(self.dim), |acc, _| acc.mul(self))
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }
}

impl TryFrom<Vec<Vec<f64>>> for StochasticMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(rows)
    }
}

impl From<StochasticMatrix> for Vec<Vec<f64>> {
    fn from(m: StochasticMatrix) -> Self {
        m.rows().map(<[f64]>::to_vec).collect()
    }
}

/// Probability vector over a finite state space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidModel("empty probability vector".into()));
        }
        if p.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(Error::InvalidModel(
                "negative or non-finite probability".into(),
            ));
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::InvalidModel(format!("probabilities sum to {s}")));
        }
        Ok(Self(p))
    }

    pub fn uniform(dim: usize) -> Self {
        Self(vec![1.0 / dim as f64; dim])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, v: &[f64]) -> f64 {
        self.0.iter().zip(v).map(|(a, b)| a * b).sum()
    }
}

impl std::ops::Deref for ProbabilityVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Solves `νᵀP = νᵀ`, `Σν = 1` by replacing the last row of `I − Pᵀ` with
/// `eᵀ` and factorizing with partial pivoting.
pub fn invariant_distribution(p: &StochasticMatrix) -> Result<ProbabilityVector> {
    let d = p.dim();
    let mut g = DMatrix::<f64>::from_fn(d, d, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        delta - p.get(j, i)
    });
    for j in 0..d {
        g[(d - 1, j)] = 1.0;
    }
    let lu = g.lu();
    let u = lu.u();
    let diag: Vec<f64> = (0..d).map(|i| u[(i, i)].abs()).collect();
    let scale = diag.iter().cloned().fold(0.0, f64::max).max(1.0);
    if diag.iter().any(|&x| x <= SINGULAR_TOL * scale) {
        return Err(Error::NonErgodic);
    }
    let mut rhs = DVector::<f64>::zeros(d);
    rhs[d - 1] = 1.0;
    let x = lu.solve(&rhs).ok_or(Error::NonErgodic)?;
    // rounding can leave tiny negatives on nearly transient states
    let mut nu: Vec<f64> = x.iter().map(|&v| v.max(0.0)).collect();
    let s: f64 = nu.iter().sum();
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::NonErgodic);
    }
    nu.iter_mut().for_each(|v| *v /= s);
    Ok(ProbabilityVector(nu))
}

/// The deviation matrix `R̃ = R − e·νᵀ` applied by matrix-vector products.
#[derive(Debug, Clone)]
pub struct DeviationSeries {
    base: StochasticMatrix,
    nu: ProbabilityVector,
    pub max_terms: usize,
    pub tol: f64,
}

impl DeviationSeries {
    pub fn new(base: StochasticMatrix, tol: f64) -> Result<Self> {
        let nu = invariant_distribution(&base)?;
        Ok(Self::with_invariant(base, nu, tol))
    }

    pub fn with_invariant(base: StochasticMatrix, nu: ProbabilityVector, tol: f64) -> Self {
        Self {
            base,
            nu,
            max_terms: DEFAULT_MAX_TERMS,
            tol,
        }
    }

    pub fn base(&self) -> &StochasticMatrix {
        &self.base
    }

    pub fn invariant(&self) -> &ProbabilityVector {
        &self.nu
    }

    /// `R̃·v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mean = self.nu.dot(v);
        let mut out = self.base.apply(v);
        out.iter_mut().for_each(|o| *o -= mean);
        out
    }

    /// `R̃ⁿ·v` by repeated application.
    pub fn power_apply(&self, n: usize, v: &[f64]) -> Vec<f64> {
        (0..n).fold(v.to_vec(), |acc, _| self.apply(&acc))
    }

    /// Dense `R̃` for tests and diagnostics.
    pub fn dense(&self) -> DMatrix<f64> {
        let d = self.base.dim();
        DMatrix::from_fn(d, d, |i, j| self.base.get(i, j) - self.nu[j])
    }
}

/// Free-function form of [`DeviationSeries::power_apply`].
pub fn deviation_power_apply(series: &DeviationSeries, n: usize, v: &[f64]) -> Vec<f64> {
    series.power_apply(n, v)
}

/// Sums of the series `Σ_n R̃ⁿ c` with `c = g − (νᵀg)e`, together with the
/// discount deficits `Σ_n (1 − λⁿ) R̃ⁿ c` for each requested `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSums {
    pub full: Vec<f64>,
    pub deficits: Vec<Vec<f64>>,
    pub terms: usize,
    pub ratio: f64,
}

/// Evaluates [`SeriesSums`] with the adaptive truncation rule: stop once the
/// current term's max-norm is at most `tol·(1 − r̂)`, where `r̂` is a
/// conservative running estimate of the geometric decay rate.
pub fn discounted_series(
    series: &DeviationSeries,
    g: &[f64],
    discounts: &[f64],
) -> Result<SeriesSums> {
    let d = series.base.dim();
    if g.len() != d {
        return Err(Error::Dimension {
            expected: d,
            got: g.len(),
        });
    }
    let mean = series.nu.dot(g);
    let mut term: Vec<f64> = g.iter().map(|x| x - mean).collect();
    let mut full = vec![0.0; d];
    let mut deficits = vec![vec![0.0; d]; discounts.len()];
    let mut powers = vec![1.0; discounts.len()];
    let first = max_norm(&term);
    let mut prev = first;
    let mut ratio = 0.0;
    let tol = series.tol;
    for n in 0..series.max_terms {
        let size = max_norm(&term);
        if n > 0 {
            let last = if prev > 0.0 { size / prev } else { 0.0 };
            let average = if first > 0.0 {
                (size / first).powf(1.0 / n as f64)
            } else {
                0.0
            };
            ratio = last.max(average);
        }
        for (f, t) in full.iter_mut().zip(&term) {
            *f += t;
        }
        for ((acc, pw), &lambda) in deficits.iter_mut().zip(powers.iter_mut()).zip(discounts) {
            let w = 1.0 - *pw;
            if w != 0.0 {
                for (a, t) in acc.iter_mut().zip(&term) {
                    *a += w * t;
                }
            }
            *pw *= lambda;
        }
        if size == 0.0 || (n > 0 && ratio < 1.0 && size <= tol * (1.0 - ratio)) {
            return Ok(SeriesSums {
                full,
                deficits,
                terms: n + 1,
                ratio,
            });
        }
        prev = size;
        term = series.apply(&term);
    }
    Err(Error::SlowMixing {
        ratio,
        terms: series.max_terms,
    })
}

/// Solves `(I − P)h = g − (νᵀg)e` via `h = Σ_n R̃ⁿ(g − (νᵀg)e)`.
pub fn poisson_solve(
    p: &StochasticMatrix,
    nu: &ProbabilityVector,
    g: &[f64],
    tol: f64,
) -> Result<Vec<f64>> {
    let series = DeviationSeries::with_invariant(p.clone(), nu.clone(), tol);
    Ok(discounted_series(&series, g, &[])?.full)
}

/// Power-iteration estimate of the subdominant eigenvalue modulus of `P`.
pub fn ergodicity_margin(p: &StochasticMatrix) -> Result<f64> {
    let series = DeviationSeries::new(p.clone(), 0.0)?;
    let d = p.dim();
    // fixed irregular start vector so the estimate is deterministic
    let mut v: Vec<f64> = (0..d)
        .map(|i| ((i as f64 + 1.0) * 0.754_877_666_246_692_7).fract() - 0.5)
        .collect();
    const BURN: usize = 200;
    const MEASURE: usize = 400;
    let mut log_growth = 0.0;
    for k in 0..BURN + MEASURE {
        v = series.apply(&v);
        let n = crate::stats::norm2(&v);
        if n == 0.0 || !n.is_finite() {
            return Ok(0.0);
        }
        if k >= BURN {
            log_growth += n.ln();
        }
        v.iter_mut().for_each(|x| *x /= n);
    }
    Ok((log_growth / MEASURE as f64).exp().min(1.0))
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two_state() -> StochasticMatrix {
        StochasticMatrix::new(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap()
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(StochasticMatrix::new(vec![vec![0.5, 0.6], vec![0.5, 0.5]]).is_err());
        assert!(StochasticMatrix::new(vec![vec![1.5, -0.5], vec![0.5, 0.5]]).is_err());
        assert!(StochasticMatrix::new(vec![vec![1.0]; 2]).is_err());
        assert!(ProbabilityVector::new(vec![0.3, 0.3]).is_err());
    }

    #[test]
    fn invariant_examples() {
        let sym = StochasticMatrix::new(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let nu = invariant_distribution(&sym).unwrap();
        assert_abs_diff_eq!(nu[0], 0.5, epsilon = 1e-15);

        let nu = invariant_distribution(&two_state()).unwrap();
        assert_abs_diff_eq!(nu[0], 2.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(nu[1], 1.0 / 3.0, epsilon = 1e-14);
        // power iteration cross-check
        let mut v = vec![1.0, 0.0];
        for _ in 0..500 {
            v = two_state().apply_left(&v);
        }
        assert_abs_diff_eq!(v[0], nu[0], epsilon = 1e-12);

        assert!(matches!(
            invariant_distribution(&StochasticMatrix::identity(3)),
            Err(Error::NonErgodic)
        ));
    }

    #[test]
    fn deviation_examples() {
        let s = DeviationSeries::new(two_state(), 1e-12).unwrap();
        assert_eq!(s.power_apply(0, &[0.3, -2.0]), vec![0.3, -2.0]);
        let z = s.power_apply(1, &[1.0, 1.0]);
        assert!(z.iter().all(|x| x.abs() < 1e-15));

        let direct = s.apply(&[1.0, 0.0]);
        let r = two_state().to_nalgebra();
        let nu = s.invariant();
        let alt =
            DMatrix::from_fn(2, 2, |i, j| r[(i, j)] - nu[j]) * DVector::from_vec(vec![1.0, 0.0]);
        for i in 0..2 {
            assert_abs_diff_eq!(direct[i], alt[i], epsilon = 1e-12);
        }
        // νᵀR̃ = 0 and R̃e = 0
        let dense = s.dense();
        for j in 0..2 {
            let col: f64 = (0..2).map(|i| nu[i] * dense[(i, j)]).sum();
            let row: f64 = (0..2).map(|k| dense[(j, k)]).sum();
            assert!(col.abs() < 1e-12 && row.abs() < 1e-12);
        }
    }

    #[test]
    fn poisson_examples() {
        let p = two_state();
        let nu = invariant_distribution(&p).unwrap();
        let h = poisson_solve(&p, &nu, &[4.0, 4.0], 1e-12).unwrap();
        assert!(h.iter().all(|x| *x == 0.0));

        let g = [1.0, 0.0];
        let h = poisson_solve(&p, &nu, &g, 1e-12).unwrap();
        let ph = p.apply(&h);
        for i in 0..2 {
            let lhs = h[i] - ph[i];
            let rhs = g[i] - 2.0 / 3.0;
            assert!((lhs - rhs).abs() <= 1e-9);
        }

        // right eigenvector of R̃ for 0.7 is (1, −2) up to scale
        let v = [1.0 / 3.0, -2.0 / 3.0];
        let h = poisson_solve(&p, &nu, &v, 1e-13).unwrap();
        for i in 0..2 {
            assert_abs_diff_eq!(h[i], v[i] / 0.3, epsilon = 1e-11);
        }
    }

    #[test]
    fn slow_mixing_is_reported() {
        let eps = 1e-9;
        let p = StochasticMatrix::new(vec![vec![1.0 - eps, eps], vec![eps, 1.0 - eps]]).unwrap();
        let mut s = DeviationSeries::new(p, 1e-12).unwrap();
        s.max_terms = 1000;
        let err = discounted_series(&s, &[1.0, 0.0], &[]).unwrap_err();
        assert!(matches!(err, Error::SlowMixing { .. }));
    }

    #[test]
    fn discount_deficits_match_direct_sums() {
        let p = two_state();
        let s = DeviationSeries::new(p, 1e-14).unwrap();
        let sums = discounted_series(&s, &[1.0, 0.0], &[0.0, 0.5]).unwrap();
        // centered input is an eigenvector: c = (1/3, −2/3), R̃ⁿc = 0.7ⁿc
        let c = [1.0 / 3.0, -2.0 / 3.0];
        let full = 1.0 / 0.3;
        let lam0 = full - 1.0;
        let lam5 = full - 1.0 / (1.0 - 0.35);
        for i in 0..2 {
            assert_abs_diff_eq!(sums.full[i], full * c[i], epsilon = 1e-12);
            assert_abs_diff_eq!(sums.deficits[0][i], lam0 * c[i], epsilon = 1e-12);
            assert_abs_diff_eq!(sums.deficits[1][i], lam5 * c[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn margin_examples() {
        assert_abs_diff_eq!(
            ergodicity_margin(&two_state()).unwrap(),
            0.7,
            epsilon = 1e-9
        );
        let rank_one = StochasticMatrix::new(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert_eq!(ergodicity_margin(&rank_one).unwrap(), 0.0);
        let same = StochasticMatrix::new(vec![vec![0.2, 0.3, 0.5]; 3]).unwrap();
        assert!(ergodicity_margin(&same).unwrap() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let p = two_state();
        let text = serde_json::to_string(&p).unwrap();
        let back: StochasticMatrix = serde_json::from_str(&text).unwrap();
        assert_eq!(p, back);
        assert!(serde_json::from_str::<StochasticMatrix>("[[0.5,0.6],[0.5,0.5]]").is_err());
    }
}
