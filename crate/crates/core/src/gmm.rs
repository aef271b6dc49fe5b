//! Finite Gaussian mixtures over the projected plane: validated parameters,
//! density evaluation, seeded sampling, and a plain EM fitter used as the
//! fixed-size baseline model.

use crate::error::{Error, Result};
use crate::linalg::{Mat2, Vec2};
use crate::seeding::rng_from_seed;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub const LOG_TWO_PI: f64 = 1.837_877_066_409_345_3;

/// Absolute tolerance for symmetry of a precision matrix.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Absolute tolerance for mixture weights summing to one. Loose enough to
/// accept weights that were serialized at 9 significant digits and read back.
pub const WEIGHT_SUM_TOL: f64 = 1e-6;

/// Ridge added to every covariance in the EM M-step.
pub const COV_REGULARIZER: f64 = 1e-6;

pub const DEFAULT_EM_TOL: f64 = 1e-4;
pub const DEFAULT_EM_MAX_ITER: usize = 200;

/// A single bivariate Gaussian, parameterized by mean and precision
/// (inverse covariance). The precision must be symmetric (within 1e-9)
/// and positive definite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawComponent")]
pub struct GaussianComponent {
    mean: Vec2,
    precision: Mat2,
}

#[derive(Deserialize)]
struct RawComponent {
    mean: Vec2,
    precision: Mat2,
}

impl TryFrom<RawComponent> for GaussianComponent {
    type Error = Error;
    fn try_from(raw: RawComponent) -> Result<GaussianComponent> {
        GaussianComponent::new(raw.mean, raw.precision)
    }
}

impl GaussianComponent {
    pub fn new(mean: Vec2, precision: Mat2) -> Result<GaussianComponent> {
        if !mean.is_finite() || !precision.is_finite() {
            return Err(Error::InvalidInput(
                "component parameters must be finite".into(),
            ));
        }
        if !precision.is_symmetric(SYMMETRY_TOL) {
            return Err(Error::InvalidInput(format!(
                "precision must be symmetric within {SYMMETRY_TOL:e}"
            )));
        }
        if !precision.is_positive_definite() {
            return Err(Error::InvalidInput(
                "precision must be positive definite".into(),
            ));
        }
        Ok(GaussianComponent { mean, precision })
    }

    /// Convenience constructor from a covariance matrix.
    pub fn from_covariance(mean: Vec2, covariance: Mat2) -> Result<GaussianComponent> {
        let precision = covariance
            .inverse()
            .ok_or_else(|| Error::InvalidInput("covariance is singular".into()))?;
        GaussianComponent::new(mean, precision)
    }

    pub fn mean(&self) -> Vec2 {
        self.mean
    }

    pub fn precision(&self) -> Mat2 {
        self.precision
    }

    pub fn covariance(&self) -> Mat2 {
        // Invariant: precision is positive definite, hence invertible.
        self.precision.inverse().expect("positive definite precision")
    }

    pub fn log_density(&self, x: Vec2) -> f64 {
        let d = x - self.mean;
        0.5 * self.precision.det().ln() - LOG_TWO_PI - 0.5 * self.precision.quad_form(d)
    }
}

/// A weighted Gaussian mixture. Weights are each in (0, 1] and sum to one
/// within `WEIGHT_SUM_TOL`; the component list is never empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMixture")]
pub struct MixtureDensity {
    weights: Vec<f64>,
    components: Vec<GaussianComponent>,
}

#[derive(Deserialize)]
struct RawMixture {
    weights: Vec<f64>,
    components: Vec<GaussianComponent>,
}

impl TryFrom<RawMixture> for MixtureDensity {
    type Error = Error;
    fn try_from(raw: RawMixture) -> Result<MixtureDensity> {
        MixtureDensity::new(raw.weights, raw.components)
    }
}

impl MixtureDensity {
    pub fn new(weights: Vec<f64>, components: Vec<GaussianComponent>) -> Result<MixtureDensity> {
        if components.is_empty() {
            return Err(Error::InvalidInput("mixture needs at least one component".into()));
        }
        if weights.len() != components.len() {
            return Err(Error::InvalidInput(format!(
                "{} weights for {} components",
                weights.len(),
                components.len()
            )));
        }
        if weights.iter().any(|&w| !(w > 0.0 && w <= 1.0)) {
            return Err(Error::InvalidInput("weights must lie in (0, 1]".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidInput(format!(
                "weights sum to {sum}, expected 1 within {WEIGHT_SUM_TOL:e}"
            )));
        }
        Ok(MixtureDensity { weights, components })
    }

    pub fn single(component: GaussianComponent) -> MixtureDensity {
        MixtureDensity {
            weights: vec![1.0],
            components: vec![component],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    /// Log of the mixture density at `x`, evaluated with log-sum-exp so
    /// points far from every component stay finite as long as possible.
    pub fn log_density(&self, x: Vec2) -> f64 {
        let mut terms = [0.0f64; 8];
        let mut heap;
        let buf: &mut [f64] = if self.weights.len() <= 8 {
            &mut terms[..self.weights.len()]
        } else {
            heap = vec![0.0; self.weights.len()];
            &mut heap
        };
        let mut max = f64::NEG_INFINITY;
        for (slot, (w, c)) in buf.iter_mut().zip(self.weights.iter().zip(&self.components)) {
            *slot = w.ln() + c.log_density(x);
            if *slot > max {
                max = *slot;
            }
        }
        if max == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let sum: f64 = buf.iter().map(|t| (t - max).exp()).sum();
        max + sum.ln()
    }

    /// Average log-density over a non-empty point set.
    pub fn mean_log_likelihood(&self, xs: &[Vec2]) -> Result<f64> {
        if xs.is_empty() {
            return Err(Error::TooFewPoints { got: 0, need: 1 });
        }
        let total: f64 = xs.iter().map(|&x| self.log_density(x)).sum();
        Ok(total / xs.len() as f64)
    }

    /// Draw `n` points: a component index from the weights, then a Gaussian
    /// draw from that component. Identical seeds give identical output.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<Vec2>> {
        let chols: Vec<Mat2> = self
            .components
            .iter()
            .map(|c| {
                c.covariance().cholesky().ok_or(Error::Numerical {
                    iteration: 0,
                    detail: "covariance lost positive definiteness".into(),
                })
            })
            .collect::<Result<_>>()?;
        let mut rng = rng_from_seed(seed);
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let u: f64 = rng.random();
            let mut k = self.weights.len() - 1;
            let mut acc = 0.0;
            for (i, w) in self.weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    k = i;
                    break;
                }
            }
            let z = Vec2::new(
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
            );
            out.push(self.components[k].mean() + chols[k].mul_vec(z));
        }
        Ok(out)
    }
}

/// Per-point posterior assignment probabilities; each row sums to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Responsibilities {
    rows: Vec<Vec<f64>>,
}

impl Responsibilities {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Responsibilities> {
        if rows.is_empty() {
            return Err(Error::InvalidInput("no responsibility rows".into()));
        }
        let k = rows[0].len();
        for row in &rows {
            if row.len() != k || k == 0 {
                return Err(Error::InvalidInput("ragged responsibility rows".into()));
            }
            if row.iter().any(|&r| !(0.0..=1.0).contains(&r)) {
                return Err(Error::InvalidInput("responsibilities must lie in [0, 1]".into()));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
                return Err(Error::InvalidInput(format!(
                    "responsibility row sums to {sum}"
                )));
            }
        }
        Ok(Responsibilities { rows })
    }

    pub fn n_points(&self) -> usize {
        self.rows.len()
    }

    pub fn n_components(&self) -> usize {
        self.rows[0].len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Column sums: the effective point count claimed by each component.
    pub fn counts(&self) -> Vec<f64> {
        let mut n = vec![0.0; self.n_components()];
        for row in &self.rows {
            for (nk, r) in n.iter_mut().zip(row) {
                *nk += r;
            }
        }
        n
    }
}

/// Result of an EM fit.
#[derive(Debug, Clone)]
pub struct EmFit {
    pub mixture: MixtureDensity,
    pub responsibilities: Responsibilities,
    /// Mean log-likelihood after each iteration; non-decreasing within 1e-8.
    pub log_likelihood_trace: Vec<f64>,
    pub iterations: usize,
}

/// Fit a K-component mixture by expectation-maximization.
///
/// Means are seeded by farthest-point traversal (first seed drawn from
/// `seed`, each next seed the point farthest from all chosen so far), the
/// initial assignment is hard nearest-seed, and every M-step covariance gets
/// a `COV_REGULARIZER * I` ridge. If the points support fewer than `k`
/// distinct locations, or a component starves, the fit returns fewer than
/// `k` components rather than failing.
pub fn fit_em(
    xs: &[Vec2],
    k: usize,
    seed: u64,
    tol: f64,
    max_iter: usize,
) -> Result<EmFit> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    if xs.is_empty() {
        return Err(Error::TooFewPoints { got: 0, need: 1 });
    }
    if !tol.is_finite() || tol <= 0.0 || max_iter == 0 {
        return Err(Error::InvalidInput("tol must be positive, max_iter nonzero".into()));
    }

    let seeds = farthest_point_seeds(xs, k, seed);
    // Hard assignment to the nearest seed; ties go to the lowest index.
    let mut resp: Vec<Vec<f64>> = xs
        .iter()
        .map(|&x| {
            let nearest = seeds
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| {
                    let da = (x - **a).norm_sq();
                    let db = (x - **b).norm_sq();
                    da.partial_cmp(&db).expect("finite distances")
                })
                .map(|(i, _)| i)
                .expect("at least one seed");
            let mut row = vec![0.0; seeds.len()];
            row[nearest] = 1.0;
            row
        })
        .collect();

    let mut trace = Vec::new();
    let mut mixture = None;
    let mut iterations = 0;
    for iter in 1..=max_iter {
        let m = m_step(xs, &resp)?;
        let (r, mll) = e_step(xs, &m);
        resp = r;
        mixture = Some(m);
        trace.push(mll);
        iterations = iter;
        if iter >= 2 && (trace[iter - 1] - trace[iter - 2]).abs() < tol {
            break;
        }
    }

    Ok(EmFit {
        mixture: mixture.expect("at least one iteration"),
        responsibilities: Responsibilities::new(resp)?,
        log_likelihood_trace: trace,
        iterations,
    })
}

/// Farthest-point seed selection; returns at most `k` distinct points.
pub(crate) fn farthest_point_seeds(xs: &[Vec2], k: usize, seed: u64) -> Vec<Vec2> {
    let mut rng = rng_from_seed(seed);
    let first = xs[rng.random_range(0..xs.len())];
    let mut seeds = vec![first];
    let mut min_dist: Vec<f64> = xs.iter().map(|&x| (x - first).norm_sq()).collect();
    while seeds.len() < k {
        let (best, &dist) = min_dist
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| a.partial_cmp(b).expect("finite distances"))
            .expect("non-empty points");
        if dist == 0.0 {
            break; // no distinct point left to seed from
        }
        let next = xs[best];
        seeds.push(next);
        for (m, &x) in min_dist.iter_mut().zip(xs) {
            *m = m.min((x - next).norm_sq());
        }
    }
    seeds
}

/// Weighted moment update. Components whose effective count vanishes are
/// dropped so weights stay strictly positive.
fn m_step(xs: &[Vec2], resp: &[Vec<f64>]) -> Result<MixtureDensity> {
    let k = resp[0].len();
    let n = xs.len() as f64;
    let mut counts = vec![0.0; k];
    for row in resp {
        for (c, r) in counts.iter_mut().zip(row) {
            *c += r;
        }
    }

    let mut weights = Vec::new();
    let mut components = Vec::new();
    for j in 0..k {
        let nk = counts[j];
        if nk < 1e-9 * n {
            continue; // starved component: its density contribution is noise
        }
        let mut mean = Vec2::ZERO;
        for (row, &x) in resp.iter().zip(xs) {
            mean = mean + x * row[j];
        }
        mean = mean * (1.0 / nk);
        let mut cov = Mat2::ZERO;
        for (row, &x) in resp.iter().zip(xs) {
            let d = x - mean;
            cov = cov.add(&d.outer(d).scale(row[j]));
        }
        cov = cov.scale(1.0 / nk).add(&Mat2::scaled_identity(COV_REGULARIZER));
        weights.push(nk / n);
        components.push(GaussianComponent::from_covariance(mean, cov)?);
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    MixtureDensity::new(weights, components)
}

/// Posterior responsibilities and mean log-likelihood under `mixture`.
fn e_step(xs: &[Vec2], mixture: &MixtureDensity) -> (Vec<Vec<f64>>, f64) {
    let mut total = 0.0;
    let rows = xs
        .iter()
        .map(|&x| {
            let mut row: Vec<f64> = mixture
                .weights()
                .iter()
                .zip(mixture.components())
                .map(|(w, c)| w.ln() + c.log_density(x))
                .collect();
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for t in &mut row {
                *t = (*t - max).exp();
                sum += *t;
            }
            for t in &mut row {
                *t /= sum;
            }
            total += max + sum.ln();
            row
        })
        .collect();
    (rows, total / xs.len() as f64)
}
