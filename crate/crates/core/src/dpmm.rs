//! Nonparametric daily density model: a stick-breaking mixture truncated at
//! `T` components, with a Gaussian–Wishart base measure, fitted by
//! coordinate-ascent variational inference. The number of occupied
//! components is inferred from the data; the truncation level only has to
//! be generous.
//!
//! Factorized posterior:
//!   q(v, mu, Lambda, z) = prod_j Beta(v_j | a_j, b_j)
//!                       * prod_k N(mu_k | m_k, (beta_k Lambda_k)^-1) Wishart(Lambda_k | W_k, nu_k)
//!                       * prod_n Cat(z_n | r_n)
//! with `T - 1` stick fractions (the last stick takes the remainder).

// Loops below walk several same-length parameter arrays by component index.
#![allow(clippy::needless_range_loop)]

use crate::error::{Error, Result};
use crate::gmm::{GaussianComponent, MixtureDensity, Responsibilities, LOG_TWO_PI};
use crate::linalg::{Mat2, Vec2};
use crate::seeding::{mix_seed, point_salt, rng_from_seed};
use crate::MIN_FIT_POINTS;
use rand::Rng;
use serde::Serialize;
use statrs::function::gamma::{digamma, ln_gamma};

pub const DEFAULT_CONCENTRATION: f64 = 1.0;
pub const DEFAULT_TRUNCATION: usize = 20;
pub const DEFAULT_VI_TOL: f64 = 1e-5;
pub const DEFAULT_VI_MAX_ITER: usize = 500;
pub const DEFAULT_WEIGHT_FLOOR: f64 = 0.01;

/// Ridge added to the data covariance when deriving a base measure, so that
/// degenerate inputs (e.g. every point identical) still yield a proper prior.
const DATA_COV_RIDGE: f64 = 1e-6;

/// Gaussian–Wishart base measure over component means and precisions.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussWishartPrior {
    /// Prior mean location.
    pub mean: Vec2,
    /// Pseudo-count scaling the mean's precision (beta_0).
    pub mean_scale: f64,
    /// Wishart scale matrix (W_0).
    pub scale: Mat2,
    /// Wishart degrees of freedom (nu_0), must exceed dimension - 1.
    pub dof: f64,
}

impl GaussWishartPrior {
    pub fn validate(&self) -> Result<()> {
        if !self.mean.is_finite() {
            return Err(Error::InvalidInput("prior mean must be finite".into()));
        }
        if !(self.mean_scale > 0.0 && self.mean_scale.is_finite()) {
            return Err(Error::InvalidInput("mean_scale must be positive".into()));
        }
        if !(self.dof > 1.0 && self.dof.is_finite()) {
            return Err(Error::InvalidInput(
                "dof must exceed 1 for a 2-D Wishart".into(),
            ));
        }
        if !self.scale.is_symmetric(1e-9) || !self.scale.is_positive_definite() {
            return Err(Error::InvalidInput(
                "scale must be symmetric positive definite".into(),
            ));
        }
        Ok(())
    }
}

/// Prior for the whole model: stick-breaking concentration plus the base
/// measure components are drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct DpPrior {
    concentration: f64,
    base: GaussWishartPrior,
}

impl DpPrior {
    pub fn new(concentration: f64, base: GaussWishartPrior) -> Result<DpPrior> {
        if !(concentration > 0.0 && concentration.is_finite()) {
            return Err(Error::InvalidInput("concentration must be positive".into()));
        }
        base.validate()?;
        Ok(DpPrior { concentration, base })
    }

    /// Data-driven base measure: center on the sample mean, keep the mean
    /// prior weak (beta_0 = 1e-3), and scale the Wishart so the expected
    /// precision matches the (ridged) sample covariance:
    /// `W_0 = (nu_0 * Sigma_data)^-1` with `nu_0 = 3`.
    pub fn from_data(xs: &[Vec2], concentration: f64) -> Result<DpPrior> {
        if xs.is_empty() {
            return Err(Error::TooFewPoints { got: 0, need: 1 });
        }
        let n = xs.len() as f64;
        let mean = xs.iter().fold(Vec2::ZERO, |a, &x| a + x) * (1.0 / n);
        let mut cov = Mat2::ZERO;
        for &x in xs {
            let d = x - mean;
            cov = cov.add(&d.outer(d));
        }
        cov = cov
            .scale(1.0 / n)
            .add(&Mat2::scaled_identity(DATA_COV_RIDGE));
        let dof = 3.0;
        let scale = cov
            .scale(dof)
            .inverse()
            .ok_or_else(|| Error::InvalidInput("data covariance is singular".into()))?;
        DpPrior::new(
            concentration,
            GaussWishartPrior {
                mean,
                mean_scale: 1e-3,
                scale,
                dof,
            },
        )
    }

    pub fn concentration(&self) -> f64 {
        self.concentration
    }

    pub fn base(&self) -> &GaussWishartPrior {
        &self.base
    }
}

/// Settings for the variational fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationConfig {
    level: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
}

impl TruncationConfig {
    pub fn new(level: usize, tol: f64, max_iter: usize, seed: u64) -> Result<TruncationConfig> {
        if level < 2 {
            return Err(Error::InvalidInput("truncation level must be at least 2".into()));
        }
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::InvalidInput("tol must be positive".into()));
        }
        if max_iter == 0 {
            return Err(Error::InvalidInput("max_iter must be nonzero".into()));
        }
        Ok(TruncationConfig {
            level,
            tol,
            max_iter,
            seed,
        })
    }

    /// Default truncation, tolerance and iteration budget with a caller seed.
    pub fn with_seed(seed: u64) -> TruncationConfig {
        TruncationConfig {
            level: DEFAULT_TRUNCATION,
            tol: DEFAULT_VI_TOL,
            max_iter: DEFAULT_VI_MAX_ITER,
            seed,
        }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn max_iter(&self) -> usize {
        self.max_iter
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Fitted variational posterior over sticks, component parameters, and
/// assignments.
#[derive(Debug, Clone, Serialize)]
pub struct VariationalPosterior {
    stick_a: Vec<f64>,
    stick_b: Vec<f64>,
    means: Vec<Vec2>,
    mean_scales: Vec<f64>,
    scales: Vec<Mat2>,
    dofs: Vec<f64>,
    responsibilities: Responsibilities,
    elbo_trace: Vec<f64>,
    iterations: usize,
}

impl VariationalPosterior {
    pub fn truncation(&self) -> usize {
        self.means.len()
    }

    /// Posterior Beta parameters of the `T - 1` stick fractions.
    pub fn sticks(&self) -> (&[f64], &[f64]) {
        (&self.stick_a, &self.stick_b)
    }

    pub fn component_means(&self) -> &[Vec2] {
        &self.means
    }

    /// Scale of each mean factor (`beta_k` in the Gaussian–Wishart family).
    pub fn mean_scales(&self) -> &[f64] {
        &self.mean_scales
    }

    pub fn scale_matrices(&self) -> &[Mat2] {
        &self.scales
    }

    pub fn degrees_of_freedom(&self) -> &[f64] {
        &self.dofs
    }

    pub fn responsibilities(&self) -> &Responsibilities {
        &self.responsibilities
    }

    pub fn elbo_trace(&self) -> &[f64] {
        &self.elbo_trace
    }

    pub fn final_elbo(&self) -> f64 {
        *self.elbo_trace.last().expect("non-empty trace")
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Mixture weights implied by the expected stick fractions
    /// `E[v_j] = a_j / (a_j + b_j)`.
    pub fn expected_weights(&self) -> Vec<f64> {
        let fractions: Vec<f64> = self
            .stick_a
            .iter()
            .zip(&self.stick_b)
            .map(|(a, b)| a / (a + b))
            .collect();
        stick_lengths_to_weights(&fractions).expect("posterior fractions lie in [0, 1]")
    }

    /// Collapse the posterior to a plain mixture: keep components whose
    /// expected weight clears `weight_floor`, renormalize, and take each
    /// survivor's posterior mean location with its expected precision
    /// `nu_k * W_k`. Errors if the floor removes everything.
    pub fn extract_mixture(&self, weight_floor: f64) -> Result<MixtureDensity> {
        let kept = floor_weights(&self.expected_weights(), weight_floor)?;
        let mut weights = Vec::with_capacity(kept.len());
        let mut components = Vec::with_capacity(kept.len());
        for (k, w) in kept {
            weights.push(w);
            components.push(GaussianComponent::new(
                self.means[k],
                self.scales[k].scale(self.dofs[k]),
            )?);
        }
        MixtureDensity::new(weights, components)
    }
}

/// Map `T - 1` stick fractions in [0, 1] to `T` weights: each stick takes
/// its fraction of whatever remains, and the final weight is the leftover.
pub fn stick_lengths_to_weights(sticks: &[f64]) -> Result<Vec<f64>> {
    if sticks.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::InvalidInput("stick fractions must lie in [0, 1]".into()));
    }
    let mut weights = Vec::with_capacity(sticks.len() + 1);
    let mut remaining = 1.0;
    for &v in sticks {
        weights.push(v * remaining);
        remaining *= 1.0 - v;
    }
    weights.push(remaining);
    Ok(weights)
}

/// Keep `(index, weight)` pairs whose weight is at least `floor`,
/// renormalized to sum to one.
fn floor_weights(weights: &[f64], floor: f64) -> Result<Vec<(usize, f64)>> {
    if !(0.0..1.0).contains(&floor) {
        return Err(Error::InvalidInput("weight floor must lie in [0, 1)".into()));
    }
    let kept: Vec<(usize, f64)> = weights
        .iter()
        .enumerate()
        .filter(|(_, &w)| w >= floor && w > 0.0)
        .map(|(i, &w)| (i, w))
        .collect();
    if kept.is_empty() {
        return Err(Error::DegenerateMixture(format!(
            "no component weight reaches the floor {floor}"
        )));
    }
    let total: f64 = kept.iter().map(|(_, w)| w).sum();
    Ok(kept.into_iter().map(|(i, w)| (i, w / total)).collect())
}

/// Per-component sufficient statistics of a responsibility matrix.
struct SuffStats {
    counts: Vec<f64>,
    means: Vec<Vec2>,
    scatters: Vec<Mat2>,
}

fn sufficient_stats(xs: &[Vec2], resp: &[Vec<f64>], fallback_mean: Vec2) -> SuffStats {
    let t = resp[0].len();
    let mut counts = vec![0.0; t];
    for row in resp {
        for (c, r) in counts.iter_mut().zip(row) {
            *c += r;
        }
    }
    let mut means = vec![Vec2::ZERO; t];
    for (row, &x) in resp.iter().zip(xs) {
        for (m, r) in means.iter_mut().zip(row) {
            *m = *m + x * *r;
        }
    }
    for (m, &c) in means.iter_mut().zip(&counts) {
        if c > 1e-12 {
            *m = *m * (1.0 / c);
        } else {
            *m = fallback_mean;
        }
    }
    let mut scatters = vec![Mat2::ZERO; t];
    for (row, &x) in resp.iter().zip(xs) {
        for ((s, r), m) in scatters.iter_mut().zip(row).zip(&means) {
            let d = x - *m;
            *s = s.add(&d.outer(d).scale(*r));
        }
    }
    for (s, &c) in scatters.iter_mut().zip(&counts) {
        if c > 1e-12 {
            *s = s.scale(1.0 / c);
        } else {
            *s = Mat2::ZERO;
        }
    }
    SuffStats {
        counts,
        means,
        scatters,
    }
}

/// Working copy of the global variational parameters.
struct Globals {
    stick_a: Vec<f64>,
    stick_b: Vec<f64>,
    means: Vec<Vec2>,
    mean_scales: Vec<f64>,
    scales: Vec<Mat2>,
    dofs: Vec<f64>,
}

/// `E[ln pi_k]` for all components under the stick posterior.
fn expected_log_weights(stick_a: &[f64], stick_b: &[f64]) -> Vec<f64> {
    let t = stick_a.len() + 1;
    let mut out = Vec::with_capacity(t);
    let mut tail = 0.0; // running sum of E[ln(1 - v_j)] for j < k
    for k in 0..t {
        if k < t - 1 {
            let (a, b) = (stick_a[k], stick_b[k]);
            let psi_ab = digamma(a + b);
            out.push(digamma(a) - psi_ab + tail);
            tail += digamma(b) - psi_ab;
        } else {
            out.push(tail); // last component keeps the whole remainder
        }
    }
    out
}

/// `E[ln det Lambda_k]` under `Wishart(W, nu)` in two dimensions.
fn expected_log_det(scale: &Mat2, dof: f64) -> f64 {
    digamma(0.5 * dof) + digamma(0.5 * (dof - 1.0)) + 2.0 * std::f64::consts::LN_2
        + scale.det().ln()
}

/// `ln B(W, nu)`: the log normalizer of a 2-D Wishart density.
fn ln_wishart_norm(scale: &Mat2, dof: f64) -> f64 {
    -0.5 * dof * scale.det().ln()
        - dof * std::f64::consts::LN_2
        - 0.5 * std::f64::consts::PI.ln()
        - ln_gamma(0.5 * dof)
        - ln_gamma(0.5 * (dof - 1.0))
}

/// Update the stick and Gaussian–Wishart factors from the current
/// responsibilities. Fails (with the sweep index) if a scale matrix comes
/// out non-positive-definite.
fn update_globals(
    prior: &DpPrior,
    stats: &SuffStats,
    iteration: usize,
) -> Result<Globals> {
    let t = stats.counts.len();
    let base = prior.base();
    let w0_inv = base
        .scale
        .inverse()
        .expect("validated prior scale is invertible");

    let mut stick_a = Vec::with_capacity(t - 1);
    let mut stick_b = Vec::with_capacity(t - 1);
    for j in 0..t - 1 {
        let tail: f64 = stats.counts[j + 1..].iter().sum();
        stick_a.push(1.0 + stats.counts[j]);
        stick_b.push(prior.concentration() + tail);
    }

    let mut means = Vec::with_capacity(t);
    let mut mean_scales = Vec::with_capacity(t);
    let mut scales = Vec::with_capacity(t);
    let mut dofs = Vec::with_capacity(t);
    for k in 0..t {
        let nk = stats.counts[k];
        let beta = base.mean_scale + nk;
        let m = (base.mean * base.mean_scale + stats.means[k] * nk) * (1.0 / beta);
        let shift = stats.means[k] - base.mean;
        let w_inv = w0_inv
            .add(&stats.scatters[k].scale(nk))
            .add(&shift.outer(shift).scale(base.mean_scale * nk / beta));
        let w = w_inv.inverse().ok_or_else(|| Error::Numerical {
            iteration,
            detail: format!("component {k} scale update is singular"),
        })?;
        if !w.is_positive_definite() {
            return Err(Error::Numerical {
                iteration,
                detail: format!("component {k} scale lost positive definiteness"),
            });
        }
        means.push(m);
        mean_scales.push(beta);
        scales.push(w);
        dofs.push(base.dof + nk);
    }
    Ok(Globals {
        stick_a,
        stick_b,
        means,
        mean_scales,
        scales,
        dofs,
    })
}

/// Responsibility update: softmax over expected log joint terms.
fn update_responsibilities(xs: &[Vec2], g: &Globals) -> Vec<Vec<f64>> {
    let t = g.means.len();
    let log_pi = expected_log_weights(&g.stick_a, &g.stick_b);
    let log_det: Vec<f64> = g
        .scales
        .iter()
        .zip(&g.dofs)
        .map(|(w, &nu)| expected_log_det(w, nu))
        .collect();
    xs.iter()
        .map(|&x| {
            let mut row = Vec::with_capacity(t);
            let mut max = f64::NEG_INFINITY;
            for k in 0..t {
                let d = x - g.means[k];
                let quad = 2.0 / g.mean_scales[k] + g.dofs[k] * g.scales[k].quad_form(d);
                let lr = log_pi[k] + 0.5 * log_det[k] - LOG_TWO_PI - 0.5 * quad;
                if lr > max {
                    max = lr;
                }
                row.push(lr);
            }
            let mut sum = 0.0;
            for r in &mut row {
                *r = (*r - max).exp();
                sum += *r;
            }
            for r in &mut row {
                *r /= sum;
            }
            row
        })
        .collect()
}

/// Evidence lower bound for the full factorized posterior. The terms, in
/// order: expected data log-likelihood, expected assignment prior, expected
/// stick prior, expected parameter prior, and the entropies of the
/// assignment, stick, and parameter factors (subtracted).
fn elbo_impl(xs: &[Vec2], prior: &DpPrior, g: &Globals, resp: &[Vec<f64>]) -> f64 {
    let t = g.means.len();
    let base = prior.base();
    let alpha = prior.concentration();
    let stats = sufficient_stats(xs, resp, base.mean);
    let w0_inv = base
        .scale
        .inverse()
        .expect("validated prior scale is invertible");

    let log_pi = expected_log_weights(&g.stick_a, &g.stick_b);
    let log_det: Vec<f64> = g
        .scales
        .iter()
        .zip(&g.dofs)
        .map(|(w, &nu)| expected_log_det(w, nu))
        .collect();

    // E[ln p(X | z, mu, Lambda)]
    let mut data_term = 0.0;
    for k in 0..t {
        let nk = stats.counts[k];
        if nk == 0.0 {
            continue;
        }
        let d = stats.means[k] - g.means[k];
        data_term += 0.5
            * nk
            * (log_det[k]
                - 2.0 / g.mean_scales[k]
                - g.dofs[k] * stats.scatters[k].mul_mat(&g.scales[k]).trace()
                - g.dofs[k] * g.scales[k].quad_form(d)
                - 2.0 * LOG_TWO_PI);
    }

    // E[ln p(z | v)]
    let assign_term: f64 = stats
        .counts
        .iter()
        .zip(&log_pi)
        .map(|(nk, lp)| nk * lp)
        .sum();

    // E[ln p(v | alpha)], v_j ~ Beta(1, alpha)
    let mut stick_prior_term = 0.0;
    for j in 0..t - 1 {
        let (a, b) = (g.stick_a[j], g.stick_b[j]);
        let e_log_1mv = digamma(b) - digamma(a + b);
        stick_prior_term += alpha.ln() + (alpha - 1.0) * e_log_1mv;
    }

    // E[ln p(mu, Lambda)]
    let mut param_prior_term = 0.0;
    for k in 0..t {
        let shift = g.means[k] - base.mean;
        param_prior_term += 0.5
            * (2.0 * (base.mean_scale.ln() - LOG_TWO_PI) + log_det[k]
                - 2.0 * base.mean_scale / g.mean_scales[k]
                - base.mean_scale * g.dofs[k] * g.scales[k].quad_form(shift));
        param_prior_term += 0.5 * (base.dof - 3.0) * log_det[k]
            - 0.5 * g.dofs[k] * w0_inv.mul_mat(&g.scales[k]).trace();
    }
    param_prior_term += t as f64 * ln_wishart_norm(&base.scale, base.dof);

    // E[ln q(z)]
    let mut assign_entropy_term = 0.0;
    for row in resp {
        for &r in row {
            if r > 0.0 {
                assign_entropy_term += r * r.ln();
            }
        }
    }

    // E[ln q(v)]
    let mut stick_entropy_term = 0.0;
    for j in 0..t - 1 {
        let (a, b) = (g.stick_a[j], g.stick_b[j]);
        let psi_ab = digamma(a + b);
        stick_entropy_term += ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b)
            + (a - 1.0) * (digamma(a) - psi_ab)
            + (b - 1.0) * (digamma(b) - psi_ab);
    }

    // E[ln q(mu, Lambda)]
    let mut param_entropy_term = 0.0;
    for k in 0..t {
        let wishart_entropy = -ln_wishart_norm(&g.scales[k], g.dofs[k])
            - 0.5 * (g.dofs[k] - 3.0) * log_det[k]
            + g.dofs[k];
        param_entropy_term += 0.5 * log_det[k] + (g.mean_scales[k].ln() - LOG_TWO_PI) - 1.0
            - wishart_entropy;
    }

    data_term + assign_term + stick_prior_term + param_prior_term
        - assign_entropy_term
        - stick_entropy_term
        - param_entropy_term
}

/// Evidence lower bound of a fitted posterior on the data it was fit to
/// (or any other point set of the same size).
pub fn elbo(xs: &[Vec2], prior: &DpPrior, post: &VariationalPosterior) -> f64 {
    let g = Globals {
        stick_a: post.stick_a.clone(),
        stick_b: post.stick_b.clone(),
        means: post.means.clone(),
        mean_scales: post.mean_scales.clone(),
        scales: post.scales.clone(),
        dofs: post.dofs.clone(),
    };
    elbo_impl(xs, prior, &g, post.responsibilities.rows())
}

const ANCHOR_SALT: u64 = 0x414e_4348_4f52_0000; // "ANCHOR"

/// Initial soft assignments. Up to `t` anchors are picked by farthest-point
/// traversal over a sorted, deduplicated copy of the data (so the choice
/// does not depend on point order), and each point is assigned to anchors
/// by a distance kernel, jittered with noise derived from the seed and the
/// point's own hash. This breaks the symmetry between components while
/// keeping the fit a function of (point set, seed) only.
fn init_responsibilities(xs: &[Vec2], t: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| {
        a.x.partial_cmp(&b.x)
            .expect("finite points")
            .then(a.y.partial_cmp(&b.y).expect("finite points"))
    });
    sorted.dedup();
    let anchors = crate::gmm::farthest_point_seeds(&sorted, t, mix_seed(seed, ANCHOR_SALT));

    let nearest_sq = |x: Vec2| -> (usize, f64) {
        let mut best = (0usize, f64::INFINITY);
        for (k, &a) in anchors.iter().enumerate() {
            let d = (x - a).norm_sq();
            if d < best.1 {
                best = (k, d);
            }
        }
        best
    };
    let bandwidth_sq = (xs.iter().map(|&x| nearest_sq(x).1).sum::<f64>() / xs.len() as f64)
        .max(1e-12);

    xs.iter()
        .map(|&x| {
            let mut rng = rng_from_seed(mix_seed(seed, point_salt(x)));
            let mut row = vec![0.0; t];
            let mut sum = 0.0;
            for (k, r) in row.iter_mut().enumerate() {
                let noise: f64 = 0.5 + rng.random::<f64>();
                if k < anchors.len() {
                    let d2 = (x - anchors[k]).norm_sq();
                    *r = (-0.5 * d2 / bandwidth_sq).exp() * noise;
                    sum += *r;
                }
            }
            if sum > 0.0 {
                for r in &mut row {
                    *r /= sum;
                }
            } else {
                // Every kernel underflowed; fall back to the nearest anchor.
                row[nearest_sq(x).0] = 1.0;
            }
            row
        })
        .collect()
}

/// Fit the truncated stick-breaking mixture by coordinate ascent.
///
/// Each sweep updates the stick and Gaussian–Wishart factors, then the
/// assignments, then records the bound; iteration stops once the bound
/// moves less than `tol` (or at `max_iter`).
pub fn fit_variational(
    xs: &[Vec2],
    prior: &DpPrior,
    cfg: &TruncationConfig,
) -> Result<VariationalPosterior> {
    if xs.len() < MIN_FIT_POINTS {
        return Err(Error::TooFewPoints {
            got: xs.len(),
            need: MIN_FIT_POINTS,
        });
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("points must be finite".into()));
    }
    let t = cfg.level();
    let mut resp = init_responsibilities(xs, t, cfg.seed());

    let mut trace = Vec::new();
    let mut globals = None;
    let mut iterations = 0;
    for iter in 1..=cfg.max_iter() {
        let stats = sufficient_stats(xs, &resp, prior.base().mean);
        let g = update_globals(prior, &stats, iter)?;
        resp = update_responsibilities(xs, &g);
        trace.push(elbo_impl(xs, prior, &g, &resp));
        globals = Some(g);
        iterations = iter;
        if iter >= 2 && (trace[iter - 1] - trace[iter - 2]).abs() < cfg.tol() {
            break;
        }
    }

    let g = globals.expect("at least one sweep");
    Ok(VariationalPosterior {
        stick_a: g.stick_a,
        stick_b: g.stick_b,
        means: g.means,
        mean_scales: g.mean_scales,
        scales: g.scales,
        dofs: g.dofs,
        responsibilities: Responsibilities::new(resp)?,
        elbo_trace: trace,
        iterations,
    })
}
