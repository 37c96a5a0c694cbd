//! Bayesian PCA model selection over the latent dimension `q`.
//!
//! Under probabilistic PCA with the eigenvectors fixed at their maximum
//! likelihood values, the posterior over `theta_q = (lambda_1, ..., lambda_q,
//! sigma2)` is a product of inverse-gamma marginals restricted to
//! `lambda_1 > ... > lambda_q > sigma2`, i.e. an order-constrained target the
//! CFTP sampler handles directly. For each `q` we draw from it, keep the
//! sample MAP, and score the model by BIC and a Laplace approximation to the
//! evidence.
//!
//! The sampler works in ascending order, so `(sigma2, lambda_q, ..., lambda_1)`
//! is fed to it as `(x_1, ..., x_{q+1})` and flipped back on the way out.

use rand_distr::{Distribution as _, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::cftp::{draw_batch_from, perfect_draw, CftpConfig, UniformStore};
use crate::distributions::Distribution;
use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Coordinate variances of the built-in simulated dataset.
pub const EIGHT_DIM_VARIANCES: [f64; 8] = [10.0, 8.0, 6.0, 4.0, 2.0, 0.5, 0.5, 0.5];
pub const EIGHT_DIM_SAMPLES: usize = 100;

pub const DEFAULT_ALPHA: f64 = 2.0;
pub const DEFAULT_BETA: f64 = 3.0;

/// Sample-covariance eigenvalues, descending, with the sample count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenData {
    pub g: Vec<f64>,
    pub n_samples: usize,
}

impl EigenData {
    pub fn new(g: Vec<f64>, n_samples: usize) -> Result<Self> {
        if n_samples < 2 {
            return Err(Error::Domain(format!(
                "need at least 2 samples, got {n_samples}"
            )));
        }
        if g.len() < 2 {
            return Err(Error::Domain(format!(
                "need dimension at least 2, got {}",
                g.len()
            )));
        }
        if g.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Data(
                "eigenvalues must be finite and non-negative".into(),
            ));
        }
        if g.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Domain(
                "eigenvalues must be in descending order".into(),
            ));
        }
        Ok(Self { g, n_samples })
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    /// `c(q) = sum_{i > q} g_i`.
    pub fn tail_sum(&self, q: usize) -> f64 {
        self.g[q.min(self.g.len())..].iter().sum()
    }
}

/// Posterior for a fixed latent dimension `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BpcaModel {
    pub data: EigenData,
    pub q: usize,
    pub alpha: f64,
    pub beta: f64,
}

impl BpcaModel {
    pub fn new(data: EigenData, q: usize, alpha: f64, beta: f64) -> Result<Self> {
        let d = data.dim();
        if q == 0 || q >= d {
            return Err(Error::Domain(format!(
                "q must lie in 1..={}, got {q}",
                d - 1
            )));
        }
        if !(alpha > 0.0 && alpha.is_finite()) || !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Domain(format!(
                "alpha and beta must be positive, got {alpha}, {beta}"
            )));
        }
        Ok(Self {
            data,
            q,
            alpha,
            beta,
        })
    }

    pub fn dim(&self) -> usize {
        self.data.dim()
    }

    fn n(&self) -> f64 {
        self.data.n_samples as f64
    }

    /// Free parameters of the `q`-dimensional principal subspace.
    pub fn subspace_dim(&self) -> usize {
        subspace_dim(self.dim(), self.q)
    }
}

/// `k = dq - q(q+1)/2`.
pub fn subspace_dim(d: usize, q: usize) -> usize {
    d * q - q * (q + 1) / 2
}

/// One parameter point: principal variances descending, then the noise variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaQ {
    pub lambda: Vec<f64>,
    pub sigma2: f64,
}

impl ThetaQ {
    pub fn is_ordered(&self) -> bool {
        let mut prev = f64::INFINITY;
        for &l in &self.lambda {
            if !(l < prev) {
                return false;
            }
            prev = l;
        }
        self.sigma2 > 0.0 && self.sigma2 < prev
    }

    /// Ascending sampler coordinates `(sigma2, lambda_q, ..., lambda_1)`.
    pub fn to_ascending(&self) -> Vec<f64> {
        std::iter::once(self.sigma2)
            .chain(self.lambda.iter().rev().copied())
            .collect()
    }

    pub fn from_ascending(x: &[f64]) -> Result<Self> {
        if x.len() < 2 {
            return Err(Error::Contract(format!(
                "need at least 2 coordinates, got {}",
                x.len()
            )));
        }
        Ok(Self {
            sigma2: x[0],
            lambda: x[1..].iter().rev().copied().collect(),
        })
    }
}

/// Sample mean and covariance (divisor `N`) followed by a Jacobi eigensolve.
pub fn covariance_eigs(rows: &[Vec<f64>]) -> Result<EigenData> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::Data(format!("need at least 2 rows, got {n}")));
    }
    let d = rows[0].len();
    if d < 2 {
        return Err(Error::Data(format!("need at least 2 columns, got {d}")));
    }
    for (i, r) in rows.iter().enumerate() {
        if r.len() != d {
            return Err(Error::Data(format!(
                "row {i} has {} columns, expected {d}",
                r.len()
            )));
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(format!("row {i} has a non-finite entry")));
        }
    }
    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut s = vec![0.0; d * d];
    for r in rows {
        for i in 0..d {
            let di = r[i] - mean[i];
            for j in i..d {
                s[i * d + j] += di * (r[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = s[i * d + j] / n as f64;
            s[i * d + j] = v;
            s[j * d + i] = v;
        }
    }
    let mut g = symmetric_eigenvalues(s, d);
    // rank deficiency shows up as tiny negative roundoff
    let scale = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    for v in &mut g {
        if *v < 0.0 && *v >= -1e-12 * scale.max(f64::MIN_POSITIVE) {
            *v = 0.0;
        }
    }
    EigenData::new(g, n)
}

/// Eigenvalues of a symmetric row-major `d x d` matrix by cyclic Jacobi
/// rotations, stopping once the off-diagonal norm is `<= 1e-12 * ||A||_F`.
/// Returned in descending order.
pub fn symmetric_eigenvalues(mut a: Vec<f64>, d: usize) -> Vec<f64> {
    assert_eq!(a.len(), d * d, "matrix is not {d}x{d}");
    let frob = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let tol = 1e-12 * frob;
    let off = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    s += a[i * d + j] * a[i * d + j];
                }
            }
        }
        s.sqrt()
    };
    for _sweep in 0..100 {
        if off(&a) <= tol {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = a[p * d + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * d + p];
                let aqq = a[q * d + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut g: Vec<f64> = (0..d).map(|i| a[i * d + i]).collect();
    g.sort_by(|x, y| y.total_cmp(x));
    g
}

/// The `q + 1` inverse-gamma marginals in ascending sampler order:
/// `sigma2` first, then `lambda_q`, ..., `lambda_1`.
pub fn posterior_marginals(model: &BpcaModel) -> Result<Vec<Distribution>> {
    let n = model.n();
    let d = model.dim() as f64;
    let q = model.q;
    let mut out = Vec::with_capacity(q + 1);
    out.push(Distribution::inverse_gamma(
        n * (d - q as f64) / 2.0 + model.alpha,
        n * model.data.tail_sum(q) / 2.0 + model.beta,
    )?);
    for i in (0..q).rev() {
        out.push(Distribution::inverse_gamma(
            n / 2.0 + model.alpha,
            n * model.data.g[i] / 2.0 + model.beta,
        )?);
    }
    Ok(out)
}

/// One epsilon-perfect posterior draw and its coupling time.
pub fn sample_theta(
    model: &BpcaModel,
    config: &CftpConfig,
    store: &mut UniformStore,
) -> Result<(ThetaQ, u64)> {
    let dists = posterior_marginals(model)?;
    let draw = perfect_draw(&dists, config, store)?;
    Ok((ThetaQ::from_ascending(&draw.values)?, draw.bct))
}

/// Profile log-likelihood of `theta` with the eigenvectors at their MLE.
pub fn log_likelihood(model: &BpcaModel, theta: &ThetaQ) -> f64 {
    let n = model.n();
    let d = model.dim();
    let q = model.q;
    let mut ll = 0.0;
    for (l, g) in theta.lambda.iter().zip(&model.data.g) {
        ll -= 0.5 * n * (l.ln() + g / l);
    }
    ll - 0.5 * n * (d - q) as f64 * theta.sigma2.ln()
        - n * model.data.tail_sum(q) / (2.0 * theta.sigma2)
}

/// The separate additive pieces of the log posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogPosteriorTerms {
    pub log_likelihood: f64,
    pub log_prior_lambda: Vec<f64>,
    pub log_prior_sigma2: f64,
    /// `ln (q+1)!`, the normalising factor of the ordering restriction.
    pub log_order_factor: f64,
}

impl LogPosteriorTerms {
    pub fn total(&self) -> f64 {
        self.log_likelihood
            + self.log_prior_lambda.iter().sum::<f64>()
            + self.log_prior_sigma2
            + self.log_order_factor
    }

    pub fn n_terms(&self) -> usize {
        self.log_prior_lambda.len() + 3
    }

    /// Applies `f` to every term.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            log_likelihood: f(self.log_likelihood),
            log_prior_lambda: self.log_prior_lambda.iter().map(|&v| f(v)).collect(),
            log_prior_sigma2: f(self.log_prior_sigma2),
            log_order_factor: f(self.log_order_factor),
        }
    }
}

/// `None` when `theta` violates the ordering or has the wrong length.
pub fn log_posterior_terms(model: &BpcaModel, theta: &ThetaQ) -> Option<LogPosteriorTerms> {
    if theta.lambda.len() != model.q || !theta.is_ordered() {
        return None;
    }
    let prior = Distribution::InverseGamma {
        shape: model.alpha,
        rate: model.beta,
    };
    Some(LogPosteriorTerms {
        log_likelihood: log_likelihood(model, theta),
        log_prior_lambda: theta.lambda.iter().map(|&l| prior.ln_pdf(l)).collect(),
        log_prior_sigma2: prior.ln_pdf(theta.sigma2),
        log_order_factor: ln_gamma(model.q as f64 + 2.0),
    })
}

/// Unnormalised log posterior; `-inf` off the ordered region.
pub fn log_posterior(model: &BpcaModel, theta: &ThetaQ) -> f64 {
    log_posterior_terms(model, theta).map_or(f64::NEG_INFINITY, |t| t.total())
}

/// The draw with the largest log posterior; ties go to the earliest.
pub fn map_estimate<'a>(draws: &'a [ThetaQ], model: &BpcaModel) -> Result<&'a ThetaQ> {
    let mut best: Option<(&ThetaQ, f64)> = None;
    for t in draws {
        let v = log_posterior(model, t);
        match best {
            Some((_, b)) if !(v > b) => {}
            _ => best = Some((t, v)),
        }
    }
    best.map(|(t, _)| t)
        .ok_or_else(|| Error::Domain("no draws to take a MAP over".into()))
}

/// `ln[(prod lambda)^(-N/2) (sigma2)^(-N(d-q)/2) N^-(k + q/2)]`.
pub fn bic_evidence(model: &BpcaModel, theta: &ThetaQ) -> f64 {
    let n = model.n();
    let d = model.dim();
    let q = model.q;
    let k = model.subspace_dim() as f64;
    -0.5 * n * theta.lambda.iter().map(|l| l.ln()).sum::<f64>()
        - 0.5 * n * (d - q) as f64 * theta.sigma2.ln()
        - (k + q as f64 / 2.0) * n.ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LaplaceForm {
    /// `2^((k-q)/2) (sigma2)^(N(d-q)) N^(-q/2) |A|^(-1/2) prod Gamma((d-i)/2)`.
    #[default]
    Displayed,
    /// The standard PPCA Laplace evidence: uniform prior on the Stiefel
    /// manifold, `(prod lambda)^(-N/2) (sigma2)^(-N(d-q)/2)` likelihood factor,
    /// `(2 pi)^((k+q)/2)` from the Gaussian integral.
    Corrected,
}

impl std::str::FromStr for LaplaceForm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "displayed" => Ok(Self::Displayed),
            "corrected" => Ok(Self::Corrected),
            _ => Err(Error::Domain(format!(
                "unknown Laplace form {s:?} (expected displayed or corrected)"
            ))),
        }
    }
}

/// `ln |A|` with `lambda_j = sigma2` for `j > q` on both the estimate and the
/// smoothed side.
pub fn log_det_a(model: &BpcaModel, theta: &ThetaQ) -> Result<f64> {
    let d = model.dim();
    let q = model.q;
    let hat = |j: usize| if j < q { theta.lambda[j] } else { theta.sigma2 };
    let mut s = model.subspace_dim() as f64 * model.n().ln();
    for i in 0..q {
        for j in i + 1..d {
            let a = 1.0 / hat(j) - 1.0 / hat(i);
            let b = hat(i) - hat(j);
            if !(a > 0.0 && b > 0.0) {
                return Err(Error::DegenerateEvidence(format!(
                    "factor ({i}, {j}) of |A| is not positive: lambda_i = {}, lambda_j = {}",
                    hat(i),
                    hat(j)
                )));
            }
            s += a.ln() + b.ln();
        }
    }
    Ok(s)
}

pub fn laplace_evidence(model: &BpcaModel, theta: &ThetaQ, form: LaplaceForm) -> Result<f64> {
    let n = model.n();
    let d = model.dim();
    let q = model.q;
    let k = model.subspace_dim() as f64;
    let qf = q as f64;
    let log_det = log_det_a(model, theta)?;
    let v = match form {
        LaplaceForm::Displayed => {
            let gammas: f64 = (1..=q).map(|i| ln_gamma((d - i) as f64 / 2.0)).sum();
            (k - qf) / 2.0 * std::f64::consts::LN_2 + n * (d - q) as f64 * theta.sigma2.ln()
                - qf / 2.0 * n.ln()
                - 0.5 * log_det
                + gammas
        }
        LaplaceForm::Corrected => {
            let ln_pi = std::f64::consts::PI.ln();
            let log_p_u: f64 = -qf * std::f64::consts::LN_2
                + (1..=q)
                    .map(|i| {
                        let h = (d - i + 1) as f64 / 2.0;
                        ln_gamma(h) - h * ln_pi
                    })
                    .sum::<f64>();
            log_p_u
                - 0.5 * n * theta.lambda.iter().map(|l| l.ln()).sum::<f64>()
                - 0.5 * n * (d - q) as f64 * theta.sigma2.ln()
                + (k + qf) / 2.0 * (2.0 * std::f64::consts::PI).ln()
                - 0.5 * log_det
                - qf / 2.0 * n.ln()
        }
    };
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub alpha: f64,
    pub beta: f64,
    pub cftp: CftpConfig,
    pub draws_per_q: usize,
    pub seed: u64,
}

impl ScanConfig {
    pub fn new(epsilon: f64, draws_per_q: usize, seed: u64) -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            cftp: CftpConfig::new(epsilon),
            draws_per_q,
            seed,
        }
    }
}

/// Scores for one candidate `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub q: usize,
    pub map: ThetaQ,
    pub max_log_likelihood: f64,
    pub bic: f64,
    pub laplace_displayed: Option<f64>,
    pub laplace_corrected: Option<f64>,
    pub mean_bct: f64,
    pub min_bct: u64,
    pub max_bct: u64,
}

impl ScanRow {
    pub fn laplace(&self, form: LaplaceForm) -> Option<f64> {
        match form {
            LaplaceForm::Displayed => self.laplace_displayed,
            LaplaceForm::Corrected => self.laplace_corrected,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanTable {
    pub rows: Vec<ScanRow>,
    /// Mean coupling time over every draw of every `q`.
    pub mean_bct: f64,
}

impl ScanTable {
    pub fn argmax_bic(&self) -> Option<usize> {
        argmax(self.rows.iter().map(|r| (r.q, Some(r.bic))))
    }

    pub fn argmax_laplace(&self, form: LaplaceForm) -> Option<usize> {
        argmax(self.rows.iter().map(|r| (r.q, r.laplace(form))))
    }

    pub fn argmax_log_likelihood(&self) -> Option<usize> {
        argmax(self.rows.iter().map(|r| (r.q, Some(r.max_log_likelihood))))
    }
}

fn argmax(it: impl Iterator<Item = (usize, Option<f64>)>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (q, v) in it {
        if let Some(v) = v {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((q, v));
            }
        }
    }
    best.map(|(q, _)| q)
}

/// Draws for candidate `q` use streams `q << 40 ..`, so rows are independent
/// of each other and of how many `q` are scanned.
fn scan_one(data: &EigenData, q: usize, config: &ScanConfig) -> Result<ScanRow> {
    let model = BpcaModel::new(data.clone(), q, config.alpha, config.beta)?;
    let dists = posterior_marginals(&model)?;
    let batch = draw_batch_from(
        &dists,
        &config.cftp,
        config.draws_per_q,
        config.seed,
        (q as u64) << 40,
        true,
    )?;
    let thetas: Vec<ThetaQ> = batch
        .draws
        .iter()
        .map(|d| ThetaQ::from_ascending(&d.values))
        .collect::<Result<_>>()?;
    let map = map_estimate(&thetas, &model)?.clone();
    Ok(ScanRow {
        q,
        max_log_likelihood: log_likelihood(&model, &map),
        bic: bic_evidence(&model, &map),
        laplace_displayed: laplace_evidence(&model, &map, LaplaceForm::Displayed).ok(),
        laplace_corrected: laplace_evidence(&model, &map, LaplaceForm::Corrected).ok(),
        mean_bct: batch.summary.mean_bct,
        min_bct: batch.summary.min_bct,
        max_bct: batch.summary.max_bct,
        map,
    })
}

/// Samples and scores every `q` in `1..d`.
pub fn model_scan(data: &EigenData, config: &ScanConfig) -> Result<ScanTable> {
    let d = data.dim();
    let rows: Vec<ScanRow> = (1..d)
        .into_par_iter()
        .map(|q| scan_one(data, q, config))
        .collect::<Result<_>>()?;
    let mean_bct = rows.iter().map(|r| r.mean_bct).sum::<f64>() / rows.len() as f64;
    Ok(ScanTable { rows, mean_bct })
}

/// `n` rows of independent zero-mean Gaussians with the given coordinate variances.
pub fn simulate_gaussian(variances: &[f64], n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if variances.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Domain(
            "variances must be positive and finite".into(),
        ));
    }
    let sds: Vec<f64> = variances.iter().map(|v| v.sqrt()).collect();
    let mut rng = stream_rng(seed, 0);
    Ok((0..n)
        .map(|_| {
            sds.iter()
                .map(|s| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    s * z
                })
                .collect()
        })
        .collect())
}

/// The built-in 8-dimensional, 100-sample dataset.
pub fn simulate_eight_dim(seed: u64) -> Result<Vec<Vec<f64>>> {
    simulate_gaussian(&EIGHT_DIM_VARIANCES, EIGHT_DIM_SAMPLES, seed)
}
