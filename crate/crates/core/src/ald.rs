//! Univariate asymmetric Laplace return model.
//!
//! The density convention used throughout the crate is
//!
//! ```text
//! p(x; mu, sigma, kappa) = (sqrt(2)/sigma) * kappa/(1+kappa^2)
//!                        * exp(-sqrt(2) * (x-mu)/sigma * s * kappa^s),
//! s = sign(x - mu)
//! ```
//!
//! with location `mu`, scale `sigma > 0` and skewness `kappa > 0`
//! (`kappa = 1` is the symmetric Laplace; `kappa > 1` skews toward negative
//! returns). The asymmetry shift `mu_a = (sigma/sqrt(2)) (1/kappa - kappa)`
//! gives mean `mu + mu_a` and variance `sigma^2 + mu_a^2`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use thiserror::Error;

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Errors from fitting and sampling the asymmetric Laplace model.
#[derive(Debug, Error)]
pub enum AldError {
    #[error("invalid parameter {name}: {value} (must be finite and positive)")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("insufficient data: need at least {required} observations, got {actual}")]
    InsufficientData { required: usize, actual: usize },
    #[error("degenerate data: all observations are equal")]
    DegenerateData,
    #[error("empty sample requested")]
    EmptySample,
    #[error("degenerate regression: zero variance in the regressor")]
    DegenerateRegression,
    #[error("too few iterations: need at least {required}, got {actual}")]
    TooFewIterations { required: usize, actual: usize },
    #[error("chain did not converge: acceptance rate {acceptance:.3} outside [0.05, 0.7]")]
    NonConvergence { acceptance: f64 },
}

/// Parameters of the asymmetric Laplace distribution (percent-return units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AldParams {
    pub mu: f64,
    pub sigma: f64,
    pub kappa: f64,
}

impl AldParams {
    pub fn new(mu: f64, sigma: f64, kappa: f64) -> Result<Self, AldError> {
        if !mu.is_finite() {
            return Err(AldError::InvalidParameter { name: "mu", value: mu });
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(AldError::InvalidParameter { name: "sigma", value: sigma });
        }
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(AldError::InvalidParameter { name: "kappa", value: kappa });
        }
        Ok(Self { mu, sigma, kappa })
    }

    /// Asymmetry shift `(sigma/sqrt(2)) (1/kappa - kappa)`; zero iff `kappa = 1`.
    pub fn mu_a(&self) -> f64 {
        self.sigma / SQRT2 * (1.0 / self.kappa - self.kappa)
    }

    /// Mean `mu + mu_a` and variance `sigma^2 + mu_a^2`.
    pub fn mean_var(&self) -> (f64, f64) {
        let mu_a = self.mu_a();
        (self.mu + mu_a, self.sigma * self.sigma + mu_a * mu_a)
    }
}

/// Density of the asymmetric Laplace distribution at `x`.
pub fn ald_pdf(x: f64, p: &AldParams) -> f64 {
    ald_log_pdf(x, p).exp()
}

/// Log-density; exact on both tails.
pub fn ald_log_pdf(x: f64, p: &AldParams) -> f64 {
    let z = x - p.mu;
    let norm = (SQRT2 / p.sigma * p.kappa / (1.0 + p.kappa * p.kappa)).ln();
    if z >= 0.0 {
        norm - SQRT2 * z * p.kappa / p.sigma
    } else {
        norm + SQRT2 * z / (p.sigma * p.kappa)
    }
}

/// Cumulative distribution function.
pub fn ald_cdf(x: f64, p: &AldParams) -> f64 {
    let z = x - p.mu;
    let k2 = p.kappa * p.kappa;
    if z < 0.0 {
        k2 / (1.0 + k2) * (SQRT2 * z / (p.sigma * p.kappa)).exp()
    } else {
        1.0 - (-SQRT2 * z * p.kappa / p.sigma).exp() / (1.0 + k2)
    }
}

/// Draws `n` i.i.d. variates, deterministic in `seed`.
///
/// Uses the exponential-difference construction
/// `x = mu + (sigma/sqrt(2)) (e1/kappa - kappa e2)` with `e1, e2 ~ Exp(1)`.
pub fn sample_ald(p: &AldParams, n: usize, seed: u64) -> Result<Vec<f64>, AldError> {
    if n == 0 {
        return Err(AldError::EmptySample);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = p.sigma / SQRT2;
    Ok((0..n)
        .map(|_| {
            let e1: f64 = rng.sample(Exp1);
            let e2: f64 = rng.sample(Exp1);
            p.mu + scale * (e1 / p.kappa - p.kappa * e2)
        })
        .collect())
}

/// Result of a maximum-likelihood fit.
#[derive(Debug, Clone, Copy)]
pub struct MleFit {
    pub params: AldParams,
    pub loglik: f64,
}

/// Sorted sample with prefix sums; makes the exact log-likelihood an
/// O(log n) lookup for any `(mu, sigma, kappa)`.
struct SortedSample {
    sorted: Vec<f64>,
    prefix: Vec<f64>,
    n: usize,
}

impl SortedSample {
    fn new(returns: &[f64]) -> Self {
        let mut sorted = returns.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut prefix = Vec::with_capacity(sorted.len() + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for &x in &sorted {
            acc += x;
            prefix.push(acc);
        }
        Self { n: sorted.len(), sorted, prefix }
    }

    /// `(sum of (mu - x) over x < mu, sum of (x - mu) over x > mu)`.
    fn absolute_deviations(&self, mu: f64) -> (f64, f64) {
        let j = self.sorted.partition_point(|&x| x < mu);
        let below = mu * j as f64 - self.prefix[j];
        let above = (self.prefix[self.n] - self.prefix[j]) - mu * (self.n - j) as f64;
        (below, above)
    }

    /// Weighted deviation `D(mu, kappa) = kappa * above + below / kappa`.
    fn weighted_deviation(&self, mu: f64, kappa: f64) -> f64 {
        let (below, above) = self.absolute_deviations(mu);
        kappa * above + below / kappa
    }

    /// For fixed `kappa`, the deviation `D` is piecewise linear in `mu`, so
    /// its minimizer sits on a data point; scan all of them.
    fn profile_mu(&self, kappa: f64) -> (f64, f64) {
        let mut best_mu = self.sorted[0];
        let mut best_d = f64::INFINITY;
        for j in 0..self.n {
            let mu = self.sorted[j];
            let below = mu * j as f64 - self.prefix[j];
            let above = (self.prefix[self.n] - self.prefix[j + 1]) - mu * (self.n - j - 1) as f64;
            let d = kappa * above + below / kappa;
            if d < best_d {
                best_d = d;
                best_mu = mu;
            }
        }
        (best_mu, best_d)
    }

    fn log_likelihood(&self, p: &AldParams) -> f64 {
        let d = self.weighted_deviation(p.mu, p.kappa);
        let n = self.n as f64;
        n * (SQRT2 / p.sigma * p.kappa / (1.0 + p.kappa * p.kappa)).ln() - SQRT2 * d / p.sigma
    }
}

const MIN_OBSERVATIONS: usize = 30;
const KAPPA_LO: f64 = 0.5;
const KAPPA_HI: f64 = 2.0;

fn check_sample(returns: &[f64]) -> Result<(), AldError> {
    if returns.len() < MIN_OBSERVATIONS {
        return Err(AldError::InsufficientData {
            required: MIN_OBSERVATIONS,
            actual: returns.len(),
        });
    }
    let first = returns[0];
    if returns.iter().all(|&x| x == first) {
        return Err(AldError::DegenerateData);
    }
    Ok(())
}

/// Maximum-likelihood fit via the exact profile structure.
///
/// For fixed `kappa` the optimal `mu` is a weighted-quantile point of the
/// sample (the deviation objective is piecewise linear in `mu`) and the
/// scale has the closed form `sigma = sqrt(2) D / n`. The remaining 1-D
/// profile over `kappa` is maximized by a coarse scan plus golden-section
/// refinement on `[0.5, 2.0]`.
pub fn fit_ald_mle(returns: &[f64]) -> Result<MleFit, AldError> {
    check_sample(returns)?;
    let sample = SortedSample::new(returns);
    let n = sample.n as f64;

    let profile = |kappa: f64| -> f64 {
        let (_, d) = sample.profile_mu(kappa);
        let sigma = SQRT2 * d / n;
        if sigma <= 0.0 {
            return f64::NEG_INFINITY;
        }
        n * (SQRT2 / sigma * kappa / (1.0 + kappa * kappa)).ln() - n
    };

    // coarse bracket, then golden-section inside it
    let grid = 32;
    let step = (KAPPA_HI - KAPPA_LO) / grid as f64;
    let mut best_k = KAPPA_LO;
    let mut best_val = f64::NEG_INFINITY;
    for i in 0..=grid {
        let k = KAPPA_LO + step * i as f64;
        let v = profile(k);
        if v > best_val {
            best_val = v;
            best_k = k;
        }
    }
    let lo = (best_k - step).max(KAPPA_LO);
    let hi = (best_k + step).min(KAPPA_HI);
    let (kappa, _) = crate::numerics::golden_max(&profile, lo, hi, 1e-10);

    let (mu, d) = sample.profile_mu(kappa);
    let sigma = SQRT2 * d / n;
    let params = AldParams::new(mu, sigma, kappa)?;
    let loglik = sample.log_likelihood(&params);
    Ok(MleFit { params, loglik })
}

/// Posterior summary from the random-walk Metropolis sampler.
#[derive(Debug, Clone, Copy)]
pub struct MetropolisFit {
    /// Posterior means of `(mu, sigma, kappa)`.
    pub params: AldParams,
    /// Posterior standard deviations of `(mu, sigma, kappa)`.
    pub post_sd: [f64; 3],
    /// Acceptance rate after burn-in.
    pub acceptance: f64,
    /// Log-likelihood at the posterior mean.
    pub loglik: f64,
}

const MIN_ITERS: usize = 10_000;

/// Random-walk Metropolis over `(mu, ln sigma, ln kappa)` with flat priors.
///
/// Per-coordinate Gaussian proposals are adapted toward 30% acceptance
/// during the burn-in half of the chain and frozen afterwards. Deterministic
/// given `seed`.
pub fn fit_ald_metropolis(
    returns: &[f64],
    iters: usize,
    seed: u64,
) -> Result<MetropolisFit, AldError> {
    check_sample(returns)?;
    if iters < MIN_ITERS {
        return Err(AldError::TooFewIterations { required: MIN_ITERS, actual: iters });
    }
    let sample = SortedSample::new(returns);

    // start at the MLE point; burn-in then only has to explore the mode
    let start = fit_ald_mle(returns)?.params;
    let mut theta = [start.mu, start.sigma.ln(), start.kappa.ln()];
    let mut steps = [0.05 * start.sigma.max(1e-8), 0.05, 0.05];

    let log_post = |t: &[f64; 3]| -> f64 {
        let p = AldParams { mu: t[0], sigma: t[1].exp(), kappa: t[2].exp() };
        sample.log_likelihood(&p)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lp = log_post(&theta);
    let burn_in = iters / 2;
    let adapt_window = 200;
    let mut window_accepts = [0usize; 3];
    let mut window_trials = [0usize; 3];
    let mut post_accepts = 0usize;
    let mut post_trials = 0usize;

    let mut count = 0usize;
    let mut mean = [0.0f64; 3];
    let mut m2 = [0.0f64; 3];

    for iter in 0..iters {
        for coord in 0..3 {
            let mut proposal = theta;
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            proposal[coord] += steps[coord] * z;
            let lp_new = log_post(&proposal);
            let accept = lp_new - lp >= 0.0 || rng.gen::<f64>().ln() < lp_new - lp;
            if accept {
                theta = proposal;
                lp = lp_new;
            }
            if iter < burn_in {
                window_trials[coord] += 1;
                window_accepts[coord] += accept as usize;
                if window_trials[coord] == adapt_window {
                    let rate = window_accepts[coord] as f64 / adapt_window as f64;
                    steps[coord] *= (1.5 * (rate - 0.3)).exp();
                    steps[coord] = steps[coord].clamp(1e-10, 1e3);
                    window_trials[coord] = 0;
                    window_accepts[coord] = 0;
                }
            } else {
                post_trials += 1;
                post_accepts += accept as usize;
            }
        }
        if iter >= burn_in {
            // Welford over (mu, sigma, kappa) in the original space
            let values = [theta[0], theta[1].exp(), theta[2].exp()];
            count += 1;
            for i in 0..3 {
                let delta = values[i] - mean[i];
                mean[i] += delta / count as f64;
                m2[i] += delta * (values[i] - mean[i]);
            }
        }
    }

    let acceptance = post_accepts as f64 / post_trials as f64;
    if !(0.05..=0.7).contains(&acceptance) {
        return Err(AldError::NonConvergence { acceptance });
    }
    let params = AldParams::new(mean[0], mean[1], mean[2])?;
    let post_sd = [
        (m2[0] / (count as f64 - 1.0)).sqrt(),
        (m2[1] / (count as f64 - 1.0)).sqrt(),
        (m2[2] / (count as f64 - 1.0)).sqrt(),
    ];
    let loglik = sample.log_likelihood(&params);
    Ok(MetropolisFit { params, post_sd, acceptance, loglik })
}

/// Power-law fit of a parameter against the horizon length.
#[derive(Debug, Clone, Copy)]
pub struct ScalingFit {
    /// Slope of log(value) on log(horizon).
    pub exponent: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Linear relation between `mu/sigma` and `kappa - 1`.
#[derive(Debug, Clone, Copy)]
pub struct KappaRelation {
    pub a: f64,
    pub b: f64,
    pub r2: f64,
}

fn ols(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64), AldError> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|&v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)).sum();
    if sxx <= 0.0 {
        return Err(AldError::DegenerateRegression);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = y.iter().map(|&v| (v - my) * (v - my)).sum();
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| {
            let e = b - (intercept + slope * a);
            e * e
        })
        .sum();
    let r2 = if ss_tot <= 0.0 { 1.0 } else { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) };
    Ok((slope, intercept, r2))
}

/// Ordinary least squares of `log(value)` on `log(horizon)`.
pub fn fit_scaling_law(horizons: &[f64], values: &[f64]) -> Result<ScalingFit, AldError> {
    if horizons.len() != values.len() || horizons.len() < 2 {
        return Err(AldError::InsufficientData { required: 2, actual: horizons.len().min(values.len()) });
    }
    for (&h, &v) in horizons.iter().zip(values) {
        if !(h > 0.0 && h.is_finite()) {
            return Err(AldError::InvalidParameter { name: "horizon", value: h });
        }
        if !(v > 0.0 && v.is_finite()) {
            return Err(AldError::InvalidParameter { name: "value", value: v });
        }
    }
    let lx: Vec<f64> = horizons.iter().map(|&h| h.ln()).collect();
    let ly: Vec<f64> = values.iter().map(|&v| v.ln()).collect();
    let (exponent, intercept, r2) = ols(&lx, &ly)?;
    Ok(ScalingFit { exponent, intercept, r2 })
}

/// Ordinary least squares of `mu/sigma` on `kappa - 1`.
pub fn fit_kappa_relation(params: &[AldParams]) -> Result<KappaRelation, AldError> {
    if params.len() < 2 {
        return Err(AldError::InsufficientData { required: 2, actual: params.len() });
    }
    let x: Vec<f64> = params.iter().map(|p| p.kappa - 1.0).collect();
    let y: Vec<f64> = params.iter().map(|p| p.mu / p.sigma).collect();
    let (a, b, r2) = ols(&x, &y)?;
    Ok(KappaRelation { a, b, r2 })
}
