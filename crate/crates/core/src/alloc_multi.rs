//! Multivariate allocation rules: the Gaussian closed form, the
//! asymmetric-Laplace stationarity systems (plain and marginalized over a
//! Gaussian prior on the location vector) solved by damped Newton
//! iteration, and the symmetric closed forms used as starting points and
//! cross-checks.

use crate::alloc_uni::RiskAversion;
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MultiError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("covariance matrix is not symmetric")]
    NotSymmetric,
    #[error("singular covariance: symmetric factorization failed")]
    SingularCovariance,
    #[error("invalid parameter {name}: {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("solver did not converge (residual {residual:.3e} after {restarts} restarts)")]
    NonConvergence { residual: f64, restarts: usize },
    #[error("root lies outside the feasible domain or fails the curvature check")]
    InfeasibleRoot,
}

fn check_symmetric(sigma: &DMatrix<f64>) -> Result<(), MultiError> {
    if !sigma.is_square() {
        return Err(MultiError::NotSymmetric);
    }
    let scale = sigma.amax().max(1.0);
    for i in 0..sigma.nrows() {
        for j in (i + 1)..sigma.ncols() {
            if (sigma[(i, j)] - sigma[(j, i)]).abs() > 1e-12 * scale {
                return Err(MultiError::NotSymmetric);
            }
        }
    }
    Ok(())
}

fn cholesky(sigma: &DMatrix<f64>) -> Result<Cholesky<f64, nalgebra::Dyn>, MultiError> {
    Cholesky::new(sigma.clone()).ok_or(MultiError::SingularCovariance)
}

/// Multivariate Gaussian return model.
#[derive(Debug, Clone)]
pub struct MultiGaussian {
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
}

impl MultiGaussian {
    pub fn new(mu: DVector<f64>, sigma: DMatrix<f64>) -> Result<Self, MultiError> {
        if sigma.nrows() != mu.len() {
            return Err(MultiError::DimensionMismatch { expected: mu.len(), actual: sigma.nrows() });
        }
        check_symmetric(&sigma)?;
        cholesky(&sigma)?;
        Ok(Self { mu, sigma })
    }
}

/// Multivariate asymmetric-Laplace return model with per-asset skewness.
#[derive(Debug, Clone)]
pub struct MultiAld {
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub kappa: DVector<f64>,
}

impl MultiAld {
    pub fn new(
        mu: DVector<f64>,
        sigma: DMatrix<f64>,
        kappa: DVector<f64>,
    ) -> Result<Self, MultiError> {
        if sigma.nrows() != mu.len() {
            return Err(MultiError::DimensionMismatch { expected: mu.len(), actual: sigma.nrows() });
        }
        if kappa.len() != mu.len() {
            return Err(MultiError::DimensionMismatch { expected: mu.len(), actual: kappa.len() });
        }
        check_symmetric(&sigma)?;
        cholesky(&sigma)?;
        for &k in kappa.iter() {
            if !(k.is_finite() && k > 0.0) {
                return Err(MultiError::InvalidParameter { name: "kappa", value: k });
            }
        }
        Ok(Self { mu, sigma, kappa })
    }

    /// Asymmetry vector `mu_a_i = sqrt(Sigma_ii / 2) (1/kappa_i - kappa_i)`.
    pub fn mu_a(&self) -> DVector<f64> {
        DVector::from_fn(self.mu.len(), |i, _| {
            (self.sigma[(i, i)] / 2.0).sqrt() * (1.0 / self.kappa[i] - self.kappa[i])
        })
    }

    pub fn is_symmetric_case(&self) -> bool {
        self.kappa.iter().all(|&k| k == 1.0)
    }
}

/// Diagonal Gaussian prior on the location vector.
#[derive(Debug, Clone)]
pub struct MultiPrior {
    pub mu0: DVector<f64>,
    /// Diagonal of the prior covariance; entries >= 0.
    pub sigma0_diag: DVector<f64>,
}

impl MultiPrior {
    pub fn new(mu0: DVector<f64>, sigma0_diag: DVector<f64>) -> Result<Self, MultiError> {
        if sigma0_diag.len() != mu0.len() {
            return Err(MultiError::DimensionMismatch {
                expected: mu0.len(),
                actual: sigma0_diag.len(),
            });
        }
        for &v in sigma0_diag.iter() {
            if !(v.is_finite() && v >= 0.0) {
                return Err(MultiError::InvalidParameter { name: "sigma0", value: v });
            }
        }
        Ok(Self { mu0, sigma0_diag })
    }

    pub fn zero(n: usize) -> Self {
        Self { mu0: DVector::zeros(n), sigma0_diag: DVector::zeros(n) }
    }
}

/// Allocation weights with the asymmetric-Laplace domain diagnostic
/// `phi(w) = 1 - (a^2/2) w' Sigma w + a mu_a' w` (must stay positive).
#[derive(Debug, Clone)]
pub struct WeightVector {
    pub w: DVector<f64>,
    pub feasible: bool,
    pub feasibility_margin: f64,
    pub note: Option<&'static str>,
}

impl WeightVector {
    fn unconstrained(w: DVector<f64>) -> Self {
        Self { w, feasible: true, feasibility_margin: f64::INFINITY, note: None }
    }
}

/// Mean-variance solution `w = Sigma^{-1} mu / a` via symmetric
/// factorization (no explicit inverse).
pub fn gaussian_weights(m: &MultiGaussian, a: RiskAversion) -> Result<WeightVector, MultiError> {
    let chol = cholesky(&m.sigma)?;
    let w = chol.solve(&m.mu) / a.value();
    Ok(WeightVector::unconstrained(w))
}

/// Marginalized mean-variance solution `w = (Sigma + Sigma0)^{-1} mu0 / a`.
pub fn gaussian_weights_marginal(
    m: &MultiGaussian,
    prior: &MultiPrior,
    a: RiskAversion,
) -> Result<WeightVector, MultiError> {
    if prior.mu0.len() != m.mu.len() {
        return Err(MultiError::DimensionMismatch { expected: m.mu.len(), actual: prior.mu0.len() });
    }
    let mut total = m.sigma.clone();
    for i in 0..total.nrows() {
        total[(i, i)] += prior.sigma0_diag[i];
    }
    let chol = cholesky(&total)?;
    let w = chol.solve(&prior.mu0) / a.value();
    Ok(WeightVector::unconstrained(w))
}

/// Domain expression `phi(w)` for an asymmetric-Laplace weight vector.
pub fn ald_domain_multi(w: &DVector<f64>, m: &MultiAld, a: f64) -> f64 {
    let quad = (&m.sigma * w).dot(w);
    1.0 - 0.5 * a * a * quad + a * m.mu_a().dot(w)
}

/// Expected-utility objective `mu' w + ln(phi(w)) / a`; `-inf` outside the
/// domain.
pub fn ald_objective_multi(w: &DVector<f64>, m: &MultiAld, a: f64) -> f64 {
    let phi = ald_domain_multi(w, m, a);
    if phi <= 0.0 {
        f64::NEG_INFINITY
    } else {
        m.mu.dot(w) + phi.ln() / a
    }
}

/// Marginalized objective `mu0' w - (a/2) w' Sigma0 w + ln(phi(w)) / a`.
pub fn ald_marginal_objective_multi(
    w: &DVector<f64>,
    m: &MultiAld,
    prior: &MultiPrior,
    a: f64,
) -> f64 {
    let phi = ald_domain_multi(w, m, a);
    if phi <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let prior_quad: f64 = (0..w.len()).map(|i| prior.sigma0_diag[i] * w[i] * w[i]).sum();
    prior.mu0.dot(w) - 0.5 * a * prior_quad + phi.ln() / a
}

/// Closed form for the symmetric case (`kappa = 1` for every asset):
/// `w = c Sigma^{-1} mu / a` with `c = (sqrt(1 + 2q) - 1) / q`,
/// `q = mu' Sigma^{-1} mu`.
///
/// A zero location vector returns `w = 0` with `note = "zero_location"`.
pub fn ald_weights_symmetric(m: &MultiAld, a: RiskAversion) -> Result<WeightVector, MultiError> {
    if !m.is_symmetric_case() {
        return Err(MultiError::InvalidParameter { name: "kappa", value: m.kappa.max() });
    }
    let chol = cholesky(&m.sigma)?;
    let siginv_mu = chol.solve(&m.mu);
    let q = m.mu.dot(&siginv_mu);
    if q <= 0.0 {
        let n = m.mu.len();
        return Ok(WeightVector {
            w: DVector::zeros(n),
            feasible: true,
            feasibility_margin: 1.0,
            note: Some("zero_location"),
        });
    }
    let c = symmetric_multiplier(q);
    let w = siginv_mu * (c / a.value());
    let margin = ald_domain_multi(&w, m, a.value());
    Ok(WeightVector { w, feasible: margin > 0.0, feasibility_margin: margin, note: None })
}

/// Multiplier `c(q) = (sqrt(1 + 2q) - 1) / q`, evaluated in a cancellation
/// free form; `c -> 1` as `q -> 0` (the Markowitz limit).
pub fn symmetric_multiplier(q: f64) -> f64 {
    2.0 / ((1.0 + 2.0 * q).sqrt() + 1.0)
}

const RESTART_SEED: u64 = 0x504f5254;

struct StationaritySystem<'a> {
    m: &'a MultiAld,
    mu0: DVector<f64>,
    sigma0_diag: DVector<f64>,
    mu_a: DVector<f64>,
    a: f64,
}

impl StationaritySystem<'_> {
    fn phi(&self, w: &DVector<f64>) -> f64 {
        let quad = (&self.m.sigma * w).dot(w);
        1.0 - 0.5 * self.a * self.a * quad + self.a * self.mu_a.dot(w)
    }

    /// `F(w) = (mu0 - a Sigma0 w) phi(w) + mu_a - a Sigma w`
    fn residual(&self, w: &DVector<f64>) -> DVector<f64> {
        let phi = self.phi(w);
        let mut shifted = self.mu0.clone();
        for i in 0..w.len() {
            shifted[i] -= self.a * self.sigma0_diag[i] * w[i];
        }
        shifted * phi + &self.mu_a - &self.m.sigma * w * self.a
    }

    fn jacobian(&self, w: &DVector<f64>) -> DMatrix<f64> {
        let phi = self.phi(w);
        let grad_phi = &self.mu_a * self.a - &self.m.sigma * w * (self.a * self.a);
        let mut shifted = self.mu0.clone();
        for i in 0..w.len() {
            shifted[i] -= self.a * self.sigma0_diag[i] * w[i];
        }
        let mut jac = shifted * grad_phi.transpose() - &self.m.sigma * self.a;
        for i in 0..w.len() {
            jac[(i, i)] -= self.a * self.sigma0_diag[i] * phi;
        }
        jac
    }

    /// Concave objective whose ascent directions drive the line search.
    fn objective(&self, w: &DVector<f64>) -> f64 {
        let phi = self.phi(w);
        if phi <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let prior_quad: f64 =
            (0..w.len()).map(|i| self.sigma0_diag[i] * w[i] * w[i]).sum();
        self.mu0.dot(w) - 0.5 * self.a * prior_quad + phi.ln() / self.a
    }

    /// Largest `t` keeping `t w` strictly inside the domain, shrunk by 10%.
    fn shrink_into_domain(&self, w: &DVector<f64>) -> DVector<f64> {
        if self.phi(w) > 1e-12 {
            return w.clone();
        }
        // phi(t w) = 1 + alpha t - beta t^2 with beta > 0
        let alpha = self.a * self.mu_a.dot(w);
        let beta = 0.5 * self.a * self.a * (&self.m.sigma * w).dot(w);
        let disc = (alpha * alpha + 4.0 * beta).max(0.0).sqrt();
        let t_max = (alpha + disc) / (2.0 * beta);
        w * (0.9 * t_max)
    }

    /// Hessian of the objective; negative definite everywhere in the domain.
    fn hessian(&self, w: &DVector<f64>) -> DMatrix<f64> {
        let phi = self.phi(w);
        let grad_phi = &self.mu_a * self.a - &self.m.sigma * w * (self.a * self.a);
        let mut hess = -&self.m.sigma * (self.a / phi)
            - &grad_phi * grad_phi.transpose() / (self.a * phi * phi);
        for i in 0..w.len() {
            hess[(i, i)] -= self.a * self.sigma0_diag[i];
        }
        hess
    }
}

fn solve_stationarity(
    system: &StationaritySystem,
    start: DVector<f64>,
) -> Result<DVector<f64>, MultiError> {
    let n = start.len();
    let scale = system.mu0.norm() + 1.0;
    let tol = 1e-12 * scale;
    let mut rng = ChaCha8Rng::seed_from_u64(RESTART_SEED);

    let mut best_residual = f64::INFINITY;
    let restarts = 8;
    for attempt in 0..=restarts {
        let mut w = if attempt == 0 {
            system.shrink_into_domain(&start)
        } else {
            // random point inside the feasible ellipsoid
            let dir = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
            let raw = system.shrink_into_domain(&dir);
            raw * rng.gen_range(0.1..0.9)
        };
        let mut converged = false;
        for _ in 0..200 {
            let f = system.residual(&w);
            let norm = f.norm();
            best_residual = best_residual.min(norm);
            if norm <= tol {
                converged = true;
                break;
            }
            let jac = system.jacobian(&w);
            let Some(delta) = jac.lu().solve(&(-&f)) else { break };
            let g0 = system.objective(&w);
            let mut t = 1.0;
            let mut stepped = false;
            for _ in 0..50 {
                let cand = &w + &delta * t;
                if system.phi(&cand) > 0.0 && system.objective(&cand) > g0 {
                    w = cand;
                    stepped = true;
                    break;
                }
                t *= 0.5;
            }
            if !stepped {
                // accept tiny steps near the optimum where the objective is flat
                let cand = &w + &delta * t;
                if system.phi(&cand) > 0.0 && system.residual(&cand).norm() < norm {
                    w = cand;
                } else {
                    break;
                }
            }
        }
        if converged {
            return Ok(w);
        }
    }
    Err(MultiError::NonConvergence { residual: best_residual, restarts })
}

fn finish_weights(
    system: &StationaritySystem,
    w: DVector<f64>,
) -> Result<WeightVector, MultiError> {
    let margin = system.phi(&w);
    if !(margin > 0.0) {
        return Err(MultiError::InfeasibleRoot);
    }
    // second-order check: -Hessian must be positive definite
    let neg_hess = -system.hessian(&w);
    if Cholesky::new(neg_hess).is_none() {
        return Err(MultiError::InfeasibleRoot);
    }
    Ok(WeightVector { w, feasible: true, feasibility_margin: margin, note: None })
}

/// Optimal weights for multivariate asymmetric-Laplace returns: damped
/// Newton on the stationarity system
/// `mu (1 - (a^2/2) w' Sigma w + a mu_a' w) + (mu_a - a Sigma w) = 0`,
/// started from the symmetric closed form with `kappa` forced to one.
pub fn ald_weights(m: &MultiAld, a: RiskAversion) -> Result<WeightVector, MultiError> {
    let n = m.mu.len();
    let system = StationaritySystem {
        m,
        mu0: m.mu.clone(),
        sigma0_diag: DVector::zeros(n),
        mu_a: m.mu_a(),
        a: a.value(),
    };
    let chol = cholesky(&m.sigma)?;
    let siginv_mu = chol.solve(&m.mu);
    let q = m.mu.dot(&siginv_mu).max(0.0);
    let start = siginv_mu * (symmetric_multiplier(q) / a.value());
    let w = solve_stationarity(&system, start)?;
    finish_weights(&system, w)
}

/// Optimal weights with the location vector marginalized over a diagonal
/// Gaussian prior: damped Newton on the cubic system
/// `(mu0 - a Sigma0 w)(1 - (a^2/2) w' Sigma w + a mu_a' w) + (mu_a - a Sigma w) = 0`,
/// started from the marginalized Gaussian solution.
pub fn ald_weights_marginal(
    m: &MultiAld,
    prior: &MultiPrior,
    a: RiskAversion,
) -> Result<WeightVector, MultiError> {
    if prior.mu0.len() != m.mu.len() {
        return Err(MultiError::DimensionMismatch { expected: m.mu.len(), actual: prior.mu0.len() });
    }
    let system = StationaritySystem {
        m,
        mu0: prior.mu0.clone(),
        sigma0_diag: prior.sigma0_diag.clone(),
        mu_a: m.mu_a(),
        a: a.value(),
    };
    let mut total = m.sigma.clone();
    for i in 0..total.nrows() {
        total[(i, i)] += prior.sigma0_diag[i];
    }
    let start = cholesky(&total)?.solve(&prior.mu0) / a.value();
    let w = solve_stationarity(&system, start)?;
    finish_weights(&system, w)
}

/// Scalar fixed-point path for the symmetric marginalized case
/// (`mu_a = 0`): `w(d) = (1 - (a^2/2) d) (a (Sigma + (1 - (a^2/2) d) Sigma0))^{-1} mu0`
/// with `d = w' Sigma w` located by bisection.
pub fn ald_weights_marginal_symmetric(
    m: &MultiAld,
    prior: &MultiPrior,
    a: RiskAversion,
) -> Result<WeightVector, MultiError> {
    if !m.is_symmetric_case() {
        return Err(MultiError::InvalidParameter { name: "kappa", value: m.kappa.max() });
    }
    if prior.mu0.len() != m.mu.len() {
        return Err(MultiError::DimensionMismatch { expected: m.mu.len(), actual: prior.mu0.len() });
    }
    let a = a.value();
    let weights_for = |d: f64| -> Result<DVector<f64>, MultiError> {
        let c = 1.0 - 0.5 * a * a * d;
        let mut total = m.sigma.clone();
        for i in 0..total.nrows() {
            total[(i, i)] += c * prior.sigma0_diag[i];
        }
        Ok(cholesky(&total)?.solve(&prior.mu0) * (c / a))
    };
    let gap = |d: f64| -> Result<f64, MultiError> {
        let w = weights_for(d)?;
        Ok((&m.sigma * &w).dot(&w) - d)
    };

    let (mut lo, mut hi) = (0.0, 2.0 / (a * a));
    if gap(lo)? <= 0.0 {
        // mu0 = 0: w = 0 is the fixed point
        let w = weights_for(0.0)?;
        let margin = ald_domain_multi(&w, m, a);
        return Ok(WeightVector { w, feasible: margin > 0.0, feasibility_margin: margin, note: None });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gap(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let w = weights_for(0.5 * (lo + hi))?;
    let margin = ald_domain_multi(&w, m, a);
    Ok(WeightVector { w, feasible: margin > 0.0, feasibility_margin: margin, note: None })
}
