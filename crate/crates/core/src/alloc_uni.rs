//! Single-asset allocation rules: one risky asset against cash, for
//! Gaussian and asymmetric-Laplace return models, with and without
//! marginalization over an uncertain location parameter.

use crate::ald::AldParams;
use crate::numerics::cubic_roots;
use thiserror::Error;

const SQRT2: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, Error)]
pub enum AllocError {
    #[error("invalid parameter {name}: {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("no feasible root: the objective has no interior maximum")]
    NoFeasibleRoot,
}

/// CARA risk-aversion coefficient, strictly positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskAversion(f64);

impl RiskAversion {
    pub fn new(a: f64) -> Result<Self, AllocError> {
        if a.is_finite() && a > 0.0 {
            Ok(Self(a))
        } else {
            Err(AllocError::InvalidParameter { name: "risk_aversion", value: a })
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Gaussian prior on the location parameter: `mu ~ N(mu0, sigma0^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocationPrior {
    pub mu0: f64,
    pub sigma0: f64,
}

impl LocationPrior {
    pub fn new(mu0: f64, sigma0: f64) -> Result<Self, AllocError> {
        if !mu0.is_finite() {
            return Err(AllocError::InvalidParameter { name: "mu0", value: mu0 });
        }
        if !(sigma0.is_finite() && sigma0 >= 0.0) {
            return Err(AllocError::InvalidParameter { name: "sigma0", value: sigma0 });
        }
        Ok(Self { mu0, sigma0 })
    }
}

/// Which solution path produced the weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    ClosedForm,
    Cardano,
    Asymptotic,
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Branch::ClosedForm => "closed_form",
            Branch::Cardano => "cardano",
            Branch::Asymptotic => "asymptotic",
        })
    }
}

/// A single-asset allocation: weight, attained objective and the branch
/// taken. `feasibility_margin` is the value of the domain expression
/// `1 - a^2 w^2 sigma^2 / 2 + a w mu_a` for the asymmetric-Laplace rules
/// (positive inside the domain) and `None` for Gaussian rules.
#[derive(Debug, Clone, Copy)]
pub struct UniAllocation {
    pub w: f64,
    pub objective: f64,
    pub branch: Branch,
    pub feasibility_margin: Option<f64>,
}

/// Mean-variance weight `w = (mu - r0) / (a sigma^2)`.
pub fn markowitz_weight(mu: f64, sigma: f64, r0: f64, a: RiskAversion) -> UniAllocation {
    let a = a.value();
    let w = (mu - r0) / (a * sigma * sigma);
    let objective = w * (mu - r0) - 0.5 * a * w * w * sigma * sigma;
    UniAllocation { w, objective, branch: Branch::ClosedForm, feasibility_margin: None }
}

/// Domain expression `phi(w) = 1 - a^2 w^2 sigma^2 / 2 + a w mu_a`;
/// the allocation objective is only defined where `phi > 0`.
pub fn ald_domain(w: f64, p: &AldParams, a: f64) -> f64 {
    1.0 - 0.5 * a * a * w * w * p.sigma * p.sigma + a * w * p.mu_a()
}

/// Exact expected-utility objective for asymmetric-Laplace returns:
/// `w (mu - r0) + ln(phi(w)) / a`; `-inf` outside the domain.
pub fn ald_objective(w: f64, p: &AldParams, r0: f64, a: f64) -> f64 {
    let phi = ald_domain(w, p, a);
    if phi <= 0.0 {
        f64::NEG_INFINITY
    } else {
        w * (p.mu - r0) + phi.ln() / a
    }
}

/// Optimal weight for asymmetric-Laplace returns (closed form).
///
/// The solution of the stationarity quadratic is evaluated in a rationalized
/// form that stays exact as `mu - r0 -> 0`; at exactly zero excess location
/// the continuous extension `w = -(kappa^2-1) / (sqrt(2) a sigma kappa)` is
/// returned with `branch = Asymptotic`.
pub fn ald_weight(p: &AldParams, r0: f64, a: RiskAversion) -> UniAllocation {
    let a = a.value();
    let m = p.mu - r0;
    let (sigma, kappa) = (p.sigma, p.kappa);
    let k2 = kappa * kappa;
    let s = (2.0 * (k2 + 1.0) * (k2 + 1.0) * m * m + 4.0 * k2 * sigma * sigma).sqrt();
    let w = (2.0 * (k2 + 1.0) * (k2 + 1.0) * m / (s + 2.0 * kappa * sigma)
        - SQRT2 * (k2 - 1.0))
        / (2.0 * a * kappa * sigma);
    let branch = if m == 0.0 { Branch::Asymptotic } else { Branch::ClosedForm };
    UniAllocation {
        w,
        objective: ald_objective(w, p, r0, a),
        branch,
        feasibility_margin: Some(ald_domain(w, p, a)),
    }
}

/// Expansion regime for [`ald_weight_asymptotic`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `mu/sigma -> 0`: skewness term plus Markowitz-like correction.
    SmallRatio,
    /// `mu/sigma -> inf`: saturated weight `sqrt(2) / (a sigma kappa)`.
    LargeRatio,
}

/// Asymptotic allocation rules in the small- and large-`mu/sigma` regimes.
///
/// The large-ratio weight sits on the domain boundary, so its reported
/// objective is `-inf`; it is a limit rule, not an interior optimum.
pub fn ald_weight_asymptotic(p: &AldParams, a: RiskAversion, regime: Regime) -> UniAllocation {
    let a = a.value();
    let k = p.kappa;
    let k2 = k * k;
    let w = match regime {
        Regime::SmallRatio => {
            (-(k2 - 1.0) / (SQRT2 * k) + (k2 + 1.0) * (k2 + 1.0) / (4.0 * k2) * p.mu / p.sigma)
                / (a * p.sigma)
        }
        Regime::LargeRatio => SQRT2 / (a * p.sigma * k),
    };
    UniAllocation {
        w,
        objective: ald_objective(w, p, 0.0, a),
        branch: Branch::Asymptotic,
        feasibility_margin: Some(ald_domain(w, p, a)),
    }
}

/// Minimum location admitting a positive weight under a long-only
/// constraint: `sqrt(2) (kappa - 1) sigma`.
pub fn long_only_threshold(p: &AldParams) -> f64 {
    SQRT2 * (p.kappa - 1.0) * p.sigma
}

/// Gaussian weight after marginalizing the location over its prior:
/// `w = (mu0 - r0) / (a (sigma^2 + sigma0^2))`.
pub fn markowitz_weight_marginal(
    prior: &LocationPrior,
    sigma: f64,
    r0: f64,
    a: RiskAversion,
) -> UniAllocation {
    let a = a.value();
    let total_var = sigma * sigma + prior.sigma0 * prior.sigma0;
    let w = (prior.mu0 - r0) / (a * total_var);
    let objective = w * (prior.mu0 - r0) - 0.5 * a * w * w * total_var;
    UniAllocation { w, objective, branch: Branch::ClosedForm, feasibility_margin: None }
}

/// Marginalized objective for asymmetric-Laplace returns:
/// `w (mu0 - r0) - a sigma0^2 w^2 / 2 + ln(phi(w)) / a`.
pub fn ald_marginal_objective(
    w: f64,
    prior: &LocationPrior,
    p: &AldParams,
    r0: f64,
    a: f64,
) -> f64 {
    let phi = ald_domain(w, p, a);
    if phi <= 0.0 {
        f64::NEG_INFINITY
    } else {
        w * (prior.mu0 - r0) - 0.5 * a * prior.sigma0 * prior.sigma0 * w * w + phi.ln() / a
    }
}

/// Optimal weight for asymmetric-Laplace returns with the location
/// marginalized over a Gaussian prior: Cardano solution of the stationarity
/// cubic. The location field of `p` is ignored; the prior supplies it.
///
/// Among the real roots, the one inside the domain with a negative second
/// derivative of the objective (and the highest objective value) is
/// returned. With `sigma0 = 0` the cubic degenerates to the plain
/// quadratic rule.
pub fn ald_weight_marginal(
    prior: &LocationPrior,
    p: &AldParams,
    r0: f64,
    a: RiskAversion,
) -> Result<UniAllocation, AllocError> {
    let a = a.value();
    let m = prior.mu0 - r0;
    let (sigma, kappa) = (p.sigma, p.kappa);
    let s0 = prior.sigma0;
    let k2 = kappa * kappa;

    let c3 = a * a * a * kappa * sigma * sigma * s0 * s0;
    let c2 = a * a * (SQRT2 * (k2 - 1.0) * sigma * s0 * s0 - kappa * m * sigma * sigma);
    let c1 = -a * (SQRT2 * (k2 - 1.0) * m * sigma + 2.0 * kappa * (sigma * sigma + s0 * s0));
    let c0 = -SQRT2 * (k2 - 1.0) * sigma + 2.0 * kappa * m;

    let roots = cubic_roots(c3, c2, c1, c0);
    let mut best: Option<(f64, f64)> = None;
    for &w in &roots {
        let phi = ald_domain(w, p, a);
        if !(phi > 1e-14) {
            continue;
        }
        if marginal_second_derivative(w, prior, p, a) >= 0.0 {
            continue;
        }
        let obj = ald_marginal_objective(w, prior, p, r0, a);
        if best.map_or(true, |(_, b)| obj > b) {
            best = Some((w, obj));
        }
    }
    let (w, objective) = best.ok_or(AllocError::NoFeasibleRoot)?;
    Ok(UniAllocation {
        w,
        objective,
        branch: Branch::Cardano,
        feasibility_margin: Some(ald_domain(w, p, a)),
    })
}

fn marginal_second_derivative(w: f64, prior: &LocationPrior, p: &AldParams, a: f64) -> f64 {
    let phi = ald_domain(w, p, a);
    let dphi = a * p.mu_a() - a * a * p.sigma * p.sigma * w;
    let ddphi = -a * a * p.sigma * p.sigma;
    -a * prior.sigma0 * prior.sigma0 + (ddphi * phi - dphi * dphi) / (a * phi * phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn a(v: f64) -> RiskAversion {
        RiskAversion::new(v).unwrap()
    }

    fn ald(mu: f64, sigma: f64, kappa: f64) -> AldParams {
        AldParams::new(mu, sigma, kappa).unwrap()
    }

    #[test]
    fn markowitz_zero_excess_return() {
        let r = markowitz_weight(0.05, 0.6, 0.05, a(1.0));
        assert_eq!(r.w, 0.0);
    }

    #[test]
    fn markowitz_table_values() {
        let r = markowitz_weight(0.10, 0.57, 0.0, a(1.0));
        assert_relative_eq!(r.w, 0.10 / 0.3249, epsilon = 1e-12);
    }

    #[test]
    fn markowitz_halves_when_aversion_doubles() {
        let w1 = markowitz_weight(0.2, 0.5, 0.0, a(1.0)).w;
        let w2 = markowitz_weight(0.2, 0.5, 0.0, a(2.0)).w;
        assert_relative_eq!(w1, 2.0 * w2, epsilon = 1e-14);
    }

    #[test]
    fn ald_weight_symmetric_matches_closed_form() {
        // kappa=1: w = (sqrt(2 mu^2 + sigma^2) - sigma) / (a mu sigma)
        let p = ald(0.3, 0.8, 1.0);
        let got = ald_weight(&p, 0.0, a(1.3));
        let expected =
            ((2.0 * 0.3 * 0.3 + 0.8 * 0.8).sqrt() - 0.8) / (1.3 * 0.3 * 0.8);
        assert_relative_eq!(got.w, expected, epsilon = 1e-12);
        assert_eq!(got.branch, Branch::ClosedForm);
    }

    #[test]
    fn ald_weight_satisfies_stationarity_quadratic() {
        // paper form: a^2 k mu s^2 w^2 + a s (sqrt2 (k^2-1) mu + 2 k s) w
        //             + sqrt2 (k^2-1) s - 2 k mu = 0
        let p = ald(0.25, 0.7, 1.15);
        let av = 1.7;
        let w = ald_weight(&p, 0.0, a(av)).w;
        let (mu, s, k) = (p.mu, p.sigma, p.kappa);
        let k2 = k * k;
        let resid = av * av * k * mu * s * s * w * w
            + av * s * (SQRT2 * (k2 - 1.0) * mu + 2.0 * k * s) * w
            + SQRT2 * (k2 - 1.0) * s
            - 2.0 * k * mu;
        assert_abs_diff_eq!(resid, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn ald_weight_zero_location_extension() {
        let p = ald(0.0, 0.9, 1.2);
        let got = ald_weight(&p, 0.0, a(2.0));
        let expected = -(1.2 * 1.2 - 1.0) / (SQRT2 * 2.0 * 0.9 * 1.2);
        assert_relative_eq!(got.w, expected, epsilon = 1e-12);
        assert_eq!(got.branch, Branch::Asymptotic);
        // nonzero r0 with mu = r0 behaves identically
        let p2 = ald(0.05, 0.9, 1.2);
        let got2 = ald_weight(&p2, 0.05, a(2.0));
        assert_relative_eq!(got2.w, expected, epsilon = 1e-12);
    }

    #[test]
    fn asymptotic_large_ratio_value() {
        let p = ald(5.0, 1.0, 1.0);
        let got = ald_weight_asymptotic(&p, a(1.0), Regime::LargeRatio);
        assert_relative_eq!(got.w, SQRT2, epsilon = 1e-14);
        // independent of mu
        let p2 = ald(50.0, 1.0, 1.0);
        let got2 = ald_weight_asymptotic(&p2, a(1.0), Regime::LargeRatio);
        assert_eq!(got.w, got2.w);
    }

    #[test]
    fn asymptotic_small_ratio_tracks_exact_weight() {
        // at mu/sigma = 0.01 the O((mu/sigma)^2) error is ~1e-4 / (a sigma)
        let p = ald(0.01, 1.0, 1.0);
        let exact = ald_weight(&p, 0.0, a(1.0)).w;
        let approx_w = ald_weight_asymptotic(&p, a(1.0), Regime::SmallRatio).w;
        assert!((exact - approx_w).abs() < 1e-4);
    }

    #[test]
    fn long_only_threshold_values() {
        assert_eq!(long_only_threshold(&ald(0.0, 1.0, 1.0)), 0.0);
        // monthly SPX-like anchor: kappa = 1.13 -> 0.18 sigma
        let t = long_only_threshold(&ald(0.0, 1.0, 1.13));
        assert!((t - 0.18).abs() < 5e-3);
        assert_relative_eq!(
            long_only_threshold(&ald(0.0, 2.0, 1.5)),
            SQRT2,
            epsilon = 1e-12
        );
    }

    #[test]
    fn marginal_markowitz_values() {
        let prior = LocationPrior::new(0.1, 0.5).unwrap();
        let got = markowitz_weight_marginal(&prior, 0.5, 0.0, a(1.0));
        assert_relative_eq!(got.w, 0.2, epsilon = 1e-14);

        // sigma0 = 0 reduces to the plain rule
        let tight = LocationPrior::new(0.1, 0.0).unwrap();
        let plain = markowitz_weight(0.1, 0.57, 0.0, a(1.0));
        let reduced = markowitz_weight_marginal(&tight, 0.57, 0.0, a(1.0));
        assert_relative_eq!(reduced.w, plain.w, epsilon = 1e-14);
    }

    #[test]
    fn marginal_markowitz_vanishes_with_noisy_prior() {
        let prior_wide = LocationPrior::new(0.1, 100.0).unwrap();
        let prior_wider = LocationPrior::new(0.1, 1000.0).unwrap();
        let w1 = markowitz_weight_marginal(&prior_wide, 0.5, 0.0, a(1.0)).w.abs();
        let w2 = markowitz_weight_marginal(&prior_wider, 0.5, 0.0, a(1.0)).w.abs();
        assert!(w2 < w1);
        assert!(w2 < 1e-4);
    }

    #[test]
    fn marginal_ald_collapses_without_prior_uncertainty() {
        let p = ald(0.0, 0.6, 1.0);
        let prior = LocationPrior::new(0.22, 0.0).unwrap();
        let direct = ald_weight(&ald(0.22, 0.6, 1.0), 0.0, a(1.4));
        let marginal = ald_weight_marginal(&prior, &p, 0.0, a(1.4)).unwrap();
        assert_abs_diff_eq!(marginal.w, direct.w, epsilon = 1e-10);
    }

    #[test]
    fn marginal_ald_low_confidence_regime() {
        // mu0/sigma0 -> 0: w ~ (mu0 + sqrt(2)(1-kappa) sigma) / (a (sigma^2 + sigma0^2))
        let p = ald(0.0, 1.0, 1.01);
        let sigma0 = 2.0;
        let mu0 = 1e-4 * sigma0;
        let prior = LocationPrior::new(mu0, sigma0).unwrap();
        let got = ald_weight_marginal(&prior, &p, 0.0, a(1.0)).unwrap();
        let approx_w = (mu0 + SQRT2 * (1.0 - p.kappa) * p.sigma)
            / (1.0 * (p.sigma * p.sigma + sigma0 * sigma0));
        // agreement to first order in (kappa - 1)
        assert!((got.w - approx_w).abs() < 5e-4, "got {} approx {}", got.w, approx_w);
    }

    #[test]
    fn marginal_ald_high_confidence_regime() {
        // mu0/sigma0 -> inf: w -> sqrt(2) / (a sigma kappa)
        let p = ald(0.0, 0.8, 1.05);
        let prior = LocationPrior::new(100.0 * 0.01, 0.01).unwrap();
        let got = ald_weight_marginal(&prior, &p, 0.0, a(1.0)).unwrap();
        let saturated = SQRT2 / (1.0 * p.sigma * p.kappa);
        assert!(((got.w - saturated) / saturated).abs() < 0.01);
    }

    #[test]
    fn consistency_ladder_to_markowitz() {
        // kappa = 1, a -> 0, mu/sigma = 0.1: relative gap below 1e-2
        let p = ald(0.1, 1.0, 1.0);
        let av = 1e-3;
        let ald_w = ald_weight(&p, 0.0, a(av)).w;
        let mk_w = markowitz_weight(0.1, 1.0, 0.0, a(av)).w;
        assert!(((ald_w - mk_w) / mk_w).abs() < 1e-2);
    }
}
