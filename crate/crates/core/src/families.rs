//! Model families and the functions that map each regression model onto the
//! common GLM form: canonical parameter, cumulant, conditional mean, score
//! weights, and the IRLS working weight/response.

use crate::error::Error;

/// Normal distribution pdf.
pub fn normal_pdf(x: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Normal distribution cdf, absolute error well below 1e-12 over the real
/// line (series for the central range, continued fraction for the tails).
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

fn erfc(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax < 3.0 {
        1.0 - erf_series(ax)
    } else {
        erfc_cf(ax)
    };
    if x < 0.0 {
        2.0 - v
    } else {
        v
    }
}

/// Maclaurin series for erf, used on [0, 3).
fn erf_series(x: f64) -> f64 {
    const TWO_OVER_SQRT_PI: f64 = 1.128_379_167_095_512_6;
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 1u32;
    loop {
        term *= -x2 / n as f64;
        let contrib = term / (2 * n + 1) as f64;
        sum += contrib;
        if contrib.abs() < 1e-18 * sum.abs().max(1e-300) || n > 200 {
            break;
        }
        n += 1;
    }
    TWO_OVER_SQRT_PI * sum
}

/// Continued fraction for erfc on [3, inf):
/// erfc(x) = exp(-x^2)/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))),
/// evaluated by backward recurrence.
fn erfc_cf(x: f64) -> f64 {
    const SQRT_PI: f64 = 1.772_453_850_905_516;
    let mut tail = 0.0;
    for k in (1..=120).rev() {
        tail = (k as f64 / 2.0) / (x + tail);
    }
    (-x * x).exp() / SQRT_PI / (x + tail)
}

/// Family of the GLM / PML model being estimated. The dispersion `nu` of the
/// Negative Binomial is user-supplied, never estimated. The scaling factor of
/// the weights is fixed to 1; per-observation weights enter through `alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelFamily {
    Poisson,
    Logit,
    Probit,
    NegativeBinomial { nu: f64 },
    GammaPml,
    GaussianLogLink,
    InverseGaussianPml,
}

impl ModelFamily {
    pub fn name(&self) -> &'static str {
        match self {
            ModelFamily::Poisson => "poisson",
            ModelFamily::Logit => "logit",
            ModelFamily::Probit => "probit",
            ModelFamily::NegativeBinomial { .. } => "negbin",
            ModelFamily::GammaPml => "gamma-pml",
            ModelFamily::GaussianLogLink => "gaussian-log",
            ModelFamily::InverseGaussianPml => "invgauss-pml",
        }
    }

    /// Upper bound on the conditional mean: 1 for the binary/fractional
    /// families, infinity otherwise.
    pub fn bound(&self) -> f64 {
        match self {
            ModelFamily::Logit | ModelFamily::Probit => 1.0,
            _ => f64::INFINITY,
        }
    }

    /// Whether the outcome lives in [0, 1].
    pub fn is_bounded(&self) -> bool {
        self.bound().is_finite()
    }

    /// Whether each observation's log-likelihood has a finite upper bound.
    /// False exactly for the Gamma and Inverse Gaussian PML estimators, which
    /// follow different existence conditions.
    pub fn likelihood_bounded(&self) -> bool {
        !matches!(
            self,
            ModelFamily::GammaPml | ModelFamily::InverseGaussianPml
        )
    }

    fn check_eta(&self, eta: f64) -> Result<(), Error> {
        if !eta.is_finite() {
            return Err(Error::Domain(format!(
                "non-finite linear predictor {eta}"
            )));
        }
        if let ModelFamily::NegativeBinomial { nu } = self {
            if !(*nu > 0.0) {
                return Err(Error::Domain(format!("negbin dispersion must be > 0, got {nu}")));
            }
        }
        Ok(())
    }

    fn check_y(&self, y: f64) -> Result<(), Error> {
        if !y.is_finite() || y < 0.0 {
            return Err(Error::Domain(format!("outcome must be finite and >= 0, got {y}")));
        }
        if self.is_bounded() && y > self.bound() {
            return Err(Error::Domain(format!(
                "outcome must be <= {} for family {}, got {y}",
                self.bound(),
                self.name()
            )));
        }
        Ok(())
    }

    /// Conditional mean as a function of the linear predictor.
    pub fn mean(&self, eta: f64) -> Result<f64, Error> {
        self.check_eta(eta)?;
        Ok(match self {
            ModelFamily::Logit => sigmoid(eta),
            ModelFamily::Probit => normal_cdf(eta),
            _ => eta.exp(),
        })
    }

    /// Per-observation log-likelihood up to the y-only constant (PML
    /// convention: the c(alpha, y) term is always omitted).
    pub fn loglik_contribution(&self, y: f64, eta: f64, alpha: f64) -> Result<f64, Error> {
        self.check_eta(eta)?;
        self.check_y(y)?;
        Ok(match self {
            ModelFamily::Poisson => alpha * (y * eta - eta.exp()),
            ModelFamily::Logit => alpha * (y * eta - ln_1p_exp(eta)),
            ModelFamily::Probit => {
                let mu = normal_cdf(eta);
                alpha * (y * mu.ln() + (1.0 - y) * (1.0 - mu).ln())
            }
            ModelFamily::NegativeBinomial { nu } => {
                let log_nu_plus_mu = ln_nu_plus_exp(*nu, eta);
                alpha * (y * (eta - log_nu_plus_mu) - nu * log_nu_plus_mu)
            }
            ModelFamily::GammaPml => -alpha * y * (-eta).exp() - alpha * eta,
            ModelFamily::GaussianLogLink => alpha * (y * eta.exp() - 0.5 * (2.0 * eta).exp()),
            ModelFamily::InverseGaussianPml => {
                alpha * (-(y / 2.0) * (-2.0 * eta).exp() + (-eta).exp())
            }
        })
    }

    /// Scalar score contribution: the term that multiplies x_mi in the
    /// first-order condition for beta_m.
    pub fn score_contribution(&self, y: f64, eta: f64, alpha: f64) -> Result<f64, Error> {
        self.check_eta(eta)?;
        self.check_y(y)?;
        Ok(match self {
            ModelFamily::Poisson => alpha * (y - eta.exp()),
            ModelFamily::Logit => alpha * (y - sigmoid(eta)),
            ModelFamily::Probit => {
                let mu = normal_cdf(eta);
                alpha * normal_pdf(eta) / (mu * (1.0 - mu)) * (y - mu)
            }
            ModelFamily::NegativeBinomial { nu } => {
                let mu = eta.exp();
                alpha * (y - mu) / (1.0 + mu / nu)
            }
            ModelFamily::GammaPml => alpha * (y - eta.exp()) * (-eta).exp(),
            ModelFamily::GaussianLogLink => alpha * (y - eta.exp()) * eta.exp(),
            ModelFamily::InverseGaussianPml => alpha * (y - eta.exp()) * (-2.0 * eta).exp(),
        })
    }

    /// IRLS working weight psi = alpha * b''(theta) * theta'(eta)^2 and
    /// working response q = (y - mu) / (b''(theta) theta'(eta)) + eta.
    ///
    /// `weight_floor` guards against observations whose mean is collapsing to
    /// a boundary; a weight below the floor is reported as an error rather
    /// than silently propagated into the normal equations.
    pub fn irls_weight_and_response(
        &self,
        y: f64,
        eta: f64,
        alpha: f64,
        weight_floor: f64,
    ) -> Result<(f64, f64), Error> {
        self.check_eta(eta)?;
        self.check_y(y)?;
        // b'' * theta' appears in both psi and q
        let (psi, b2_theta1) = match self {
            ModelFamily::Poisson => {
                let mu = eta.exp();
                (alpha * mu, mu)
            }
            ModelFamily::Logit => {
                let mu = sigmoid(eta);
                let v = mu * (1.0 - mu);
                (alpha * v, v)
            }
            ModelFamily::Probit => {
                let mu = normal_cdf(eta);
                let pdf = normal_pdf(eta);
                (alpha * pdf * pdf / (mu * (1.0 - mu)), pdf)
            }
            ModelFamily::NegativeBinomial { nu } => {
                let mu = eta.exp();
                (alpha * mu * nu / (nu + mu), mu)
            }
            ModelFamily::GammaPml => (alpha, eta.exp()),
            ModelFamily::GaussianLogLink => {
                let e = eta.exp();
                (alpha * e * e, e)
            }
            ModelFamily::InverseGaussianPml => ((-eta).exp() * alpha, eta.exp()),
        };
        if !(psi > weight_floor) || !psi.is_finite() {
            return Err(Error::DegenerateWeight { eta, psi });
        }
        let mu = self.mean(eta)?;
        let q = (y - mu) / b2_theta1 + eta;
        Ok((psi, q))
    }
}

fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + exp(eta)) without overflow.
fn ln_1p_exp(eta: f64) -> f64 {
    if eta > 35.0 {
        eta
    } else {
        eta.exp().ln_1p()
    }
}

/// ln(nu + exp(eta)) without overflow.
fn ln_nu_plus_exp(nu: f64, eta: f64) -> f64 {
    if eta > 700.0 {
        eta + (nu * (-eta).exp()).ln_1p()
    } else {
        (nu + eta.exp()).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const ALL: [ModelFamily; 7] = [
        ModelFamily::Poisson,
        ModelFamily::Logit,
        ModelFamily::Probit,
        ModelFamily::NegativeBinomial { nu: 1.0 },
        ModelFamily::GammaPml,
        ModelFamily::GaussianLogLink,
        ModelFamily::InverseGaussianPml,
    ];

    /// Independent oracle for the normal cdf: Simpson quadrature of the pdf.
    fn normal_cdf_quadrature(x: f64) -> f64 {
        let a = -10.0;
        let n = 20_000; // even
        let h = (x - a) / n as f64;
        let mut s = normal_pdf(a) + normal_pdf(x);
        for i in 1..n {
            let xi = a + i as f64 * h;
            s += normal_pdf(xi) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn mean_examples() {
        assert_eq!(ModelFamily::Poisson.mean(0.0).unwrap(), 1.0);
        assert_eq!(ModelFamily::Logit.mean(0.0).unwrap(), 0.5);
        let oracle = normal_cdf_quadrature(1.959964);
        assert!((oracle - 0.975).abs() < 1e-6);
        assert!((ModelFamily::Probit.mean(1.959964).unwrap() - oracle).abs() < 1e-6);
    }

    #[test]
    fn normal_cdf_matches_quadrature() {
        for &x in &[-6.0, -3.2, -1.0, -0.3, 0.0, 0.4, 1.0, 2.5, 4.7, 7.0] {
            let q = normal_cdf_quadrature(x);
            assert!(
                (normal_cdf(x) - q).abs() < 1e-9,
                "x={x}: {} vs {q}",
                normal_cdf(x)
            );
        }
    }

    #[test]
    fn mean_rejects_non_finite_eta() {
        assert!(ModelFamily::Poisson.mean(f64::NAN).is_err());
        assert!(ModelFamily::Logit.mean(f64::INFINITY).is_err());
    }

    #[test]
    fn loglik_examples() {
        assert_eq!(
            ModelFamily::Poisson.loglik_contribution(0.0, 0.0, 1.0).unwrap(),
            -1.0
        );
        assert_eq!(
            ModelFamily::GammaPml.loglik_contribution(1.0, 0.0, 1.0).unwrap(),
            -1.0
        );
        let l = ModelFamily::Logit.loglik_contribution(1.0, 2.0, 1.0).unwrap();
        assert!((l - (-(1.0 + (-2.0f64).exp()).ln())).abs() < 1e-9);
        assert!((l + 0.126928).abs() < 1e-6);
    }

    #[test]
    fn loglik_rejects_out_of_range_y() {
        assert!(ModelFamily::Poisson.loglik_contribution(-1.0, 0.0, 1.0).is_err());
        assert!(ModelFamily::Logit.loglik_contribution(1.5, 0.0, 1.0).is_err());
    }

    #[test]
    fn score_examples() {
        assert_eq!(
            ModelFamily::Poisson.score_contribution(1.0, 0.0, 1.0).unwrap(),
            0.0
        );
        let s = ModelFamily::GammaPml.score_contribution(0.0, -3.0, 1.0).unwrap();
        assert!((s + 1.0).abs() < 1e-12);
        let s = ModelFamily::NegativeBinomial { nu: 1.0 }
            .score_contribution(2.0, 0.0, 1.0)
            .unwrap();
        assert!((s - 0.5).abs() < 1e-12);
    }

    #[test]
    fn irls_examples() {
        let (psi, q) = ModelFamily::Poisson
            .irls_weight_and_response(1.0, 0.0, 1.0, 1e-12)
            .unwrap();
        assert_eq!((psi, q), (1.0, 0.0));
        let (psi, q) = ModelFamily::Poisson
            .irls_weight_and_response(0.0, 0.0, 1.0, 1e-12)
            .unwrap();
        assert_eq!((psi, q), (1.0, -1.0));
        let (psi, q) = ModelFamily::Logit
            .irls_weight_and_response(1.0, 0.0, 1.0, 1e-12)
            .unwrap();
        assert!((psi - 0.25).abs() < 1e-12);
        assert!((q - 2.0).abs() < 1e-12);
    }

    #[test]
    fn irls_degenerate_weight_is_an_error() {
        let err = ModelFamily::Poisson
            .irls_weight_and_response(0.0, -40.0, 1.0, 1e-12)
            .unwrap_err();
        assert!(matches!(err, Error::DegenerateWeight { .. }));
    }

    #[test]
    fn score_is_derivative_of_loglik() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for fam in ALL {
            for _ in 0..200 {
                let eta: f64 = rng.gen_range(-5.0..5.0);
                let y: f64 = if fam.is_bounded() {
                    rng.gen_range(0.0..=1.0)
                } else {
                    rng.gen_range(0.0..6.0)
                };
                // five-point stencil; a plain central difference is too
                // coarse for the probit tails
                let h = 1e-4;
                let f = |e: f64| fam.loglik_contribution(y, e, 1.0).unwrap();
                let fd = (8.0 * (f(eta + h) - f(eta - h)) - (f(eta + 2.0 * h) - f(eta - 2.0 * h)))
                    / (12.0 * h);
                let s = fam.score_contribution(y, eta, 1.0).unwrap();
                let scale = s.abs().max(fd.abs()).max(1.0);
                assert!(
                    (fd - s).abs() / scale < 1e-5,
                    "{}: eta={eta}, y={y}: fd={fd} score={s}",
                    fam.name()
                );
            }
        }
    }

    #[test]
    fn mean_is_monotone_and_respects_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for fam in ALL {
            for _ in 0..200 {
                // stay where the probit mean is strictly inside (0, 1) in
                // double precision
                let span = if fam.is_bounded() { 6.0 } else { 20.0 };
                let a: f64 = rng.gen_range(-span..span);
                let b: f64 = rng.gen_range(-span..span);
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                if hi - lo < 1e-3 {
                    continue;
                }
                let ml = fam.mean(lo).unwrap();
                let mh = fam.mean(hi).unwrap();
                assert!(ml < mh, "{}: mean not increasing on [{lo},{hi}]", fam.name());
                if fam.is_bounded() {
                    assert!(ml > 0.0 && mh < 1.0);
                }
            }
        }
    }

    #[test]
    fn likelihood_bounded_flags() {
        for fam in ALL {
            let expect = !matches!(fam, ModelFamily::GammaPml | ModelFamily::InverseGaussianPml);
            assert_eq!(fam.likelihood_bounded(), expect);
        }
    }
}
