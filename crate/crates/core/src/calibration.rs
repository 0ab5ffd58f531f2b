//! Maximum-likelihood fit of an OU process to equally spaced log prices.
//!
//! Sampled at spacing `dt`, the OU log price is an exact AR(1):
//! `x[i+1] = a + b x[i] + e[i]` with `b = exp(-mu dt)`, `a = theta (1 - b)`
//! and `Var(e) = sigma^2 (1 - b^2) / (2 mu)`. Conditional on the first
//! observation, the likelihood is maximized by the least-squares regression,
//! so the fit is closed form. Standard errors come from the delta method on
//! the asymptotic covariance of `(a, b, s^2)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_OBSERVATIONS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuFit {
    pub mu: Estimate,
    pub theta: Estimate,
    pub sigma: Estimate,
    pub n_observations: usize,
    pub dt: f64,
    /// Maximized conditional log-likelihood of the log prices.
    pub log_likelihood: f64,
}

/// Fits `(mu, theta, sigma)` to positive prices observed every `dt`.
pub fn fit_prices(prices: &[f64], dt: f64) -> Result<OuFit> {
    if let Some((i, p)) = prices
        .iter()
        .enumerate()
        .find(|(_, p)| !(**p > 0.0 && p.is_finite()))
    {
        return Err(Error::Calibration(format!(
            "price {p} at row {i} is not positive and finite"
        )));
    }
    let logs: Vec<f64> = prices.iter().map(|p| p.ln()).collect();
    fit_log_prices(&logs, dt)
}

pub fn fit_log_prices(x: &[f64], dt: f64) -> Result<OuFit> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Calibration(format!("dt must be positive, got {dt}")));
    }
    if x.len() < MIN_OBSERVATIONS {
        return Err(Error::Calibration(format!(
            "need at least {MIN_OBSERVATIONS} observations, got {}",
            x.len()
        )));
    }
    let prev = &x[..x.len() - 1];
    let next = &x[1..];
    let n = prev.len() as f64;
    let mean_p = prev.iter().sum::<f64>() / n;
    let mean_n = next.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (p, q) in prev.iter().zip(next) {
        sxx += (p - mean_p) * (p - mean_p);
        sxy += (p - mean_p) * (q - mean_n);
    }
    if sxx <= 0.0 {
        return Err(Error::Calibration(
            "log prices have zero variance; the series is degenerate".into(),
        ));
    }
    let b = sxy / sxx;
    let a = mean_n - b * mean_p;
    let rss: f64 = prev
        .iter()
        .zip(next)
        .map(|(p, q)| (q - a - b * p).powi(2))
        .sum();
    let s2 = rss / n;
    if !(s2 > 0.0) {
        return Err(Error::Calibration(
            "residual variance is zero; the series is degenerate".into(),
        ));
    }
    if !(b > 0.0 && b < 1.0) {
        return Err(Error::Calibration(format!(
            "autoregression slope {b} is outside (0, 1); the data show no mean reversion"
        )));
    }

    let mu = -b.ln() / dt;
    let theta = a / (1.0 - b);
    let sigma2 = 2.0 * mu * s2 / (1.0 - b * b);
    let sigma = sigma2.sqrt();

    // Cov(a, b) = s2 (X'X)^-1 with X = [1, x_prev]; Var(s2) = 2 s2^2 / n.
    let var_b = s2 / sxx;
    let var_a = s2 * (1.0 / n + mean_p * mean_p / sxx);
    let cov_ab = -s2 * mean_p / sxx;
    let var_s2 = 2.0 * s2 * s2 / n;

    let dmu_db = -1.0 / (b * dt);
    let dtheta_da = 1.0 / (1.0 - b);
    let dtheta_db = a / (1.0 - b).powi(2);
    let dlnsig_db = 0.5 * (dmu_db / mu + 2.0 * b / (1.0 - b * b));
    let dlnsig_ds2 = 0.5 / s2;

    let se_mu = dmu_db.abs() * var_b.sqrt();
    let se_theta = (dtheta_da * dtheta_da * var_a
        + 2.0 * dtheta_da * dtheta_db * cov_ab
        + dtheta_db * dtheta_db * var_b)
        .sqrt();
    let se_sigma =
        sigma * (dlnsig_db * dlnsig_db * var_b + dlnsig_ds2 * dlnsig_ds2 * var_s2).sqrt();

    let log_likelihood = -0.5 * n * ((2.0 * std::f64::consts::PI * s2).ln() + 1.0);
    Ok(OuFit {
        mu: Estimate {
            value: mu,
            std_error: se_mu,
        },
        theta: Estimate {
            value: theta,
            std_error: se_theta,
        },
        sigma: Estimate {
            value: sigma,
            std_error: se_sigma,
        },
        n_observations: x.len(),
        dt,
        log_likelihood,
    })
}

/// Checks that `times` advance by `dt` within a relative `tolerance`.
pub fn check_uniform_spacing(times: &[f64], dt: f64, tolerance: f64) -> Result<()> {
    for (i, w) in times.windows(2).enumerate() {
        let step = w[1] - w[0];
        if !((step - dt).abs() <= tolerance * dt) {
            return Err(Error::Calibration(format!(
                "timestamps are not uniformly spaced: step {step} between rows {i} and {} (expected {dt})",
                i + 1
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use crate::simulation::{sample_path, PathSpec};

    #[test]
    fn recovers_simulated_parameters() {
        let p = ModelParams::new(0.8, 1.0, 0.2, 0.05).unwrap();
        let spec = PathSpec {
            x0: 1.0,
            dt: 1.0 / 252.0,
            n_steps: 20_000,
            seed: 11,
        };
        let path = sample_path(&spec, &p).unwrap();
        let fit = fit_log_prices(&path.x, spec.dt).unwrap();
        for (est, truth) in [(fit.mu, 0.8), (fit.theta, 1.0), (fit.sigma, 0.2)] {
            assert!(
                (est.value - truth).abs() < 3.0 * est.std_error,
                "{est:?} vs {truth}"
            );
        }
    }

    #[test]
    fn standard_errors_match_known_ar1_limits() {
        // For a long stationary AR(1), Var(b_hat) ~ (1 - b^2) / n.
        let p = ModelParams::new(0.8, 1.0, 0.2, 0.05).unwrap();
        let spec = PathSpec {
            x0: 1.0,
            dt: 1.0 / 252.0,
            n_steps: 50_000,
            seed: 5,
        };
        let fit = fit_log_prices(&sample_path(&spec, &p).unwrap().x, spec.dt).unwrap();
        let b = (-0.8 / 252.0f64).exp();
        let se_b = ((1.0 - b * b) / 50_000.0).sqrt();
        let se_mu = se_b / (b / 252.0);
        assert!(
            (fit.mu.std_error / se_mu - 1.0).abs() < 0.1,
            "{} vs {se_mu}",
            fit.mu.std_error
        );
        // sigma is estimated from increments: relative SE ~ 1 / sqrt(2n).
        let rel = fit.sigma.std_error / fit.sigma.value;
        assert!(
            (rel * (2.0 * 50_000.0f64).sqrt() - 1.0).abs() < 0.1,
            "{rel}"
        );
    }

    #[test]
    fn rejects_bad_input() {
        let flat = vec![3.0; 100];
        assert!(
            matches!(fit_prices(&flat, 0.01), Err(Error::Calibration(m)) if m.contains("degenerate"))
        );
        let short: Vec<f64> = (0..29).map(|i| 1.0 + 0.1 * (i as f64).sin()).collect();
        assert!(
            matches!(fit_prices(&short, 0.01), Err(Error::Calibration(m)) if m.contains("at least 30"))
        );
        let mut neg: Vec<f64> = (0..40).map(|i| 1.0 + 0.1 * (i as f64).sin()).collect();
        neg[7] = -1.0;
        assert!(
            matches!(fit_prices(&neg, 0.01), Err(Error::Calibration(m)) if m.contains("row 7"))
        );
        assert!(check_uniform_spacing(&[0.0, 0.1, 0.2, 0.35], 0.1, 1e-6).is_err());
        assert!(check_uniform_spacing(&[0.0, 0.1, 0.2, 0.3], 0.1, 1e-6).is_ok());
    }
}
