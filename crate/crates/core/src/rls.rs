//! TV-VAR identification by recursive least squares with a forgetting
//! factor, including the two OLS limits and MSPE order selection.
//!
//! The adaptation factor `c` sets the memory: `c = 0` accumulates forever
//! (global OLS over the whole record), `0 < c < 1` forgets at rate `1 - c`
//! per step, and `c = 1` is memoryless (independent per-step OLS across
//! realizations, which requires `R >= M^2 p`).

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::var::{EpochData, TvVarModel};

/// Relative MSPE slack of the order-selection parsimony rule.
const MSPE_TIE_BAND: f64 = 0.01;
/// Auto ridge: `1e-2` times the mean per-channel variance of the data.
const AUTO_DELTA_FACTOR: f64 = 1e-2;

/// Identification settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RlsConfig {
    /// Model order `p`.
    pub p: usize,
    /// Adaptation factor in `[0, 1]`; the forgetting factor is `1 - c`.
    pub c: f64,
    /// Half-width of the uniform distribution initializing the coefficients.
    pub init_scale: f64,
    /// Ridge constant initializing the past-state correlation matrix.
    /// `None` resolves to `1e-2` times the data variance scale.
    pub delta: Option<f64>,
    /// Seed of the coefficient initialization.
    pub seed: u64,
}

impl RlsConfig {
    pub fn new(p: usize, c: f64) -> Self {
        Self {
            p,
            c,
            init_scale: 1.0,
            delta: None,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::InvalidParameter(String::from(
                "model order must be at least 1",
            )));
        }
        if !(0.0..=1.0).contains(&self.c) {
            return Err(Error::InvalidParameter(String::from(
                "adaptation factor c must lie in [0, 1]",
            )));
        }
        if !(self.init_scale >= 0.0) {
            return Err(Error::InvalidParameter(String::from(
                "init_scale must be non-negative",
            )));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0) {
                return Err(Error::InvalidParameter(String::from(
                    "delta must be positive",
                )));
            }
        }
        Ok(())
    }

    /// The ridge constant actually used for `data`: the explicit value when
    /// set, otherwise `1e-2` times the mean per-channel variance.
    pub fn resolve_delta(&self, data: &EpochData) -> f64 {
        self.delta.unwrap_or_else(|| {
            let vars = data.channel_variances();
            AUTO_DELTA_FACTOR * vars.iter().sum::<f64>() / vars.len() as f64
        })
    }
}

/// Mutable state of the recursion: correlation matrix of the past states,
/// current coefficient estimate and current residual covariance estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct RlsState {
    /// `(M*p) x (M*p)` correlation matrix of the stacked past states.
    pub phi_w: DMatrix<f64>,
    /// `M x (M*p)` coefficient estimate.
    pub a_hat: DMatrix<f64>,
    /// `M x M` residual covariance estimate.
    pub sigma_hat: DMatrix<f64>,
}

/// Initial conditions at step `t_p`: coefficients drawn i.i.d. uniform on
/// `[-init_scale, init_scale]`, `Phi^w = delta * I`, `Sigma = I`.
pub fn init_state(config: &RlsConfig, m: usize, delta: f64) -> RlsState {
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let s = config.init_scale;
    let a_hat = DMatrix::from_fn(m, m * config.p, |_, _| {
        if s > 0.0 {
            rng.random_range(-s..=s)
        } else {
            0.0
        }
    });
    RlsState {
        phi_w: DMatrix::identity(m * config.p, m * config.p) * delta,
        a_hat,
        sigma_hat: DMatrix::identity(m, m),
    }
}

/// Identifies a TV-VAR model from epoch data.
///
/// Per step: correlation update, gain by linear solve against `Phi^w`,
/// a-priori error, coefficient update; then the covariance recursion
/// matching the memory regime (exponential for `0 < c < 1`, running mean
/// for `c = 0`, direct residual covariance for the per-step OLS at
/// `c = 1`). Steps `0..p` are reported unavailable.
pub fn rls_identify(data: &EpochData, config: &RlsConfig) -> Result<TvVarModel> {
    rls_identify_with_mspe(data, config).map(|(model, _)| model)
}

/// As [`rls_identify`], additionally returning the mean squared a-priori
/// prediction error per scalar observation.
pub fn rls_identify_with_mspe(data: &EpochData, config: &RlsConfig) -> Result<(TvVarModel, f64)> {
    config.validate()?;
    let r = data.realizations();
    let m = data.channels();
    let t_len = data.samples_per_channel();
    let p = config.p;
    if t_len <= p {
        return Err(Error::InsufficientLength { t_len, p });
    }
    if config.c == 1.0 && r < m * m * p {
        return Err(Error::InvalidParameter(alloc::format!(
            "per-step OLS (c = 1) requires R >= M^2 p = {}, got R = {r}",
            m * m * p
        )));
    }

    let delta = config.resolve_delta(data);
    let mut state = init_state(config, m, delta);
    let mut coeffs = vec![DMatrix::<f64>::zeros(m, m * p); t_len];
    let mut sigmas = vec![DMatrix::<f64>::identity(m, m); t_len];
    let mut sse = 0.0;

    for t in p..t_len {
        let w = data.past_matrix(t, p);
        let y = data.present_matrix(t);
        let z = &y - &state.a_hat * &w;
        sse += z.norm_squared();

        if config.c == 1.0 {
            let gram = &w * w.transpose();
            let chol = gram
                .cholesky()
                .ok_or(Error::SingularNormalEquations { t })?;
            let a_t = chol.solve(&(&w * y.transpose()));
            state.a_hat = a_t.transpose();
            let resid = &y - &state.a_hat * &w;
            state.sigma_hat = (&resid * resid.transpose()) / r as f64;
        } else {
            state.phi_w = &state.phi_w * (1.0 - config.c) + &w * w.transpose();
            let chol = state
                .phi_w
                .clone()
                .cholesky()
                .ok_or(Error::SingularNormalEquations { t })?;
            let gain = chol.solve(&w);
            state.a_hat += &z * gain.transpose();
            let zz = (&z * z.transpose()) / r as f64;
            if config.c == 0.0 {
                let seen = (t - p + 1) as f64;
                state.sigma_hat += (zz - &state.sigma_hat) / seen;
            } else {
                state.sigma_hat += (zz - &state.sigma_hat) * config.c;
            }
        }
        state.sigma_hat = 0.5 * (&state.sigma_hat + state.sigma_hat.transpose());
        coeffs[t] = state.a_hat.clone();
        sigmas[t] = state.sigma_hat.clone();
    }

    let mspe = sse / ((t_len - p) as f64 * m as f64 * r as f64);
    let model = TvVarModel::from_estimates(coeffs, sigmas, data.fs(), p)?;
    Ok((model, mspe))
}

/// Scans orders `1..=pmax` and returns the smallest order whose MSPE lies
/// within 1% of the minimum.
pub fn select_order_mspe(data: &EpochData, c: f64, pmax: usize) -> Result<usize> {
    if pmax == 0 {
        return Err(Error::InvalidParameter(String::from(
            "maximum scan order must be at least 1",
        )));
    }
    if data.samples_per_channel() <= pmax {
        return Err(Error::InsufficientLength {
            t_len: data.samples_per_channel(),
            p: pmax,
        });
    }
    let mut mspes = Vec::with_capacity(pmax);
    for p in 1..=pmax {
        let (_, mspe) = rls_identify_with_mspe(data, &RlsConfig::new(p, c))?;
        mspes.push(mspe);
    }
    let min = mspes.iter().cloned().fold(f64::INFINITY, f64::min);
    let selected = mspes
        .iter()
        .position(|&v| v <= min * (1.0 + MSPE_TIE_BAND))
        .expect("minimum exists");
    Ok(selected + 1)
}
