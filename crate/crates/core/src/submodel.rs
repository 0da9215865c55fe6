//! Lagged covariance structure, restricted sub-process models and
//! time-resolved entropy rates.
//!
//! At a stable time step the model admits a stationary representation whose
//! lagged covariances `Gamma_k = E[Y(t) Y(t-k)^T]` solve the Yule-Walker
//! equations. Restricting those covariances to a channel subset yields the
//! normal equations of a finite-order sub-process model, whose innovation
//! covariance feeds the Gaussian entropy rate.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_traits::Float;

use crate::error::{Error, Result};
use crate::var::{companion_is_stable, TvVarModel};

/// Maximum fixed-point sweeps for the stationary-covariance solve.
const LYAPUNOV_MAX_ITERS: usize = 10_000;
/// Relative tolerance of the fixed-point iteration.
const LYAPUNOV_TOL: f64 = 1e-12;
/// Largest companion dimension for which the direct vectorized solve is
/// attempted as a fallback.
const DIRECT_SOLVE_MAX_DIM: usize = 64;

/// Lagged covariances `Gamma_0 .. Gamma_L` of the full process at one time
/// step. Negative lags follow from `Gamma_{-k} = Gamma_k^T` and are not
/// stored.
#[derive(Debug, Clone, PartialEq)]
pub struct LaggedCovariance {
    m: usize,
    gammas: Vec<DMatrix<f64>>,
}

impl LaggedCovariance {
    pub fn channels(&self) -> usize {
        self.m
    }

    /// Largest stored lag `L`.
    pub fn max_lag(&self) -> usize {
        self.gammas.len() - 1
    }

    /// `Gamma_k` for `k in 0..=L`.
    pub fn gamma(&self, k: usize) -> &DMatrix<f64> {
        &self.gammas[k]
    }

    /// `Gamma_k` for signed `k`, materializing the transpose for `k < 0`.
    pub fn gamma_signed(&self, k: i64) -> DMatrix<f64> {
        if k >= 0 {
            self.gammas[k as usize].clone()
        } else {
            self.gammas[(-k) as usize].transpose()
        }
    }
}

/// Solves the companion-form discrete Lyapunov equation
/// `G = A G A^T + S` by fixed-point iteration, falling back to the direct
/// vectorized solve for small companion dimensions.
fn stationary_companion_covariance(
    a: &DMatrix<f64>,
    s: &DMatrix<f64>,
    t: usize,
) -> Result<DMatrix<f64>> {
    let mut g = s.clone();
    for _ in 0..LYAPUNOV_MAX_ITERS {
        let next = a * &g * a.transpose() + s;
        let scale = next.amax().max(1.0);
        let delta = (&next - &g).amax();
        g = next;
        if delta <= LYAPUNOV_TOL * scale {
            let half = 0.5 * (&g + g.transpose());
            return Ok(half);
        }
    }
    let n = a.nrows();
    if n <= DIRECT_SOLVE_MAX_DIM {
        // vec(A G A^T) = (A (x) A) vec(G), so (I - A (x) A) vec(G) = vec(S).
        let kron = a.kronecker(a);
        let sys = DMatrix::<f64>::identity(n * n, n * n) - kron;
        let rhs = DVector::from_column_slice(s.as_slice());
        if let Some(sol) = sys.lu().solve(&rhs) {
            let g = DMatrix::from_column_slice(n, n, sol.as_slice());
            return Ok(0.5 * (&g + g.transpose()));
        }
    }
    Err(Error::LyapunovFailure { t })
}

/// Lagged covariance structure of the full process at time step `t`.
///
/// `Gamma_0 .. Gamma_{p-1}` are read off the stationary covariance of the
/// companion-form state; higher lags follow the recursion
/// `Gamma_k = sum_j A_j(t) Gamma_{k-j}`.
pub fn yule_walker_covariance(
    model: &TvVarModel,
    t: usize,
    max_lag: usize,
) -> Result<LaggedCovariance> {
    let m = model.m();
    let p = model.p();
    if max_lag < p {
        return Err(Error::InvalidParameter(alloc::format!(
            "max lag {max_lag} must be at least the model order {p}"
        )));
    }
    let companion = model
        .companion_at(t)
        .ok_or(Error::InvalidParameter(alloc::format!(
            "time step {t} is not available in the model"
        )))?;
    if !companion_is_stable(&companion) {
        return Err(Error::NoStationarySolution { t });
    }
    let sigma = model.sigma_at(t).expect("step available");
    let n = m * p;
    let mut s = DMatrix::<f64>::zeros(n, n);
    s.view_mut((0, 0), (m, m)).copy_from(sigma);

    let state_cov = stationary_companion_covariance(&companion, &s, t)?;

    // block (0, k) of the state covariance is E[Y(t) Y(t-k)^T] = Gamma_k
    let mut gammas: Vec<DMatrix<f64>> = (0..p)
        .map(|k| state_cov.view((0, m * k), (m, m)).into_owned())
        .collect();
    gammas[0] = 0.5 * (&gammas[0] + gammas[0].transpose());
    let coeffs = model.coeffs_at(t).expect("step available");
    for k in p..=max_lag {
        let mut gk = DMatrix::<f64>::zeros(m, m);
        for j in 1..=p {
            let a_j = coeffs.columns((j - 1) * m, m);
            let lag = k as i64 - j as i64;
            let prev = if lag >= 0 {
                gammas[lag as usize].clone()
            } else {
                gammas[(-lag) as usize].transpose()
            };
            gk += a_j * prev;
        }
        gammas.push(gk);
    }
    Ok(LaggedCovariance { m, gammas })
}

/// A finite-order model of a sub-process, derived from the full process's
/// lagged covariances rather than re-estimated from data.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedModel {
    subset: Vec<usize>,
    q: usize,
    /// `Q x (Q*q)` stacked coefficient matrix `[B_1, ..., B_q]`.
    b: DMatrix<f64>,
    /// `Q x Q` innovation covariance of the sub-process.
    sigma_us: DMatrix<f64>,
}

impl RestrictedModel {
    pub fn subset(&self) -> &[usize] {
        &self.subset
    }

    pub fn order(&self) -> usize {
        self.q
    }

    pub fn coeffs(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// Lag-`k` block `B_k` (`k` is 1-based).
    pub fn lag_block(&self, k: usize) -> DMatrix<f64> {
        let q_dim = self.subset.len();
        self.b.columns((k - 1) * q_dim, q_dim).into_owned()
    }

    pub fn sigma_us(&self) -> &DMatrix<f64> {
        &self.sigma_us
    }
}

fn check_subset(subset: &[usize], m: usize) -> Result<()> {
    if subset.is_empty() {
        return Err(Error::InvalidParameter(alloc::string::String::from(
            "subset must contain at least one channel",
        )));
    }
    for w in subset.windows(2) {
        if w[0] >= w[1] {
            return Err(Error::InvalidParameter(alloc::string::String::from(
                "subset indices must be strictly increasing",
            )));
        }
    }
    if *subset.last().unwrap() >= m {
        return Err(Error::InvalidParameter(alloc::format!(
            "subset index {} out of range for {} channels",
            subset.last().unwrap(),
            m
        )));
    }
    Ok(())
}

fn restrict(gamma: &DMatrix<f64>, subset: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(subset.len(), subset.len(), |i, j| {
        gamma[(subset[i], subset[j])]
    })
}

/// Fits the order-`q` sub-process model for `subset` from the lagged
/// covariances of the full process.
///
/// The coefficients solve the block-Toeplitz normal equations built from
/// the subset-restricted `Gamma_0 .. Gamma_q`; the innovation covariance is
/// `Gamma_0^SS - sum_k B_k (Gamma_k^SS)^T`, symmetrized.
pub fn restricted_model(
    cov: &LaggedCovariance,
    subset: &[usize],
    q: usize,
) -> Result<RestrictedModel> {
    check_subset(subset, cov.channels())?;
    if q == 0 || q > cov.max_lag() {
        return Err(Error::InvalidParameter(alloc::format!(
            "restricted order {q} must be in 1..=max_lag ({})",
            cov.max_lag()
        )));
    }
    let q_dim = subset.len();
    let g: Vec<DMatrix<f64>> = (0..=q).map(|k| restrict(cov.gamma(k), subset)).collect();
    let g_signed = |k: i64| -> DMatrix<f64> {
        if k >= 0 {
            g[k as usize].clone()
        } else {
            g[(-k) as usize].transpose()
        }
    };

    // Stacked-past covariance: block (i, j) = gamma_{j-i}, i, j in 0..q.
    let n = q_dim * q;
    let mut big = DMatrix::<f64>::zeros(n, n);
    for i in 0..q {
        for j in 0..q {
            big.view_mut((i * q_dim, j * q_dim), (q_dim, q_dim))
                .copy_from(&g_signed(j as i64 - i as i64));
        }
    }
    // Right-hand side: [gamma_1 ... gamma_q] as a Q x (Q*q) row of blocks.
    let mut rhs = DMatrix::<f64>::zeros(n, q_dim);
    for k in 0..q {
        rhs.view_mut((k * q_dim, 0), (q_dim, q_dim))
            .copy_from(&g[k + 1].transpose());
    }
    let chol = big.cholesky().ok_or(Error::SingularSystem { q })?;
    let solution = chol.solve(&rhs); // (Q*q) x Q, so B = solution^T
    let b = solution.transpose();

    let mut sigma = g[0].clone();
    for (k, g_k) in g.iter().enumerate().skip(1) {
        let b_k = b.columns((k - 1) * q_dim, q_dim);
        sigma -= b_k * g_k.transpose();
    }
    let sigma = 0.5 * (&sigma + sigma.transpose());
    if sigma.clone().cholesky().is_none() {
        return Err(Error::NumericDegeneracy);
    }
    Ok(RestrictedModel {
        subset: subset.to_vec(),
        q,
        b,
        sigma_us: sigma,
    })
}

/// Gaussian entropy rate `0.5 * ln((2 pi e)^Q * det(Sigma))` in nats per
/// sample, from the Cholesky log-determinant.
pub fn entropy_rate(sigma: &DMatrix<f64>) -> Result<f64> {
    if sigma.nrows() != sigma.ncols() || sigma.is_empty() {
        return Err(Error::InvalidParameter(alloc::string::String::from(
            "entropy rate needs a square, non-empty covariance",
        )));
    }
    let q = sigma.nrows();
    let chol = sigma.clone().cholesky().ok_or(Error::CovarianceNotPd {
        context: "entropy rate input",
    })?;
    let log_det: f64 = (0..q).map(|i| 2.0 * Float::ln(chol.l()[(i, i)])).sum();
    let two_pi_e = 2.0 * core::f64::consts::PI * core::f64::consts::E;
    Ok(0.5 * (q as f64 * Float::ln(two_pi_e) + log_det))
}

/// Per-time-step entropy rates of a channel subset, with explicit gaps
/// where the chain could not be evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyRateSeries {
    subset: Vec<usize>,
    values: Vec<Option<f64>>,
    gaps: Vec<(usize, Error)>,
}

impl EntropyRateSeries {
    pub fn subset(&self) -> &[usize] {
        &self.subset
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    /// Time steps that could not be evaluated, with the reason.
    pub fn gaps(&self) -> &[(usize, Error)] {
        &self.gaps
    }
}

/// Chains lagged covariance -> restricted model -> entropy rate at every
/// available time step. Per-step failures become unavailable entries; only
/// invalid inputs fail the whole series.
pub fn entropy_rate_series(
    model: &TvVarModel,
    subset: &[usize],
    q: usize,
    max_lag: usize,
) -> Result<EntropyRateSeries> {
    check_subset(subset, model.m())?;
    if q > max_lag {
        return Err(Error::InvalidParameter(alloc::format!(
            "restricted order {q} exceeds max lag {max_lag}"
        )));
    }
    let mut values = Vec::with_capacity(model.len());
    let mut gaps = Vec::new();
    for t in 0..model.len() {
        if t < model.valid_from() {
            values.push(None);
            continue;
        }
        let step = yule_walker_covariance(model, t, max_lag)
            .and_then(|cov| restricted_model(&cov, subset, q))
            .and_then(|rm| entropy_rate(rm.sigma_us()));
        match step {
            Ok(h) => values.push(Some(h)),
            Err(e) => {
                values.push(None);
                gaps.push((t, e));
            }
        }
    }
    Ok(EntropyRateSeries {
        subset: subset.to_vec(),
        values,
        gaps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::var::{build_benchmark_model, CoefficientSchedule};
    use alloc::vec;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn scalar_model(a: f64, sigma2: f64, t_len: usize) -> TvVarModel {
        let coeffs = vec![DMatrix::from_element(1, 1, a); t_len];
        let sigma = vec![DMatrix::from_element(1, 1, sigma2); t_len];
        TvVarModel::new(coeffs, sigma, 100.0).unwrap()
    }

    #[test]
    fn ar1_autocovariance_closed_form() {
        for &a in &[-0.95, -0.5, 0.3, 0.5, 0.9, 0.95] {
            let model = scalar_model(a, 1.0, 2);
            let cov = yule_walker_covariance(&model, 0, 12).unwrap();
            let gamma0 = 1.0 / (1.0 - a * a);
            for k in 0..=12usize {
                let expected = a.powi(k as i32) * gamma0;
                assert_relative_eq!(cov.gamma(k)[(0, 0)], expected, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn white_noise_covariance_is_flat() {
        let coeffs = vec![DMatrix::<f64>::zeros(2, 2); 2];
        let mut s = DMatrix::<f64>::identity(2, 2);
        s[(0, 1)] = 0.3;
        s[(1, 0)] = 0.3;
        let model = TvVarModel::new(coeffs, vec![s.clone(); 2], 1.0).unwrap();
        let cov = yule_walker_covariance(&model, 0, 4).unwrap();
        assert_relative_eq!((cov.gamma(0) - &s).amax(), 0.0, epsilon = 1e-12);
        for k in 1..=4usize {
            assert_relative_eq!(cov.gamma(k).amax(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn unstable_step_has_no_stationary_solution() {
        let model = scalar_model(1.01, 1.0, 2);
        assert!(matches!(
            yule_walker_covariance(&model, 1, 3),
            Err(Error::NoStationarySolution { t: 1 })
        ));
    }

    #[test]
    fn restriction_to_full_process_recovers_innovations() {
        let schedule = CoefficientSchedule::constant(0.3, 2);
        let model = build_benchmark_model(&schedule, 100.0).unwrap();
        let cov = yule_walker_covariance(&model, 0, 30).unwrap();
        let full: Vec<usize> = (0..4).collect();
        let rm = restricted_model(&cov, &full, 30).unwrap();
        let diff = (rm.sigma_us() - model.sigma_at(0).unwrap()).amax();
        assert!(diff < 1e-6, "innovation mismatch {diff}");
        // with q = p the recovery is just as exact
        let rm_p = restricted_model(&cov, &full, 2).unwrap();
        let diff_p = (rm_p.sigma_us() - model.sigma_at(0).unwrap()).amax();
        assert!(diff_p < 1e-6, "innovation mismatch at q=p: {diff_p}");
    }

    #[test]
    fn decoupled_channels_restrict_to_their_own_ar() {
        // two independent AR(1) channels with different coefficients
        let mut a = DMatrix::<f64>::zeros(2, 2);
        a[(0, 0)] = 0.6;
        a[(1, 1)] = -0.4;
        let sigma = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0]));
        let model = TvVarModel::new(vec![a; 2], vec![sigma; 2], 1.0).unwrap();
        let cov = yule_walker_covariance(&model, 0, 8).unwrap();
        let rm = restricted_model(&cov, &[0], 8).unwrap();
        assert_relative_eq!(rm.lag_block(1)[(0, 0)], 0.6, epsilon = 1e-9);
        for k in 2..=8 {
            assert_relative_eq!(rm.lag_block(k)[(0, 0)], 0.0, epsilon = 1e-9);
        }
        assert_relative_eq!(rm.sigma_us()[(0, 0)], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn entropy_rate_constants() {
        let h1 = entropy_rate(&DMatrix::from_element(1, 1, 1.0)).unwrap();
        assert_relative_eq!(h1, 1.4189385332046727, epsilon = 1e-12);
        let h2 = entropy_rate(&DMatrix::identity(2, 2)).unwrap();
        assert_relative_eq!(h2, 2.8378770664093455, epsilon = 1e-12);
        let h4 = entropy_rate(&DMatrix::from_element(1, 1, 4.0)).unwrap();
        assert_relative_eq!(h4, 2.112085713764618, epsilon = 1e-12);
    }

    #[test]
    fn entropy_rate_rejects_non_pd() {
        let sigma = DMatrix::from_element(1, 1, -1.0);
        assert!(matches!(
            entropy_rate(&sigma),
            Err(Error::CovarianceNotPd { .. })
        ));
    }

    #[test]
    fn entropy_scaling_shift() {
        // multiplying the covariance by s adds (Q/2) ln s
        let mut sigma = DMatrix::<f64>::identity(3, 3);
        sigma[(0, 1)] = 0.2;
        sigma[(1, 0)] = 0.2;
        let h = entropy_rate(&sigma).unwrap();
        for &s in &[0.5, 2.0, 10.0] {
            let hs = entropy_rate(&(&sigma * s)).unwrap();
            assert_relative_eq!(hs - h, 1.5 * s.ln(), epsilon = 1e-12);
        }
    }

    #[test]
    fn series_is_constant_for_stationary_models() {
        let schedule = CoefficientSchedule::constant(0.15, 6);
        let model = build_benchmark_model(&schedule, 100.0).unwrap();
        let series = entropy_rate_series(&model, &[0, 2], 20, 20).unwrap();
        let first = series.values()[0].unwrap();
        for v in series.values() {
            assert_relative_eq!(v.unwrap(), first, epsilon = 1e-9);
        }
        assert!(series.gaps().is_empty());
    }

    #[test]
    fn series_white_noise_level() {
        let coeffs = vec![DMatrix::<f64>::zeros(3, 3); 4];
        let model = TvVarModel::new(coeffs, vec![DMatrix::identity(3, 3); 4], 1.0).unwrap();
        let series = entropy_rate_series(&model, &[0, 1], 3, 3).unwrap();
        for v in series.values() {
            assert_relative_eq!(v.unwrap(), 2.8378770664093455, epsilon = 1e-10);
        }
    }

    #[test]
    fn longer_memory_cannot_increase_entropy() {
        let schedule = CoefficientSchedule::constant(0.3, 1);
        let model = build_benchmark_model(&schedule, 100.0).unwrap();
        let cov = yule_walker_covariance(&model, 0, 60).unwrap();
        let subset = [0usize, 1];
        let mut prev = f64::INFINITY;
        for q in [2usize, 5, 10, 20, 40, 60] {
            let h = entropy_rate(restricted_model(&cov, &subset, q).unwrap().sigma_us()).unwrap();
            assert!(
                h <= prev + 1e-9,
                "entropy increased from {prev} to {h} at q={q}"
            );
            prev = h;
        }
    }

    #[test]
    fn series_marks_unavailable_prefix() {
        let coeffs = vec![DMatrix::from_element(1, 1, 0.4); 5];
        let sigma = vec![DMatrix::from_element(1, 1, 1.0); 5];
        let model = TvVarModel::from_estimates(coeffs, sigma, 1.0, 2).unwrap();
        let series = entropy_rate_series(&model, &[0], 3, 3).unwrap();
        assert!(series.values()[0].is_none());
        assert!(series.values()[1].is_none());
        assert!(series.values()[2].is_some());
    }
}
