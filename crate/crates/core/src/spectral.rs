//! Frequency-domain representation of a time step: transfer matrix, PSD,
//! spectral entropy rate and spectral integration.
//!
//! All quantities are evaluated on a grid of normalized angular frequencies
//! in `[0, pi]`; the negative half-axis follows from the even symmetry of
//! spectra of real processes and is never stored.

use alloc::vec::Vec;

use nalgebra::{Complex, DMatrix};
use num_traits::Float;

use crate::error::{Error, Result};

/// Tolerance for the Hermitian-ness check of PSD blocks.
const HERMITIAN_TOL: f64 = 1e-10;

/// Normalized angular frequency grid over `[0, pi]` with its sampling
/// frequency, mapping `omega` to `f = omega * fs / (2 pi)` Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    omegas: Vec<f64>,
    fs: f64,
}

impl FrequencyGrid {
    /// Uniform grid of `n_freq` points from 0 to pi inclusive.
    pub fn uniform(n_freq: usize, fs: f64) -> Result<Self> {
        if n_freq < 2 {
            return Err(Error::InvalidParameter(alloc::string::String::from(
                "frequency grid needs at least two points",
            )));
        }
        if !(fs > 0.0) {
            return Err(Error::InvalidParameter(alloc::string::String::from(
                "fs must be positive",
            )));
        }
        let step = core::f64::consts::PI / (n_freq - 1) as f64;
        let omegas = (0..n_freq)
            .map(|i| {
                if i == n_freq - 1 {
                    core::f64::consts::PI
                } else {
                    i as f64 * step
                }
            })
            .collect();
        Ok(Self { omegas, fs })
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    /// Grid frequencies in Hz.
    pub fn freqs_hz(&self) -> Vec<f64> {
        self.omegas
            .iter()
            .map(|w| w * self.fs / (2.0 * core::f64::consts::PI))
            .collect()
    }
}

/// Frequency-domain representation of one time step: the transfer matrix
/// and the PSD matrix at every grid frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    t: usize,
    transfer: Vec<DMatrix<Complex<f64>>>,
    psd: Vec<DMatrix<Complex<f64>>>,
}

impl SpectralState {
    /// Evaluates the step's transfer matrix and PSD over the grid.
    /// The step must be available and stable (the coefficient polynomial of
    /// an unstable step can be singular on the unit circle).
    pub fn compute(model: &crate::var::TvVarModel, t: usize, grid: &FrequencyGrid) -> Result<Self> {
        let coeffs = model.coeffs_at(t).ok_or_else(|| {
            Error::InvalidParameter(alloc::format!("time step {t} is not available"))
        })?;
        let sigma = model.sigma_at(t).expect("step available");
        let transfer = transfer_matrix(coeffs, grid)?;
        let psd = psd(&transfer, sigma);
        Ok(Self { t, transfer, psd })
    }

    pub fn t(&self) -> usize {
        self.t
    }

    /// `H(t, omega)` per grid frequency.
    pub fn transfer(&self) -> &[DMatrix<Complex<f64>>] {
        &self.transfer
    }

    /// `P(t, omega)` per grid frequency, Hermitian.
    pub fn psd(&self) -> &[DMatrix<Complex<f64>>] {
        &self.psd
    }
}

/// Transfer matrix `H(omega) = [I - sum_k A_k e^{-j omega k}]^{-1}` at every
/// grid point, for one stacked `M x (M*p)` coefficient matrix.
pub fn transfer_matrix(
    coeffs: &DMatrix<f64>,
    grid: &FrequencyGrid,
) -> Result<Vec<DMatrix<Complex<f64>>>> {
    let m = coeffs.nrows();
    if m == 0 || coeffs.ncols() == 0 || !coeffs.ncols().is_multiple_of(m) {
        return Err(Error::InvalidParameter(alloc::string::String::from(
            "coefficients must be a non-empty M x (M*p) matrix",
        )));
    }
    let p = coeffs.ncols() / m;
    grid.omegas()
        .iter()
        .map(|&omega| {
            let mut c = DMatrix::<Complex<f64>>::identity(m, m);
            for k in 1..=p {
                let phase = Complex::from_polar(1.0, -omega * k as f64);
                let block = coeffs.columns((k - 1) * m, m);
                for i in 0..m {
                    for j in 0..m {
                        c[(i, j)] -= phase * block[(i, j)];
                    }
                }
            }
            c.try_inverse().ok_or(Error::SpectralSingularity { omega })
        })
        .collect()
}

/// PSD matrices `P(omega) = H(omega) Sigma_U H*(omega)`, Hermitian by
/// construction and re-symmetrized against rounding.
pub fn psd(
    transfer: &[DMatrix<Complex<f64>>],
    sigma_u: &DMatrix<f64>,
) -> Vec<DMatrix<Complex<f64>>> {
    let sigma_c = sigma_u.map(|x| Complex::new(x, 0.0));
    transfer
        .iter()
        .map(|h| {
            let p = h * &sigma_c * h.adjoint();
            hermitize(&p)
        })
        .collect()
}

pub(crate) fn hermitize(p: &DMatrix<Complex<f64>>) -> DMatrix<Complex<f64>> {
    (p + p.adjoint()).map(|z| z * 0.5)
}

/// Rows/columns of a PSD matrix at the subset indices.
pub fn prune(p: &DMatrix<Complex<f64>>, subset: &[usize]) -> DMatrix<Complex<f64>> {
    DMatrix::from_fn(subset.len(), subset.len(), |i, j| p[(subset[i], subset[j])])
}

/// Spectral entropy rate `0.5 * ln((2 pi e)^Q * det(P_S(omega)))` at one
/// frequency, from the Hermitian Cholesky log-determinant.
pub fn spectral_entropy_rate_at(p_s: &DMatrix<Complex<f64>>, omega: f64) -> Result<f64> {
    let q = p_s.nrows();
    if q == 0 || p_s.ncols() != q {
        return Err(Error::InvalidParameter(alloc::string::String::from(
            "spectral entropy rate needs a square, non-empty PSD block",
        )));
    }
    let max_abs = |m: &DMatrix<Complex<f64>>| m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let scale = max_abs(p_s).max(1.0);
    if max_abs(&(p_s - p_s.adjoint())) > HERMITIAN_TOL * scale {
        return Err(Error::SpectralDegeneracy { omega });
    }
    let chol = p_s
        .clone()
        .cholesky()
        .ok_or(Error::SpectralDegeneracy { omega })?;
    let log_det: f64 = (0..q).map(|i| 2.0 * Float::ln(chol.l()[(i, i)].re)).sum();
    if !log_det.is_finite() {
        return Err(Error::SpectralDegeneracy { omega });
    }
    let two_pi_e = 2.0 * core::f64::consts::PI * core::f64::consts::E;
    Ok(0.5 * (q as f64 * Float::ln(two_pi_e) + log_det))
}

/// Spectral entropy rate over a whole grid of PSD blocks.
pub fn spectral_entropy_rate(
    p_s: &[DMatrix<Complex<f64>>],
    grid: &FrequencyGrid,
) -> Result<Vec<f64>> {
    if p_s.len() != grid.len() {
        return Err(Error::InvalidParameter(alloc::string::String::from(
            "one PSD block per grid frequency is required",
        )));
    }
    p_s.iter()
        .zip(grid.omegas())
        .map(|(p, &omega)| spectral_entropy_rate_at(p, omega))
        .collect()
}

/// `(1/2pi) * integral over [-pi, pi]` of an even spectral function, as the
/// trapezoid rule over the stored half-axis divided by pi.
pub fn integrate_spectrum(values: &[f64], grid: &FrequencyGrid) -> f64 {
    debug_assert_eq!(values.len(), grid.len());
    let omegas = grid.omegas();
    let mut acc = 0.0;
    for i in 1..omegas.len() {
        acc += 0.5 * (values[i] + values[i - 1]) * (omegas[i] - omegas[i - 1]);
    }
    acc / core::f64::consts::PI
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::submodel::{entropy_rate, entropy_rate_series, yule_walker_covariance};
    use crate::var::{build_benchmark_model, CoefficientSchedule};
    use alloc::vec;
    use approx::assert_relative_eq;

    fn max_abs(m: &DMatrix<Complex<f64>>) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn grid_endpoints_and_mapping() {
        let grid = FrequencyGrid::uniform(513, 100.0).unwrap();
        assert_eq!(grid.len(), 513);
        assert_eq!(grid.omegas()[0], 0.0);
        assert_eq!(grid.omegas()[512], core::f64::consts::PI);
        let freqs = grid.freqs_hz();
        assert_relative_eq!(freqs[512], 50.0, epsilon = 1e-12);
        assert!(FrequencyGrid::uniform(1, 100.0).is_err());
    }

    #[test]
    fn zero_coefficients_give_identity_transfer() {
        let grid = FrequencyGrid::uniform(17, 1.0).unwrap();
        let h = transfer_matrix(&DMatrix::<f64>::zeros(3, 6), &grid).unwrap();
        for hw in &h {
            assert_relative_eq!(
                max_abs(&(hw - DMatrix::<Complex<f64>>::identity(3, 3))),
                0.0
            );
        }
    }

    #[test]
    fn scalar_ar1_transfer_endpoints() {
        let grid = FrequencyGrid::uniform(9, 1.0).unwrap();
        let h = transfer_matrix(&DMatrix::from_element(1, 1, 0.5), &grid).unwrap();
        assert_relative_eq!(h[0][(0, 0)].re, 2.0, epsilon = 1e-12);
        assert_relative_eq!(h[0][(0, 0)].im, 0.0, epsilon = 1e-12);
        assert_relative_eq!(h[8][(0, 0)].re, 2.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(h[8][(0, 0)].im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn white_noise_psd_is_flat_identity() {
        let grid = FrequencyGrid::uniform(33, 1.0).unwrap();
        let h = transfer_matrix(&DMatrix::<f64>::zeros(2, 2), &grid).unwrap();
        let p = psd(&h, &DMatrix::identity(2, 2));
        for pw in &p {
            assert!(max_abs(&(pw - DMatrix::<Complex<f64>>::identity(2, 2))) < 1e-12);
        }
    }

    #[test]
    fn oscillator_peak_near_pole_frequency() {
        // rho = 0.85 at 10 Hz; the AR(2) peak search lands within one bin of
        // 10 Hz on a 129-point grid and at the derived 9.706 Hz on fine grids
        let fs = 100.0;
        let rho: f64 = 0.85;
        let a1 = 2.0 * rho * (2.0 * core::f64::consts::PI * 10.0 / fs).cos();
        let a2 = -rho * rho;
        let coeffs = DMatrix::from_row_slice(1, 2, &[a1, a2]);
        let peak_hz = |n: usize| {
            let grid = FrequencyGrid::uniform(n, fs).unwrap();
            let h = transfer_matrix(&coeffs, &grid).unwrap();
            let p = psd(&h, &DMatrix::identity(1, 1));
            let (imax, _) = p
                .iter()
                .enumerate()
                .max_by(|a, b| a.1[(0, 0)].re.partial_cmp(&b.1[(0, 0)].re).unwrap())
                .unwrap();
            (grid.freqs_hz()[imax], grid.freqs_hz()[1])
        };
        let (f129, bin129) = peak_hz(129);
        assert!((f129 - 10.0).abs() <= bin129, "peak {f129} bin {bin129}");
        let (f8193, bin8193) = peak_hz(8193);
        assert!((f8193 - 9.70625).abs() <= bin8193, "peak {f8193}");
    }

    #[test]
    fn spectral_er_constants() {
        let one = DMatrix::<Complex<f64>>::identity(1, 1);
        assert_relative_eq!(
            spectral_entropy_rate_at(&one, 0.3).unwrap(),
            1.4189385332046727,
            epsilon = 1e-12
        );
        let four = DMatrix::from_element(1, 1, Complex::new(4.0, 0.0));
        assert_relative_eq!(
            spectral_entropy_rate_at(&four, 0.3).unwrap(),
            2.112085713764618,
            epsilon = 1e-12
        );
        let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex::new(1.0, 0.0),
            Complex::new(4.0, 0.0),
        ]));
        assert_relative_eq!(
            spectral_entropy_rate_at(&diag, 0.3).unwrap(),
            3.5310242469692908,
            epsilon = 1e-12
        );
    }

    #[test]
    fn degenerate_psd_is_rejected() {
        let zero = DMatrix::<Complex<f64>>::zeros(2, 2);
        assert!(matches!(
            spectral_entropy_rate_at(&zero, 1.25),
            Err(Error::SpectralDegeneracy { omega }) if omega == 1.25
        ));
        let mut skew = DMatrix::<Complex<f64>>::identity(2, 2);
        skew[(0, 1)] = Complex::new(0.0, 0.5);
        // not Hermitian: mirrored entry missing
        assert!(spectral_entropy_rate_at(&skew, 0.1).is_err());
    }

    #[test]
    fn integrate_constant_returns_value() {
        let grid = FrequencyGrid::uniform(65, 1.0).unwrap();
        let v = vec![0.731; grid.len()];
        assert_relative_eq!(integrate_spectrum(&v, &grid), 0.731, epsilon = 1e-14);
    }

    #[test]
    fn white_noise_spectral_integration_is_exact() {
        let grid = FrequencyGrid::uniform(33, 1.0).unwrap();
        let mut sigma = DMatrix::<f64>::identity(2, 2) * 1.7;
        sigma[(0, 1)] = 0.4;
        sigma[(1, 0)] = 0.4;
        let h = transfer_matrix(&DMatrix::<f64>::zeros(2, 2), &grid).unwrap();
        let p = psd(&h, &sigma);
        let ser = spectral_entropy_rate(&p, &grid).unwrap();
        let integral = integrate_spectrum(&ser, &grid);
        assert_relative_eq!(integral, entropy_rate(&sigma).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn spectral_integration_matches_time_domain_on_benchmark_channel() {
        // channel 4 of the benchmark process at a fixed schedule value
        let schedule = CoefficientSchedule::constant(0.3, 1);
        let model = build_benchmark_model(&schedule, 100.0).unwrap();
        let grid = FrequencyGrid::uniform(1024, 100.0).unwrap();
        let h = transfer_matrix(model.coeffs_at(0).unwrap(), &grid).unwrap();
        let p = psd(&h, model.sigma_at(0).unwrap());
        let pruned: Vec<_> = p.iter().map(|pw| prune(pw, &[3])).collect();
        let ser = spectral_entropy_rate(&pruned, &grid).unwrap();
        let integral = integrate_spectrum(&ser, &grid);
        let time_domain = entropy_rate_series(&model, &[3], 30, 30).unwrap().values()[0].unwrap();
        assert!(
            (integral - time_domain).abs() < 1e-3,
            "integral {integral} vs time-domain {time_domain}"
        );
    }

    #[test]
    fn parseval_power_matches_lag_zero_covariance() {
        let schedule = CoefficientSchedule::constant(0.2, 1);
        let model = build_benchmark_model(&schedule, 100.0).unwrap();
        let grid = FrequencyGrid::uniform(1024, 100.0).unwrap();
        let h = transfer_matrix(model.coeffs_at(0).unwrap(), &grid).unwrap();
        let p = psd(&h, model.sigma_at(0).unwrap());
        let p11: Vec<f64> = p.iter().map(|pw| pw[(0, 0)].re).collect();
        let gamma0 = yule_walker_covariance(&model, 0, 2).unwrap().gamma(0)[(0, 0)];
        let integral = integrate_spectrum(&p11, &grid);
        assert!(
            ((integral - gamma0) / gamma0).abs() < 1e-4,
            "integral {integral} vs gamma0 {gamma0}"
        );
    }

    #[test]
    fn unit_root_polynomial_is_a_spectral_singularity() {
        // scalar coefficient 1.0: I - e^{-j*0} = 0 at omega = 0
        let grid = FrequencyGrid::uniform(5, 1.0).unwrap();
        let err = transfer_matrix(&DMatrix::from_element(1, 1, 1.0), &grid).unwrap_err();
        assert!(matches!(err, Error::SpectralSingularity { omega } if omega == 0.0));
    }

    #[test]
    fn spectral_state_is_hermitian_and_matches_parts() {
        let schedule = CoefficientSchedule::constant(0.3, 3);
        let model = build_benchmark_model(&schedule, 100.0).unwrap();
        let grid = FrequencyGrid::uniform(33, 100.0).unwrap();
        let state = SpectralState::compute(&model, 1, &grid).unwrap();
        assert_eq!(state.t(), 1);
        assert_eq!(state.transfer().len(), grid.len());
        for p in state.psd() {
            // hermitization makes the matrix exactly equal to its adjoint
            assert_eq!(max_abs(&(p - p.adjoint())), 0.0);
        }
        let direct = transfer_matrix(model.coeffs_at(1).unwrap(), &grid).unwrap();
        assert_eq!(state.transfer(), &direct[..]);
        // unavailable steps are rejected
        assert!(SpectralState::compute(&model, 99, &grid).is_err());
    }

    #[test]
    fn transfer_is_real_at_zero_frequency() {
        let schedule = CoefficientSchedule::constant(0.25, 1);
        let model = build_benchmark_model(&schedule, 100.0).unwrap();
        let grid = FrequencyGrid::uniform(5, 100.0).unwrap();
        let h = transfer_matrix(model.coeffs_at(0).unwrap(), &grid).unwrap();
        let max_im = h[0].iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        assert!(max_im < 1e-14);
    }
}
