//! Time-varying VAR models: construction, realization generation and
//! per-time-step stability.
//!
//! A TV-VAR(p) process over `M` channels is
//! `Y(t_n) = sum_k A_k(t_n) Y(t_{n-k}) + U(t_n)` with innovation covariance
//! `Sigma_U(t_n)`. Coefficients are stored per step as the stacked
//! `M x (M*p)` matrix `A(t_n) = [A_1(t_n), ..., A_p(t_n)]`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// A time-varying VAR model: one coefficient matrix and one innovation
/// covariance per time step.
///
/// Models produced by identification carry an unavailable prefix
/// (`valid_from() > 0`): the recursion cannot estimate the first `p` steps,
/// and their slots hold placeholders that accessors refuse to hand out.
#[derive(Debug, Clone, PartialEq)]
pub struct TvVarModel {
    m: usize,
    p: usize,
    fs: f64,
    /// Per-step `M x (M*p)` stacked coefficient matrices.
    coeffs: Vec<DMatrix<f64>>,
    /// Per-step `M x M` innovation covariances.
    sigma_u: Vec<DMatrix<f64>>,
    /// First time index with meaningful entries.
    valid_from: usize,
}

impl TvVarModel {
    /// Builds a fully-specified model, validating dimensions, `fs > 0` and
    /// positive definiteness of every innovation covariance.
    pub fn new(coeffs: Vec<DMatrix<f64>>, sigma_u: Vec<DMatrix<f64>>, fs: f64) -> Result<Self> {
        let model = Self::from_estimates(coeffs, sigma_u, fs, 0)?;
        for sigma in &model.sigma_u {
            if sigma.clone().cholesky().is_none() {
                return Err(Error::CovarianceNotPd {
                    context: "TvVarModel innovation covariance",
                });
            }
        }
        Ok(model)
    }

    /// Builds a model from identification output. Entries before
    /// `valid_from` are placeholders; positive definiteness is not enforced
    /// anywhere, since downstream stages surface degeneracies per step.
    pub fn from_estimates(
        coeffs: Vec<DMatrix<f64>>,
        sigma_u: Vec<DMatrix<f64>>,
        fs: f64,
        valid_from: usize,
    ) -> Result<Self> {
        if coeffs.is_empty() || coeffs.len() != sigma_u.len() {
            return Err(Error::InvalidParameter(String::from(
                "coeffs and sigma_u must be non-empty and of identical length",
            )));
        }
        if !(fs > 0.0) {
            return Err(Error::InvalidParameter(String::from("fs must be positive")));
        }
        let m = coeffs[0].nrows();
        if m == 0 || coeffs[0].ncols() == 0 || !coeffs[0].ncols().is_multiple_of(m) {
            return Err(Error::InvalidParameter(String::from(
                "coefficient matrices must be M x (M*p) with M >= 1, p >= 1",
            )));
        }
        let p = coeffs[0].ncols() / m;
        for a in &coeffs {
            if a.nrows() != m || a.ncols() != m * p {
                return Err(Error::InvalidParameter(String::from(
                    "all coefficient matrices must share the M x (M*p) shape",
                )));
            }
        }
        for s in &sigma_u {
            if s.nrows() != m || s.ncols() != m {
                return Err(Error::InvalidParameter(String::from(
                    "all innovation covariances must be M x M",
                )));
            }
        }
        if valid_from >= coeffs.len() {
            return Err(Error::InvalidParameter(String::from(
                "valid_from must leave at least one available step",
            )));
        }
        Ok(Self {
            m,
            p,
            fs,
            coeffs,
            sigma_u,
            valid_from,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    /// Number of time steps `T`.
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// First time index with meaningful coefficients (0 for constructed
    /// models, `p` for identified ones).
    pub fn valid_from(&self) -> usize {
        self.valid_from
    }

    /// Stacked coefficients `[A_1, ..., A_p]` at step `t`, or `None` when the
    /// step is out of range or within the unavailable prefix.
    pub fn coeffs_at(&self, t: usize) -> Option<&DMatrix<f64>> {
        (t >= self.valid_from).then(|| self.coeffs.get(t)).flatten()
    }

    /// Innovation covariance at step `t`, if available.
    pub fn sigma_at(&self, t: usize) -> Option<&DMatrix<f64>> {
        (t >= self.valid_from)
            .then(|| self.sigma_u.get(t))
            .flatten()
    }

    /// Lag-`k` coefficient block `A_k(t)` (`k` is 1-based).
    pub fn lag_block(&self, t: usize, k: usize) -> Option<DMatrix<f64>> {
        let a = self.coeffs_at(t)?;
        if k == 0 || k > self.p {
            return None;
        }
        Some(a.columns((k - 1) * self.m, self.m).into_owned())
    }

    /// Companion matrix of `A(t)`: `(M*p) x (M*p)`, top block row holding
    /// `[A_1, ..., A_p]`, identity blocks on the subdiagonal.
    pub fn companion_at(&self, t: usize) -> Option<DMatrix<f64>> {
        let a = self.coeffs_at(t)?;
        Some(companion(a, self.m, self.p))
    }
}

/// Companion matrix of a stacked `M x (M*p)` coefficient matrix.
pub(crate) fn companion(a: &DMatrix<f64>, m: usize, p: usize) -> DMatrix<f64> {
    let n = m * p;
    let mut c = DMatrix::<f64>::zeros(n, n);
    c.view_mut((0, 0), (m, n)).copy_from(a);
    for k in 0..p.saturating_sub(1) {
        c.view_mut((m * (k + 1), m * k), (m, m))
            .fill_with_identity();
    }
    c
}

/// True when every eigenvalue of `c` has modulus strictly below one.
pub(crate) fn companion_is_stable(c: &DMatrix<f64>) -> bool {
    c.complex_eigenvalues().iter().all(|z| z.norm() < 1.0)
}

/// Per-time-step stability flags: entry `t` is true iff all eigenvalues of
/// the companion matrix built from `A(t)` have modulus < 1. Steps within an
/// unavailable prefix report `false`.
pub fn stability_report(model: &TvVarModel) -> Vec<bool> {
    (0..model.len())
        .map(|t| {
            model
                .companion_at(t)
                .map(|c| companion_is_stable(&c))
                .unwrap_or(false)
        })
        .collect()
}

/// Waveform shapes for the coupling-coefficient schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Waveform {
    /// Alternates between the low and high amplitude every half period,
    /// starting low.
    Square,
    /// Raised-cosine oscillation between the low and high amplitude,
    /// starting low.
    Sinusoid,
    /// Holds the low amplitude at every step.
    Constant,
}

/// A sample-indexed coupling-parameter schedule `a(t_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSchedule {
    kind: Waveform,
    lo: f64,
    hi: f64,
    period_s: f64,
    values: Vec<f64>,
}

impl CoefficientSchedule {
    /// Evaluates the waveform at `steps` samples spaced `1/fs` apart.
    /// The square wave starts at the low value; the sinusoid is phase-matched
    /// to start low as well.
    pub fn new(
        kind: Waveform,
        lo: f64,
        hi: f64,
        period_s: f64,
        fs: f64,
        steps: usize,
    ) -> Result<Self> {
        if !(period_s > 0.0) {
            return Err(Error::InvalidParameter(String::from(
                "schedule period must be positive",
            )));
        }
        if !(fs > 0.0) || steps == 0 {
            return Err(Error::InvalidParameter(String::from(
                "schedule needs fs > 0 and at least one step",
            )));
        }
        if lo > hi {
            return Err(Error::InvalidParameter(String::from(
                "schedule amplitude range must satisfy lo <= hi",
            )));
        }
        let values = (0..steps)
            .map(|n| {
                let t = n as f64 / fs;
                match kind {
                    Waveform::Constant => lo,
                    Waveform::Square => {
                        let phase = (t / period_s).fract();
                        if phase < 0.5 {
                            lo
                        } else {
                            hi
                        }
                    }
                    Waveform::Sinusoid => {
                        let phase = 2.0 * core::f64::consts::PI * t / period_s;
                        lo + (hi - lo) * 0.5 * (1.0 - Float::cos(phase))
                    }
                }
            })
            .collect();
        Ok(Self {
            kind,
            lo,
            hi,
            period_s,
            values,
        })
    }

    /// A schedule frozen at a single value.
    pub fn constant(value: f64, steps: usize) -> Self {
        Self {
            kind: Waveform::Constant,
            lo: value,
            hi: value,
            period_s: 1.0,
            values: vec![value; steps],
        }
    }

    pub fn kind(&self) -> Waveform {
        self.kind
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn period_s(&self) -> f64 {
        self.period_s
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Evaluated series `a(t_n)`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Self-oscillation pole radius of the benchmark oscillators.
pub const BENCHMARK_RHO: f64 = 0.85;
/// Oscillation frequencies (Hz) of channels 2, 3 and 4 of the benchmark.
pub const BENCHMARK_OSC_HZ: [f64; 3] = [10.0, 10.0, 35.0];

/// Builds the four-variate benchmark TV-VAR(2) process.
///
/// Channel 1 receives `(1 - a(t_n))` from channel 2 at lag 1 and `a(t_n)`
/// from channel 3 at lag 2; channel 4 drives channels 2 (lag 1) and 3
/// (lag 2) with strength 1.5; channels 2-4 carry self-oscillations with
/// pole radius 0.85 at 10, 10 and 35 Hz. Innovations are unit white noise.
pub fn build_benchmark_model(schedule: &CoefficientSchedule, fs: f64) -> Result<TvVarModel> {
    if !(fs > 0.0) {
        return Err(Error::InvalidParameter(String::from("fs must be positive")));
    }
    let m = 4;
    let p = 2;
    let osc = |f_hz: f64| {
        let a1 = 2.0 * BENCHMARK_RHO * Float::cos(2.0 * core::f64::consts::PI * f_hz / fs);
        let a2 = -BENCHMARK_RHO * BENCHMARK_RHO;
        (a1, a2)
    };
    let (a21, a22) = osc(BENCHMARK_OSC_HZ[0]);
    let (a31, a32) = osc(BENCHMARK_OSC_HZ[1]);
    let (a41, a42) = osc(BENCHMARK_OSC_HZ[2]);

    let mut coeffs = Vec::with_capacity(schedule.len());
    for &a in schedule.values() {
        let mut mat = DMatrix::<f64>::zeros(m, m * p);
        // lag-1 block occupies columns 0..4, lag-2 block columns 4..8
        mat[(0, 1)] = 1.0 - a;
        mat[(0, m + 2)] = a;
        mat[(1, 1)] = a21;
        mat[(1, m + 1)] = a22;
        mat[(1, 3)] = 1.5;
        mat[(2, 2)] = a31;
        mat[(2, m + 2)] = a32;
        mat[(2, m + 3)] = 1.5;
        mat[(3, 3)] = a41;
        mat[(3, m + 3)] = a42;
        coeffs.push(mat);
    }
    let sigma_u = vec![DMatrix::<f64>::identity(m, m); schedule.len()];
    TvVarModel::new(coeffs, sigma_u, fs)
}

/// Realizations of a multichannel process: `R` epochs, `M` channels,
/// `T` samples each, plus the sampling frequency. The universal input of
/// the identification and OIR pipelines.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochData {
    r: usize,
    m: usize,
    t_len: usize,
    fs: f64,
    labels: Vec<String>,
    /// Realization-major, then channel-major, then time order.
    samples: Vec<f64>,
}

impl EpochData {
    /// Wraps a sample buffer laid out realization-major, channel-major,
    /// time-minor. Rejects dimension mismatches and non-finite values.
    pub fn new(
        samples: Vec<f64>,
        r: usize,
        m: usize,
        t_len: usize,
        fs: f64,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        if r == 0 || m == 0 || t_len == 0 {
            return Err(Error::InvalidParameter(String::from(
                "epoch data needs R >= 1, M >= 1, T >= 1",
            )));
        }
        if !(fs > 0.0) {
            return Err(Error::InvalidParameter(String::from("fs must be positive")));
        }
        if samples.len() != r * m * t_len {
            return Err(Error::InvalidParameter(String::from(
                "sample buffer length must equal R*M*T",
            )));
        }
        if let Some(idx) = samples.iter().position(|x| !x.is_finite()) {
            let rr = idx / (m * t_len);
            let rest = idx % (m * t_len);
            return Err(Error::NonFiniteInput {
                r: rr,
                channel: rest / t_len,
                t: rest % t_len,
            });
        }
        let labels = match labels {
            Some(l) => {
                if l.len() != m {
                    return Err(Error::InvalidParameter(String::from(
                        "label count must equal the channel count",
                    )));
                }
                l
            }
            None => (1..=m).map(|i| alloc::format!("Y{i}")).collect(),
        };
        Ok(Self {
            r,
            m,
            t_len,
            fs,
            labels,
            samples,
        })
    }

    pub fn realizations(&self) -> usize {
        self.r
    }

    pub fn channels(&self) -> usize {
        self.m
    }

    pub fn samples_per_channel(&self) -> usize {
        self.t_len
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Raw buffer in realization-major, channel-major, time order.
    pub fn raw(&self) -> &[f64] {
        &self.samples
    }

    /// The same data re-stamped with another sampling frequency (used when
    /// the storage format does not carry one).
    pub fn with_fs(mut self, fs: f64) -> Result<Self> {
        if !(fs > 0.0) {
            return Err(Error::InvalidParameter(String::from("fs must be positive")));
        }
        self.fs = fs;
        Ok(self)
    }

    pub fn value(&self, r: usize, channel: usize, t: usize) -> f64 {
        self.samples[(r * self.m + channel) * self.t_len + t]
    }

    /// One channel of one realization, contiguous over time.
    pub fn series(&self, r: usize, channel: usize) -> &[f64] {
        let start = (r * self.m + channel) * self.t_len;
        &self.samples[start..start + self.t_len]
    }

    /// The observation matrix `Y(t)` (`M x R`) of the present states.
    pub(crate) fn present_matrix(&self, t: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.m, self.r, |i, r| self.value(r, i, t))
    }

    /// The observation matrix `W(t)` (`M*p x R`) stacking the `p` past
    /// states, lag-1 block first.
    pub(crate) fn past_matrix(&self, t: usize, p: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.m * p, self.r, |row, r| {
            let k = row / self.m + 1;
            let i = row % self.m;
            self.value(r, i, t - k)
        })
    }

    /// Per-channel mean over all realizations and samples.
    pub fn channel_means(&self) -> Vec<f64> {
        let mut means = vec![0.0; self.m];
        for r in 0..self.r {
            for (ch, mean) in means.iter_mut().enumerate() {
                *mean += self.series(r, ch).iter().sum::<f64>();
            }
        }
        let n = (self.r * self.t_len) as f64;
        means.iter_mut().for_each(|v| *v /= n);
        means
    }

    /// Per-channel population variance over all realizations and samples.
    pub fn channel_variances(&self) -> Vec<f64> {
        let means = self.channel_means();
        let mut vars = vec![0.0; self.m];
        for r in 0..self.r {
            for ch in 0..self.m {
                vars[ch] += self
                    .series(r, ch)
                    .iter()
                    .map(|x| (x - means[ch]) * (x - means[ch]))
                    .sum::<f64>();
            }
        }
        let n = (self.r * self.t_len) as f64;
        vars.iter_mut().for_each(|v| *v /= n);
        vars
    }

    /// Returns a copy reduced per channel to zero mean and unit variance
    /// over all samples and realizations. A zero-variance channel cannot be
    /// standardized and is reported as an invalid-parameter error.
    pub fn standardized(&self) -> Result<Self> {
        let means = self.channel_means();
        let vars = self.channel_variances();
        if let Some(ch) = vars.iter().position(|&v| v <= 0.0) {
            return Err(Error::InvalidParameter(alloc::format!(
                "channel {} has zero variance and cannot be standardized",
                ch + 1
            )));
        }
        let mut out = self.clone();
        for r in 0..self.r {
            for ch in 0..self.m {
                let start = (r * self.m + ch) * self.t_len;
                let inv_sd = 1.0 / Float::sqrt(vars[ch]);
                for t in 0..self.t_len {
                    out.samples[start + t] = (self.samples[start + t] - means[ch]) * inv_sd;
                }
            }
        }
        Ok(out)
    }
}

/// Generates `r_count` independent realizations of `model`.
///
/// Each realization starts from a zero state, runs `burn_in` extra steps
/// with the first available coefficients and covariance, then produces the
/// `T` recorded samples with the per-step parameters. Innovations are
/// Gaussian, shaped by the Cholesky factor of `Sigma_U(t_n)`; realization
/// `r` uses stream `r` of a counter-based generator, so output is
/// deterministic in `seed` and independent across realizations.
pub fn simulate(
    model: &TvVarModel,
    r_count: usize,
    seed: u64,
    burn_in: usize,
) -> Result<EpochData> {
    if r_count == 0 {
        return Err(Error::InvalidParameter(String::from(
            "at least one realization is required",
        )));
    }
    let (m, p, t_len) = (model.m(), model.p(), model.len());
    if t_len <= p {
        return Err(Error::InsufficientLength { t_len, p });
    }
    let first = model.valid_from();
    // One Cholesky factor per step, shared across realizations.
    let mut factors = Vec::with_capacity(t_len);
    for t in first..t_len {
        let sigma = model.sigma_at(t).expect("step in valid range");
        let chol = sigma.clone().cholesky().ok_or(Error::CovarianceNotPd {
            context: "simulate innovation covariance",
        })?;
        factors.push(chol.l());
    }

    let mut samples = vec![0.0; r_count * m * t_len];
    for r in 0..r_count {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        // history[k] holds Y(t-k-1)
        let mut history: Vec<DVector<f64>> = vec![DVector::zeros(m); p];
        let mut step = |coeff: &DMatrix<f64>, l: &DMatrix<f64>, rng: &mut ChaCha12Rng| {
            let z = DVector::from_fn(m, |_, _| StandardNormal.sample(rng));
            let mut x = l * z;
            for (k, past) in history.iter().enumerate() {
                x += coeff.columns(k * m, m) * past;
            }
            history.rotate_right(1);
            history[0] = x.clone();
            x
        };
        let first_coeff = model.coeffs_at(first).expect("step in valid range");
        for _ in 0..burn_in {
            let _ = step(first_coeff, &factors[0], &mut rng);
        }
        for t in first..t_len {
            let coeff = model.coeffs_at(t).expect("step in valid range");
            let x = step(coeff, &factors[t - first], &mut rng);
            for ch in 0..m {
                samples[(r * m + ch) * t_len + t] = x[ch];
            }
        }
    }
    EpochData::new(samples, r_count, m, t_len, model.fs(), None)
}
