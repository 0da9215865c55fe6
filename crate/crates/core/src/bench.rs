//! Simulation-study harness: theoretical OIR profiles of the benchmark
//! process, Monte Carlo estimation sweeps over (R, c, waveform) cells, and
//! the normalized-bias / variance / fall-time metrics.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::oir::{oir_time, Multiplet, OirEngine, OirSeries, TimeFreqField};
use crate::rls::{rls_identify, RlsConfig};
use crate::spectral::FrequencyGrid;
use crate::var::{build_benchmark_model, simulate, CoefficientSchedule, Waveform};

/// Sampling frequency of the benchmark process (Hz).
pub const BENCH_FS: f64 = 100.0;
/// Record length of one benchmark realization.
pub const BENCH_SAMPLES: usize = 1000;
/// Period of the coupling waveform (s).
pub const BENCH_PERIOD_S: f64 = 4.0;
/// Coupling waveform amplitude range.
pub const BENCH_AMP: (f64, f64) = (0.0, 0.3);
/// True order of the benchmark process.
pub const BENCH_ORDER: usize = 2;
/// Restricted-model order used throughout the study.
pub const BENCH_RESTRICTED_ORDER: usize = 30;
/// Burn-in samples discarded before each recorded realization.
pub const BENCH_BURN_IN: usize = 500;
/// Desk-scale default for the iteration count (the full study used 100).
pub const BENCH_DEFAULT_ITERATIONS: usize = 20;

/// Threshold below which a theoretical OIR sample is excluded from the
/// normalized bias (and below which a trace counts as flat).
const FLAT_EPS: f64 = 1e-9;

/// One cell of the estimation study.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchCell {
    /// Realizations generated per iteration.
    pub r: usize,
    /// Adaptation factor (forgetting factor is `1 - c`).
    pub c: f64,
    /// Coupling waveform of the benchmark schedule.
    pub waveform: Waveform,
    /// Monte Carlo iterations.
    pub n_iterations: usize,
    /// Base seed; per-iteration seeds are derived deterministically.
    pub seed: u64,
}

/// Per-iteration metric pair (absent when the iteration failed).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationMetrics {
    pub bias_n: Option<f64>,
    pub var: Option<f64>,
}

/// Aggregated metrics of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchMetrics {
    /// Normalized bias, averaged over successful iterations.
    pub bias_n: Option<f64>,
    /// Trace variance, averaged over successful iterations.
    pub var: Option<f64>,
    /// Fall time of the cross-iteration mean trace (s), saturated at half
    /// the waveform period; `None` when no transition exists to measure.
    pub fall_time: Option<f64>,
    /// Cross-iteration mean of the estimated OIR trace.
    pub mean_trace: Vec<Option<f64>>,
    /// Theoretical OIR trace of the same cell.
    pub theoretical: Vec<f64>,
    /// Per-iteration metrics, in iteration order.
    pub per_iteration: Vec<IterationMetrics>,
    /// Iterations whose identification failed outright.
    pub failed_iterations: usize,
    /// Per-iteration estimate traces, when retention was requested.
    pub traces: Option<Vec<Vec<Option<f64>>>>,
}

/// The benchmark coupling schedule for one waveform over the study window.
pub fn bench_schedule(waveform: Waveform) -> Result<CoefficientSchedule> {
    CoefficientSchedule::new(
        waveform,
        BENCH_AMP.0,
        BENCH_AMP.1,
        BENCH_PERIOD_S,
        BENCH_FS,
        BENCH_SAMPLES,
    )
}

/// Exact OIR profiles from the true benchmark coefficients, without any
/// estimation: one (series, field) pair per multiplet.
pub fn theoretical_oir(
    schedule: &CoefficientSchedule,
    fs: f64,
    multiplets: &[Multiplet],
    grid: &FrequencyGrid,
    q: usize,
    max_lag: usize,
) -> Result<Vec<(OirSeries, TimeFreqField)>> {
    let model = build_benchmark_model(schedule, fs)?;
    let mut engine = OirEngine::new(&model, q, max_lag)?;
    let fields = engine.oir_spectral_many(multiplets, grid)?;
    multiplets
        .iter()
        .zip(fields)
        .map(|(m, field)| Ok((engine.oir_time(m)?, field)))
        .collect()
}

/// Time for a trace to descend from 90% to 10% of its range.
///
/// Finds the global maximum, then the first sample below
/// `min + 0.9 (max - min)`, then the first subsequent sample below
/// `min + 0.1 (max - min)`, and returns the time between the two crossings.
/// A trace whose range is below 1e-9 has nothing to measure (`None`); a
/// trace that never completes the descent saturates to its own duration.
pub fn fall_time(trace: &[f64], fs: f64) -> Option<f64> {
    if trace.is_empty() || !(fs > 0.0) {
        return None;
    }
    let max = trace.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = trace.iter().cloned().fold(f64::INFINITY, f64::min);
    if max - min < FLAT_EPS {
        return None;
    }
    let hi = min + 0.9 * (max - min);
    let lo = min + 0.1 * (max - min);
    fall_between_thresholds(trace, hi, lo, fs)
}

/// Descent search with explicit thresholds: first sample below `hi` after
/// the global maximum, then the first subsequent sample below `lo`. An
/// incomplete descent saturates to the trace duration.
fn fall_between_thresholds(trace: &[f64], hi: f64, lo: f64, fs: f64) -> Option<f64> {
    if trace.is_empty() || !(fs > 0.0) {
        return None;
    }
    let duration = trace.len() as f64 / fs;
    let imax = trace.iter().enumerate().fold(
        0usize,
        |best, (i, &v)| if v > trace[best] { i } else { best },
    );
    let Some(ihi) = (imax..trace.len()).find(|&i| trace[i] < hi) else {
        return Some(duration);
    };
    let Some(ilo) = (ihi..trace.len()).find(|&i| trace[i] < lo) else {
        return Some(duration);
    };
    Some((ilo - ihi) as f64 / fs)
}

/// Normalized bias `mean |theory - est| / theory` over the samples where the
/// estimate exists and `|theory|` is above threshold.
pub(crate) fn normalized_bias(theory: &[f64], est: &[Option<f64>]) -> Option<f64> {
    let mut acc = 0.0;
    let mut n = 0usize;
    for (th, e) in theory.iter().zip(est) {
        if let Some(v) = e {
            if th.abs() >= FLAT_EPS {
                acc += (th - v).abs() / th;
                n += 1;
            }
        }
    }
    (n > 0).then(|| acc / n as f64)
}

/// Variance of a trace around its own time mean, over available samples.
pub(crate) fn trace_variance(est: &[Option<f64>]) -> Option<f64> {
    let vals: Vec<f64> = est.iter().filter_map(|v| *v).collect();
    if vals.is_empty() {
        return None;
    }
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    Some(vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64)
}

fn derive_seed(base: u64, iteration: usize, salt: u64) -> u64 {
    // splitmix64 over a mixed key
    let mut z = base
        ^ (iteration as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ salt.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs one cell: per iteration simulate -> identify -> time-resolved OIR of
/// the full quadruplet, then aggregates BIAS_N, VAR and the fall time of the
/// cross-iteration mean trace.
pub fn run_cell(cell: &BenchCell) -> Result<BenchMetrics> {
    run_cell_with(cell, false)
}

/// As [`run_cell`], optionally retaining per-iteration traces.
pub fn run_cell_with(cell: &BenchCell, keep_traces: bool) -> Result<BenchMetrics> {
    if cell.r == 0 || cell.n_iterations == 0 {
        return Err(Error::InvalidParameter(alloc::string::String::from(
            "a cell needs at least one realization and one iteration",
        )));
    }
    if !(0.0..=1.0).contains(&cell.c) {
        return Err(Error::InvalidParameter(alloc::string::String::from(
            "adaptation factor c must lie in [0, 1]",
        )));
    }
    let schedule = bench_schedule(cell.waveform)?;
    let model = build_benchmark_model(&schedule, BENCH_FS)?;
    let quad = Multiplet::new(alloc::vec![0, 1, 2, 3]).expect("valid multiplet");
    let q = BENCH_RESTRICTED_ORDER;
    let theory_series = oir_time(&model, &quad, q, q)?;
    let theory: Vec<f64> = theory_series
        .values
        .iter()
        .map(|v| v.expect("theoretical model is stable everywhere"))
        .collect();

    let t_len = theory.len();
    let mut sum = alloc::vec![0.0f64; t_len];
    let mut count = alloc::vec![0usize; t_len];
    let mut per_iteration = Vec::with_capacity(cell.n_iterations);
    let mut traces = keep_traces.then(Vec::new);
    let mut failed = 0usize;
    let mut last_error = None;

    for i in 0..cell.n_iterations {
        let data = simulate(
            &model,
            cell.r,
            derive_seed(cell.seed, i, 0x51),
            BENCH_BURN_IN,
        )?;
        let mut cfg = RlsConfig::new(BENCH_ORDER, cell.c);
        cfg.seed = derive_seed(cell.seed, i, 0xA7);
        let est_model = match rls_identify(&data, &cfg) {
            Ok(m) => m,
            Err(e) => {
                failed += 1;
                last_error = Some(e);
                per_iteration.push(IterationMetrics {
                    bias_n: None,
                    var: None,
                });
                continue;
            }
        };
        let est = oir_time(&est_model, &quad, q, q)?;
        for (t, v) in est.values.iter().enumerate() {
            if let Some(v) = v {
                sum[t] += v;
                count[t] += 1;
            }
        }
        per_iteration.push(IterationMetrics {
            bias_n: normalized_bias(&theory, &est.values),
            var: trace_variance(&est.values),
        });
        if let Some(tr) = traces.as_mut() {
            tr.push(est.values.clone());
        }
    }
    if failed == cell.n_iterations {
        return Err(last_error.expect("failures were recorded"));
    }

    let mean_trace: Vec<Option<f64>> = sum
        .iter()
        .zip(&count)
        .map(|(s, &c)| (c > 0).then(|| s / c as f64))
        .collect();
    let mean_of =
        |vals: Vec<f64>| (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64);
    let bias_vals: Vec<f64> = per_iteration.iter().filter_map(|m| m.bias_n).collect();
    let var_vals: Vec<f64> = per_iteration.iter().filter_map(|m| m.var).collect();

    Ok(BenchMetrics {
        bias_n: mean_of(bias_vals),
        var: mean_of(var_vals),
        fall_time: mean_trace_fall_time(&theory, &mean_trace),
        mean_trace,
        theoretical: theory,
        per_iteration,
        failed_iterations: failed,
        traces,
    })
}

/// Fall time of the cross-iteration mean trace: a transition-detection
/// metric.
///
/// The 90%/10% thresholds are anchored on the theoretical level range, so
/// an estimator that never descends to the low level cannot complete the
/// crossing pair and saturates. The window opens at the first theoretical
/// maximum past the initial quarter period (a settled high plateau) and
/// runs to the end of the trace; the result saturates at half the waveform
/// period, the longest fall the schedule can express. Returns `None` when
/// the theoretical profile has no transition.
fn mean_trace_fall_time(theory: &[f64], mean_trace: &[Option<f64>]) -> Option<f64> {
    let th_max = theory.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let th_min = theory.iter().cloned().fold(f64::INFINITY, f64::min);
    if th_max - th_min < FLAT_EPS {
        return None;
    }
    let hi = th_min + 0.9 * (th_max - th_min);
    let lo = th_min + 0.1 * (th_max - th_min);
    let quarter = (BENCH_PERIOD_S / 4.0 * BENCH_FS) as usize;
    if quarter >= theory.len() {
        return None;
    }
    let start =
        (quarter..theory.len()).fold(
            quarter,
            |best, t| if theory[t] > theory[best] { t } else { best },
        );
    let first = (start..mean_trace.len()).find(|&t| mean_trace[t].is_some())?;
    let window: Vec<f64> = mean_trace[first..].iter().map_while(|v| *v).collect();
    fall_between_thresholds(&window, hi, lo, BENCH_FS).map(|ft| ft.min(BENCH_PERIOD_S / 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_relative_eq;

    #[test]
    fn fall_time_of_instant_step_is_zero() {
        let mut trace = vec![1.0; 300];
        trace[150..].iter_mut().for_each(|v| *v = 0.0);
        assert_relative_eq!(fall_time(&trace, 100.0).unwrap(), 0.0);
    }

    #[test]
    fn fall_time_of_linear_ramp_spans_eighty_percent() {
        // midpoint-sampled unit ramp over 1 s, so the 90%/10% thresholds
        // fall strictly between samples
        let n = 1000;
        let trace: Vec<f64> = (0..n).map(|k| 1.0 - (k as f64 + 0.5) / n as f64).collect();
        let ft = fall_time(&trace, 1000.0).unwrap();
        assert_relative_eq!(ft, 0.8, epsilon = 1e-3);
    }

    #[test]
    fn fall_time_of_flat_trace_is_unavailable() {
        assert!(fall_time(&[0.4; 100], 10.0).is_none());
    }

    #[test]
    fn fall_time_saturates_without_descent() {
        // rises and never comes back down
        let trace: Vec<f64> = (0..200).map(|k| k as f64).collect();
        assert_relative_eq!(fall_time(&trace, 100.0).unwrap(), 2.0);
    }

    #[test]
    fn theoretical_square_profile_is_two_level_and_periodic() {
        let schedule = bench_schedule(Waveform::Square).unwrap();
        let quad = [Multiplet::new(vec![0, 1, 2, 3]).unwrap()];
        let grid = FrequencyGrid::uniform(9, BENCH_FS).unwrap();
        let out = theoretical_oir(&schedule, BENCH_FS, &quad, &grid, 30, 30).unwrap();
        let values: Vec<f64> = out[0].0.values.iter().map(|v| v.unwrap()).collect();
        let high = values[0];
        let low = values[250];
        assert!(high > low && low > 0.0);
        for (t, v) in values.iter().enumerate() {
            let expected = if (t / 200) % 2 == 0 { high } else { low };
            assert!(
                (v - expected).abs() < 1e-9,
                "t={t}: {v} vs expected {expected}"
            );
        }
    }

    #[test]
    fn theoretical_study_multiplets_are_redundancy_dominated() {
        let schedule = bench_schedule(Waveform::Square).unwrap();
        let multiplets = [
            Multiplet::new(vec![0, 1, 2]).unwrap(),
            Multiplet::new(vec![0, 2, 3]).unwrap(),
            Multiplet::new(vec![0, 1, 2, 3]).unwrap(),
        ];
        let grid = FrequencyGrid::uniform(9, BENCH_FS).unwrap();
        let out = theoretical_oir(&schedule, BENCH_FS, &multiplets, &grid, 30, 30).unwrap();
        for (series, _) in &out {
            assert!(series.values.iter().all(|v| v.unwrap() > 0.0));
        }
    }

    #[test]
    fn constant_schedule_gives_time_invariant_profile_and_no_fall_time() {
        let cell = BenchCell {
            r: 6,
            c: 0.05,
            waveform: Waveform::Constant,
            n_iterations: 1,
            seed: 3,
        };
        let metrics = run_cell(&cell).unwrap();
        let first = metrics.theoretical[0];
        assert!(metrics.theoretical.iter().all(|v| (v - first).abs() < 1e-9));
        assert!(metrics.fall_time.is_none());
    }

    #[test]
    fn exact_trace_has_zero_bias() {
        let theory = vec![0.5, 0.6, 0.7];
        let est: Vec<Option<f64>> = theory.iter().map(|&v| Some(v)).collect();
        assert_relative_eq!(normalized_bias(&theory, &est).unwrap(), 0.0);
        assert!(trace_variance(&est).unwrap() > 0.0);
    }

    #[test]
    fn bias_skips_gaps_and_near_zero_theory() {
        let theory = vec![1.0, 0.0, 2.0];
        let est = vec![Some(1.1), Some(5.0), None];
        // only t=0 contributes: |1.0 - 1.1| / 1.0
        assert_relative_eq!(
            normalized_bias(&theory, &est).unwrap(),
            0.1,
            epsilon = 1e-12
        );
    }

    #[test]
    fn run_cell_is_deterministic() {
        let cell = BenchCell {
            r: 10,
            c: 0.05,
            waveform: Waveform::Square,
            n_iterations: 1,
            seed: 11,
        };
        let a = run_cell(&cell).unwrap();
        let b = run_cell(&cell).unwrap();
        assert_eq!(a.mean_trace, b.mean_trace);
        assert_eq!(a.bias_n, b.bias_n);
        assert_eq!(a.var, b.var);
        assert_eq!(a.fall_time, b.fall_time);
    }
}
