//! Time-resolved and time-frequency O-information rate over multiplets of
//! channels.
//!
//! The OIR of an `N`-channel multiplet `X` combines `2N + 1` entropy rates:
//! `Omega_X = (N-2) H_X + sum_j [H_{X_j} - H_{X^j}]`, where `X_j` are the
//! singletons and `X^j` the leave-one-out complements. Its spectral version
//! substitutes spectral entropy rates and integrates back to the
//! time-domain value. Subset terms recur across multiplets, so an engine
//! caches them per subset and shares one PSD evaluation per time step.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::rls::{rls_identify, RlsConfig};
use crate::spectral::{
    integrate_spectrum, prune, spectral_entropy_rate_at, FrequencyGrid, SpectralState,
};
use crate::submodel::{entropy_rate, restricted_model, yule_walker_covariance, LaggedCovariance};
use crate::var::{stability_report, EpochData, TvVarModel};

/// A sorted set of at least two distinct channel indices (0-based).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Multiplet {
    indices: Vec<usize>,
}

impl Multiplet {
    /// Sorts the indices and rejects duplicates and sets smaller than a pair.
    pub fn new(mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        if indices.len() < 2 {
            return Err(Error::InvalidParameter(alloc::string::String::from(
                "a multiplet needs at least two channels",
            )));
        }
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter(alloc::string::String::from(
                "multiplet indices must be distinct",
            )));
        }
        Ok(Self { indices })
    }

    pub fn n(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// The complement subsets `X^j = X \ {x_j}`, in index order.
    fn complements(&self) -> Vec<Vec<usize>> {
        (0..self.indices.len())
            .map(|j| {
                self.indices
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != j)
                    .map(|(_, &v)| v)
                    .collect()
            })
            .collect()
    }
}

/// All sorted index combinations of the requested orders, in lexicographic
/// order within each order.
pub fn enumerate_multiplets(m: usize, orders: &[usize]) -> Result<Vec<Multiplet>> {
    let mut out = Vec::new();
    for &n in orders {
        if n < 2 || n > m {
            return Err(Error::InvalidParameter(alloc::format!(
                "multiplet order {n} outside 2..={m}"
            )));
        }
        let mut idx: Vec<usize> = (0..n).collect();
        loop {
            out.push(Multiplet {
                indices: idx.clone(),
            });
            // rightmost position that can still advance
            let mut i = n;
            while i > 0 && idx[i - 1] == i - 1 + m - n {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            idx[i - 1] += 1;
            for k in i..n {
                idx[k] = idx[k - 1] + 1;
            }
        }
    }
    Ok(out)
}

/// Time-resolved OIR values of one multiplet, in nats per sample.
/// Positive values are redundancy-dominated. Unavailable steps stay `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct OirSeries {
    pub multiplet: Multiplet,
    pub values: Vec<Option<f64>>,
}

/// A (time x frequency) grid of spectral OIR values for one multiplet.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeFreqField {
    pub multiplet: Multiplet,
    pub grid: FrequencyGrid,
    n_time: usize,
    values: Vec<Option<f64>>,
}

impl TimeFreqField {
    fn empty(multiplet: Multiplet, grid: FrequencyGrid, n_time: usize) -> Self {
        let n = n_time * grid.len();
        Self {
            multiplet,
            grid,
            n_time,
            values: vec![None; n],
        }
    }

    pub fn n_time(&self) -> usize {
        self.n_time
    }

    pub fn value(&self, t: usize, freq_index: usize) -> Option<f64> {
        self.values[t * self.grid.len() + freq_index]
    }

    /// One time step across all grid frequencies.
    pub fn row(&self, t: usize) -> &[Option<f64>] {
        let f = self.grid.len();
        &self.values[t * f..(t + 1) * f]
    }

    /// Spectral integral of one row, when every cell is available.
    pub fn integrated_row(&self, t: usize) -> Option<f64> {
        let row: Option<Vec<f64>> = self.row(t).iter().copied().collect();
        row.map(|v| integrate_spectrum(&v, &self.grid))
    }
}

/// A per-step failure inside a series computation. `subset` is `None` when
/// the failure concerns the whole model at that step (instability, solver
/// breakdown) rather than one subset term.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFailure {
    pub t: usize,
    pub subset: Option<Vec<usize>>,
    pub error: Error,
}

/// Shared computation state for one model: per-step lagged covariances,
/// entropy-rate series cached per subset, and the per-step failure log.
pub struct OirEngine<'m> {
    model: &'m TvVarModel,
    q: usize,
    max_lag: usize,
    stable: Vec<bool>,
    cov: Vec<Option<LaggedCovariance>>,
    cov_ready: bool,
    er_cache: BTreeMap<Vec<usize>, Vec<Option<f64>>>,
    failures: Vec<StepFailure>,
}

impl<'m> OirEngine<'m> {
    /// `q` is the restricted-model order, `max_lag` the covariance depth
    /// (at least `max(q, p)`).
    pub fn new(model: &'m TvVarModel, q: usize, max_lag: usize) -> Result<Self> {
        if q == 0 || q > max_lag || max_lag < model.p() {
            return Err(Error::InvalidParameter(alloc::format!(
                "need 1 <= q <= max_lag and max_lag >= p (q={q}, max_lag={max_lag}, p={})",
                model.p()
            )));
        }
        Ok(Self {
            model,
            q,
            max_lag,
            stable: stability_report(model),
            cov: Vec::new(),
            cov_ready: false,
            er_cache: BTreeMap::new(),
            failures: Vec::new(),
        })
    }

    pub fn model(&self) -> &TvVarModel {
        self.model
    }

    /// Failures recorded so far, ordered by discovery.
    pub fn failures(&self) -> &[StepFailure] {
        &self.failures
    }

    fn check_multiplet(&self, multiplet: &Multiplet) -> Result<()> {
        let max = *multiplet.indices().last().unwrap();
        if max >= self.model.m() {
            return Err(Error::InvalidParameter(alloc::format!(
                "multiplet index {max} out of range for {} channels",
                self.model.m()
            )));
        }
        Ok(())
    }

    fn ensure_covariances(&mut self) {
        if self.cov_ready {
            return;
        }
        let t_len = self.model.len();
        self.cov = Vec::with_capacity(t_len);
        for t in 0..t_len {
            if t < self.model.valid_from() {
                self.cov.push(None);
                continue;
            }
            match yule_walker_covariance(self.model, t, self.max_lag) {
                Ok(c) => self.cov.push(Some(c)),
                Err(e) => {
                    self.failures.push(StepFailure {
                        t,
                        subset: None,
                        error: e,
                    });
                    self.cov.push(None);
                }
            }
        }
        self.cov_ready = true;
    }

    /// Entropy-rate series of one subset, cached.
    pub fn entropy_series(&mut self, subset: &[usize]) -> Result<Vec<Option<f64>>> {
        if subset.is_empty() || *subset.last().unwrap() >= self.model.m() {
            return Err(Error::InvalidParameter(alloc::string::String::from(
                "subset must be non-empty and within the channel range",
            )));
        }
        if let Some(hit) = self.er_cache.get(subset) {
            return Ok(hit.clone());
        }
        self.ensure_covariances();
        let mut values = Vec::with_capacity(self.model.len());
        for t in 0..self.model.len() {
            let Some(cov) = &self.cov[t] else {
                values.push(None);
                continue;
            };
            match restricted_model(cov, subset, self.q).and_then(|rm| entropy_rate(rm.sigma_us())) {
                Ok(h) => values.push(Some(h)),
                Err(e) => {
                    self.failures.push(StepFailure {
                        t,
                        subset: Some(subset.to_vec()),
                        error: e,
                    });
                    values.push(None);
                }
            }
        }
        self.er_cache.insert(subset.to_vec(), values.clone());
        Ok(values)
    }

    /// Time-resolved OIR of one multiplet.
    pub fn oir_time(&mut self, multiplet: &Multiplet) -> Result<OirSeries> {
        self.check_multiplet(multiplet)?;
        let n = multiplet.n();
        let h_full = self.entropy_series(multiplet.indices())?;
        let mut h_single = Vec::with_capacity(n);
        let mut h_comp = Vec::with_capacity(n);
        for (&j, comp) in multiplet.indices().iter().zip(multiplet.complements()) {
            h_single.push(self.entropy_series(&[j])?);
            h_comp.push(self.entropy_series(&comp)?);
        }
        let values = (0..self.model.len())
            .map(|t| {
                let mut acc = (n as f64 - 2.0) * h_full[t]?;
                for j in 0..n {
                    acc += h_single[j][t]? - h_comp[j][t]?;
                }
                Some(acc)
            })
            .collect();
        Ok(OirSeries {
            multiplet: multiplet.clone(),
            values,
        })
    }

    /// Spectral OIR fields for several multiplets, sharing one transfer
    /// matrix and PSD evaluation per time step.
    pub fn oir_spectral_many(
        &mut self,
        multiplets: &[Multiplet],
        grid: &FrequencyGrid,
    ) -> Result<Vec<TimeFreqField>> {
        for m in multiplets {
            self.check_multiplet(m)?;
        }
        let t_len = self.model.len();
        let n_freq = grid.len();
        let mut fields: Vec<TimeFreqField> = multiplets
            .iter()
            .map(|m| TimeFreqField::empty(m.clone(), grid.clone(), t_len))
            .collect();

        // union of subset terms across all multiplets
        let mut subsets: alloc::collections::BTreeSet<Vec<usize>> =
            alloc::collections::BTreeSet::new();
        for m in multiplets {
            subsets.insert(m.indices().to_vec());
            for &j in m.indices() {
                subsets.insert(vec![j]);
            }
            for comp in m.complements() {
                subsets.insert(comp);
            }
        }
        let subset_list: Vec<Vec<usize>> = subsets.into_iter().collect();
        let subset_pos: BTreeMap<&[usize], usize> = subset_list
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_slice(), i))
            .collect();

        for t in 0..t_len {
            if t < self.model.valid_from() {
                continue;
            }
            if !self.stable[t] {
                self.failures.push(StepFailure {
                    t,
                    subset: None,
                    error: Error::NoStationarySolution { t },
                });
                continue;
            }
            let state = match SpectralState::compute(self.model, t, grid) {
                Ok(s) => s,
                Err(e) => {
                    self.failures.push(StepFailure {
                        t,
                        subset: None,
                        error: e,
                    });
                    continue;
                }
            };
            let spectra = state.psd();
            // per-subset spectral ER at this step
            let mut h_sub: Vec<Vec<Option<f64>>> = Vec::with_capacity(subset_list.len());
            for subset in &subset_list {
                let mut row = Vec::with_capacity(n_freq);
                let mut failed: Option<Error> = None;
                for (p_w, &omega) in spectra.iter().zip(grid.omegas()) {
                    let block = prune_or_full(p_w, subset, self.model.m());
                    match spectral_entropy_rate_at(&block, omega) {
                        Ok(v) => row.push(Some(v)),
                        Err(e) => {
                            row.push(None);
                            failed.get_or_insert(e);
                        }
                    }
                }
                if let Some(e) = failed {
                    self.failures.push(StepFailure {
                        t,
                        subset: Some(subset.clone()),
                        error: e,
                    });
                }
                h_sub.push(row);
            }
            for (field, multiplet) in fields.iter_mut().zip(multiplets) {
                let n = multiplet.n();
                let full = subset_pos[multiplet.indices()];
                let singles: Vec<usize> = multiplet
                    .indices()
                    .iter()
                    .map(|&j| subset_pos[[j].as_slice()])
                    .collect();
                let comps: Vec<usize> = multiplet
                    .complements()
                    .iter()
                    .map(|c| subset_pos[c.as_slice()])
                    .collect();
                let row = &mut field.values[t * n_freq..(t + 1) * n_freq];
                for (i, slot) in row.iter_mut().enumerate() {
                    *slot = (|| {
                        let mut acc = (n as f64 - 2.0) * h_sub[full][i]?;
                        for j in 0..n {
                            acc += h_sub[singles[j]][i]? - h_sub[comps[j]][i]?;
                        }
                        Some(acc)
                    })();
                }
            }
        }
        Ok(fields)
    }

    /// Spectral OIR field of a single multiplet.
    pub fn oir_spectral(
        &mut self,
        multiplet: &Multiplet,
        grid: &FrequencyGrid,
    ) -> Result<TimeFreqField> {
        Ok(self
            .oir_spectral_many(core::slice::from_ref(multiplet), grid)?
            .pop()
            .expect("one field per multiplet"))
    }
}

fn prune_or_full(p: &DMatrix<Complex<f64>>, subset: &[usize], m: usize) -> DMatrix<Complex<f64>> {
    if subset.len() == m {
        p.clone()
    } else {
        prune(p, subset)
    }
}

/// Time-resolved OIR of one multiplet on one model.
pub fn oir_time(
    model: &TvVarModel,
    multiplet: &Multiplet,
    q: usize,
    max_lag: usize,
) -> Result<OirSeries> {
    OirEngine::new(model, q, max_lag)?.oir_time(multiplet)
}

/// Time-frequency OIR of one multiplet on one model.
pub fn oir_spectral(
    model: &TvVarModel,
    multiplet: &Multiplet,
    grid: &FrequencyGrid,
) -> Result<TimeFreqField> {
    // the spectral path never touches restricted models; any valid q works
    let q = model.p().max(1);
    OirEngine::new(model, q, q.max(model.p()))?.oir_spectral(multiplet, grid)
}

/// One multiplet's outputs from a data-driven run.
#[derive(Debug, Clone, PartialEq)]
pub struct MultipletResult {
    pub series: OirSeries,
    pub field: TimeFreqField,
}

/// Output of the full data-driven pipeline: the identified model, one
/// result per requested multiplet, and the per-step failure log.
pub struct OirRun {
    pub model: TvVarModel,
    pub results: Vec<MultipletResult>,
    pub failures: Vec<StepFailure>,
}

/// Full pipeline: optional per-channel standardization, RLS identification,
/// then time-resolved and time-frequency OIR per multiplet with shared
/// subset caching.
pub fn oir_from_data(
    data: &EpochData,
    config: &RlsConfig,
    multiplets: &[Multiplet],
    grid: &FrequencyGrid,
    q: usize,
    max_lag: usize,
    standardize: bool,
) -> Result<OirRun> {
    let model = if standardize {
        rls_identify(&data.standardized()?, config)?
    } else {
        rls_identify(data, config)?
    };
    let mut results = Vec::with_capacity(multiplets.len());
    let failures;
    {
        let mut engine = OirEngine::new(&model, q, max_lag)?;
        let fields = engine.oir_spectral_many(multiplets, grid)?;
        for (multiplet, field) in multiplets.iter().zip(fields) {
            let series = engine.oir_time(multiplet)?;
            results.push(MultipletResult { series, field });
        }
        failures = engine.failures().to_vec();
    }
    Ok(OirRun {
        model,
        results,
        failures,
    })
}
