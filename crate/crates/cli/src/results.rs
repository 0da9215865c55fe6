//! Result serialization: per-multiplet CSVs plus a TOML run manifest.
//!
//! For each multiplet the writer emits
//! - `oir_<indices>.csv`: columns `time_s, oir_nats`;
//! - `oir_tf_<indices>.csv`: a matrix whose first row holds the grid
//!   frequencies in Hz and whose first column holds the time axis in
//!   seconds.
//!
//! Gaps are written as `nan`. Channel indices in file names are 1-based.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use tvoir_core::oir::{MultipletResult, StepFailure};
use tvoir_core::Multiplet;

use crate::config::AnalysisConfig;
use crate::{fmt_f64, CliResult};

/// Run summary written as `manifest.toml` alongside the data files.
#[derive(Debug, Clone, Serialize)]
pub struct ResultManifest {
    /// Deterministic digest of the configuration echo.
    pub run_id: String,
    /// Software version that produced the run.
    pub version: String,
    /// Number of unavailable (time step, subset) evaluations.
    pub failed_steps: usize,
    /// Per-multiplet output files, relative to the manifest directory.
    pub outputs: Vec<ManifestEntry>,
    /// Echo of the analysis configuration.
    pub config: AnalysisConfig,
    /// Human-readable failure descriptions (first 100).
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestEntry {
    pub multiplet: Vec<usize>,
    pub series: String,
    pub field: String,
}

fn multiplet_tag(m: &Multiplet) -> String {
    m.indices()
        .iter()
        .map(|i| (i + 1).to_string())
        .collect::<Vec<_>>()
        .join("-")
}

/// FNV-1a over the config echo; deterministic across runs with the same
/// configuration.
fn digest(text: &str) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}

/// Writes all per-multiplet outputs and the manifest into `dir`.
pub fn write_results(
    results: &[MultipletResult],
    failures: &[StepFailure],
    config: &AnalysisConfig,
    fs_hz: f64,
    dir: &Path,
) -> CliResult<ResultManifest> {
    fs::create_dir_all(dir)?;
    let mut outputs = Vec::with_capacity(results.len());
    for result in results {
        let tag = multiplet_tag(&result.series.multiplet);
        let series_name = format!("oir_{tag}.csv");
        let field_name = format!("oir_tf_{tag}.csv");
        write_series(result, fs_hz, config.onset_s, &dir.join(&series_name))?;
        write_field(result, fs_hz, config.onset_s, &dir.join(&field_name))?;
        outputs.push(ManifestEntry {
            multiplet: result
                .series
                .multiplet
                .indices()
                .iter()
                .map(|i| i + 1)
                .collect(),
            series: series_name,
            field: field_name,
        });
    }
    let config_echo = toml::to_string(config).unwrap_or_default();
    let manifest = ResultManifest {
        run_id: digest(&config_echo),
        version: env!("CARGO_PKG_VERSION").to_string(),
        failed_steps: failures.len(),
        outputs,
        config: config.clone(),
        failures: failures
            .iter()
            .take(100)
            .map(|f| match &f.subset {
                Some(s) => format!(
                    "t={} subset={:?}: {}",
                    f.t,
                    s.iter().map(|i| i + 1).collect::<Vec<_>>(),
                    f.error
                ),
                None => format!("t={}: {}", f.t, f.error),
            })
            .collect(),
    };
    let text = toml::to_string_pretty(&manifest)
        .map_err(|e| crate::CliError::io(format!("manifest serialization failed: {e}")))?;
    fs::write(dir.join("manifest.toml"), text)?;
    Ok(manifest)
}

fn write_series(
    result: &MultipletResult,
    fs_hz: f64,
    onset_s: f64,
    path: &PathBuf,
) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["time_s", "oir_nats"])?;
    for (t, v) in result.series.values.iter().enumerate() {
        let time = t as f64 / fs_hz - onset_s;
        w.write_record([fmt_f64(time), v.map_or("nan".into(), fmt_f64)])?;
    }
    w.flush()?;
    Ok(())
}

fn write_field(
    result: &MultipletResult,
    fs_hz: f64,
    onset_s: f64,
    path: &PathBuf,
) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    let freqs = result.field.grid.freqs_hz();
    let mut header = vec!["time_s".to_string()];
    header.extend(freqs.iter().map(|f| fmt_f64(*f)));
    w.write_record(&header)?;
    for t in 0..result.field.n_time() {
        let mut row = vec![fmt_f64(t as f64 / fs_hz - onset_s)];
        row.extend(
            result
                .field
                .row(t)
                .iter()
                .map(|v| v.map_or("nan".into(), fmt_f64)),
        );
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tvoir_core::oir::{oir_from_data, Multiplet};
    use tvoir_core::var::{build_benchmark_model, simulate, CoefficientSchedule};
    use tvoir_core::{FrequencyGrid, RlsConfig};

    #[test]
    fn outputs_have_documented_shapes_and_are_deterministic() {
        let schedule = CoefficientSchedule::constant(0.2, 60);
        let model = build_benchmark_model(&schedule, 100.0).unwrap();
        let data = simulate(&model, 8, 5, 100).unwrap();
        let grid = FrequencyGrid::uniform(17, 100.0).unwrap();
        let quad = [Multiplet::new(vec![0, 1, 2, 3]).unwrap()];
        let run =
            oir_from_data(&data, &RlsConfig::new(2, 0.05), &quad, &grid, 10, 10, true).unwrap();
        let config = AnalysisConfig::default();

        let dir = tempfile::tempdir().unwrap();
        let manifest =
            write_results(&run.results, &run.failures, &config, 100.0, dir.path()).unwrap();
        assert_eq!(manifest.outputs.len(), 1);
        assert_eq!(manifest.outputs[0].multiplet, vec![1, 2, 3, 4]);

        let series = std::fs::read_to_string(dir.path().join("oir_1-2-3-4.csv")).unwrap();
        assert_eq!(series.lines().count(), 61); // header + T rows
        let field = std::fs::read_to_string(dir.path().join("oir_tf_1-2-3-4.csv")).unwrap();
        assert_eq!(field.lines().count(), 61); // header + T rows
        assert_eq!(field.lines().next().unwrap().split(',').count(), 18); // time + 17 freqs
        assert!(dir.path().join("manifest.toml").exists());

        // identical run, identical bytes
        let dir2 = tempfile::tempdir().unwrap();
        let run2 =
            oir_from_data(&data, &RlsConfig::new(2, 0.05), &quad, &grid, 10, 10, true).unwrap();
        write_results(&run2.results, &run2.failures, &config, 100.0, dir2.path()).unwrap();
        let series2 = std::fs::read_to_string(dir2.path().join("oir_1-2-3-4.csv")).unwrap();
        assert_eq!(series, series2);
        let manifest1 = std::fs::read_to_string(dir.path().join("manifest.toml")).unwrap();
        let manifest2 = std::fs::read_to_string(dir2.path().join("manifest.toml")).unwrap();
        assert_eq!(manifest1, manifest2);
    }
}
