//! Subcommand definitions and their implementations.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use tvoir_core::bench::{run_cell_with, BenchCell, BENCH_DEFAULT_ITERATIONS};
use tvoir_core::oir::{enumerate_multiplets, MultipletResult, OirEngine};
use tvoir_core::var::{build_benchmark_model, simulate, CoefficientSchedule};
use tvoir_core::{
    rls_identify, select_order_mspe, EpochData, FrequencyGrid, Multiplet, TvVarModel, Waveform,
};

use crate::config::{AnalysisConfig, OrderSpec};
use crate::epochs::{
    read_epochs, read_epochs_binary, write_epochs_binary, write_epochs_csv_dir, EPOCH_MAGIC,
};
use crate::model_io::{read_model, write_model, MODEL_MAGIC};
use crate::results::write_results;
use crate::{fmt_f64, CliError, CliResult};

#[derive(Parser, Debug)]
#[command(
    name = "tvoir",
    version,
    about = "Time-resolved and time-frequency O-information rate for multichannel processes"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate epochs from the built-in benchmark process or a model dump
    Simulate(SimulateArgs),
    /// Identify a time-varying VAR model from epochs
    Identify(IdentifyArgs),
    /// Compute time-resolved and time-frequency OIR for multiplets
    Oir(OirArgs),
    /// Run the estimation-study grid and emit one metrics row per cell
    Bench(BenchArgs),
    /// Run the built-in verification checks
    Selftest,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum WaveformArg {
    Square,
    Sine,
    Constant,
}

impl From<WaveformArg> for Waveform {
    fn from(w: WaveformArg) -> Self {
        match w {
            WaveformArg::Square => Waveform::Square,
            WaveformArg::Sine => Waveform::Sinusoid,
            WaveformArg::Constant => Waveform::Constant,
        }
    }
}

fn waveform_name(w: WaveformArg) -> &'static str {
    match w {
        WaveformArg::Square => "square",
        WaveformArg::Sine => "sine",
        WaveformArg::Constant => "constant",
    }
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Coupling waveform of the benchmark schedule
    #[arg(long, value_enum, default_value = "square")]
    pub waveform: WaveformArg,
    /// Low amplitude of the schedule
    #[arg(long, default_value_t = 0.0)]
    pub lo: f64,
    /// High amplitude of the schedule
    #[arg(long, default_value_t = 0.3)]
    pub hi: f64,
    /// Waveform period in seconds
    #[arg(long, default_value_t = 4.0)]
    pub period: f64,
    /// Sampling frequency in Hz
    #[arg(long, default_value_t = 100.0)]
    pub fs: f64,
    /// Samples per realization
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    /// Number of realizations
    #[arg(long = "R", default_value_t = 10)]
    pub realizations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Burn-in samples discarded before recording
    #[arg(long, default_value_t = 500)]
    pub burn_in: usize,
    /// Simulate this model dump instead of the built-in benchmark
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Output path: a file for bin, a directory for csv
    #[arg(long)]
    pub output: PathBuf,
    /// Output representation
    #[arg(long, value_enum, default_value = "bin")]
    pub format: EpochFormat,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum EpochFormat {
    Bin,
    Csv,
}

#[derive(Args, Debug)]
pub struct IdentifyArgs {
    /// Epochs: a CSV directory or a binary container
    #[arg(long)]
    pub input: PathBuf,
    /// Model order, or "auto" for the MSPE scan
    #[arg(long, default_value = "auto")]
    pub order: OrderSpec,
    /// Largest order tried by the MSPE scan
    #[arg(long, default_value_t = 20)]
    pub pmax: usize,
    /// Adaptation factor c (forgetting factor is 1-c)
    #[arg(long, default_value_t = 0.025)]
    pub c: f64,
    /// Per-channel standardization before identification
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub standardize: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Ridge constant (0 = automatic, scaled to the data variance)
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    /// Half-width of the uniform coefficient initialization
    #[arg(long, default_value_t = 1.0)]
    pub init_scale: f64,
    /// Sampling frequency override for CSV inputs
    #[arg(long, default_value_t = 0.0)]
    pub fs: f64,
    /// TOML config whose keys override the flags
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Model dump destination
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct OirArgs {
    /// Epochs (CSV directory or binary container) or a model dump
    #[arg(long)]
    pub input: PathBuf,
    /// Multiplet orders to enumerate, e.g. 3 or 3,4
    #[arg(long, value_delimiter = ',')]
    pub orders: Vec<usize>,
    /// Explicit multiplet as comma-separated 1-based channel indices,
    /// e.g. --multiplet 1,2,3 (repeatable)
    #[arg(long = "multiplet", action = clap::ArgAction::Append)]
    pub multiplets: Vec<String>,
    /// Model order, or "auto" for the MSPE scan (epoch inputs only)
    #[arg(long, default_value = "auto")]
    pub order: OrderSpec,
    #[arg(long, default_value_t = 20)]
    pub pmax: usize,
    /// Adaptation factor c (forgetting factor is 1-c)
    #[arg(long, default_value_t = 0.025)]
    pub c: f64,
    /// Restricted-model order
    #[arg(long, default_value_t = 30)]
    pub q: usize,
    /// Covariance depth (0 = max(q, p))
    #[arg(long, default_value_t = 0)]
    pub max_lag: usize,
    /// Frequency-grid points on [0, pi]
    #[arg(long, default_value_t = 513)]
    pub n_freq: usize,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub standardize: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub init_scale: f64,
    /// Sampling frequency override for CSV inputs
    #[arg(long, default_value_t = 0.0)]
    pub fs: f64,
    /// Stimulus-onset offset subtracted from the output time axis (s)
    #[arg(long, default_value_t = 0.0)]
    pub onset_s: f64,
    /// TOML config whose keys override the flags
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for the per-multiplet CSVs and the manifest
    #[arg(long)]
    pub output: PathBuf,
    /// Also dump the identified model here
    #[arg(long)]
    pub model_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Realization counts, e.g. 10,50
    #[arg(long = "R", value_delimiter = ',', default_value = "10")]
    pub realizations: Vec<usize>,
    /// Forgetting factors (1-c), e.g. 0.7,0.96
    #[arg(long, value_delimiter = ',', default_value = "0.96")]
    pub forget: Vec<f64>,
    /// Waveforms, e.g. square,sine
    #[arg(long, value_delimiter = ',', default_value = "square")]
    pub waveform: Vec<WaveformArg>,
    /// Monte Carlo iterations per cell
    #[arg(long, default_value_t = BENCH_DEFAULT_ITERATIONS)]
    pub iterations: usize,
    /// Run the full-scale study (100 iterations per cell)
    #[arg(long)]
    pub full: bool,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Metrics CSV destination (one row per cell)
    #[arg(long)]
    pub output: PathBuf,
    /// Optional per-iteration metrics CSV (for external statistics)
    #[arg(long)]
    pub iterations_output: Option<PathBuf>,
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Identify(args) => cmd_identify(args),
        Command::Oir(args) => cmd_oir(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Selftest => cmd_selftest(),
    }
}

fn cmd_simulate(args: SimulateArgs) -> CliResult<()> {
    let model = match &args.model {
        Some(path) => read_model(path)?,
        None => {
            let schedule = CoefficientSchedule::new(
                args.waveform.into(),
                args.lo,
                args.hi,
                args.period,
                args.fs,
                args.samples,
            )?;
            build_benchmark_model(&schedule, args.fs)?
        }
    };
    let data = simulate(&model, args.realizations, args.seed, args.burn_in)?;
    match args.format {
        EpochFormat::Bin => write_epochs_binary(&data, &args.output)?,
        EpochFormat::Csv => write_epochs_csv_dir(&data, &args.output)?,
    }
    println!(
        "wrote {} realizations x {} channels x {} samples to {}",
        data.realizations(),
        data.channels(),
        data.samples_per_channel(),
        args.output.display()
    );
    Ok(())
}

fn load_epochs_with_fs(path: &Path, fs_override: f64) -> CliResult<EpochData> {
    let data = read_epochs(path)?;
    if fs_override > 0.0 {
        Ok(data.with_fs(fs_override)?)
    } else if path.is_dir() && (data.fs() - 1.0).abs() < f64::EPSILON {
        Err(CliError::usage(
            "CSV epoch directories carry no sampling frequency; pass --fs",
        ))
    } else {
        Ok(data)
    }
}

fn resolve_order(data: &EpochData, config: &AnalysisConfig, quiet: bool) -> CliResult<usize> {
    match config.order {
        OrderSpec::Fixed(p) => Ok(p),
        OrderSpec::Auto(_) => {
            let p = select_order_mspe(data, config.c, config.pmax)?;
            if !quiet {
                println!(
                    "selected model order p = {p} (MSPE scan up to {})",
                    config.pmax
                );
            }
            Ok(p)
        }
    }
}

fn cmd_identify(args: IdentifyArgs) -> CliResult<()> {
    let mut config = AnalysisConfig {
        order: args.order,
        pmax: args.pmax,
        c: args.c,
        standardize: args.standardize,
        seed: args.seed,
        delta: args.delta,
        init_scale: args.init_scale,
        fs: args.fs,
        ..AnalysisConfig::default()
    };
    if let Some(path) = &args.config {
        config = AnalysisConfig::load_over(path, &config)?;
    }
    let data = load_epochs_with_fs(&args.input, config.fs)?;
    let data = if config.standardize {
        data.standardized()?
    } else {
        data
    };
    let p = resolve_order(&data, &config, false)?;
    let model = rls_identify(&data, &config.rls_config(p))?;
    write_model(&model, &args.output)?;
    println!(
        "identified TV-VAR(p={p}) over {} channels, {} steps -> {}",
        model.m(),
        model.len(),
        args.output.display()
    );
    Ok(())
}

/// What the `oir` input turned out to be.
enum OirInput {
    Epochs(EpochData),
    Model(TvVarModel),
}

fn load_oir_input(path: &Path, fs_override: f64) -> CliResult<OirInput> {
    if path.is_dir() {
        return Ok(OirInput::Epochs(load_epochs_with_fs(path, fs_override)?));
    }
    let mut magic = [0u8; 8];
    {
        use std::io::Read;
        let mut f = std::fs::File::open(path)?;
        f.read_exact(&mut magic)
            .map_err(|_| CliError::io(format!("{}: file too short", path.display())))?;
    }
    if &magic == MODEL_MAGIC {
        Ok(OirInput::Model(read_model(path)?))
    } else if &magic == EPOCH_MAGIC {
        Ok(OirInput::Epochs(read_epochs_binary(path)?))
    } else {
        Err(CliError::io(format!(
            "{}: neither an epoch container nor a model dump",
            path.display()
        )))
    }
}

fn requested_multiplets(config: &AnalysisConfig, m: usize) -> CliResult<Vec<Multiplet>> {
    let mut set: BTreeSet<Multiplet> = BTreeSet::new();
    if !config.orders.is_empty() {
        for multiplet in enumerate_multiplets(m, &config.orders)? {
            set.insert(multiplet);
        }
    }
    for indices in &config.multiplets {
        if indices.iter().any(|&i| i == 0 || i > m) {
            return Err(CliError::usage(format!(
                "multiplet {indices:?} uses 1-based channel indices in 1..={m}"
            )));
        }
        set.insert(Multiplet::new(indices.iter().map(|&i| i - 1).collect())?);
    }
    if set.is_empty() {
        return Err(CliError::usage(
            "nothing to compute: pass --orders and/or --multiplet",
        ));
    }
    Ok(set.into_iter().collect())
}

fn cmd_oir(args: OirArgs) -> CliResult<()> {
    let mut config = AnalysisConfig {
        order: args.order,
        pmax: args.pmax,
        c: args.c,
        q: args.q,
        max_lag: args.max_lag,
        n_freq: args.n_freq,
        orders: args.orders,
        multiplets: parse_multiplet_args(&args.multiplets)?,
        standardize: args.standardize,
        seed: args.seed,
        delta: args.delta,
        init_scale: args.init_scale,
        fs: args.fs,
        onset_s: args.onset_s,
    };
    if let Some(path) = &args.config {
        config = AnalysisConfig::load_over(path, &config)?;
    }

    let model = match load_oir_input(&args.input, config.fs)? {
        OirInput::Model(model) => model,
        OirInput::Epochs(data) => {
            let data = if config.standardize {
                data.standardized()?
            } else {
                data
            };
            let p = resolve_order(&data, &config, false)?;
            rls_identify(&data, &config.rls_config(p))?
        }
    };
    if let Some(path) = &args.model_out {
        write_model(&model, path)?;
    }

    let multiplets = requested_multiplets(&config, model.m())?;
    let grid = FrequencyGrid::uniform(config.n_freq, model.fs())?;
    let max_lag = config.resolved_max_lag(model.p());
    let mut engine = OirEngine::new(&model, config.q, max_lag)?;
    let fields = engine.oir_spectral_many(&multiplets, &grid)?;
    let mut results = Vec::with_capacity(multiplets.len());
    for (multiplet, field) in multiplets.iter().zip(fields) {
        let series = engine.oir_time(multiplet)?;
        results.push(MultipletResult { series, field });
    }
    let failures = engine.failures().to_vec();
    drop(engine);

    let manifest = write_results(&results, &failures, &config, model.fs(), &args.output)?;
    println!(
        "wrote {} multiplet result pairs to {} (run {}, {} unavailable step evaluations)",
        manifest.outputs.len(),
        args.output.display(),
        manifest.run_id,
        manifest.failed_steps
    );
    Ok(())
}

/// Each `--multiplet 1,2,3` occurrence is one comma-separated index list.
fn parse_multiplet_args(groups: &[String]) -> CliResult<Vec<Vec<usize>>> {
    groups
        .iter()
        .map(|group| {
            group
                .split(',')
                .map(|tok| {
                    tok.trim().parse::<usize>().map_err(|_| {
                        CliError::usage(format!("--multiplet {group:?}: bad index {tok:?}"))
                    })
                })
                .collect()
        })
        .collect()
}

fn cmd_bench(args: BenchArgs) -> CliResult<()> {
    let iterations = if args.full { 100 } else { args.iterations };
    let keep = args.iterations_output.is_some();
    let mut writer = csv::Writer::from_path(&args.output)?;
    writer.write_record([
        "realizations",
        "forget",
        "waveform",
        "iterations",
        "failed_iterations",
        "bias_n",
        "var",
        "fall_time_s",
    ])?;
    let mut iter_writer = match &args.iterations_output {
        Some(path) => {
            let mut w = csv::Writer::from_path(path)?;
            w.write_record([
                "realizations",
                "forget",
                "waveform",
                "iteration",
                "bias_n",
                "var",
            ])?;
            Some(w)
        }
        None => None,
    };

    let mut cell_index = 0u64;
    for &r in &args.realizations {
        for &forget in &args.forget {
            if !(0.0..=1.0).contains(&forget) {
                return Err(CliError::usage(format!(
                    "forgetting factor {forget} outside [0, 1]"
                )));
            }
            for &waveform in &args.waveform {
                let cell = BenchCell {
                    r,
                    c: 1.0 - forget,
                    waveform: waveform.into(),
                    n_iterations: iterations,
                    seed: args.seed.wrapping_add(cell_index),
                };
                cell_index += 1;
                let metrics = run_cell_with(&cell, keep)?;
                writer.write_record([
                    r.to_string(),
                    fmt_f64(forget),
                    waveform_name(waveform).to_string(),
                    iterations.to_string(),
                    metrics.failed_iterations.to_string(),
                    metrics.bias_n.map_or("nan".into(), fmt_f64),
                    metrics.var.map_or("nan".into(), fmt_f64),
                    metrics.fall_time.map_or("nan".into(), fmt_f64),
                ])?;
                if let Some(w) = iter_writer.as_mut() {
                    for (i, it) in metrics.per_iteration.iter().enumerate() {
                        w.write_record([
                            r.to_string(),
                            fmt_f64(forget),
                            waveform_name(waveform).to_string(),
                            i.to_string(),
                            it.bias_n.map_or("nan".into(), fmt_f64),
                            it.var.map_or("nan".into(), fmt_f64),
                        ])?;
                    }
                }
                println!(
                    "cell R={r} forget={forget} waveform={}: bias_n={:?} var={:?} fall={:?}",
                    waveform_name(waveform),
                    metrics.bias_n,
                    metrics.var,
                    metrics.fall_time
                );
            }
        }
    }
    writer.flush()?;
    if let Some(w) = iter_writer.as_mut() {
        w.flush()?;
    }
    Ok(())
}

fn cmd_selftest() -> CliResult<()> {
    use tvoir_core::submodel::{entropy_rate, yule_walker_covariance};
    let mut failures = 0usize;
    let mut check = |name: &str, ok: bool, detail: String| {
        if ok {
            println!("PASS {name}: {detail}");
        } else {
            println!("FAIL {name}: {detail}");
            failures += 1;
        }
    };

    // AR(1) closed-form autocovariance
    {
        let coeffs = vec![nalgebra::DMatrix::from_element(1, 1, 0.5); 1];
        let sigma = vec![nalgebra::DMatrix::from_element(1, 1, 1.0); 1];
        let model = TvVarModel::new(coeffs, sigma, 1.0).unwrap();
        let cov = yule_walker_covariance(&model, 0, 8)?;
        let worst = (0..=8)
            .map(|k| (cov.gamma(k)[(0, 0)] - 0.5f64.powi(k as i32) * (4.0 / 3.0)).abs())
            .fold(0.0, f64::max);
        check(
            "ar1 autocovariance",
            worst < 1e-10,
            format!("max error {worst:.1e}"),
        );
    }

    // Gaussian entropy-rate constant
    {
        let h = entropy_rate(&nalgebra::DMatrix::from_element(1, 1, 1.0))?;
        let err = (h - 1.4189385332046727).abs();
        check("entropy constant", err < 1e-12, format!("error {err:.1e}"));
    }

    // pair nullity and spectral integration on the benchmark process
    {
        let schedule = CoefficientSchedule::constant(0.3, 1);
        let model = build_benchmark_model(&schedule, 100.0)?;
        let grid = FrequencyGrid::uniform(1024, 100.0)?;
        let mut engine = OirEngine::new(&model, 30, 30)?;
        let mut worst_pair: f64 = 0.0;
        for pair in enumerate_multiplets(4, &[2])? {
            let series = engine.oir_time(&pair)?;
            worst_pair = worst_pair.max(series.values[0].unwrap().abs());
        }
        check(
            "pair nullity",
            worst_pair < 1e-10,
            format!("max |Omega| {worst_pair:.1e}"),
        );

        let quad = Multiplet::new(vec![0, 1, 2, 3])?;
        let series = engine.oir_time(&quad)?;
        let field = engine.oir_spectral(&quad, &grid)?;
        let gap = (series.values[0].unwrap() - field.integrated_row(0).unwrap()).abs();
        check(
            "spectral integration",
            gap < 1e-3,
            format!("gap {gap:.1e} nats"),
        );
    }

    // the two OLS limits on a small stationary dataset
    {
        let schedule = CoefficientSchedule::constant(0.2, 300);
        let model = build_benchmark_model(&schedule, 100.0)?;
        let data = simulate(&model, 40, 99, 300)?;
        let mut cfg = tvoir_core::RlsConfig::new(2, 0.0);
        cfg.delta = Some(1e-10);
        let est = rls_identify(&data, &cfg)?;
        let mut gram = nalgebra::DMatrix::<f64>::zeros(8, 8);
        let mut cross = nalgebra::DMatrix::<f64>::zeros(4, 8);
        for t in 2..data.samples_per_channel() {
            let mut w = nalgebra::DMatrix::<f64>::zeros(8, data.realizations());
            let mut y = nalgebra::DMatrix::<f64>::zeros(4, data.realizations());
            for r in 0..data.realizations() {
                for k in 1..=2 {
                    for ch in 0..4 {
                        w[((k - 1) * 4 + ch, r)] = data.value(r, ch, t - k);
                    }
                }
                for ch in 0..4 {
                    y[(ch, r)] = data.value(r, ch, t);
                }
            }
            gram += &w * w.transpose();
            cross += &y * w.transpose();
        }
        let ols = gram.lu().solve(&cross.transpose()).unwrap().transpose();
        let rel = (est.coeffs_at(est.len() - 1).unwrap() - &ols).norm() / ols.norm();
        check(
            "c=0 batch OLS limit",
            rel < 1e-8,
            format!("relative error {rel:.1e}"),
        );
    }

    // binary epoch container round-trip
    {
        let schedule = CoefficientSchedule::constant(0.1, 24);
        let model = build_benchmark_model(&schedule, 100.0)?;
        let data = simulate(&model, 2, 5, 50)?;
        let path = std::env::temp_dir().join(format!("tvoir-selftest-{}.bin", std::process::id()));
        write_epochs_binary(&data, &path)?;
        let back = read_epochs_binary(&path);
        let ok = matches!(&back, Ok(b) if b.raw() == data.raw());
        let _ = std::fs::remove_file(&path);
        check("epoch container round-trip", ok, "bit-exact".to_string());
    }

    if failures > 0 {
        return Err(CliError::Numeric(tvoir_core::Error::InvalidParameter(
            format!("{failures} selftest check(s) failed"),
        )));
    }
    println!("selftest: all checks passed");
    Ok(())
}
