use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use fuma::combiner::Mode;
use fuma::features::registry_table;
use fuma::generator::{generate_reference_set, Counts, GeneratorConfig, LengthSampler, MarParams};
use fuma::methods::{forecast_or_naive, method_registry, MethodId};
use fuma::pipeline::io::{format_level, parse_levels, read_forecasts, read_series, write_forecasts, write_series};
use fuma::pipeline::{
    evaluate, forecast_all, simple_average, Candidate, Provenance, SeriesRecord, TrainConfig, TrainedEnsemble,
};
use fuma::{IntervalForecast, TimeSeries};

#[derive(Parser)]
#[command(name = "fuma", version, about = "Feature-based combination of prediction intervals")]
struct Cli {
    /// Worker threads; output does not depend on this.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed for series generation.
    #[arg(long, global = true, default_value_t = 2024)]
    seed: u64,
    /// Confidence levels, as percents or fractions.
    #[arg(long, global = true, default_value = "80,95")]
    levels: String,
    /// Combination mode: mean, weighted or all-weighted.
    #[arg(long, global = true, default_value = "weighted")]
    mode: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a reference set of mixture-autoregressive series.
    Generate(GenerateArgs),
    /// Fit the ensemble on a reference set.
    Train(TrainArgs),
    /// Combined interval forecasts for new series.
    Forecast(ForecastArgs),
    /// Every pool method and the simple average, for benchmarking.
    Benchmark(BenchmarkArgs),
    /// Score forecasts against held-out values.
    Evaluate(EvaluateArgs),
    /// Partial effects of every smooth feature on a grid.
    Effects(EffectsArgs),
    /// The threshold search path.
    ThresholdPath(PathArgs),
    /// The feature and method registries.
    Registry(RegistryArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Series per frequency: yearly,quarterly,monthly.
    #[arg(long, default_value = "500,500,500")]
    counts: String,
    /// Empirical `frequency,length` table to draw training lengths from.
    #[arg(long)]
    lengths: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    series: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Training diagnostics as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Spacing of the threshold grid on [0, 1].
    #[arg(long, default_value_t = 0.05)]
    grid_step: f64,
    /// Fewest scored series needed to fit one additive model.
    #[arg(long, default_value_t = 200)]
    min_rows: usize,
}

#[derive(Args)]
struct ForecastArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    series: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Drop the last horizon of each series and forecast it.
    #[arg(long)]
    holdout: bool,
    /// Forecast horizon; defaults to the frequency's.
    #[arg(long)]
    horizon: Option<usize>,
    /// Weights and selected methods per series, as JSON.
    #[arg(long)]
    provenance: Option<PathBuf>,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[arg(long)]
    series: PathBuf,
    /// Directory receiving one forecast CSV per method plus `simple-average.csv`.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    holdout: bool,
    #[arg(long)]
    horizon: Option<usize>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Series including the held-out values.
    #[arg(long)]
    series: PathBuf,
    /// Candidate forecasts as `name=path`; repeatable.
    #[arg(long = "forecasts", required = true)]
    forecasts: Vec<String>,
    #[arg(long)]
    provenance: Option<PathBuf>,
    /// Report as JSON.
    #[arg(long)]
    out: PathBuf,
    /// Directory for the flat CSV tables.
    #[arg(long)]
    tables: Option<PathBuf>,
    #[arg(long)]
    horizon: Option<usize>,
}

#[derive(Args)]
struct EffectsArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Grid points between the boundary knots.
    #[arg(long, default_value_t = 50)]
    points: usize,
}

#[derive(Args)]
struct PathArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RegistryArgs {
    #[arg(long)]
    out: Option<PathBuf>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

fn load_series(path: &Path, horizon: Option<usize>) -> Result<Vec<TimeSeries>> {
    read_series(open(path)?, horizon).with_context(|| format!("reading {}", path.display()))
}

fn load_model(path: &Path) -> Result<TrainedEnsemble> {
    TrainedEnsemble::load(open(path)?).with_context(|| format!("loading {}", path.display()))
}

/// Training parts of each series when forecasting a holdout.
fn forecast_inputs(series: Vec<TimeSeries>, holdout: bool) -> Result<Vec<TimeSeries>> {
    if !holdout {
        return Ok(series);
    }
    Ok(series
        .iter()
        .map(|s| s.split().map(|p| p.train))
        .collect::<fuma::Result<Vec<_>>>()?)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn parse_counts(text: &str) -> Result<Counts> {
    let parts: Vec<usize> = text
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| fuma::Error::Config(format!("bad counts {text:?}")))?;
    let [yearly, quarterly, monthly] = parts[..] else {
        return Err(fuma::Error::Config("counts need three values: yearly,quarterly,monthly".into()).into());
    };
    Ok(Counts {
        yearly,
        quarterly,
        monthly,
    })
}

fn generate(cli: &Cli, args: &GenerateArgs) -> Result<()> {
    let lengths = match &args.lengths {
        Some(p) => LengthSampler::from_csv(open(p)?)?,
        None => LengthSampler::default(),
    };
    let config = GeneratorConfig {
        seed: cli.seed,
        counts: parse_counts(&args.counts)?,
        params: MarParams::default(),
        lengths,
    };
    let series = generate_reference_set(&config)?;
    let mut w = create(&args.out)?;
    write_series(&mut w, &series)?;
    w.flush()?;
    log::info!("wrote {} series to {}", series.len(), args.out.display());
    Ok(())
}

fn train(cli: &Cli, args: &TrainArgs) -> Result<()> {
    if !(args.grid_step > 0.0 && args.grid_step <= 1.0) {
        bail!(fuma::Error::Config("grid step must lie in (0, 1]".into()));
    }
    let levels = parse_levels(&cli.levels)?;
    let series = load_series(&args.series, None)?;
    let steps = (1.0 / args.grid_step).round() as usize;
    let mut config = TrainConfig {
        levels,
        grid: (0..=steps).map(|i| (i as f64 / steps as f64).min(1.0)).collect(),
        seed: Some(cli.seed),
        ..TrainConfig::default()
    };
    config.gam.min_rows = args.min_rows;
    let (ensemble, report) = fuma::pipeline::train(&series, &config)?;
    let mut w = create(&args.out)?;
    ensemble.save(&mut w)?;
    w.flush()?;
    if let Some(path) = &args.report {
        write_json(path, &report)?;
    }
    log::info!(
        "trained {} models on {} series ({} excluded)",
        ensemble.models.len(),
        report.records,
        report.exclusions.len()
    );
    Ok(())
}

fn forecast(cli: &Cli, args: &ForecastArgs) -> Result<()> {
    let mode: Mode = cli.mode.parse()?;
    let ensemble = load_model(&args.model)?;
    let series = forecast_inputs(load_series(&args.series, args.horizon)?, args.holdout)?;
    let results = forecast_all(&ensemble, &series, mode)?;
    let mut w = create(&args.out)?;
    write_forecasts(
        &mut w,
        results.iter().map(|r| (r.series_id.as_str(), r.forecasts.as_slice())),
    )?;
    w.flush()?;
    if let Some(path) = &args.provenance {
        let prov: Vec<&Provenance> = results.iter().flat_map(|r| &r.provenance).collect();
        write_json(path, &prov)?;
    }
    Ok(())
}

fn benchmark(cli: &Cli, args: &BenchmarkArgs) -> Result<()> {
    let levels = parse_levels(&cli.levels)?;
    let series = forecast_inputs(load_series(&args.series, args.horizon)?, args.holdout)?;
    use rayon::prelude::*;
    let runs: Vec<Vec<(MethodId, Vec<IntervalForecast>)>> = series
        .par_iter()
        .map(|s| {
            MethodId::active_pool(s.period())
                .into_iter()
                .map(|m| Ok((m, forecast_or_naive(m, s, s.horizon(), &levels)?.0)))
                .collect::<fuma::Result<Vec<_>>>()
        })
        .collect::<fuma::Result<_>>()?;
    for method in MethodId::POOL {
        let rows: Vec<(&str, &[IntervalForecast])> = series
            .iter()
            .zip(&runs)
            .filter_map(|(s, r)| r.iter().find(|(m, _)| *m == method).map(|(_, f)| (s.id(), f.as_slice())))
            .collect();
        if rows.is_empty() {
            continue;
        }
        let mut w = create(&args.out_dir.join(format!("{method}.csv")))?;
        write_forecasts(&mut w, rows)?;
        w.flush()?;
    }
    let averages = series
        .iter()
        .zip(&runs)
        .map(|(s, r)| {
            let record = SeriesRecord {
                id: s.id().to_string(),
                frequency: s.frequency(),
                train: Vec::new(),
                test: Vec::new(),
                features: fuma::features::FeatureVector::from_values(vec![0.0; fuma::features::REGISTRY.len()])?,
                methods: r.iter().map(|(m, _)| *m).collect(),
                forecasts: r.iter().map(|(_, f)| f.clone()).collect(),
                scores: Vec::new(),
                fallbacks: Vec::new(),
            };
            simple_average(&record)
        })
        .collect::<fuma::Result<Vec<_>>>()?;
    let mut w = create(&args.out_dir.join("simple-average.csv"))?;
    write_forecasts(&mut w, series.iter().zip(&averages).map(|(s, a)| (s.id(), a.as_slice())))?;
    w.flush()?;
    Ok(())
}

fn evaluate_cmd(args: &EvaluateArgs) -> Result<()> {
    let series = load_series(&args.series, args.horizon)?;
    let mut tables = Vec::new();
    for spec in &args.forecasts {
        let Some((name, path)) = spec.split_once('=') else {
            bail!(fuma::Error::Config(format!("expected name=path, got {spec:?}")));
        };
        let path = Path::new(path);
        let table = read_forecasts(open(path)?).with_context(|| format!("reading {}", path.display()))?;
        tables.push((name.to_string(), table));
    }
    let candidates: Vec<Candidate<'_>> = tables
        .iter()
        .map(|(name, t)| Candidate {
            name: name.clone(),
            forecasts: t,
        })
        .collect();
    let provenance: Vec<Provenance> = match &args.provenance {
        Some(p) => serde_json::from_reader(open(p)?).with_context(|| format!("reading {}", p.display()))?,
        None => Vec::new(),
    };
    let report = evaluate(&candidates, &series, &provenance)?;
    write_json(&args.out, &report)?;
    if let Some(dir) = &args.tables {
        for (name, text) in [
            ("accuracy.csv", report.rows_csv()?),
            ("selection.csv", report.selection_csv()?),
            ("mcb.csv", report.mcb_csv()?),
        ] {
            let mut w = create(&dir.join(name))?;
            w.write_all(text.as_bytes())?;
            w.flush()?;
        }
    }
    Ok(())
}

fn effects(args: &EffectsArgs) -> Result<()> {
    if args.points == 0 {
        bail!(fuma::Error::Config("need at least one grid point".into()));
    }
    let ensemble = load_model(&args.model)?;
    let mut w = csv::Writer::from_writer(create(&args.out)?);
    w.write_record(["method", "level", "feature", "value", "effect"])?;
    for m in &ensemble.models {
        for s in &m.model.smooths {
            let (lo, hi) = (s.knots[0], s.knots[s.knots.len() - 1]);
            let grid: Vec<f64> = if args.points == 1 {
                vec![0.5 * (lo + hi)]
            } else {
                (0..args.points)
                    .map(|i| lo + (hi - lo) * i as f64 / (args.points - 1) as f64)
                    .collect()
            };
            for (x, e) in m.model.partial_effect(&s.feature, &grid)? {
                w.write_record([
                    m.method.to_string(),
                    format_level(m.level),
                    s.feature.clone(),
                    x.to_string(),
                    e.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn threshold_path(args: &PathArgs) -> Result<()> {
    let ensemble = load_model(&args.model)?;
    let mut w = create(&args.out)?;
    w.write_all(b"level,frequency,mode,tr,mean_msis\n")?;
    for t in &ensemble.thresholds {
        for line in t.path_csv().lines().skip(1) {
            writeln!(w, "{},{line}", format_level(t.level))?;
        }
    }
    w.flush()?;
    Ok(())
}

fn registry(args: &RegistryArgs) -> Result<()> {
    let text = format!("{}\n{}", registry_table(), method_registry());
    match &args.out {
        Some(p) => {
            let mut w = create(p)?;
            w.write_all(text.as_bytes())?;
            w.flush()?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Generate(a) => generate(cli, a),
        Command::Train(a) => train(cli, a),
        Command::Forecast(a) => forecast(cli, a),
        Command::Benchmark(a) => benchmark(cli, a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Effects(a) => effects(a),
        Command::ThresholdPath(a) => threshold_path(a),
        Command::Registry(a) => registry(a),
    }
}

/// 1 usage or configuration error, 2 data error, 3 systemic training failure.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<fuma::Error>() {
            return match e {
                fuma::Error::SystemicFailure { .. } => 3,
                e if e.is_data_error() => 2,
                _ => 1,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some()
            || cause.downcast_ref::<csv::Error>().is_some()
            || cause.downcast_ref::<serde_json::Error>().is_some()
        {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be positive");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
