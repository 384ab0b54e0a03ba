//! `molscat` command line: featurize, cross-validate, compare
//! representations, generate synthetic data, and predict with a saved model.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use molscat::cache::{read_cache, write_cache, CachePayload};
use molscat::config::{Representation, RunConfig};
use molscat::data::{load_manifest, parse_xyz, planarize, to_xyz, Dataset};
use molscat::error::PipelineError;
use molscat::ols::{self, RegressionModel};
use molscat::pipeline;

#[derive(Parser)]
#[command(name = "molscat", version, about = "Planar-molecule energy regression pipeline")]
struct Cli {
    /// Run configuration file (flat key = value lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding the config's out_dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for featurization (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Fail on non-planar molecules instead of skipping them.
    #[arg(long, global = true)]
    strict_planar: bool,
    /// Print the fully resolved configuration and exit.
    #[arg(long, global = true)]
    dump_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Rasterize densities and write the feature cache.
    Featurize,
    /// Cross-validate the configured representation and emit reports.
    Cv,
    /// Merge completed runs into one comparison table.
    Compare {
        /// Config files of completed runs (at least two).
        configs: Vec<PathBuf>,
    },
    /// Generate a synthetic planar dataset with XYZ files and a manifest.
    Synth {
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory to write molecules and manifest.txt into.
        #[arg(long = "dir")]
        dir: PathBuf,
    },
    /// Evaluate a saved model on XYZ files.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// XYZ files to evaluate.
        inputs: Vec<PathBuf>,
    },
}

/// Errors carrying the process exit code: 2 config, 3 data.
enum AppError {
    Config(String),
    Data(String),
}

impl From<PipelineError> for AppError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Config { .. } | PipelineError::ConfigValue(_) => {
                AppError::Config(e.to_string())
            }
            other => AppError::Data(other.to_string()),
        }
    }
}

impl From<molscat::error::DataError> for AppError {
    fn from(e: molscat::error::DataError) -> Self {
        AppError::Data(e.to_string())
    }
}

impl From<molscat::error::RegressionError> for AppError {
    fn from(e: molscat::error::RegressionError) -> Self {
        AppError::Data(e.to_string())
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Data(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(AppError::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: Cli) -> Result<(), AppError> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| AppError::Config(format!("--jobs: {e}")))?;
    }
    if cli.dump_config {
        println!("{}", load_config(&cli)?.dump());
        return Ok(());
    }
    match &cli.command {
        None => Err(AppError::Config(
            "no subcommand; try featurize, cv, compare, synth or predict".into(),
        )),
        Some(Command::Featurize) => cmd_featurize(&cli),
        Some(Command::Cv) => cmd_cv(&cli),
        Some(Command::Compare { configs }) => cmd_compare(configs),
        Some(Command::Synth { count, seed, dir }) => cmd_synth(*count, *seed, dir),
        Some(Command::Predict { model, inputs }) => cmd_predict(&cli, model, inputs),
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, AppError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::defaults(Representation::Scattering),
    };
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn load_dataset(cfg: &RunConfig) -> Result<Dataset, AppError> {
    let manifest = cfg
        .manifest
        .as_ref()
        .ok_or_else(|| AppError::Config("config has no manifest path".into()))?;
    Ok(load_manifest(manifest)?)
}

fn cache_path(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.join(format!("features-{}.cache", cfg.representation))
}

fn cmd_featurize(cli: &Cli) -> Result<(), AppError> {
    let cfg = load_config(cli)?;
    let dataset = load_dataset(&cfg)?;
    for (i, m) in dataset.molecules.iter().enumerate() {
        match planarize(m, cfg.planar_tol) {
            Ok(p) => eprintln!("molecule {i}: {} atoms, deviation {:.3e} A", m.len(), p.deviation()),
            Err(e) => eprintln!("molecule {i}: {e}"),
        }
    }
    let f = pipeline::featurize_dataset(&dataset, &cfg, cli.strict_planar)?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let path = cache_path(&cfg);
    write_cache(
        &path,
        &CachePayload {
            fingerprint: cfg.fingerprint(),
            schema: f.matrix.schema.clone(),
            features: f.matrix.rows.clone(),
            labels: f.labels.clone(),
        },
    )?;
    println!(
        "featurized {} molecules ({} skipped as non-planar), {} features -> {}",
        f.matrix.rows.nrows(),
        f.skipped,
        f.matrix.rows.ncols(),
        path.display()
    );
    Ok(())
}

fn cmd_cv(cli: &Cli) -> Result<(), AppError> {
    let cfg = load_config(cli)?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let report = if cfg.representation == Representation::Coulomb {
        let dataset = load_dataset(&cfg)?;
        pipeline::cv_krr(&dataset, &cfg)?
    } else {
        let path = cache_path(&cfg);
        let (matrix, labels) = if path.exists() {
            let payload = read_cache(&path, &cfg.fingerprint())?;
            let matrix = ols::FeatureMatrix::new(payload.features, payload.schema)?;
            (matrix, payload.labels)
        } else {
            let dataset = load_dataset(&cfg)?;
            let f = pipeline::featurize_dataset(&dataset, &cfg, cli.strict_planar)?;
            write_cache(
                &path,
                &CachePayload {
                    fingerprint: cfg.fingerprint(),
                    schema: f.matrix.schema.clone(),
                    features: f.matrix.rows.clone(),
                    labels: f.labels.clone(),
                },
            )?;
            (f.matrix, f.labels)
        };
        let report = pipeline::cv_ols(&matrix, &labels, &cfg)?;
        if let Some(m) = report.median_m() {
            let path = ols::ols_fit(&matrix, &labels, m)?;
            let eff = m.min(path.len());
            let mut model = RegressionModel::from_path(&path, &matrix.schema, eff);
            model.metadata.insert("representation".into(), cfg.representation.to_string());
            model.metadata.insert("fingerprint".into(), cfg.fingerprint());
            std::fs::write(cfg.out_dir.join("model.txt"), model.to_text())?;
        }
        report
    };
    std::fs::write(cfg.out_dir.join("report.csv"), report.report_csv())?;
    std::fs::write(cfg.out_dir.join("summary.csv"), report.summary_csv())?;
    std::fs::write(cfg.out_dir.join("decay.csv"), report.decay_csv())?;
    println!(
        "{}: {} folds, MAE {:.4}, RMSE {:.4} -> {}",
        cfg.representation,
        report.folds.len(),
        report.mae,
        report.rmse,
        cfg.out_dir.display()
    );
    Ok(())
}

fn cmd_compare(configs: &[PathBuf]) -> Result<(), AppError> {
    if configs.len() < 2 {
        return Err(AppError::Config("compare needs at least two config files".into()));
    }
    let mut rows = String::from("| representation | M | MAE | RMSE |\n|---|---|---|---|\n");
    for path in configs {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
        let cfg = RunConfig::parse(&text)?;
        let summary = cfg.out_dir.join("summary.csv");
        let body = std::fs::read_to_string(&summary).map_err(|_| {
            AppError::Data(format!("missing run: {} (run `molscat cv` first)", summary.display()))
        })?;
        let (m, mae, rmse) = parse_summary(&body)
            .ok_or_else(|| AppError::Data(format!("malformed {}", summary.display())))?;
        rows.push_str(&format!(
            "| {} | {} | {mae:.4} | {rmse:.4} |\n",
            cfg.representation,
            m.map(|m| m.to_string()).unwrap_or_else(|| "-".into()),
        ));
    }
    print!("{rows}");
    Ok(())
}

/// Extract (median chosen M, overall MAE, overall RMSE) from a summary.csv.
fn parse_summary(body: &str) -> Option<(Option<usize>, f64, f64)> {
    let mut ms: Vec<usize> = Vec::new();
    let mut overall = None;
    for line in body.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 6 {
            return None;
        }
        if cells[0].is_empty() {
            overall = Some((cells[4].parse::<f64>().ok()?, cells[5].parse::<f64>().ok()?));
        } else if let Ok(m) = cells[1].parse::<usize>() {
            ms.push(m);
        }
    }
    let (mae, rmse) = overall?;
    ms.sort_unstable();
    let median = if ms.is_empty() { None } else { Some(ms[ms.len() / 2]) };
    Some((median, mae, rmse))
}

fn cmd_synth(count: usize, seed: u64, dir: &Path) -> Result<(), AppError> {
    if count == 0 {
        return Err(AppError::Config("--count must be >= 1".into()));
    }
    let dataset = molscat::synth::make_synthetic_dataset(count, seed);
    std::fs::create_dir_all(dir)?;
    let mut manifest = String::new();
    for (i, m) in dataset.molecules.iter().enumerate() {
        let name = format!("mol-{i:04}.xyz");
        std::fs::write(dir.join(&name), to_xyz(m))?;
        manifest.push_str(&name);
        manifest.push('\n');
    }
    let manifest_path = dir.join("manifest.txt");
    std::fs::write(&manifest_path, manifest)?;
    println!("wrote {count} molecules and {}", manifest_path.display());
    Ok(())
}

fn cmd_predict(cli: &Cli, model_path: &Path, inputs: &[PathBuf]) -> Result<(), AppError> {
    if inputs.is_empty() {
        return Err(AppError::Config("predict needs at least one XYZ file".into()));
    }
    let cfg = load_config(cli)?;
    let model = RegressionModel::parse(&std::fs::read_to_string(model_path)?)?;
    if let Some(fp) = model.metadata.get("fingerprint") {
        if *fp != cfg.fingerprint() {
            return Err(AppError::Data(
                "model fingerprint does not match the configuration".into(),
            ));
        }
    }
    // Labels are not needed for prediction; featurization requires one.
    let molecules = inputs
        .iter()
        .map(|p| {
            let m = parse_xyz(&std::fs::read_to_string(p)?)?;
            Ok(if m.label().is_none() { m.with_label(Some(0.0)) } else { m })
        })
        .collect::<Result<Vec<_>, AppError>>()?;
    let dataset = Dataset {
        molecules,
        name: "predict".into(),
        provenance: model_path.to_path_buf(),
    };
    let f = pipeline::featurize_dataset(&dataset, &cfg, true)?;
    for (i, path) in inputs.iter().enumerate() {
        let row = f.matrix.rows.row(i);
        let y = model.predict(&f.matrix.schema, row.to_slice().expect("contiguous row"))?;
        println!("{}\t{y:.6}", path.display());
    }
    Ok(())
}
