//! `droughtcast` — drought-index computation and grid forecasting runs.
//!
//! Exit codes: 0 success, 2 input/config error, 3 numerical or training
//! failure.

mod config;

use clap::{Parser, Subcommand};
use droughtcast_core::datagen::{synth_climate, SYNTH_LATITUDE};
use droughtcast_core::eval::{horizon_sweep, EvalError, EvalReport};
use droughtcast_core::grid::{
    load_grid_series, load_value_csv, save_grid_series, save_value_csv, GridSeries, SplitSpec,
    temporal_split,
};
use droughtcast_core::indices::{htc, pdsi_grid, DailyClimate, DEFAULT_AWC_MM};
use droughtcast_core::model::{
    evaluate_on_test, FitLog, ForecastModel, ModelError, ModelRegistry,
};
use droughtcast_core::numfmt::fmt_f64;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Debug)]
pub struct CliError {
    message: String,
    code: u8,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            code: 2,
        }
    }

    fn numerical(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            code: 3,
        }
    }

    fn from_model(err: ModelError) -> Self {
        if err.is_numerical() {
            CliError::numerical(err.to_string())
        } else {
            CliError::input(err.to_string())
        }
    }

    pub fn message(&self) -> &str {
        &self.message
    }
}

#[derive(Parser)]
#[command(
    name = "droughtcast",
    about = "Drought-index computation and spatio-temporal forecasting on gridded monthly data",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a drought index from climate inputs.
    Index {
        #[command(subcommand)]
        index: IndexCommand,
    },
    /// Generate a synthetic climate + drought-index dataset.
    Synth {
        /// key=value config with h, w, t, seed (and optional field knobs)
        #[arg(long)]
        config: PathBuf,
        /// Directory for precip.gsv, temps.gsv, pdsi.gsv, manifest.txt
        #[arg(long = "out-dir")]
        out_dir: PathBuf,
    },
    /// Train a forecasting model on chronological splits.
    Train {
        /// key=value run config (model, l, k, epochs, ...)
        #[arg(long)]
        config: PathBuf,
        /// GSV1 input series (overrides the config's `data`)
        #[arg(long)]
        data: Option<PathBuf>,
        /// Checkpoint path (overrides the config's `out`)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a trained model (or the persistence floor) on the test split.
    Evaluate {
        /// Checkpoint path, or the literal `persistence`
        #[arg(long)]
        model: String,
        /// GSV1 input series
        #[arg(long)]
        data: PathBuf,
        /// Directory for r2_map.csv/.pgm, horizon.csv, summary.txt
        #[arg(long = "out-dir")]
        out_dir: PathBuf,
        /// Optional run config (split fractions; k for persistence)
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train and score one model per forecast horizon.
    HorizonSweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Horizons, `1..6` or `1,2,6` (overrides the config's `ks`)
        #[arg(long)]
        ks: Option<String>,
        #[arg(long = "out-dir")]
        out_dir: PathBuf,
    },
}

#[derive(Subcommand)]
enum IndexCommand {
    /// Palmer drought severity index over a grid.
    Pdsi {
        /// GSV1 monthly precipitation (mm)
        #[arg(long)]
        precip: PathBuf,
        /// GSV1 monthly mean temperature (degrees C)
        #[arg(long)]
        temps: PathBuf,
        /// Soil water capacity in mm for every cell
        #[arg(long, default_value_t = DEFAULT_AWC_MM)]
        awc: f64,
        /// Latitude in degrees for every grid row
        #[arg(long, default_value_t = SYNTH_LATITUDE)]
        lat: f64,
        /// Output GSV1 path
        #[arg(long)]
        out: PathBuf,
    },
    /// Selyaninov hydrothermal coefficient from daily series.
    Htc {
        /// Single-column CSV of daily precipitation (mm), `value` header
        #[arg(long)]
        precip: PathBuf,
        /// Single-column CSV of daily mean temperature (degrees C)
        #[arg(long)]
        temps: PathBuf,
        /// Output CSV path (single `value` row)
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Index { index } => match index {
            IndexCommand::Pdsi {
                precip,
                temps,
                awc,
                lat,
                out,
            } => cmd_index_pdsi(&precip, &temps, awc, lat, &out),
            IndexCommand::Htc { precip, temps, out } => cmd_index_htc(&precip, &temps, &out),
        },
        Command::Synth { config, out_dir } => cmd_synth(&config, &out_dir),
        Command::Train { config, data, out } => cmd_train(&config, data, out),
        Command::Evaluate {
            model,
            data,
            out_dir,
            config,
        } => cmd_evaluate(&model, &data, &out_dir, config.as_deref()),
        Command::HorizonSweep {
            config,
            data,
            ks,
            out_dir,
        } => cmd_horizon_sweep(&config, data, ks.as_deref(), &out_dir),
    }
}

fn load_series(path: &Path) -> Result<GridSeries, CliError> {
    load_grid_series(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn cmd_index_pdsi(
    precip_path: &Path,
    temps_path: &Path,
    awc: f64,
    lat: f64,
    out: &Path,
) -> Result<(), CliError> {
    let precip = load_series(precip_path)?;
    let temps = load_series(temps_path)?;
    let lat_per_row = vec![lat; precip.height()];
    let awc_per_cell = vec![awc; precip.height() * precip.width()];
    let index = pdsi_grid(&precip, &temps, &lat_per_row, &awc_per_cell)
        .map_err(|e| CliError::input(e.to_string()))?;
    save_grid_series(&index, out).map_err(|e| CliError::input(e.to_string()))
}

fn cmd_index_htc(precip_path: &Path, temps_path: &Path, out: &Path) -> Result<(), CliError> {
    let precip = load_value_csv(precip_path)
        .map_err(|e| CliError::input(format!("{}: {e}", precip_path.display())))?;
    let temps = load_value_csv(temps_path)
        .map_err(|e| CliError::input(format!("{}: {e}", temps_path.display())))?;
    let climate = DailyClimate::new(temps, precip).map_err(|e| CliError::input(e.to_string()))?;
    let value = htc(&climate).map_err(|e| CliError::input(e.to_string()))?;
    save_value_csv(&[value], out).map_err(|e| CliError::input(e.to_string()))
}

fn cmd_synth(config_path: &Path, out_dir: &Path) -> Result<(), CliError> {
    let cfg = config::load_synth_config(config_path)?;
    let (precip, temps) = synth_climate(&cfg).map_err(|e| CliError::input(e.to_string()))?;
    let lat = vec![SYNTH_LATITUDE; cfg.height];
    let awc = vec![DEFAULT_AWC_MM; cfg.height * cfg.width];
    let pdsi = pdsi_grid(&precip, &temps, &lat, &awc)
        .map_err(|e| CliError::numerical(e.to_string()))?;

    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::input(format!("{}: {e}", out_dir.display())))?;
    let write = |gs: &GridSeries, name: &str| -> Result<(), CliError> {
        save_grid_series(gs, &out_dir.join(name)).map_err(|e| CliError::input(e.to_string()))
    };
    write(&precip, "precip.gsv")?;
    write(&temps, "temps.gsv")?;
    write(&pdsi, "pdsi.gsv")?;

    let manifest = format!(
        "seed={}\nh={}\nw={}\nt={}\ntemp_base={}\ntemp_amp={}\nprecip_base={}\nprecip_amp={}\nrho={}\nphi={}\nnoise_std={}\nfiles=precip.gsv,temps.gsv,pdsi.gsv\n",
        cfg.seed,
        cfg.height,
        cfg.width,
        cfg.months,
        fmt_f64(cfg.temp_base_c),
        fmt_f64(cfg.temp_amplitude_c),
        fmt_f64(cfg.precip_base_mm),
        fmt_f64(cfg.precip_amplitude_mm),
        cfg.correlation_radius,
        fmt_f64(cfg.ar_coefficient),
        fmt_f64(cfg.noise_std),
    );
    std::fs::write(out_dir.join("manifest.txt"), manifest)
        .map_err(|e| CliError::input(format!("{}: {e}", out_dir.display())))
}

fn split_meta(split: &SplitSpec) -> Vec<(String, String)> {
    vec![
        ("train_frac".to_string(), fmt_f64(split.train_frac)),
        ("val_frac".to_string(), fmt_f64(split.val_frac)),
        ("test_frac".to_string(), fmt_f64(split.test_frac)),
    ]
}

fn write_fit_log(log: &FitLog, path: &Path) -> Result<(), CliError> {
    let mut out = String::new();
    out.push_str(&log.columns.join(","));
    out.push('\n');
    for row in &log.rows {
        let cells: Vec<String> = log
            .columns
            .iter()
            .zip(row)
            .map(|(col, v)| {
                if *col == "epoch" || *col == "tree_index" {
                    format!("{}", *v as usize)
                } else {
                    fmt_f64(*v)
                }
            })
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn cmd_train(
    config_path: &Path,
    data_flag: Option<PathBuf>,
    out_flag: Option<PathBuf>,
) -> Result<(), CliError> {
    let cfg = config::RunConfig::load(config_path)?;
    let data_path = data_flag
        .or(cfg.data.clone())
        .ok_or_else(|| CliError::input("no data path: pass --data or set `data` in the config"))?;
    let out_path = out_flag
        .or(cfg.out.clone())
        .ok_or_else(|| CliError::input("no output path: pass --out or set `out` in the config"))?;

    let series = load_series(&data_path)?;
    let (train, val, _test) =
        temporal_split(&series, &cfg.split).map_err(|e| CliError::input(e.to_string()))?;

    let registry = ModelRegistry::with_builtins();
    let mut model = registry
        .build(&cfg.model, &cfg.params)
        .map_err(CliError::from_model)?;
    let log = model.fit(&train, &val).map_err(CliError::from_model)?;

    model
        .save(&out_path, &split_meta(&cfg.split))
        .map_err(CliError::from_model)?;
    let log_path = log_path_for(&out_path);
    write_fit_log(&log, &log_path)?;
    println!(
        "trained {} (k={}) on {}; checkpoint {}, log {}",
        cfg.model,
        cfg.params.horizon,
        data_path.display(),
        out_path.display(),
        log_path.display()
    );
    Ok(())
}

fn log_path_for(checkpoint: &Path) -> PathBuf {
    let mut name = checkpoint.file_name().unwrap_or_default().to_os_string();
    name.push(".log.csv");
    checkpoint.with_file_name(name)
}

fn cmd_evaluate(
    model_arg: &str,
    data_path: &Path,
    out_dir: &Path,
    config_path: Option<&Path>,
) -> Result<(), CliError> {
    let cfg = match config_path {
        Some(path) => config::RunConfig::load(path)?,
        None => config::RunConfig::default(),
    };
    let series = load_series(data_path)?;
    let registry = ModelRegistry::with_builtins();

    let (model, split): (Box<dyn ForecastModel>, SplitSpec) = if model_arg == "persistence" {
        let model = registry
            .build("persistence", &cfg.params)
            .map_err(CliError::from_model)?;
        (model, cfg.split)
    } else {
        let path = Path::new(model_arg);
        let model = registry
            .load_checkpoint(path)
            .map_err(CliError::from_model)?;
        let split = sidecar_split(path).unwrap_or(cfg.split);
        (model, split)
    };

    let (map, stats) =
        evaluate_on_test(model.as_ref(), &series, &split).map_err(CliError::from_model)?;
    let metadata = vec![
        ("model".to_string(), model.kind().to_string()),
        ("k".to_string(), model.horizon().to_string()),
        ("split".to_string(), "test".to_string()),
        ("data".to_string(), data_path.display().to_string()),
    ];
    let report = EvalReport::new(map, vec![], metadata).map_err(|e| CliError::input(e.to_string()))?;
    droughtcast_core::eval::write_report(&report, out_dir)
        .map_err(|e| CliError::input(e.to_string()))?;
    println!(
        "evaluated {} (k={}) on {}: mean R2 {:.4} over {} cells -> {}",
        model.kind(),
        model.horizon(),
        data_path.display(),
        stats.mean,
        stats.n_valid,
        out_dir.display()
    );
    Ok(())
}

/// Split fractions recorded in a checkpoint sidecar at train time.
fn sidecar_split(checkpoint: &Path) -> Option<SplitSpec> {
    let text = std::fs::read_to_string(format!("{}.meta", checkpoint.display())).ok()?;
    let mut fracs = [None::<f64>; 3];
    for line in text.lines() {
        let (key, value) = line.split_once('=')?;
        let slot = match key.trim() {
            "train_frac" => 0,
            "val_frac" => 1,
            "test_frac" => 2,
            _ => continue,
        };
        fracs[slot] = value.trim().parse().ok();
    }
    SplitSpec::new(fracs[0]?, fracs[1]?, fracs[2]?).ok()
}

fn cmd_horizon_sweep(
    config_path: &Path,
    data_flag: Option<PathBuf>,
    ks_flag: Option<&str>,
    out_dir: &Path,
) -> Result<(), CliError> {
    let cfg = config::RunConfig::load(config_path)?;
    let data_path = data_flag
        .or(cfg.data.clone())
        .ok_or_else(|| CliError::input("no data path: pass --data or set `data` in the config"))?;
    let horizons = match ks_flag {
        Some(raw) => config::parse_horizons(raw)?,
        None => cfg
            .horizons
            .clone()
            .ok_or_else(|| CliError::input("no horizons: pass --ks or set `ks` in the config"))?,
    };
    let series = load_series(&data_path)?;
    let registry = ModelRegistry::with_builtins();

    let curve = horizon_sweep(&horizons, |k| -> Result<f64, ModelError> {
        let params = cfg.params.for_horizon(k);
        let (train, val, _test) = temporal_split(&series, &cfg.split)?;
        let mut model = registry.build(&cfg.model, &params)?;
        model.fit(&train, &val)?;
        let (_, stats) = evaluate_on_test(model.as_ref(), &series, &cfg.split)?;
        Ok(stats.mean)
    })
    .map_err(|e| match e {
        EvalError::SweepFailed { .. } => CliError::numerical(e.to_string()),
        other => CliError::input(other.to_string()),
    })?;

    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::input(format!("{}: {e}", out_dir.display())))?;
    let mut out = String::from("k,mean_r2\n");
    for &(k, score) in &curve {
        out.push_str(&format!("{k},{}\n", fmt_f64(score)));
    }
    let path = out_dir.join("horizon.csv");
    std::fs::write(&path, out).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    for &(k, score) in &curve {
        println!("k={k}: mean R2 {score:.4}");
    }
    Ok(())
}
