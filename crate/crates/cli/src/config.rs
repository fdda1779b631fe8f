//! `key=value` run configuration. Unknown keys are rejected; relative
//! paths resolve against the config file's directory; command-line flags
//! override file values.

use droughtcast_core::datagen::SynthConfig;
use droughtcast_core::grid::SplitSpec;
use droughtcast_core::model::ModelParams;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::CliError;

pub fn read_pairs(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
    let mut pairs = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::input(format!(
                "{}:{}: expected key=value, got `{line}`",
                path.display(),
                i + 1
            )));
        };
        pairs.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(pairs)
}

fn parse_key<T: std::str::FromStr>(
    pairs: &BTreeMap<String, String>,
    key: &str,
    into: &mut T,
) -> Result<(), CliError> {
    if let Some(raw) = pairs.get(key) {
        *into = raw
            .parse()
            .map_err(|_| CliError::input(format!("bad value `{raw}` for key `{key}`")))?;
    }
    Ok(())
}

/// Everything a training or sweep run needs.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: String,
    pub params: ModelParams,
    pub split: SplitSpec,
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub horizons: Option<Vec<usize>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: "convlstm".to_string(),
            params: ModelParams::default(),
            split: SplitSpec::default(),
            data: None,
            out: None,
            out_dir: None,
            horizons: None,
        }
    }
}

const RUN_KEYS: [&str; 21] = [
    "model",
    "l",
    "k",
    "epochs",
    "lr",
    "seed",
    "batch_size",
    "patience",
    "seasonal",
    "n_trees",
    "shrinkage",
    "max_depth",
    "min_samples_leaf",
    "lags",
    "train_frac",
    "val_frac",
    "test_frac",
    "data",
    "out",
    "out_dir",
    "ks",
];

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let pairs = read_pairs(path)?;
        if let Some(unknown) = pairs.keys().find(|k| !RUN_KEYS.contains(&k.as_str())) {
            return Err(CliError::input(format!(
                "unknown config key `{unknown}` (known: {})",
                RUN_KEYS.join(", ")
            )));
        }
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let mut cfg = RunConfig::default();
        if let Some(model) = pairs.get("model") {
            cfg.model = model.clone();
        }
        let p = &mut cfg.params;
        parse_key(&pairs, "l", &mut p.seq_len)?;
        parse_key(&pairs, "k", &mut p.horizon)?;
        parse_key(&pairs, "epochs", &mut p.epochs)?;
        parse_key(&pairs, "lr", &mut p.learning_rate)?;
        parse_key(&pairs, "seed", &mut p.seed)?;
        parse_key(&pairs, "batch_size", &mut p.batch_size)?;
        parse_key(&pairs, "patience", &mut p.patience)?;
        parse_key(&pairs, "seasonal", &mut p.seasonal_inputs)?;
        parse_key(&pairs, "n_trees", &mut p.n_trees)?;
        parse_key(&pairs, "shrinkage", &mut p.shrinkage)?;
        parse_key(&pairs, "max_depth", &mut p.max_depth)?;
        parse_key(&pairs, "min_samples_leaf", &mut p.min_samples_leaf)?;
        parse_key(&pairs, "lags", &mut p.lags)?;

        let mut fracs = (
            cfg.split.train_frac,
            cfg.split.val_frac,
            cfg.split.test_frac,
        );
        parse_key(&pairs, "train_frac", &mut fracs.0)?;
        parse_key(&pairs, "val_frac", &mut fracs.1)?;
        parse_key(&pairs, "test_frac", &mut fracs.2)?;
        cfg.split = SplitSpec::new(fracs.0, fracs.1, fracs.2)
            .map_err(|e| CliError::input(e.to_string()))?;

        if let Some(data) = pairs.get("data") {
            cfg.data = Some(base.join(data));
        }
        if let Some(out) = pairs.get("out") {
            cfg.out = Some(base.join(out));
        }
        if let Some(out_dir) = pairs.get("out_dir") {
            cfg.out_dir = Some(base.join(out_dir));
        }
        if let Some(ks) = pairs.get("ks") {
            cfg.horizons = Some(parse_horizons(ks)?);
        }
        Ok(cfg)
    }
}

/// `1..6` (inclusive range) or `1,2,6`; must be strictly increasing.
pub fn parse_horizons(raw: &str) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::input(format!("bad horizons `{raw}`; use `1..6` or `1,2,6`"));
    let ks: Vec<usize> = if let Some((lo, hi)) = raw.split_once("..") {
        let lo: usize = lo.trim().parse().map_err(|_| bad())?;
        let hi: usize = hi.trim().parse().map_err(|_| bad())?;
        if lo == 0 || hi < lo {
            return Err(bad());
        }
        (lo..=hi).collect()
    } else {
        raw.split(',')
            .map(|t| t.trim().parse::<usize>().map_err(|_| bad()))
            .collect::<Result<_, _>>()?
    };
    if ks.is_empty() || ks.contains(&0) {
        return Err(bad());
    }
    for pair in ks.windows(2) {
        if pair[1] <= pair[0] {
            return Err(CliError::input(format!(
                "horizons must be strictly increasing, got `{raw}`"
            )));
        }
    }
    Ok(ks)
}

const SYNTH_KEYS: [&str; 11] = [
    "h",
    "w",
    "t",
    "seed",
    "temp_base",
    "temp_amp",
    "precip_base",
    "precip_amp",
    "rho",
    "phi",
    "noise_std",
];

/// Synthetic-data configuration; `h`, `w`, `t`, and `seed` are required.
pub fn load_synth_config(path: &Path) -> Result<SynthConfig, CliError> {
    let pairs = read_pairs(path)?;
    if let Some(unknown) = pairs.keys().find(|k| !SYNTH_KEYS.contains(&k.as_str())) {
        return Err(CliError::input(format!(
            "unknown config key `{unknown}` (known: {})",
            SYNTH_KEYS.join(", ")
        )));
    }
    for required in ["h", "w", "t", "seed"] {
        if !pairs.contains_key(required) {
            return Err(CliError::input(format!(
                "missing required config key `{required}`"
            )));
        }
    }
    let mut cfg = SynthConfig::default();
    parse_key(&pairs, "h", &mut cfg.height)?;
    parse_key(&pairs, "w", &mut cfg.width)?;
    parse_key(&pairs, "t", &mut cfg.months)?;
    parse_key(&pairs, "seed", &mut cfg.seed)?;
    parse_key(&pairs, "temp_base", &mut cfg.temp_base_c)?;
    parse_key(&pairs, "temp_amp", &mut cfg.temp_amplitude_c)?;
    parse_key(&pairs, "precip_base", &mut cfg.precip_base_mm)?;
    parse_key(&pairs, "precip_amp", &mut cfg.precip_amplitude_mm)?;
    parse_key(&pairs, "rho", &mut cfg.correlation_radius)?;
    parse_key(&pairs, "phi", &mut cfg.ar_coefficient)?;
    parse_key(&pairs, "noise_std", &mut cfg.noise_std)?;
    cfg.validate().map_err(|e| CliError::input(e.to_string()))?;
    Ok(cfg)
}
