//! Configuration resolution for the tower command: defaults, then the
//! optional `--config` file, then explicit flags. The resolved value is
//! validated before any computation and written next to the artifacts it
//! produced.

use std::fs;
use std::path::PathBuf;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use sci_core::dynamics::{load_affine_csv, DynamicalMap};

use crate::{CliError, PseudospectrumArgs};

pub const DEFAULT_HALF_WIDTH: f64 = 2.0;
pub const DEFAULT_TEST_RATIO: u32 = 2;
pub const DEFAULT_OUT: &str = "sci-out";
pub const FORMATS: [&str; 3] = ["csv", "json", "svg"];

/// The fully resolved run description; serialized as `config.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub map: String,
    pub eps: f64,
    pub schedule: Vec<[u32; 2]>,
    pub half_width: f64,
    pub test_ratio: u32,
    pub out: PathBuf,
    pub seed: u64,
    pub formats: Vec<String>,
}

/// Partial configuration as read from `--config`; a previously written
/// `config.json` parses unchanged.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    command: Option<String>,
    map: Option<String>,
    eps: Option<f64>,
    schedule: Option<ScheduleField>,
    half_width: Option<f64>,
    test_ratio: Option<u32>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    formats: Option<FormatsField>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ScheduleField {
    Text(String),
    Pairs(Vec<[u32; 2]>),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum FormatsField {
    Text(String),
    List(Vec<String>),
}

/// `"4:5,8:6"` -> `[[4,5],[8,6]]`.
fn parse_schedule(text: &str) -> Result<Vec<[u32; 2]>, CliError> {
    let mut pairs = Vec::new();
    for part in text.split(',') {
        let (n2, n1) = part
            .trim()
            .split_once(':')
            .ok_or_else(|| CliError::config(format!("schedule entry \"{part}\" is not n2:n1")))?;
        let parse = |s: &str, which: &str| {
            s.trim().parse::<u32>().map_err(|_| {
                CliError::config(format!("schedule entry \"{part}\": {which} is not a number"))
            })
        };
        pairs.push([parse(n2, "n2")?, parse(n1, "n1")?]);
    }
    Ok(pairs)
}

fn parse_formats(text: &str) -> Vec<String> {
    text.split(',').map(|s| s.trim().to_string()).collect()
}

fn validate(config: &RunConfig) -> Result<(), CliError> {
    if !(config.eps.is_finite() && config.eps > 0.0) {
        return Err(CliError::config(format!(
            "eps must be positive and finite, got {}",
            config.eps
        )));
    }
    if !(config.half_width.is_finite() && config.half_width > 0.0) {
        return Err(CliError::config(format!(
            "half_width must be positive and finite, got {}",
            config.half_width
        )));
    }
    if config.test_ratio == 0 {
        return Err(CliError::config("test_ratio must be at least 1"));
    }
    if config.schedule.is_empty() {
        return Err(CliError::config("schedule must list at least one n2:n1 pair"));
    }
    for pair in &config.schedule {
        if pair[0] == 0 || pair[1] == 0 {
            return Err(CliError::config(format!(
                "schedule pair {}:{} has a zero index",
                pair[0], pair[1]
            )));
        }
    }
    for w in config.schedule.windows(2) {
        if !(w[0][0] < w[1][0] && w[0][1] < w[1][1]) {
            return Err(CliError::config(format!(
                "schedule must increase strictly in both components: \
                 {}:{} is followed by {}:{}",
                w[0][0], w[0][1], w[1][0], w[1][1]
            )));
        }
    }
    if config.formats.is_empty() {
        return Err(CliError::config("format must name at least one of csv,json,svg"));
    }
    for f in &config.formats {
        if !FORMATS.contains(&f.as_str()) {
            return Err(CliError::config(format!(
                "format \"{f}\" is not one of csv,json,svg"
            )));
        }
    }
    Ok(())
}

/// Merge defaults, the optional config file, and explicit flags, then
/// validate. Nothing is computed and nothing is written on failure.
pub fn resolve(args: &PseudospectrumArgs) -> Result<RunConfig, CliError> {
    let file = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::config(format!("cannot read config {}: {e}", path.display()))
            })?;
            serde_json::from_str::<ConfigFile>(&text).map_err(|e| {
                CliError::config(format!("malformed config {}: {e}", path.display()))
            })?
        }
        None => ConfigFile::default(),
    };

    let map = args
        .map
        .clone()
        .or(file.map)
        .ok_or_else(|| CliError::config("missing required field: map"))?;
    let eps = args
        .eps
        .or(file.eps)
        .ok_or_else(|| CliError::config("missing required field: eps"))?;
    let schedule = match (&args.schedule, file.schedule) {
        (Some(text), _) => parse_schedule(text)?,
        (None, Some(ScheduleField::Text(text))) => parse_schedule(&text)?,
        (None, Some(ScheduleField::Pairs(pairs))) => pairs,
        (None, None) => return Err(CliError::config("missing required field: schedule")),
    };
    let formats = match (&args.format, file.formats) {
        (Some(text), _) => parse_formats(text),
        (None, Some(FormatsField::Text(text))) => parse_formats(&text),
        (None, Some(FormatsField::List(list))) => list,
        (None, None) => vec!["csv".into(), "json".into()],
    };

    let config = RunConfig {
        command: file.command.unwrap_or_else(|| "pseudospectrum".into()),
        map,
        eps,
        schedule,
        half_width: args.half_width.or(file.half_width).unwrap_or(DEFAULT_HALF_WIDTH),
        test_ratio: args.test_ratio.or(file.test_ratio).unwrap_or(DEFAULT_TEST_RATIO),
        out: args
            .out
            .clone()
            .or(file.out)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
        seed: args.seed.or(file.seed).unwrap_or(0),
        formats,
    };
    validate(&config)?;
    build_map(&config.map)?;
    Ok(config)
}

/// Turn a map descriptor into a circle map. Descriptor problems, including
/// an unreadable or malformed affine table, are configuration errors.
pub fn build_map(descriptor: &str) -> Result<DynamicalMap, CliError> {
    if descriptor == "identity" {
        return Ok(DynamicalMap::identity());
    }
    if descriptor == "doubling" {
        return Ok(DynamicalMap::doubling());
    }
    if let Some(angle) = descriptor.strip_prefix("rotation:") {
        let (p, q) = angle
            .split_once('/')
            .ok_or_else(|| CliError::config(format!("map rotation angle \"{angle}\" is not p/q")))?;
        let p: i64 = p
            .trim()
            .parse()
            .map_err(|_| CliError::config(format!("rotation numerator \"{p}\" is not an integer")))?;
        let q: i64 = q
            .trim()
            .parse()
            .map_err(|_| CliError::config(format!("rotation denominator \"{q}\" is not an integer")))?;
        if q <= 0 {
            return Err(CliError::config("rotation denominator must be positive"));
        }
        return Ok(DynamicalMap::rotation(Ratio::new(p, q)));
    }
    if let Some(path) = descriptor.strip_prefix("affine:") {
        let file = fs::File::open(path)
            .map_err(|e| CliError::config(format!("cannot read affine table {path}: {e}")))?;
        let table = load_affine_csv(file)
            .map_err(|e| CliError::config(format!("malformed affine table {path}: {e}")))?;
        return DynamicalMap::affine(table)
            .map_err(|e| CliError::config(format!("invalid affine table {path}: {e}")));
    }
    Err(CliError::config(format!(
        "unknown map \"{descriptor}\": expected rotation:<p/q>, doubling, identity, \
         or affine:<file.csv>"
    )))
}
