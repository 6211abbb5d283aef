//! The tower command. Configuration is resolved and validated first, the
//! whole run is computed in memory, and only then are artifacts written,
//! so a failing run never leaves partial output behind.

use std::fs;
use std::path::PathBuf;

use sci_core::koopman::{run_tower, TowerParams};

use crate::config::{build_map, resolve};
use crate::{CliError, PseudospectrumArgs};

pub fn run(args: PseudospectrumArgs) -> Result<(), CliError> {
    let config = resolve(&args)?;
    let f = build_map(&config.map)?;

    let schedule: Vec<(u32, u32)> = config.schedule.iter().map(|p| (p[0], p[1])).collect();
    let params = TowerParams {
        eps: config.eps,
        test_ratio: config.test_ratio,
        half_width: config.half_width,
    };
    let run = run_tower(&f, &schedule, &params).map_err(|e| CliError::compute(e.to_string()))?;

    let mut config_json =
        serde_json::to_string_pretty(&config).expect("config serializes");
    config_json.push('\n');
    let mut artifacts: Vec<(String, String)> = vec![("config.json".into(), config_json)];
    let wants = |f: &str| config.formats.iter().any(|g| g == f);
    if wants("csv") {
        for i in 0..run.stages.len() {
            artifacts.push((format!("stage_{i}.csv"), run.stage_csv(i)));
        }
    }
    if wants("json") {
        artifacts.push(("run.json".into(), run.to_json()));
    }
    if wants("svg") {
        artifacts.push(("final.svg".into(), run.final_svg()));
    }

    write_all(&config.out, &artifacts)
}

/// Write every artifact or none: on a failed write, whatever already
/// landed is removed before the error is reported.
fn write_all(dir: &PathBuf, artifacts: &[(String, String)]) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| {
        CliError::compute(format!("cannot create output directory {}: {e}", dir.display()))
    })?;
    let mut written: Vec<PathBuf> = Vec::new();
    for (name, content) in artifacts {
        let path = dir.join(name);
        if let Err(e) = fs::write(&path, content) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            return Err(CliError::compute(format!(
                "cannot write {}: {e}; partial artifacts removed",
                path.display()
            )));
        }
        written.push(path);
    }
    Ok(())
}
