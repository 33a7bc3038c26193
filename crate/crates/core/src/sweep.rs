//! One-parameter sweeps over a base configuration.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::config::{Setting, SimulationConfig};
use crate::error::{Error, Result};
use crate::scenario::{RunOutput, Scenario};

#[derive(Debug, Clone)]
pub struct SweepRun {
    /// The value as given.
    pub label: String,
    pub config: SimulationConfig,
    pub output: RunOutput,
}

/// Runs `base` once per value of `param` (`[section.]key`, default section `material`).
pub fn sweep(base: &SimulationConfig, param: &str, values: &[String]) -> Result<Vec<SweepRun>> {
    let configs = values
        .iter()
        .map(|v| {
            let mut c = base.clone();
            c.set_path(param, &Setting::from_cli(v))?;
            Ok((v.clone(), c))
        })
        .collect::<Result<Vec<_>>>()?;
    configs
        .into_iter()
        .map(|(label, config)| {
            log::info!("sweep {param} = {label}");
            let output = Scenario::build(&config)?.run()?;
            Ok(SweepRun { label, config, output })
        })
        .collect()
}

/// Side-by-side trajectories: `t`, `jg` and `u_z` columns per run.
pub fn write_sweep(runs: &[SweepRun], param: &str, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let csv_err = |e: csv::Error| Error::Format(e.to_string());
    let header: Vec<String> = runs
        .iter()
        .flat_map(|r| ["t", "jg", "u_z"].map(|q| format!("{q}[{param}={}]", r.label)))
        .collect();
    w.write_record(&header).map_err(csv_err)?;
    let rows = runs.iter().map(|r| r.output.records.len()).max().unwrap_or(0);
    for i in 0..rows {
        let row: Vec<String> = runs
            .iter()
            .flat_map(|r| match r.output.records.get(i) {
                Some(rec) => [rec.t, rec.jg, rec.u[2]].map(|v| format!("{v:.16e}")),
                None => [String::new(), String::new(), String::new()],
            })
            .collect();
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
