//! Result rows and their CSV/JSON emission. The CSV is fully regenerated
//! per invocation with a fixed column order and 6-decimal floats, so a
//! rerun with identical inputs is byte-identical.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::{aggregate, RunResult, SweepCell};

pub const CSV_HEADER: &str = "config_id,grid_dim,n_agents,frac_reliable,noise,failure_model,\
policy,seed,success_rate_mean,success_rate_std,avg_trust_rate_mean,mutual_trust_rate_mean,\
trust_accuracy_mean,avg_reward_mean";

/// One emitted row: either a single (config, seed) repetition or the
/// cross-seed aggregate of a config (seed = "all").
#[derive(Debug, Clone, Serialize)]
pub struct OutputRow {
    pub config_id: String,
    pub grid_dim: usize,
    pub n_agents: usize,
    pub frac_reliable: f64,
    pub noise: f64,
    pub failure_model: String,
    pub policy: String,
    pub seed: String,
    pub success_rate_mean: f64,
    pub success_rate_std: f64,
    pub avg_trust_rate_mean: f64,
    pub mutual_trust_rate_mean: f64,
    pub trust_accuracy_mean: f64,
    pub avg_reward_mean: f64,
}

impl OutputRow {
    fn csv_line(&self) -> String {
        format!(
            "{},{},{},{:.6},{:.6},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            self.config_id,
            self.grid_dim,
            self.n_agents,
            self.frac_reliable,
            self.noise,
            self.failure_model,
            self.policy,
            self.seed,
            self.success_rate_mean,
            self.success_rate_std,
            self.avg_trust_rate_mean,
            self.mutual_trust_rate_mean,
            self.trust_accuracy_mean,
            self.avg_reward_mean,
        )
    }
}

/// Build the row list: per-seed rows in sweep order, then one aggregate row
/// after each config's last seed. Failed cells surface as errors.
pub fn rows_from_cells(cells: &[SweepCell]) -> Result<Vec<OutputRow>> {
    let mut rows = Vec::new();
    let mut idx = 0;
    while idx < cells.len() {
        let (config, _, _) = &cells[idx];
        let end = cells[idx..]
            .iter()
            .take_while(|(c, _, _)| c == config)
            .count()
            + idx;
        let mut seed_results: Vec<&RunResult> = Vec::new();
        for (cell_config, seed, result) in &cells[idx..end] {
            let result = result.as_ref().map_err(|e| Error::InvalidConfig {
                key: format!("{} seed {seed}", cell_config.config_id()),
                reason: e.to_string(),
            })?;
            rows.push(OutputRow {
                config_id: cell_config.config_id(),
                grid_dim: cell_config.grid_dim,
                n_agents: cell_config.node_count(),
                frac_reliable: cell_config.frac_reliable,
                noise: cell_config.noise,
                failure_model: cell_config.failure_model.to_string(),
                policy: cell_config.policy.to_string(),
                seed: seed.to_string(),
                success_rate_mean: result.eval_mean.success_rate,
                success_rate_std: result.eval_std.success_rate,
                avg_trust_rate_mean: result.eval_mean.avg_trust_rate,
                mutual_trust_rate_mean: result.eval_mean.mutual_trust_rate,
                trust_accuracy_mean: result.eval_mean.avg_trust_accuracy,
                avg_reward_mean: result.eval_mean.avg_reward,
            });
            seed_results.push(result);
        }
        let (mean, std) = aggregate(&seed_results)?;
        rows.push(OutputRow {
            config_id: config.config_id(),
            grid_dim: config.grid_dim,
            n_agents: config.node_count(),
            frac_reliable: config.frac_reliable,
            noise: config.noise,
            failure_model: config.failure_model.to_string(),
            policy: config.policy.to_string(),
            seed: "all".to_string(),
            success_rate_mean: mean.success_rate,
            success_rate_std: std.success_rate,
            avg_trust_rate_mean: mean.avg_trust_rate,
            mutual_trust_rate_mean: mean.mutual_trust_rate,
            trust_accuracy_mean: mean.avg_trust_accuracy,
            avg_reward_mean: mean.avg_reward,
        });
        idx = end;
    }
    Ok(rows)
}

/// Write (truncating) the header plus one line per row.
pub fn write_csv<P: AsRef<Path>>(path: P, rows: &[OutputRow]) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(file, "{CSV_HEADER}")?;
    for row in rows {
        writeln!(file, "{}", row.csv_line())?;
    }
    file.flush()?;
    Ok(())
}

/// JSON mirror of the same rows.
pub fn write_json<P: AsRef<Path>>(path: P, rows: &[OutputRow]) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut file, rows).map_err(std::io::Error::from)?;
    writeln!(file)?;
    file.flush()?;
    Ok(())
}

/// Per-episode training reward CSV: one line per (config, seed, episode).
pub fn write_train_log<P: AsRef<Path>>(path: P, cells: &[SweepCell]) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(file, "config_id,seed,episode,avg_reward")?;
    for (config, seed, result) in cells {
        let Ok(result) = result else { continue };
        let Some(curve) = &result.train_rewards else {
            continue;
        };
        let id = config.config_id();
        for (episode, reward) in curve.iter().enumerate() {
            writeln!(file, "{id},{seed},{episode},{reward:.6}")?;
        }
    }
    file.flush()?;
    Ok(())
}
