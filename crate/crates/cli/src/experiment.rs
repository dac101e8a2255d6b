//! `run`: one experiment cell, every seed a full closed-loop simulation.

use std::fs;
use std::path::PathBuf;
use std::sync::Arc;

use rayon::prelude::*;
use sao_adapter::{run_baseline, run_http, run_in_process, RunOutput};
use sao_core::{DomainDataModel, Framework};
use sao_platoon::Scenario;

use crate::error::CliError;
use crate::plan::{seed_dir, CellMeta, ExperimentPlan, Transport, CELL_META};
use crate::report::{load_cell, summarize, write_summary};

/// Runs every seed of the plan (in parallel) and writes the cell directory: one `seed-N`
/// directory per seed, `cell.json` and `summary.csv`. Returns the cell directory.
pub fn run(plan: &ExperimentPlan) -> Result<PathBuf, CliError> {
    plan.validate()?;
    let scenario = plan.load_scenario()?;
    let ddm = plan.load_ddm()?;
    let cell = plan.out.join(plan.cell_name(&scenario, &ddm));
    fs::create_dir_all(&cell).map_err(CliError::io(&cell))?;

    plan.seeds
        .par_iter()
        .map(|&seed| {
            let out = run_seed(plan, &scenario, &ddm, seed)?;
            let dir = seed_dir(&cell, seed);
            out.write_to(&dir).map_err(|e| CliError::harness(seed, e))?;
            tracing::info!(seed, dir = %dir.display(), "run finished");
            Ok(())
        })
        .collect::<Result<Vec<()>, CliError>>()?;

    let meta = CellMeta {
        name: cell.file_name().unwrap().to_string_lossy().into_owned(),
        scenario: scenario.name.clone(),
        configuration: plan.configuration(&ddm),
        detection: plan.baseline.is_none().then(|| ddm.detection().algorithm.to_string()),
        trigger: plan.baseline.is_none().then(|| ddm.selection().method.to_string()),
        baseline: plan.baseline.map(|b| b.name().to_string()),
        seeds: plan.seeds.clone(),
        metrics: ddm.performance_measures.keys().cloned().collect(),
        windows: scenario.windows(),
        window_s: scenario.window_s,
    };
    let path = cell.join(CELL_META);
    let text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    fs::write(&path, text).map_err(CliError::io(&path))?;

    let summary = summarize(&load_cell(&cell)?)?;
    write_summary(&cell.join("summary.csv"), &[summary])?;
    Ok(cell)
}

/// One closed-loop run. Framework and simulator share the seed.
pub fn run_seed(
    plan: &ExperimentPlan,
    scenario: &Scenario,
    ddm: &DomainDataModel,
    seed: u64,
) -> Result<RunOutput, CliError> {
    let scenario = scenario.clone().with_seed(seed);
    if let Some(baseline) = plan.baseline {
        return run_baseline(&scenario, Arc::new(ddm.clone()), plan.base_dir(), baseline)
            .map_err(|e| CliError::harness(seed, e));
    }
    let framework = Framework::new(ddm.clone(), plan.base_dir(), seed)?;
    match plan.transport {
        Transport::InProcess => run_in_process(&scenario, framework).map_err(|e| CliError::harness(seed, e)),
        Transport::Http => {
            let (out, seqs) = run_http(&scenario, framework).map_err(|e| CliError::harness(seed, e))?;
            tracing::debug!(seed, decisions = seqs.len(), "decisions received over HTTP");
            Ok(out)
        }
    }
}
