//! The five subcommands. Each writes into the configured output directory and echoes the
//! effective configuration there first.

mod adoption;
mod compare;
mod estimate;
mod rarefy;
mod validate;

use std::path::PathBuf;

use crowdbench_core::corpus::SourceKey;
use crowdbench_core::estimators::{
    aggregate_family, bootstrap_condition, condition_inputs, FamilyEstimate,
};
use crowdbench_core::kernels::KernelKind;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::inputs::Loaded;
use crate::report::OutputDir;

pub use adoption::{AdoptionInput, threshold_table};
pub use validate::validation_issues;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Validate,
    Estimate,
    Rarefy,
    Adoption,
    Compare,
}

/// Files written by a successful command.
#[derive(Debug, Default)]
pub struct Outcome {
    pub written: Vec<PathBuf>,
}

/// Runs `command` on a pool of `cfg.estimator.workers` threads.
pub fn run(command: Command, cfg: &RunConfig, extra: &AdoptionInput) -> Result<Outcome, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if cfg.estimator.workers > 0 {
        builder = builder.num_threads(cfg.estimator.workers);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::estimation(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run_inline(command, cfg, extra))
}

fn run_inline(command: Command, cfg: &RunConfig, extra: &AdoptionInput) -> Result<Outcome, CliError> {
    let mut out = OutputDir::new(&cfg.output.dir, cfg.output.markdown, cfg.output.svg);
    out.file("effective_config.toml", cfg.to_toml().as_bytes())?;
    match command {
        Command::Validate => validate::run(cfg, &mut out)?,
        Command::Estimate => estimate::run(cfg, &mut out)?,
        Command::Rarefy => rarefy::run(cfg, &mut out)?,
        Command::Adoption => adoption::run(cfg, extra, &mut out)?,
        Command::Compare => compare::run(cfg, &mut out)?,
    }
    Ok(Outcome {
        written: out.written().to_vec(),
    })
}

/// Loads inputs and fails with exit code 2 on any estimation-blocking issue.
fn load_validated(cfg: &RunConfig, out: &mut OutputDir) -> Result<Loaded, CliError> {
    let loaded = crate::inputs::load(cfg, out)?;
    let issues = validate::write_reports(cfg, &loaded, out)?;
    if !issues.is_empty() {
        return Err(CliError::validation(issues.join("\n")));
    }
    Ok(loaded)
}

/// Family estimates for one source, one per task family where it has responses.
fn estimate_source(
    loaded: &Loaded,
    cfg: &RunConfig,
    kind: KernelKind,
    model: &SourceKey,
) -> Result<Vec<FamilyEstimate>, CliError> {
    let spec = loaded.spec(kind);
    let est_cfg = cfg.estimator.to_config();
    let mut families = Vec::new();
    for (family, conditions) in loaded.corpus.families() {
        let mut estimates = Vec::new();
        for condition in &conditions {
            if loaded.corpus.group(model, condition).next().is_none() {
                continue;
            }
            let (humans, models) = condition_inputs(&loaded.corpus, model, condition)
                .map_err(|e| CliError::validation(e.to_string()))?;
            let est = bootstrap_condition(&humans, &models, &spec, &est_cfg, loaded.table.as_ref())
                .map_err(|e| CliError::estimation(format!("{model} / {condition} ({kind}): {e}")))?;
            estimates.push(est);
        }
        if estimates.is_empty() {
            continue;
        }
        let fam = aggregate_family(estimates)
            .map_err(|e| CliError::estimation(format!("{model} / {family}: {e}")))?;
        families.push(fam);
    }
    Ok(families)
}
