use crowdbench_core::corpus::{validate_corpus, SourceKey};
use crowdbench_core::embedding::coverage_check;
use crowdbench_core::kernels::KernelKind;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::inputs::Loaded;
use crate::report::{OutputDir, Table};

pub(super) fn run(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let loaded = crate::inputs::load(cfg, out)?;
    let issues = write_reports(cfg, &loaded, out)?;
    if issues.is_empty() {
        Ok(())
    } else {
        Err(CliError::validation(issues.join("\n")))
    }
}

/// Writes the group and coverage reports and returns the blocking issues.
pub(super) fn write_reports(
    cfg: &RunConfig,
    loaded: &Loaded,
    out: &mut OutputDir,
) -> Result<Vec<String>, CliError> {
    let report = validate_corpus(&loaded.corpus);
    let mut groups = Table::new(&[
        "source",
        "task_family",
        "condition",
        "units",
        "responses",
        "unique_texts",
        "estimable",
        "problem",
    ]);
    for g in &report.groups {
        groups.push(vec![
            g.source.to_string(),
            g.task_family.clone(),
            g.condition.clone(),
            g.units.to_string(),
            g.responses.to_string(),
            g.unique_texts.to_string(),
            g.estimable.to_string(),
            g.problem.clone().unwrap_or_default(),
        ]);
    }
    out.table("validation_report", &groups)?;

    let mut coverage = Table::new(&["kernel", "id", "problem"]);
    for row in coverage_rows(cfg, loaded) {
        coverage.push(row);
    }
    out.table("coverage", &coverage)?;
    Ok(validation_issues(cfg, loaded))
}

fn coverage_rows(cfg: &RunConfig, loaded: &Loaded) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for &kind in &cfg.kernel.kinds {
        let name = kind.as_str().to_string();
        match kind {
            KernelKind::Semantic | KernelKind::PlotSynopsis => {
                if kind == KernelKind::PlotSynopsis {
                    for r in loaded.corpus.responses().iter().filter(|r| r.synopsis.is_none()) {
                        rows.push(vec![name.clone(), r.id.clone(), "missing synopsis".into()]);
                    }
                }
                if let Some(table) = &loaded.table {
                    for id in coverage_check(&loaded.corpus, table, &loaded.spec(kind)).missing {
                        rows.push(vec![name.clone(), id, "missing embedding".into()]);
                    }
                }
            }
            KernelKind::Bucket => {
                for r in loaded.corpus.responses().iter().filter(|r| r.bucket_id.is_none()) {
                    rows.push(vec![name.clone(), r.id.clone(), "missing bucket".into()]);
                }
            }
            KernelKind::WordJaccard | KernelKind::CharTrigramJaccard => {}
        }
    }
    rows
}

/// Everything that would stop estimation: non-estimable groups, model conditions without a
/// human baseline, and missing kernel inputs.
pub fn validation_issues(cfg: &RunConfig, loaded: &Loaded) -> Vec<String> {
    let mut issues = Vec::new();
    let report = validate_corpus(&loaded.corpus);
    for g in &report.groups {
        if !g.estimable {
            let why = g
                .problem
                .clone()
                .unwrap_or_else(|| format!("{} sampling unit(s), need at least 2", g.units));
            issues.push(format!("group {} / {} is not estimable: {why}", g.source, g.condition));
        }
    }
    let human = SourceKey::human();
    for model in &loaded.models {
        for condition in loaded.corpus.conditions().keys() {
            let has_model = loaded.corpus.group(model, condition).next().is_some();
            let has_human = loaded.corpus.group(&human, condition).next().is_some();
            if has_model && !has_human {
                issues.push(format!("condition {condition} has {model} responses but no human baseline"));
            }
        }
    }
    let coverage = coverage_rows(cfg, loaded);
    for row in &coverage {
        issues.push(format!("{} kernel: {} for {}", row[0], row[2], row[1]));
    }
    issues
}
