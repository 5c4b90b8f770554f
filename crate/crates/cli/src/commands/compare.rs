use std::collections::BTreeMap;

use crowdbench_core::corpus::SourceKey;
use crowdbench_core::estimators::{compare_protocols, spearman_rank, FamilyEstimate};
use crowdbench_core::kernels::KernelKind;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::inputs::Loaded;
use crate::report::{num, opt_num, OutputDir, Table, NA};

pub const COMPARISON_HEADER: [&str; 14] = [
    "kernel",
    "task",
    "model",
    "baseline",
    "candidate",
    "baseline_rho",
    "baseline_rho_lo",
    "baseline_rho_hi",
    "candidate_rho",
    "candidate_rho_lo",
    "candidate_rho_hi",
    "delta_rho",
    "delta_rho_lo",
    "delta_rho_hi",
];

pub const TEMPERATURE_HEADER: [&str; 11] = [
    "kernel",
    "task",
    "model",
    "n_temperatures",
    "temperatures",
    "rhos",
    "deltas",
    "rho_change",
    "spearman_t_rho",
    "delta_change",
    "spearman_t_delta",
];

fn protocol_key(model: &str, protocol: &str) -> SourceKey {
    SourceKey::model(model, (!protocol.is_empty()).then_some(protocol))
}

/// Base model labels present in the model corpora.
fn model_labels(loaded: &Loaded) -> Vec<String> {
    let mut labels: Vec<String> = loaded.models.iter().map(|k| k.source.label().to_string()).collect();
    labels.dedup();
    labels
}

fn families_by_task(
    loaded: &Loaded,
    cfg: &RunConfig,
    kind: KernelKind,
    key: &SourceKey,
) -> Result<BTreeMap<String, FamilyEstimate>, CliError> {
    if !loaded.models.contains(key) {
        return Ok(BTreeMap::new());
    }
    Ok(super::estimate_source(loaded, cfg, kind, key)?
        .into_iter()
        .map(|f| (f.task_family.clone(), f))
        .collect())
}

pub(super) fn run(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let section = &cfg.compare;
    let pair = match (&section.baseline, &section.candidate) {
        (Some(a), Some(b)) => Some((a.as_str(), b.as_str())),
        (None, None) => None,
        _ => return Err(CliError::validation("compare needs both baseline and candidate")),
    };
    if pair.is_none() && section.temperatures.is_empty() {
        return Err(CliError::validation(
            "nothing to compare: set compare.baseline/candidate or compare.temperatures",
        ));
    }
    if let Some((p, t)) = section.temperatures.iter().find(|(_, t)| !t.is_finite()) {
        return Err(CliError::validation(format!("temperature of {p} is not finite: {t}")));
    }
    let loaded = super::load_validated(cfg, out)?;
    let models = model_labels(&loaded);

    if let Some((baseline, candidate)) = pair {
        let mut table = Table::new(&COMPARISON_HEADER);
        let mut curves = Vec::new();
        for &kind in &cfg.kernel.kinds {
            for model in &models {
                let a = families_by_task(&loaded, cfg, kind, &protocol_key(model, baseline))?;
                let b = families_by_task(&loaded, cfg, kind, &protocol_key(model, candidate))?;
                for (task, fa) in &a {
                    let Some(fb) = b.get(task) else { continue };
                    let diff = compare_protocols(fa, fb)
                        .map_err(|e| CliError::estimation(format!("{model} / {task}: {e}")))?;
                    table.push(vec![
                        kind.as_str().to_string(),
                        task.clone(),
                        model.clone(),
                        baseline.to_string(),
                        candidate.to_string(),
                        num(fa.rho.point),
                        num(fa.rho.lo),
                        num(fa.rho.hi),
                        num(fb.rho.point),
                        num(fb.rho.lo),
                        num(fb.rho.hi),
                        num(diff.point),
                        num(diff.lo),
                        num(diff.hi),
                    ]);
                    if kind == cfg.kernel.kinds[0] {
                        let label = format!("{model} / {task}");
                        curves.push((format!("{label} [{baseline}]"), fa.delta.point, false));
                        curves.push((format!("{label} [{candidate}]"), fb.delta.point, true));
                    }
                }
            }
        }
        if table.rows.is_empty() {
            return Err(CliError::validation(format!(
                "no model has both protocol {baseline:?} and {candidate:?} in the same task family"
            )));
        }
        out.table("protocol_comparison", &table)?;
        let (curve_table, chart) = super::adoption::bcrit_curves(
            &format!("Critical private benefit, {baseline} (solid) vs {candidate} (dashed)"),
            curves,
            &cfg.adoption,
        )?;
        out.table("protocol_bcrit_curve", &curve_table)?;
        out.svg("plots/protocol_bcrit_curves", &chart)?;
    }

    if !section.temperatures.is_empty() {
        out.table("temperature_diagnostics", &temperature_table(cfg, &loaded, &models)?)?;
    }
    Ok(())
}

fn temperature_table(cfg: &RunConfig, loaded: &Loaded, models: &[String]) -> Result<Table, CliError> {
    let mut grid: Vec<(&str, f64)> = cfg
        .compare
        .temperatures
        .iter()
        .map(|(p, t)| (p.as_str(), *t))
        .collect();
    grid.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(b.0)));

    let mut table = Table::new(&TEMPERATURE_HEADER);
    for &kind in &cfg.kernel.kinds {
        for model in models {
            // task -> [(T, rho, delta)] in temperature order
            let mut by_task: BTreeMap<String, Vec<(f64, f64, f64)>> = BTreeMap::new();
            for &(protocol, t) in &grid {
                for (task, f) in families_by_task(loaded, cfg, kind, &protocol_key(model, protocol))? {
                    by_task.entry(task).or_default().push((t, f.rho.point, f.delta.point));
                }
            }
            for (task, points) in by_task {
                if points.len() < 2 {
                    continue;
                }
                let ts: Vec<f64> = points.iter().map(|p| p.0).collect();
                let rhos: Vec<f64> = points.iter().map(|p| p.1).collect();
                let deltas: Vec<f64> = points.iter().map(|p| p.2).collect();
                let rank = |ys: &[f64]| -> Result<Option<f64>, CliError> {
                    spearman_rank(&ts, ys).map_err(|e| CliError::estimation(e.to_string()))
                };
                let join = |xs: &[f64]| xs.iter().map(|&x| num(x)).collect::<Vec<_>>().join(";");
                let last = points.len() - 1;
                table.push(vec![
                    kind.as_str().to_string(),
                    task,
                    model.clone(),
                    points.len().to_string(),
                    join(&ts),
                    join(&rhos),
                    join(&deltas),
                    num(rhos[last] - rhos[0]),
                    opt_num(rank(&rhos)?),
                    num(deltas[last] - deltas[0]),
                    opt_num(rank(&deltas)?),
                ]);
            }
        }
    }
    if table.rows.is_empty() {
        log::warn!("no model has two or more of the configured temperature protocols; {NA} table");
    }
    Ok(table)
}
