use crowdbench_core::corpus::{partition_units, SamplingUnit, SourceKey};
use crowdbench_core::rarefaction::{
    aggregate_curves, default_grid, drift_pair, rarefaction_curve, relative_drift,
    RarefactionCurve, RarefactionError, RarefactionParams,
};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::inputs::Loaded;
use crate::report::{num, slug, OutputDir, Table, NA};
use crate::svg::{Mark, Series, XyChart};

pub const CURVE_HEADER: [&str; 12] = [
    "kernel",
    "source",
    "task_family",
    "condition",
    "n",
    "kappa_mean",
    "lo",
    "hi",
    "R",
    "seed",
    "band",
    "band_level",
];

pub const DRIFT_HEADER: [&str; 9] = [
    "kernel",
    "source",
    "task_family",
    "condition",
    "n_low",
    "n_high",
    "kappa_low",
    "kappa_high",
    "drift_percent",
];

/// Condition label used for the equal-weight family curve.
pub const FAMILY_ROW: &str = "*";

fn rarefy_error(context: &str, e: RarefactionError) -> CliError {
    match e {
        RarefactionError::GridExceedsUnits { .. } | RarefactionError::BadGrid => {
            CliError::validation(format!("{context}: {e}"))
        }
        other => CliError::estimation(format!("{context}: {other}")),
    }
}

struct SourceCurves {
    source: String,
    family: String,
    per_condition: Vec<(String, RarefactionCurve)>,
    family_curve: RarefactionCurve,
}

fn source_family(
    loaded: &Loaded,
    cfg: &RunConfig,
    kind: crowdbench_core::kernels::KernelKind,
    source: &SourceKey,
    family: &str,
    conditions: &[String],
) -> Result<Option<SourceCurves>, CliError> {
    let mut groups: Vec<(String, Vec<SamplingUnit>)> = Vec::new();
    for c in conditions {
        if loaded.corpus.group(source, c).next().is_none() {
            continue;
        }
        let units = partition_units(&loaded.corpus, source, c)
            .map_err(|e| CliError::validation(e.to_string()))?;
        groups.push((c.clone(), units));
    }
    if groups.is_empty() {
        return Ok(None);
    }
    let grid = if cfg.rarefaction.grid.is_empty() {
        let fewest = groups.iter().map(|(_, u)| u.len()).min().unwrap_or(0);
        default_grid(fewest)
    } else {
        cfg.rarefaction.grid.clone()
    };
    let params = RarefactionParams {
        grid: &grid,
        repeats: cfg.rarefaction.repeats,
        seed: cfg.estimator.seed,
        band_level: cfg.rarefaction.band_level,
    };
    let spec = loaded.spec(kind);
    let mut per_condition = Vec::new();
    for (c, units) in &groups {
        let curve = rarefaction_curve(units, &spec, &params, loaded.table.as_ref())
            .map_err(|e| rarefy_error(&format!("{source} / {c} ({kind})"), e))?;
        per_condition.push((c.clone(), curve));
    }
    let curves: Vec<RarefactionCurve> = per_condition.iter().map(|(_, c)| c.clone()).collect();
    let family_curve = aggregate_curves(format!("{source} / {family}"), &curves)
        .map_err(|e| rarefy_error(&format!("{source} / {family}"), e))?;
    Ok(Some(SourceCurves {
        source: source.to_string(),
        family: family.to_string(),
        per_condition,
        family_curve,
    }))
}

pub(super) fn run(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let loaded = super::load_validated(cfg, out)?;
    let mut sources = vec![SourceKey::human()];
    sources.extend(loaded.models.iter().cloned());
    let families = loaded.corpus.families();

    let mut curves_table = Table::new(&CURVE_HEADER);
    let mut drift_table = Table::new(&DRIFT_HEADER);
    for &kind in &cfg.kernel.kinds {
        let kernel = kind.as_str();
        for (family, conditions) in &families {
            let mut chart = XyChart::new(
                &format!("Rarefaction of crowding, {family} ({kernel})"),
                "n (sampling units)",
                "kappa",
            );
            for source in &sources {
                let Some(sc) = source_family(&loaded, cfg, kind, source, family, conditions)? else {
                    continue;
                };
                let rows = sc
                    .per_condition
                    .iter()
                    .map(|(c, curve)| (c.as_str(), curve))
                    .chain(std::iter::once((FAMILY_ROW, &sc.family_curve)));
                for (condition, curve) in rows {
                    let lead = [kernel, &sc.source, &sc.family, condition];
                    for p in &curve.points {
                        let mut row: Vec<String> = lead.iter().map(|s| s.to_string()).collect();
                        row.extend([
                            p.n.to_string(),
                            num(p.mean),
                            num(p.lo),
                            num(p.hi),
                            curve.repeats.to_string(),
                            curve.seed.to_string(),
                            "percentile".into(),
                            num(curve.band_level),
                        ]);
                        curves_table.push(row);
                    }
                    if let Some(row) = drift_row(curve, cfg.rarefaction.drift_span) {
                        let mut full: Vec<String> = lead.iter().map(|s| s.to_string()).collect();
                        full.extend(row);
                        drift_table.push(full);
                    }
                }
                let color = chart.series.len();
                let points = sc.family_curve.points.iter().map(|p| (p.n as f64, p.mean)).collect();
                let bands = sc.family_curve.points.iter().map(|p| (p.lo, p.hi)).collect();
                let mut series =
                    Series::new(sc.source.clone(), points, Mark::LinePoints, color).with_bands(bands);
                if source.source.is_human() {
                    series = series.dashed();
                }
                chart.series.push(series);
            }
            if !chart.series.is_empty() {
                out.svg(&format!("plots/rarefaction_{kernel}_{}", slug(family)), &chart.render())?;
            }
        }
    }
    out.table("rarefaction_curves", &curves_table)?;
    out.table("drift", &drift_table)?;
    Ok(())
}

fn drift_row(curve: &RarefactionCurve, span: usize) -> Option<Vec<String>> {
    let (low, high) = drift_pair(&curve.grid(), span)?;
    let k_low = curve.at(low)?.mean;
    let k_high = curve.at(high)?.mean;
    let drift = relative_drift(curve, low, high).map(num).unwrap_or_else(|_| NA.into());
    Some(vec![
        low.to_string(),
        high.to_string(),
        num(k_low),
        num(k_high),
        drift,
    ])
}
