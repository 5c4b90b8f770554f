use crowdbench_core::adoption::{critical_benefit, delta_from_rho, expected_cost};

use crate::config::{AdoptionRow, AdoptionSection, RunConfig};
use crate::error::CliError;
use crate::report::{num, OutputDir, Table};
use crate::svg::{Mark, Series, XyChart};

/// Explicit inputs given on the command line instead of, or on top of, the config rows.
#[derive(Debug, Clone, Default)]
pub struct AdoptionInput {
    pub delta: Option<f64>,
    pub rho: Option<f64>,
    pub kappa_h: Option<f64>,
    pub model: Option<String>,
    pub task: Option<String>,
}

impl AdoptionInput {
    fn row(&self) -> Option<AdoptionRow> {
        if self.delta.is_none() && self.rho.is_none() && self.kappa_h.is_none() {
            return None;
        }
        Some(AdoptionRow {
            model: self.model.clone().unwrap_or_else(|| "input".into()),
            task: self.task.clone().unwrap_or_else(|| "input".into()),
            delta: self.delta,
            rho: self.rho,
            kappa_h: self.kappa_h,
        })
    }
}

/// A threshold-table row with its Δ settled.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedRow {
    pub model: String,
    pub task: String,
    pub delta: f64,
}

fn resolve(row: &AdoptionRow) -> Result<ResolvedRow, CliError> {
    let name = format!("{} / {}", row.model, row.task);
    let delta = match (row.delta, row.rho, row.kappa_h) {
        (Some(d), None, None) => d,
        (None, Some(rho), Some(kh)) => {
            delta_from_rho(rho, kh).map_err(|e| CliError::validation(format!("{name}: {e}")))?
        }
        (None, Some(_), None) => {
            return Err(CliError::validation(format!("{name}: rho needs kappa_h")));
        }
        (None, None, _) => return Err(CliError::validation(format!("{name}: no delta or rho"))),
        _ => {
            return Err(CliError::validation(format!(
                "{name}: give either delta or rho with kappa_h, not both"
            )));
        }
    };
    if !delta.is_finite() || delta < 0.0 {
        return Err(CliError::validation(format!("{name}: delta must be finite and >= 0, got {delta}")));
    }
    Ok(ResolvedRow {
        model: row.model.clone(),
        task: row.task.clone(),
        delta,
    })
}

/// `B^crit/γ` at each configured exposure, one row per input.
pub fn threshold_table(section: &AdoptionSection, rows: &[AdoptionRow]) -> Result<Table, CliError> {
    let resolved = rows.iter().map(resolve).collect::<Result<Vec<_>, _>>()?;
    thresholds(section, &resolved)
}

fn thresholds(section: &AdoptionSection, rows: &[ResolvedRow]) -> Result<Table, CliError> {
    let mut headers = vec!["model".to_string(), "task".into(), "delta".into()];
    headers.extend(section.exposures.iter().map(|x| format!("bcrit_x{x}")));
    let mut t = Table::new(&headers);
    for r in rows {
        let mut row = vec![r.model.clone(), r.task.clone(), num(r.delta)];
        for &x in &section.exposures {
            let b = critical_benefit(r.delta, x).map_err(|e| CliError::validation(e.to_string()))?;
            row.push(num(b));
        }
        t.push(row);
    }
    Ok(t)
}

fn estimate_rows(cfg: &RunConfig) -> Result<Vec<AdoptionRow>, CliError> {
    let Some(path) = &cfg.adoption.estimates else {
        return Ok(Vec::new());
    };
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    let table = Table::from_csv(&bytes)
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    let col = |name: &str| {
        table
            .column(name)
            .ok_or_else(|| CliError::validation(format!("{}: no column {name}", path.display())))
    };
    let (kernel, model, task, delta) = (
        col("kernel")?,
        col("model")?,
        col("task")?,
        col(cfg.adoption.delta_column.as_str())?,
    );
    let wanted = cfg.kernel.kinds.first().map(|k| k.as_str()).unwrap_or_default();
    let mut rows = Vec::new();
    for r in table.rows.iter().filter(|r| r[kernel] == wanted) {
        let d: f64 = r[delta].parse().map_err(|_| {
            CliError::validation(format!("{}: bad delta {:?}", path.display(), r[delta]))
        })?;
        rows.push(AdoptionRow {
            model: r[model].clone(),
            task: r[task].clone(),
            delta: Some(d),
            rho: None,
            kappa_h: None,
        });
    }
    Ok(rows)
}

fn check_section(section: &AdoptionSection) -> Result<(), CliError> {
    if !(section.gamma.is_finite() && section.gamma > 0.0) {
        return Err(CliError::validation(format!("adoption.gamma must be > 0, got {}", section.gamma)));
    }
    if section.exposures.is_empty() {
        return Err(CliError::validation("adoption.exposures is empty"));
    }
    if let Some(n) = section.populations.iter().find(|&&n| n < 1) {
        return Err(CliError::validation(format!("adoption.populations: {n} < 1")));
    }
    if let Some(p) = section.probabilities.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(CliError::validation(format!("adoption.probabilities: {p} outside [0, 1]")));
    }
    Ok(())
}

pub(super) fn run(cfg: &RunConfig, extra: &AdoptionInput, out: &mut OutputDir) -> Result<(), CliError> {
    let section = &cfg.adoption;
    check_section(section)?;
    let mut rows = section.rows.clone();
    rows.extend(estimate_rows(cfg)?);
    rows.extend(extra.row());
    if rows.is_empty() {
        return Err(CliError::validation(
            "no adoption inputs: give adoption.rows, adoption.estimates or --delta/--rho",
        ));
    }
    let resolved = rows.iter().map(resolve).collect::<Result<Vec<_>, _>>()?;
    out.table("thresholds", &thresholds(section, &resolved)?)?;

    let mut costs = Table::new(&["model", "task", "delta", "gamma", "N", "p", "expected_cost"]);
    for r in &resolved {
        for &n in &section.populations {
            for &p in &section.probabilities {
                let c = expected_cost(section.gamma, r.delta, n, p)
                    .map_err(|e| CliError::validation(e.to_string()))?;
                costs.push(vec![
                    r.model.clone(),
                    r.task.clone(),
                    num(r.delta),
                    num(section.gamma),
                    n.to_string(),
                    num(p),
                    num(c),
                ]);
            }
        }
    }
    out.table("expected_cost", &costs)?;

    let (table, chart) = bcrit_curves(
        "Critical private benefit",
        resolved.iter().map(|r| (format!("{} / {}", r.model, r.task), r.delta, false)),
        section,
    )?;
    out.table("bcrit_curve", &table)?;
    out.svg("plots/bcrit_curves", &chart)
}

/// `B^crit/γ` over `X = 0..=max(exposures)` for each labeled Δ, as a table and a chart.
/// Entries flagged `true` are drawn dashed.
pub(super) fn bcrit_curves(
    title: &str,
    curves: impl IntoIterator<Item = (String, f64, bool)>,
    section: &AdoptionSection,
) -> Result<(Table, String), CliError> {
    let top = section.exposures.iter().copied().max().unwrap_or(0);
    let mut table = Table::new(&["label", "delta", "X", "bcrit"]);
    let mut chart = XyChart::new(title, "X (AI-using peers)", "B^crit / gamma");
    chart.y_range = Some((0.0, 1.0));
    for (i, (label, delta, dashed)) in curves.into_iter().enumerate() {
        let mut points = Vec::new();
        for x in 0..=top {
            let b = critical_benefit(delta, x).map_err(|e| CliError::validation(e.to_string()))?;
            table.push(vec![label.clone(), num(delta), x.to_string(), num(b)]);
            points.push((x as f64, b));
        }
        let mut s = Series::new(label, points, Mark::Line, i);
        if dashed {
            s = s.dashed();
        }
        chart.series.push(s);
    }
    Ok((table, chart.render()))
}
