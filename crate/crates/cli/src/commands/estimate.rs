use crowdbench_core::estimators::{ConditionEstimate, FamilyEstimate};
use crowdbench_core::stats::Estimate;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::report::{num, slug, OutputDir, Table};
use crate::svg::{dot_chart, DotRow, Guide, Mark, Series, XyChart};

/// Column layout of the per-condition tables.
pub const CONDITION_HEADER: [&str; 18] = [
    "condition",
    "b",
    "kappa_h",
    "kappa_h_lo",
    "kappa_h_hi",
    "kappa_a",
    "kappa_a_lo",
    "kappa_a_hi",
    "delta",
    "delta_lo",
    "delta_hi",
    "rho",
    "rho_lo",
    "rho_hi",
    "B",
    "seed",
    "kernel",
    "stopword_list_id",
];

pub const FAMILY_HEADER: [&str; 22] = [
    "kernel",
    "model",
    "task",
    "conditions",
    "kappa_h",
    "kappa_h_lo",
    "kappa_h_hi",
    "kappa_a",
    "kappa_a_lo",
    "kappa_a_hi",
    "delta_meanofconds",
    "delta_lo",
    "delta_hi",
    "delta_of_aggregates",
    "delta_unclamped",
    "rho",
    "rho_lo",
    "rho_hi",
    "rho_of_aggregates",
    "B",
    "seed",
    "stopword_list_id",
];

/// Label of the family row in per-condition tables.
pub const AGGREGATE_ROW: &str = "aggregate";

fn interval(e: &Estimate) -> [String; 3] {
    [num(e.point), num(e.lo), num(e.hi)]
}

fn condition_row(
    condition: &str,
    b: Option<usize>,
    stats: [&Estimate; 4],
    replicates: usize,
    seed: u64,
    kernel: &str,
    stopwords: &str,
) -> Vec<String> {
    let mut row = vec![
        condition.to_string(),
        b.map(|b| b.to_string()).unwrap_or_else(|| crate::report::NA.into()),
    ];
    for s in stats {
        row.extend(interval(s));
    }
    row.extend([
        replicates.to_string(),
        seed.to_string(),
        kernel.to_string(),
        stopwords.to_string(),
    ]);
    row
}

pub(super) fn condition_table(fam: &FamilyEstimate, kernel: &str, stopwords: &str) -> Table {
    let mut t = Table::new(&CONDITION_HEADER);
    let seed = fam.conditions.first().map(|c| c.seed).unwrap_or_default();
    for c in &fam.conditions {
        let ConditionEstimate {
            kappa_h,
            kappa_a,
            delta,
            rho,
            ..
        } = c;
        t.push(condition_row(
            &c.condition_id,
            Some(c.b),
            [kappa_h, kappa_a, delta, rho],
            c.replicates.len(),
            c.seed,
            kernel,
            stopwords,
        ));
    }
    t.push(condition_row(
        AGGREGATE_ROW,
        None,
        [&fam.kappa_h, &fam.kappa_a, &fam.delta, &fam.rho],
        fam.replicates,
        seed,
        kernel,
        stopwords,
    ));
    t
}

pub(super) fn family_row(fam: &FamilyEstimate, kernel: &str, stopwords: &str) -> Vec<String> {
    let seed = fam.conditions.first().map(|c| c.seed).unwrap_or_default();
    let mut row = vec![
        kernel.to_string(),
        fam.model.clone(),
        fam.task_family.clone(),
        fam.conditions.len().to_string(),
    ];
    row.extend(interval(&fam.kappa_h));
    row.extend(interval(&fam.kappa_a));
    row.extend(interval(&fam.delta));
    row.push(num(fam.delta_of_aggregates));
    row.push(num(fam.delta_unclamped.point));
    row.extend(interval(&fam.rho));
    row.push(num(fam.rho_of_aggregates));
    row.extend([fam.replicates.to_string(), seed.to_string(), stopwords.to_string()]);
    row
}

pub(super) fn run(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let loaded = super::load_validated(cfg, out)?;
    let stopwords = loaded.stopwords.id().to_string();
    let mut summary = Table::new(&FAMILY_HEADER);
    for &kind in &cfg.kernel.kinds {
        let kernel = kind.as_str();
        let mut all = Vec::new();
        for model in &loaded.models {
            for fam in super::estimate_source(&loaded, cfg, kind, model)? {
                let name = format!(
                    "conditions/{kernel}/{}__{}",
                    slug(&fam.model),
                    slug(&fam.task_family)
                );
                out.table(&name, &condition_table(&fam, kernel, &stopwords))?;
                summary.push(family_row(&fam, kernel, &stopwords));
                all.push(fam);
            }
        }
        plots(&all, kernel, out)?;
    }
    out.table("family_summary", &summary)?;
    Ok(())
}

fn plots(families: &[FamilyEstimate], kernel: &str, out: &mut OutputDir) -> Result<(), CliError> {
    let tasks: Vec<&str> = {
        let mut t: Vec<&str> = families.iter().map(|f| f.task_family.as_str()).collect();
        t.sort();
        t.dedup();
        t
    };
    let color_of = |task: &str| tasks.iter().position(|t| *t == task).unwrap_or(0);

    let rows: Vec<DotRow> = families
        .iter()
        .map(|f| DotRow {
            label: format!("{} / {}", f.model, f.task_family),
            value: f.rho.point,
            lo: f.rho.lo,
            hi: f.rho.hi,
            color: color_of(&f.task_family),
        })
        .collect();
    out.svg(
        &format!("plots/rho_parity_{kernel}"),
        &dot_chart(
            &format!("Human-relative diversity ratio ({kernel})"),
            "rho (dashed: parity at 1)",
            &rows,
            &[Guide::Vertical(1.0)],
        ),
    )?;

    let mut chart = XyChart::new(
        &format!("Human vs model-only crowding ({kernel})"),
        "kappa_h",
        "kappa_a",
    );
    for (i, task) in tasks.iter().enumerate() {
        let fams: Vec<&FamilyEstimate> = families.iter().filter(|f| f.task_family == *task).collect();
        let points = fams.iter().map(|f| (f.kappa_h.point, f.kappa_a.point)).collect();
        let bands = fams.iter().map(|f| (f.kappa_a.lo, f.kappa_a.hi)).collect();
        chart
            .series
            .push(Series::new(*task, points, Mark::Points, i).with_bands(bands));
    }
    chart.guides.push(Guide::Diagonal);
    chart.x_range = Some((0.0, 1.0));
    chart.y_range = Some((0.0, 1.0));
    out.svg(&format!("plots/kappa_diagonal_{kernel}"), &chart.render())
}
