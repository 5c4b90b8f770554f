//! Matched-sample bootstrap estimates of human and model-only crowding.
//!
//! Each replicate draws `b = min(n_human_units, n_model)` human units with replacement and one
//! response from every drawn unit, draws `b` model generations with replacement, and takes the
//! mean off-diagonal kernel value on each side. Δ and ρ are computed per replicate; point
//! values are replicate means and intervals are percentile intervals.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::adoption::delta_and_rho;
use crate::corpus::{Response, SamplingUnit, SourceKey};
use crate::embedding::EmbeddingTable;
use crate::kernels::{compare, featurize, KernelError, KernelSpec};
use crate::rng::stream_rng;
use crate::stats::{mean, percentile_interval, std_dev, summarize, Estimate};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimateError {
    #[error("need at least 2 items for an off-diagonal pair, got {0}")]
    TooFewItems(usize),
    #[error("condition '{condition}': need at least 2 {side} sampling units, got {found}")]
    TooFewUnits {
        condition: String,
        side: &'static str,
        found: usize,
    },
    #[error(
        "condition '{condition}': human crowding reached the ceiling in {flagged} of {replicates} \
         replicates, so the diversity ratio is undefined"
    )]
    DegenerateHumanCrowding {
        condition: String,
        flagged: usize,
        replicates: usize,
    },
    #[error("invalid estimator configuration: {0}")]
    Config(String),
    #[error("estimates disagree on {what}: '{left}' vs '{right}'")]
    Mismatch {
        what: &'static str,
        left: String,
        right: String,
    },
    #[error("no condition estimates to aggregate")]
    NothingToAggregate,
    #[error("rank correlation needs equal-length inputs ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorConfig {
    pub replicates: usize,
    pub ci_level: f64,
    pub seed: u64,
    /// Replicates with κᴴ ≥ 1 − ε have no defined ρ.
    pub kappa_h_ceiling: f64,
    /// Largest tolerated share of replicates with undefined ρ.
    pub max_flagged_fraction: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            replicates: 1000,
            ci_level: 0.95,
            seed: 0,
            kappa_h_ceiling: 1e-9,
            max_flagged_fraction: 0.01,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<(), EstimateError> {
        if self.replicates < 100 {
            return Err(EstimateError::Config(format!(
                "replicates must be at least 100 for interval output, got {}",
                self.replicates
            )));
        }
        if !(self.ci_level > 0.5 && self.ci_level < 1.0) {
            return Err(EstimateError::Config(format!(
                "ci_level must be in (0.5, 1), got {}",
                self.ci_level
            )));
        }
        if !(self.kappa_h_ceiling > 0.0 && self.kappa_h_ceiling < 1.0) {
            return Err(EstimateError::Config(format!(
                "kappa_h_ceiling must be small and positive, got {}",
                self.kappa_h_ceiling
            )));
        }
        if !(0.0..=1.0).contains(&self.max_flagged_fraction) {
            return Err(EstimateError::Config(format!(
                "max_flagged_fraction must be in [0, 1], got {}",
                self.max_flagged_fraction
            )));
        }
        Ok(())
    }
}

/// Dense symmetric kernel matrix over a fixed list of responses.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    n: usize,
    values: Vec<f64>,
}

impl KernelMatrix {
    pub fn build(
        items: &[&Response],
        spec: &KernelSpec,
        table: Option<&EmbeddingTable>,
    ) -> Result<Self, KernelError> {
        let features = items
            .iter()
            .map(|r| featurize(spec, r, table))
            .collect::<Result<Vec<_>, _>>()?;
        let n = items.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (i..n)
                    .map(|j| compare(&features[i], &features[j]))
                    .collect::<Result<Vec<f64>, _>>()
            })
            .collect::<Result<_, _>>()?;
        let mut values = vec![0.0; n * n];
        for (i, row) in rows.into_iter().enumerate() {
            for (off, v) in row.into_iter().enumerate() {
                let j = i + off;
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        Ok(KernelMatrix { n, values })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    /// Mean off-diagonal value over the slots in `picks` (repeats allowed).
    pub fn pairwise_mean(&self, picks: &[usize]) -> f64 {
        pairwise_mean_by(picks.len(), |i, j| self.get(picks[i], picks[j]))
    }
}

/// `1 / (n (n - 1)) Σ_{i ≠ j} k(i, j)`, summed row by row in index order.
pub fn pairwise_mean_by(n: usize, k: impl Fn(usize, usize) -> f64) -> f64 {
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += k(i, j);
            }
        }
    }
    sum / (n * (n - 1)) as f64
}

/// Mean off-diagonal crowding among `items`.
pub fn pairwise_mean_crowding(
    items: &[Response],
    spec: &KernelSpec,
    table: Option<&EmbeddingTable>,
) -> Result<f64, EstimateError> {
    if items.len() < 2 {
        return Err(EstimateError::TooFewItems(items.len()));
    }
    let refs: Vec<&Response> = items.iter().collect();
    let matrix = KernelMatrix::build(&refs, spec, table)?;
    let all: Vec<usize> = (0..items.len()).collect();
    Ok(matrix.pairwise_mean(&all))
}

/// Per-replicate values; `rho` is `None` when κᴴ hit the ceiling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Replicate {
    pub kappa_h: f64,
    pub kappa_a: f64,
    pub delta: f64,
    pub delta_unclamped: f64,
    pub rho: Option<f64>,
}

impl Replicate {
    fn new(kappa_h: f64, kappa_a: f64, ceiling: f64) -> Self {
        let (delta, rho) = delta_and_rho(kappa_h, kappa_a);
        Replicate {
            kappa_h,
            kappa_a,
            delta,
            delta_unclamped: kappa_a - kappa_h,
            rho: (kappa_h < 1.0 - ceiling).then_some(rho),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionEstimate {
    pub condition_id: String,
    pub task_family: String,
    pub human: String,
    pub model: String,
    /// Matched sample size per side.
    pub b: usize,
    pub kappa_h: Estimate,
    pub kappa_a: Estimate,
    /// Mean of per-replicate `max{0, κᴬ − κᴴ}`.
    pub delta: Estimate,
    /// Mean of per-replicate `κᴬ − κᴴ` without clamping.
    pub delta_unclamped: Estimate,
    pub rho: Estimate,
    /// Replicates whose ρ was undefined.
    pub flagged: usize,
    pub ci_level: f64,
    pub seed: u64,
    #[serde(skip)]
    pub replicates: Vec<Replicate>,
}

/// Flattened responses with unit boundaries, for drawing a unit then a member.
struct UnitPool<'a> {
    responses: Vec<&'a Response>,
    /// Start offset of each unit in `responses`, plus a final end marker.
    offsets: Vec<usize>,
}

impl<'a> UnitPool<'a> {
    fn from_units(units: &'a [SamplingUnit]) -> Self {
        let mut responses = Vec::new();
        let mut offsets = vec![0];
        for u in units {
            responses.extend(u.responses.iter());
            offsets.push(responses.len());
        }
        UnitPool { responses, offsets }
    }

    fn from_responses(items: &'a [Response]) -> Self {
        UnitPool {
            responses: items.iter().collect(),
            offsets: (0..=items.len()).collect(),
        }
    }

    fn units(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Draws `b` units with replacement and one member uniformly from each.
    fn draw<R: Rng>(&self, b: usize, rng: &mut R) -> Vec<usize> {
        (0..b)
            .map(|_| {
                let u = rng.random_range(0..self.units());
                rng.random_range(self.offsets[u]..self.offsets[u + 1])
            })
            .collect()
    }

    fn source_label(&self) -> String {
        self.responses[0].source_key().to_string()
    }
}

/// Matched-sample bootstrap for one condition.
///
/// Each side's draws come from a stream keyed by `(seed, condition, source label, replicate)`,
/// so a source is resampled identically whichever side it is passed on.
pub fn bootstrap_condition(
    humans: &[SamplingUnit],
    models: &[Response],
    spec: &KernelSpec,
    cfg: &EstimatorConfig,
    table: Option<&EmbeddingTable>,
) -> Result<ConditionEstimate, EstimateError> {
    cfg.validate()?;
    let human_pool = UnitPool::from_units(humans);
    let model_pool = UnitPool::from_responses(models);
    bootstrap_pools(&human_pool, &model_pool, spec, cfg, table)
}

/// Same as [`bootstrap_condition`] with sampling units on both sides.
pub fn bootstrap_units(
    humans: &[SamplingUnit],
    models: &[SamplingUnit],
    spec: &KernelSpec,
    cfg: &EstimatorConfig,
    table: Option<&EmbeddingTable>,
) -> Result<ConditionEstimate, EstimateError> {
    cfg.validate()?;
    bootstrap_pools(
        &UnitPool::from_units(humans),
        &UnitPool::from_units(models),
        spec,
        cfg,
        table,
    )
}

fn bootstrap_pools(
    human_pool: &UnitPool<'_>,
    model_pool: &UnitPool<'_>,
    spec: &KernelSpec,
    cfg: &EstimatorConfig,
    table: Option<&EmbeddingTable>,
) -> Result<ConditionEstimate, EstimateError> {
    let condition = human_pool
        .responses
        .first()
        .or(model_pool.responses.first())
        .map(|r| r.condition_id.clone())
        .unwrap_or_default();
    for (side, pool) in [("human", human_pool), ("model", model_pool)] {
        if pool.units() < 2 {
            return Err(EstimateError::TooFewUnits {
                condition,
                side,
                found: pool.units(),
            });
        }
    }
    if let Some(r) = model_pool
        .responses
        .iter()
        .find(|r| r.condition_id != condition)
    {
        return Err(EstimateError::Mismatch {
            what: "condition",
            left: condition,
            right: r.condition_id.clone(),
        });
    }
    let task_family = human_pool.responses[0].task_family.clone();
    let human_label = human_pool.source_label();
    let model_label = model_pool.source_label();

    let human_matrix = KernelMatrix::build(&human_pool.responses, spec, table)?;
    let model_matrix = KernelMatrix::build(&model_pool.responses, spec, table)?;
    let b = human_pool.units().min(model_pool.units());

    let replicates: Vec<Replicate> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let mut hrng = stream_rng(cfg.seed, &[&condition, &human_label], r as u64);
            let mut mrng = stream_rng(cfg.seed, &[&condition, &model_label], r as u64);
            let kh = human_matrix.pairwise_mean(&human_pool.draw(b, &mut hrng));
            let ka = model_matrix.pairwise_mean(&model_pool.draw(b, &mut mrng));
            Replicate::new(kh, ka, cfg.kappa_h_ceiling)
        })
        .collect();

    let flagged = replicates.iter().filter(|r| r.rho.is_none()).count();
    if flagged as f64 > cfg.max_flagged_fraction * cfg.replicates as f64 || flagged == cfg.replicates
    {
        return Err(EstimateError::DegenerateHumanCrowding {
            condition,
            flagged,
            replicates: cfg.replicates,
        });
    }

    let estimate = summarize_replicates(&replicates, cfg.ci_level);
    let out = ConditionEstimate {
        condition_id: condition,
        task_family,
        human: human_label,
        model: model_label,
        b,
        kappa_h: estimate.kappa_h,
        kappa_a: estimate.kappa_a,
        delta: estimate.delta,
        delta_unclamped: estimate.delta_unclamped,
        rho: estimate.rho,
        flagged,
        ci_level: cfg.ci_level,
        seed: cfg.seed,
        replicates,
    };
    check_condition_invariants(&out);
    Ok(out)
}

struct Summaries {
    kappa_h: Estimate,
    kappa_a: Estimate,
    delta: Estimate,
    delta_unclamped: Estimate,
    rho: Estimate,
}

fn summarize_replicates(reps: &[Replicate], level: f64) -> Summaries {
    let col = |f: fn(&Replicate) -> f64| reps.iter().map(f).collect::<Vec<f64>>();
    let rhos: Vec<f64> = reps.iter().filter_map(|r| r.rho).collect();
    Summaries {
        kappa_h: summarize(&col(|r| r.kappa_h), level),
        kappa_a: summarize(&col(|r| r.kappa_a), level),
        delta: summarize(&col(|r| r.delta), level),
        delta_unclamped: summarize(&col(|r| r.delta_unclamped), level),
        rho: summarize(&rhos, level),
    }
}

fn check_condition_invariants(e: &ConditionEstimate) {
    for r in &e.replicates {
        if let Some(rho) = r.rho {
            assert_eq!(r.delta == 0.0, rho >= 1.0, "parity equivalence violated");
        }
        assert!(r.delta >= 0.0);
    }
    for k in [e.kappa_h.point, e.kappa_a.point] {
        assert!((0.0..=1.0).contains(&k), "crowding {k} outside [0, 1]");
    }
    assert!(e.delta.point >= 0.0 && e.rho.point.is_finite());
}

impl ConditionEstimate {
    /// Δ and ρ recomputed from the point crowding levels.
    pub fn plug_in(&self) -> Option<crate::adoption::ParityReport> {
        crate::adoption::parity_check(self.kappa_h.point, self.kappa_a.point).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyEstimate {
    pub task_family: String,
    pub model: String,
    pub conditions: Vec<ConditionEstimate>,
    pub kappa_h: Estimate,
    pub kappa_a: Estimate,
    /// Equal-weight mean of per-condition Δ (`delta_meanofconds`).
    pub delta: Estimate,
    pub delta_unclamped: Estimate,
    pub rho: Estimate,
    /// `max{0, κ̄ᴬ − κ̄ᴴ}` from the aggregated crowding levels.
    pub delta_of_aggregates: f64,
    /// `(1 − κ̄ᴬ) / (1 − κ̄ᴴ)` from the aggregated crowding levels.
    pub rho_of_aggregates: f64,
    pub replicates: usize,
    pub ci_level: f64,
    /// Equal-weight family value of each replicate, paired by index.
    #[serde(skip)]
    pub replicate_values: Vec<Replicate>,
}

/// Equal-weight aggregation across the conditions of one task family.
pub fn aggregate_family(
    conditions: Vec<ConditionEstimate>,
) -> Result<FamilyEstimate, EstimateError> {
    let first = conditions.first().ok_or(EstimateError::NothingToAggregate)?;
    let family = first.task_family.clone();
    let model = first.model.clone();
    let reps = first.replicates.len();
    let level = first.ci_level;
    for c in &conditions[1..] {
        if c.task_family != family {
            return Err(EstimateError::Mismatch {
                what: "task family",
                left: family,
                right: c.task_family.clone(),
            });
        }
        if c.replicates.len() != reps {
            return Err(EstimateError::Mismatch {
                what: "replicate count",
                left: reps.to_string(),
                right: c.replicates.len().to_string(),
            });
        }
    }

    let k = conditions.len() as f64;
    let replicate_values: Vec<Replicate> = (0..reps)
        .map(|r| {
            let mut acc = Replicate {
                kappa_h: 0.0,
                kappa_a: 0.0,
                delta: 0.0,
                delta_unclamped: 0.0,
                rho: Some(0.0),
            };
            for c in &conditions {
                let x = &c.replicates[r];
                acc.kappa_h += x.kappa_h / k;
                acc.kappa_a += x.kappa_a / k;
                acc.delta += x.delta / k;
                acc.delta_unclamped += x.delta_unclamped / k;
                acc.rho = acc.rho.zip(x.rho).map(|(a, b)| a + b / k);
            }
            acc
        })
        .collect();

    let point = |f: fn(&ConditionEstimate) -> f64| mean(&conditions.iter().map(f).collect::<Vec<_>>());
    let interval = |point: f64, draws: Vec<f64>| {
        let (lo, hi) = percentile_interval(&draws, level);
        Estimate {
            point,
            lo,
            hi,
            sd: std_dev(&draws),
        }
    };
    let col = |f: fn(&Replicate) -> f64| replicate_values.iter().map(f).collect::<Vec<f64>>();

    let kappa_h = interval(point(|c| c.kappa_h.point), col(|r| r.kappa_h));
    let kappa_a = interval(point(|c| c.kappa_a.point), col(|r| r.kappa_a));
    let delta = interval(point(|c| c.delta.point), col(|r| r.delta));
    let delta_unclamped = interval(
        point(|c| c.delta_unclamped.point),
        col(|r| r.delta_unclamped),
    );
    let rho_draws: Vec<f64> = replicate_values.iter().filter_map(|r| r.rho).collect();
    let rho = interval(point(|c| c.rho.point), rho_draws);
    let (delta_of_aggregates, rho_of_aggregates) = delta_and_rho(kappa_h.point, kappa_a.point);

    Ok(FamilyEstimate {
        task_family: family,
        model,
        conditions,
        kappa_h,
        kappa_a,
        delta,
        delta_unclamped,
        rho,
        delta_of_aggregates,
        rho_of_aggregates,
        replicates: reps,
        ci_level: level,
        replicate_values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProtocolDifference {
    /// `ρ_b − ρ_a`.
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Difference in family-level ρ between two protocols, `b` minus `a`.
pub fn compare_protocols(
    a: &FamilyEstimate,
    b: &FamilyEstimate,
) -> Result<ProtocolDifference, EstimateError> {
    if a.task_family != b.task_family {
        return Err(EstimateError::Mismatch {
            what: "task family",
            left: a.task_family.clone(),
            right: b.task_family.clone(),
        });
    }
    if a.replicate_values.len() != b.replicate_values.len() {
        return Err(EstimateError::Mismatch {
            what: "replicate count",
            left: a.replicate_values.len().to_string(),
            right: b.replicate_values.len().to_string(),
        });
    }
    let diffs: Vec<f64> = a
        .replicate_values
        .iter()
        .zip(&b.replicate_values)
        .filter_map(|(x, y)| Some(y.rho? - x.rho?))
        .collect();
    if diffs.is_empty() {
        return Err(EstimateError::NothingToAggregate);
    }
    let (lo, hi) = percentile_interval(&diffs, a.ci_level);
    Ok(ProtocolDifference {
        point: b.rho.point - a.rho.point,
        lo,
        hi,
    })
}

/// Average ranks (1-based), ties sharing the mean of their positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties.
///
/// Returns `Ok(None)` when either input is constant, where the correlation is undefined.
pub fn spearman_rank(xs: &[f64], ys: &[f64]) -> Result<Option<f64>, EstimateError> {
    if xs.len() != ys.len() {
        return Err(EstimateError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(EstimateError::TooFewItems(xs.len()));
    }
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    let (mx, my) = (mean(&rx), mean(&ry));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(None);
    }
    Ok(Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)))
}

/// Human units and model generations of one condition, ready for [`bootstrap_condition`].
pub fn condition_inputs(
    corpus: &crate::corpus::Corpus,
    model: &SourceKey,
    condition: &str,
) -> Result<(Vec<SamplingUnit>, Vec<Response>), crate::corpus::CorpusError> {
    let humans = crate::corpus::partition_units(corpus, &SourceKey::human(), condition)?;
    let models = crate::corpus::partition_units(corpus, model, condition)?
        .into_iter()
        .flat_map(|u| u.responses)
        .collect();
    Ok((humans, models))
}
