//! Rarefaction curves: mean crowding of random subsamples as a function of subsample size.

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::corpus::{Response, SamplingUnit};
use crate::embedding::EmbeddingTable;
use crate::estimators::KernelMatrix;
use crate::kernels::{KernelError, KernelSpec};
use crate::rng::stream_rng;
use crate::stats::{mean, percentile_interval};

pub const DEFAULT_REPEATS: usize = 200;
pub const DEFAULT_GRID_STEP: usize = 5;
pub const DEFAULT_GRID_MAX: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RarefactionError {
    #[error("grid value {n} exceeds the {available} available sampling units")]
    GridExceedsUnits { n: usize, available: usize },
    #[error("grid must be non-empty, strictly increasing and start at 2 or more")]
    BadGrid,
    #[error("repeats must be at least 1")]
    NoRepeats,
    #[error("{0} is not on the curve grid")]
    NotOnGrid(usize),
    #[error("crowding at n = {0} is zero, relative drift is undefined")]
    ZeroDenominator(usize),
    #[error("curves to aggregate must share grid and repeat count")]
    IncompatibleCurves,
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub n: usize,
    /// Mean of the per-repeat pairwise means.
    pub mean: f64,
    /// Percentile band over repeats.
    pub lo: f64,
    pub hi: f64,
    #[serde(skip)]
    pub draws: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RarefactionCurve {
    pub label: String,
    pub points: Vec<CurvePoint>,
    pub repeats: usize,
    pub seed: u64,
    pub band_level: f64,
}

impl RarefactionCurve {
    pub fn grid(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.n).collect()
    }

    pub fn at(&self, n: usize) -> Option<&CurvePoint> {
        self.points.iter().find(|p| p.n == n)
    }
}

/// `{5, 10, ...}` up to `min(50, available)`, or just `available` when fewer than 5 units exist.
pub fn default_grid(available: usize) -> Vec<usize> {
    let top = available.min(DEFAULT_GRID_MAX);
    let grid: Vec<usize> = (1..)
        .map(|k| k * DEFAULT_GRID_STEP)
        .take_while(|&n| n <= top)
        .collect();
    if grid.is_empty() && available >= 2 {
        vec![available]
    } else {
        grid
    }
}

#[derive(Debug, Clone)]
pub struct RarefactionParams<'a> {
    pub grid: &'a [usize],
    pub repeats: usize,
    pub seed: u64,
    pub band_level: f64,
}

/// Rarefaction curve over sampling units, drawing units without replacement and one response
/// per drawn unit.
pub fn rarefaction_curve(
    units: &[SamplingUnit],
    spec: &KernelSpec,
    params: &RarefactionParams<'_>,
    table: Option<&EmbeddingTable>,
) -> Result<RarefactionCurve, RarefactionError> {
    let grid = params.grid;
    if grid.is_empty() || grid[0] < 2 || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(RarefactionError::BadGrid);
    }
    if params.repeats == 0 {
        return Err(RarefactionError::NoRepeats);
    }
    let max = *grid.last().expect("non-empty grid");
    if max > units.len() {
        return Err(RarefactionError::GridExceedsUnits {
            n: max,
            available: units.len(),
        });
    }

    let responses: Vec<&Response> = units.iter().flat_map(|u| u.responses.iter()).collect();
    let mut offsets = vec![0];
    for u in units {
        offsets.push(offsets.last().unwrap() + u.responses.len());
    }
    let matrix = KernelMatrix::build(&responses, spec, table)?;
    let first = responses[0];
    let label = first.source_key().to_string();
    let condition = first.condition_id.clone();

    let points = grid
        .iter()
        .map(|&n| {
            let n_label = n.to_string();
            let draws: Vec<f64> = (0..params.repeats)
                .into_par_iter()
                .map(|rep| {
                    let mut rng = stream_rng(
                        params.seed,
                        &["rarefaction", &condition, &label, &n_label],
                        rep as u64,
                    );
                    let mut chosen = sample(&mut rng, units.len(), n).into_vec();
                    chosen.sort_unstable();
                    let picks: Vec<usize> = chosen
                        .iter()
                        .map(|&u| rng.random_range(offsets[u]..offsets[u + 1]))
                        .collect();
                    matrix.pairwise_mean(&picks)
                })
                .collect();
            point_from_draws(n, draws, params.band_level)
        })
        .collect();

    Ok(RarefactionCurve {
        label,
        points,
        repeats: params.repeats,
        seed: params.seed,
        band_level: params.band_level,
    })
}

fn point_from_draws(n: usize, draws: Vec<f64>, level: f64) -> CurvePoint {
    let m = mean(&draws);
    let (lo, hi) = percentile_interval(&draws, level);
    // Heavily skewed draws can put the mean outside the percentile band; widen to cover it.
    CurvePoint {
        n,
        mean: m,
        lo: lo.min(m),
        hi: hi.max(m),
        draws,
    }
}

/// Equal-weight average of per-condition curves, pairing repeats by index.
pub fn aggregate_curves(
    label: impl Into<String>,
    curves: &[RarefactionCurve],
) -> Result<RarefactionCurve, RarefactionError> {
    let first = curves.first().ok_or(RarefactionError::IncompatibleCurves)?;
    let grid = first.grid();
    if curves
        .iter()
        .any(|c| c.grid() != grid || c.repeats != first.repeats)
    {
        return Err(RarefactionError::IncompatibleCurves);
    }
    let k = curves.len() as f64;
    let points = grid
        .iter()
        .enumerate()
        .map(|(gi, &n)| {
            let draws: Vec<f64> = (0..first.repeats)
                .map(|r| curves.iter().map(|c| c.points[gi].draws[r] / k).sum())
                .collect();
            point_from_draws(n, draws, first.band_level)
        })
        .collect();
    Ok(RarefactionCurve {
        label: label.into(),
        points,
        repeats: first.repeats,
        seed: first.seed,
        band_level: first.band_level,
    })
}

/// `|κ(high) − κ(low)| / |κ(high)|` as a percentage.
pub fn drift_percent(kappa_low: f64, kappa_high: f64) -> Result<f64, RarefactionError> {
    if kappa_high == 0.0 {
        return Err(RarefactionError::ZeroDenominator(0));
    }
    Ok((kappa_high - kappa_low).abs() / kappa_high.abs() * 100.0)
}

pub fn relative_drift(
    curve: &RarefactionCurve,
    n_low: usize,
    n_high: usize,
) -> Result<f64, RarefactionError> {
    let low = curve.at(n_low).ok_or(RarefactionError::NotOnGrid(n_low))?;
    let high = curve.at(n_high).ok_or(RarefactionError::NotOnGrid(n_high))?;
    drift_percent(low.mean, high.mean).map_err(|_| RarefactionError::ZeroDenominator(n_high))
}

/// The drift pair ending at the largest grid value: `n_high = max`, `n_low` the largest grid
/// value at most `n_high − span`.
pub fn drift_pair(grid: &[usize], span: usize) -> Option<(usize, usize)> {
    let high = *grid.last()?;
    let low = grid
        .iter()
        .rev()
        .copied()
        .find(|&n| n + span <= high)?;
    Some((low, high))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grids() {
        assert_eq!(default_grid(87), vec![5, 10, 15, 20, 25, 30, 35, 40, 45, 50]);
        assert_eq!(default_grid(35), vec![5, 10, 15, 20, 25, 30, 35]);
        assert_eq!(default_grid(12), vec![5, 10]);
        assert_eq!(default_grid(3), vec![3]);
        assert!(default_grid(1).is_empty());
    }

    #[test]
    fn drift_values() {
        let d = drift_percent(0.926871, 0.926327).unwrap();
        assert_eq!(format!("{d:.4}"), "0.0587");
        let d = drift_percent(0.701182, 0.687392).unwrap();
        assert_eq!(format!("{d:.4}"), "2.0061");
        assert_eq!(drift_percent(0.5, 0.5).unwrap(), 0.0);
        assert!(drift_percent(0.5, 0.0).is_err());
    }

    #[test]
    fn drift_pairs() {
        assert_eq!(drift_pair(&default_grid(87), 10), Some((40, 50)));
        assert_eq!(drift_pair(&default_grid(35), 10), Some((25, 35)));
        assert_eq!(drift_pair(&[5], 10), None);
    }
}
