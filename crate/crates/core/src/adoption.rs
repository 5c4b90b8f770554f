//! Closed-form adoption-game quantities derived from excess crowding.
//!
//! A creator facing `X` other adopters of the same model-condition pays the redundancy cost
//! `γ (1 - e^{-XΔ})`. Adoption is rational when the private benefit exceeds that cost, so the
//! normalized critical benefit is `1 - e^{-XΔ}`. When each of `N - 1` peers adopts
//! independently with probability `p`, the expected cost is
//! `γ [1 - (1 - p + p e^{-Δ})^{N-1}]`.

use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::rng::stream_rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdoptionError {
    #[error("{name} must be {requirement}, got {value}")]
    InvalidParameter {
        name: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error("human crowding {0} must be below 1 for the diversity ratio to exist")]
    KappaHAtCeiling(f64),
    #[error("Monte Carlo needs at least {MIN_MC_TRIALS} trials, got {0}")]
    TooFewTrials(u64),
}

pub const MIN_MC_TRIALS: u64 = 10_000;

fn check(
    name: &'static str,
    value: f64,
    ok: bool,
    requirement: &'static str,
) -> Result<(), AdoptionError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(AdoptionError::InvalidParameter {
            name,
            requirement,
            value,
        })
    }
}

fn check_gamma(gamma: f64) -> Result<(), AdoptionError> {
    check("gamma", gamma, gamma >= 0.0, "nonnegative")
}

fn check_delta(delta: f64) -> Result<(), AdoptionError> {
    check("delta", delta, delta >= 0.0, "nonnegative")
}

fn check_prob(p: f64) -> Result<(), AdoptionError> {
    check("adoption probability", p, (0.0..=1.0).contains(&p), "in [0, 1]")
}

fn check_population(n: u64) -> Result<(), AdoptionError> {
    check("population", n as f64, n >= 1, "at least 1")
}

/// Excess crowding and the diversity ratio from the two crowding levels.
///
/// Δ is reported as zero exactly when ρ ≥ 1, so the parity equivalence holds bit-for-bit
/// rather than up to rounding in `1 - κ`.
pub(crate) fn delta_and_rho(kappa_h: f64, kappa_a: f64) -> (f64, f64) {
    let rho = (1.0 - kappa_a) / (1.0 - kappa_h);
    let delta = if rho >= 1.0 {
        0.0
    } else {
        (kappa_a - kappa_h).max(0.0)
    };
    (delta, rho)
}

/// `max{0, (1 - ρ)(1 - κᴴ)}`.
pub fn delta_from_rho(rho: f64, kappa_h: f64) -> Result<f64, AdoptionError> {
    check("rho", rho, true, "finite")?;
    check("kappa_h", kappa_h, kappa_h >= 0.0, "nonnegative")?;
    if kappa_h >= 1.0 {
        return Err(AdoptionError::KappaHAtCeiling(kappa_h));
    }
    Ok(((1.0 - rho) * (1.0 - kappa_h)).max(0.0))
}

/// `γ (1 - e^{-XΔ})`.
pub fn redundancy_cost(gamma: f64, delta: f64, exposure: u64) -> Result<f64, AdoptionError> {
    check_gamma(gamma)?;
    check_delta(delta)?;
    Ok(gamma * -(-(exposure as f64) * delta).exp_m1())
}

/// Critical private benefit as a fraction of γ: `1 - e^{-XΔ}`.
pub fn critical_benefit(delta: f64, exposure: u64) -> Result<f64, AdoptionError> {
    redundancy_cost(1.0, delta, exposure)
}

/// Expected redundancy cost with `X ~ Binomial(N - 1, p)`.
pub fn expected_cost(
    gamma: f64,
    delta: f64,
    population: u64,
    p: f64,
) -> Result<f64, AdoptionError> {
    check_gamma(gamma)?;
    check_delta(delta)?;
    check_population(population)?;
    check_prob(p)?;
    if p == 1.0 {
        return redundancy_cost(gamma, delta, population - 1);
    }
    // (1 - p + p e^{-Δ})^{N-1} computed through log1p/expm1 for small Δ and p.
    let log_base = (p * (-delta).exp_m1()).ln_1p();
    Ok(gamma * -((population - 1) as f64 * log_base).exp_m1())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: u64,
}

const MC_BLOCK: u64 = 8_192;

/// Monte Carlo estimate of [`expected_cost`] from binomial exposure draws.
///
/// Trials are split into fixed blocks, each with its own stream, and reduced in block order.
pub fn monte_carlo_expected_cost(
    gamma: f64,
    delta: f64,
    population: u64,
    p: f64,
    trials: u64,
    seed: u64,
) -> Result<MonteCarloEstimate, AdoptionError> {
    check_gamma(gamma)?;
    check_delta(delta)?;
    check_population(population)?;
    check_prob(p)?;
    if trials < MIN_MC_TRIALS {
        return Err(AdoptionError::TooFewTrials(trials));
    }
    // Exposure is deterministic at the endpoints.
    if p == 0.0 || p == 1.0 {
        let x = if p == 0.0 { 0 } else { population - 1 };
        return Ok(MonteCarloEstimate {
            mean: redundancy_cost(gamma, delta, x)?,
            std_error: 0.0,
            trials,
        });
    }
    let binom = Binomial::new(population - 1, p).expect("validated binomial parameters");
    let blocks = trials.div_ceil(MC_BLOCK);
    let partials: Vec<(f64, f64)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, &["expected-cost"], b);
            let count = MC_BLOCK.min(trials - b * MC_BLOCK);
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..count {
                let x = binom.sample(&mut rng);
                let c = gamma * -(-(x as f64) * delta).exp_m1();
                sum += c;
                sum_sq += c * c;
            }
            (sum, sum_sq)
        })
        .collect();
    let (sum, sum_sq) = partials
        .iter()
        .fold((0.0, 0.0), |(s, q), (bs, bq)| (s + bs, q + bq));
    let n = trials as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(MonteCarloEstimate {
        mean,
        std_error: (var / n).sqrt(),
        trials,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParityReport {
    pub delta: f64,
    pub rho: f64,
    pub parity: bool,
}

/// Δ and ρ from crowding levels, with the parity flag `ρ ≥ 1`.
pub fn parity_check(kappa_h: f64, kappa_a: f64) -> Result<ParityReport, AdoptionError> {
    check("kappa_h", kappa_h, kappa_h >= 0.0, "nonnegative")?;
    check("kappa_a", kappa_a, (0.0..=1.0).contains(&kappa_a), "in [0, 1]")?;
    if kappa_h >= 1.0 {
        return Err(AdoptionError::KappaHAtCeiling(kappa_h));
    }
    let (delta, rho) = delta_and_rho(kappa_h, kappa_a);
    let parity = rho >= 1.0;
    assert_eq!(delta == 0.0, parity, "parity equivalence violated");
    Ok(ParityReport { delta, rho, parity })
}

/// Inputs for evaluating one creator's adoption decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdoptionScenario {
    pub gamma: f64,
    pub delta: f64,
    pub exposure: u64,
    pub population: u64,
    pub adoption_prob: f64,
    pub private_benefit: f64,
}

impl AdoptionScenario {
    pub fn new(
        gamma: f64,
        delta: f64,
        exposure: u64,
        population: u64,
        adoption_prob: f64,
        private_benefit: f64,
    ) -> Result<Self, AdoptionError> {
        check_gamma(gamma)?;
        check_delta(delta)?;
        check_population(population)?;
        check_prob(adoption_prob)?;
        check("private benefit", private_benefit, true, "finite")?;
        Ok(AdoptionScenario {
            gamma,
            delta,
            exposure,
            population,
            adoption_prob,
            private_benefit,
        })
    }

    /// Builds the scenario from a diversity ratio and the human baseline crowding.
    pub fn from_rho(
        gamma: f64,
        rho: f64,
        kappa_h: f64,
        exposure: u64,
        population: u64,
        adoption_prob: f64,
        private_benefit: f64,
    ) -> Result<Self, AdoptionError> {
        let delta = delta_from_rho(rho, kappa_h)?;
        Self::new(
            gamma,
            delta,
            exposure,
            population,
            adoption_prob,
            private_benefit,
        )
    }

    pub fn redundancy_cost(&self) -> f64 {
        redundancy_cost(self.gamma, self.delta, self.exposure).expect("validated scenario")
    }

    pub fn critical_benefit(&self) -> f64 {
        self.gamma * critical_benefit(self.delta, self.exposure).expect("validated scenario")
    }

    pub fn expected_cost(&self) -> f64 {
        expected_cost(self.gamma, self.delta, self.population, self.adoption_prob)
            .expect("validated scenario")
    }

    /// Whether using the model is rational at the scenario's exposure.
    pub fn adopts(&self) -> bool {
        self.private_benefit > self.redundancy_cost()
    }
}
