//! Repeated sampling: exact binomial tails for the binary statistic `p_k(A)`,
//! the fitted large-deviation rate, seeded Monte Carlo over a partition, and
//! the exponential decay model behind generative resolvability.
//!
//! Sampling from `p₀` makes *low* ambiguity the rare event: the probability
//! that the empirical mass of `A` reaches `q > p₀(A)` decays like
//! `exp(-k·d_bin(q ‖ p₀(A)))`. That rate is what [`sanov_rate_check`] fits.
//! All reported bounds drop the sub-exponential corrections and are
//! asymptotic statements.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::factorial::ln_binomial;

use crate::beliefs::{binary_divergence, DiscreteBelief, SemanticPartition};
use crate::error::{Error, Result};
use crate::resolution::AmbiguityTarget;

pub const MAX_SAMPLES: u64 = 1_000_000;

/// Floors below the smallest normal double count as zero.
pub const FLOOR_ZERO_TOL: f64 = f64::MIN_POSITIVE;

/// Smallest count `c` with `c ≥ q·k`. Products within 1e-9 of an integer
/// are snapped so that e.g. `0.7 · 100` gives 70, not 71.
pub fn lattice_threshold(q: f64, k: u64) -> u64 {
    let x = q * k as f64;
    let nearest = x.round();
    if (x - nearest).abs() <= 1e-9 * x.abs().max(1.0) {
        nearest as u64
    } else {
        x.ceil() as u64
    }
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

fn log_binomial_pmf(k: u64, j: u64, ln_r: f64, ln_1mr: f64) -> f64 {
    ln_binomial(k, j) + j as f64 * ln_r + (k - j) as f64 * ln_1mr
}

fn check_binomial_args(op: &'static str, k: u64, r: f64) -> Result<()> {
    if k == 0 || k > MAX_SAMPLES {
        return Err(Error::domain(
            op,
            format!("k = {k} must lie in [1, {MAX_SAMPLES}]"),
        ));
    }
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::domain(
            op,
            format!("r = {r} must lie strictly inside (0, 1)"),
        ));
    }
    Ok(())
}

/// `ln P(X ≥ ⌈qk⌉)` for `X ~ Binomial(k, r)`, summed in log space.
pub fn binomial_tail_exact(k: u64, r: f64, q: f64) -> Result<f64> {
    check_binomial_args("binomial_tail_exact", k, r)?;
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::domain(
            "binomial_tail_exact",
            format!("q = {q} must lie in (0, 1]"),
        ));
    }
    let c = lattice_threshold(q, k);
    let (ln_r, ln_1mr) = (r.ln(), (-r).ln_1p());
    let terms: Vec<f64> = (c..=k)
        .map(|j| log_binomial_pmf(k, j, ln_r, ln_1mr))
        .collect();
    Ok(log_sum_exp(&terms).min(0.0))
}

/// `ln P(max(X, k-X) ≥ ⌈qk⌉)` for `X ~ Binomial(k, r)`: the probability that
/// the empirical belief over a two-region partition has ambiguity at most
/// `1 - q`.
pub fn binary_low_ambiguity_exact(k: u64, r: f64, q: f64) -> Result<f64> {
    check_binomial_args("binary_low_ambiguity_exact", k, r)?;
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::domain(
            "binary_low_ambiguity_exact",
            format!("q = {q} must lie in [0, 1]"),
        ));
    }
    let c = lattice_threshold(q, k);
    let (ln_r, ln_1mr) = (r.ln(), (-r).ln_1p());
    let terms: Vec<f64> = (0..=k)
        .filter(|&j| j >= c || k - j >= c)
        .map(|j| log_binomial_pmf(k, j, ln_r, ln_1mr))
        .collect();
    Ok(log_sum_exp(&terms).min(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateEstimate {
    pub k_values: Vec<u64>,
    pub log_probs: Vec<f64>,
    /// Least-squares slope of `-ln P` against `k`.
    pub fitted_rate: f64,
    /// `d_bin(q ‖ r)`.
    pub theoretical_rate: f64,
}

impl RateEstimate {
    pub fn relative_gap(&self) -> f64 {
        (self.fitted_rate - self.theoretical_rate).abs() / self.theoretical_rate
    }
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}

/// Fits the decay rate of `P(p_k(A) ≥ q)` under sampling with `p₀(A) = r`
/// and compares it with `d_bin(q ‖ r)`.
pub fn sanov_rate_check(r: f64, q: f64, k_grid: &[u64]) -> Result<RateEstimate> {
    if !(q > r) {
        return Err(Error::domain(
            "sanov_rate_check",
            format!("need q > r, got q = {q}, r = {r}"),
        ));
    }
    if k_grid.len() < 3 {
        return Err(Error::invalid("k_grid", "need at least three sample sizes"));
    }
    if k_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(
            "k_grid",
            "sample sizes must be strictly ascending",
        ));
    }
    let log_probs = k_grid
        .iter()
        .map(|&k| binomial_tail_exact(k, r, q))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = k_grid.iter().map(|&k| k as f64).collect();
    let ys: Vec<f64> = log_probs.iter().map(|l| -l).collect();
    Ok(RateEstimate {
        k_values: k_grid.to_vec(),
        log_probs,
        fitted_rate: least_squares_slope(&xs, &ys),
        theoretical_rate: binary_divergence(q, r)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloEstimate {
    /// Fraction of batches whose empirical belief has `Γ(p_k) ≤ ε`.
    pub frequency: f64,
    /// Binomial standard error `√(f(1-f)/trials)`.
    pub std_error: f64,
    pub successes: u64,
    pub trials: u64,
}

/// Generator for one trial: the seed picks the key, the trial index the stream.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Draws `trials` batches of `k` states from `p₀`, forms each empirical
/// belief and counts how often its ambiguity is at most `ε`.
///
/// Trial `i` uses its own ChaCha stream, so the result does not depend on the
/// thread count and is reproducible for a fixed seed.
pub fn monte_carlo_ambiguity(
    p0: &DiscreteBelief,
    partition: &SemanticPartition,
    target: AmbiguityTarget,
    k: u64,
    trials: u64,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    if p0.len() != partition.alphabet_size() {
        return Err(Error::SizeMismatch {
            expected: partition.alphabet_size(),
            actual: p0.len(),
        });
    }
    if k == 0 || trials == 0 {
        return Err(Error::invalid("trials", "k and trials must be positive"));
    }
    let labels = partition.labels();
    let n_regions = partition.regions().len();
    let mut cumulative = Vec::with_capacity(p0.len());
    let mut acc = 0.0;
    for &p in p0.probs() {
        acc += p;
        cumulative.push(acc);
    }
    let last_state = p0.probs().iter().rposition(|&p| p > 0.0).unwrap_or(0);
    let needed = lattice_threshold(target.required_mass(), k);

    let successes: u64 = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial);
            let mut counts = vec![0u64; n_regions];
            for _ in 0..k {
                let u: f64 = rng.random();
                let state = cumulative.partition_point(|&c| c <= u).min(last_state);
                counts[labels[state]] += 1;
            }
            u64::from(counts.iter().copied().max().unwrap_or(0) >= needed)
        })
        .sum();

    let frequency = successes as f64 / trials as f64;
    Ok(MonteCarloEstimate {
        frequency,
        std_error: (frequency * (1.0 - frequency) / trials as f64).sqrt(),
        successes,
        trials,
    })
}

/// `k_min ≳ ln(1/ε) / I`, the sample count the ambiguity exponent implies.
pub fn sample_complexity_lower_bound(info_nats: f64, target: AmbiguityTarget) -> Result<f64> {
    if !(info_nats > 0.0) {
        return Err(Error::domain(
            "sample_complexity_lower_bound",
            format!("information {info_nats} must be positive"),
        ));
    }
    let eps = target.epsilon();
    if eps <= 0.0 {
        return Err(Error::domain(
            "sample_complexity_lower_bound",
            "epsilon must lie in (0, 1)",
        ));
    }
    Ok(-eps.ln() / info_nats)
}

/// `Γ(p_k) = max(floor, Γ₀·exp(-c·k·I_sample))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayModel {
    pub gamma0: f64,
    pub c: f64,
    pub info_per_sample: f64,
    pub floor: f64,
}

impl DecayModel {
    pub fn new(gamma0: f64, c: f64, info_per_sample: f64, floor: f64) -> Result<Self> {
        if !(gamma0 > 0.0 && gamma0 <= 1.0) {
            return Err(Error::invalid(
                "gamma0",
                format!("{gamma0} must lie in (0, 1]"),
            ));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::invalid("c", format!("{c} must be positive")));
        }
        if !(info_per_sample >= 0.0 && info_per_sample.is_finite()) {
            return Err(Error::invalid(
                "info_per_sample",
                format!("{info_per_sample} must be nonnegative"),
            ));
        }
        if !(0.0..=1.0).contains(&floor) {
            return Err(Error::invalid(
                "floor",
                format!("{floor} must lie in [0, 1]"),
            ));
        }
        Ok(DecayModel {
            gamma0,
            c,
            info_per_sample,
            floor,
        })
    }

    pub fn is_degenerate(&self) -> bool {
        self.floor >= self.gamma0
    }
}

pub fn decay_model_ambiguity(model: &DecayModel, k: u64) -> f64 {
    let decayed = model.gamma0 * (-model.c * k as f64 * model.info_per_sample).exp();
    decayed.max(model.floor)
}

/// Upper bound on generative resolvability implied by an ambiguity floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ResolvabilityBound {
    Finite {
        nats: f64,
    },
    /// The floor vanishes; ambiguity can be driven to zero.
    Unbounded,
    /// The floor is at or above the starting ambiguity; nothing is resolvable.
    Degenerate,
}

impl ResolvabilityBound {
    /// `(1/c) ln(Γ₀ / floor)` with the edge cases above.
    pub fn from_floor(gamma0: f64, floor: f64, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::domain(
                "resolvability bound",
                format!("c = {c} must be positive"),
            ));
        }
        if !(gamma0 > 0.0 && gamma0 <= 1.0) {
            return Err(Error::domain(
                "resolvability bound",
                format!("gamma0 = {gamma0} must lie in (0, 1]"),
            ));
        }
        if floor < FLOOR_ZERO_TOL {
            return Ok(ResolvabilityBound::Unbounded);
        }
        if floor >= gamma0 {
            return Ok(ResolvabilityBound::Degenerate);
        }
        Ok(ResolvabilityBound::Finite {
            nats: (gamma0 / floor).ln() / c,
        })
    }

    /// Bound in nats: `+∞` when unbounded, 0 when degenerate.
    pub fn value(&self) -> f64 {
        match self {
            ResolvabilityBound::Finite { nats } => *nats,
            ResolvabilityBound::Unbounded => f64::INFINITY,
            ResolvabilityBound::Degenerate => 0.0,
        }
    }
}

pub fn resolvability_bound(model: &DecayModel) -> ResolvabilityBound {
    ResolvabilityBound::from_floor(model.gamma0, model.floor, model.c)
        .expect("DecayModel fields are validated on construction")
}
