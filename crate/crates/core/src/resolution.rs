//! Unconstrained resolution information over a finite alphabet.
//!
//! When the receiver may adopt any posterior, the cheapest way (in KL) to put
//! mass `q = 1 - ε` on a region `A` is to rescale the prior by one constant on
//! `A` and another on its complement. The cost then depends only on the prior
//! mass `p₀(A)` and equals the binary divergence `d_bin(q ‖ p₀(A))`. Over a
//! partition the answer is the cheapest region.
//!
//! [`brute_force_projection`] solves the same problem numerically without
//! using the closed form and is kept as an independent check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::beliefs::{
    binary_divergence, kl_divergence, region_ambiguity, region_mass, region_masses, DiscreteBelief,
    Region, SemanticPartition,
};
use crate::error::{Error, Result};

/// Target ambiguity level `ε ∈ [0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AmbiguityTarget {
    epsilon: f64,
}

impl AmbiguityTarget {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&epsilon) {
            return Err(Error::domain(
                "AmbiguityTarget::new",
                format!("epsilon = {epsilon} must lie in [0, 1)"),
            ));
        }
        Ok(AmbiguityTarget { epsilon })
    }

    pub fn epsilon(self) -> f64 {
        self.epsilon
    }

    /// Required posterior mass on the target region, `1 - ε`.
    pub fn required_mass(self) -> f64 {
        1.0 - self.epsilon
    }
}

/// Outcome of a partition-level projection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolutionResult {
    pub info_nats: f64,
    pub achieving_posterior: Option<DiscreteBelief>,
    pub binding_region_index: Option<usize>,
    pub feasible_at_prior: bool,
}

fn check_interior_mass(op: &'static str, mass: f64) -> Result<()> {
    if mass > 0.0 && mass < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(
            op,
            format!("prior mass {mass} must lie strictly inside (0, 1)"),
        ))
    }
}

/// Minimum KL update that raises a region of prior mass `prior_mass` to at
/// least `1 - ε`: `d_bin(1-ε ‖ p₀(A))` when that exceeds the prior, else 0.
pub fn resolution_info_region(prior_mass: f64, target: AmbiguityTarget) -> Result<f64> {
    check_interior_mass("resolution_info_region", prior_mass)?;
    let q = target.required_mass();
    if q > prior_mass {
        binary_divergence(q, prior_mass)
    } else {
        Ok(0.0)
    }
}

/// The minimizing posterior: the prior rescaled by `q / p₀(A)` on `A` and by
/// `(1-q) / (1-p₀(A))` off it, with `q = max(1-ε, p₀(A))`.
pub fn optimal_posterior(
    p0: &DiscreteBelief,
    region: &Region,
    target: AmbiguityTarget,
) -> Result<DiscreteBelief> {
    let mass = region_mass(p0, region)?;
    check_interior_mass("optimal_posterior", mass)?;
    let q = target.required_mass().max(mass);
    if q == mass {
        return Ok(p0.clone());
    }
    let inside = q / mass;
    let outside = (1.0 - q) / (1.0 - mass);
    let probs = p0
        .probs()
        .iter()
        .enumerate()
        .map(|(s, &p)| {
            if region.contains(s) {
                inside * p
            } else {
                outside * p
            }
        })
        .collect();
    Ok(DiscreteBelief::from_trusted(probs))
}

/// Resolution information for a whole partition: the cheapest region wins,
/// ties going to the lowest region index.
pub fn resolution_info_partition(
    p0: &DiscreteBelief,
    partition: &SemanticPartition,
    target: AmbiguityTarget,
) -> Result<ResolutionResult> {
    let masses = region_masses(p0, partition)?;
    let eps = target.epsilon();

    if let Some(a) = masses.iter().position(|&m| 1.0 - m <= eps) {
        return Ok(ResolutionResult {
            info_nats: 0.0,
            achieving_posterior: Some(p0.clone()),
            binding_region_index: Some(a),
            feasible_at_prior: true,
        });
    }

    let mut best: Option<(usize, f64)> = None;
    for (a, &mass) in masses.iter().enumerate() {
        if !(mass > 0.0 && mass < 1.0) {
            return Err(Error::DegenerateRegion { region: a, mass });
        }
        let info = resolution_info_region(mass, target)?;
        if best.is_none_or(|(_, b)| info < b) {
            best = Some((a, info));
        }
    }
    let (a, info) = best.expect("partition has at least one region");
    let posterior = optimal_posterior(p0, &partition.regions()[a], target)?;
    Ok(ResolutionResult {
        info_nats: info,
        achieving_posterior: Some(posterior),
        binding_region_index: Some(a),
        feasible_at_prior: false,
    })
}

/// Settings for [`brute_force_projection`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionConfig {
    pub restarts: usize,
    /// Stop once one sweep improves the objective by less than this.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub seed: u64,
    /// Lattice spacing of the grid search used when descent fails (n ≤ 4).
    pub grid_resolution: f64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig {
            restarts: 10,
            tolerance: 1e-10,
            max_iterations: 20_000,
            seed: 0x5eed,
            grid_resolution: 1e-3,
        }
    }
}

/// Largest alphabet the numerical oracle accepts.
pub const ORACLE_MAX_ALPHABET: usize = 8;

/// Numerically minimizes `D(p ‖ p₀)` over `{p : p(A) ≥ 1-ε}`.
///
/// Every feasible `p` is written as `t·u ⊕ (1-t)·v` with `t = p(A) ∈ [q, 1)`,
/// `u` a distribution on `A` and `v` one on its complement. The shape
/// vectors take entropic mirror-descent steps and `t` takes projected Newton
/// steps; the best of several random restarts is returned. If no restart
/// converges and the alphabet has at most four states, a lattice search over
/// the simplex is used instead.
pub fn brute_force_projection(
    p0: &DiscreteBelief,
    region: &Region,
    target: AmbiguityTarget,
    config: &ProjectionConfig,
) -> Result<f64> {
    let n = p0.len();
    if n > ORACLE_MAX_ALPHABET {
        return Err(Error::domain(
            "brute_force_projection",
            format!("alphabet of size {n} exceeds oracle limit {ORACLE_MAX_ALPHABET}"),
        ));
    }
    if region_ambiguity(p0, region)? <= target.epsilon() {
        return Ok(0.0);
    }
    // States with zero prior mass must carry zero posterior mass.
    let (inside, outside): (Vec<usize>, Vec<usize>) = (0..n)
        .filter(|&s| p0.probs()[s] > 0.0)
        .partition(|&s| region.contains(s));
    if inside.is_empty() {
        return Ok(f64::INFINITY);
    }

    let q = target.required_mass();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut best = f64::INFINITY;
    let mut best_unconverged = f64::INFINITY;
    for _ in 0..config.restarts.max(1) {
        match descend(p0.probs(), &inside, &outside, q, config, &mut rng) {
            (value, true) => best = best.min(value),
            (value, false) => best_unconverged = best_unconverged.min(value),
        }
    }
    if best.is_finite() {
        return Ok(best);
    }
    if n <= 4 {
        return grid_search_projection(p0, region, target, config.grid_resolution);
    }
    Err(Error::ConvergenceFailure {
        iterations: config.max_iterations,
        best: best_unconverged,
    })
}

fn random_simplex(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| rng.random::<f64>() + 0.05).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

fn objective(
    prior: &[f64],
    inside: &[usize],
    outside: &[usize],
    t: f64,
    u: &[f64],
    v: &[f64],
) -> f64 {
    let part = |states: &[usize], scale: f64, w: &[f64]| -> f64 {
        states
            .iter()
            .zip(w)
            .filter(|(_, &wi)| wi > 0.0)
            .map(|(&s, &wi)| {
                let p = scale * wi;
                p * (p / prior[s]).ln()
            })
            .sum::<f64>()
    };
    part(inside, t, u) + part(outside, 1.0 - t, v)
}

/// Entropic mirror step `w ← w·exp(-step·g)`, renormalized, where `g` is the
/// log-ratio of the current posterior to the prior on these states. The
/// partial gradient is `scale·(g + 1)`; dividing by the curvature `scale`
/// leaves `g`, so `step` is dimensionless.
fn mirror_step(states: &[usize], prior: &[f64], scale: f64, w: &mut [f64], step: f64) {
    let logs: Vec<f64> = states
        .iter()
        .zip(w.iter())
        .map(|(&s, &wi)| -step * (scale * wi / prior[s]).ln())
        .collect();
    let shift = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (wi, l) in w.iter_mut().zip(&logs) {
        *wi *= (l - shift).exp();
        total += *wi;
    }
    for wi in w.iter_mut() {
        *wi /= total;
    }
}

fn descend(
    prior: &[f64],
    inside: &[usize],
    outside: &[usize],
    q: f64,
    config: &ProjectionConfig,
    rng: &mut ChaCha8Rng,
) -> (f64, bool) {
    const STEP: f64 = 0.5;
    let t_max = if outside.is_empty() { 1.0 } else { 1.0 - 1e-12 };
    let mut u = random_simplex(inside.len(), rng);
    let mut v = random_simplex(outside.len(), rng);
    let mut t = q + (t_max - q) * rng.random::<f64>();

    let mut current = objective(prior, inside, outside, t, &u, &v);
    for _ in 0..config.max_iterations {
        mirror_step(inside, prior, t, &mut u, STEP);
        if !outside.is_empty() {
            mirror_step(outside, prior, 1.0 - t, &mut v, STEP);

            let log_ratio = |states: &[usize], scale: f64, w: &[f64]| -> f64 {
                states
                    .iter()
                    .zip(w)
                    .map(|(&s, &wi)| wi * (scale * wi / prior[s]).ln())
                    .sum::<f64>()
            };
            let grad = log_ratio(inside, t, &u) - log_ratio(outside, 1.0 - t, &v);
            let curvature = 1.0 / t + 1.0 / (1.0 - t);
            t = (t - grad / curvature).clamp(q, t_max);
        }

        let next = objective(prior, inside, outside, t, &u, &v);
        if !next.is_finite() {
            return (f64::INFINITY, false);
        }
        let improvement = current - next;
        current = next;
        if improvement.abs() < config.tolerance {
            return (current.max(0.0), true);
        }
    }
    (current.max(0.0), false)
}

/// Exhaustive search over the lattice `{k·h}` of the simplex (alphabets ≤ 4).
pub fn grid_search_projection(
    p0: &DiscreteBelief,
    region: &Region,
    target: AmbiguityTarget,
    resolution: f64,
) -> Result<f64> {
    let n = p0.len();
    if n > 4 {
        return Err(Error::domain(
            "grid_search_projection",
            format!("alphabet of size {n} is too large for a lattice search"),
        ));
    }
    if !(resolution > 0.0 && resolution <= 0.5) {
        return Err(Error::domain(
            "grid_search_projection",
            format!("resolution {resolution} must lie in (0, 0.5]"),
        ));
    }
    region.check(n)?;
    let steps = (1.0 / resolution).round() as usize;
    let q = target.required_mass();
    let mut best = f64::INFINITY;
    let mut counts = vec![0usize; n];
    let mut p = vec![0.0; n];
    lattice_walk(0, steps, &mut counts, &mut |counts| {
        let mut mass = 0.0;
        for (s, &c) in counts.iter().enumerate() {
            p[s] = c as f64 / steps as f64;
            if region.contains(s) {
                mass += p[s];
            }
        }
        if mass + 1e-12 < q {
            return;
        }
        let candidate = DiscreteBelief::from_trusted(p.clone());
        if let Ok(kl) = kl_divergence(&candidate, p0) {
            best = best.min(kl);
        }
    });
    Ok(best)
}

fn lattice_walk(
    pos: usize,
    remaining: usize,
    counts: &mut [usize],
    visit: &mut dyn FnMut(&[usize]),
) {
    if pos + 1 == counts.len() {
        counts[pos] = remaining;
        visit(counts);
        return;
    }
    for c in 0..=remaining {
        counts[pos] = c;
        lattice_walk(pos + 1, remaining - c, counts, visit);
    }
}
