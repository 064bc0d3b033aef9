//! Discrete beliefs, semantic regions and partitions, and the divergences
//! between beliefs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `Σ p_i = 1` when a belief is constructed.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// A probability vector over a finite alphabet `{0, …, n-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBelief", into = "RawBelief")]
pub struct DiscreteBelief {
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawBelief {
    probs: Vec<f64>,
}

impl TryFrom<RawBelief> for DiscreteBelief {
    type Error = Error;

    fn try_from(raw: RawBelief) -> Result<Self> {
        DiscreteBelief::new(raw.probs)
    }
}

impl From<DiscreteBelief> for RawBelief {
    fn from(b: DiscreteBelief) -> Self {
        RawBelief { probs: b.probs }
    }
}

impl DiscreteBelief {
    /// Validates nonnegativity and normalization. Inputs are never renormalized.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid("probs", "belief needs at least one state"));
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !(p.is_finite() && **p >= 0.0))
        {
            return Err(Error::invalid(
                "probs",
                format!("entry {i} = {p} is not a finite nonnegative number"),
            ));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized {
                sum,
                tol: NORMALIZATION_TOL,
            });
        }
        Ok(DiscreteBelief { probs })
    }

    /// Skips validation; for vectors produced by exact reweighting of a valid belief.
    pub(crate) fn from_trusted(probs: Vec<f64>) -> Self {
        debug_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        DiscreteBelief { probs }
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("probs", "belief needs at least one state"));
        }
        Ok(DiscreteBelief {
            probs: vec![1.0 / n as f64; n],
        })
    }

    pub fn point_mass(n: usize, state: usize) -> Result<Self> {
        if state >= n {
            return Err(Error::IndexOutOfRange {
                index: state,
                size: n,
            });
        }
        let mut probs = vec![0.0; n];
        probs[state] = 1.0;
        Ok(DiscreteBelief { probs })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// A set of state indices sharing one interpretation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "Vec<usize>", into = "Vec<usize>")]
pub struct Region {
    members: Vec<usize>,
}

impl From<Vec<usize>> for Region {
    fn from(members: Vec<usize>) -> Self {
        Region::new(members)
    }
}

impl From<Region> for Vec<usize> {
    fn from(r: Region) -> Self {
        r.members
    }
}

impl Region {
    /// Members are stored sorted and deduplicated.
    pub fn new(mut members: Vec<usize>) -> Self {
        members.sort_unstable();
        members.dedup();
        Region { members }
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, state: usize) -> bool {
        self.members.binary_search(&state).is_ok()
    }

    pub fn check(&self, alphabet_size: usize) -> Result<()> {
        match self.members.last() {
            Some(&max) if max >= alphabet_size => Err(Error::IndexOutOfRange {
                index: max,
                size: alphabet_size,
            }),
            _ => Ok(()),
        }
    }

    /// States of `{0, …, n-1}` not in this region.
    pub fn complement(&self, alphabet_size: usize) -> Region {
        Region {
            members: (0..alphabet_size).filter(|s| !self.contains(*s)).collect(),
        }
    }
}

/// Disjoint regions covering the whole alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPartition", into = "RawPartition")]
pub struct SemanticPartition {
    regions: Vec<Region>,
    alphabet_size: usize,
}

#[derive(Serialize, Deserialize)]
struct RawPartition {
    regions: Vec<Vec<usize>>,
}

impl TryFrom<RawPartition> for SemanticPartition {
    type Error = Error;

    fn try_from(raw: RawPartition) -> Result<Self> {
        let n = raw.regions.iter().map(Vec::len).sum();
        SemanticPartition::new(raw.regions.into_iter().map(Region::new).collect(), n)
    }
}

impl From<SemanticPartition> for RawPartition {
    fn from(p: SemanticPartition) -> Self {
        RawPartition {
            regions: p.regions.into_iter().map(Vec::from).collect(),
        }
    }
}

impl SemanticPartition {
    pub fn new(regions: Vec<Region>, alphabet_size: usize) -> Result<Self> {
        if regions.is_empty() {
            return Err(Error::invalid(
                "regions",
                "partition needs at least one region",
            ));
        }
        if alphabet_size == 0 {
            return Err(Error::invalid("regions", "alphabet must be nonempty"));
        }
        let mut owner = vec![None; alphabet_size];
        for (a, region) in regions.iter().enumerate() {
            region.check(alphabet_size)?;
            for &s in region.members() {
                if let Some(prev) = owner[s] {
                    return Err(Error::invalid(
                        "regions",
                        format!("state {s} belongs to regions {prev} and {a}"),
                    ));
                }
                owner[s] = Some(a);
            }
        }
        if let Some(s) = owner.iter().position(Option::is_none) {
            return Err(Error::invalid(
                "regions",
                format!("state {s} is not covered by any region"),
            ));
        }
        Ok(SemanticPartition {
            regions,
            alphabet_size,
        })
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    /// Region index owning each state.
    pub fn labels(&self) -> Vec<usize> {
        let mut labels = vec![0; self.alphabet_size];
        for (a, region) in self.regions.iter().enumerate() {
            for &s in region.members() {
                labels[s] = a;
            }
        }
        labels
    }

    pub(crate) fn check_belief(&self, p: &DiscreteBelief) -> Result<()> {
        if p.len() != self.alphabet_size {
            return Err(Error::SizeMismatch {
                expected: self.alphabet_size,
                actual: p.len(),
            });
        }
        Ok(())
    }
}

fn check_same_alphabet(p: &DiscreteBelief, q: &DiscreteBelief) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::SizeMismatch {
            expected: p.len(),
            actual: q.len(),
        });
    }
    Ok(())
}

/// `p(A)`, clamped into `[0, 1]` against summation rounding.
pub fn region_mass(p: &DiscreteBelief, region: &Region) -> Result<f64> {
    region.check(p.len())?;
    let mass: f64 = region.members().iter().map(|&s| p.probs[s]).sum();
    Ok(mass.clamp(0.0, 1.0))
}

/// `Γ_A(p) = 1 - p(A)`.
pub fn region_ambiguity(p: &DiscreteBelief, region: &Region) -> Result<f64> {
    Ok(1.0 - region_mass(p, region)?)
}

/// Masses of every region of the partition, in partition order.
pub fn region_masses(p: &DiscreteBelief, partition: &SemanticPartition) -> Result<Vec<f64>> {
    partition.check_belief(p)?;
    partition
        .regions()
        .iter()
        .map(|r| region_mass(p, r))
        .collect()
}

/// `Γ(p) = 1 - max_a p(A_a)`: the mass outside the most likely region.
pub fn ambiguity(p: &DiscreteBelief, partition: &SemanticPartition) -> Result<f64> {
    let masses = region_masses(p, partition)?;
    let max = masses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(1.0 - max)
}

/// Index of the most likely region; ties go to the lowest index.
pub fn most_likely_region(p: &DiscreteBelief, partition: &SemanticPartition) -> Result<usize> {
    let masses = region_masses(p, partition)?;
    let mut best = 0;
    for (a, &m) in masses.iter().enumerate().skip(1) {
        if m > masses[best] {
            best = a;
        }
    }
    Ok(best)
}

/// `D(p ‖ q)` in nats. Returns `+∞` when `p` is not absolutely continuous
/// with respect to `q`.
pub fn kl_divergence(p: &DiscreteBelief, q: &DiscreteBelief) -> Result<f64> {
    check_same_alphabet(p, q)?;
    let mut total = 0.0;
    for (&pi, &qi) in p.probs.iter().zip(&q.probs) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Ok(f64::INFINITY);
        }
        total += pi * (pi / qi).ln();
    }
    // Rounding can leave a tiny negative total when p ≈ q.
    Ok(total.max(0.0))
}

/// `d_bin(u ‖ r)`: KL divergence between Bernoulli(u) and Bernoulli(r).
pub fn binary_divergence(u: f64, r: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::domain(
            "binary_divergence",
            format!("u = {u} not in [0, 1]"),
        ));
    }
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::domain(
            "binary_divergence",
            format!("r = {r} must lie strictly inside (0, 1)"),
        ));
    }
    let term = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a * (a / b).ln() };
    Ok((term(u, r) + term(1.0 - u, 1.0 - r)).max(0.0))
}

/// `d_TV(p, q) = ½ Σ |p_i - q_i|`.
pub fn total_variation(p: &DiscreteBelief, q: &DiscreteBelief) -> Result<f64> {
    check_same_alphabet(p, q)?;
    let sum: f64 = p
        .probs
        .iter()
        .zip(&q.probs)
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok((0.5 * sum).min(1.0))
}
