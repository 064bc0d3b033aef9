//! Resolution information when posteriors are restricted to Gaussians.
//!
//! Two region shapes are covered. A half-space only constrains one projected
//! coordinate, so shifting the mean can push its ambiguity to zero. An orthant
//! polytope `{s : s_i ≤ a}` needs concentration along `m` directions at once;
//! with a lower bound `σ_min` on the posterior scale the achievable mass tops
//! out at `Φ(a/σ_min)^m` and the remaining ambiguity is a hard floor.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::large_deviations::ResolvabilityBound;
use crate::resolution::AmbiguityTarget;
use crate::special::{log_std_normal_cdf, std_normal_cdf, std_normal_quantile, Probability};

pub const SYMMETRY_TOL: f64 = 1e-10;

/// `N(μ, Σ)` with `Σ` symmetric positive definite. The Cholesky factor is kept.
#[derive(Debug, Clone)]
pub struct GaussianBelief {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

#[derive(Serialize, Deserialize)]
struct RawGaussian {
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

impl<'de> Deserialize<'de> for GaussianBelief {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawGaussian::deserialize(d)?;
        let n = raw.mean.len();
        if raw.cov.len() != n || raw.cov.iter().any(|row| row.len() != n) {
            return Err(serde::de::Error::custom(format!(
                "cov must be a {n}x{n} matrix to match mean"
            )));
        }
        let cov = DMatrix::from_fn(n, n, |i, j| raw.cov[i][j]);
        GaussianBelief::new(DVector::from_vec(raw.mean), cov).map_err(serde::de::Error::custom)
    }
}

impl Serialize for GaussianBelief {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let d = self.dim();
        RawGaussian {
            mean: self.mean.iter().copied().collect(),
            cov: (0..d)
                .map(|i| (0..d).map(|j| self.cov[(i, j)]).collect())
                .collect(),
        }
        .serialize(s)
    }
}

impl GaussianBelief {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::invalid("mean", "dimension must be positive"));
        }
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::SizeMismatch {
                expected: d,
                actual: cov.nrows(),
            });
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("cov", "entries must be finite"));
        }
        for i in 0..d {
            for j in 0..i {
                if (cov[(i, j)] - cov[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(Error::invalid(
                        "cov",
                        format!("not symmetric at ({i}, {j})"),
                    ));
                }
            }
        }
        let chol = Cholesky::new(cov.clone()).ok_or(Error::NotPositiveDefinite)?;
        Ok(GaussianBelief { mean, cov, chol })
    }

    /// `N(0, σ² I_m)`.
    pub fn isotropic(dim: usize, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::domain(
                "GaussianBelief::isotropic",
                format!("sigma = {sigma}"),
            ));
        }
        Self::new(
            DVector::zeros(dim),
            DMatrix::from_diagonal_element(dim, dim, sigma * sigma),
        )
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Same covariance, mean moved by `shift`.
    pub fn shifted(&self, shift: &DVector<f64>) -> Result<Self> {
        if shift.len() != self.dim() {
            return Err(Error::SizeMismatch {
                expected: self.dim(),
                actual: shift.len(),
            });
        }
        Ok(GaussianBelief {
            mean: &self.mean + shift,
            cov: self.cov.clone(),
            chol: self.chol.clone(),
        })
    }

    fn log_det(&self) -> f64 {
        2.0 * self
            .chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|v| v.ln())
            .sum::<f64>()
    }
}

/// `D(N(μ,Σ) ‖ N(μ₀,Σ₀))` in nats, through Cholesky solves only:
/// `tr(Σ₀⁻¹Σ) = ‖L₀⁻¹L‖²_F` and the Mahalanobis term is `‖L₀⁻¹(μ-μ₀)‖²`.
pub fn gaussian_kl(p: &GaussianBelief, p0: &GaussianBelief) -> Result<f64> {
    let d = p0.dim();
    if p.dim() != d {
        return Err(Error::SizeMismatch {
            expected: d,
            actual: p.dim(),
        });
    }
    let l0 = p0.chol.l();
    let l = p.chol.l();
    let m = l0
        .solve_lower_triangular(&l)
        .ok_or(Error::NotPositiveDefinite)?;
    let z = l0
        .solve_lower_triangular(&(&p.mean - &p0.mean))
        .ok_or(Error::NotPositiveDefinite)?;
    let trace = m.norm_squared();
    let quad = z.norm_squared();
    let kl = 0.5 * (trace + quad - d as f64 + p0.log_det() - p.log_det());
    Ok(kl.max(0.0))
}

/// `{s : wᵀs ≤ T}`. `(w, T)` and `(λw, λT)` describe the same set for `λ > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpace {
    normal: DVector<f64>,
    threshold: f64,
}

#[derive(Serialize, Deserialize)]
struct RawHalfSpace {
    w: Vec<f64>,
    #[serde(rename = "T")]
    t: f64,
}

impl<'de> Deserialize<'de> for HalfSpace {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawHalfSpace::deserialize(d)?;
        HalfSpace::new(DVector::from_vec(raw.w), raw.t).map_err(serde::de::Error::custom)
    }
}

impl Serialize for HalfSpace {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RawHalfSpace {
            w: self.normal.iter().copied().collect(),
            t: self.threshold,
        }
        .serialize(s)
    }
}

impl HalfSpace {
    pub fn new(normal: DVector<f64>, threshold: f64) -> Result<Self> {
        if normal.is_empty() || normal.iter().any(|v| !v.is_finite()) || !threshold.is_finite() {
            return Err(Error::invalid("w", "normal and threshold must be finite"));
        }
        if normal.norm() == 0.0 {
            return Err(Error::invalid("w", "normal vector must be nonzero"));
        }
        Ok(HalfSpace { normal, threshold })
    }

    pub fn normal(&self) -> &DVector<f64> {
        &self.normal
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Signed standardized distance from the mean of `p` to the boundary, and
    /// the projected standard deviation `√(wᵀΣw)`.
    fn standardized(&self, p: &GaussianBelief) -> Result<(f64, f64)> {
        if self.normal.len() != p.dim() {
            return Err(Error::SizeMismatch {
                expected: p.dim(),
                actual: self.normal.len(),
            });
        }
        let var = (&p.cov * &self.normal).dot(&self.normal);
        assert!(var > 0.0, "wᵀΣw must be positive for PD Σ and nonzero w");
        let sd = var.sqrt();
        Ok(((self.threshold - self.normal.dot(&p.mean)) / sd, sd))
    }
}

/// `p(A) = Φ((T - wᵀμ) / √(wᵀΣw))`.
pub fn halfspace_mass(p: &GaussianBelief, h: &HalfSpace) -> Result<f64> {
    let (z, _) = h.standardized(p)?;
    Ok(std_normal_cdf(z).value())
}

/// Initial signed Mahalanobis distance `δ₀` from the prior mean to the boundary.
pub fn halfspace_delta0(p0: &GaussianBelief, h: &HalfSpace) -> Result<f64> {
    Ok(h.standardized(p0)?.0)
}

/// `Φ⁻¹(1-ε)` without forming `1 - ε`.
fn upper_quantile(target: AmbiguityTarget) -> Result<f64> {
    let eps = target.epsilon();
    if eps <= 0.0 {
        return Err(Error::domain(
            "half-space resolution",
            "epsilon must lie in (0, 1)",
        ));
    }
    std_normal_quantile(Probability::from_complement(eps)?)
}

/// Cheapest mean displacement (covariance held at `Σ₀`) bringing the
/// half-space mass to `1 - ε`: `-(Φ⁻¹(1-ε) - δ₀)·Σ₀w / √(wᵀΣ₀w)`, or zero
/// when the prior already qualifies.
pub fn halfspace_optimal_shift(
    p0: &GaussianBelief,
    h: &HalfSpace,
    target: AmbiguityTarget,
) -> Result<DVector<f64>> {
    let (delta0, sd) = h.standardized(p0)?;
    let z = upper_quantile(target)?;
    if z <= delta0 {
        return Ok(DVector::zeros(p0.dim()));
    }
    Ok((&p0.cov * &h.normal) * (-(z - delta0) / sd))
}

/// `½ [(Φ⁻¹(1-ε) - δ₀)⁺]²`.
pub fn halfspace_resolution_info(delta0: f64, target: AmbiguityTarget) -> Result<f64> {
    let gap = (upper_quantile(target)? - delta0).max(0.0);
    Ok(0.5 * gap * gap)
}

/// `{s ∈ ℝ^m : s_i ≤ a for all i}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPolytope", into = "RawPolytope")]
pub struct OrthantPolytope {
    dimension: usize,
    threshold: f64,
}

#[derive(Serialize, Deserialize)]
struct RawPolytope {
    m: usize,
    a: f64,
}

impl TryFrom<RawPolytope> for OrthantPolytope {
    type Error = Error;

    fn try_from(raw: RawPolytope) -> Result<Self> {
        OrthantPolytope::new(raw.m, raw.a)
    }
}

impl From<OrthantPolytope> for RawPolytope {
    fn from(p: OrthantPolytope) -> Self {
        RawPolytope {
            m: p.dimension,
            a: p.threshold,
        }
    }
}

impl OrthantPolytope {
    pub fn new(dimension: usize, threshold: f64) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::invalid("m", "dimension must be at least 1"));
        }
        if !(threshold > 0.0 && threshold.is_finite()) {
            return Err(Error::invalid(
                "a",
                format!("threshold {threshold} must be positive"),
            ));
        }
        Ok(OrthantPolytope {
            dimension,
            threshold,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }
}

/// Smallest posterior scale the generative representation can produce.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrecisionLimit {
    sigma_min: f64,
}

impl PrecisionLimit {
    pub fn new(sigma_min: f64) -> Result<Self> {
        if !(sigma_min > 0.0 && sigma_min.is_finite()) {
            return Err(Error::invalid(
                "sigma_min",
                format!("{sigma_min} must be positive"),
            ));
        }
        Ok(PrecisionLimit { sigma_min })
    }

    /// The limit that yields maximum semantic margin `mu_max` on `polytope`.
    pub fn from_margin(polytope: &OrthantPolytope, mu_max: f64) -> Result<Self> {
        if !(mu_max > 0.0) {
            return Err(Error::invalid(
                "mu_max",
                format!("{mu_max} must be positive"),
            ));
        }
        Self::new(polytope.threshold / mu_max)
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FloorResult {
    pub epsilon_min: f64,
    pub p_max: f64,
    pub mu_max: f64,
}

/// `ln Φ(margin)^m`.
fn log_polytope_mass(margin: f64, m: usize) -> f64 {
    m as f64 * log_std_normal_cdf(margin)
}

/// `Φ(a/σ)^m` under `N(0, σ² I_m)`.
pub fn polytope_mass(sigma: f64, polytope: &OrthantPolytope) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::domain(
            "polytope_mass",
            format!("sigma = {sigma} must be positive"),
        ));
    }
    Ok(log_polytope_mass(polytope.threshold / sigma, polytope.dimension).exp())
}

/// `1 - Φ(a/σ)^m`, computed without cancellation.
pub fn polytope_ambiguity(sigma: f64, polytope: &OrthantPolytope) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::domain(
            "polytope_ambiguity",
            format!("sigma = {sigma} must be positive"),
        ));
    }
    Ok(-log_polytope_mass(polytope.threshold / sigma, polytope.dimension).exp_m1())
}

/// Per-coordinate mass `(1-ε)^{1/m}`, carried with its complement.
fn per_coordinate_mass(polytope: &OrthantPolytope, target: AmbiguityTarget) -> Result<Probability> {
    let eps = target.epsilon();
    if eps <= 0.0 {
        return Err(Error::domain(
            "polytope_sigma_star",
            "epsilon must lie in (0, 1)",
        ));
    }
    let log_root = (-eps).ln_1p() / polytope.dimension as f64;
    Probability::from_complement(-log_root.exp_m1())
}

/// Largest σ with `Φ(a/σ)^m ≥ 1 - ε`: `σ* = a / Φ⁻¹((1-ε)^{1/m})`.
pub fn polytope_sigma_star(polytope: &OrthantPolytope, target: AmbiguityTarget) -> Result<f64> {
    let per_coordinate = per_coordinate_mass(polytope, target)?;
    if per_coordinate.value() <= 0.5 {
        return Err(Error::domain(
            "polytope_sigma_star",
            format!(
                "(1-ε)^(1/m) = {} ≤ 0.5: every σ > 0 already satisfies the target",
                per_coordinate.value()
            ),
        ));
    }
    Ok(polytope.threshold / std_normal_quantile(per_coordinate)?)
}

/// Irreducible ambiguity `1 - Φ(μ_max)^m` with `μ_max = a/σ_min`.
pub fn ambiguity_floor(polytope: &OrthantPolytope, limit: &PrecisionLimit) -> FloorResult {
    floor_at_margin(polytope.dimension, polytope.threshold / limit.sigma_min)
}

/// The floor as a function of dimension and margin alone.
pub fn floor_at_margin(dimension: usize, mu_max: f64) -> FloorResult {
    let log_p = log_polytope_mass(mu_max, dimension);
    FloorResult {
        epsilon_min: -log_p.exp_m1(),
        p_max: log_p.exp(),
        mu_max,
    }
}

/// Constrained resolution information: finite, or infinite because the
/// target sits below the family's ambiguity floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ConstrainedInfo {
    Finite { info_nats: f64 },
    Infeasible { epsilon_min: f64 },
}

impl ConstrainedInfo {
    /// Nats, with `+∞` for the infeasible case.
    pub fn nats(&self) -> f64 {
        match self {
            ConstrainedInfo::Finite { info_nats } => *info_nats,
            ConstrainedInfo::Infeasible { .. } => f64::INFINITY,
        }
    }
}

/// `(m/2)[σ²/σ₀² - 1 + 2 ln(σ₀/σ)]`, the KL cost of shrinking `N(0, σ₀²I_m)` to `N(0, σ²I_m)`.
pub fn isotropic_shrink_kl(m: usize, sigma: f64, sigma0: f64) -> f64 {
    let ratio = sigma / sigma0;
    0.5 * m as f64 * (ratio * ratio - 1.0 - 2.0 * ratio.ln())
}

/// Cost of shrinking the isotropic prior `N(0, σ₀²I_m)` until the polytope
/// holds `1 - ε` of the mass, or `Infeasible` when `ε < ε_min`.
pub fn polytope_resolution_info(
    sigma0: f64,
    polytope: &OrthantPolytope,
    limit: &PrecisionLimit,
    target: AmbiguityTarget,
) -> Result<ConstrainedInfo> {
    if !(sigma0 > 0.0 && sigma0.is_finite()) {
        return Err(Error::invalid(
            "sigma0",
            format!("{sigma0} must be positive"),
        ));
    }
    let floor = ambiguity_floor(polytope, limit);
    if target.epsilon() < floor.epsilon_min {
        return Ok(ConstrainedInfo::Infeasible {
            epsilon_min: floor.epsilon_min,
        });
    }
    // Φ(a/σ) > ½ ≥ (1-ε)^{1/m} for every σ: the prior already qualifies.
    if per_coordinate_mass(polytope, target)?.value() <= 0.5 {
        return Ok(ConstrainedInfo::Finite { info_nats: 0.0 });
    }
    let sigma = polytope_sigma_star(polytope, target)?.max(limit.sigma_min);
    if sigma0 <= sigma {
        return Ok(ConstrainedInfo::Finite { info_nats: 0.0 });
    }
    let m = polytope.dimension;
    let kl = gaussian_kl(
        &GaussianBelief::isotropic(m, sigma)?,
        &GaussianBelief::isotropic(m, sigma0)?,
    )?;
    Ok(ConstrainedInfo::Finite { info_nats: kl })
}

/// Which constrained family an ambiguity-vs-information curve follows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurveKind {
    /// Mean shift toward a half-space starting `delta0` standard deviations inside.
    HalfSpace { delta0: f64 },
    /// Isotropic shrink from `sigma0` toward `σ_min` around an orthant polytope.
    Polytope {
        sigma0: f64,
        polytope: OrthantPolytope,
        limit: PrecisionLimit,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub info_nats: f64,
    pub ambiguity: f64,
    /// False when the scale inversion missed its tolerance at this point.
    pub converged: bool,
}

/// Tolerance on the information value when inverting the shrink cost.
pub const INVERSION_TOL: f64 = 1e-12;

/// Posterior scale reachable with `info` nats, clamped at `σ_min`.
fn scale_for_info(m: usize, sigma0: f64, sigma_min: f64, info: f64) -> (f64, bool) {
    if info <= 0.0 || sigma0 <= sigma_min {
        return (sigma0, true);
    }
    if isotropic_shrink_kl(m, sigma_min, sigma0) <= info {
        return (sigma_min, true);
    }
    // Cost is strictly decreasing in σ on (σ_min, σ₀].
    let (mut lo, mut hi) = (sigma_min, sigma0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let cost = isotropic_shrink_kl(m, mid, sigma0);
        if (cost - info).abs() <= INVERSION_TOL * info.max(1.0) {
            return (mid, true);
        }
        if cost > info {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let sigma = 0.5 * (lo + hi);
    let converged =
        (isotropic_shrink_kl(m, sigma, sigma0) - info).abs() <= INVERSION_TOL * info.max(1.0);
    (sigma, converged)
}

/// Best achievable ambiguity as a function of the information spent.
///
/// Half-space: `ε(I) = 1 - Φ(δ₀ + √(2I))`. Polytope: `ε(I) = 1 - Φ(a/σ(I))^m`
/// where `σ(I)` inverts the shrink cost on `(σ_min, σ₀]` and stays at `σ_min`
/// once that is paid for. Points are evaluated independently, in parallel.
pub fn ambiguity_vs_info_curve(kind: CurveKind, info_grid: &[f64]) -> Result<Vec<CurvePoint>> {
    if info_grid.iter().any(|&i| !(i >= 0.0 && i.is_finite())) {
        return Err(Error::invalid(
            "info_grid",
            "values must be finite and nonnegative",
        ));
    }
    if info_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("info_grid", "values must be ascending"));
    }
    if let CurveKind::Polytope { sigma0, limit, .. } = kind {
        if !(sigma0 > 0.0 && sigma0.is_finite()) {
            return Err(Error::invalid(
                "sigma0",
                format!("{sigma0} must be positive"),
            ));
        }
        if sigma0 < limit.sigma_min {
            return Err(Error::invalid(
                "sigma0",
                format!("{sigma0} is below the precision limit {}", limit.sigma_min),
            ));
        }
    }
    Ok(info_grid
        .par_iter()
        .map(|&info| match kind {
            CurveKind::HalfSpace { delta0 } => CurvePoint {
                info_nats: info,
                ambiguity: std_normal_cdf(delta0 + (2.0 * info).sqrt()).complement(),
                converged: true,
            },
            CurveKind::Polytope {
                sigma0,
                polytope,
                limit,
            } => {
                let (sigma, converged) =
                    scale_for_info(polytope.dimension, sigma0, limit.sigma_min, info);
                CurvePoint {
                    info_nats: info,
                    ambiguity: polytope_ambiguity(sigma, &polytope).expect("scale is positive"),
                    converged,
                }
            }
        })
        .collect())
}

/// `(1/c) ln(Γ₀ / ε_min)`: an upper bound on generative resolvability for the
/// constrained Gaussian family. Unbounded when the floor vanishes.
pub fn gaussian_resolvability_bound(
    gamma0: f64,
    polytope: &OrthantPolytope,
    limit: &PrecisionLimit,
    c: f64,
) -> Result<ResolvabilityBound> {
    let floor = ambiguity_floor(polytope, limit).epsilon_min;
    ResolvabilityBound::from_floor(gamma0, floor, c)
}
