//! Standard normal CDF and quantile, plus a couple of log helpers.
//!
//! `std_normal_cdf` follows Cody's rational Chebyshev approximations for the
//! error function (the same scheme R's `pnorm` uses), evaluated so that both
//! tails keep full relative accuracy. The result is a [`Probability`] that
//! carries the lower and the upper tail separately, so `1 - Φ(x)` for large
//! `x` is not lost to cancellation and the quantile can invert either tail.

#![allow(clippy::excessive_precision)]

use crate::error::{Error, Result};

/// Beyond this magnitude Φ saturates to exactly 0 or 1.
pub const TAIL_CUTOFF: f64 = 38.0;

const SQRT_32: f64 = 5.656_854_249_492_381;
const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// A probability stored together with its complement.
///
/// Both fields are accurate to machine precision in relative terms, which
/// matters when one of them is tiny (e.g. the upper tail of Φ at `x = 6`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probability {
    lower: f64,
    upper: f64,
}

impl Probability {
    pub fn new(value: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::domain(
                "Probability::new",
                format!("{value} not in [0, 1]"),
            ));
        }
        Ok(Probability {
            lower: value,
            upper: 1.0 - value,
        })
    }

    /// Builds a probability from its complement `1 - p`.
    pub fn from_complement(complement: f64) -> Result<Self> {
        let p = Self::new(complement)?;
        Ok(Probability {
            lower: p.upper,
            upper: p.lower,
        })
    }

    pub fn value(self) -> f64 {
        self.lower
    }

    pub fn complement(self) -> f64 {
        self.upper
    }
}

impl TryFrom<f64> for Probability {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Probability::new(value)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.lower
    }
}

const A: [f64; 5] = [
    2.235_252_035_460_683_928_7,
    161.028_231_068_555_878_81,
    1_067.689_485_460_370_958_2,
    18_154.981_253_343_561_249,
    0.065_682_337_918_207_449_113,
];
const B: [f64; 4] = [
    47.202_581_904_688_241_87,
    976.098_551_737_776_693_22,
    10_260.932_208_618_978_205,
    45_507.789_335_026_729_956,
];
const C: [f64; 9] = [
    0.398_941_512_088_134_667_64,
    8.883_149_794_388_375_941_2,
    93.506_656_132_177_855_979,
    597.270_276_394_800_262_26,
    2_494.537_585_290_372_671_1,
    6_848.190_450_536_282_332_6,
    11_602.651_437_647_350_124,
    9_842.714_838_383_978_021_8,
    1.076_557_677_372_019_231_7e-8,
];
const D: [f64; 8] = [
    22.266_688_044_328_115_691,
    235.387_901_782_624_998_61,
    1_519.377_599_407_554_805,
    6_485.558_298_266_760_755,
    18_615.571_640_885_098_091,
    34_900.952_721_145_977_266,
    38_912.003_286_093_271_411,
    19_685.429_676_859_990_727,
];
const P: [f64; 6] = [
    0.215_898_534_057_956_99,
    0.127_401_161_160_247_363_9,
    0.022_235_277_870_649_807,
    0.001_421_619_193_227_893_466,
    2.911_287_495_116_879_2e-5,
    0.023_073_441_764_940_173_03,
];
const Q: [f64; 5] = [
    1.284_260_096_144_911_21,
    0.468_238_212_480_865_118,
    0.065_988_137_868_928_551_5,
    0.003_782_396_332_027_582_44,
    7.297_515_550_839_662_05e-5,
];

/// `exp(-y²/2)` with `y²` split so the exponent is formed without rounding loss.
fn gaussian_factor(y: f64) -> f64 {
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq * 0.5).exp() * (-del * 0.5).exp()
}

/// Φ(x), the standard normal CDF, with both tails returned.
pub fn std_normal_cdf(x: f64) -> Probability {
    if x.is_nan() {
        return Probability {
            lower: f64::NAN,
            upper: f64::NAN,
        };
    }
    let y = x.abs();
    if y <= 0.674_489_75 {
        let (mut num, mut den) = (0.0, 0.0);
        if y > f64::EPSILON * 0.5 {
            let xsq = x * x;
            num = A[4] * xsq;
            den = xsq;
            for i in 0..3 {
                num = (num + A[i]) * xsq;
                den = (den + B[i]) * xsq;
            }
        }
        let t = x * (num + A[3]) / (den + B[3]);
        return Probability {
            lower: 0.5 + t,
            upper: 0.5 - t,
        };
    }

    // Upper-tail mass beyond |x|.
    let tail = if y <= SQRT_32 {
        let mut num = C[8] * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + C[i]) * y;
            den = (den + D[i]) * y;
        }
        gaussian_factor(y) * (num + C[7]) / (den + D[7])
    } else if y <= TAIL_CUTOFF {
        let xsq = 1.0 / (x * x);
        let mut num = P[5] * xsq;
        let mut den = xsq;
        for i in 0..4 {
            num = (num + P[i]) * xsq;
            den = (den + Q[i]) * xsq;
        }
        let t = xsq * (num + P[4]) / (den + Q[4]);
        gaussian_factor(y) * (FRAC_1_SQRT_2PI - t) / y
    } else {
        0.0
    };

    if x > 0.0 {
        Probability {
            lower: 1.0 - tail,
            upper: tail,
        }
    } else {
        Probability {
            lower: tail,
            upper: 1.0 - tail,
        }
    }
}

/// Standard normal density.
pub fn std_normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// `ln Φ(x)`, accurate in both tails.
pub fn log_std_normal_cdf(x: f64) -> f64 {
    let p = std_normal_cdf(x);
    if p.lower < 0.5 {
        p.lower.ln()
    } else {
        (-p.upper).ln_1p()
    }
}

// Acklam's rational approximation for the lower tail / central region.
const QA: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const QB: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const QC: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const QD: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];
const Q_LOW: f64 = 0.024_25;

/// Initial guess for Φ⁻¹(p), `0 < p ≤ 0.5`. Relative error around 1e-9.
fn quantile_guess(p: f64) -> f64 {
    if p < Q_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((QC[0] * q + QC[1]) * q + QC[2]) * q + QC[3]) * q + QC[4]) * q + QC[5])
            / ((((QD[0] * q + QD[1]) * q + QD[2]) * q + QD[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((QA[0] * r + QA[1]) * r + QA[2]) * r + QA[3]) * r + QA[4]) * r + QA[5]) * q
            / (((((QB[0] * r + QB[1]) * r + QB[2]) * r + QB[3]) * r + QB[4]) * r + 1.0)
    }
}

/// Φ⁻¹ on the lower half, polished with two Halley steps against `std_normal_cdf`.
fn lower_quantile(p: f64) -> f64 {
    let mut x = quantile_guess(p);
    for _ in 0..2 {
        let density = std_normal_pdf(x);
        if density == 0.0 {
            break;
        }
        let e = std_normal_cdf(x).lower - p;
        let u = e / density;
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

/// Φ⁻¹(p). Uses whichever tail of `p` is smaller so probabilities close to 1
/// invert without cancellation.
pub fn std_normal_quantile(p: Probability) -> Result<f64> {
    if !(p.lower > 0.0 && p.upper > 0.0) {
        return Err(Error::domain(
            "std_normal_quantile",
            format!("p = {} must lie strictly inside (0, 1)", p.lower),
        ));
    }
    if p.lower <= 0.5 {
        Ok(lower_quantile(p.lower))
    } else {
        Ok(-lower_quantile(p.upper))
    }
}

/// `ln(1 + x)` for `x > -1`.
pub fn log1p_safe(x: f64) -> Result<f64> {
    if !(x > -1.0) {
        return Err(Error::domain(
            "log1p_safe",
            format!("x = {x} must exceed -1"),
        ));
    }
    Ok(x.ln_1p())
}

/// `u ln u` with `0 ln 0 = 0`.
pub fn xlogx(u: f64) -> Result<f64> {
    if !(u >= 0.0) {
        return Err(Error::domain(
            "xlogx",
            format!("u = {u} must be nonnegative"),
        ));
    }
    if u == 0.0 {
        Ok(0.0)
    } else {
        Ok(u * u.ln())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from a 40-digit evaluation of Φ = erfc(-x/√2)/2.
    const CDF_REFERENCE: &[(f64, f64)] = &[
        (-8.0, 6.2209605742717841235e-16),
        (-7.5, 3.1908916729108962278e-14),
        (-6.0, 9.865876450376981407e-10),
        (-5.66, 7.5686497519977199817e-9),
        (-5.0, 2.8665157187919391167e-7),
        (-3.3, 0.00048342414238377720111),
        (-2.13, 0.016585806683605012959),
        (-1.0, 0.15865525393145705141),
        (-0.6744, 0.25002852137294061452),
        (-0.3, 0.38208857781104736269),
        (-1e-9, 0.4999999996010577196),
        (0.2, 0.57925970943910302304),
        (0.6745, 0.75000325713630083478),
        (1.0, 0.84134474606854294859),
        (1.7, 0.95543453724145696051),
        (2.13, 0.98341419331639498704),
        (2.5, 0.99379033467422386483),
        (3.0, 0.99865010196836990547),
        (4.0, 0.99996832875816688008),
        (5.656, 0.99999999225292667625),
        (5.66, 0.999999992431350248),
        (6.0, 0.99999999901341235496),
        (7.0, 0.99999999999872018746),
        (8.0, 0.9999999999999993779),
    ];

    // Upper tails 1 - Φ(x), checked in relative terms.
    const UPPER_TAIL_REFERENCE: &[(f64, f64)] = &[
        (6.0, 9.865876450376981407e-10),
        (10.0, 7.619853024160526066e-24),
        (20.0, 2.7536241186062336951e-89),
        (30.0, 4.9067139271481870595e-198),
        (37.5, 4.6053530095819548438e-308),
    ];

    const QUANTILE_REFERENCE: &[(f64, f64)] = &[
        (1e-20, -9.2623400897984075737),
        (1e-10, -6.3613409024040562047),
        (0.001, -3.0902323061678135415),
        (0.02425, -1.9729610513118848503),
        (0.1, -1.281551565544600467),
        (0.3, -0.52440051270804078404),
        (0.7, 0.52440051270804078404),
        (0.9, 1.281551565544600467),
        (0.975, 1.9599639845400542355),
        (0.999, 3.0902323061678135415),
    ];

    #[test]
    fn cdf_at_zero_is_half() {
        assert_eq!(std_normal_cdf(0.0).value(), 0.5);
        assert_eq!(std_normal_cdf(0.0).complement(), 0.5);
    }

    #[test]
    fn cdf_reflection() {
        let x = 1.7;
        let a = std_normal_cdf(-x).value();
        let b = 1.0 - std_normal_cdf(x).value();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn cdf_saturates_beyond_cutoff() {
        assert_eq!(std_normal_cdf(39.0).value(), 1.0);
        assert_eq!(std_normal_cdf(39.0).complement(), 0.0);
        assert_eq!(std_normal_cdf(-39.0).value(), 0.0);
        assert_eq!(std_normal_cdf(f64::INFINITY).value(), 1.0);
        assert_eq!(std_normal_cdf(f64::NEG_INFINITY).value(), 0.0);
    }

    #[test]
    fn cdf_matches_reference() {
        for &(x, expected) in CDF_REFERENCE {
            let got = std_normal_cdf(x).value();
            assert!(
                (got - expected).abs() <= 1e-14,
                "Φ({x}) = {got}, want {expected}"
            );
        }
    }

    #[test]
    fn upper_tail_relative_accuracy() {
        for &(x, expected) in UPPER_TAIL_REFERENCE {
            let got = std_normal_cdf(x).complement();
            assert!(
                ((got - expected) / expected).abs() < 1e-13,
                "1-Φ({x}) = {got:e}"
            );
            let mirrored = std_normal_cdf(-x).value();
            assert_eq!(got, mirrored);
        }
    }

    #[test]
    fn quantile_matches_reference() {
        for &(p, expected) in QUANTILE_REFERENCE {
            let got = std_normal_quantile(Probability::new(p).unwrap()).unwrap();
            assert!(
                (got - expected).abs() < 1e-12 * expected.abs().max(1.0),
                "Φ⁻¹({p}) = {got}"
            );
        }
    }

    #[test]
    fn quantile_inverts_cdf_in_probability() {
        let mut p = 1e-6;
        while p < 1.0 {
            let prob = Probability::new(p).unwrap();
            let x = std_normal_quantile(prob).unwrap();
            assert!((std_normal_cdf(x).value() - p).abs() <= 1e-12, "p = {p}");
            p += 0.0137;
        }
    }

    #[test]
    fn quantile_of_tiny_complement() {
        let p = Probability::from_complement(1e-20).unwrap();
        let x = std_normal_quantile(p).unwrap();
        assert!((x - 9.2623400897984075737).abs() < 1e-12);
    }

    #[test]
    fn quantile_median_is_zero() {
        assert_eq!(
            std_normal_quantile(Probability::new(0.5).unwrap()).unwrap(),
            0.0
        );
    }

    #[test]
    fn quantile_rejects_endpoints() {
        for p in [0.0, 1.0] {
            assert!(std_normal_quantile(Probability::new(p).unwrap()).is_err());
        }
        assert!(Probability::new(1.5).is_err());
        assert!(Probability::new(-0.1).is_err());
        assert!(Probability::new(f64::NAN).is_err());
    }

    #[test]
    fn log_helpers() {
        assert_eq!(xlogx(0.0).unwrap(), 0.0);
        assert_eq!(xlogx(1.0).unwrap(), 0.0);
        assert!(xlogx(-1e-300).is_err());
        assert!(log1p_safe(-1.0).is_err());
        // Taylor: x - x²/2 + x³/3
        let x = 1e-12;
        let taylor = x - x * x / 2.0 + x * x * x / 3.0;
        let got = log1p_safe(x).unwrap();
        assert!(((got - taylor) / taylor).abs() < 2.0 * f64::EPSILON);
    }
}
