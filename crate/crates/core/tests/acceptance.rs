//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use resinfo::beliefs::{
    binary_divergence, kl_divergence, region_mass, total_variation, DiscreteBelief, Region,
    SemanticPartition,
};
use resinfo::gaussian::{
    ambiguity_floor, gaussian_kl, halfspace_delta0, halfspace_mass, halfspace_optimal_shift,
    halfspace_resolution_info, GaussianBelief, HalfSpace, OrthantPolytope, PrecisionLimit,
};
use resinfo::large_deviations::{
    binary_low_ambiguity_exact, monte_carlo_ambiguity, sanov_rate_check,
};
use resinfo::resolution::{
    brute_force_projection, optimal_posterior, resolution_info_partition, resolution_info_region,
    AmbiguityTarget, ProjectionConfig,
};
use resinfo::special::{std_normal_cdf, std_normal_quantile};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn target(eps: f64) -> AmbiguityTarget {
    AmbiguityTarget::new(eps).unwrap()
}

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn random_belief(rng: &mut ChaCha8Rng, n: usize) -> DiscreteBelief {
    let w: Vec<f64> = (0..n)
        .map(|_| -rng.random_range(1e-3..1.0f64).ln())
        .collect();
    let s: f64 = w.iter().sum();
    let mut probs: Vec<f64> = w.iter().map(|x| x / s).collect();
    let head: f64 = probs[..n - 1].iter().sum();
    probs[n - 1] = 1.0 - head;
    DiscreteBelief::new(probs).unwrap()
}

/// Nonempty proper subset of `0..n`.
fn random_region(rng: &mut ChaCha8Rng, n: usize) -> Region {
    loop {
        let members: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.5)).collect();
        if !members.is_empty() && members.len() < n {
            return Region::new(members);
        }
    }
}

fn random_partition(rng: &mut ChaCha8Rng, n: usize) -> SemanticPartition {
    let k = rng.random_range(2..=n);
    let mut labels: Vec<usize> = (0..n)
        .map(|i| if i < k { i } else { rng.random_range(0..k) })
        .collect();
    for i in (1..n).rev() {
        labels.swap(i, rng.random_range(0..=i));
    }
    let regions = (0..k)
        .map(|a| Region::new((0..n).filter(|&s| labels[s] == a).collect()))
        .collect();
    SemanticPartition::new(regions, n).unwrap()
}

fn criterion_1() -> Outcome {
    let info = resolution_info_region(0.1, target(0.1)).unwrap();
    let oracle = binary_divergence(0.9, 0.1).unwrap();
    ensure((info - 1.757780).abs() <= 1e-6, format!("info = {info}"))?;
    ensure(
        (info - oracle).abs() <= 1e-6,
        format!("d_bin(0.9|0.1) = {oracle}"),
    )?;
    ensure(
        format!("{info:.2}") == "1.76",
        format!("{info} does not round to 1.76"),
    )?;
    Ok(format!("info = {info:.9} nats"))
}

fn criterion_2() -> Outcome {
    let info = resolution_info_region(0.1, target(0.01)).unwrap();
    ensure((info - 2.224612).abs() <= 1e-6, format!("info = {info}"))?;
    ensure(
        format!("{info:.2}") == "2.22",
        format!("{info} does not round to 2.22"),
    )?;
    Ok(format!("info = {info:.9} nats"))
}

fn criterion_3() -> Outcome {
    let polytope = OrthantPolytope::new(5, 1.0).unwrap();
    let limit = PrecisionLimit::from_margin(&polytope, 2.13).unwrap();
    let floor = ambiguity_floor(&polytope, &limit).epsilon_min;
    ensure(
        (floor - 0.080225).abs() <= 0.0005,
        format!("epsilon_min = {floor}"),
    )?;
    ensure(
        format!("{floor:.2}") == "0.08",
        format!("{floor} does not round to 0.08"),
    )?;
    Ok(format!("epsilon_min = {floor:.9}"))
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let config = ProjectionConfig::default();
    let (mut worst_oracle, mut worst_kl) = (0.0f64, 0.0f64);
    let instances = 120;
    for i in 0..instances {
        let n = rng.random_range(2..=6);
        let p0 = random_belief(&mut rng, n);
        let region = random_region(&mut rng, n);
        let t = target(rng.random_range(0.01..0.9));
        let mass = region_mass(&p0, &region).unwrap();
        let closed = resolution_info_region(mass, t).unwrap();
        let oracle = brute_force_projection(&p0, &region, t, &config)
            .map_err(|e| format!("instance {i}: {e}"))?;
        let post = optimal_posterior(&p0, &region, t).unwrap();
        let achieved = kl_divergence(&post, &p0).unwrap();
        worst_oracle = worst_oracle.max((oracle - closed).abs());
        worst_kl = worst_kl.max((achieved - closed).abs());
    }
    ensure(worst_oracle <= 1e-6, format!("oracle gap {worst_oracle:e}"))?;
    ensure(worst_kl <= 1e-12, format!("achievability gap {worst_kl:e}"))?;
    Ok(format!(
        "{instances} instances, oracle gap {worst_oracle:.1e}, achievability gap {worst_kl:.1e}"
    ))
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let mut gaps = Vec::new();
    for (r, q) in [(0.3, 0.7), (0.1, 0.9), (0.4, 0.6)] {
        let est = sanov_rate_check(r, q, &[500, 1000, 2000]).unwrap();
        let expected = binary_divergence(q, r).unwrap();
        ensure(
            est.theoretical_rate == expected,
            "theoretical rate mismatch",
        )?;
        ensure(
            est.relative_gap() <= 0.05,
            format!("(r, q) = ({r}, {q}): gap {}", est.relative_gap()),
        )?;
        gaps.push(format!("{:.4}", est.relative_gap()));
    }
    let elapsed = start.elapsed();
    ensure(
        elapsed < Duration::from_secs(5),
        format!("took {elapsed:?}"),
    )?;
    Ok(format!(
        "relative gaps [{}] in {elapsed:.2?}",
        gaps.join(", ")
    ))
}

fn criterion_6() -> Outcome {
    let part = SemanticPartition::new(vec![Region::new(vec![0]), Region::new(vec![1])], 2).unwrap();
    let (k, trials) = (200, 10_000);
    let mut summary = Vec::new();
    for (r, eps) in [(0.6, 0.35), (0.5, 0.45)] {
        let p0 = DiscreteBelief::new(vec![r, 1.0 - r]).unwrap();
        let exact = binary_low_ambiguity_exact(k, r, 1.0 - eps).unwrap().exp();
        let hits = (0..100u64)
            .filter(|&seed| {
                let est = monte_carlo_ambiguity(&p0, &part, target(eps), k, trials, seed).unwrap();
                (est.frequency - exact).abs() <= 3.0 * est.std_error
            })
            .count();
        ensure(
            hits >= 99,
            format!("p0(A) = {r}, eps = {eps}: {hits}/100 seeds within 3 se"),
        )?;
        summary.push(format!("p0(A)={r} eps={eps}: {hits}/100"));
    }
    Ok(summary.join("; "))
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let grid: Vec<f64> = (1..=50).map(|i| i as f64 / 100.0).collect();
    for _ in 0..200 {
        let n = rng.random_range(2..=8);
        let p0 = random_belief(&mut rng, n);
        let part = random_partition(&mut rng, n);
        let infos: Vec<f64> = grid
            .iter()
            .map(|&e| {
                resolution_info_partition(&p0, &part, target(e))
                    .unwrap()
                    .info_nats
            })
            .collect();
        ensure(
            infos.windows(2).all(|w| w[1] <= w[0]),
            "resolution information increased with epsilon",
        )?;
        let gamma = resinfo::beliefs::ambiguity(&p0, &part).unwrap();
        if gamma < 1.0 {
            let res = resolution_info_partition(&p0, &part, target(gamma)).unwrap();
            ensure(
                res.info_nats == 0.0 && res.feasible_at_prior,
                "nonzero information at feasibility",
            )?;
        }
        for e in grid.iter().copied().filter(|&e| e < gamma) {
            let res = resolution_info_partition(&p0, &part, target(e)).unwrap();
            let post = res.achieving_posterior.unwrap();
            let tv = total_variation(&post, &p0).unwrap();
            ensure(res.info_nats >= 2.0 * tv * tv, "separation bound violated")?;
        }
    }
    for _ in 0..1000 {
        let n = rng.random_range(2..=10);
        let p = random_belief(&mut rng, n);
        let q = random_belief(&mut rng, n);
        let tv = total_variation(&p, &q).unwrap();
        ensure(
            kl_divergence(&p, &q).unwrap() >= 2.0 * tv * tv,
            "Pinsker violated",
        )?;
    }
    Ok("monotone over 50-point grid, zero at feasibility, Pinsker on 1000 pairs".into())
}

fn random_gaussian(rng: &mut ChaCha8Rng, d: usize) -> GaussianBelief {
    let b = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let cov = &b * b.transpose() + DMatrix::identity(d, d) * 0.1;
    let cov = (&cov + cov.transpose()) * 0.5;
    let mean = DVector::from_fn(d, |_, _| rng.random_range(-2.0..2.0));
    GaussianBelief::new(mean, cov).unwrap()
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut worst_kl, mut worst_mass) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let d = rng.random_range(1..=5);
        let p0 = random_gaussian(&mut rng, d);
        let w = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
        let h = HalfSpace::new(w.clone(), w.dot(p0.mean()) + rng.random_range(-3.0..1.0)).unwrap();
        let t = target(rng.random_range(0.001..0.5));
        let info = halfspace_resolution_info(halfspace_delta0(&p0, &h).unwrap(), t).unwrap();
        let moved = p0
            .shifted(&halfspace_optimal_shift(&p0, &h, t).unwrap())
            .unwrap();
        worst_kl = worst_kl.max((gaussian_kl(&moved, &p0).unwrap() - info).abs());
        let mass = halfspace_mass(&moved, &h).unwrap();
        if info > 0.0 {
            worst_mass = worst_mass.max((mass - t.required_mass()).abs());
        } else {
            ensure(
                mass >= t.required_mass() - 1e-9,
                "feasible prior below target",
            )?;
        }
    }
    ensure(worst_kl <= 1e-9, format!("KL gap {worst_kl:e}"))?;
    ensure(worst_mass <= 1e-9, format!("mass gap {worst_mass:e}"))?;
    Ok(format!(
        "200 instances, KL gap {worst_kl:.1e}, mass gap {worst_mass:.1e}"
    ))
}

fn criterion_9() -> Outcome {
    let mut worst = 0.0f64;
    for i in -600..=600 {
        let x = i as f64 / 100.0;
        let back = std_normal_quantile(std_normal_cdf(x)).unwrap();
        worst = worst.max((back - x).abs());
    }
    ensure(worst <= 1e-9, format!("worst round-trip error {worst:e}"))?;
    Ok(format!("worst round-trip error {worst:.1e}"))
}

fn run_cli(args: &[&str]) -> Result<(String, Duration), String> {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_resinfo"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    if !out.status.success() {
        return Err(format!(
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok((String::from_utf8(out.stdout).unwrap(), elapsed))
}

/// Runs a figure command twice; checks timing and byte identity.
fn regenerate(args: &[&str]) -> Result<(Vec<Vec<f64>>, Duration), String> {
    let (first, t1) = run_cli(args)?;
    let (second, t2) = run_cli(args)?;
    ensure(
        first == second,
        format!("{} output differs between runs", args[0]),
    )?;
    let slowest = t1.max(t2);
    ensure(
        slowest < Duration::from_secs(5),
        format!("{} took {slowest:?}", args[0]),
    )?;
    let rows = first
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    Ok((rows, slowest))
}

fn cell(rows: &[Vec<f64>], p: f64, e: f64) -> Result<f64, String> {
    rows.iter()
        .find(|r| (r[0] - p).abs() < 1e-12 && (r[1] - e).abs() < 1e-12)
        .map(|r| r[2])
        .ok_or_else(|| format!("no cell at ({p}, {e})"))
}

fn criterion_10() -> Outcome {
    let mut failures = Vec::new();

    let (_, t_default) = regenerate(&[
        "tradeoff-heatmap",
        "--prior-mass-grid",
        "0.001:0.15:200:log",
        "--epsilon-grid",
        "0.001:0.25:200:log",
    ])?;
    let (fig1, t_fig1) = regenerate(&[
        "tradeoff-heatmap",
        "--prior-mass-grid",
        "0.001:0.2:200:lin",
        "--epsilon-grid",
        "0.001:0.2:200:lin",
    ])?;
    ensure(fig1.len() == 200 * 200, "tradeoff grid is not 200x200")?;
    let c1 = cell(&fig1, 0.1, 0.1)?;
    let c2 = cell(&fig1, 0.1, 0.01)?;
    if (c1 - 1.757780).abs() > 1e-6 || (c2 - 2.224612).abs() > 1e-6 {
        failures.push(format!("tradeoff cells {c1}, {c2}"));
    }

    let (fig2, t_fig2) = regenerate(&[
        "floor-heatmap",
        "--m-grid",
        "1:200:200:lin",
        "--mu-max-grid",
        "0.5:4:200:lin",
    ])?;
    ensure(fig2.len() == 200 * 200, "floor grid is not 200x200")?;

    let (fig3, t_fig3) = regenerate(&["decay-curves", "--info-grid", "0:50:200:lin"])?;
    let floor = fig3[0][3];
    let lowest = fig3.iter().map(|r| r[2]).fold(f64::INFINITY, f64::min);
    if fig3.iter().any(|r| r[2] < floor - 1e-12) {
        failures.push(format!(
            "polytope column {lowest} dips below its floor {floor}"
        ));
    }
    if lowest < 0.080225 - 1e-12 {
        failures.push(format!(
            "polytope column minimum {lowest:.12} < 0.080225 - 1e-12 (floor at mu_max = 2.13 is {floor:.12})"
        ));
    }
    let last = fig3.last().unwrap();
    if !(last[0] == 50.0 && last[1] < 1e-10) {
        failures.push(format!(
            "half-space ambiguity {} at info {}",
            last[1], last[0]
        ));
    }

    let times = format!(
        "times {:.2?}/{:.2?}/{:.2?}/{:.2?}",
        t_default, t_fig1, t_fig2, t_fig3
    );
    if failures.is_empty() {
        Ok(format!(
            "bit-identical, {times}, cells {c1:.6}/{c2:.6}, polytope min {lowest:.9}"
        ))
    } else {
        Err(format!("{}; {times}", failures.join("; ")))
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("resolution information at (0.1, 0.1)", criterion_1),
        ("resolution information at (0.1, 0.01)", criterion_2),
        (
            "polytope ambiguity floor at m = 5, mu_max = 2.13",
            criterion_3,
        ),
        ("closed form matches numerical projection", criterion_4),
        ("ambiguity exponent from exact binomial tails", criterion_5),
        ("Monte Carlo agrees with exact tails", criterion_6),
        (
            "monotonicity, feasibility and Pinsker properties",
            criterion_7,
        ),
        ("Gaussian half-space consistency", criterion_8),
        ("normal CDF/quantile round trip", criterion_9),
        ("figure data regeneration", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome =
            catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".to_string()));
        match outcome {
            Ok(detail) => println!("PASS criterion {:>2}: {name} ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {:>2}: {name} ({detail})", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
