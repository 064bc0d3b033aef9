use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

use resinfo::beliefs::{ambiguity, DiscreteBelief, Region, SemanticPartition};
use resinfo::figures::{
    decay_curves_table, floor_table, tradeoff_table, DecayCurveParams, GridSpec, Table,
};
use resinfo::gaussian::{
    floor_at_margin, gaussian_kl, halfspace_delta0, halfspace_mass, halfspace_optimal_shift,
    halfspace_resolution_info, polytope_resolution_info, ConstrainedInfo, GaussianBelief,
    HalfSpace, OrthantPolytope, PrecisionLimit,
};
use resinfo::large_deviations::{
    binary_low_ambiguity_exact, binomial_tail_exact, monte_carlo_ambiguity,
    sample_complexity_lower_bound, sanov_rate_check, ResolvabilityBound,
};
use resinfo::resolution::{resolution_info_partition, AmbiguityTarget};

const ASYMPTOTIC_NOTE: &str = "asymptotic: sub-exponential corrections are dropped";

#[derive(Parser)]
#[command(
    name = "resinfo",
    version,
    about = "Resolution information for semantic ambiguity"
)]
struct Cli {
    /// Emit a single JSON document instead of text or CSV.
    #[arg(long, global = true)]
    json: bool,

    /// Write output here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Worker threads for sweeps and Monte Carlo (0 = all cores).
    #[arg(long, global = true, env = "RESINFO_THREADS", default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Resolution information of a discrete belief over a semantic partition.
    Resolve {
        /// JSON file {"probs": [...]}.
        #[arg(long)]
        belief: PathBuf,
        /// JSON file {"regions": [[...], ...]}.
        #[arg(long)]
        partition: PathBuf,
        #[arg(long)]
        epsilon: f64,
    },
    /// Resolution information over prior mass × target ambiguity (CSV).
    TradeoffHeatmap {
        #[arg(long, default_value = "0.001:0.15:200:log")]
        prior_mass_grid: String,
        #[arg(long, default_value = "0.001:0.25:200:log")]
        epsilon_grid: String,
    },
    /// Polytope ambiguity floor over dimension × maximum margin (CSV).
    FloorHeatmap {
        #[arg(long, default_value = "1:20:20:lin")]
        m_grid: String,
        #[arg(long, default_value = "0.5:4:351:lin")]
        mu_max_grid: String,
    },
    /// Ambiguity against information for a half-space and a polytope (CSV).
    DecayCurves {
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        delta0: f64,
        #[arg(long, default_value_t = 5)]
        m: usize,
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma0: f64,
        #[command(flatten)]
        limit: LimitArgs,
        #[arg(long, default_value = "0:50:201:lin")]
        info_grid: String,
    },
    /// Checks the ambiguity exponent against exact binomial tails (JSON).
    LdpVerify {
        /// Prior mass of the region.
        #[arg(long)]
        r: f64,
        /// Required posterior mass, 1 - epsilon.
        #[arg(long)]
        q: f64,
        #[arg(long, value_delimiter = ',', default_value = "500,1000,2000")]
        k_grid: Vec<u64>,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        /// Sample size for the Monte Carlo cross-check (default: first of the k grid).
        #[arg(long)]
        mc_k: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Largest accepted relative gap between fitted and theoretical rate.
        #[arg(long, default_value_t = 0.05)]
        tolerance: f64,
    },
    /// Constrained Gaussian posteriors.
    #[command(subcommand)]
    Gaussian(GaussianCommand),
}

#[derive(Args)]
struct LimitArgs {
    /// Smallest posterior standard deviation.
    #[arg(long, conflicts_with = "mu_max")]
    sigma_min: Option<f64>,
    /// Maximum semantic margin a/σ_min.
    #[arg(long, default_value_t = 2.13)]
    mu_max: f64,
}

impl LimitArgs {
    fn resolve(&self, polytope: &OrthantPolytope) -> resinfo::Result<PrecisionLimit> {
        match self.sigma_min {
            Some(s) => PrecisionLimit::new(s),
            None => PrecisionLimit::from_margin(polytope, self.mu_max),
        }
    }
}

#[derive(Args)]
struct PolytopeArgs {
    /// JSON file {"m": ..., "a": ...}; overrides --m and --a.
    #[arg(long)]
    polytope: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    m: usize,
    #[arg(long, default_value_t = 1.0)]
    a: f64,
}

impl PolytopeArgs {
    fn resolve(&self) -> Result<OrthantPolytope, CliError> {
        match &self.polytope {
            Some(path) => read_json(path),
            None => Ok(OrthantPolytope::new(self.m, self.a)?),
        }
    }
}

#[derive(Subcommand)]
enum GaussianCommand {
    /// KL(posterior ‖ prior) between Gaussian beliefs.
    Kl {
        /// JSON file {"mean": [...], "cov": [[...]]}.
        #[arg(long)]
        posterior: PathBuf,
        #[arg(long)]
        prior: PathBuf,
    },
    /// Mean-shift resolution toward a half-space.
    Halfspace {
        #[arg(long)]
        belief: PathBuf,
        /// JSON file {"w": [...], "T": t}.
        #[arg(long)]
        halfspace: PathBuf,
        #[arg(long)]
        epsilon: f64,
    },
    /// Isotropic-shrink resolution of an orthant polytope.
    Polytope {
        #[command(flatten)]
        polytope: PolytopeArgs,
        #[arg(long, default_value_t = 1.0)]
        sigma0: f64,
        #[command(flatten)]
        limit: LimitArgs,
        #[arg(long)]
        epsilon: f64,
    },
    /// Ambiguity floor 1 - Φ(μ_max)^m.
    Floor {
        #[arg(long, default_value_t = 5)]
        m: usize,
        #[arg(long, default_value_t = 2.13)]
        mu_max: f64,
        /// Compare a target against the floor.
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Upper bound (1/c) ln(Γ₀/floor) on generative resolvability.
    Resolvability {
        #[arg(long)]
        gamma0: f64,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        /// Ambiguity floor; computed from --m and --mu-max when absent.
        #[arg(long, conflicts_with_all = ["m", "mu_max"])]
        floor: Option<f64>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        mu_max: Option<f64>,
    },
}

enum CliError {
    Input(String),
    Io(String),
    Verification(String),
}

impl From<resinfo::Error> for CliError {
    fn from(e: resinfo::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Io(_) => 3,
            CliError::Verification(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Io(m) | CliError::Verification(m) => m,
        }
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn grid(flag: &str, spec: &str) -> Result<GridSpec, CliError> {
    spec.parse()
        .map_err(|e: resinfo::Error| CliError::Input(format!("--{flag}: {e}")))
}

fn target(epsilon: f64) -> Result<AmbiguityTarget, CliError> {
    AmbiguityTarget::new(epsilon).map_err(|e| CliError::Input(format!("--epsilon: {e}")))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable output");
    s.push('\n');
    s
}

/// Text for human eyes, or JSON when requested.
struct Report {
    text: String,
    json: serde_json::Value,
}

fn table_output(table: &Table, json: bool) -> String {
    if json {
        to_json(table)
    } else {
        table.to_csv()
    }
}

fn resolve(belief: &Path, partition: &Path, epsilon: f64) -> Result<Report, CliError> {
    let p0: DiscreteBelief = read_json(belief)?;
    let part: SemanticPartition = read_json(partition)?;
    let t = target(epsilon)?;
    let result = resolution_info_partition(&p0, &part, t)?;
    let samples = (result.info_nats > 0.0 && epsilon > 0.0)
        .then(|| sample_complexity_lower_bound(result.info_nats, t))
        .transpose()?;

    let mut text = String::new();
    writeln!(text, "info_nats: {:.12}", result.info_nats).unwrap();
    writeln!(text, "prior_ambiguity: {:.12}", ambiguity(&p0, &part)?).unwrap();
    writeln!(text, "feasible_at_prior: {}", result.feasible_at_prior).unwrap();
    if let Some(i) = result.binding_region_index {
        writeln!(text, "binding_region: {i}").unwrap();
    }
    if let Some(post) = &result.achieving_posterior {
        let probs: Vec<String> = post.probs().iter().map(|p| format!("{p:.12}")).collect();
        writeln!(text, "posterior: [{}]", probs.join(", ")).unwrap();
    }
    if let Some(k) = samples {
        writeln!(
            text,
            "sample_complexity_lower_bound: {k:.12} ({ASYMPTOTIC_NOTE})"
        )
        .unwrap();
    }
    let mut json = serde_json::to_value(&result).expect("serializable");
    json["sample_complexity_lower_bound"] = json!(samples);
    json["asymptotic"] = json!(ASYMPTOTIC_NOTE);
    Ok(Report { text, json })
}

#[allow(clippy::too_many_arguments)]
fn ldp_verify(
    r: f64,
    q: f64,
    k_grid: &[u64],
    trials: u64,
    mc_k: Option<u64>,
    seed: u64,
    tolerance: f64,
) -> Result<(String, bool), CliError> {
    if !(r > 0.0 && r < 1.0 && q > r && q <= 1.0) {
        return Err(CliError::Input(format!(
            "need 0 < r < q ≤ 1, got r = {r}, q = {q}"
        )));
    }
    let est = sanov_rate_check(r, q, k_grid)?;
    let passed = est.relative_gap() <= tolerance;

    let k = mc_k.or(k_grid.first().copied()).unwrap_or(1);
    let p0 = DiscreteBelief::new(vec![r, 1.0 - r])?;
    let part = SemanticPartition::new(vec![Region::new(vec![0]), Region::new(vec![1])], 2)?;
    let mc = monte_carlo_ambiguity(&p0, &part, target(1.0 - q)?, k, trials, seed)?;
    let exact_low = binary_low_ambiguity_exact(k, r, q)?.exp();
    let within = (mc.frequency - exact_low).abs() <= 3.0 * mc.std_error;

    let records: Vec<_> = est
        .k_values
        .iter()
        .zip(&est.log_probs)
        .map(|(k, l)| json!({ "k": k, "log_prob": l }))
        .collect();
    let report = json!({
        "r": r,
        "q": q,
        "event": "empirical mass of the region >= q",
        "records": records,
        "fitted_rate": est.fitted_rate,
        "theoretical_rate": est.theoretical_rate,
        "relative_gap": est.relative_gap(),
        "tolerance": tolerance,
        "passed": passed,
        "asymptotic": ASYMPTOTIC_NOTE,
        "monte_carlo": {
            "k": k,
            "trials": trials,
            "seed": seed,
            "region_tail_log_prob": binomial_tail_exact(k, r, q)?,
            "low_ambiguity": {
                "frequency": mc.frequency,
                "stderr": mc.std_error,
                "exact": exact_low,
            },
            "high_ambiguity": {
                "frequency": 1.0 - mc.frequency,
                "stderr": mc.std_error,
                "exact": 1.0 - exact_low,
            },
            "within_3_stderr": within,
        },
    });
    Ok((to_json(&report), passed))
}

fn gaussian(cmd: &GaussianCommand) -> Result<Report, CliError> {
    match cmd {
        GaussianCommand::Kl { posterior, prior } => {
            let p: GaussianBelief = read_json(posterior)?;
            let p0: GaussianBelief = read_json(prior)?;
            let kl = gaussian_kl(&p, &p0)?;
            Ok(Report {
                text: format!("kl_nats: {kl:.12}\n"),
                json: json!({ "kl_nats": kl }),
            })
        }
        GaussianCommand::Halfspace {
            belief,
            halfspace,
            epsilon,
        } => {
            let p0: GaussianBelief = read_json(belief)?;
            let h: HalfSpace = read_json(halfspace)?;
            let t = target(*epsilon)?;
            let mass = halfspace_mass(&p0, &h)?;
            let delta0 = halfspace_delta0(&p0, &h)?;
            let info = halfspace_resolution_info(delta0, t)?;
            let shift = halfspace_optimal_shift(&p0, &h, t)?;
            let shift: Vec<f64> = shift.iter().copied().collect();
            let mut text = String::new();
            writeln!(text, "prior_mass: {mass:.12}").unwrap();
            writeln!(text, "delta0: {delta0:.12}").unwrap();
            writeln!(text, "info_nats: {info:.12}").unwrap();
            let s: Vec<String> = shift.iter().map(|v| format!("{v:.12}")).collect();
            writeln!(text, "mean_shift: [{}]", s.join(", ")).unwrap();
            Ok(Report {
                text,
                json: json!({ "prior_mass": mass, "delta0": delta0, "info_nats": info, "mean_shift": shift }),
            })
        }
        GaussianCommand::Polytope {
            polytope,
            sigma0,
            limit,
            epsilon,
        } => {
            let poly = polytope.resolve()?;
            let lim = limit.resolve(&poly)?;
            let result = polytope_resolution_info(*sigma0, &poly, &lim, target(*epsilon)?)?;
            let text = match result {
                ConstrainedInfo::Finite { info_nats } => format!("info_nats: {info_nats:.12}\n"),
                ConstrainedInfo::Infeasible { epsilon_min } => {
                    format!("infeasible: target below the ambiguity floor {epsilon_min:.12}\n")
                }
            };
            Ok(Report {
                text,
                json: serde_json::to_value(result).expect("serializable"),
            })
        }
        GaussianCommand::Floor { m, mu_max, epsilon } => {
            OrthantPolytope::new(*m, 1.0)?;
            if !(*mu_max > 0.0 && mu_max.is_finite()) {
                return Err(CliError::Input(format!(
                    "--mu-max: {mu_max} must be positive"
                )));
            }
            let floor = floor_at_margin(*m, *mu_max);
            let mut text = String::new();
            writeln!(text, "epsilon_min: {:.12}", floor.epsilon_min).unwrap();
            writeln!(text, "p_max: {:.12}", floor.p_max).unwrap();
            let mut json = serde_json::to_value(floor).expect("serializable");
            if let Some(eps) = epsilon {
                target(*eps)?;
                let infeasible = *eps < floor.epsilon_min;
                let status = if infeasible { "infeasible" } else { "feasible" };
                writeln!(text, "status: {status}").unwrap();
                json["status"] = json!(status);
            }
            Ok(Report { text, json })
        }
        GaussianCommand::Resolvability {
            gamma0,
            c,
            floor,
            m,
            mu_max,
        } => {
            let floor = match floor {
                Some(f) => *f,
                None => {
                    let m = m.unwrap_or(5);
                    let mu = mu_max.unwrap_or(2.13);
                    if mu.is_nan() || mu <= 0.0 {
                        return Err(CliError::Input(format!("--mu-max: {mu} must be positive")));
                    }
                    OrthantPolytope::new(m, 1.0)?;
                    floor_at_margin(m, mu).epsilon_min
                }
            };
            if !(0.0..=1.0).contains(&floor) {
                return Err(CliError::Input(format!(
                    "--floor: {floor} must lie in [0, 1]"
                )));
            }
            let bound = ResolvabilityBound::from_floor(*gamma0, floor, *c)?;
            let text = match bound {
                ResolvabilityBound::Finite { nats } => {
                    format!("resolvability_bound_nats: {nats:.12} ({ASYMPTOTIC_NOTE})\n")
                }
                ResolvabilityBound::Unbounded => "resolvability_bound: unbounded\n".to_string(),
                ResolvabilityBound::Degenerate => {
                    "resolvability_bound_nats: 0 (degenerate: floor >= gamma0)\n".to_string()
                }
            };
            let mut json = serde_json::to_value(bound).expect("serializable");
            json["floor"] = json!(floor);
            json["asymptotic"] = json!(ASYMPTOTIC_NOTE);
            Ok(Report { text, json })
        }
    }
}

fn emit(out: Option<&Path>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, content)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| CliError::Input(format!("RESINFO_THREADS: {e}")))?;
    }
    let out = cli.out.as_deref();
    let report_output = |r: Report| {
        if cli.json {
            to_json(&r.json)
        } else {
            r.text
        }
    };
    let content = match &cli.command {
        Command::Resolve {
            belief,
            partition,
            epsilon,
        } => report_output(resolve(belief, partition, *epsilon)?),
        Command::TradeoffHeatmap {
            prior_mass_grid,
            epsilon_grid,
        } => {
            let p = grid("prior-mass-grid", prior_mass_grid)?;
            let e = grid("epsilon-grid", epsilon_grid)?;
            table_output(&tradeoff_table(&p, &e)?, cli.json)
        }
        Command::FloorHeatmap {
            m_grid,
            mu_max_grid,
        } => {
            let m = grid("m-grid", m_grid)?;
            let mu = grid("mu-max-grid", mu_max_grid)?;
            table_output(&floor_table(&m, &mu)?, cli.json)
        }
        Command::DecayCurves {
            delta0,
            m,
            a,
            sigma0,
            limit,
            info_grid,
        } => {
            let polytope = OrthantPolytope::new(*m, *a)?;
            let params = DecayCurveParams {
                delta0: *delta0,
                polytope,
                sigma0: *sigma0,
                limit: limit.resolve(&polytope)?,
            };
            let info = grid("info-grid", info_grid)?;
            table_output(&decay_curves_table(&params, &info)?, cli.json)
        }
        Command::LdpVerify {
            r,
            q,
            k_grid,
            trials,
            mc_k,
            seed,
            tolerance,
        } => {
            let (content, passed) = ldp_verify(*r, *q, k_grid, *trials, *mc_k, *seed, *tolerance)?;
            emit(out, &content)?;
            if !passed {
                return Err(CliError::Verification(format!(
                    "fitted rate deviates from the theoretical rate by more than {tolerance}"
                )));
            }
            return Ok(());
        }
        Command::Gaussian(cmd) => report_output(gaussian(cmd)?),
    };
    emit(out, &content)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
