//! `nnmimo`: design checks and BER sweeps for noncoherent multiuser uplinks.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nnmimo_core::channel::{noise_power, path_loss_linear};
use nnmimo_core::constellations::{build_qam_udcg, RateAllocation, DEFAULT_ENUMERATION_CAP};
use nnmimo_core::harness::{self, Placement, RunConfig};
use nnmimo_core::mustm::{verify_identifiability, Codebook, SystemProfile};
use nnmimo_core::optimizer::{kl_breakdown, oracle, solve_design, worst_case_pair_closed_form};
use nnmimo_core::Error;
use serde_json::json;

#[derive(Parser)]
#[command(name = "nnmimo", version, about = "Noncoherent non-orthogonal massive-MIMO uplink toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; falls back to NN_MMIMO_THREADS.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the optimal design for users at fixed distances (no shadowing).
    Design {
        #[command(flatten)]
        common: Common,
        /// Comma-separated user distances in metres.
        #[arg(long, value_delimiter = ',')]
        distances: Vec<f64>,
    },
    /// Check identifiability and the closed forms against brute force.
    Verify {
        #[command(flatten)]
        common: Common,
    },
    /// Run a Monte Carlo BER sweep.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Divergence between two codewords of the design.
    Kl {
        #[command(flatten)]
        common: Common,
        /// Comma-separated user distances in metres.
        #[arg(long, value_delimiter = ',')]
        distances: Vec<f64>,
        /// Codeword index of the true block.
        #[arg(long)]
        first: usize,
        /// Codeword index of the alternative block.
        #[arg(long)]
        second: usize,
        /// Antenna count the single-antenna value is scaled by.
        #[arg(long, default_value_t = 1)]
        antennas: usize,
    },
}

enum Failure {
    Config(String),
    Verification(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidRate(_) | Error::InvalidProfile(_) => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Verification(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Design { common, distances } => design(&common, &distances),
        Command::Verify { common } => verify(&common),
        Command::Sweep { common } => sweep(&common),
        Command::Kl {
            common,
            distances,
            first,
            second,
            antennas,
        } => kl(&common, &distances, first, second, antennas),
    }
}

fn load_config(common: &Common) -> Result<RunConfig, Failure> {
    let mut config = match &common.config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn threads(common: &Common) -> Result<Option<usize>, Failure> {
    if let Some(n) = common.threads {
        return Ok(Some(n));
    }
    match std::env::var("NN_MMIMO_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::Config(format!("NN_MMIMO_THREADS={v:?} is not a count"))),
        Err(_) => Ok(None),
    }
}

/// Deterministic profile for users at the given (or configured) distances,
/// sorted by `P beta`. Returns the profile and the original user order.
fn fixed_profile(config: &RunConfig, distances: &[f64]) -> Result<(SystemProfile, Vec<usize>, Vec<f64>), Failure> {
    let distances = if distances.is_empty() {
        if config.placement != Placement::Fixed {
            return Err(Failure::Config("give --distances or a config with fixed placement".into()));
        }
        config.distances_m.clone()
    } else {
        distances.to_vec()
    };
    if distances.len() != config.users && config.in_phase_bits.is_empty() && config.quadrature_bits.is_empty() {
        let mut resized = config.clone();
        resized.users = distances.len();
        if resized.power_w.len() != 1 {
            return Err(Failure::Config("power_w must list one cap per distance".into()));
        }
        return fixed_profile(&resized, &distances);
    }
    if distances.len() != config.users {
        return Err(Failure::Config(format!("{} distances for {} users", distances.len(), config.users)));
    }
    let betas = distances
        .iter()
        .map(|&d| path_loss_linear(d, &config.channel, 0.0))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::Config(e.to_string()))?;
    let profile = SystemProfile::new(config.powers(), betas, noise_power(&config.channel))?;
    let (sorted, order) = profile.sorted();
    let sorted_distances = order.iter().map(|&i| distances[i]).collect();
    Ok((sorted, order, sorted_distances))
}

fn rate_for(config: &RunConfig, users: usize) -> Result<RateAllocation, Failure> {
    if config.in_phase_bits.is_empty() && config.quadrature_bits.is_empty() {
        Ok(RateAllocation::uniform(users, 1, 1)?)
    } else {
        Ok(config.rate_allocation()?)
    }
}

fn design(common: &Common, distances: &[f64]) -> Result<(), Failure> {
    let config = load_config(common)?;
    let (profile, order, sorted_distances) = fixed_profile(&config, distances)?;
    let rate = rate_for(&config, profile.users())?;
    let shape = build_qam_udcg(&rate, 1.0)?;
    let solution = solve_design(&profile, &shape)?;
    let report = json!({
        "user_order": order,
        "distances_m": sorted_distances,
        "powers_w": profile.powers(),
        "betas": profile.betas(),
        "sigma2": profile.sigma2(),
        "design": solution,
    });
    emit(common, "design.json", &report)
}

fn emit(common: &Common, name: &str, value: &serde_json::Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Runtime(e.to_string()))?;
    println!("{text}");
    if let Some(dir) = &common.out {
        write_file(&dir.join(name), &text)?;
    }
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    std::fs::write(path, format!("{text}\n")).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

/// Rate splits with `total` bits spread over `users` users, each user
/// carrying at least one bit.
fn rate_splits(users: usize, max_total: u32) -> Vec<RateAllocation> {
    let mut out = Vec::new();
    let per_user: Vec<(u32, u32)> = (0..=max_total)
        .flat_map(|i| (0..=max_total - i).map(move |q| (i, q)))
        .filter(|&(i, q)| i + q > 0)
        .collect();
    let mut idx = vec![0usize; users];
    loop {
        let pairs: Vec<(u32, u32)> = idx.iter().map(|&j| per_user[j]).collect();
        if pairs.iter().map(|(i, q)| i + q).sum::<u32>() <= max_total {
            let (i, q) = pairs.into_iter().unzip();
            if let Ok(r) = RateAllocation::new(i, q) {
                out.push(r);
            }
        }
        let mut axis = 0;
        while axis < users {
            idx[axis] += 1;
            if idx[axis] < per_user.len() {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
        if axis == users {
            return out;
        }
    }
}

fn verify(common: &Common) -> Result<(), Failure> {
    let config = load_config(common)?;
    let pool = threads(common)?;
    let body = || -> Result<serde_json::Value, Failure> {
        let rates: Vec<RateAllocation> = if common.config.is_some() {
            vec![config.rate_allocation()?]
        } else {
            (1..=3).flat_map(|k| rate_splits(k, 6)).collect()
        };
        let mut failures = Vec::new();
        for rate in &rates {
            let k = rate.users();
            let shape = build_qam_udcg(rate, 1.0)?;
            let caps: Vec<f64> = (0..k).map(|j| 1.0 + j as f64).collect();
            let profile = SystemProfile::new(caps, vec![1.0; k], 0.1)?;
            let sol = solve_design(&profile, &shape)?;
            let u = shape.with_spacing(sol.d_star)?;
            let cb = Codebook::build(&u, &sol.p_star, &sol.pi_star, &profile)?;
            if !verify_identifiability(&cb, &profile, 1 << 24)? {
                failures.push(format!("identifiability {rate:?}"));
            }
            let closed = worst_case_pair_closed_form(&u, &sol.p_star, &profile)?;
            let brute = oracle::exhaustive_min_f2(&u, &sol.p_star, &profile, DEFAULT_ENUMERATION_CAP)?;
            if (closed.value - brute.value).abs() > 1e-10 * brute.value.max(1.0) {
                failures.push(format!("worst pair {rate:?}: {} vs {}", closed.value, brute.value));
            }
            let f1 = kl_breakdown(&sol.p_star, &closed.s, &closed.s_tilde, &profile)?.f1;
            let last = k - 1;
            if rate.in_phase()[last] == 1 && rate.quadrature()[last] == 1 && f1.abs() > 1e-12 {
                failures.push(format!("f1 at the worst pair {rate:?} is {f1}"));
            }
            let uniform = (1..k).all(|j| rate.user_bits(j) == rate.user_bits(0));
            if k <= 3 && uniform {
                let grid = oracle::design_grid_search(&profile, &sol.energies, 20);
                if grid.objective < sol.objective * (1.0 - 1e-6) {
                    failures.push(format!("grid beats closed form for {rate:?}"));
                }
            }
        }
        if !failures.is_empty() {
            return Err(Failure::Verification(failures.join("; ")));
        }
        Ok(json!({ "rate_allocations_checked": rates.len(), "status": "ok" }))
    };
    let report = match pool {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Failure::Runtime(e.to_string()))?
            .install(body)?,
        None => body()?,
    };
    emit(common, "verify.json", &report)
}

fn sweep(common: &Common) -> Result<(), Failure> {
    if common.config.is_none() {
        return Err(Failure::Config("sweep needs --config".into()));
    }
    let config = load_config(common)?;
    let records = harness::run_sweep_with_threads(&config, threads(common)?)?;
    let (csv_path, json_path) = match &common.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| Failure::Runtime(e.to_string()))?;
            (Some(dir.join("ber.csv")), Some(dir.join("summary.json")))
        }
        None => (config.csv_path.clone(), config.json_path.clone()),
    };
    if let Some(path) = csv_path {
        harness::emit_csv(&records, &path)?;
    }
    if let Some(path) = json_path {
        harness::emit_json_summary(&records, &config, &path)?;
    }
    println!("scheme,M,distance_m,trials,bits,bit_errors,ber,ci_low,ci_high");
    for c in harness::summarize(&records, &config).cells {
        println!(
            "{},{},{},{},{},{},{:.6e},{:.6e},{:.6e}",
            c.scheme,
            c.antennas,
            c.distance_m.map(|d| d.to_string()).unwrap_or_default(),
            c.trials,
            c.bits,
            c.bit_errors,
            c.ber,
            c.ci_low,
            c.ci_high
        );
    }
    Ok(())
}

fn kl(common: &Common, distances: &[f64], first: usize, second: usize, antennas: usize) -> Result<(), Failure> {
    let config = load_config(common)?;
    let (profile, _, _) = fixed_profile(&config, distances)?;
    let rate = rate_for(&config, profile.users())?;
    let shape = build_qam_udcg(&rate, 1.0)?;
    let sol = solve_design(&profile, &shape)?;
    let u = shape.with_spacing(sol.d_star)?;
    let cb = Codebook::build(&u, &sol.p_star, &sol.pi_star, &profile)?;
    if first >= cb.len() || second >= cb.len() {
        return Err(Failure::Config(format!("codeword indices must be below {}", cb.len())));
    }
    let b = kl_breakdown(&sol.p_star, &cb.symbols(first), &cb.symbols(second), &profile)?;
    let m = antennas as f64;
    let report = json!({
        "first": first,
        "second": second,
        "antennas": antennas,
        "kl": m * b.total,
        "f1": m * b.f1,
        "f2": m * b.f2,
    });
    emit(common, "kl.json", &report)
}
