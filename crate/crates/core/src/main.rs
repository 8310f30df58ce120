use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::RngCore;

use robocomm::bench::run_bench;
use robocomm::codec;
use robocomm::identity::{generate_keypair, Identity};
use robocomm::swarm_sim::{self, Mode, SimConfig};
use robocomm::trade::{run_scenario, Scenario, ScenarioError};

/// DID-authenticated robot energy trading: simulations, benchmarks and demos.
///
/// Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
#[derive(Parser, Debug)]
#[command(name = "robocomm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the swarm delivery experiment and write CSV and JSON metrics.
    Simulate(SimulateArgs),
    /// Time signing, verification and DID document generation.
    Bench(BenchArgs),
    /// Play a scripted two-robot trade and check the settled balances.
    DemoTrade(DemoArgs),
    /// Write a secret key, DID and DID document.
    Keygen(KeygenArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Baseline,
    Robocomm,
    Both,
}

#[derive(clap::Args, Debug)]
struct SimulateArgs {
    /// Which swarm to run; `both` pairs them on the same seeds.
    #[arg(long, value_enum, default_value = "both")]
    mode: ModeArg,
    /// Number of runs [default: 100, or the config file].
    #[arg(long)]
    runs: Option<u32>,
    /// Steps per run [default: 50, or the config file].
    #[arg(long)]
    steps: Option<u32>,
    /// Master seed [default: 42, or the config file].
    #[arg(long, env = "ROBOCOMM_SEED")]
    seed: Option<u64>,
    /// Flat `key = value` file using the SimConfig field names.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for `<mode>.csv` and `summary.json`.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(clap::Args, Debug)]
struct BenchArgs {
    #[arg(long, default_value_t = 1000)]
    iterations: usize,
    #[arg(long, env = "ROBOCOMM_SEED", default_value_t = 42)]
    seed: u64,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(clap::Args, Debug)]
struct DemoArgs {
    /// honest, buyer-withholds, seller-stale-close or peer-offline.
    #[arg(required_unless_present = "file")]
    scenario: Option<String>,
    /// Trade size in units.
    #[arg(long, default_value_t = 3)]
    units: u64,
    /// Scenario file in `key = value` form instead of a built-in.
    #[arg(long, conflicts_with = "scenario")]
    file: Option<PathBuf>,
    #[arg(long, env = "ROBOCOMM_SEED", default_value_t = 42)]
    seed: u64,
    /// Print the result as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(clap::Args, Debug)]
struct KeygenArgs {
    /// Output directory.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Derive the key from this seed instead of the OS RNG.
    #[arg(long, env = "ROBOCOMM_SEED")]
    seed: Option<u64>,
    /// Overwrite existing files.
    #[arg(long)]
    force: bool,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn io(path: &Path, e: io::Error) -> Self {
        Failure::Runtime(format!("{}: {e}", path.display()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Bench(a) => bench(a),
        Command::DemoTrade(a) => demo(a),
        Command::Keygen(a) => keygen(a),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| Failure::io(path, e))
}

fn simulate(a: SimulateArgs) -> Result<ExitCode, Failure> {
    let mut cfg = SimConfig::default();
    if let Some(path) = &a.config {
        let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        cfg.apply_text(&text).map_err(|e| Failure::Usage(e.to_string()))?;
    }
    if let Some(r) = a.runs {
        cfg.runs = r;
    }
    if let Some(s) = a.steps {
        cfg.steps = s;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    fs::create_dir_all(&a.out_dir).map_err(|e| Failure::io(&a.out_dir, e))?;

    let csv = |runs: &[swarm_sim::RunMetrics], mode: Mode| -> Result<PathBuf, Failure> {
        let path = a.out_dir.join(format!("{}.csv", mode.name()));
        let mut buf = Vec::new();
        swarm_sim::write_csv(runs, &mut buf).expect("writing to memory");
        write_file(&path, &buf)?;
        Ok(path)
    };
    let summary = a.out_dir.join("summary.json");
    match a.mode {
        ModeArg::Both => {
            let cmp = swarm_sim::compare(&cfg).map_err(|e| Failure::Runtime(e.to_string()))?;
            let b = csv(&cmp.baseline_runs, Mode::Baseline)?;
            let e = csv(&cmp.enabled_runs, Mode::RoboCommEnabled)?;
            let json = serde_json::to_vec_pretty(&cmp).expect("summary serializes");
            write_file(&summary, &json)?;
            let (d, s) = (&cmp.deliveries, &cmp.stalled);
            println!("runs={} steps={} seed={}", cfg.runs, cfg.steps, cfg.seed);
            println!(
                "deliveries  baseline={:.3} robocomm={:.3} diff={:+.3} ci95=[{:.3}, {:.3}]",
                d.baseline_mean, d.enabled_mean, d.mean_diff, d.ci_low, d.ci_high
            );
            println!(
                "stalled     baseline={:.3} robocomm={:.3} diff={:+.3} ci95=[{:.3}, {:.3}]",
                s.baseline_mean, s.enabled_mean, s.mean_diff, s.ci_low, s.ci_high
            );
            println!("trades={} units={}", cmp.trades_completed, cmp.units_traded);
            println!(
                "directional: {}",
                if cmp.directional_holds() { "holds" } else { "does not hold" }
            );
            println!("wrote {} {} {}", b.display(), e.display(), summary.display());
            if !cmp.energy_conserved {
                return Err(Failure::Runtime("energy bookkeeping violated".into()));
            }
        }
        ModeArg::Baseline | ModeArg::Robocomm => {
            cfg.mode = if matches!(a.mode, ModeArg::Baseline) {
                Mode::Baseline
            } else {
                Mode::RoboCommEnabled
            };
            let runs = swarm_sim::run(&cfg).map_err(|e| Failure::Runtime(e.to_string()))?;
            let path = csv(&runs, cfg.mode)?;
            let finals: Vec<(u64, u64)> = runs.iter().map(|r| (r.final_deliveries(), r.final_stalled())).collect();
            let n = finals.len() as f64;
            let json = serde_json::json!({
                "config": cfg,
                "mean_final_deliveries": finals.iter().map(|f| f.0 as f64).sum::<f64>() / n,
                "mean_final_stalled": finals.iter().map(|f| f.1 as f64).sum::<f64>() / n,
                "trades_completed": runs.iter().map(|r| r.trades.completed).sum::<u64>(),
            });
            write_file(&summary, &serde_json::to_vec_pretty(&json).expect("summary serializes"))?;
            println!("wrote {} {}", path.display(), summary.display());
            if !runs.iter().all(|r| r.energy_conserved) {
                return Err(Failure::Runtime("energy bookkeeping violated".into()));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn bench(a: BenchArgs) -> Result<ExitCode, Failure> {
    if a.iterations == 0 {
        return Err(Failure::Usage("--iterations must be positive".into()));
    }
    let r = run_bench(a.iterations, a.seed);
    if a.json {
        println!("{}", serde_json::to_string_pretty(&r).expect("report serializes"));
        return Ok(ExitCode::SUCCESS);
    }
    println!("{:<10} {:>10} {:>12} {:>12}", "op", "iterations", "mean_ms", "stddev_ms");
    for t in &r.timings {
        println!("{:<10} {:>10} {:>12.4} {:>12.4}", t.name, t.iterations, t.mean_ms, t.stddev_ms);
    }
    println!("DidDocument       {} bytes (reference 563)", r.did_document_bytes);
    println!("SignedOffChainTx  {} bytes (reference 480)", r.signed_offchain_tx_bytes);
    Ok(ExitCode::SUCCESS)
}

fn demo(a: DemoArgs) -> Result<ExitCode, Failure> {
    let sc = match (&a.file, &a.scenario) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            Scenario::parse(&text).map_err(|e| Failure::Usage(e.to_string()))?
        }
        (None, Some(name)) => Scenario::builtin(name, a.units).map_err(|e| Failure::Usage(e.to_string()))?,
        (None, None) => unreachable!("clap requires one of them"),
    };
    let res = match run_scenario(&sc, a.seed) {
        Ok(r) => r,
        Err(e @ ScenarioError::Trade(_)) => return Err(Failure::Runtime(e.to_string())),
        Err(e) => return Err(Failure::Usage(e.to_string())),
    };
    let ok = res.balances_match() && res.replay_ok;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&res).expect("result serializes"));
    } else {
        let out = io::stdout();
        let mut out = out.lock();
        let _ = writeln!(out, "scenario {} ({} units at {} per unit)", sc.name, sc.units, sc.unit_price);
        for line in &res.report.transcript {
            let _ = writeln!(out, "  {line}");
        }
        let (i, e, c) = res.expected_totals;
        let _ = writeln!(out, "settled iteration {i}: {e} energy, {c} credits");
        for (who, exp, act) in [
            ("seller", res.expected.seller, res.actual.seller),
            ("buyer", res.expected.buyer, res.actual.buyer),
        ] {
            let _ = writeln!(
                out,
                "{who:<6} credit {:>4} (expected {:>4})  energy {:>4} (expected {:>4})",
                act.credit_score, exp.credit_score, act.energy_level, exp.energy_level
            );
        }
        let _ = writeln!(out, "replay hash {}", if res.replay_ok { "matches" } else { "MISMATCH" });
        let _ = writeln!(out, "{}", if ok { "balances match" } else { "BALANCES DIFFER" });
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn keygen(a: KeygenArgs) -> Result<ExitCode, Failure> {
    let secret_path = a.out_dir.join("robot.key");
    let did_path = a.out_dir.join("robot.did");
    let doc_path = a.out_dir.join("robot.did.json");
    if !a.force {
        if let Some(p) = [&secret_path, &did_path, &doc_path].into_iter().find(|p| p.exists()) {
            return Err(Failure::Runtime(format!("{} exists; pass --force to overwrite", p.display())));
        }
    }
    fs::create_dir_all(&a.out_dir).map_err(|e| Failure::io(&a.out_dir, e))?;

    let secret = match a.seed {
        Some(s) => codec::sha256(&[b"robocomm/keygen", &s.to_be_bytes()]),
        None => loop {
            let mut b = [0u8; 32];
            rand::rngs::OsRng.fill_bytes(&mut b);
            if generate_keypair(&b).is_ok() {
                break b;
            }
        },
    };
    let id = Identity::from_seed(&secret, 10333).map_err(|e| Failure::Runtime(e.to_string()))?;
    write_secret(&secret_path, hex::encode(secret).as_bytes())?;
    write_file(&did_path, format!("{}\n", id.did).as_bytes())?;
    write_file(&doc_path, id.document(0).to_json_pretty().as_bytes())?;
    println!("{}", id.did);
    Ok(ExitCode::SUCCESS)
}

#[cfg(unix)]
fn write_secret(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    use std::os::unix::fs::{OpenOptionsExt, PermissionsExt};
    let mut f = fs::OpenOptions::new()
        .write(true)
        .create(true)
        .truncate(true)
        .mode(0o600)
        .open(path)
        .map_err(|e| Failure::io(path, e))?;
    // An existing file keeps its old mode unless reset.
    f.set_permissions(fs::Permissions::from_mode(0o600))
        .and_then(|_| f.write_all(bytes))
        .map_err(|e| Failure::io(path, e))
}

#[cfg(not(unix))]
fn write_secret(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    write_file(path, bytes)
}
