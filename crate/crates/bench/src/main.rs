use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use slp_core::solvers::{ComplexityModel, Scheme};
use slp_bench::sweep::{self, Evaluator, SweepResult};
use slp_bench::{data, timing, train, BenchError, Result, RunConfig, SchemeId};

/// Symbol-level precoding benchmarks.
#[derive(Debug, Parser)]
#[command(name = "slp-bench", version)]
struct Cli {
    /// TOML run configuration; built-in defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the data and training seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides output.dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Writes the training and test datasets (binary and CSV).
    GenData,
    /// Trains SLP-DNet checkpoints.
    Train {
        /// Network scheme to train; repeat for several. Defaults to every network scheme in the sweeps.
        #[arg(long)]
        scheme: Vec<SchemeId>,
    },
    /// Solves the test set with an optimization scheme at one SINR.
    Solve {
        #[arg(long, default_value = "SLP-relaxed")]
        scheme: SchemeId,
        #[arg(long, default_value_t = 20.0)]
        sinr_db: f64,
    },
    /// Runs a trained network on the test set at one SINR.
    Infer {
        #[arg(long, default_value = "SLP-DNet-relaxed")]
        scheme: SchemeId,
        #[arg(long, default_value_t = 20.0)]
        sinr_db: f64,
    },
    /// Transmit power against the SINR target.
    SweepSinr,
    /// Transmit power against the CSI error bound.
    SweepErrorbound,
    /// Per-symbol execution time against the number of users.
    BenchTime,
    /// Closed-form operation counts.
    CountOps {
        #[arg(long)]
        n_antennas: Option<usize>,
        #[arg(long)]
        n_users: Option<usize>,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg = cfg.with_seed(s);
    }
    if let Some(o) = &cli.out {
        cfg.output.dir = o.clone();
    }
    Ok(cfg)
}

fn print_rows(r: &SweepResult) {
    for row in &r.rows {
        let db = row.mean_power_db.map_or("-".to_string(), |p| format!("{p:.3} dB"));
        println!(
            "{:<18} {}={:<8} power {:<12} feasible {:>6.1}%",
            row.scheme,
            row.grid_param_name,
            row.grid_value,
            db,
            100.0 * row.feasibility_rate
        );
    }
}

fn finish(r: &SweepResult, path: &Path) -> Result<ExitCode> {
    sweep::emit_csv(r, path)?;
    print_rows(r);
    println!("wrote {}", path.display());
    Ok(if r.infeasible_only() { ExitCode::from(3) } else { ExitCode::SUCCESS })
}

fn network_kind(s: SchemeId) -> Result<slp_core::solvers::SlpKind> {
    match s {
        SchemeId::Dnet(k) => Ok(k),
        _ => Err(BenchError::Config(format!("{s} is not a network scheme"))),
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let cfg = load_config(&cli)?;
    let out = cfg.output.dir.clone();
    match cli.command {
        Command::GenData => {
            let dir = out.join("data");
            std::fs::create_dir_all(&dir).map_err(|e| BenchError::io(&dir, e))?;
            for (name, d) in [("train", data::train_draw(&cfg)?), ("test", data::test_draw(&cfg)?)] {
                let ds = data::dataset(&d)?;
                ds.write(&dir.join(format!("{name}.slpd")))?;
                ds.write_csv(&dir.join(format!("{name}.csv")))?;
                println!("{name}: {} samples", d.len());
            }
            println!("wrote {}", dir.display());
        }
        Command::Train { scheme } => {
            let schemes = if scheme.is_empty() {
                let mut v: Vec<SchemeId> = cfg.schemes()?.into_iter().chain(cfg.error_bound_schemes()?).collect();
                v.retain(|s| matches!(s, SchemeId::Dnet(_)));
                v.dedup();
                v
            } else {
                scheme
            };
            for s in schemes {
                let (ckpt, loss) = train::train_and_save(&cfg, network_kind(s)?)?;
                println!("{s}: {} ({})", ckpt.display(), loss.display());
            }
        }
        Command::Solve { scheme, sinr_db } => {
            if matches!(scheme, SchemeId::Dnet(_)) {
                return Err(BenchError::Config(format!("{scheme} is a network scheme; use `infer`")));
            }
            let r = sweep::run_single(&cfg, &mut Evaluator::new(&cfg), scheme, sinr_db)?;
            return finish(&r, &out.join("solve.csv"));
        }
        Command::Infer { scheme, sinr_db } => {
            network_kind(scheme)?;
            let r = sweep::run_single(&cfg, &mut Evaluator::new(&cfg), scheme, sinr_db)?;
            return finish(&r, &out.join("infer.csv"));
        }
        Command::SweepSinr => {
            let r = sweep::run_power_vs_sinr(&cfg, &mut Evaluator::new(&cfg))?;
            return finish(&r, &out.join("power_vs_sinr.csv"));
        }
        Command::SweepErrorbound => {
            let r = sweep::run_power_vs_errorbound(&cfg, &mut Evaluator::new(&cfg))?;
            return finish(&r, &out.join("power_vs_errorbound.csv"));
        }
        Command::BenchTime => {
            let r = timing::run_timing(&cfg)?;
            for s in &r.summaries {
                match (s.mean_s, s.median_s) {
                    (Some(mean), Some(med)) => println!(
                        "{:<18} K={:<2} mean {:>10.3} us  median {:>10.3} us",
                        s.scheme.name(),
                        s.n_users,
                        mean * 1e6,
                        med * 1e6
                    ),
                    _ => println!("{:<18} K={:<2} infeasible (K > N_t)", s.scheme.name(), s.n_users),
                }
            }
            let path = out.join("timing.csv");
            sweep::emit_csv(&r.sweep(), &path)?;
            println!("wrote {}", path.display());
        }
        Command::CountOps { n_antennas, n_users } => {
            let nt = n_antennas.unwrap_or(cfg.scenario.n_antennas);
            let k = n_users.unwrap_or(cfg.scenario.n_users);
            let eps = cfg.solver.epsilon;
            println!("scheme,n_antennas,n_users,epsilon,operations");
            for s in Scheme::ALL {
                let n = ComplexityModel::new(s).count(nt, k, eps)?;
                println!("{},{nt},{k},{eps},{n}", s.name());
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
