use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use patch3d::commands::{cmd_bench, cmd_eval, cmd_fit, cmd_score, cmd_sweep_k, cmd_synth};
use patch3d::config::{Overrides, RunConfig};
use patch3d::metrics::fmt_f64;
use patch3d::Error;

#[derive(Parser)]
#[command(name = "patch3d", version, about = "Point-cloud anomaly detection with semantic memory banks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic dataset tree under dataset_root.
    Synth(Common),
    /// Fit per-class memory banks from the training clouds.
    Fit(Common),
    /// Score every test cloud against its class model.
    Score(Common),
    /// Compute detection metrics from the score files.
    Eval(Common),
    /// Sweep the number of semantic spaces over k_list.
    #[command(name = "sweep-k")]
    SweepK(Common),
    /// Time fitting and scoring for every k in k_list.
    Bench(Common),
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Number of semantic spaces.
    #[arg(long)]
    k: Option<usize>,
    /// Balance ratio between the largest and smallest patch.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, Error> {
        let mut cfg = RunConfig::load(&self.config)?;
        cfg.apply(&Overrides {
            k: self.k,
            delta: self.delta,
            seed: self.seed,
            out: self.out.clone(),
        });
        Ok(cfg)
    }
}

fn init_threads() -> Result<(), Error> {
    let Ok(v) = std::env::var("PATCH3D_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| Error::Config(vec![format!("PATCH3D_THREADS: expected a positive integer, got '{v}'")]))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(vec![format!("PATCH3D_THREADS: {e}")]))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into())
}

fn run(cli: Cli) -> Result<(), Error> {
    init_threads()?;
    match cli.command {
        Command::Synth(c) => {
            let root = cmd_synth(&c.load()?)?;
            println!("wrote dataset to {}", root.display());
        }
        Command::Fit(c) => {
            for dir in cmd_fit(&c.load()?)? {
                println!("wrote model {}", dir.display());
            }
        }
        Command::Score(c) => {
            let cfg = c.load()?;
            let n = cmd_score(&cfg)?;
            println!("scored {n} clouds into {}", cfg.output_dir.join("scores").display());
        }
        Command::Eval(c) => {
            let report = cmd_eval(&c.load()?)?;
            print!("{}", report.to_pretty());
        }
        Command::SweepK(c) => {
            let result = cmd_sweep_k(&c.load()?)?;
            println!("{:>4} {:>8} {:>8} {:>8} {:>8} {:>12}", "k", "P-AUROC", "P-AUPR", "O-AUROC", "O-AUPR", "cmp/query");
            for r in &result.rows {
                match &r.error {
                    None => println!(
                        "{:>4} {:>8} {:>8} {:>8} {:>8} {:>12}",
                        r.k,
                        opt(r.p_auroc),
                        opt(r.p_aupr),
                        opt(r.o_auroc),
                        opt(r.o_aupr),
                        opt(r.comparisons_per_query)
                    ),
                    Some(e) => println!("{:>4} failed: {e}", r.k),
                }
            }
        }
        Command::Bench(c) => {
            for r in cmd_bench(&c.load()?)? {
                println!(
                    "k={:<3} cmp/query={:<12} fit={}s score={}s",
                    r.k,
                    fmt_f64(r.comparisons_per_query),
                    fmt_f64(r.fit_seconds),
                    fmt_f64(r.score_seconds)
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
