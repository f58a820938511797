//! Experiment runner CLI for the masem sampling library.

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use masem::benchmarks::{self, grid_disks::make_grid_disks};
use masem::meanfield::{
    component_loss_sim, verify_theorem_bound, ComponentWeights, InitMode, TiltedFamily,
};
use masem::metrics::discrimination::{discrimination_experiment, DiscriminationConfig};
use masem::rng::derive_rng;
use masem::runner::{run, Method, RunConfig};
use masem::MasemError;
use rand::Rng;

#[derive(Parser)]
#[command(name = "masem", about = "Uniform sampling on constrained manifolds", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a sampling method on a benchmark problem
    Run(RunArgs),
    /// List registered problems and methods
    List,
    /// Draw ground-truth samples and write them as CSV
    GroundTruth {
        #[arg(long)]
        problem: String,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the mean-field contraction bound on random instances
    MeanfieldVerify {
        #[arg(long, default_value_t = 1000)]
        instances: usize,
        #[arg(long, default_value_t = 100)]
        t_max: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Component-loss experiment on the 100-disk grid (CSV to stdout)
    ComponentLoss {
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.5,1.0,1.5")]
        tau_list: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "100,400,1000")]
        n_list: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 10)]
        iterations: usize,
        /// uniform, worst-case, or both
        #[arg(long, default_value = "both")]
        init: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Metric-discrimination experiment (CSV to stdout)
    Discrimination {
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    problem: String,
    #[arg(long)]
    method: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of particles (chains)
    #[arg(long, default_value_t = 500)]
    n: usize,
    /// Total kernel-step budget
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    /// Rejuvenation steps between resamples
    #[arg(long)]
    m_steps: Option<usize>,
    /// Slack penalty on the resampling weights
    #[arg(long)]
    mu: Option<f64>,
    /// Comma-separated metric names (default: all applicable)
    #[arg(long, value_delimiter = ',')]
    metrics: Option<Vec<String>>,
    /// Evaluate every this many rounds (0 = final only)
    #[arg(long, default_value_t = 0)]
    eval_every: usize,
    /// Output base path; writes <out>.jsonl and <out>.csv
    #[arg(long, default_value = "masem-run")]
    out: PathBuf,
}

fn exit_code_for(err: &MasemError) -> u8 {
    match err {
        MasemError::UnknownProblem(_) | MasemError::UnknownMethod(_) | MasemError::Unsupported(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("MASEM_THREADS") {
        if let Ok(threads) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global();
        }
    }
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn dispatch(cmd: Cmd) -> masem::Result<ExitCode> {
    match cmd {
        Cmd::Run(args) => {
            let method = Method::from_str(&args.method)?;
            let cfg = RunConfig {
                problem: args.problem,
                method,
                seed: args.seed,
                n_particles: args.n,
                total_steps: args.steps,
                tau: args.tau,
                k: args.k,
                m_steps: args.m_steps,
                mu: args.mu,
                metrics: args.metrics,
                eval_every: args.eval_every,
                out: args.out,
            };
            let summary = run(&cfg)?;
            println!(
                "wrote {} and {} ({}s)",
                summary.jsonl_path.display(),
                summary.csv_path.display(),
                summary.wall_time_s
            );
            Ok(ExitCode::SUCCESS)
        }
        Cmd::List => {
            println!("problems:");
            for name in benchmarks::problem_names() {
                println!("  {name}");
            }
            println!("methods:");
            for m in Method::all() {
                println!("  {}", m.name());
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::GroundTruth {
            problem,
            n,
            seed,
            out,
        } => {
            let bench = benchmarks::make(&problem)?;
            let mut rng = derive_rng(seed, "gt", 0);
            let points = benchmarks::ground_truth(&bench.problem, n, &mut rng)?;
            let mut text = String::new();
            for p in &points {
                let row: Vec<String> = p.iter().map(|v| v.to_string()).collect();
                text.push_str(&row.join(","));
                text.push('\n');
            }
            std::fs::write(&out, text)?;
            println!("wrote {} samples to {}", points.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::MeanfieldVerify {
            instances,
            t_max,
            seed,
        } => {
            let mut rng = derive_rng(seed, "meanfield-verify", 0);
            let mut violations = 0usize;
            let mut worst_ratio: f64 = 0.0;
            for _ in 0..instances {
                let c = rng.random_range(2..=50);
                let beta: f64 = rng.random_range(0.1..=0.9);
                let alpha0 = random_simplex(c, &mut rng);
                let alpha_star = random_simplex(c, &mut rng);
                let family = TiltedFamily::new(&alpha0, &alpha_star, beta)?;
                let report = verify_theorem_bound(&family, t_max);
                violations += report.violations;
                worst_ratio = worst_ratio.max(report.max_ratio);
            }
            println!(
                "instances={instances} t_max={t_max} violations={violations} max_ratio={worst_ratio:.6}"
            );
            if violations == 0 {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(1))
            }
        }
        Cmd::ComponentLoss {
            tau_list,
            n_list,
            trials,
            iterations,
            init,
            seed,
        } => {
            let grid = make_grid_disks()?;
            let modes: Vec<(InitMode, &str)> = match init.as_str() {
                "uniform" => vec![(InitMode::Uniform, "uniform")],
                "worst-case" => vec![(InitMode::WorstCase, "worst-case")],
                "both" => vec![
                    (InitMode::Uniform, "uniform"),
                    (InitMode::WorstCase, "worst-case"),
                ],
                other => {
                    return Err(MasemError::Config(format!(
                        "unknown init mode '{other}' (uniform, worst-case, both)"
                    )))
                }
            };
            println!("tau,n,init_mode,mean_covered,ci95,trials");
            for &tau in &tau_list {
                for &n in &n_list {
                    for (mode, mode_name) in &modes {
                        let result = component_loss_sim(
                            &grid, n, tau, iterations, trials, *mode, seed,
                        )?;
                        println!(
                            "{tau},{n},{mode_name},{},{},{}",
                            result.mean_covered, result.ci95, result.trials
                        );
                    }
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Discrimination { trials, seed } => {
            let cfg = DiscriminationConfig {
                n_trials: trials,
                ..DiscriminationConfig::default()
            };
            let report = discrimination_experiment(seed, &cfg)?;
            println!("metric,bias,p_value");
            println!("energy_distance,center,{}", report.p_center.energy_distance);
            println!("sinkhorn_w22,center,{}", report.p_center.sinkhorn_w22);
            println!("pairwise_kl,center,{}", report.p_center.pairwise_kl);
            println!("energy_distance,edge,{}", report.p_edge.energy_distance);
            println!("sinkhorn_w22,edge,{}", report.p_edge.sinkhorn_w22);
            println!("pairwise_kl,edge,{}", report.p_edge.pairwise_kl);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn random_simplex<R: Rng>(c: usize, rng: &mut R) -> ComponentWeights {
    // Dirichlet(1, ..., 1) via normalized exponentials.
    let masses: Vec<f64> = (0..c)
        .map(|_| {
            let u: f64 = rng.random();
            (-u.max(1e-300).ln()).max(1e-12)
        })
        .collect();
    ComponentWeights::from_masses(&masses).expect("positive masses")
}
