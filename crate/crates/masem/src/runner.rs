//! Experiment runner: problem/method registries, seeded execution, scheduled
//! metric evaluation, and machine-readable result emission.
//!
//! One run executes a method on a problem, evaluates the applicable metrics
//! every `eval_every` resampling rounds and at completion, and writes one
//! JSONL record per evaluation plus a final CSV summary row. All randomness
//! flows from the run seed through named sub-streams, so rerunning a config
//! yields byte-identical JSONL regardless of thread count. Wall-clock time
//! appears only in the CSV.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use crate::baselines::{cluster_nhr_run, ClusterConfig};
use crate::benchmarks::{self, Bench};
use crate::constraint::ConstraintProblem;
use crate::ensemble::ParticleEnsemble;
use crate::error::{MasemError, Result};
use crate::kernels::{kernel_step, KernelConfig, KernelKind};
use crate::metrics::{
    feasible_entropy, homotopy_entropy, mean_max_slack, median_cost_reg, pairwise_kl,
    sinkhorn_w22, tv_components, MetricReport,
};
use crate::projection::initialize_ensemble;
use crate::resampler::{masem_run, IterationRecord, MasemConfig};
use crate::rng::derive_rng;
use crate::scmc::{geometric_schedule, scmc_run};

pub const SCHEMA_VERSION: u32 = 1;
/// Feasibility tolerance shared by the TV and feasible-entropy metrics.
pub const FEASIBLE_TOL: f64 = 1e-5;
const SINKHORN_MAX_ITERS: usize = 5000;
const SINKHORN_TOL: f64 = 1e-8;
const SCMC_SWEEPS_PER_STAGE: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Nhr,
    Olla,
    MasemNhr,
    MasemOlla,
    Scmc,
    ClusterNhr,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Nhr => "nhr",
            Method::Olla => "olla",
            Method::MasemNhr => "masem-nhr",
            Method::MasemOlla => "masem-olla",
            Method::Scmc => "scmc",
            Method::ClusterNhr => "cluster-nhr",
        }
    }

    pub fn all() -> [Method; 6] {
        [
            Method::Nhr,
            Method::Olla,
            Method::MasemNhr,
            Method::MasemOlla,
            Method::Scmc,
            Method::ClusterNhr,
        ]
    }
}

impl FromStr for Method {
    type Err = MasemError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nhr" => Ok(Method::Nhr),
            "olla" => Ok(Method::Olla),
            "masem-nhr" => Ok(Method::MasemNhr),
            "masem-olla" => Ok(Method::MasemOlla),
            "scmc" => Ok(Method::Scmc),
            "cluster-nhr" => Ok(Method::ClusterNhr),
            other => Err(MasemError::UnknownMethod(other.to_string())),
        }
    }
}

/// Tuned entropy-resampling defaults `(tau, m, k)` per problem.
pub fn default_params(problem: &str, kind: KernelKind) -> (f64, usize, usize) {
    let nhr = matches!(kind, KernelKind::Nhr);
    match problem {
        "disks-connected" | "disks-disconnected" => (1.0, 50, 4),
        "seven-lobes" => {
            if nhr {
                (0.81, 5, 8)
            } else {
                (0.67, 5, 8)
            }
        }
        "sine" => {
            if nhr {
                (0.75, 5, 16)
            } else {
                (0.98, 10, 16)
            }
        }
        "swiss-roll" => {
            if nhr {
                (0.65, 5, 16)
            } else {
                (0.5, 50, 8)
            }
        }
        "mp-grid" => (0.65, 50, 8),
        "mp-random" => {
            if nhr {
                (1.0, 50, 8)
            } else {
                (0.935, 50, 4)
            }
        }
        "grasping" => {
            if nhr {
                (0.41, 5, 19)
            } else {
                (0.94, 10, 16)
            }
        }
        other if other.starts_with("stress:") => {
            let fixed_manifold = parse_stress_rule(other);
            if fixed_manifold {
                (0.3, 5, 16)
            } else if nhr {
                (0.74, 20, 20)
            } else {
                (0.3, 5, 16)
            }
        }
        _ => (1.0, 5, 4),
    }
}

/// True when the stress instance fixes the manifold dimension (m = d - 3).
fn parse_stress_rule(name: &str) -> bool {
    let mut d = None;
    let mut m = None;
    if let Some(rest) = name.strip_prefix("stress:") {
        for part in rest.split(',') {
            if let Some((k, v)) = part.split_once('=') {
                if let Ok(val) = v.trim().parse::<usize>() {
                    match k.trim() {
                        "d" => d = Some(val),
                        "m" => m = Some(val),
                        _ => {}
                    }
                }
            }
        }
    }
    matches!((d, m), (Some(d), Some(m)) if m + 3 == d)
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub problem: String,
    pub method: Method,
    pub seed: u64,
    pub n_particles: usize,
    /// Total kernel-step budget; resampling methods split it into
    /// `steps / m` rounds of `m` rejuvenation steps.
    pub total_steps: usize,
    pub tau: Option<f64>,
    pub k: Option<usize>,
    pub m_steps: Option<usize>,
    pub mu: Option<f64>,
    /// Requested metric names; `None` evaluates every applicable metric.
    pub metrics: Option<Vec<String>>,
    /// Evaluate every this many rounds (0 = final evaluation only).
    pub eval_every: usize,
    /// Output base path; the runner writes `<out>.jsonl` and `<out>.csv`.
    pub out: PathBuf,
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub final_report: MetricReport,
    pub jsonl_path: PathBuf,
    pub csv_path: PathBuf,
    pub wall_time_s: f64,
    /// Mean max violation before the final projection pass (SCMC only).
    pub scmc_pre_projection_violation: Option<f64>,
}

const METRIC_NAMES: [&str; 6] = [
    "sinkhorn_w22",
    "pairwise_kl",
    "feasible_entropy",
    "tv_components",
    "homotopy_entropy",
    "mean_max_slack",
];

fn validate_metric_names(names: &[String]) -> Result<()> {
    for n in names {
        if !METRIC_NAMES.contains(&n.as_str()) {
            return Err(MasemError::Config(format!(
                "unknown metric '{n}' (known: {})",
                METRIC_NAMES.join(", ")
            )));
        }
    }
    Ok(())
}

struct Evaluator<'a> {
    bench: &'a Bench,
    cfg: &'a RunConfig,
    gt: Option<Vec<Vec<f64>>>,
    reports: Vec<MetricReport>,
}

impl<'a> Evaluator<'a> {
    fn new(bench: &'a Bench, cfg: &'a RunConfig) -> Result<Self> {
        let gt = if bench.problem.ground_truth.is_some() {
            Some(load_or_draw_ground_truth(
                &bench.problem,
                cfg.n_particles,
                cfg.seed,
                &cfg.out,
            )?)
        } else {
            None
        };
        Ok(Self {
            bench,
            cfg,
            gt,
            reports: Vec::new(),
        })
    }

    fn wants(&self, metric: &str) -> bool {
        match &self.cfg.metrics {
            Some(list) => list.iter().any(|m| m == metric),
            None => true,
        }
    }

    fn evaluate(&mut self, samples: &[Vec<f64>], iteration: usize) -> Result<()> {
        let problem = &self.bench.problem;
        let mut report = MetricReport {
            schema_version: SCHEMA_VERSION,
            problem: self.cfg.problem.clone(),
            method: self.cfg.method.name().to_string(),
            seed: self.cfg.seed,
            n: self.cfg.n_particles,
            iteration,
            sinkhorn_w22: None,
            pairwise_kl: None,
            feasible_entropy: None,
            tv_components: None,
            homotopy_entropy: None,
            mean_max_slack: mean_max_slack(samples, problem)?,
        };

        if let Some(gt) = &self.gt {
            if self.wants("sinkhorn_w22") {
                let reg = median_cost_reg(samples, gt);
                report.sinkhorn_w22 =
                    Some(sinkhorn_w22(samples, gt, reg, SINKHORN_MAX_ITERS, SINKHORN_TOL)?.cost);
            }
            if self.wants("pairwise_kl") {
                let clip = problem.pairwise_clip.unwrap_or_else(|| {
                    problem
                        .hi
                        .iter()
                        .zip(&problem.lo)
                        .map(|(h, l)| h - l)
                        .fold(0.0, f64::max)
                });
                report.pairwise_kl = Some(pairwise_kl(gt, samples, clip)?);
            }
        } else if self.wants("feasible_entropy") {
            let mut rng = derive_rng(self.cfg.seed, "metrics", iteration as u64);
            report.feasible_entropy = feasible_entropy(samples, problem, FEASIBLE_TOL, &mut rng);
        }
        if self.wants("tv_components")
            && problem.component_of.is_some()
            && problem.component_masses.is_some()
        {
            report.tv_components = Some(tv_components(samples, problem, FEASIBLE_TOL)?);
        }
        if self.wants("homotopy_entropy") {
            if let Some(info) = &self.bench.motion {
                let paths: Vec<Vec<[f64; 2]>> =
                    samples.iter().map(|x| (info.discretize)(x)).collect();
                report.homotopy_entropy = Some(homotopy_entropy(&paths, &info.obstacles));
            }
        }
        self.reports.push(report);
        Ok(())
    }
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

/// Ground-truth samples cached beside the results, keyed by
/// `(problem, seed, n)`. The cache stores exact f64 values (JSON round-trip)
/// and is written atomically via a temp-file rename.
fn load_or_draw_ground_truth(
    problem: &ConstraintProblem,
    n: usize,
    seed: u64,
    out: &Path,
) -> Result<Vec<Vec<f64>>> {
    let dir = out.parent().map(Path::to_path_buf).unwrap_or_default();
    let cache = dir.join(format!(
        "gt-cache-{}-{}-{}.json",
        sanitize(&problem.name),
        seed,
        n
    ));
    if let Ok(bytes) = fs::read(&cache) {
        if let Ok(points) = serde_json::from_slice::<Vec<Vec<f64>>>(&bytes) {
            if points.len() == n {
                return Ok(points);
            }
        }
    }
    let mut rng = derive_rng(seed, "gt", 0);
    let points = benchmarks::ground_truth(problem, n, &mut rng)?;
    if !dir.as_os_str().is_empty() {
        fs::create_dir_all(&dir)?;
    }
    let tmp = cache.with_extension("json.tmp");
    fs::write(&tmp, serde_json::to_vec(&points).expect("serializable"))?;
    fs::rename(&tmp, &cache)?;
    Ok(points)
}

fn masem_config(cfg: &RunConfig, kind: KernelKind) -> MasemConfig {
    let (tau_d, m_d, k_d) = default_params(&cfg.problem, kind);
    let m = cfg.m_steps.unwrap_or(m_d).max(1);
    let kernel = match kind {
        KernelKind::Nhr => KernelConfig::nhr(),
        KernelKind::Olla => KernelConfig::olla(),
    };
    let mut mc = MasemConfig::new(cfg.n_particles, kernel);
    mc.n_iterations = cfg.total_steps / m;
    mc.rejuvenation_steps = m;
    mc.temperature = cfg.tau.unwrap_or(tau_d);
    mc.k_max = cfg.k.unwrap_or(k_d).min(cfg.n_particles.saturating_sub(1)).max(1);
    mc.penalty = cfg.mu.unwrap_or(1000.0);
    mc.seed = cfg.seed;
    mc
}

/// Kernel chains without resampling, in the same round structure as the
/// resampling methods so evaluation schedules line up.
fn plain_chains(
    problem: &ConstraintProblem,
    cfg: &MasemConfig,
    mut callback: impl FnMut(&IterationRecord, &ParticleEnsemble),
) -> Result<(ParticleEnsemble, Vec<IterationRecord>)> {
    cfg.validate()?;
    let mut init_rng = derive_rng(cfg.seed, "init", 0);
    let mut ensemble =
        initialize_ensemble(problem, cfg.n_particles, &mut init_rng, &cfg.projection)?;
    let mut log = Vec::new();
    for t in 0..=cfg.n_iterations {
        for _ in 0..cfg.rejuvenation_steps {
            kernel_step(&mut ensemble, problem, &cfg.kernel)?;
        }
        ensemble.iteration = t;
        let rec = IterationRecord {
            iteration: t,
            ess: ensemble.len() as f64,
            mean_slack: ensemble.mean_slack_value(),
            max_violation: ensemble.max_violation(),
            component_counts: ensemble.component_counts(problem),
        };
        callback(&rec, &ensemble);
        log.push(rec);
    }
    Ok((ensemble, log))
}

/// Execute a run end to end and write its outputs.
pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    if let Some(names) = &cfg.metrics {
        validate_metric_names(names)?;
    }
    let bench = benchmarks::make(&cfg.problem)?;
    let start = Instant::now();
    let mut evaluator = Evaluator::new(&bench, cfg)?;
    let mut scmc_pre_projection = None;

    {
        let eval_every = cfg.eval_every;
        let rounds = final_iteration(cfg);
        let mut eval_round = |rec: &IterationRecord, ens: &ParticleEnsemble| -> Result<()> {
            // The final round is evaluated once, after the method returns.
            if eval_every > 0
                && rec.iteration > 0
                && rec.iteration != rounds
                && rec.iteration % eval_every == 0
            {
                evaluator.evaluate(ens.positions(), rec.iteration)?;
            }
            Ok(())
        };

        let final_ensemble = match cfg.method {
            Method::MasemNhr | Method::MasemOlla => {
                let kind = if cfg.method == Method::MasemNhr {
                    KernelKind::Nhr
                } else {
                    KernelKind::Olla
                };
                let mc = masem_config(cfg, kind);
                let mut err = None;
                let (ens, _log) = masem_run(&bench.problem, &mc, |rec, ens| {
                    if err.is_none() {
                        err = eval_round(rec, ens).err();
                    }
                })?;
                if let Some(e) = err {
                    return Err(e);
                }
                ens
            }
            Method::Nhr | Method::Olla => {
                let kind = if cfg.method == Method::Nhr {
                    KernelKind::Nhr
                } else {
                    KernelKind::Olla
                };
                let mc = masem_config(cfg, kind);
                let mut err = None;
                let (ens, _log) = plain_chains(&bench.problem, &mc, |rec, ens| {
                    if err.is_none() {
                        err = eval_round(rec, ens).err();
                    }
                })?;
                if let Some(e) = err {
                    return Err(e);
                }
                ens
            }
            Method::ClusterNhr => {
                let mc = masem_config(cfg, KernelKind::Nhr);
                let ccfg = ClusterConfig {
                    linkage_radius: 2.0 * mc.kernel.nhr_max_step,
                    ..ClusterConfig::default()
                };
                let mut err = None;
                let (ens, _log) = cluster_nhr_run(&bench.problem, &mc, &ccfg, |rec, ens| {
                    if err.is_none() {
                        err = eval_round(rec, ens).err();
                    }
                })?;
                if let Some(e) = err {
                    return Err(e);
                }
                ens
            }
            Method::Scmc => {
                let stages = (cfg.total_steps / SCMC_SWEEPS_PER_STAGE).max(2);
                let schedule = geometric_schedule(1.0, 1e6, stages);
                let (ens, log) = scmc_run(
                    &bench.problem,
                    cfg.n_particles,
                    &schedule,
                    cfg.seed,
                    &Default::default(),
                )?;
                scmc_pre_projection = Some(log.pre_projection_mean_max_violation);
                ens
            }
        };

        evaluator.evaluate(final_ensemble.positions(), final_iteration(cfg))?;
    }

    let wall_time_s = start.elapsed().as_secs_f64();
    let reports = evaluator.reports;
    let final_report = reports.last().expect("at least the final evaluation").clone();

    let jsonl_path = cfg.out.with_extension("jsonl");
    let csv_path = cfg.out.with_extension("csv");
    if let Some(dir) = jsonl_path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut jsonl = String::new();
    for r in &reports {
        jsonl.push_str(&serde_json::to_string(r).expect("serializable report"));
        jsonl.push('\n');
    }
    fs::write(&jsonl_path, jsonl)?;
    write_csv(&csv_path, cfg, &final_report, wall_time_s)?;

    Ok(RunSummary {
        final_report,
        jsonl_path,
        csv_path,
        wall_time_s,
        scmc_pre_projection_violation: scmc_pre_projection,
    })
}

fn final_iteration(cfg: &RunConfig) -> usize {
    match cfg.method {
        Method::Scmc => (cfg.total_steps / SCMC_SWEEPS_PER_STAGE).max(2),
        Method::MasemNhr | Method::MasemOlla | Method::Nhr | Method::Olla | Method::ClusterNhr => {
            let kind = match cfg.method {
                Method::MasemOlla | Method::Olla => KernelKind::Olla,
                _ => KernelKind::Nhr,
            };
            let (_, m_d, _) = default_params(&cfg.problem, kind);
            cfg.total_steps / cfg.m_steps.unwrap_or(m_d).max(1)
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_csv(
    path: &Path,
    cfg: &RunConfig,
    report: &MetricReport,
    wall_time_s: f64,
) -> Result<()> {
    let mut f = fs::File::create(path)?;
    writeln!(
        f,
        "schema_version,problem,method,seed,n,steps,sinkhorn_w22,pairwise_kl,feasible_entropy,tv_components,homotopy_entropy,mean_max_slack,wall_time_s"
    )?;
    writeln!(
        f,
        "{},{},{},{},{},{},{},{},{},{},{},{},{}",
        SCHEMA_VERSION,
        cfg.problem,
        cfg.method.name(),
        cfg.seed,
        cfg.n_particles,
        cfg.total_steps,
        fmt_opt(report.sinkhorn_w22),
        fmt_opt(report.pairwise_kl),
        fmt_opt(report.feasible_entropy),
        fmt_opt(report.tv_components),
        fmt_opt(report.homotopy_entropy),
        report.mean_max_slack,
        wall_time_s
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_parsing() {
        assert_eq!(Method::from_str("masem-nhr").unwrap(), Method::MasemNhr);
        assert!(matches!(
            Method::from_str("bogus"),
            Err(MasemError::UnknownMethod(_))
        ));
    }

    #[test]
    fn stress_defaults_follow_dimension_rule() {
        assert_eq!(default_params("stress:d=8,m=5", KernelKind::Nhr), (0.3, 5, 16));
        assert_eq!(default_params("stress:d=10,m=5", KernelKind::Nhr), (0.74, 20, 20));
    }

    #[test]
    fn unknown_metric_is_rejected() {
        let cfg = RunConfig {
            problem: "sine".into(),
            method: Method::Nhr,
            seed: 0,
            n_particles: 10,
            total_steps: 10,
            tau: None,
            k: None,
            m_steps: None,
            mu: None,
            metrics: Some(vec!["nope".into()]),
            eval_every: 0,
            out: std::env::temp_dir().join("masem-test-unknown-metric"),
        };
        assert!(matches!(run(&cfg), Err(MasemError::Config(_))));
    }

    #[test]
    fn small_run_writes_outputs() {
        let dir = std::env::temp_dir().join("masem-runner-test");
        let _ = fs::remove_dir_all(&dir);
        let cfg = RunConfig {
            problem: "disks-disconnected".into(),
            method: Method::MasemNhr,
            seed: 1,
            n_particles: 30,
            total_steps: 20,
            tau: None,
            k: None,
            m_steps: Some(5),
            mu: None,
            metrics: None,
            eval_every: 2,
            out: dir.join("run"),
        };
        let summary = run(&cfg).unwrap();
        assert!(summary.jsonl_path.exists());
        assert!(summary.csv_path.exists());
        assert!(summary.final_report.sinkhorn_w22.is_some());
        assert!(summary.final_report.tv_components.is_some());
        let text = fs::read_to_string(&summary.jsonl_path).unwrap();
        // rounds = 20/5 = 4: one eval at round 2 plus the final eval.
        assert_eq!(text.lines().count(), 2);
        for line in text.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert_eq!(v["schema_version"], 1);
        }
    }
}
