use std::io::Read;

use anyhow::Context;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use dynbatch::bounds::{self, Branch};
use dynbatch::chain;
use dynbatch::fit;
use dynbatch::model::{check_stable, normalized_load};
use dynbatch::sim;
use dynbatch::{
    BatchLimit, BoundsReport, ChainSolution, EnergyModel, Error, FitResult, LinearServiceModel,
    MeasurementSet, QueueConfig, ServiceLaw, SimConfig, SimReport, SolveOptions,
};

use crate::grid::parse_grid;
use crate::manifest::RunManifest;
use crate::output;
use crate::{
    BoundsArgs, ChainArgs, EnergyArgs, FitArgs, Format, Law, LoadArgs, ModelArgs, SimArgs,
    SimulateArgs, SolveArgs, SweepArgs, Target, TradeoffArgs,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitLine {
    pub target: String,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub intercept_clamped: bool,
    pub n_points: usize,
}

impl FitLine {
    pub const HEADER: [&'static str; 6] =
        ["target", "slope", "intercept", "r_squared", "intercept_clamped", "n_points"];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsLine {
    pub lambda: f64,
    pub rho: f64,
    pub phi0: f64,
    pub phi1: f64,
    pub phi: f64,
    pub branch: Branch,
    pub at_crossover: bool,
    pub crossover_lambda: f64,
    pub util_upper: f64,
    pub pi0_lower: f64,
    pub eta_lower: Option<f64>,
    pub b_max: Option<u64>,
    pub near_finite_boundary: bool,
}

impl BoundsLine {
    pub const HEADER: [&'static str; 13] = [
        "lambda",
        "rho",
        "phi0",
        "phi1",
        "phi",
        "branch",
        "at_crossover",
        "crossover_lambda",
        "util_upper",
        "pi0_lower",
        "eta_lower",
        "b_max",
        "near_finite_boundary",
    ];
}

impl From<&BoundsReport> for BoundsLine {
    fn from(r: &BoundsReport) -> Self {
        Self {
            lambda: r.lambda,
            rho: r.rho,
            phi0: r.phi0,
            phi1: r.phi1,
            phi: r.phi,
            branch: r.branch,
            at_crossover: r.at_crossover,
            crossover_lambda: r.crossover_lambda,
            util_upper: r.util_upper,
            pi0_lower: r.pi0_lower,
            eta_lower: r.eta_lower,
            b_max: r.b_max,
            near_finite_boundary: r.near_finite_boundary,
        }
    }
}

/// One load point of `sweep`. Columns of a method that was not run are empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepLine {
    pub rho: f64,
    pub lambda: f64,
    pub sim_mean_latency_ms: Option<f64>,
    pub sim_ci99_ms: Option<f64>,
    pub chain_ew_ms: Option<f64>,
    pub phi0_ms: f64,
    pub phi1_ms: f64,
    pub phi_ms: f64,
    pub sim_utilization: Option<f64>,
    pub chain_utilization: Option<f64>,
    pub util_upper: f64,
    pub sim_mean_batch: Option<f64>,
    pub chain_eb: Option<f64>,
    pub sim_eta: Option<f64>,
    pub chain_eta: Option<f64>,
    pub eta_lower: Option<f64>,
    pub sim_jobs: Option<u64>,
}

impl SweepLine {
    pub const HEADER: [&'static str; 17] = [
        "rho",
        "lambda",
        "sim_mean_latency_ms",
        "sim_ci99_ms",
        "chain_ew_ms",
        "phi0_ms",
        "phi1_ms",
        "phi_ms",
        "sim_utilization",
        "chain_utilization",
        "util_upper",
        "sim_mean_batch",
        "chain_eb",
        "sim_eta",
        "chain_eta",
        "eta_lower",
        "sim_jobs",
    ];
}

/// Long-format tradeoff row; `source` is `chain` or `sim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffLine {
    pub rho: f64,
    pub lambda: f64,
    pub source: String,
    pub eta: f64,
    pub ew: f64,
    pub ew_ci99: Option<f64>,
    pub eta_lower: f64,
    pub phi: f64,
}

impl TradeoffLine {
    pub const HEADER: [&'static str; 8] =
        ["rho", "lambda", "source", "eta", "ew", "ew_ci99", "eta_lower", "phi"];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveLine {
    pub lambda: f64,
    pub b_max: BatchLimit,
    pub eb: f64,
    pub eb2: f64,
    #[serde(rename = "pA0")]
    pub p_a0: f64,
    pub pi0: f64,
    pub utilization: f64,
    pub el: f64,
    pub ew: f64,
    pub eta: Option<f64>,
    pub trunc_level: usize,
    pub tail_mass_bound: f64,
}

impl SolveLine {
    pub const HEADER: [&'static str; 12] = [
        "lambda",
        "b_max",
        "eb",
        "eb2",
        "pA0",
        "pi0",
        "utilization",
        "el",
        "ew",
        "eta",
        "trunc_level",
        "tail_mass_bound",
    ];
}

impl From<&ChainSolution> for SolveLine {
    fn from(s: &ChainSolution) -> Self {
        Self {
            lambda: s.lambda,
            b_max: s.b_max,
            eb: s.eb,
            eb2: s.eb2,
            p_a0: s.p_a0,
            pi0: s.pi0,
            utilization: s.utilization(),
            el: s.el,
            ew: s.ew,
            eta: s.eta,
            trunc_level: s.trunc_level,
            tail_mass_bound: s.tail_mass_bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateLine {
    pub lambda: f64,
    pub rho: f64,
    pub mean_latency_ms: f64,
    pub ci99_ms: f64,
    pub mean_queue_length: f64,
    pub queue_length_ci99: f64,
    pub utilization: f64,
    pub utilization_ci99: f64,
    pub mean_batch: f64,
    pub mean_batch_ci99: f64,
    pub eb2: f64,
    pub eta: Option<f64>,
    pub eta_ci99: Option<f64>,
    pub jobs: u64,
    pub batches: u64,
    pub replications: u32,
}

impl SimulateLine {
    pub const HEADER: [&'static str; 16] = [
        "lambda",
        "rho",
        "mean_latency_ms",
        "ci99_ms",
        "mean_queue_length",
        "queue_length_ci99",
        "utilization",
        "utilization_ci99",
        "mean_batch",
        "mean_batch_ci99",
        "eb2",
        "eta",
        "eta_ci99",
        "jobs",
        "batches",
        "replications",
    ];

    fn new(lambda: f64, rho: f64, r: &SimReport) -> Self {
        Self {
            lambda,
            rho,
            mean_latency_ms: r.mean_latency.mean,
            ci99_ms: r.mean_latency.half_width,
            mean_queue_length: r.mean_queue_length.mean,
            queue_length_ci99: r.mean_queue_length.half_width,
            utilization: r.utilization.mean,
            utilization_ci99: r.utilization.half_width,
            mean_batch: r.mean_batch_size.mean,
            mean_batch_ci99: r.mean_batch_size.half_width,
            eb2: r.second_moment_batch,
            eta: r.eta.map(|e| e.mean),
            eta_ci99: r.eta.map(|e| e.half_width),
            jobs: r.jobs_measured,
            batches: r.batches_measured,
            replications: r.replications,
        }
    }
}

#[derive(Serialize)]
struct WithFormat<'a, P: Serialize> {
    #[serde(flatten)]
    args: &'a P,
    format: Format,
}

fn manifest<P: Serialize>(command: &str, args: &P, format: Format, seed: u64, input: Option<&[u8]>) -> RunManifest {
    RunManifest::new(command, &WithFormat { args, format }, seed, input)
}

fn model_of(a: &ModelArgs) -> Result<LinearServiceModel, Error> {
    LinearServiceModel::new(a.alpha, a.tau0)
}

fn energy_of(a: &EnergyArgs) -> Result<Option<EnergyModel>, Error> {
    match (a.beta, a.c0) {
        (Some(beta), Some(c0)) => EnergyModel::new(beta, c0).map(Some),
        _ => Ok(None),
    }
}

fn lambda_of(a: &LoadArgs, model: &LinearServiceModel) -> Result<f64, Error> {
    match (a.lambda, a.rho) {
        (Some(l), _) => Ok(l),
        (None, Some(rho)) => Ok(rho / model.alpha()),
        (None, None) => Err(Error::Domain("one of --lambda or --rho is required".into())),
    }
}

fn law_of(a: &SimArgs, model: LinearServiceModel) -> Result<ServiceLaw, Error> {
    match a.law {
        Law::Deterministic => Ok(ServiceLaw::deterministic(model)),
        Law::Exponential => Ok(ServiceLaw::exponential(model)),
        Law::Gamma => {
            let cv = a.cv.ok_or_else(|| Error::Domain("--law gamma needs --cv".into()))?;
            ServiceLaw::gamma(model, cv)
        }
    }
}

fn options_of(a: &ChainArgs) -> SolveOptions {
    SolveOptions { tol: a.tol, ceiling: a.ceiling, initial_trunc: None }
}

fn sim_config(a: &SimArgs, queue: QueueConfig, energy: Option<EnergyModel>, seed: u64) -> SimConfig {
    let mut cfg = SimConfig::new(queue)
        .with_seed(seed)
        .with_replications(a.replications)
        .with_measured_jobs(a.measured_jobs)
        .with_queue_cap(a.queue_cap);
    if let Some(w) = a.warmup_jobs {
        cfg = cfg.with_warmup_jobs(w);
    }
    if let Some(e) = energy {
        cfg = cfg.with_energy(e);
    }
    cfg
}

/// Arrival rates for a load grid, each checked for stability before any
/// work starts.
fn grid_lambdas(text: &str, model: &LinearServiceModel, b_max: BatchLimit) -> Result<Vec<(f64, f64)>, Error> {
    parse_grid(text)?
        .into_iter()
        .map(|rho| {
            if !(rho > 0.0) {
                return Err(Error::Domain(format!("grid load must be positive, got rho = {rho}")));
            }
            let lambda = rho / model.alpha();
            check_stable(lambda, model, b_max).map_err(|e| match e {
                Error::Unstable(msg) => Error::Unstable(format!("grid point rho = {rho}: {msg}")),
                other => other,
            })?;
            Ok((rho, lambda))
        })
        .collect()
}

fn read_input(path: &str) -> anyhow::Result<Vec<u8>> {
    let mut bytes = Vec::new();
    if path == "-" {
        std::io::stdin().read_to_end(&mut bytes).context("reading stdin")?;
    } else {
        bytes = std::fs::read(path).with_context(|| format!("reading {path}"))?;
    }
    Ok(bytes)
}

#[derive(Serialize)]
struct FitReport<'a> {
    target: Target,
    #[serde(flatten)]
    fit: &'a FitResult,
}

pub fn fit(a: &FitArgs, format: Format, seed: u64) -> anyhow::Result<Vec<u8>> {
    let bytes = read_input(&a.input)?;
    let set = MeasurementSet::from_csv(bytes.as_slice())?;
    let result = match a.target {
        Target::Service => fit::fit_service(&set)?,
        Target::Energy => fit::fit_energy(&set)?,
    };
    let m = manifest("fit", a, format, seed, Some(&bytes));
    match format {
        Format::Json => output::json(&m, &FitReport { target: a.target, fit: &result }),
        Format::Csv => {
            let target = match a.target {
                Target::Service => "service",
                Target::Energy => "energy",
            };
            let line = FitLine {
                target: target.into(),
                slope: result.slope,
                intercept: result.intercept,
                r_squared: result.r_squared,
                intercept_clamped: result.intercept_clamped,
                n_points: result.residuals.len(),
            };
            output::csv(&m, &FitLine::HEADER, &[line])
        }
    }
}

pub fn bounds(a: &BoundsArgs, format: Format, seed: u64) -> anyhow::Result<Vec<u8>> {
    let model = model_of(&a.model)?;
    let lambda = lambda_of(&a.load, &model)?;
    let energy = energy_of(&a.energy)?;
    let report = BoundsReport::new(lambda, &model, energy.as_ref(), a.bmax)?;
    let m = manifest("bounds", a, format, seed, None);
    match format {
        Format::Json => output::json(&m, &report),
        Format::Csv => output::csv(&m, &BoundsLine::HEADER, &[BoundsLine::from(&report)]),
    }
}

pub fn solve(a: &SolveArgs, format: Format, seed: u64) -> anyhow::Result<Vec<u8>> {
    let model = model_of(&a.model)?;
    let lambda = lambda_of(&a.load, &model)?;
    let energy = energy_of(&a.energy)?;
    let queue = QueueConfig::new(lambda, ServiceLaw::deterministic(model), a.bmax)?;
    let solution = chain::solve(&queue, energy.as_ref(), &options_of(&a.chain))?;
    let m = manifest("solve", a, format, seed, None);
    match format {
        Format::Json => output::json(&m, &solution.to_json_value(a.max_vector)),
        Format::Csv => output::csv(&m, &SolveLine::HEADER, &[SolveLine::from(&solution)]),
    }
}

pub fn simulate(a: &SimulateArgs, format: Format, seed: u64) -> anyhow::Result<Vec<u8>> {
    let model = model_of(&a.model)?;
    let lambda = lambda_of(&a.load, &model)?;
    let energy = energy_of(&a.energy)?;
    let queue = QueueConfig::new(lambda, law_of(&a.sim, model)?, a.bmax)?;
    let report = sim::replicate(&sim_config(&a.sim, queue, energy, seed))?;
    let m = manifest("simulate", a, format, seed, None);
    match format {
        Format::Json => output::json(&m, &report),
        Format::Csv => {
            let line = SimulateLine::new(lambda, normalized_load(lambda, &model), &report);
            output::csv(&m, &SimulateLine::HEADER, &[line])
        }
    }
}

pub fn sweep(a: &SweepArgs, format: Format, seed: u64) -> anyhow::Result<Vec<u8>> {
    let model = model_of(&a.model)?;
    let energy = energy_of(&a.energy)?;
    let law = law_of(&a.sim, model)?;
    if a.mode.chain() && !law.is_deterministic() {
        return Err(Error::UnsupportedLaw(format!("chain mode needs deterministic service, got {}", law.name())).into());
    }
    let points = grid_lambdas(&a.rho_grid, &model, a.bmax)?;
    let opts = options_of(&a.chain);
    let rows: Vec<SweepLine> = points
        .par_iter()
        .map(|&(rho, lambda)| -> anyhow::Result<SweepLine> {
            let b = BoundsReport::new(lambda, &model, energy.as_ref(), a.bmax)?;
            let queue = QueueConfig::new(lambda, law, a.bmax)?;
            let exact = if a.mode.chain() {
                Some(chain::solve(&queue, energy.as_ref(), &opts)?)
            } else {
                None
            };
            let simulated = if a.mode.sim() {
                Some(sim::replicate(&sim_config(&a.sim, queue, energy, seed))?)
            } else {
                None
            };
            Ok(SweepLine {
                rho,
                lambda,
                sim_mean_latency_ms: simulated.as_ref().map(|r| r.mean_latency.mean),
                sim_ci99_ms: simulated.as_ref().map(|r| r.mean_latency.half_width),
                chain_ew_ms: exact.as_ref().map(|s| s.ew),
                phi0_ms: b.phi0,
                phi1_ms: b.phi1,
                phi_ms: b.phi,
                sim_utilization: simulated.as_ref().map(|r| r.utilization.mean),
                chain_utilization: exact.as_ref().map(|s| s.utilization()),
                util_upper: b.util_upper,
                sim_mean_batch: simulated.as_ref().map(|r| r.mean_batch_size.mean),
                chain_eb: exact.as_ref().map(|s| s.eb),
                sim_eta: simulated.as_ref().and_then(|r| r.eta.map(|e| e.mean)),
                chain_eta: exact.as_ref().and_then(|s| s.eta),
                eta_lower: b.eta_lower,
                sim_jobs: simulated.as_ref().map(|r| r.jobs_measured),
            })
        })
        .collect::<anyhow::Result<_>>()?;
    let m = manifest("sweep", a, format, seed, None);
    match format {
        Format::Json => output::json(&m, &rows),
        Format::Csv => output::csv(&m, &SweepLine::HEADER, &rows),
    }
}

pub fn tradeoff(a: &TradeoffArgs, format: Format, seed: u64) -> anyhow::Result<Vec<u8>> {
    let model = model_of(&a.model)?;
    let energy = EnergyModel::new(a.beta, a.c0)?;
    let law = law_of(&a.sim, model)?;
    if a.mode.chain() && !law.is_deterministic() {
        return Err(Error::UnsupportedLaw(format!("chain mode needs deterministic service, got {}", law.name())).into());
    }
    let points = grid_lambdas(&a.rho_grid, &model, a.bmax)?;
    let opts = options_of(&a.chain);
    let rows: Vec<Vec<TradeoffLine>> = points
        .par_iter()
        .map(|&(rho, lambda)| -> anyhow::Result<Vec<TradeoffLine>> {
            let eta_lower = bounds::eta_lower(lambda, &model, &energy)?;
            let phi = bounds::phi(lambda, &model)?;
            let queue = QueueConfig::new(lambda, law, a.bmax)?;
            let mut out = Vec::new();
            if a.mode.chain() {
                let s = chain::solve(&queue, Some(&energy), &opts)?;
                out.push(TradeoffLine {
                    rho,
                    lambda,
                    source: "chain".into(),
                    eta: s.eta.expect("energy supplied"),
                    ew: s.ew,
                    ew_ci99: None,
                    eta_lower,
                    phi,
                });
            }
            if a.mode.sim() {
                let r = sim::replicate(&sim_config(&a.sim, queue, Some(energy), seed))?;
                out.push(TradeoffLine {
                    rho,
                    lambda,
                    source: "sim".into(),
                    eta: r.eta.expect("energy supplied").mean,
                    ew: r.mean_latency.mean,
                    ew_ci99: Some(r.mean_latency.half_width),
                    eta_lower,
                    phi,
                });
            }
            Ok(out)
        })
        .collect::<anyhow::Result<_>>()?;
    let rows: Vec<TradeoffLine> = rows.into_iter().flatten().collect();
    let m = manifest("tradeoff", a, format, seed, None);
    match format {
        Format::Json => output::json(&m, &rows),
        Format::Csv => output::csv(&m, &TradeoffLine::HEADER, &rows),
    }
}
