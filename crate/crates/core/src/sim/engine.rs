//! Event loop. Only two events are ever pending (the next arrival and the
//! departure of the batch in service), so no event heap is needed.

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma};

use super::stats::Estimate;
use super::{SimConfig, SimReport, BATCH_MEANS_GROUPS, CI_LEVEL};
use crate::error::{Error, Result};
use crate::model::ServiceLaw;

enum Sampler {
    Deterministic,
    Exponential,
    /// Unit-scale gamma with shape `1/cv^2`, rescaled by `cv^2 * mean`.
    Gamma(Gamma<f64>, f64),
}

impl Sampler {
    fn new(law: &ServiceLaw) -> Result<Self> {
        Ok(match law {
            ServiceLaw::DeterministicLinear { .. } => Self::Deterministic,
            ServiceLaw::ExponentialLinear { .. } => Self::Exponential,
            ServiceLaw::GammaLinear { cv, .. } => {
                let cv2 = cv * cv;
                let g = Gamma::new(1.0 / cv2, 1.0)
                    .map_err(|e| Error::Domain(format!("gamma service law: {e}")))?;
                Self::Gamma(g, cv2)
            }
        })
    }

    #[inline]
    fn sample(&self, mean: f64, rng: &mut impl Rng) -> f64 {
        match self {
            Self::Deterministic => mean,
            Self::Exponential => mean * rng.sample::<f64, _>(Exp1),
            Self::Gamma(g, cv2) => g.sample(rng) * cv2 * mean,
        }
    }
}

/// Sums over departures, each departure owning the cycle that precedes it.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Acc {
    jobs: u64,
    batches: u64,
    latency: f64,
    b2: f64,
    busy: f64,
    time: f64,
    area: f64,
    energy: f64,
}

impl Acc {
    fn merge(&mut self, o: &Acc) {
        self.jobs += o.jobs;
        self.batches += o.batches;
        self.latency += o.latency;
        self.b2 += o.b2;
        self.busy += o.busy;
        self.time += o.time;
        self.area += o.area;
        self.energy += o.energy;
    }

    fn latency(&self) -> f64 {
        self.latency / self.jobs as f64
    }

    fn queue_length(&self) -> f64 {
        self.area / self.time
    }

    /// Clamped because busy and cycle sums round differently when the
    /// server never idles.
    fn utilization(&self) -> f64 {
        (self.busy / self.time).min(1.0)
    }

    fn mean_batch(&self) -> f64 {
        self.jobs as f64 / self.batches as f64
    }

    fn eb2(&self) -> f64 {
        self.b2 / self.batches as f64
    }

    fn eta(&self) -> f64 {
        self.jobs as f64 / self.energy
    }
}

pub(crate) struct RunStats {
    groups: Vec<Acc>,
    /// `counts[b]` batches of size `b` departed in the window.
    counts: Vec<u64>,
    pub(crate) arrivals_in_window: u64,
    pub(crate) in_system_at_start: u64,
    pub(crate) in_system_at_end: u64,
}

impl RunStats {
    pub(crate) fn totals(&self) -> Acc {
        let mut t = Acc::default();
        self.groups.iter().for_each(|g| t.merge(g));
        t
    }

    fn histogram(&self) -> BTreeMap<u64, u64> {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(b, &c)| (b as u64, c))
            .collect()
    }

    /// Point estimates from the whole window, intervals from batch means.
    pub(crate) fn single_report(&self, config: &SimConfig) -> SimReport {
        let total = self.totals();
        let groups: Vec<&Acc> = self.groups.iter().filter(|g| g.jobs > 0 && g.time > 0.0).collect();
        let est = |f: fn(&Acc) -> f64| {
            let xs: Vec<f64> = groups.iter().map(|g| f(g)).collect();
            Estimate { mean: f(&total), half_width: Estimate::from_samples(&xs, CI_LEVEL).half_width }
        };
        SimReport {
            mean_latency: est(Acc::latency),
            mean_queue_length: est(Acc::queue_length),
            utilization: est(Acc::utilization),
            mean_batch_size: est(Acc::mean_batch),
            batch_size_histogram: self.histogram(),
            second_moment_batch: total.eb2(),
            eta: config.energy.map(|_| est(Acc::eta)),
            jobs_measured: total.jobs,
            batches_measured: total.batches,
            warmup_jobs: config.resolved_warmup(),
            seed: config.seed,
            replications: 1,
        }
    }

    /// Means of the replication point estimates with Student-t intervals.
    pub(crate) fn replicated_report(runs: &[RunStats], config: &SimConfig) -> SimReport {
        let totals: Vec<Acc> = runs.iter().map(RunStats::totals).collect();
        let est = |f: fn(&Acc) -> f64| {
            let xs: Vec<f64> = totals.iter().map(f).collect();
            Estimate::from_samples(&xs, CI_LEVEL)
        };
        let mut pooled = Acc::default();
        totals.iter().for_each(|t| pooled.merge(t));
        let mut histogram = BTreeMap::new();
        for r in runs {
            for (b, c) in r.histogram() {
                *histogram.entry(b).or_insert(0) += c;
            }
        }
        SimReport {
            mean_latency: est(Acc::latency),
            mean_queue_length: est(Acc::queue_length),
            utilization: est(Acc::utilization),
            mean_batch_size: est(Acc::mean_batch),
            batch_size_histogram: histogram,
            second_moment_batch: pooled.eb2(),
            eta: config.energy.map(|_| est(Acc::eta)),
            jobs_measured: pooled.jobs,
            batches_measured: pooled.batches,
            warmup_jobs: config.resolved_warmup(),
            seed: config.seed,
            replications: runs.len() as u32,
        }
    }
}

/// One replication on stream `stream` of `config.seed`. The measurement
/// window opens at the departure that completes the warmup and closes at the
/// first departure that brings the measured job count to `measured_jobs`.
pub(crate) fn simulate(config: &SimConfig, stream: u64) -> Result<RunStats> {
    let queue = &config.queue;
    let lambda = queue.lambda();
    let model = *queue.model();
    let b_max = queue.b_max();
    let sampler = Sampler::new(queue.service())?;
    let warmup = config.resolved_warmup();
    let target = config.measured_jobs;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(stream);
    let interarrival = |rng: &mut ChaCha8Rng| rng.sample::<f64, _>(Exp1) / lambda;

    let mut waiting: VecDeque<f64> = VecDeque::new();
    let mut in_service: Vec<f64> = Vec::new();
    let mut service_time = 0.0;
    let mut next_arrival = interarrival(&mut rng);
    let mut next_departure = f64::INFINITY;
    let (mut t_last, mut last_departure, mut area) = (0.0, 0.0, 0.0);

    let mut measuring = warmup == 0;
    let mut departed = 0u64;
    let mut stats = RunStats {
        groups: vec![Acc::default(); BATCH_MEANS_GROUPS],
        counts: Vec::new(),
        arrivals_in_window: 0,
        in_system_at_start: 0,
        in_system_at_end: 0,
    };
    let mut measured = 0u64;

    loop {
        let in_system = (waiting.len() + in_service.len()) as f64;
        if next_departure <= next_arrival {
            let t = next_departure;
            area += in_system * (t - t_last);
            t_last = t;
            let b = in_service.len() as u64;
            if measuring {
                let g = ((measured as u128 * BATCH_MEANS_GROUPS as u128) / target as u128) as usize;
                let acc = &mut stats.groups[g.min(BATCH_MEANS_GROUPS - 1)];
                acc.jobs += b;
                acc.batches += 1;
                acc.latency += in_service.iter().map(|a| t - a).sum::<f64>();
                acc.b2 += (b * b) as f64;
                acc.busy += service_time;
                acc.time += t - last_departure;
                acc.area += area;
                if let Some(e) = &config.energy {
                    acc.energy += e.c(b);
                }
                if stats.counts.len() <= b as usize {
                    stats.counts.resize(b as usize + 1, 0);
                }
                stats.counts[b as usize] += 1;
                measured += b;
            }
            departed += b;
            in_service.clear();
            area = 0.0;
            last_departure = t;
            if measuring && measured >= target {
                stats.in_system_at_end = waiting.len() as u64;
                return Ok(stats);
            }
            if !measuring && departed >= warmup {
                measuring = true;
                stats.in_system_at_start = waiting.len() as u64;
            }
            if waiting.is_empty() {
                next_departure = f64::INFINITY;
            } else {
                let b = b_max.batch_from(waiting.len() as u64) as usize;
                in_service.extend(waiting.drain(..b));
                service_time = sampler.sample(model.tau(b as u64), &mut rng);
                next_departure = t + service_time;
            }
        } else {
            let t = next_arrival;
            area += in_system * (t - t_last);
            t_last = t;
            if measuring {
                stats.arrivals_in_window += 1;
            }
            if next_departure.is_infinite() {
                in_service.push(t);
                service_time = sampler.sample(model.tau(1), &mut rng);
                next_departure = t + service_time;
            } else {
                waiting.push_back(t);
                if waiting.len() as u64 > config.queue_cap {
                    return Err(Error::Runaway(format!(
                        "{} jobs waiting at t = {t:.1} ms exceeds the cap of {}",
                        waiting.len(),
                        config.queue_cap
                    )));
                }
            }
            next_arrival = t + interarrival(&mut rng);
        }
    }
}
