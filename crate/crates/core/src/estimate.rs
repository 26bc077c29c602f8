//! Batched estimation: grand-mean probability estimates, batch-based
//! relative errors, and the second-moment decay diagnostic compared to
//! the subsolution bound.

use std::time::Instant;

use rayon::prelude::*;

use crate::control::ControlPolicy;
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::simulate::{sample_path, RngStreamSpec};

/// Aggregate statistics over B batches of N samples each.
#[derive(Debug, Clone)]
pub struct BatchStats {
    pub batch_means: Vec<f64>,
    /// Grand mean of the batch means.
    pub estimate: f64,
    /// Sample standard deviation of the batch means (denominator B − 1)
    /// divided by the estimate; undefined without a single hit.
    pub rel_error: Option<f64>,
    /// Mean of squared weights over all B·N samples.
    pub second_moment: f64,
    /// −(1/n)·log(second moment); undefined without hits.
    pub emp_rate: Option<f64>,
    /// W̄(0,0)/2 + U(0,0) where the one-dimensional rate applies.
    pub bound_rate: Option<f64>,
    pub hits: u64,
    pub wall_time: f64,
}

struct BatchAcc {
    sum: f64,
    sum_sq: f64,
    hits: u64,
}

fn run_one_batch(
    spec: &ModelSpec,
    policy: &ControlPolicy,
    samples: u32,
    seed: u64,
    batch: u64,
) -> BatchAcc {
    let mut acc = BatchAcc { sum: 0.0, sum_sq: 0.0, hits: 0 };
    for sample in 0..u64::from(samples) {
        let stream = RngStreamSpec { master_seed: seed, batch_index: batch, sample_index: sample };
        let r = sample_path(spec, policy, &stream);
        if r.hit {
            let w = r.weight();
            acc.sum += w;
            acc.sum_sq += w * w;
            acc.hits += 1;
        }
    }
    acc
}

/// Runs B·N independent samples on streams (seed, batch, sample) and
/// aggregates deterministically: batches are reduced in index order after
/// the parallel map, so the result is bitwise identical for any worker
/// count. `workers` sizes a dedicated thread pool; `None` uses the global
/// default.
pub fn run_batches(
    spec: &ModelSpec,
    policy: &ControlPolicy,
    batches: u32,
    samples_per_batch: u32,
    seed: u64,
    workers: Option<usize>,
) -> Result<BatchStats> {
    if batches < 2 {
        return Err(Error::Config("need at least 2 batches for a relative error".into()));
    }
    if samples_per_batch == 0 {
        return Err(Error::Config("need at least 1 sample per batch".into()));
    }
    let start = Instant::now();
    let collect = || -> Vec<BatchAcc> {
        (0..u64::from(batches))
            .into_par_iter()
            .map(|b| run_one_batch(spec, policy, samples_per_batch, seed, b))
            .collect()
    };
    let accs = match workers {
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k.max(1))
                .build()
                .map_err(|e| Error::Numerical(format!("worker pool: {e}")))?;
            pool.install(collect)
        }
        None => collect(),
    };

    let nf = f64::from(samples_per_batch);
    let batch_means: Vec<f64> = accs.iter().map(|a| a.sum / nf).collect();
    let bf = f64::from(batches);
    let estimate = batch_means.iter().sum::<f64>() / bf;
    let second_moment =
        accs.iter().map(|a| a.sum_sq).sum::<f64>() / (bf * nf);
    let hits = accs.iter().map(|a| a.hits).sum();
    let rel_error = if estimate > 0.0 {
        let var = batch_means.iter().map(|m| (m - estimate).powi(2)).sum::<f64>() / (bf - 1.0);
        Some(var.sqrt() / estimate)
    } else {
        None
    };
    let n = f64::from(spec.n());
    let emp_rate = (second_moment > 0.0).then(|| -second_moment.ln() / n);
    let bound_rate = policy.u0().map(|u0| policy.initial_value() / 2.0 + u0);
    Ok(BatchStats {
        batch_means,
        estimate,
        rel_error,
        second_moment,
        emp_rate,
        bound_rate,
        hits,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Second-moment decay compared to the subsolution guarantee.
#[derive(Debug, Clone)]
pub struct OptimalityReport {
    pub emp_rate: Option<f64>,
    pub bound_rate: Option<f64>,
    /// 2·(−(1/n)·log estimate): the best decay any unbiased estimator of
    /// this probability can achieve.
    pub prob_rate: Option<f64>,
    /// emp_rate − bound_rate when both exist.
    pub gap: Option<f64>,
    /// emp_rate ≥ bound_rate − 5/n; `None` when the data cannot decide
    /// (no hits, or no bound available).
    pub consistent: Option<bool>,
}

/// Compares the measured second-moment rate against the policy's bound.
pub fn optimality_report(
    stats: &BatchStats,
    _policy: &ControlPolicy,
    spec: &ModelSpec,
) -> OptimalityReport {
    let n = f64::from(spec.n());
    let prob_rate = (stats.estimate > 0.0).then(|| -2.0 * stats.estimate.ln() / n);
    let gap = match (stats.emp_rate, stats.bound_rate) {
        (Some(e), Some(b)) => Some(e - b),
        _ => None,
    };
    let consistent = gap.map(|g| g >= -5.0 / n);
    OptimalityReport {
        emp_rate: stats.emp_rate,
        bound_rate: stats.bound_rate,
        prob_rate,
        gap,
        consistent,
    }
}
