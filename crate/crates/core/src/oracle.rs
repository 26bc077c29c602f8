//! Exact transient analysis of the finite-state jump chain at small
//! populations: ground truth for unbiasedness and regression tests.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::numeric::{ln_factorials, logsumexp};

const STATE_CAP: usize = 100_000;

/// Enumerated pre-barrier state space plus one absorbing hit state.
struct TruncatedChain {
    /// Outgoing transitions per state: (successor index, rate). The hit
    /// super-state is the last index and has no outgoing transitions.
    transitions: Vec<Vec<(u32, f64)>>,
    exit_rates: Vec<f64>,
    start: usize,
    hit: usize,
}

fn enumerate_chain(spec: &ModelSpec) -> Result<TruncatedChain> {
    let d = spec.d();
    let sizes = spec.group_sizes();
    let barrier = spec.hit_count();

    let mut index: HashMap<Vec<u32>, u32> = HashMap::new();
    let mut states: Vec<Vec<u32>> = Vec::new();
    let mut counts = vec![0u32; d];
    // Odometer over the full box, keeping totals below the barrier.
    'outer: loop {
        if counts.iter().sum::<u32>() < barrier {
            if states.len() >= STATE_CAP {
                return Err(Error::OracleTooLarge { states: states.len() + 1, cap: STATE_CAP });
            }
            index.insert(counts.clone(), states.len() as u32);
            states.push(counts.clone());
        }
        let mut j = 0;
        loop {
            counts[j] += 1;
            if counts[j] <= sizes[j] {
                break;
            }
            counts[j] = 0;
            j += 1;
            if j == d {
                break 'outer;
            }
        }
    }

    let hit = states.len();
    let n = f64::from(spec.n());
    let mut transitions = Vec::with_capacity(hit + 1);
    let mut exit_rates = Vec::with_capacity(hit + 1);
    for k in &states {
        let lam = spec.intensity_lattice(k);
        let mut row = Vec::new();
        let mut exit = 0.0;
        for (j, &l) in lam.iter().enumerate() {
            if l <= 0.0 {
                continue;
            }
            let rate = n * l;
            let mut next = k.clone();
            next[j] += 1;
            let target = if next.iter().sum::<u32>() >= barrier {
                hit as u32
            } else {
                index[&next]
            };
            row.push((target, rate));
            exit += rate;
        }
        transitions.push(row);
        exit_rates.push(exit);
    }
    transitions.push(Vec::new());
    exit_rates.push(0.0);

    let start = index
        .get(vec![0u32; d].as_slice())
        .copied()
        .ok_or_else(|| Error::Numerical("origin is already beyond the barrier".into()))?
        as usize;
    Ok(TruncatedChain { transitions, exit_rates, start, hit })
}

/// Probability that total defaults reach the barrier by the horizon,
/// computed by uniformization: Poisson-weighted powers of the uniformized
/// transition operator, with the weights accumulated in log space and the
/// series cut only when the *remaining* tail is negligible relative to the
/// mass already collected. All arithmetic is nonnegative, so deep tails
/// (down to ~1e-300) come out to full relative precision.
pub fn exact_hit_probability(spec: &ModelSpec) -> Result<f64> {
    if spec.hit_count() > spec.group_sizes().iter().sum::<u32>() {
        return Ok(0.0); // rounding left fewer individuals than the barrier
    }
    let chain = enumerate_chain(spec)?;
    let uniform_rate = chain.exit_rates.iter().cloned().fold(0.0, f64::max);
    if uniform_rate <= 0.0 {
        return Ok(0.0);
    }
    let lt = uniform_rate * spec.horizon();

    let states = chain.transitions.len();
    let mut v = vec![0.0f64; states];
    v[chain.start] = 1.0;
    let mut next = vec![0.0f64; states];

    let mut acc = 0.0f64;
    let mut m = 0u64;
    let mut ln_fact = 0.0f64;
    loop {
        // Poisson(lt) weight of m jumps, in log space.
        let lw = -lt + if m == 0 { 0.0 } else { m as f64 * lt.ln() - ln_fact };
        let weight = if lw > -745.0 { lw.exp() } else { 0.0 };
        acc += weight * v[chain.hit];

        // Geometric bound on everything still to come: the ratios
        // w_{k+1}/w_k = lt/(k+1) only shrink, so once m+1 > lt the remaining
        // Poisson mass is at most w_m·r/(1−r) with r = lt/(m+1), and the hit
        // mass it multiplies never exceeds 1.
        if m as f64 > lt + 1.0 {
            let r = lt / (m as f64 + 1.0);
            let tail = weight * r / (1.0 - r);
            if tail < (1e-16 * acc).max(1e-300) {
                break;
            }
        }
        if m > 2_000_000 {
            return Err(Error::Numerical("uniformization series failed to terminate".into()));
        }

        next.fill(0.0);
        for (i, row) in chain.transitions.iter().enumerate() {
            let mass = v[i];
            if mass == 0.0 {
                continue;
            }
            next[i] += mass * (1.0 - chain.exit_rates[i] / uniform_rate);
            for &(t, rate) in row {
                next[t as usize] += mass * rate / uniform_rate;
            }
        }
        // The hit state is absorbing: operator rows keep its mass in place.
        std::mem::swap(&mut v, &mut next);
        m += 1;
        ln_fact += (m as f64).ln();
    }
    Ok(acc.min(1.0))
}

/// Closed-form reference for independent obligors: with no contagion and a
/// common base intensity, the default count is Binomial(Σm_j, 1 − e^{−aT})
/// and the hitting probability is its upper tail at the integer barrier.
pub fn binomial_tail_reference(spec: &ModelSpec) -> Result<f64> {
    if spec.b() != 0.0 || !spec.homogeneous() {
        return Err(Error::Config(
            "binomial reference needs zero contagion and equal group intensities".into(),
        ));
    }
    let total: u32 = spec.group_sizes().iter().sum();
    let k0 = spec.hit_count();
    if k0 > total {
        return Ok(0.0);
    }
    // p = 1 − e^{−aT}, so log(1−p) is −aT exactly.
    let at = spec.a()[0] * spec.horizon();
    let (lp, lq) = ((-(-at).exp_m1()).ln(), -at);
    let lf = ln_factorials(total as usize);
    let terms: Vec<f64> = (k0..=total)
        .map(|k| {
            let (kf, nf) = (k as usize, total as usize);
            lf[nf] - lf[kf] - lf[nf - kf] + k as f64 * lp + f64::from(total - k) * lq
        })
        .collect();
    Ok(logsumexp(&terms).exp())
}
