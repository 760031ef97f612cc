//! Analytic benchmarks for the one-step pressure
//! kappa(q) = E[ log S(q) | N >= 1 ],   S(q) = sum_i W_i^q,
//! with canonical sibling weights W_i = r_i^beta / sum_j r_j^beta.
//!
//! Provides exact enumeration when both laws have finite support, a Monte
//! Carlo fallback otherwise, the closed form for the reference example, and
//! power-mean sanity bounds on S(q).

use crate::error::{Error, Result};
use crate::laws::{sample_offspring, ContractionLaw, OffspringLaw};
use crate::num::Real;
use crate::rng::Stream;
use crate::stats::{log_sum_exp, pairwise_sum};

/// Enumeration is refused above this many (offspring, ratio-tuple) outcomes.
pub const MAX_ENUMERATED_OUTCOMES: usize = 1_000_000;

/// One-step environment: a realized offspring count with its ratio tuple can
/// be enumerated exactly only when both marginal laws have finite support.
#[derive(Clone, Debug)]
pub struct OneStepEnvironment<T> {
    pub offspring: OffspringLaw,
    pub contraction: ContractionLaw<T>,
    pub beta: T,
}

impl<T: Real> OneStepEnvironment<T> {
    pub fn new(offspring: OffspringLaw, contraction: ContractionLaw<T>, beta: T) -> Result<Self> {
        offspring.validate()?;
        contraction.validate()?;
        if !(beta > T::zero()) {
            return Err(Error::invalid_config("weighting.beta", "must be > 0"));
        }
        Ok(OneStepEnvironment {
            offspring,
            contraction,
            beta,
        })
    }

    pub fn enumerable(&self) -> bool {
        self.contraction.finite_support().is_some()
    }
}

/// log S(q) for one realized sibling group with ratio tuple `ratios`.
pub fn log_one_step_s<T: Real>(ratios: &[T], q: T, beta: T) -> T {
    assert!(!ratios.is_empty());
    // log W_i = beta log r_i - log(sum_j r_j^beta), all in log space
    let beta_logs: Vec<T> = ratios.iter().map(|&r| beta * r.ln()).collect();
    let log_norm = log_sum_exp(&beta_logs);
    let scaled: Vec<T> = beta_logs.iter().map(|&lw| q * (lw - log_norm)).collect();
    log_sum_exp(&scaled)
}

/// S(q) itself; prefer the log form inside estimators.
pub fn one_step_s<T: Real>(ratios: &[T], q: T, beta: T) -> T {
    log_one_step_s(ratios, q, beta).exp()
}

/// Power-mean envelope for S(q) over N weights summing to 1:
/// q >= 1: N^(1-q) <= S <= 1; 0 <= q <= 1: 1 <= S <= N^(1-q);
/// q < 0: S >= N^(1-q) with no finite upper bound.
pub fn power_mean_bounds_check<T: Real>(s: T, n: usize, q: T) -> bool {
    let nf = T::from_usize_lossy(n);
    let envelope = nf.powf(T::one() - q);
    let tol = T::from_f64_lossy(1e-12);
    if q >= T::one() {
        s >= envelope - tol && s <= T::one() + tol
    } else if q >= T::zero() {
        s >= T::one() - tol && s <= envelope + tol
    } else {
        s >= envelope - tol
    }
}

/// kappa(q) for the reference cascade: two children per node, ratios drawn
/// independently from {1/3, 2/3} with equal probability, canonical weights.
/// Equal-ratio draws give weights (1/2, 1/2); mixed draws give (1/3, 2/3).
pub fn kappa_closed_form_reference(q: f64) -> f64 {
    0.5 * (2.0 * 2.0f64.powf(-q) * ((1.0f64 / 3.0).powf(q) + (2.0f64 / 3.0).powf(q))).ln()
}

fn conditioned_offspring(offspring: &OffspringLaw) -> Result<Vec<(usize, f64)>> {
    let p0 = offspring.probs[0];
    let survive = 1.0 - p0;
    if survive <= 0.0 {
        return Err(Error::invalid_config(
            "offspring.probs",
            "no mass on N >= 1",
        ));
    }
    Ok(offspring
        .probs
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, &p)| p > 0.0)
        .map(|(n, &p)| (n, p / survive))
        .collect())
}

/// Exact kappa(q) by enumerating every (N, ratio tuple) outcome with N >= 1.
/// Fails with `NonEnumerable` when the contraction law has continuous
/// support or when the outcome count exceeds [`MAX_ENUMERATED_OUTCOMES`].
pub fn kappa_exact<T: Real>(env: &OneStepEnvironment<T>, q: T) -> Result<T> {
    let support = env
        .contraction
        .finite_support()
        .ok_or(Error::NonEnumerable)?;
    let counts = conditioned_offspring(&env.offspring)?;

    let mut total_outcomes = 0usize;
    for &(n, _) in &counts {
        total_outcomes = total_outcomes.saturating_add(
            support
                .len()
                .checked_pow(n as u32)
                .ok_or(Error::NonEnumerable)?,
        );
        if total_outcomes > MAX_ENUMERATED_OUTCOMES {
            return Err(Error::NonEnumerable);
        }
    }

    let mut terms: Vec<T> = Vec::new();
    let mut ratios: Vec<T> = Vec::new();
    for &(n, pn) in &counts {
        // odometer over support^n
        let mut idx = vec![0usize; n];
        loop {
            ratios.clear();
            let mut p_tuple = pn;
            for &i in &idx {
                ratios.push(support[i].0);
                p_tuple *= support[i].1;
            }
            if p_tuple > 0.0 {
                terms.push(T::from_f64_lossy(p_tuple) * log_one_step_s(&ratios, q, env.beta));
            }
            let mut k = 0;
            loop {
                if k == n {
                    break;
                }
                idx[k] += 1;
                if idx[k] < support.len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == n {
                break;
            }
        }
    }
    Ok(pairwise_sum(&terms))
}

/// Monte Carlo estimate of kappa(q): mean of log S(q) over sampled
/// environments conditioned on N >= 1, with its standard error.
pub fn kappa_monte_carlo<T: Real>(
    env: &OneStepEnvironment<T>,
    q: T,
    samples: usize,
    seed: u64,
) -> Result<(T, T)> {
    if samples < 2 {
        return Err(Error::InsufficientData("need at least 2 samples".into()));
    }
    if env.offspring.probs[0] >= 1.0 {
        return Err(Error::invalid_config(
            "offspring.probs",
            "no mass on N >= 1",
        ));
    }
    let mut rng = Stream::from_raw_seed(crate::rng::root_seed(seed));
    let mut draws: Vec<T> = Vec::with_capacity(samples);
    let mut ratios: Vec<T> = Vec::new();
    while draws.len() < samples {
        let n = sample_offspring(&env.offspring, &mut rng);
        if n == 0 {
            continue;
        }
        ratios.clear();
        for rank in 0..n {
            ratios.push(env.contraction.sample_ratio(rank, &mut rng)?);
        }
        draws.push(log_one_step_s(&ratios, q, env.beta));
    }
    let nf = T::from_usize_lossy(samples);
    let mean = pairwise_sum(&draws) / nf;
    let sq: Vec<T> = draws.iter().map(|&x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (nf - T::one());
    Ok((mean, (var / nf).sqrt()))
}

/// Theoretical domain of finite tau for the canonical cascade, as a pair
/// (q_minus, q_plus). Both ends are unbounded unless the contraction law
/// puts mass arbitrarily close to 0, in which case q_minus = -1/beta.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DomainEndpoints<T> {
    pub q_minus: T,
    pub q_plus: T,
    /// Set for a degenerate (constant-ratio) law, where the spectrum
    /// collapses to a point and the endpoints are uninformative.
    pub degenerate: bool,
}

pub fn domain_endpoints<T: Real>(contraction: &ContractionLaw<T>, beta: T) -> DomainEndpoints<T> {
    let q_minus = match contraction {
        ContractionLaw::Uniform { lo, .. } if *lo == T::zero() => -(T::one() / beta),
        _ => T::neg_infinity(),
    };
    DomainEndpoints {
        q_minus,
        q_plus: T::infinity(),
        degenerate: !contraction.non_degenerate(),
    }
}
