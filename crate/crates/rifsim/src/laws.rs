//! Offspring and contraction laws.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;
use crate::rng::Stream;

/// Finite-support offspring distribution: `probs[n]` is the probability of
/// producing exactly `n` children.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OffspringLaw {
    pub probs: Vec<f64>,
}

impl OffspringLaw {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let law = OffspringLaw { probs };
        law.validate()?;
        Ok(law)
    }

    /// Degenerate point mass at `n`.
    pub fn constant(n: usize) -> Self {
        let mut probs = vec![0.0; n + 1];
        probs[n] = 1.0;
        OffspringLaw { probs }
    }

    pub fn validate(&self) -> Result<()> {
        if self.probs.is_empty() {
            return Err(Error::invalid_config("offspring.probs", "empty"));
        }
        if self.probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::invalid_config(
                "offspring.probs",
                "entries must be finite and >= 0",
            ));
        }
        let total: f64 = self.probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid_config(
                "offspring.probs",
                format!("probabilities sum to {total}, expected 1"),
            ));
        }
        Ok(())
    }

    pub fn max_offspring(&self) -> usize {
        self.probs.len() - 1
    }

    /// Mean offspring count.
    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(n, &p)| n as f64 * p)
            .sum()
    }

    /// True when all mass sits on {0, 1}, so the tree cannot branch.
    pub fn concentrated_on_zero_one(&self) -> bool {
        self.probs.iter().skip(2).all(|&p| p == 0.0)
    }

    /// Probability of ultimate extinction: smallest fixed point of the
    /// generating function on [0, 1], found by bisection.
    pub fn extinction_probability(&self) -> f64 {
        let gen = |s: f64| -> f64 {
            self.probs
                .iter()
                .enumerate()
                .map(|(n, &p)| p * s.powi(n as i32))
                .sum()
        };
        if self.probs[0] == 0.0 {
            return 0.0;
        }
        if self.mean() <= 1.0 {
            return 1.0;
        }
        // g(s) - s has a root in (0, 1) when supercritical with p_0 > 0.
        let (mut lo, mut hi) = (0.0f64, 1.0 - 1e-12);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if gen(mid) - mid > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Distribution of per-edge contraction ratios relative to the parent scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ContractionLaw<T> {
    /// Always the same ratio.
    Constant(T),
    /// `r1` with probability `p`, otherwise `r2`.
    TwoPoint { r1: T, r2: T, p: f64 },
    /// Uniform on (lo, hi); lo = 0 is allowed with open-interval sampling.
    Uniform { lo: T, hi: T },
    /// The i-th child in sibling order gets ratio `ratios[i]` (oracle mode).
    DeterministicRatios(Vec<T>),
}

impl<T: Real> ContractionLaw<T> {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |r: T| r > T::zero() && r < T::one();
        match self {
            ContractionLaw::Constant(r) => {
                if !in_unit(*r) {
                    return Err(Error::invalid_config("contraction.r", "must be in (0,1)"));
                }
            }
            ContractionLaw::TwoPoint { r1, r2, p } => {
                if !in_unit(*r1) || !in_unit(*r2) {
                    return Err(Error::invalid_config(
                        "contraction.r1/r2",
                        "must be in (0,1)",
                    ));
                }
                if !(0.0..=1.0).contains(p) {
                    return Err(Error::invalid_config("contraction.p", "must be in [0,1]"));
                }
            }
            ContractionLaw::Uniform { lo, hi } => {
                if !(*lo >= T::zero() && *lo < *hi && *hi < T::one()) {
                    return Err(Error::invalid_config(
                        "contraction.lo/hi",
                        "need 0 <= lo < hi < 1",
                    ));
                }
            }
            ContractionLaw::DeterministicRatios(ratios) => {
                if ratios.is_empty() || ratios.iter().any(|&r| !in_unit(r)) {
                    return Err(Error::invalid_config(
                        "contraction.ratios",
                        "need a non-empty list of ratios in (0,1)",
                    ));
                }
            }
        }
        Ok(())
    }

    /// Supported on at least two distinct values.
    pub fn non_degenerate(&self) -> bool {
        match self {
            ContractionLaw::Constant(_) => false,
            ContractionLaw::TwoPoint { r1, r2, p } => r1 != r2 && *p > 0.0 && *p < 1.0,
            ContractionLaw::Uniform { lo, hi } => lo < hi,
            ContractionLaw::DeterministicRatios(ratios) => ratios.windows(2).any(|w| w[0] != w[1]),
        }
    }

    /// Finite support, enumerable exactly.
    pub fn finite_support(&self) -> Option<Vec<(T, f64)>> {
        match self {
            ContractionLaw::Constant(r) => Some(vec![(*r, 1.0)]),
            ContractionLaw::TwoPoint { r1, r2, p } => Some(vec![(*r1, *p), (*r2, 1.0 - *p)]),
            ContractionLaw::Uniform { .. } => None,
            // Per-rank deterministic assignment has no common per-edge support.
            ContractionLaw::DeterministicRatios(_) => None,
        }
    }

    /// Draw the ratio for the child at `sibling_rank`.
    pub fn sample_ratio(&self, sibling_rank: usize, rng: &mut Stream) -> Result<T> {
        match self {
            ContractionLaw::Constant(r) => Ok(*r),
            ContractionLaw::TwoPoint { r1, r2, p } => {
                if rng.next_unit() < *p {
                    Ok(*r1)
                } else {
                    Ok(*r2)
                }
            }
            ContractionLaw::Uniform { lo, hi } => {
                let u = T::from_f64_lossy(rng.next_unit_open());
                Ok(*lo + u * (*hi - *lo))
            }
            ContractionLaw::DeterministicRatios(ratios) => {
                ratios.get(sibling_rank).copied().ok_or_else(|| {
                    Error::invalid_config(
                        "contraction.ratios",
                        format!("no ratio for sibling rank {sibling_rank}"),
                    )
                })
            }
        }
    }
}

/// Draw an offspring count from `law`.
pub fn sample_offspring(law: &OffspringLaw, rng: &mut Stream) -> usize {
    let u = rng.next_unit();
    let mut acc = 0.0;
    for (n, &p) in law.probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return n;
        }
    }
    law.probs.len() - 1
}

/// Draw an absolute contraction R = r * parent_scale for the child at
/// `sibling_rank`; almost surely 0 < R < parent_scale.
pub fn sample_contraction<T: Real>(
    law: &ContractionLaw<T>,
    parent_scale: T,
    sibling_rank: usize,
    rng: &mut Stream,
) -> Result<T> {
    Ok(law.sample_ratio(sibling_rank, rng)? * parent_scale)
}
