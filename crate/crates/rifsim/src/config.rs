//! Run configuration: the full stochastic specification of a realization,
//! plus the flat key-value config file format used by the CLI.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laws::{ContractionLaw, OffspringLaw};
use crate::num::Real;

/// Embedding variant: free translation or left-endpoint anchoring.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    NonAnchored,
    Anchored,
}

/// Sibling placement policy (only relevant for the non-anchored variant).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Placement {
    /// Independent uniform translation per child; overlap allowed.
    Free,
    /// Children pairwise disjoint, left-to-right, with random gaps.
    DisjointPack,
}

/// How sibling weights are assigned when building cascade masses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum WeightingMode<T> {
    /// W_i = r_i^beta / sum_j r_j^beta; mass is conserved node by node.
    Canonical { beta: T },
    /// Product of raw contraction ratios along the path, normalized per depth.
    RawProduct,
    /// Fixed positive weights by sibling rank (oracle mode).
    Explicit(Vec<T>),
}

impl<T: Real> WeightingMode<T> {
    pub fn canonical_unit() -> Self {
        WeightingMode::Canonical { beta: T::one() }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            WeightingMode::Canonical { beta } => {
                if !(*beta > T::zero()) {
                    return Err(Error::invalid_config("weighting.beta", "must be > 0"));
                }
            }
            WeightingMode::RawProduct => {}
            WeightingMode::Explicit(w) => {
                if w.is_empty() || w.iter().any(|&x| !(x > T::zero())) {
                    return Err(Error::invalid_config(
                        "weighting.weights",
                        "need a non-empty list of positive weights",
                    ));
                }
                let total: T = w.iter().copied().sum();
                if (total - T::one()).abs() > T::from_f64_lossy(1e-9) {
                    return Err(Error::invalid_config(
                        "weighting.weights",
                        "weights must sum to 1",
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Full stochastic specification of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CascadeConfig<T> {
    pub offspring: OffspringLaw,
    pub contraction: ContractionLaw<T>,
    pub variant: Variant,
    pub placement: Placement,
    pub weighting: WeightingMode<T>,
    /// Generations per embedded Galton-Watson subtree.
    pub subtree_height: usize,
    pub max_depth: usize,
    pub master_seed: u64,
}

impl<T: Real> CascadeConfig<T> {
    /// Validate hard constraints; returns soft warnings about degeneracy.
    /// In strict mode the warnings are promoted to errors.
    pub fn validate(&self, strict: bool) -> Result<Vec<String>> {
        self.offspring.validate()?;
        self.contraction.validate()?;
        self.weighting.validate()?;
        if self.subtree_height < 1 {
            return Err(Error::invalid_config("subtree_height", "must be >= 1"));
        }
        if self.max_depth < 1 {
            return Err(Error::invalid_config("max_depth", "must be >= 1"));
        }
        let mut warnings: Vec<String> = Vec::new();
        if self.offspring.concentrated_on_zero_one() {
            warnings.push("offspring.probs: concentrated on {0,1}; tree cannot branch".into());
        }
        if !self.contraction.non_degenerate() {
            warnings
                .push("contraction: degenerate law; tau is affine and f(alpha) is a point".into());
        }
        if strict {
            if let Some(w) = warnings.first() {
                let (field, message) = w.split_once(": ").unwrap_or(("config", w));
                return Err(Error::invalid_config(field, message));
            }
        }
        Ok(warnings)
    }

    /// The closed-form worked-example setup: binary splitting with a
    /// two-point contraction law at 1/3 and 2/3 and unit-beta canonical
    /// weights. Placement is Free so the contraction draws stay i.i.d.
    pub fn worked_example(max_depth: usize, master_seed: u64) -> Self {
        CascadeConfig {
            offspring: OffspringLaw::constant(2),
            contraction: ContractionLaw::TwoPoint {
                r1: T::from_f64_lossy(1.0 / 3.0),
                r2: T::from_f64_lossy(2.0 / 3.0),
                p: 0.5,
            },
            variant: Variant::NonAnchored,
            placement: Placement::Free,
            weighting: WeightingMode::canonical_unit(),
            subtree_height: 1,
            max_depth,
            master_seed,
        }
    }

    /// Exact dyadic cascade: two children of ratio 1/2, packed with zero slack.
    pub fn dyadic(max_depth: usize, master_seed: u64) -> Self {
        CascadeConfig {
            offspring: OffspringLaw::constant(2),
            contraction: ContractionLaw::Constant(T::from_f64_lossy(0.5)),
            variant: Variant::NonAnchored,
            placement: Placement::DisjointPack,
            weighting: WeightingMode::canonical_unit(),
            subtree_height: 1,
            max_depth,
            master_seed,
        }
    }

    /// Serialize as the flat key-value config file format.
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let probs: Vec<String> = self.offspring.probs.iter().map(|p| p.to_string()).collect();
        writeln!(s, "offspring.probs = {}", probs.join(",")).unwrap();
        match &self.contraction {
            ContractionLaw::Constant(r) => {
                writeln!(s, "contraction.kind = constant").unwrap();
                writeln!(s, "contraction.r = {r}").unwrap();
            }
            ContractionLaw::TwoPoint { r1, r2, p } => {
                writeln!(s, "contraction.kind = two_point").unwrap();
                writeln!(s, "contraction.r1 = {r1}").unwrap();
                writeln!(s, "contraction.r2 = {r2}").unwrap();
                writeln!(s, "contraction.p = {p}").unwrap();
            }
            ContractionLaw::Uniform { lo, hi } => {
                writeln!(s, "contraction.kind = uniform").unwrap();
                writeln!(s, "contraction.lo = {lo}").unwrap();
                writeln!(s, "contraction.hi = {hi}").unwrap();
            }
            ContractionLaw::DeterministicRatios(rs) => {
                writeln!(s, "contraction.kind = ratios").unwrap();
                let rs: Vec<String> = rs.iter().map(|r| r.to_string()).collect();
                writeln!(s, "contraction.ratios = {}", rs.join(",")).unwrap();
            }
        }
        let variant = match self.variant {
            Variant::NonAnchored => "non_anchored",
            Variant::Anchored => "anchored",
        };
        writeln!(s, "variant = {variant}").unwrap();
        let placement = match self.placement {
            Placement::Free => "free",
            Placement::DisjointPack => "disjoint_pack",
        };
        writeln!(s, "placement = {placement}").unwrap();
        match &self.weighting {
            WeightingMode::Canonical { beta } => {
                writeln!(s, "weighting = canonical").unwrap();
                writeln!(s, "weighting.beta = {beta}").unwrap();
            }
            WeightingMode::RawProduct => writeln!(s, "weighting = raw_product").unwrap(),
            WeightingMode::Explicit(w) => {
                writeln!(s, "weighting = explicit").unwrap();
                let w: Vec<String> = w.iter().map(|x| x.to_string()).collect();
                writeln!(s, "weighting.weights = {}", w.join(",")).unwrap();
            }
        }
        writeln!(s, "subtree_height = {}", self.subtree_height).unwrap();
        writeln!(s, "max_depth = {}", self.max_depth).unwrap();
        writeln!(s, "master_seed = {}", self.master_seed).unwrap();
        s
    }

    /// Parse the flat key-value config format. Lines are `key = value`;
    /// `#` starts a comment; unknown keys are rejected.
    pub fn from_key_values(text: &str) -> Result<Self> {
        let mut kv = std::collections::BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let mut take = |key: &str| kv.remove(key);
        let require = |opt: Option<String>, key: &str| {
            opt.ok_or_else(|| Error::invalid_config(key, "missing"))
        };

        let probs_raw = require(take("offspring.probs"), "offspring.probs")?;
        let probs = parse_list::<f64>(&probs_raw, "offspring.probs")?;
        let offspring = OffspringLaw::new(probs)?;

        let kind = require(take("contraction.kind"), "contraction.kind")?;
        let contraction = match kind.as_str() {
            "constant" => ContractionLaw::Constant(parse_scalar(
                &require(take("contraction.r"), "contraction.r")?,
                "contraction.r",
            )?),
            "two_point" => ContractionLaw::TwoPoint {
                r1: parse_scalar(
                    &require(take("contraction.r1"), "contraction.r1")?,
                    "contraction.r1",
                )?,
                r2: parse_scalar(
                    &require(take("contraction.r2"), "contraction.r2")?,
                    "contraction.r2",
                )?,
                p: parse_scalar(
                    &require(take("contraction.p"), "contraction.p")?,
                    "contraction.p",
                )?,
            },
            "uniform" => ContractionLaw::Uniform {
                lo: parse_scalar(
                    &require(take("contraction.lo"), "contraction.lo")?,
                    "contraction.lo",
                )?,
                hi: parse_scalar(
                    &require(take("contraction.hi"), "contraction.hi")?,
                    "contraction.hi",
                )?,
            },
            "ratios" => ContractionLaw::DeterministicRatios(parse_list(
                &require(take("contraction.ratios"), "contraction.ratios")?,
                "contraction.ratios",
            )?),
            other => {
                return Err(Error::invalid_config(
                    "contraction.kind",
                    format!("unknown kind `{other}`"),
                ))
            }
        };

        let variant = match require(take("variant"), "variant")?.as_str() {
            "non_anchored" => Variant::NonAnchored,
            "anchored" => Variant::Anchored,
            other => {
                return Err(Error::invalid_config(
                    "variant",
                    format!("unknown variant `{other}`"),
                ))
            }
        };
        let placement = match take("placement").as_deref().unwrap_or("free") {
            "free" => Placement::Free,
            "disjoint_pack" => Placement::DisjointPack,
            other => {
                return Err(Error::invalid_config(
                    "placement",
                    format!("unknown placement `{other}`"),
                ))
            }
        };
        let weighting = match take("weighting").as_deref().unwrap_or("canonical") {
            "canonical" => WeightingMode::Canonical {
                beta: match take("weighting.beta") {
                    Some(b) => parse_scalar(&b, "weighting.beta")?,
                    None => T::one(),
                },
            },
            "raw_product" => WeightingMode::RawProduct,
            "explicit" => WeightingMode::Explicit(parse_list(
                &require(take("weighting.weights"), "weighting.weights")?,
                "weighting.weights",
            )?),
            other => {
                return Err(Error::invalid_config(
                    "weighting",
                    format!("unknown weighting `{other}`"),
                ))
            }
        };

        let subtree_height = match take("subtree_height") {
            Some(v) => parse_scalar(&v, "subtree_height")?,
            None => 1,
        };
        let max_depth = parse_scalar(&require(take("max_depth"), "max_depth")?, "max_depth")?;
        let master_seed =
            parse_scalar(&require(take("master_seed"), "master_seed")?, "master_seed")?;

        if let Some(unknown) = kv.keys().next() {
            return Err(Error::invalid_config(unknown, "unknown key"));
        }

        let config = CascadeConfig {
            offspring,
            contraction,
            variant,
            placement,
            weighting,
            subtree_height,
            max_depth,
            master_seed,
        };
        config.validate(false)?;
        Ok(config)
    }
}

fn parse_scalar<V: std::str::FromStr>(s: &str, field: &str) -> Result<V> {
    s.trim()
        .parse()
        .map_err(|_| Error::invalid_config(field, format!("cannot parse `{s}`")))
}

fn parse_list<V: std::str::FromStr>(s: &str, field: &str) -> Result<Vec<V>> {
    s.split(',').map(|x| parse_scalar(x, field)).collect()
}

/// Default config printed by `rifsim defaults`: the depth-20 run with
/// uniform contraction ratios and uniform (free) translations.
pub fn default_config<T: Real>() -> CascadeConfig<T> {
    CascadeConfig {
        offspring: OffspringLaw::new(vec![0.2, 0.3, 0.3, 0.2]).unwrap(),
        contraction: ContractionLaw::Uniform {
            lo: T::from_f64_lossy(0.2),
            hi: T::from_f64_lossy(0.8),
        },
        variant: Variant::NonAnchored,
        placement: Placement::Free,
        weighting: WeightingMode::canonical_unit(),
        subtree_height: 1,
        max_depth: 20,
        master_seed: 1,
    }
}
