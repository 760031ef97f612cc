//! Growing branching-process RIFS realizations: Galton-Watson leaf
//! replacement with random contractions and interval embedding.
//!
//! Intervals are stored as (left, diameter); diameters are always computed
//! multiplicatively along edges, never as endpoint differences, so they stay
//! accurate at large depth.

use rayon::prelude::*;

use crate::config::{CascadeConfig, Placement, Variant};
use crate::error::{Error, Result};
use crate::laws::sample_offspring;
use crate::num::Real;
use crate::rng::{derive_child_seed, root_seed, Stream};

/// Maximum diameter re-draws per node before DisjointPack gives up.
const PLACEMENT_RETRY_CAP: u32 = 64;

#[derive(Clone, Debug)]
pub struct Node<T> {
    pub id: usize,
    pub parent: Option<usize>,
    /// Refinement step at which the node was created.
    pub depth: usize,
    pub left: T,
    pub diameter: T,
    /// Contraction ratio relative to the parent (1 for the root).
    pub contraction: T,
    pub sibling_rank: usize,
    pub children: Vec<usize>,
    pub seed: u64,
}

impl<T: Real> Node<T> {
    pub fn right(&self) -> T {
        self.left + self.diameter
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct Realization<T> {
    pub config: CascadeConfig<T>,
    pub nodes: Vec<Node<T>>,
    /// Frontier leaf ids per refinement depth; an empty final row means the
    /// whole process died out at that depth.
    pub leaves_by_depth: Vec<Vec<usize>>,
    pub extinct: bool,
}

/// A node produced while expanding one frontier leaf, before ids are merged
/// into the global store.
struct PendingNode<T> {
    /// Local index of the parent within the expansion, or None when the
    /// parent is the frontier leaf itself.
    parent_local: Option<usize>,
    gen: usize,
    left: T,
    diameter: T,
    ratio: T,
    rank: usize,
    seed: u64,
}

/// Position children of the given diameters inside the parent interval.
///
/// Anchored: every child starts at the parent's left endpoint (overlap
/// allowed). Free: each child is translated independently and uniformly.
/// DisjointPack: children are laid out left-to-right with random gaps and
/// fails if the diameters do not fit.
pub fn place_children<T: Real>(
    parent_left: T,
    parent_diameter: T,
    child_diameters: &[T],
    variant: Variant,
    placement: Placement,
    rng: &mut Stream,
) -> Result<Vec<T>> {
    if variant == Variant::Anchored {
        return Ok(vec![parent_left; child_diameters.len()]);
    }
    match placement {
        Placement::Free => Ok(child_diameters
            .iter()
            .map(|&d| {
                let u = T::from_f64_lossy(rng.next_unit());
                parent_left + u * (parent_diameter - d)
            })
            .collect()),
        Placement::DisjointPack => {
            let total: T = child_diameters.iter().copied().sum();
            let slack = parent_diameter - total;
            if slack < T::zero() {
                return Err(Error::PlacementInfeasible {
                    node: 0,
                    retries: 0,
                });
            }
            let gaps: Vec<T> = (0..child_diameters.len() + 1)
                .map(|_| T::from_f64_lossy(rng.next_unit_open()))
                .collect();
            let gap_total: T = gaps.iter().copied().sum();
            let mut lefts = Vec::with_capacity(child_diameters.len());
            let mut cursor = parent_left;
            for (i, &d) in child_diameters.iter().enumerate() {
                cursor = cursor + gaps[i] / gap_total * slack;
                lefts.push(cursor);
                cursor = cursor + d;
            }
            Ok(lefts)
        }
    }
}

fn expand_node<T: Real>(
    parent_seed: u64,
    parent_local: Option<usize>,
    parent_left: T,
    parent_diameter: T,
    gen: usize,
    config: &CascadeConfig<T>,
    frontier_leaf_id: usize,
    out: &mut Vec<PendingNode<T>>,
) -> Result<()> {
    let mut rng = Stream::for_node(parent_seed);
    let count = sample_offspring(&config.offspring, &mut rng);
    if count == 0 {
        return Ok(());
    }

    let mut attempt = 0u32;
    let (ratios, lefts) = loop {
        let mut ratios = Vec::with_capacity(count);
        for i in 0..count {
            ratios.push(config.contraction.sample_ratio(i, &mut rng)?);
        }
        let diameters: Vec<T> = ratios.iter().map(|&r| r * parent_diameter).collect();
        match place_children(
            parent_left,
            parent_diameter,
            &diameters,
            config.variant,
            config.placement,
            &mut rng,
        ) {
            Ok(lefts) => break (ratios, lefts),
            Err(Error::PlacementInfeasible { .. }) => {
                attempt += 1;
                if attempt >= PLACEMENT_RETRY_CAP {
                    return Err(Error::PlacementInfeasible {
                        node: frontier_leaf_id,
                        retries: PLACEMENT_RETRY_CAP,
                    });
                }
            }
            Err(e) => return Err(e),
        }
    };

    for (i, (&ratio, &left)) in ratios.iter().zip(lefts.iter()).enumerate() {
        let seed = derive_child_seed(parent_seed, i);
        let diameter = ratio * parent_diameter;
        let local = out.len();
        out.push(PendingNode {
            parent_local,
            gen,
            left,
            diameter,
            ratio,
            rank: i,
            seed,
        });
        if gen < config.subtree_height {
            expand_node(
                seed,
                Some(local),
                left,
                diameter,
                gen + 1,
                config,
                frontier_leaf_id,
                out,
            )?;
        }
    }
    Ok(())
}

impl<T: Real> Realization<T> {
    fn root(config: CascadeConfig<T>) -> Self {
        let seed = root_seed(config.master_seed);
        let root = Node {
            id: 0,
            parent: None,
            depth: 0,
            left: T::zero(),
            diameter: T::one(),
            contraction: T::one(),
            sibling_rank: 0,
            children: Vec::new(),
            seed,
        };
        Realization {
            config,
            nodes: vec![root],
            leaves_by_depth: vec![vec![0]],
            extinct: false,
        }
    }

    /// Current refinement depth (index of the last frontier row).
    pub fn depth(&self) -> usize {
        self.leaves_by_depth.len() - 1
    }

    /// Replace every frontier leaf by an embedded Galton-Watson subtree,
    /// advancing the realization one refinement depth.
    pub fn grow_step(&mut self) -> Result<()> {
        if self.extinct {
            return Err(Error::ExtinctDepth {
                depth: self.depth(),
            });
        }
        let depth = self.depth();
        let frontier = self.leaves_by_depth[depth].clone();
        let config = &self.config;
        let expansions: Vec<Result<Vec<PendingNode<T>>>> = frontier
            .par_iter()
            .map(|&leaf_id| {
                let leaf = &self.nodes[leaf_id];
                let mut out = Vec::new();
                expand_node(
                    leaf.seed,
                    None,
                    leaf.left,
                    leaf.diameter,
                    1,
                    config,
                    leaf_id,
                    &mut out,
                )?;
                Ok(out)
            })
            .collect();

        // Merge in frontier order so ids are thread-count independent.
        let mut new_frontier = Vec::new();
        let subtree_height = self.config.subtree_height;
        for (&leaf_id, expansion) in frontier.iter().zip(expansions) {
            let base = self.nodes.len();
            for pending in expansion? {
                let parent = match pending.parent_local {
                    None => leaf_id,
                    Some(local) => base + local,
                };
                let id = self.nodes.len();
                self.nodes.push(Node {
                    id,
                    parent: Some(parent),
                    depth: depth + 1,
                    left: pending.left,
                    diameter: pending.diameter,
                    contraction: pending.ratio,
                    sibling_rank: pending.rank,
                    children: Vec::new(),
                    seed: pending.seed,
                });
                self.nodes[parent].children.push(id);
                if pending.gen == subtree_height {
                    new_frontier.push(id);
                }
            }
        }
        if new_frontier.is_empty() {
            self.extinct = true;
        }
        self.leaves_by_depth.push(new_frontier);
        Ok(())
    }

    /// Leaf ids at `depth`; errors when the realization died before reaching it.
    pub fn leaves_at(&self, depth: usize) -> Result<&[usize]> {
        match self.leaves_by_depth.get(depth) {
            Some(row) if !row.is_empty() => Ok(row),
            _ => Err(Error::ExtinctDepth { depth }),
        }
    }

    /// Check structural invariants on every node; returns the first violation.
    pub fn validate_structure(&self) -> std::result::Result<(), String> {
        let tol = T::from_f64_lossy(1e-12);
        let root = &self.nodes[0];
        if root.left != T::zero() || root.diameter != T::one() {
            return Err("root interval is not [0,1]".into());
        }
        for node in &self.nodes {
            let Some(pid) = node.parent else { continue };
            let parent = &self.nodes[pid];
            if !(node.diameter < parent.diameter) {
                return Err(format!(
                    "node {}: diameter not strictly decreasing",
                    node.id
                ));
            }
            let expected = node.contraction * parent.diameter;
            if (node.diameter - expected).abs() > tol * parent.diameter {
                return Err(format!(
                    "node {}: diameter != ratio * parent diameter",
                    node.id
                ));
            }
            let slack = tol * parent.diameter;
            if node.left < parent.left - slack || node.right() > parent.right() + slack {
                return Err(format!("node {}: interval escapes parent", node.id));
            }
            if self.config.variant == Variant::Anchored && node.left != parent.left {
                return Err(format!(
                    "node {}: anchored child not at parent left",
                    node.id
                ));
            }
        }
        Ok(())
    }
}

/// Grow a full realization from the unit interval.
pub fn grow<T: Real>(config: CascadeConfig<T>) -> Result<Realization<T>> {
    config.validate(false)?;
    let max_depth = config.max_depth;
    let mut realization = Realization::root(config);
    for _ in 0..max_depth {
        if realization.extinct {
            break;
        }
        realization.grow_step()?;
    }
    Ok(realization)
}
