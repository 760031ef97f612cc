//! Cascade measures over a realization: leaf masses under the supported
//! weighting schemes, the depth-indexed scale matrix, and binned mass
//! profiles over normalized position.

use crate::config::WeightingMode;
use crate::error::{Error, Result};
use crate::num::Real;
use crate::stats::pairwise_sum;
use crate::tree::Realization;

/// Per-depth arrays of leaf diameters and leaf masses.
#[derive(Clone, Debug)]
pub struct ScaleRow<T> {
    pub diameters: Vec<T>,
    pub masses: Vec<T>,
}

impl<T> ScaleRow<T> {
    pub fn leaf_count(&self) -> usize {
        self.diameters.len()
    }
}

/// Rows indexed by refinement depth, 0 up to the last non-extinct depth.
#[derive(Clone, Debug)]
pub struct ScaleMatrix<T> {
    pub rows: Vec<ScaleRow<T>>,
}

impl<T> ScaleMatrix<T> {
    pub fn row(&self, depth: usize) -> Result<&ScaleRow<T>> {
        self.rows.get(depth).ok_or(Error::ExtinctDepth { depth })
    }

    pub fn max_depth(&self) -> usize {
        self.rows.len() - 1
    }
}

/// Weight of each child of `parent` under `mode`, in sibling order.
/// RawProduct weights are the raw ratios (normalization happens per depth).
fn sibling_weights<T: Real>(
    ratios: &[T],
    ranks: &[usize],
    mode: &WeightingMode<T>,
) -> Result<Vec<T>> {
    match mode {
        WeightingMode::Canonical { beta } => {
            let xs: Vec<T> = ratios.iter().map(|&r| r.powf(*beta)).collect();
            let total = pairwise_sum(&xs);
            Ok(xs.into_iter().map(|x| x / total).collect())
        }
        WeightingMode::RawProduct => Ok(ratios.to_vec()),
        WeightingMode::Explicit(weights) => {
            let picked: Vec<T> = ranks
                .iter()
                .map(|&rank| {
                    weights.get(rank).copied().ok_or_else(|| {
                        Error::invalid_config(
                            "weighting.weights",
                            format!("no weight for sibling rank {rank}"),
                        )
                    })
                })
                .collect::<Result<_>>()?;
            let total = pairwise_sum(&picked);
            Ok(picked.into_iter().map(|w| w / total).collect())
        }
    }
}

/// Unnormalized path-product weight per node id.
pub fn node_weights<T: Real>(real: &Realization<T>, mode: &WeightingMode<T>) -> Result<Vec<T>> {
    let mut mass = vec![T::zero(); real.nodes.len()];
    mass[0] = T::one();
    for node in &real.nodes {
        if node.children.is_empty() {
            continue;
        }
        let ratios: Vec<T> = node
            .children
            .iter()
            .map(|&c| real.nodes[c].contraction)
            .collect();
        let ranks: Vec<usize> = node
            .children
            .iter()
            .map(|&c| real.nodes[c].sibling_rank)
            .collect();
        let weights = sibling_weights(&ratios, &ranks, mode)?;
        for (&child, w) in node.children.iter().zip(weights) {
            mass[child] = mass[node.id] * w;
        }
    }
    Ok(mass)
}

/// Index of the deepest non-empty frontier row.
pub fn available_depth<T>(real: &Realization<T>) -> usize {
    real.leaves_by_depth
        .iter()
        .rposition(|row| !row.is_empty())
        .unwrap_or(0)
}

/// Leaf masses per depth, rows 0 through `through_depth`.
///
/// Canonical and Explicit masses sum to 1 per depth by construction; a depth
/// total below 1 means lineages died out above it, in which case the row is
/// renormalized. RawProduct rows are always normalized by the depth total.
pub fn leaf_masses_through<T: Real>(
    real: &Realization<T>,
    mode: &WeightingMode<T>,
    through_depth: usize,
) -> Result<Vec<Vec<T>>> {
    let weights = node_weights(real, mode)?;
    let mut rows = Vec::with_capacity(through_depth + 1);
    for depth in 0..=through_depth {
        let leaves = real.leaves_at(depth)?;
        let mut row: Vec<T> = leaves.iter().map(|&id| weights[id]).collect();
        let total = pairwise_sum(&row);
        if total <= T::zero() {
            return Err(Error::ExtinctDepth { depth });
        }
        if (total - T::one()).abs() > T::from_f64_lossy(1e-9) {
            for m in &mut row {
                *m = *m / total;
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Leaf masses for every non-extinct depth.
pub fn leaf_masses<T: Real>(real: &Realization<T>, mode: &WeightingMode<T>) -> Result<Vec<Vec<T>>> {
    leaf_masses_through(real, mode, available_depth(real))
}

/// Extract the per-depth scale matrix (diameters and masses) of a realization.
pub fn scale_matrix<T: Real>(
    real: &Realization<T>,
    mode: &WeightingMode<T>,
) -> Result<ScaleMatrix<T>> {
    let through = available_depth(real);
    let masses = leaf_masses_through(real, mode, through)?;
    let rows = (0..=through)
        .map(|depth| {
            let diameters = real.leaves_by_depth[depth]
                .iter()
                .map(|&id| real.nodes[id].diameter)
                .collect();
            ScaleRow {
                diameters,
                masses: masses[depth].clone(),
            }
        })
        .collect();
    Ok(ScaleMatrix { rows })
}

/// Per-depth binned mass histogram over normalized position in [0,1].
/// An interval's mass is split across bins proportionally to overlap length,
/// so each row sums to the row's total mass.
pub fn mass_heatmap_bins<T: Real>(
    matrix: &ScaleMatrix<T>,
    real: &Realization<T>,
    bins: usize,
) -> Result<Vec<Vec<T>>> {
    if bins < 1 {
        return Err(Error::InsufficientData("bins must be >= 1".into()));
    }
    let bin_width = T::one() / T::from_usize_lossy(bins);
    let mut heatmap = Vec::with_capacity(matrix.rows.len());
    for (depth, row) in matrix.rows.iter().enumerate() {
        let leaves = real.leaves_at(depth)?;
        let mut hist = vec![T::zero(); bins];
        for (&id, &mass) in leaves.iter().zip(&row.masses) {
            let node = &real.nodes[id];
            let (left, right) = (node.left, node.right());
            let first = (left / bin_width).to_usize().unwrap_or(0).min(bins - 1);
            let last = (right / bin_width).to_usize().unwrap_or(0).min(bins - 1);
            for bin in first..=last {
                let lo = T::from_usize_lossy(bin) * bin_width;
                let hi = lo + bin_width;
                let overlap = right.min(hi) - left.max(lo);
                if overlap > T::zero() {
                    hist[bin] = hist[bin] + mass * overlap / node.diameter;
                }
            }
        }
        heatmap.push(hist);
    }
    Ok(heatmap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::CascadeConfig;
    use crate::tree::grow;

    type Config = CascadeConfig<f64>;

    #[test]
    fn dyadic_canonical_masses_are_uniform() {
        let real = grow(Config::dyadic(5, 1)).unwrap();
        let rows = leaf_masses(&real, &WeightingMode::canonical_unit()).unwrap();
        for (n, row) in rows.iter().enumerate() {
            let expected = 0.5f64.powi(n as i32);
            for &m in row {
                assert!((m - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn two_point_canonical_weights() {
        // siblings with ratios (1/3, 2/3) under beta=1 get weights (1/3, 2/3)
        let real = grow(Config::worked_example(1, 2)).unwrap();
        let rows = leaf_masses(&real, &WeightingMode::canonical_unit()).unwrap();
        let leaves = real.leaves_at(1).unwrap();
        for (&id, &m) in leaves.iter().zip(&rows[1]) {
            let r = real.nodes[id].contraction;
            let sib_sum: f64 = leaves.iter().map(|&j| real.nodes[j].contraction).sum();
            assert!((m - r / sib_sum).abs() < 1e-15);
        }
    }

    #[test]
    fn masses_sum_to_one_each_depth() {
        let real = grow(Config::worked_example(12, 3)).unwrap();
        for mode in [
            WeightingMode::canonical_unit(),
            WeightingMode::RawProduct,
            WeightingMode::Explicit(vec![0.25, 0.75]),
        ] {
            let rows = leaf_masses(&real, &mode).unwrap();
            assert_eq!(rows.len(), 13);
            for row in &rows {
                let total: f64 = pairwise_sum(row);
                assert!((total - 1.0).abs() < 1e-9, "total {total}");
            }
        }
    }

    #[test]
    fn parent_mass_equals_sum_of_children() {
        let real = grow(Config::worked_example(8, 4)).unwrap();
        let weights = node_weights(&real, &WeightingMode::canonical_unit()).unwrap();
        for node in &real.nodes {
            if node.children.is_empty() {
                continue;
            }
            let child_sum: f64 = pairwise_sum(
                &node
                    .children
                    .iter()
                    .map(|&c| weights[c])
                    .collect::<Vec<_>>(),
            );
            assert!((weights[node.id] - child_sum).abs() < 1e-12);
        }
    }

    #[test]
    fn scale_matrix_matches_node_store() {
        let real = grow(Config::worked_example(4, 5)).unwrap();
        let sm = scale_matrix(&real, &WeightingMode::canonical_unit()).unwrap();
        // recompute diameters independently as ratio products along paths
        for (depth, row) in sm.rows.iter().enumerate() {
            for (&id, &d) in real.leaves_at(depth).unwrap().iter().zip(&row.diameters) {
                let mut product = 1.0f64;
                let mut cur = Some(id);
                while let Some(i) = cur {
                    product *= real.nodes[i].contraction;
                    cur = real.nodes[i].parent;
                }
                assert!((d - product).abs() < 1e-12 * product.max(1e-300));
            }
        }
    }

    #[test]
    fn extinct_row_extraction_errors() {
        let cfg = Config {
            offspring: crate::laws::OffspringLaw::new(vec![1.0]).unwrap(),
            ..Config::dyadic(5, 1)
        };
        let real = grow(cfg).unwrap();
        assert!(real.extinct);
        let sm = scale_matrix(&real, &WeightingMode::canonical_unit()).unwrap();
        assert_eq!(sm.rows.len(), 1); // only the root row
        assert!(sm.row(1).is_err());
        assert!(leaf_masses_through(&real, &WeightingMode::canonical_unit(), 1).is_err());
    }

    #[test]
    fn heatmap_single_leaf_spreads_uniformly() {
        let real = grow(Config::dyadic(1, 1)).unwrap();
        let sm = scale_matrix(&real, &WeightingMode::canonical_unit()).unwrap();
        let heat = mass_heatmap_bins(&sm, &real, 4).unwrap();
        for &b in &heat[0] {
            assert!((b - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn heatmap_dyadic_depth3_uniform_bins() {
        let real = grow(Config::dyadic(3, 1)).unwrap();
        let sm = scale_matrix(&real, &WeightingMode::canonical_unit()).unwrap();
        let heat = mass_heatmap_bins(&sm, &real, 8).unwrap();
        for &b in &heat[3] {
            assert!((b - 0.125).abs() < 1e-12);
        }
    }

    #[test]
    fn heatmap_rows_sum_to_one() {
        let real = grow(Config::worked_example(10, 6)).unwrap();
        let sm = scale_matrix(&real, &WeightingMode::canonical_unit()).unwrap();
        let heat = mass_heatmap_bins(&sm, &real, 64).unwrap();
        for row in &heat {
            let total: f64 = pairwise_sum(row);
            assert!((total - 1.0).abs() < 1e-9, "total {total}");
        }
        // non-uniform profile at depth 10
        let spread = heat[10]
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                (lo.min(x), hi.max(x))
            });
        assert!(spread.1 > 2.0 * spread.0.max(1e-12));
    }

    #[test]
    fn degenerate_law_gives_equal_masses() {
        let mut cfg = Config::dyadic(6, 7);
        cfg.placement = crate::config::Placement::Free;
        let real = grow(cfg).unwrap();
        let rows = leaf_masses(&real, &WeightingMode::canonical_unit()).unwrap();
        let l6 = rows[6].len() as f64;
        for &m in &rows[6] {
            assert!((m - 1.0 / l6).abs() < 1e-12);
        }
    }
}
