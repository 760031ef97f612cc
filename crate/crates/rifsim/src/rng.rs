//! Counter-based splittable RNG.
//!
//! Every node's random draws come from a stream seeded by a pure function of
//! (master_seed, root-to-node path of sibling ranks), so growth is
//! bit-identical regardless of how the leaf frontier is parallelized.
//! SplitMix64 is used both as the mixing function and as the stream
//! generator; it is not cryptographic and must never be used for secrets.

const PHI: u64 = 0x9E37_79B9_7F4A_7C15;
const STREAM_TAG: u64 = 0xD1B5_4A32_D192_ED03;

/// SplitMix64 finalizer.
#[inline]
pub fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the root node of a realization.
pub fn root_seed(master_seed: u64) -> u64 {
    mix(master_seed ^ PHI)
}

/// Seed for the `rank`-th child of a node with seed `parent_seed`.
pub fn derive_child_seed(parent_seed: u64, rank: usize) -> u64 {
    mix(parent_seed ^ mix((rank as u64).wrapping_add(PHI)))
}

/// Seed for the node reached from the root by following `path` sibling ranks.
///
/// Pure function of its inputs; `derive_child_seed` folds one step at a time,
/// so incremental growth and direct derivation agree.
pub fn derive_node_seed(master_seed: u64, path: &[usize]) -> u64 {
    path.iter().fold(root_seed(master_seed), |s, &rank| {
        derive_child_seed(s, rank)
    })
}

/// Deterministic stream of draws for one node.
#[derive(Clone, Debug)]
pub struct Stream {
    state: u64,
}

impl Stream {
    /// Stream used for the expansion draws of the node with `node_seed`.
    /// Tagged so the stream never collides with child-seed derivation.
    pub fn for_node(node_seed: u64) -> Self {
        Stream {
            state: mix(node_seed ^ STREAM_TAG),
        }
    }

    pub fn from_raw_seed(seed: u64) -> Self {
        Stream { state: mix(seed) }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(PHI);
        mix(self.state)
    }

    /// Uniform in [0, 1) with 53-bit resolution.
    #[inline]
    pub fn next_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Uniform in the open interval (0, 1); never returns 0 or 1.
    #[inline]
    pub fn next_unit_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }
}
