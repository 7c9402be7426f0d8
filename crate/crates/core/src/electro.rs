//! Fixed-length electrostatic feature vectors built from cluster-tree moments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multipole::term_count;
use crate::octree::{cluster_count, ClusterTree};
use crate::structure::Atom;

/// Tag recorded with every vector: ascending level, octant-path cluster index, graded-lex
/// multi-index.
pub const ORDERING_VERSION: &str = "level/octant-path/graded-lex-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectroFeatureVector {
    pub values: Vec<f64>,
    pub order: usize,
    pub levels: usize,
    pub ordering_version: String,
}

/// `N_f(p, L) = N_p (8^(L+1) - 1) / 7` with `N_p = (p+1)(p+2)(p+3)/6`.
pub fn feature_count(order: usize, levels: usize) -> Result<usize> {
    cluster_count(levels)
        .and_then(|clusters| clusters.checked_mul(term_count(order)))
        .ok_or_else(|| {
            Error::InvalidParameter(format!("feature count overflows for p={order}, L={levels}"))
        })
}

/// Flattens every cluster's moments in canonical order. Empty clusters contribute zeros.
pub fn extract_features(tree: &ClusterTree) -> ElectroFeatureVector {
    let values = (0..=tree.levels())
        .flat_map(|level| tree.level_moments(level).iter().copied())
        .collect();
    ElectroFeatureVector {
        values,
        order: tree.expansion_order(),
        levels: tree.levels(),
        ordering_version: ORDERING_VERSION.to_string(),
    }
}

/// Builds the cluster tree for `atoms` and extracts its features.
pub fn electro_features(atoms: &[Atom], order: usize, levels: usize) -> Result<ElectroFeatureVector> {
    let tree = ClusterTree::build(atoms, levels, order)?;
    Ok(extract_features(&tree))
}
