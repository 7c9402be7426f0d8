//! Complete octree of nested cubic clusters carrying Cartesian multipole moments.
//!
//! Level `l` holds `8^l` clusters. Within a level, a cluster's index is its octant path from
//! the root: the parent's index shifted left by three bits, or'ed with the child octant code
//! (bit 0 = x-high, bit 1 = y-high, bit 2 = z-high). Children of cluster `i` at level `l`
//! are therefore `8i..8i+8` at level `l + 1`, and atoms sorted by leaf index occupy a
//! contiguous range in every cluster at every level.
//!
//! The moments of cluster `c` are `M_c^k = sum_{j in c} q_j (x_j - x_c)^k` for `|k| <= p`,
//! stored per level in graded lexicographic order of `k`.

use crate::error::{Error, Result};
use crate::multipole::{term_count, MultiIndexSet};
use crate::structure::Atom;

/// Relative inflation applied to the tight bounding cube.
pub const ROOT_INFLATION: f64 = 0.005;

/// Half-width used when all atoms share one position.
pub const DEGENERATE_HALF_WIDTH: f64 = 1.0;

/// Upper bound on `clusters * terms` accepted by [`ClusterTree::build`].
pub const MAX_MOMENT_SLOTS: usize = 1 << 27;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootCube {
    pub center: [f64; 3],
    pub half_width: f64,
}

impl RootCube {
    /// Tight bounding box expanded to a cube about its center, then inflated by 0.5%.
    pub fn enclosing(positions: &[[f64; 3]]) -> Result<Self> {
        let first = positions
            .first()
            .ok_or_else(|| Error::InvalidParameter("cannot bound an empty atom list".into()))?;
        let mut lo = *first;
        let mut hi = *first;
        for p in positions {
            for d in 0..3 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let center = [
            0.5 * (lo[0] + hi[0]),
            0.5 * (lo[1] + hi[1]),
            0.5 * (lo[2] + hi[2]),
        ];
        let extent = (0..3).map(|d| hi[d] - lo[d]).fold(0.0, f64::max);
        let half_width = if extent > 0.0 {
            0.5 * extent * (1.0 + ROOT_INFLATION)
        } else {
            DEGENERATE_HALF_WIDTH
        };
        Ok(RootCube { center, half_width })
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|d| (p[d] - self.center[d]).abs() <= self.half_width)
    }
}

/// Read-only view of one cluster.
#[derive(Debug, Clone, Copy)]
pub struct Cluster<'a> {
    pub level: usize,
    pub index: usize,
    pub center: [f64; 3],
    pub half_width: f64,
    /// Indices into the tree's atom list.
    pub members: &'a [usize],
    pub moments: &'a [f64],
}

impl Cluster<'_> {
    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn half_diagonal(&self) -> f64 {
        3f64.sqrt() * self.half_width
    }
}

#[derive(Debug, Clone)]
pub struct ClusterTree {
    root: RootCube,
    levels: usize,
    terms: MultiIndexSet,
    positions: Vec<[f64; 3]>,
    charges: Vec<f64>,
    /// Atom indices sorted by leaf index.
    order: Vec<usize>,
    /// Per level, `8^l + 1` offsets into `order`.
    ranges: Vec<Vec<usize>>,
    /// Per level, `8^l * terms` moments.
    moments: Vec<Vec<f64>>,
}

/// Number of clusters in a complete octree with levels `0..=levels`: `(8^(L+1) - 1)/7`.
pub fn cluster_count(levels: usize) -> Option<usize> {
    let mut total: usize = 0;
    for level in 0..=levels {
        total = total.checked_add(clusters_at(level)?)?;
    }
    Some(total)
}

fn clusters_at(level: usize) -> Option<usize> {
    1usize.checked_shl(u32::try_from(3 * level).ok()?).filter(|&n| n > 0 && 3 * level < 63)
}

impl ClusterTree {
    /// Builds the tree over `atoms` with moments computed directly from the particles at
    /// every level.
    pub fn build(atoms: &[Atom], levels: usize, order: usize) -> Result<Self> {
        let positions: Vec<[f64; 3]> = atoms.iter().map(|a| a.position).collect();
        let charges: Vec<f64> = atoms.iter().map(|a| a.charge).collect();
        Self::from_charges(positions, charges, levels, order)
    }

    pub fn from_charges(
        positions: Vec<[f64; 3]>,
        charges: Vec<f64>,
        levels: usize,
        order: usize,
    ) -> Result<Self> {
        let root = RootCube::enclosing(&positions)?;
        Self::with_root(positions, charges, root, levels, order)
    }

    /// Builds the tree inside a caller-chosen root cube; every position must lie inside it.
    pub fn with_root(
        positions: Vec<[f64; 3]>,
        charges: Vec<f64>,
        root: RootCube,
        levels: usize,
        order: usize,
    ) -> Result<Self> {
        let mut tree = Self::skeleton(positions, charges, root, levels, order)?;
        for level in 0..=levels {
            tree.moments[level] = tree.direct_level_moments(level);
        }
        Ok(tree)
    }

    fn skeleton(
        positions: Vec<[f64; 3]>,
        charges: Vec<f64>,
        root: RootCube,
        levels: usize,
        order: usize,
    ) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidParameter("cluster tree needs at least one atom".into()));
        }
        if positions.len() != charges.len() {
            return Err(Error::LengthMismatch {
                expected: positions.len(),
                found: charges.len(),
            });
        }
        if !(root.half_width > 0.0 && root.half_width.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "root half-width must be positive, got {}",
                root.half_width
            )));
        }
        let terms = term_count(order);
        let slots = cluster_count(levels)
            .and_then(|c| c.checked_mul(terms))
            .filter(|&s| s <= MAX_MOMENT_SLOTS)
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "order {order} with {levels} levels exceeds {MAX_MOMENT_SLOTS} moment slots"
                ))
            })?;
        debug_assert!(slots > 0);

        let mut leaf_of = Vec::with_capacity(positions.len());
        for (i, &p) in positions.iter().enumerate() {
            if !p.iter().all(|v| v.is_finite()) || !root.contains(p) {
                return Err(Error::InvalidParameter(format!(
                    "atom {i} at {p:?} lies outside the root cube"
                )));
            }
            leaf_of.push(leaf_index(root, levels, p));
        }
        let mut order_by_leaf: Vec<usize> = (0..positions.len()).collect();
        order_by_leaf.sort_by_key(|&i| (leaf_of[i], i));

        let ranges = (0..=levels)
            .map(|level| {
                let shift = 3 * (levels - level);
                let n = clusters_at(level).unwrap();
                (0..=n)
                    .map(|c| order_by_leaf.partition_point(|&i| (leaf_of[i] >> shift) < c))
                    .collect()
            })
            .collect();

        Ok(ClusterTree {
            root,
            levels,
            terms: MultiIndexSet::new(order),
            positions,
            charges,
            order: order_by_leaf,
            ranges,
            moments: vec![Vec::new(); levels + 1],
        })
    }

    pub fn root_cube(&self) -> RootCube {
        self.root
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn expansion_order(&self) -> usize {
        self.terms.order()
    }

    pub fn terms(&self) -> &MultiIndexSet {
        &self.terms
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn charges(&self) -> &[f64] {
        &self.charges
    }

    pub fn clusters_at_level(&self, level: usize) -> usize {
        self.ranges[level].len() - 1
    }

    pub fn cluster_count(&self) -> usize {
        (0..=self.levels).map(|l| self.clusters_at_level(l)).sum()
    }

    pub fn level_moments(&self, level: usize) -> &[f64] {
        &self.moments[level]
    }

    pub fn cluster(&self, level: usize, index: usize) -> Cluster<'_> {
        let (center, half_width) = cluster_geometry(self.root, level, index);
        let range = &self.ranges[level];
        let n = self.terms.len();
        Cluster {
            level,
            index,
            center,
            half_width,
            members: &self.order[range[index]..range[index + 1]],
            moments: &self.moments[level][index * n..(index + 1) * n],
        }
    }

    /// All clusters in canonical order: ascending level, then octant-path index.
    pub fn clusters(&self) -> impl Iterator<Item = Cluster<'_>> + '_ {
        (0..=self.levels)
            .flat_map(move |level| (0..self.clusters_at_level(level)).map(move |i| self.cluster(level, i)))
    }

    pub fn children(&self, cluster: &Cluster<'_>) -> impl Iterator<Item = Cluster<'_>> + '_ {
        let level = cluster.level + 1;
        let first = cluster.index * 8;
        let count = if cluster.level < self.levels { 8 } else { 0 };
        (first..first + count).map(move |i| self.cluster(level, i))
    }

    fn direct_level_moments(&self, level: usize) -> Vec<f64> {
        let n = self.terms.len();
        let clusters = self.clusters_at_level(level);
        let mut out = vec![0.0; clusters * n];
        let mut powers = vec![0.0; n];
        for c in 0..clusters {
            let (center, _) = cluster_geometry(self.root, level, c);
            let members = &self.order[self.ranges[level][c]..self.ranges[level][c + 1]];
            let slot = &mut out[c * n..(c + 1) * n];
            for &j in members {
                let p = self.positions[j];
                self.terms
                    .monomials([p[0] - center[0], p[1] - center[1], p[2] - center[2]], &mut powers);
                let q = self.charges[j];
                for (m, x) in slot.iter_mut().zip(&powers) {
                    *m += q * x;
                }
            }
        }
        out
    }

    /// Returns a copy whose non-leaf moments are rebuilt from the leaf level by
    /// moment-to-moment shifts:
    /// `M_parent^k = sum_child sum_{m <= k} C(k, m) (x_child - x_parent)^(k-m) M_child^m`.
    pub fn with_m2m_moments(&self) -> ClusterTree {
        let mut tree = self.clone();
        let n = tree.terms.len();
        let indices = tree.terms.indices().to_vec();
        let mut shift_powers = vec![0.0; n];
        for level in (0..tree.levels).rev() {
            let parents = tree.clusters_at_level(level);
            let mut parent_moments = vec![0.0; parents * n];
            for parent in 0..parents {
                let (pc, _) = cluster_geometry(tree.root, level, parent);
                let out = &mut parent_moments[parent * n..(parent + 1) * n];
                for child in parent * 8..parent * 8 + 8 {
                    let child_moments = &tree.moments[level + 1][child * n..(child + 1) * n];
                    if child_moments.iter().all(|&m| m == 0.0) {
                        continue;
                    }
                    let (cc, _) = cluster_geometry(tree.root, level + 1, child);
                    tree.terms
                        .monomials([cc[0] - pc[0], cc[1] - pc[1], cc[2] - pc[2]], &mut shift_powers);
                    for (ki, k) in indices.iter().enumerate() {
                        let mut acc = 0.0;
                        for (mi, m) in indices[..=ki].iter().enumerate() {
                            if (0..3).any(|d| m.0[d] > k.0[d]) {
                                continue;
                            }
                            let diff = crate::multipole::MultiIndex([
                                k.0[0] - m.0[0],
                                k.0[1] - m.0[1],
                                k.0[2] - m.0[2],
                            ]);
                            let coeff: f64 = (0..3).map(|d| tree.terms.binomial(k.0[d], m.0[d])).product();
                            let power = shift_powers[tree.terms.position(diff).unwrap()];
                            acc += coeff * power * child_moments[mi];
                        }
                        out[ki] += acc;
                    }
                }
            }
            tree.moments[level] = parent_moments;
        }
        tree
    }
}

/// Rebuilds non-leaf moments of `tree` by moment-to-moment shifts from its leaves.
pub fn moments_via_m2m(tree: &ClusterTree) -> ClusterTree {
    tree.with_m2m_moments()
}

fn leaf_index(root: RootCube, levels: usize, p: [f64; 3]) -> usize {
    let mut center = root.center;
    let mut half = root.half_width;
    let mut index = 0usize;
    for _ in 0..levels {
        half *= 0.5;
        let mut octant = 0usize;
        for d in 0..3 {
            // Points on a dividing plane go to the high side.
            if p[d] >= center[d] {
                octant |= 1 << d;
                center[d] += half;
            } else {
                center[d] -= half;
            }
        }
        index = (index << 3) | octant;
    }
    index
}

/// Center and half-width of cluster `index` at `level`.
pub fn cluster_geometry(root: RootCube, level: usize, index: usize) -> ([f64; 3], f64) {
    let mut center = root.center;
    let mut half = root.half_width;
    for depth in (0..level).rev() {
        let octant = (index >> (3 * depth)) & 7;
        half *= 0.5;
        for d in 0..3 {
            if octant & (1 << d) != 0 {
                center[d] += half;
            } else {
                center[d] -= half;
            }
        }
    }
    (center, half)
}
