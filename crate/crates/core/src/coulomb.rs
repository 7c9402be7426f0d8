//! Coulomb energy by direct pairwise summation and by a particle-cluster Cartesian treecode.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::octree::{Cluster, ClusterTree};
use crate::structure::Atom;

/// Coulomb constant converting e²/Å to kcal/mol.
pub const KCAL_PER_MOL: f64 = 332.0716;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EnergyUnits {
    /// e²/Å, unit constant 1.
    #[default]
    Internal,
    KcalPerMol,
}

impl EnergyUnits {
    pub fn constant(self) -> f64 {
        match self {
            EnergyUnits::Internal => 1.0,
            EnergyUnits::KcalPerMol => KCAL_PER_MOL,
        }
    }
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

fn check_dielectric(eps1: f64) -> Result<()> {
    if eps1 > 0.0 && eps1.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("eps1 must be positive, got {eps1}")))
    }
}

/// `E = C_e sum_{j<k} q_j q_k / (eps1 r_jk)`.
pub fn coulomb_energy_direct(atoms: &[Atom], eps1: f64, unit_constant: f64) -> Result<f64> {
    check_dielectric(eps1)?;
    let mut total = 0.0;
    for (k, target) in atoms.iter().enumerate() {
        for (j, source) in atoms.iter().enumerate().take(k) {
            let r = distance(target.position, source.position);
            if r == 0.0 {
                return Err(Error::SingularPair { first: j, second: k });
            }
            total += source.charge * target.charge / r;
        }
    }
    Ok(unit_constant * total / eps1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreecodeParams {
    pub eps1: f64,
    pub order: usize,
    pub levels: usize,
    /// Multipole acceptance ratio: half-diagonal / distance.
    pub theta: f64,
    pub unit_constant: f64,
}

impl Default for TreecodeParams {
    fn default() -> Self {
        TreecodeParams {
            eps1: 1.0,
            order: 4,
            levels: 4,
            theta: 0.5,
            unit_constant: 1.0,
        }
    }
}

impl TreecodeParams {
    pub fn validate(&self) -> Result<()> {
        check_dielectric(self.eps1)?;
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "theta must lie in (0, 1), got {}",
                self.theta
            )));
        }
        Ok(())
    }
}

/// Treecode approximation of the Coulomb energy.
///
/// For each target, clusters are visited from the root. A cluster whose half-diagonal over
/// the target distance is at most `theta` contributes its order-`p` Taylor expansion; a
/// cluster with no more members than expansion terms, or a leaf, is summed directly.
/// Self-interaction is excluded.
pub fn coulomb_energy_treecode(atoms: &[Atom], params: &TreecodeParams) -> Result<f64> {
    params.validate()?;
    if atoms.len() < 2 {
        return Ok(0.0);
    }
    let tree = ClusterTree::build(atoms, params.levels, params.order)?;
    let potentials = treecode_potentials(&tree, params.theta)?;
    let sum: f64 = tree
        .charges()
        .iter()
        .zip(&potentials)
        .map(|(q, phi)| q * phi)
        .sum();
    Ok(params.unit_constant * 0.5 * sum / params.eps1)
}

/// Per-atom potentials `sum_{j != i} q_j / |x_i - x_j|` (no dielectric or unit constant).
pub fn treecode_potentials(tree: &ClusterTree, theta: f64) -> Result<Vec<f64>> {
    let n = tree.positions().len();
    (0..n)
        .into_par_iter()
        .map(|target| {
            let mut walker = Walker {
                tree,
                theta,
                target,
                x: tree.positions()[target],
                coefficients: vec![0.0; tree.terms().len()],
            };
            walker.visit(tree.cluster(0, 0))
        })
        .collect()
}

struct Walker<'a> {
    tree: &'a ClusterTree,
    theta: f64,
    target: usize,
    x: [f64; 3],
    coefficients: Vec<f64>,
}

impl Walker<'_> {
    fn visit(&mut self, cluster: Cluster<'_>) -> Result<f64> {
        if cluster.is_empty() {
            return Ok(0.0);
        }
        if cluster.level == self.tree.levels() || cluster.members.len() <= self.tree.terms().len() {
            return self.direct(cluster.members);
        }
        let c = cluster.center;
        let r = [self.x[0] - c[0], self.x[1] - c[1], self.x[2] - c[2]];
        let dist = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
        if cluster.half_diagonal() <= self.theta * dist {
            self.tree.terms().taylor_coefficients(r, &mut self.coefficients);
            return Ok(self
                .coefficients
                .iter()
                .zip(cluster.moments)
                .map(|(a, m)| a * m)
                .sum());
        }
        let mut phi = 0.0;
        for child in self.tree.children(&cluster) {
            phi += self.visit(child)?;
        }
        Ok(phi)
    }

    fn direct(&self, members: &[usize]) -> Result<f64> {
        let positions = self.tree.positions();
        let charges = self.tree.charges();
        let mut phi = 0.0;
        for &j in members {
            if j == self.target {
                continue;
            }
            let r = distance(self.x, positions[j]);
            if r == 0.0 {
                return Err(Error::SingularPair {
                    first: j.min(self.target),
                    second: j.max(self.target),
                });
            }
            phi += charges[j] / r;
        }
        Ok(phi)
    }
}
