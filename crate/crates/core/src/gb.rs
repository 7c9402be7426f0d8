//! Generalized Born solvation energy.

use crate::error::{Error, Result};
use crate::structure::Atom;

fn check_positive(what: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{what} must be positive, got {value}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbContext {
    /// Solute dielectric.
    pub eps1: f64,
    /// Solvent dielectric.
    pub eps2: f64,
    /// Effective Born radii in atom order, Å.
    pub born_radii: Vec<f64>,
    pub unit_constant: f64,
}

impl GbContext {
    pub fn new(eps1: f64, eps2: f64, born_radii: Vec<f64>, unit_constant: f64) -> Result<Self> {
        check_positive("eps1", eps1)?;
        check_positive("eps2", eps2)?;
        for &r in &born_radii {
            check_positive("Born radius", r)?;
        }
        Ok(GbContext {
            eps1,
            eps2,
            born_radii,
            unit_constant,
        })
    }

    fn prefactor(&self) -> f64 {
        self.unit_constant * (1.0 / self.eps2 - 1.0 / self.eps1)
    }
}

/// Born energy of a charge `q` centered in a sphere of radius `a`:
/// `C_e (1/eps2 - 1/eps1) q^2 / (2a)`.
pub fn born_sphere_energy(q: f64, a: f64, eps1: f64, eps2: f64, unit_constant: f64) -> Result<f64> {
    check_positive("sphere radius", a)?;
    check_positive("eps1", eps1)?;
    check_positive("eps2", eps2)?;
    Ok(unit_constant * (1.0 / eps2 - 1.0 / eps1) * q * q / (2.0 * a))
}

/// Effective interaction distance `sqrt(r^2 + Ri Rj exp(-r^2 / (4 Ri Rj)))`.
pub fn f_gb(r: f64, ri: f64, rj: f64) -> Result<f64> {
    check_positive("Born radius", ri)?;
    check_positive("Born radius", rj)?;
    if !(r >= 0.0) {
        return Err(Error::InvalidParameter(format!("distance must be nonnegative, got {r}")));
    }
    let rr = ri * rj;
    Ok((r * r + rr * (-r * r / (4.0 * rr)).exp()).sqrt())
}

/// `C_e (1/eps2 - 1/eps1) / 2 * sum_i sum_j q_i q_j / f_ij` over all ordered pairs, with
/// `f_ii = R_i`.
pub fn gb_solvation_energy(atoms: &[Atom], ctx: &GbContext) -> Result<f64> {
    Ok(gb_terms(atoms, ctx)?.total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbTerms {
    pub total: f64,
    /// Diagonal (Born self-energy) contribution of each atom.
    pub self_terms: Vec<f64>,
}

pub fn gb_terms(atoms: &[Atom], ctx: &GbContext) -> Result<GbTerms> {
    if atoms.len() != ctx.born_radii.len() {
        return Err(Error::LengthMismatch {
            expected: atoms.len(),
            found: ctx.born_radii.len(),
        });
    }
    let half = 0.5 * ctx.prefactor();
    let radii = &ctx.born_radii;
    let self_terms: Vec<f64> = atoms
        .iter()
        .zip(radii)
        .map(|(a, &r)| half * a.charge * a.charge / r)
        .collect();
    let mut cross = 0.0;
    for i in 0..atoms.len() {
        for j in 0..i {
            let p = atoms[i].position;
            let q = atoms[j].position;
            let r = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt();
            cross += atoms[i].charge * atoms[j].charge / f_gb(r, radii[i], radii[j])?;
        }
    }
    // Off-diagonal pairs appear twice in the ordered double sum.
    let total = self_terms.iter().sum::<f64>() + 2.0 * half * cross;
    Ok(GbTerms { total, self_terms })
}

/// Inverts the single-sphere Born formula: `R = C_e (1/eps2 - 1/eps1) q^2 / (2 E)`.
pub fn perfect_born_radius(q: f64, energy: f64, eps1: f64, eps2: f64, unit_constant: f64) -> Result<f64> {
    if energy == 0.0 {
        return Err(Error::ZeroEnergy);
    }
    check_positive("eps1", eps1)?;
    check_positive("eps2", eps2)?;
    Ok(unit_constant * (1.0 / eps2 - 1.0 / eps1) * q * q / (2.0 * energy))
}
