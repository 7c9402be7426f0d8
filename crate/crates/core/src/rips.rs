//! Vietoris–Rips persistent homology over Z/2.
//!
//! The filtration lists every simplex of dimension `<= max_dim` whose diameter is at most
//! `max_scale`, sorted by (filtration value, dimension, vertex tuple). Persistence pairs come
//! from the standard left-to-right reduction of the boundary matrix; columns are processed
//! one dimension at a time from the top down so that columns of simplices already known to
//! be negative can be cleared without changing the result.

use std::collections::HashMap;

use serde::ser::SerializeStruct;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::structure::{AtomSelector, ProteinStructure};

/// Default simplex cap for one filtration.
pub const DEFAULT_MAX_SIMPLICES: usize = 50_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Simplex {
    /// Sorted vertex indices; length is dimension + 1.
    pub vertices: Vec<u32>,
    pub value: f64,
}

impl Simplex {
    pub fn dim(&self) -> usize {
        self.vertices.len() - 1
    }
}

#[derive(Debug, Clone)]
pub struct Filtration {
    pub simplices: Vec<Simplex>,
    pub max_scale: f64,
    pub max_dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RipsParams {
    pub max_scale: f64,
    /// Largest simplex dimension in the filtration; barcodes are reported for `0..max_dim`.
    pub max_dim: usize,
    pub max_simplices: usize,
}

impl Default for RipsParams {
    fn default() -> Self {
        RipsParams {
            max_scale: 50.0,
            max_dim: 3,
            max_simplices: DEFAULT_MAX_SIMPLICES,
        }
    }
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

pub fn build_rips_filtration(points: &[[f64; 3]], params: &RipsParams) -> Result<Filtration> {
    if params.max_dim > 3 {
        return Err(Error::InvalidParameter(format!(
            "max_dim must be at most 3, got {}",
            params.max_dim
        )));
    }
    if !(params.max_scale >= 0.0 && params.max_scale.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "max_scale must be finite and nonnegative, got {}",
            params.max_scale
        )));
    }
    let n = points.len();
    if n > u32::MAX as usize {
        return Err(Error::InvalidParameter("too many points".into()));
    }
    let capacity_error = || Error::Capacity {
        limit: params.max_simplices,
        max_scale: params.max_scale,
    };
    if n > params.max_simplices {
        return Err(capacity_error());
    }

    let mut simplices: Vec<Simplex> = (0..n as u32)
        .map(|v| Simplex { vertices: vec![v], value: 0.0 })
        .collect();

    // Upper neighbor lists: for each v, neighbors u > v within max_scale, ascending.
    let mut dist = HashMap::new();
    let mut upper: Vec<Vec<u32>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            let d = distance(points[i], points[j]);
            if d == 0.0 {
                return Err(Error::DuplicatePoint { first: i, second: j });
            }
            if d <= params.max_scale && params.max_dim >= 1 {
                upper[i].push(j as u32);
                dist.insert((i as u32, j as u32), d);
            }
        }
    }
    let edge = |a: u32, b: u32| dist[&(a.min(b), a.max(b))];

    let push = |simplices: &mut Vec<Simplex>, vertices: Vec<u32>, value: f64| -> Result<()> {
        if simplices.len() >= params.max_simplices {
            return Err(capacity_error());
        }
        simplices.push(Simplex { vertices, value });
        Ok(())
    };

    for v in 0..n as u32 {
        let nv = &upper[v as usize];
        for (a, &u) in nv.iter().enumerate() {
            let d_vu = edge(v, u);
            push(&mut simplices, vec![v, u], d_vu)?;
            if params.max_dim < 2 {
                continue;
            }
            let common: Vec<u32> = intersect(&nv[a + 1..], &upper[u as usize]);
            for (b, &w) in common.iter().enumerate() {
                let tri = d_vu.max(edge(v, w)).max(edge(u, w));
                push(&mut simplices, vec![v, u, w], tri)?;
                if params.max_dim < 3 {
                    continue;
                }
                for &x in intersect(&common[b + 1..], &upper[w as usize]).iter() {
                    let tet = tri.max(edge(v, x)).max(edge(u, x)).max(edge(w, x));
                    push(&mut simplices, vec![v, u, w, x], tet)?;
                }
            }
        }
    }

    simplices.sort_by(|a, b| {
        a.value
            .total_cmp(&b.value)
            .then(a.vertices.len().cmp(&b.vertices.len()))
            .then_with(|| a.vertices.cmp(&b.vertices))
    });
    Ok(Filtration {
        simplices,
        max_scale: params.max_scale,
        max_dim: params.max_dim,
    })
}

fn intersect(a: &[u32], b: &[u32]) -> Vec<u32> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// Result of reducing a filtration's boundary matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Reduction {
    /// `(birth simplex, death simplex)` positions in filtration order, sorted by death.
    pub pairs: Vec<(usize, usize)>,
    /// Positive simplices never killed, ascending.
    pub essential: Vec<usize>,
}

/// Reduces the boundary matrix of `f`. With `clearing`, columns of simplices that are
/// already paired as a birth are zeroed without reduction.
pub fn reduce(f: &Filtration, clearing: bool) -> Reduction {
    let n = f.simplices.len();
    let position: HashMap<&[u32], usize> = f
        .simplices
        .iter()
        .enumerate()
        .map(|(i, s)| (s.vertices.as_slice(), i))
        .collect();

    let boundary = |s: &Simplex| -> Vec<usize> {
        if s.vertices.len() == 1 {
            return Vec::new();
        }
        let mut face = Vec::with_capacity(s.vertices.len() - 1);
        let mut rows: Vec<usize> = (0..s.vertices.len())
            .map(|skip| {
                face.clear();
                face.extend(
                    s.vertices
                        .iter()
                        .enumerate()
                        .filter(|&(i, _)| i != skip)
                        .map(|(_, &v)| v),
                );
                position[face.as_slice()]
            })
            .collect();
        rows.sort_unstable();
        rows
    };

    // owner[row] = column whose reduced pivot is `row`
    let mut owner: Vec<Option<usize>> = vec![None; n];
    let mut killed = vec![false; n];
    let mut columns: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut pairs = Vec::new();

    for dim in (1..=f.max_dim).rev() {
        for j in 0..n {
            if f.simplices[j].dim() != dim {
                continue;
            }
            if clearing && killed[j] {
                continue;
            }
            let mut column = boundary(&f.simplices[j]);
            while let Some(&low) = column.last() {
                match owner[low] {
                    Some(k) => column = symmetric_difference(&column, &columns[k]),
                    None => break,
                }
            }
            if let Some(&low) = column.last() {
                owner[low] = Some(j);
                killed[low] = true;
                pairs.push((low, j));
            }
            columns[j] = column;
        }
    }
    pairs.sort_by_key(|&(_, death)| death);
    let essential = (0..n).filter(|&i| columns[i].is_empty() && !killed[i]).collect();
    Reduction { pairs, essential }
}

fn symmetric_difference(a: &[usize], b: &[usize]) -> Vec<usize> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::with_capacity(a.len() + b.len());
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Persistence intervals of one homology dimension. Infinite deaths are `f64::INFINITY`.
#[derive(Debug, Clone, PartialEq)]
pub struct Barcode {
    pub dim: usize,
    pub bars: Vec<(f64, f64)>,
}

impl Barcode {
    pub fn finite_count(&self) -> usize {
        self.bars.iter().filter(|(_, d)| d.is_finite()).count()
    }

    /// Replaces deaths beyond `scale` (including infinite ones) with `scale`.
    pub fn truncated(&self, scale: f64) -> Barcode {
        Barcode {
            dim: self.dim,
            bars: self.bars.iter().map(|&(b, d)| (b, d.min(scale))).collect(),
        }
    }

    fn canonicalize(&mut self) {
        self.bars
            .sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    }
}

impl Serialize for Barcode {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let bars: Vec<(f64, Option<f64>)> = self
            .bars
            .iter()
            .map(|&(b, d)| (b, d.is_finite().then_some(d)))
            .collect();
        let mut s = serializer.serialize_struct("Barcode", 2)?;
        s.serialize_field("dim", &self.dim)?;
        s.serialize_field("bars", &bars)?;
        s.end()
    }
}

impl<'de> Deserialize<'de> for Barcode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            dim: usize,
            bars: Vec<(f64, Option<f64>)>,
        }
        let raw = Raw::deserialize(deserializer)?;
        Ok(Barcode {
            dim: raw.dim,
            bars: raw
                .bars
                .into_iter()
                .map(|(b, d)| (b, d.unwrap_or(f64::INFINITY)))
                .collect(),
        })
    }
}

/// Barcodes for dimensions `0..max_dim`, bars sorted by (birth, death). Zero-length bars are
/// dropped.
pub fn reduce_and_extract(f: &Filtration) -> Vec<Barcode> {
    barcodes_from(f, &reduce(f, true))
}

pub fn barcodes_from(f: &Filtration, reduction: &Reduction) -> Vec<Barcode> {
    let mut barcodes: Vec<Barcode> = (0..f.max_dim.max(1))
        .map(|dim| Barcode { dim, bars: Vec::new() })
        .collect();
    for &(birth, death) in &reduction.pairs {
        let dim = f.simplices[birth].dim();
        let (b, d) = (f.simplices[birth].value, f.simplices[death].value);
        if dim < barcodes.len() && b < d {
            barcodes[dim].bars.push((b, d));
        }
    }
    for &i in &reduction.essential {
        let dim = f.simplices[i].dim();
        if dim < barcodes.len() {
            barcodes[dim].bars.push((f.simplices[i].value, f64::INFINITY));
        }
    }
    for barcode in &mut barcodes {
        barcode.canonicalize();
    }
    barcodes
}

/// Rips barcodes of the atoms picked by `selector`.
pub fn barcode_for_selection(
    structure: &ProteinStructure,
    selector: AtomSelector,
    params: &RipsParams,
) -> Result<Vec<Barcode>> {
    let points = structure.select_atoms(selector)?;
    let filtration = build_rips_filtration(&points, params)?;
    Ok(reduce_and_extract(&filtration))
}
