//! Independent oracles shared by the integration and acceptance suites. Nothing here calls
//! into the code paths it checks.

#![allow(dead_code)]

use etforge::structure::Atom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_atoms(n: usize, extent: f64, rng: &mut ChaCha8Rng) -> Vec<Atom> {
    (0..n)
        .map(|i| {
            let p = [
                rng.gen_range(0.0..extent),
                rng.gen_range(0.0..extent),
                rng.gen_range(0.0..extent),
            ];
            Atom::new(i as i64 + 1, "C", p, rng.gen_range(-1.0..1.0), 1.7)
        })
        .collect()
}

/// Brute-force moment `sum q (x - c)^k` over atoms in the half-open cube
/// `[c - h, c + h)`, together with `sum |q (x - c)^k|` as the error scale.
pub fn direct_moment(atoms: &[Atom], center: [f64; 3], half: f64, k: [u32; 3]) -> (f64, f64) {
    let mut sum = 0.0;
    let mut scale = 0.0;
    for a in atoms {
        let inside = (0..3).all(|d| a.position[d] >= center[d] - half && a.position[d] < center[d] + half);
        if !inside {
            continue;
        }
        let mut term = a.charge;
        for d in 0..3 {
            term *= (a.position[d] - center[d]).powi(k[d] as i32);
        }
        sum += term;
        scale += term.abs();
    }
    (sum, scale)
}

/// Error of `got` against an oracle value, relative to the oracle's absolute-sum scale.
pub fn relative_to_scale(got: f64, expected: f64, scale: f64) -> f64 {
    let diff = (got - expected).abs();
    if diff == 0.0 {
        0.0
    } else {
        diff / scale.max(f64::MIN_POSITIVE)
    }
}

pub fn pair_distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// Simplex list produced by enumerating every vertex subset of size 1..=max_dim+1.
pub struct BruteComplex {
    /// (vertices, dimension, value)
    pub simplices: Vec<(Vec<usize>, usize, f64)>,
}

impl BruteComplex {
    pub fn new(points: &[[f64; 3]], max_scale: f64, max_dim: usize) -> Self {
        let n = points.len();
        let mut simplices = Vec::new();
        for mask in 1u32..(1 << n) {
            let vertices: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
            if vertices.len() > max_dim + 1 {
                continue;
            }
            let mut value = 0.0f64;
            for (i, &a) in vertices.iter().enumerate() {
                for &b in &vertices[i + 1..] {
                    value = value.max(pair_distance(points[a], points[b]));
                }
            }
            if value <= max_scale {
                let dim = vertices.len() - 1;
                simplices.push((vertices, dim, value));
            }
        }
        BruteComplex { simplices }
    }

    pub fn count(&self, dim: usize) -> usize {
        self.simplices.iter().filter(|s| s.1 == dim).count()
    }
}

/// XOR basis over GF(2) keyed by leading bit.
struct Gf2Basis {
    rows: Vec<Option<Vec<u64>>>,
    rank: usize,
}

impl Gf2Basis {
    fn new(bits: usize) -> Self {
        Gf2Basis { rows: vec![None; bits], rank: 0 }
    }

    fn insert(&mut self, mut v: Vec<u64>) {
        loop {
            let lead = v
                .iter()
                .enumerate()
                .rev()
                .find(|(_, &w)| w != 0)
                .map(|(i, &w)| i * 64 + 63 - w.leading_zeros() as usize);
            let Some(lead) = lead else { return };
            match &self.rows[lead] {
                Some(row) => {
                    for (a, b) in v.iter_mut().zip(row) {
                        *a ^= b;
                    }
                }
                None => {
                    self.rows[lead] = Some(v);
                    self.rank += 1;
                    return;
                }
            }
        }
    }
}

fn bitset(bits: usize, ones: impl Iterator<Item = usize>) -> Vec<u64> {
    let mut v = vec![0u64; bits.div_ceil(64).max(1)];
    for i in ones {
        v[i / 64] |= 1 << (i % 64);
    }
    v
}

/// Barcodes for dimensions `0..max_dim` from persistent Betti numbers computed by rank
/// counting at every pair of critical values. Bars sorted by (birth, death).
pub fn rank_oracle_barcodes(points: &[[f64; 3]], max_scale: f64, max_dim: usize) -> Vec<Vec<(f64, f64)>> {
    let complex = BruteComplex::new(points, max_scale, max_dim);
    let mut critical: Vec<f64> = complex.simplices.iter().map(|s| s.2).collect();
    critical.sort_by(f64::total_cmp);
    critical.dedup();
    let m = critical.len();
    let level = |v: f64| critical.iter().position(|&c| c == v).unwrap();

    let by_dim: Vec<Vec<(&Vec<usize>, usize)>> = (0..=max_dim)
        .map(|d| {
            complex
                .simplices
                .iter()
                .filter(|s| s.1 == d)
                .map(|s| (&s.0, level(s.2)))
                .collect()
        })
        .collect();
    let face_index = |d: usize, face: &[usize]| by_dim[d].iter().position(|(v, _)| v.as_slice() == face).unwrap();
    let faces = |vertices: &Vec<usize>| -> Vec<Vec<usize>> {
        (0..vertices.len())
            .map(|skip| {
                vertices
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != skip)
                    .map(|(_, &v)| v)
                    .collect()
            })
            .collect()
    };

    // rank of the boundary map from dim d into dim d-1 restricted to K_a, for every a
    let boundary_rank = |d: usize, a: usize| -> usize {
        if d == 0 || d > max_dim {
            return 0;
        }
        let rows = by_dim[d - 1].len();
        let mut basis = Gf2Basis::new(rows.max(1));
        for (vertices, lvl) in &by_dim[d] {
            if *lvl <= a {
                basis.insert(bitset(rows, faces(vertices).iter().map(|f| face_index(d - 1, f))));
            }
        }
        basis.rank
    };

    let mut out = Vec::new();
    for k in 0..max_dim {
        // beta[a][b] for a <= b
        let cycles: Vec<usize> = (0..m)
            .map(|a| by_dim[k].iter().filter(|(_, l)| *l <= a).count() - boundary_rank(k, a))
            .collect();
        let mut beta = vec![vec![0usize; m]; m];
        for b in 0..m {
            // Rows: k-simplices in K_b; columns: (k+1)-simplices in K_b.
            let cols: Vec<&Vec<usize>> = by_dim[k + 1].iter().filter(|(_, l)| *l <= b).map(|(v, _)| *v).collect();
            let mut incidence: Vec<Vec<usize>> = vec![Vec::new(); by_dim[k].len()];
            for (c, vertices) in cols.iter().enumerate() {
                for f in faces(vertices) {
                    incidence[face_index(k, &f)].push(c);
                }
            }
            let mut full = Gf2Basis::new(cols.len().max(1));
            for (row, (_, l)) in by_dim[k].iter().enumerate() {
                if *l <= b {
                    full.insert(bitset(cols.len(), incidence[row].iter().copied()));
                }
            }
            let boundary_rank_b = full.rank;
            // Insert rows from the highest level down; after level a+1 the basis spans the
            // rows of K_b \ K_a.
            let mut partial = Gf2Basis::new(cols.len().max(1));
            let mut projected = vec![0usize; b + 1];
            for a in (0..=b).rev() {
                projected[a] = partial.rank;
                for (row, (_, l)) in by_dim[k].iter().enumerate() {
                    if *l == a {
                        partial.insert(bitset(cols.len(), incidence[row].iter().copied()));
                    }
                }
            }
            for a in 0..=b {
                beta[a][b] = cycles[a] - (boundary_rank_b - projected[a]);
            }
        }
        let b_at = |a: isize, b: usize| -> isize {
            if a < 0 {
                0
            } else {
                beta[a as usize][b] as isize
            }
        };
        let mut bars = Vec::new();
        for i in 0..m {
            for j in i + 1..m {
                let mu = b_at(i as isize, j - 1) - b_at(i as isize, j) - b_at(i as isize - 1, j - 1)
                    + b_at(i as isize - 1, j);
                assert!(mu >= 0, "negative multiplicity");
                for _ in 0..mu {
                    bars.push((critical[i], critical[j]));
                }
            }
            let essential = b_at(i as isize, m - 1) - b_at(i as isize - 1, m - 1);
            for _ in 0..essential {
                bars.push((critical[i], f64::INFINITY));
            }
        }
        bars.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        out.push(bars);
    }
    out
}

pub fn random_cloud(rng: &mut ChaCha8Rng, max_points: usize) -> (Vec<[f64; 3]>, f64) {
    let n = rng.gen_range(3..=max_points);
    let points = (0..n)
        .map(|_| [rng.gen_range(0.0..3.0), rng.gen_range(0.0..3.0), rng.gen_range(0.0..3.0)])
        .collect();
    let scale = if rng.gen_bool(0.3) { 10.0 } else { rng.gen_range(1.0..4.0) };
    (points, scale)
}

/// Rotation matrix from Euler angles.
pub fn rotation(rng: &mut ChaCha8Rng) -> [[f64; 3]; 3] {
    let (a, b, c) = (
        rng.gen_range(0.0..std::f64::consts::TAU),
        rng.gen_range(0.0..std::f64::consts::PI),
        rng.gen_range(0.0..std::f64::consts::TAU),
    );
    let rz = |t: f64| [[t.cos(), -t.sin(), 0.0], [t.sin(), t.cos(), 0.0], [0.0, 0.0, 1.0]];
    let ry = |t: f64| [[t.cos(), 0.0, t.sin()], [0.0, 1.0, 0.0], [-t.sin(), 0.0, t.cos()]];
    let mul = |x: [[f64; 3]; 3], y: [[f64; 3]; 3]| {
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = (0..3).map(|k| x[i][k] * y[k][j]).sum();
            }
        }
        out
    };
    mul(mul(rz(a), ry(b)), rz(c))
}

pub fn apply(rot: [[f64; 3]; 3], shift: [f64; 3], p: [f64; 3]) -> [f64; 3] {
    let mut out = shift;
    for i in 0..3 {
        for j in 0..3 {
            out[i] += rot[i][j] * p[j];
        }
    }
    out
}
