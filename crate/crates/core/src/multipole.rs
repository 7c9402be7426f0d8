//! Cartesian multi-indices and the Taylor coefficients of `1/|x - y|`.

use serde::{Deserialize, Serialize};

/// A Cartesian multi-index `k = (k1, k2, k3)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(pub [u32; 3]);

impl MultiIndex {
    pub fn order(self) -> u32 {
        self.0.iter().sum()
    }

    /// `x^k` taken componentwise.
    pub fn monomial(self, x: [f64; 3]) -> f64 {
        (0..3).map(|d| x[d].powi(self.0[d] as i32)).product()
    }
}

/// Number of multi-indices with `|k| <= order`: `(p+1)(p+2)(p+3)/6`.
pub fn term_count(order: usize) -> usize {
    (order + 1) * (order + 2) * (order + 3) / 6
}

/// All multi-indices up to a total order, in graded lexicographic order: ascending `|k|`,
/// then ascending `(k1, k2, k3)`.
///
/// The set also carries the lookup tables the recurrences need: the position of `k - e_i`
/// and `k - 2 e_i` for every entry, and binomial coefficients for moment shifts.
#[derive(Debug, Clone)]
pub struct MultiIndexSet {
    order: usize,
    indices: Vec<MultiIndex>,
    minus_one: Vec<[Option<usize>; 3]>,
    minus_two: Vec<[Option<usize>; 3]>,
    binomial: Vec<Vec<f64>>,
}

impl MultiIndexSet {
    pub fn new(order: usize) -> Self {
        let mut indices = Vec::with_capacity(term_count(order));
        for total in 0..=order as u32 {
            for k1 in 0..=total {
                for k2 in 0..=total - k1 {
                    indices.push(MultiIndex([k1, k2, total - k1 - k2]));
                }
            }
        }
        indices.sort_by_key(|k| (k.order(), k.0));

        let position = |k: [u32; 3]| -> usize {
            indices
                .binary_search_by_key(&(k.iter().sum::<u32>(), k), |m| (m.order(), m.0))
                .expect("index within order")
        };
        let step = |k: MultiIndex, dim: usize, by: u32| -> Option<usize> {
            (k.0[dim] >= by).then(|| {
                let mut reduced = k.0;
                reduced[dim] -= by;
                position(reduced)
            })
        };
        let minus_one = indices
            .iter()
            .map(|&k| [step(k, 0, 1), step(k, 1, 1), step(k, 2, 1)])
            .collect();
        let minus_two = indices
            .iter()
            .map(|&k| [step(k, 0, 2), step(k, 1, 2), step(k, 2, 2)])
            .collect();

        let mut binomial = vec![vec![0.0; order + 1]; order + 1];
        for n in 0..=order {
            binomial[n][0] = 1.0;
            for m in 1..=n {
                binomial[n][m] = binomial[n - 1][m - 1] + if m < n { binomial[n - 1][m] } else { 0.0 };
            }
        }

        MultiIndexSet {
            order,
            indices,
            minus_one,
            minus_two,
            binomial,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn position(&self, k: MultiIndex) -> Option<usize> {
        if k.order() as usize > self.order {
            return None;
        }
        self.indices
            .binary_search_by_key(&(k.order(), k.0), |m| (m.order(), m.0))
            .ok()
    }

    /// `C(n, m)` for `n <= order`.
    pub fn binomial(&self, n: u32, m: u32) -> f64 {
        if m > n {
            0.0
        } else {
            self.binomial[n as usize][m as usize]
        }
    }

    /// Writes `x^k` for every `k` in the set into `out`.
    pub fn monomials(&self, x: [f64; 3], out: &mut [f64]) {
        out[0] = 1.0;
        for (slot, k) in self.indices.iter().enumerate().skip(1) {
            // Every k with |k| >= 1 has some k - e_i earlier in the ordering.
            let dim = (0..3).find(|&d| k.0[d] > 0).unwrap();
            out[slot] = out[self.minus_one[slot][dim].unwrap()] * x[dim];
        }
    }

    /// Taylor coefficients `a_k = (1/k!) D_y^k (1/|x - y|)` at `y = center`, written for every
    /// `k` in the set, where `r = x - center`.
    ///
    /// Uses the recurrence
    /// `|k| |r|^2 a_k - (2|k| - 1) sum_i r_i a_{k-e_i} + (|k| - 1) sum_i a_{k-2e_i} = 0`.
    pub fn taylor_coefficients(&self, r: [f64; 3], out: &mut [f64]) {
        let r2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
        out[0] = 1.0 / r2.sqrt();
        for (slot, k) in self.indices.iter().enumerate().skip(1) {
            let n = k.order() as f64;
            let mut first = 0.0;
            let mut second = 0.0;
            for dim in 0..3 {
                if let Some(prev) = self.minus_one[slot][dim] {
                    first += r[dim] * out[prev];
                }
                if let Some(prev) = self.minus_two[slot][dim] {
                    second += out[prev];
                }
            }
            out[slot] = ((2.0 * n - 1.0) * first - (n - 1.0) * second) / (n * r2);
        }
    }
}
