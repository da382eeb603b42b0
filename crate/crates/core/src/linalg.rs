//! Direct solver for periodic (cyclic) banded systems.
//!
//! Unknowns are grouped in blocks of `n_comp` components per grid node;
//! entry `(row, col)` may be nonzero only if the cyclic distance between the
//! two nodes is at most `node_bandwidth`. The nodes are reordered
//! zig-zag (`0, N-1, 1, N-2, ...`), which turns the cyclic band into an
//! ordinary band of roughly twice the width, and the permuted system is
//! factorized by banded LU with partial pivoting.

use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct CyclicBandMatrix {
    n_nodes: usize,
    n_comp: usize,
    node_bandwidth: usize,
    /// `perm[unknown]` is the position of the unknown in the banded ordering.
    perm: Vec<usize>,
    band: BandMatrix,
}

impl CyclicBandMatrix {
    pub fn zeros(n_nodes: usize, n_comp: usize, node_bandwidth: usize) -> Self {
        assert!(n_nodes > 0 && n_comp > 0, "empty matrix");
        let node_pos: Vec<usize> = (0..n_nodes)
            .map(|i| {
                if 2 * i < n_nodes {
                    2 * i
                } else {
                    2 * (n_nodes - 1 - i) + 1
                }
            })
            .collect();
        let perm: Vec<usize> = (0..n_nodes * n_comp)
            .map(|k| node_pos[k / n_comp] * n_comp + k % n_comp)
            .collect();
        let b = node_bandwidth.min(n_nodes / 2);
        let (mut kl, mut ku) = (0usize, 0usize);
        for i in 0..n_nodes {
            for d in 0..=b {
                for j in [(i + d) % n_nodes, (i + n_nodes - d) % n_nodes] {
                    for ci in 0..n_comp {
                        for cj in 0..n_comp {
                            let r = perm[i * n_comp + ci];
                            let c = perm[j * n_comp + cj];
                            if r > c {
                                kl = kl.max(r - c);
                            } else {
                                ku = ku.max(c - r);
                            }
                        }
                    }
                }
            }
        }
        Self {
            n_nodes,
            n_comp,
            node_bandwidth,
            perm,
            band: BandMatrix::zeros(n_nodes * n_comp, kl, ku),
        }
    }

    pub fn dim(&self) -> usize {
        self.n_nodes * self.n_comp
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_comp(&self) -> usize {
        self.n_comp
    }

    pub fn node_bandwidth(&self) -> usize {
        self.node_bandwidth
    }

    /// Whether `(row, col)` lies inside the cyclic band.
    pub fn in_band(&self, row: usize, col: usize) -> bool {
        let (a, b) = (row / self.n_comp, col / self.n_comp);
        let d = a.abs_diff(b);
        d.min(self.n_nodes - d) <= self.node_bandwidth
    }

    /// Adds `value` to entry `(row, col)`; indices are `node * n_comp + comp`.
    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        assert!(
            self.in_band(row, col),
            "entry ({row}, {col}) outside the cyclic band"
        );
        let (r, c) = (self.perm[row], self.perm[col]);
        self.band.add(r, c, value);
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        if !self.in_band(row, col) {
            return 0.0;
        }
        self.band.get(self.perm[row], self.perm[col])
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut px = vec![0.0; n];
        for (k, &p) in self.perm.iter().enumerate() {
            px[p] = x[k];
        }
        let py = self.band.mul_vec(&px);
        self.perm.iter().map(|&p| py[p]).collect()
    }

    pub fn factorize(&self) -> Result<CyclicBandLu> {
        Ok(CyclicBandLu {
            perm: self.perm.clone(),
            lu: self.band.clone().factorize()?,
        })
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.factorize()?.solve(rhs)
    }
}

#[derive(Debug, Clone)]
pub struct CyclicBandLu {
    perm: Vec<usize>,
    lu: BandLu,
}

impl CyclicBandLu {
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.perm.len();
        if rhs.len() != n {
            return Err(Error::Dimension(format!(
                "right-hand side has {} entries, matrix is {n}x{n}",
                rhs.len()
            )));
        }
        let mut b = vec![0.0; n];
        for (k, &p) in self.perm.iter().enumerate() {
            b[p] = rhs[k];
        }
        self.lu.solve_in_place(&mut b);
        Ok(self.perm.iter().map(|&p| b[p]).collect())
    }
}

/// Band matrix in LAPACK-style column storage with room for the pivoting
/// fill-in (`kl` extra superdiagonals).
#[derive(Debug, Clone)]
struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ld: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ld = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            ld,
            data: vec![0.0; ld * n],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        j * self.ld + (self.kl + self.ku + i - j)
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i <= j + self.kl && j <= i + self.ku);
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        if i > j + self.kl || j > i + self.ku {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    fn factorize(mut self) -> Result<BandLu> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let mut pivots = vec![0usize; n];
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.idx(k, k)].abs();
            for i in k + 1..=last_row {
                let v = self.data[self.idx(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::SingularJacobian { column: k });
            }
            pivots[k] = p;
            let last_col = (k + kl + ku).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let (a, b) = (self.idx(k, j), self.idx(p, j));
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.idx(k, k)];
            for i in k + 1..=last_row {
                let ik = self.idx(i, k);
                let l = self.data[ik] / pivot;
                self.data[ik] = l;
                if l != 0.0 {
                    for j in k + 1..=last_col {
                        let kj = self.data[self.idx(k, j)];
                        let ij = self.idx(i, j);
                        self.data[ij] -= l * kj;
                    }
                }
            }
        }
        Ok(BandLu {
            band: self,
            pivots,
        })
    }
}

#[derive(Debug, Clone)]
struct BandLu {
    band: BandMatrix,
    pivots: Vec<usize>,
}

impl BandLu {
    fn solve_in_place(&self, b: &mut [f64]) {
        let m = &self.band;
        let n = m.n;
        for k in 0..n {
            b.swap(k, self.pivots[k]);
            let last_row = (k + m.kl).min(n - 1);
            for i in k + 1..=last_row {
                b[i] -= m.data[m.idx(i, k)] * b[k];
            }
        }
        for k in (0..n).rev() {
            let last_col = (k + m.kl + m.ku).min(n - 1);
            let mut s = b[k];
            for j in k + 1..=last_col {
                s -= m.data[m.idx(k, j)] * b[j];
            }
            b[k] = s / m.data[m.idx(k, k)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cyclic(
        rng: &mut ChaCha8Rng,
        n_nodes: usize,
        n_comp: usize,
        bw: usize,
        diag_boost: f64,
    ) -> CyclicBandMatrix {
        let mut m = CyclicBandMatrix::zeros(n_nodes, n_comp, bw);
        let n = n_nodes * n_comp;
        for r in 0..n {
            for c in 0..n {
                if m.in_band(r, c) {
                    m.add(r, c, rng.gen_range(-1.0..1.0));
                }
            }
            m.add(r, r, diag_boost);
        }
        m
    }

    #[test]
    fn solves_match_dense_lu() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(nodes, comp, bw) in &[(4, 1, 2), (5, 1, 2), (9, 2, 1), (40, 2, 1), (33, 1, 2), (1, 1, 0), (3, 2, 1)] {
            // no diagonal boost: pivoting must cope with general matrices
            let m = random_cyclic(&mut rng, nodes, comp, bw, 0.0);
            let n = m.dim();
            let dense = DMatrix::from_fn(n, n, |i, j| m.get(i, j));
            let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x = m.solve(&rhs).unwrap();
            let expected = dense.lu().solve(&DVector::from_vec(rhs.clone())).unwrap();
            for (a, b) in x.iter().zip(expected.iter()) {
                assert!((a - b).abs() < 1e-8 * (1.0 + b.abs()), "{nodes}x{comp}: {a} vs {b}");
            }
            let back = m.mul_vec(&x);
            for (a, b) in back.iter().zip(&rhs) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn wrap_entries_are_stored() {
        let mut m = CyclicBandMatrix::zeros(6, 1, 1);
        m.add(0, 5, 2.0);
        m.add(5, 0, 3.0);
        assert_eq!(m.get(0, 5), 2.0);
        assert_eq!(m.get(5, 0), 3.0);
        assert!(!m.in_band(0, 3));
        assert_eq!(m.get(0, 3), 0.0);
    }

    #[test]
    #[should_panic]
    fn out_of_band_insert_panics() {
        let mut m = CyclicBandMatrix::zeros(8, 1, 1);
        m.add(0, 4, 1.0);
    }

    #[test]
    fn singular_detected() {
        let m = CyclicBandMatrix::zeros(5, 2, 1);
        assert!(matches!(
            m.solve(&[0.0; 10]),
            Err(Error::SingularJacobian { .. })
        ));
    }

    #[test]
    fn band_stays_narrow() {
        let m = CyclicBandMatrix::zeros(200, 2, 1);
        assert!(m.band.kl <= 7 && m.band.ku <= 7, "{} {}", m.band.kl, m.band.ku);
    }
}
