//! Symmetric banded matrices with Cholesky factorization, triangular solves,
//! log-determinants, and selected inversion.
//!
//! Every precision matrix handled by this crate is symmetric positive definite
//! and block-diagonal over time steps, and within a block its sparsity pattern
//! is the graph adjacency. Storing each block as a symmetric band (half
//! bandwidth = largest index gap over the block's edges) makes factorization,
//! solves, and the Takahashi-style selected inverse all O(n·b²). A band with
//! `half_bandwidth = n - 1` degrades gracefully to dense storage, which is the
//! fallback for small irregular systems.

use crate::error::{Error, Result};

/// Symmetric matrix stored as a lower band: entry (i, j) with
/// `j <= i <= j + half_bandwidth` lives at `data[j * (hbw + 1) + (i - j)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBand {
    n: usize,
    hbw: usize,
    data: Vec<f64>,
}

impl SymBand {
    pub fn zeros(n: usize, half_bandwidth: usize) -> Self {
        let hbw = half_bandwidth.min(n.saturating_sub(1));
        SymBand {
            n,
            hbw,
            data: vec![0.0; n * (hbw + 1)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_bandwidth(&self) -> usize {
        self.hbw
    }

    #[inline]
    fn idx(&self, col: usize, off: usize) -> usize {
        col * (self.hbw + 1) + off
    }

    /// Value at (i, j); zero outside the band.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        if hi - lo > self.hbw {
            return 0.0;
        }
        self.data[self.idx(lo, hi - lo)]
    }

    /// Sets the symmetric entry (i, j). Panics outside the band.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        assert!(hi - lo <= self.hbw, "entry ({i}, {j}) outside band {}", self.hbw);
        let at = self.idx(lo, hi - lo);
        self.data[at] = value;
    }

    /// Adds to the symmetric entry (i, j). Panics outside the band.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        assert!(hi - lo <= self.hbw, "entry ({i}, {j}) outside band {}", self.hbw);
        let at = self.idx(lo, hi - lo);
        self.data[at] += value;
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.data[self.idx(i, 0)]).collect()
    }

    /// y = A·x.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for j in 0..self.n {
            let top = (j + self.hbw).min(self.n - 1);
            y[j] += self.data[self.idx(j, 0)] * x[j];
            for i in (j + 1)..=top {
                let v = self.data[self.idx(j, i - j)];
                y[i] += v * x[j];
                y[j] += v * x[i];
            }
        }
        y
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.n]; self.n];
        for i in 0..self.n {
            for j in 0..self.n {
                dense[i][j] = self.get(i, j);
            }
        }
        dense
    }

    /// Cholesky factorization A = L·Lᵀ. Fill stays inside the band, so the
    /// factor reuses the same layout. Fails on a non-positive pivot.
    pub fn cholesky(&self) -> Result<BandCholesky> {
        let n = self.n;
        let hbw = self.hbw;
        let w = hbw + 1;
        let mut l = self.data.clone();
        for j in 0..n {
            let kmin = j.saturating_sub(hbw);
            let mut d = l[j * w];
            for k in kmin..j {
                let ljk = l[k * w + (j - k)];
                d -= ljk * ljk;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { index: j, pivot: d });
            }
            let ljj = d.sqrt();
            l[j * w] = ljj;
            let top = (j + hbw).min(n - 1);
            for i in (j + 1)..=top {
                let mut s = l[j * w + (i - j)];
                let kmin = i.saturating_sub(hbw);
                for k in kmin..j {
                    s -= l[k * w + (i - k)] * l[k * w + (j - k)];
                }
                l[j * w + (i - j)] = s / ljj;
            }
        }
        Ok(BandCholesky { n, hbw, data: l })
    }
}

/// Lower-triangular Cholesky factor in band layout.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    hbw: usize,
    data: Vec<f64>,
}

impl BandCholesky {
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn l(&self, i: usize, j: usize) -> f64 {
        debug_assert!(j <= i && i - j <= self.hbw);
        self.data[j * (self.hbw + 1) + (i - j)]
    }

    /// Solves A·x = rhs in place (forward then backward substitution).
    pub fn solve_in_place(&self, x: &mut [f64]) {
        self.solve_lower_in_place(x);
        self.solve_lower_transpose_in_place(x);
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Solves L·y = rhs in place.
    pub fn solve_lower_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        let w = self.hbw + 1;
        for k in 0..self.n {
            let xk = x[k] / self.data[k * w];
            x[k] = xk;
            let top = (k + self.hbw).min(self.n - 1);
            let col = &self.data[k * w..k * w + (top - k) + 1];
            for i in (k + 1)..=top {
                x[i] -= col[i - k] * xk;
            }
        }
    }

    /// Solves Lᵀ·x = rhs in place. With ξ ~ N(0, I), the solution of
    /// Lᵀx = ξ has covariance A⁻¹, which is what Gaussian sampling needs.
    pub fn solve_lower_transpose_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        let w = self.hbw + 1;
        for k in (0..self.n).rev() {
            let top = (k + self.hbw).min(self.n - 1);
            let col = &self.data[k * w..k * w + (top - k) + 1];
            let mut s = x[k];
            for i in (k + 1)..=top {
                s -= col[i - k] * x[i];
            }
            x[k] = s / col[0];
        }
    }

    /// log det A = 2·Σ log L_kk.
    pub fn log_det(&self) -> f64 {
        let w = self.hbw + 1;
        (0..self.n).map(|k| self.data[k * w].ln()).sum::<f64>() * 2.0
    }

    /// Entries of A⁻¹ on the band, computed exactly by the backward
    /// recursion Z_ij = (δ_ij / L_ii − Σ_{k>i} L_ki · Z_kj) / L_ii.
    /// Only in-band entries of the inverse are produced; the diagonal and
    /// every original edge of the assembled matrix lie inside the band.
    pub fn selected_inverse(&self) -> SymBand {
        let n = self.n;
        let hbw = self.hbw;
        let mut z = SymBand::zeros(n, hbw);
        if n == 0 {
            return z;
        }
        for i in (0..n).rev() {
            let lii = self.l(i, i);
            let ktop = (i + hbw).min(n - 1);
            let jtop = ktop;
            for j in (i..=jtop).rev() {
                let mut s = 0.0;
                for k in (i + 1)..=ktop {
                    s += self.l(k, i) * z.get(k, j);
                }
                let value = if i == j {
                    (1.0 / lii - s) / lii
                } else {
                    -s / lii
                };
                z.set(i, j, value);
            }
        }
        z
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_spd_band(n: usize, hbw: usize, rng: &mut ChaCha8Rng) -> SymBand {
        let mut a = SymBand::zeros(n, hbw);
        for j in 0..n {
            for i in j..=(j + hbw).min(n - 1) {
                if i == j {
                    a.set(i, j, 0.0);
                } else if rng.random::<f64>() < 0.7 {
                    a.set(i, j, rng.random_range(-1.0..1.0));
                }
            }
        }
        // Diagonal dominance guarantees positive definiteness.
        for i in 0..n {
            let row: f64 = (0..n).filter(|&j| j != i).map(|j| a.get(i, j).abs()).sum();
            a.set(i, i, row + rng.random_range(0.5..2.0));
        }
        a
    }

    fn to_na(a: &SymBand) -> DMatrix<f64> {
        DMatrix::from_fn(a.n(), a.n(), |i, j| a.get(i, j))
    }

    #[test]
    fn cholesky_solve_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for &(n, hbw) in &[(1usize, 0usize), (5, 2), (12, 4), (20, 19), (30, 6)] {
            let a = random_spd_band(n, hbw, &mut rng);
            let chol = a.cholesky().unwrap();
            let rhs: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let x = chol.solve(&rhs);
            let na = to_na(&a);
            let xd = na
                .clone()
                .lu()
                .solve(&nalgebra::DVector::from_column_slice(&rhs))
                .unwrap();
            for i in 0..n {
                assert_abs_diff_eq!(x[i], xd[i], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn log_det_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for &(n, hbw) in &[(4usize, 1usize), (9, 3), (16, 15)] {
            let a = random_spd_band(n, hbw, &mut rng);
            let chol = a.cholesky().unwrap();
            let det = to_na(&a).determinant();
            assert_abs_diff_eq!(chol.log_det(), det.ln(), epsilon = 1e-9);
        }
    }

    #[test]
    fn selected_inverse_matches_dense_inverse_on_band() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(n, hbw) in &[(1usize, 0usize), (6, 2), (14, 5), (10, 9), (25, 3)] {
            let a = random_spd_band(n, hbw, &mut rng);
            let z = a.cholesky().unwrap().selected_inverse();
            let inv = to_na(&a).try_inverse().unwrap();
            for j in 0..n {
                for i in j..=(j + hbw).min(n - 1) {
                    assert_abs_diff_eq!(z.get(i, j), inv[(i, j)], epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn transpose_solve_produces_inverse_covariance_samples() {
        // Lᵀx = e_j reconstructs columns of L⁻ᵀ; check L⁻ᵀ·L⁻¹ = A⁻¹.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_spd_band(7, 3, &mut rng);
        let chol = a.cholesky().unwrap();
        let inv = to_na(&a).try_inverse().unwrap();
        let n = a.n();
        let mut linv_t = vec![vec![0.0; n]; n];
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            chol.solve_lower_transpose_in_place(&mut e);
            for i in 0..n {
                linv_t[i][j] = e[i];
            }
        }
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += linv_t[i][k] * linv_t[j][k];
                }
                assert_abs_diff_eq!(s, inv[(i, j)], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn non_positive_definite_is_reported() {
        let mut a = SymBand::zeros(2, 1);
        a.set(0, 0, 1.0);
        a.set(1, 1, 1.0);
        a.set(1, 0, 2.0);
        match a.cholesky() {
            Err(Error::NotPositiveDefinite { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected NotPositiveDefinite, got {other:?}"),
        }
    }

    #[test]
    fn matvec_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_spd_band(11, 4, &mut rng);
        let x: Vec<f64> = (0..11).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = a.matvec(&x);
        let yd = to_na(&a) * nalgebra::DVector::from_column_slice(&x);
        for i in 0..11 {
            assert_abs_diff_eq!(y[i], yd[i], epsilon = 1e-12);
        }
    }
}
