//! Banded Cholesky factorization for symmetric positive-definite systems.
//!
//! Matrices are stored by rows, lower band only: row `i` keeps the entries
//! `A[i][i-bw..=i]`, padded with zeros at the top-left corner.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BandedError {
    #[error("non-positive pivot {pivot:e} at row {row}: matrix is not positive definite")]
    NonPositivePivot { row: usize, pivot: f64 },
}

/// Symmetric matrix with half-bandwidth `bw`, lower band stored row-wise.
#[derive(Debug, Clone)]
pub struct SymBanded {
    n: usize,
    bw: usize,
    band: Vec<f64>,
}

impl SymBanded {
    pub fn zeros(n: usize, bw: usize) -> Self {
        SymBanded {
            n,
            bw,
            band: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (self.bw + j - i)
    }

    /// Entry `(i, j)`; symmetric, zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.band[self.slot(i, j)]
        }
    }

    /// Adds `v` to entries `(i, j)` and `(j, i)`. Panics outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        assert!(i - j <= self.bw, "entry ({i}, {j}) outside band {}", self.bw);
        let s = self.slot(i, j);
        self.band[s] += v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            let row = &self.band[i * (self.bw + 1)..(i + 1) * (self.bw + 1)];
            let off = self.bw + lo - i;
            for (k, j) in (lo..i).enumerate() {
                let a = row[off + k];
                y[i] += a * x[j];
                y[j] += a * x[i];
            }
            y[i] += row[self.bw] * x[i];
        }
        y
    }

    pub fn factor(&self) -> Result<BandedCholesky, BandedError> {
        BandedCholesky::new(self)
    }
}

/// `A = L Lᵀ` with `L` lower banded, same storage layout as [`SymBanded`].
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandedCholesky {
    pub fn new(a: &SymBanded) -> Result<Self, BandedError> {
        let (n, bw) = (a.n, a.bw);
        let w = bw + 1;
        let mut l = a.band.clone();
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                // L[i][k] for k in max(lo, j-bw)..j; rows i and j overlap on lo..j.
                let mut s = l[i * w + bw + j - i];
                let ri = i * w + bw - i;
                let rj = j * w + bw - j;
                for k in lo..j {
                    s -= l[ri + k] * l[rj + k];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(BandedError::NonPositivePivot { row: i, pivot: s });
                    }
                    l[i * w + bw] = s.sqrt();
                } else {
                    l[i * w + bw + j - i] = s / l[j * w + bw];
                }
            }
        }
        Ok(BandedCholesky { n, bw, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        let (bw, w) = (self.bw, self.bw + 1);
        // L y = b
        for i in 0..self.n {
            let lo = i.saturating_sub(bw);
            let row = &self.l[i * w..(i + 1) * w];
            let off = bw + lo - i;
            let mut s = x[i];
            for (k, xk) in x[lo..i].iter().enumerate() {
                s -= row[off + k] * xk;
            }
            x[i] = s / row[bw];
        }
        // Lᵀ x = y, column-oriented so that row i of L is read contiguously.
        for i in (0..self.n).rev() {
            let lo = i.saturating_sub(bw);
            let row = &self.l[i * w..(i + 1) * w];
            let xi = x[i] / row[bw];
            x[i] = xi;
            let off = bw + lo - i;
            for (k, xk) in x[lo..i].iter_mut().enumerate() {
                *xk -= row[off + k] * xi;
            }
        }
    }
}
