//! Randomized low-rank factorization of matrices and of matrix-free operators.
//!
//! Both drivers follow the same two-stage scheme. Stage A samples the range
//! with `k + p` Gaussian test vectors and orthonormalizes the samples into
//! `Q`. Stage B applies the adjoint to every column of `Q`, which gives
//! `B = AᵀQ`, and takes a small dense SVD `Bᵀ = Ũ Σ Vᵀ`. The result is
//! `A ≈ (QŨ) Σ Vᵀ`, truncated to rank `k`.
//!
//! The cost is `2(k+p)` operator applications plus `O((k+p)²(m+n))` dense
//! work. For a PDE solution map each application is one local solve, so the
//! solves dominate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::dense::{axpy, dot, norm2, Mat};

/// Columns whose norm after projection falls below this fraction of `‖Y‖_F` are dropped.
pub const RANK_DROP_TOL: f64 = 1e-13;
/// Largest accepted relative violation of `⟨g, A f⟩ = ⟨Aᵀ g, f⟩` on the probe pairs.
pub const ADJOINT_PROBE_TOL: f64 = 1e-8;
const ADJOINT_PROBES: usize = 3;
const MAX_JACOBI_SWEEPS: usize = 80;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LowRankError {
    #[error("matrix has {kept} numerically independent columns; dropped {dropped:?}")]
    RankDeficient {
        q: Mat,
        kept: usize,
        dropped: Vec<usize>,
    },
    #[error("Jacobi SVD did not converge in {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("adjoint probe {probe} violates the transpose identity: relative error {rel_error:e}")]
    AdjointInconsistent { probe: usize, rel_error: f64 },
    #[error("invalid RSVD configuration: {0}")]
    InvalidConfig(String),
}

/// Thin SVD `U · diag(S) · Vᵀ` with singular values sorted nonincreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdTriple {
    pub u: Mat,
    pub s: Vec<f64>,
    pub v: Mat,
}

impl SvdTriple {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    pub fn truncate(mut self, k: usize) -> Self {
        let k = k.min(self.rank());
        self.u = self.u.columns(0..k);
        self.v = self.v.columns(0..k);
        self.s.truncate(k);
        self
    }

    pub fn reconstruct(&self) -> Mat {
        let mut us = self.u.clone();
        us.scale_columns(&self.s);
        us.matmul(&self.v.transpose())
    }

    /// `U Σ Vᵀ x`
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut c = self.v.tr_matvec(x);
        c.iter_mut().zip(&self.s).for_each(|(ci, si)| *ci *= si);
        self.u.matvec(&c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RsvdConfig {
    pub rank: usize,
    pub oversampling: usize,
    pub seed: u64,
}

impl RsvdConfig {
    pub fn new(rank: usize, oversampling: usize, seed: u64) -> Self {
        RsvdConfig {
            rank,
            oversampling,
            seed,
        }
    }

    pub fn samples(&self) -> usize {
        self.rank + self.oversampling
    }

    pub fn validate(&self, rows: usize, cols: usize) -> Result<(), LowRankError> {
        if self.rank == 0 {
            return Err(LowRankError::InvalidConfig("target rank must be at least 1".into()));
        }
        if self.samples() > rows.min(cols) {
            return Err(LowRankError::InvalidConfig(format!(
                "k + p = {} exceeds min(m, n) = {}",
                self.samples(),
                rows.min(cols)
            )));
        }
        Ok(())
    }
}

/// Factorization plus the bookkeeping of how it was obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct RsvdOutput {
    pub triple: SvdTriple,
    /// Operator applications in stage A (and adjoint applications in stage B).
    pub samples: usize,
    pub seed: u64,
    /// Sample columns found numerically dependent during orthonormalization.
    pub dropped: Vec<usize>,
}

/// `rows × cols` matrix of i.i.d. standard normals from ChaCha8 seeded with `seed`,
/// filled column by column.
pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> Mat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows * cols)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    Mat::from_col_major(rows, cols, data)
}

/// Modified Gram–Schmidt with one reorthogonalization pass.
/// Returns the orthonormal columns and the indices of dropped columns.
pub fn mgs(y: &Mat) -> (Mat, Vec<usize>) {
    let scale = y.frobenius_norm();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(y.cols());
    let mut dropped = Vec::new();
    for j in 0..y.cols() {
        let mut v = y.col(j).to_vec();
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &v);
                axpy(-c, q, &mut v);
            }
        }
        let nv = norm2(&v);
        if nv <= RANK_DROP_TOL * scale || nv == 0.0 {
            dropped.push(j);
            continue;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        basis.push(v);
    }
    (Mat::from_columns(y.rows(), &basis), dropped)
}

/// Orthonormal basis of the column space of `y`.
///
/// Fails with [`LowRankError::RankDeficient`] (carrying the kept basis) when
/// a column is numerically dependent on the previous ones.
pub fn qr_orthonormalize(y: &Mat) -> Result<Mat, LowRankError> {
    let (q, dropped) = mgs(y);
    if dropped.is_empty() {
        Ok(q)
    } else {
        Err(LowRankError::RankDeficient {
            kept: q.cols(),
            q,
            dropped,
        })
    }
}

/// Thin SVD by one-sided (Hestenes) Jacobi rotations.
pub fn dense_svd(m: &Mat) -> Result<SvdTriple, LowRankError> {
    if m.rows() < m.cols() {
        let t = jacobi_tall(&m.transpose())?;
        return Ok(SvdTriple {
            u: t.v,
            s: t.s,
            v: t.u,
        });
    }
    jacobi_tall(m)
}

fn jacobi_tall(m: &Mat) -> Result<SvdTriple, LowRankError> {
    let (rows, n) = (m.rows(), m.cols());
    let mut w = m.clone();
    let mut v = Mat::identity(n);
    let tol = (rows as f64).sqrt() * f64::EPSILON;
    let mut norms: Vec<f64> = (0..n).map(|j| dot(w.col(j), w.col(j))).collect();
    // Columns below this squared norm are roundoff and are not rotated further.
    let floor = (tol * m.frobenius_norm()).powi(2);

    let mut converged = n < 2;
    let mut sweeps = 0;
    while !converged {
        if sweeps == MAX_JACOBI_SWEEPS {
            return Err(LowRankError::NoConvergence { sweeps });
        }
        sweeps += 1;
        converged = true;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let (alpha, beta) = (norms[p], norms[q]);
                if alpha <= floor || beta <= floor {
                    continue;
                }
                let gamma = dot(w.col(p), w.col(q));
                if gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                converged = false;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, p, q, c, s);
                rotate(&mut v, p, q, c, s);
                norms[p] = dot(w.col(p), w.col(p));
                norms[q] = dot(w.col(q), w.col(q));
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let sigma: Vec<f64> = (0..n).map(|j| norm2(w.col(j))).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]).then(a.cmp(&b)));

    let s: Vec<f64> = order.iter().map(|&j| sigma[j]).collect();
    let mut u_cols: Vec<Vec<f64>> = order
        .iter()
        .map(|&j| {
            let sj = sigma[j];
            if sj > 0.0 {
                w.col(j).iter().map(|x| x / sj).collect()
            } else {
                vec![0.0; rows]
            }
        })
        .collect();
    complete_orthonormal(&mut u_cols, rows);
    let v_cols: Vec<Vec<f64>> = order.iter().map(|&j| v.col(j).to_vec()).collect();
    Ok(SvdTriple {
        u: Mat::from_columns(rows, &u_cols),
        s,
        v: Mat::from_columns(n, &v_cols),
    })
}

fn rotate(m: &mut Mat, p: usize, q: usize, c: f64, s: f64) {
    let (a, b) = m.col_pair_mut(p, q);
    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
        let (xp, yq) = (*x, *y);
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

/// Reorthonormalizes the columns, replacing collapsed ones (zero singular
/// values) with canonical basis vectors projected off the rest.
fn complete_orthonormal(cols: &mut [Vec<f64>], rows: usize) {
    // leverage[i] = Σ_q q_i² over the columns accepted so far; the unit vector
    // with the smallest leverage keeps at least (rows − j)/rows of its norm².
    let mut leverage = vec![0.0f64; rows];
    for j in 0..cols.len() {
        let mut v = std::mem::take(&mut cols[j]);
        let original = norm2(&v);
        project_out(&mut v, &cols[..j]);
        let mut nv = norm2(&v);
        if !(original > 0.0 && nv > 0.5 * original) {
            let i = (0..rows).min_by(|&a, &b| leverage[a].total_cmp(&leverage[b])).unwrap_or(0);
            v = vec![0.0; rows];
            v[i] = 1.0;
            project_out(&mut v, &cols[..j]);
            nv = norm2(&v);
        }
        v.iter_mut().for_each(|x| *x /= nv);
        leverage.iter_mut().zip(&v).for_each(|(l, x)| *l += x * x);
        cols[j] = v;
    }
}

fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, v);
            axpy(-c, q, v);
        }
    }
}

/// Shared two-stage core. Consumes the random stream identically for matrices
/// and operators, so both drivers agree bit for bit on the same input.
fn rsvd_core<A, B>(apply: A, adjoint: B, n_in: usize, n_out: usize, cfg: &RsvdConfig) -> Result<RsvdOutput, LowRankError>
where
    A: Fn(&[f64]) -> Vec<f64> + Sync,
    B: Fn(&[f64]) -> Vec<f64> + Sync,
{
    cfg.validate(n_out, n_in)?;
    let l = cfg.samples();
    let omega = gaussian_matrix(n_in, l, cfg.seed);

    // Stage A: range samples and their orthonormal basis.
    let samples: Vec<Vec<f64>> = (0..l).into_par_iter().map(|j| apply(omega.col(j))).collect();
    let y = Mat::from_columns(n_out, &samples);
    let (q, dropped) = mgs(&y);
    if q.cols() == 0 {
        return Ok(RsvdOutput {
            triple: SvdTriple {
                u: Mat::zeros(n_out, 0),
                s: Vec::new(),
                v: Mat::zeros(n_in, 0),
            },
            samples: l,
            seed: cfg.seed,
            dropped,
        });
    }

    // Stage B: B = AᵀQ, then Bᵀ = Ũ Σ Vᵀ.
    let fluxes: Vec<Vec<f64>> = (0..q.cols()).into_par_iter().map(|j| adjoint(q.col(j))).collect();
    let b = Mat::from_columns(n_in, &fluxes);
    let small = dense_svd(&b.transpose())?;
    let u = q.matmul(&small.u);
    let triple = SvdTriple {
        u,
        s: small.s,
        v: small.v,
    }
    .truncate(cfg.rank);
    Ok(RsvdOutput {
        triple,
        samples: l,
        seed: cfg.seed,
        dropped,
    })
}

/// Randomized SVD of an explicit matrix.
pub fn rsvd_matrix(m: &Mat, cfg: &RsvdConfig) -> Result<RsvdOutput, LowRankError> {
    rsvd_core(|x| m.matvec(x), |y| m.tr_matvec(y), m.cols(), m.rows(), cfg)
}

/// Randomized SVD of a matrix-free operator `apply: ℝⁿⁱⁿ → ℝⁿᵒᵘᵗ` given its adjoint.
///
/// The adjoint wiring is checked on a few Gaussian probe pairs drawn from a
/// separate stream before any sampling happens.
pub fn rsvd_operator<A, B>(apply: A, adjoint: B, n_in: usize, n_out: usize, cfg: &RsvdConfig) -> Result<RsvdOutput, LowRankError>
where
    A: Fn(&[f64]) -> Vec<f64> + Sync,
    B: Fn(&[f64]) -> Vec<f64> + Sync,
{
    cfg.validate(n_out, n_in)?;
    check_adjoint(&apply, &adjoint, n_in, n_out, cfg.seed)?;
    rsvd_core(apply, adjoint, n_in, n_out, cfg)
}

/// Relative violation of the transpose identity on one `(f, g)` pair.
pub fn adjoint_defect(af: &[f64], atg: &[f64], f: &[f64], g: &[f64]) -> f64 {
    let lhs = dot(g, af);
    let rhs = dot(atg, f);
    let scale = norm2(g) * norm2(af) + norm2(atg) * norm2(f);
    if scale == 0.0 {
        0.0
    } else {
        (lhs - rhs).abs() / scale
    }
}

fn check_adjoint<A, B>(apply: &A, adjoint: &B, n_in: usize, n_out: usize, seed: u64) -> Result<(), LowRankError>
where
    A: Fn(&[f64]) -> Vec<f64>,
    B: Fn(&[f64]) -> Vec<f64>,
{
    let probe_seed = seed ^ 0xA5A5_5A5A_F00D_CAFE;
    let f = gaussian_matrix(n_in, ADJOINT_PROBES, probe_seed);
    let g = gaussian_matrix(n_out, ADJOINT_PROBES, probe_seed.wrapping_add(1));
    for probe in 0..ADJOINT_PROBES {
        let af = apply(f.col(probe));
        let atg = adjoint(g.col(probe));
        let rel_error = adjoint_defect(&af, &atg, f.col(probe), g.col(probe));
        if !(rel_error <= ADJOINT_PROBE_TOL) {
            return Err(LowRankError::AdjointInconsistent { probe, rel_error });
        }
    }
    Ok(())
}
