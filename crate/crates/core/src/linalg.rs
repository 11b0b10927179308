//! Dense Cholesky factorization.
//!
//! The factorization is blocked so that the trailing update runs through
//! `gemm`; full-space Newton steps factor an `n x n` Hessian and spend
//! nearly all of their time here.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const BLOCK: usize = 64;

/// Lower-triangular Cholesky factor `A = L Lᵀ` of a symmetric positive
/// definite matrix. Only the lower triangle of the input is read.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DMatrix<f64>,
}

impl Cholesky {
    /// Factors `a`. A pivot that is not larger than
    /// `n * eps * max(diag(a))` is reported as [`Error::RankDeficient`]
    /// carrying its index.
    pub fn new(mut a: DMatrix<f64>) -> Result<Self> {
        assert_eq!(a.nrows(), a.ncols(), "Cholesky of a non-square matrix");
        factor_in_place(&mut a).map_err(|pivot| Error::RankDeficient { pivot })?;
        Ok(Self { l: a })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// `log det A = 2 Σ log L_ii`.
    pub fn log_det(&self) -> f64 {
        2.0 * self.l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// Overwrites `b` with `L⁻¹ b`.
    pub fn solve_lower_mut(&self, b: &mut DMatrix<f64>) {
        let ok = self.l.solve_lower_triangular_mut(b);
        debug_assert!(ok);
    }

    /// Overwrites `b` with `A⁻¹ b`.
    pub fn solve_mut(&self, b: &mut DVector<f64>) {
        let ok = self.l.solve_lower_triangular_mut(b) && self.l.tr_solve_lower_triangular_mut(b);
        debug_assert!(ok);
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.solve_mut(&mut x);
        x
    }
}

fn factor_in_place(a: &mut DMatrix<f64>) -> std::result::Result<(), usize> {
    let n = a.nrows();
    let max_diag = (0..n).map(|i| a[(i, i)]).fold(0.0_f64, f64::max);
    let tol = f64::EPSILON * n as f64 * max_diag;

    let mut k0 = 0;
    while k0 < n {
        let kb = BLOCK.min(n - k0);
        let k1 = k0 + kb;

        // Column-oriented factorization of the block column (diagonal block
        // and the panel below it); earlier blocks are already subtracted.
        let data = a.as_mut_slice();
        for j in k0..k1 {
            let (left, right) = data.split_at_mut((j + 1) * n);
            let colj = &mut left[j * n..];
            let d = colj[j];
            if !d.is_finite() || d <= tol {
                return Err(j);
            }
            let ljj = d.sqrt();
            colj[j] = ljj;
            for x in &mut colj[j + 1..] {
                *x /= ljj;
            }
            for c in (j + 1)..k1 {
                let colc = &mut right[(c - j - 1) * n..(c - j) * n];
                let lcj = colj[c];
                for (x, y) in colc[c..].iter_mut().zip(&colj[c..]) {
                    *x -= lcj * y;
                }
            }
        }

        let rest = n - k1;
        if rest > 0 {
            // Trailing update of the lower triangle: A22 -= L21 L21ᵀ.
            let panel = a.view((k1, k0), (rest, kb)).clone_owned();
            let mut j0 = 0;
            while j0 < rest {
                let jb = BLOCK.min(rest - j0);
                let lhs = panel.rows(j0, rest - j0);
                let rhs_t = panel.rows(j0, jb).transpose();
                let mut target = a.view_mut((k1 + j0, k1 + j0), (rest - j0, jb));
                target.gemm(-1.0, &lhs, &rhs_t, 1.0);
                j0 += jb;
            }
        }
        k0 = k1;
    }

    for j in 1..n {
        for i in 0..j {
            a[(i, j)] = 0.0;
        }
    }
    Ok(())
}

/// `(a + aᵀ) / 2`, in place.
pub fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}
