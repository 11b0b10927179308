//! D-optimality objective, its log-barrier relaxation, and derivatives.
//!
//! Conventions: `f` is the relaxed objective being maximized and every
//! gradient returned here is `∇f`. Hessians are returned negated,
//! `-∇²f`, which is positive semidefinite and is what the minimizing
//! Newton step consumes.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{symmetrize, Cholesky};
use crate::model::{CandidateBasis, SelectionVector};

/// Relaxed selection weights, strictly inside the unit box.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    w: DVector<f64>,
}

impl WeightVector {
    /// Validates `0 < w_i < 1`.
    pub fn new(w: DVector<f64>) -> Result<Self> {
        check_interior(w.as_slice())?;
        Ok(Self { w })
    }

    /// The uniform starting point `(p/n) 1`.
    pub fn uniform(n: usize, p: usize) -> Result<Self> {
        if n == 0 || p == 0 || p >= n {
            return Err(Error::InvalidArgument(format!(
                "uniform start needs 0 < p < n, got p={p}, n={n}"
            )));
        }
        Ok(Self {
            w: DVector::from_element(n, p as f64 / n as f64),
        })
    }

    pub fn as_slice(&self) -> &[f64] {
        self.w.as_slice()
    }

    pub fn vector(&self) -> &DVector<f64> {
        &self.w
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.w.sum()
    }
}

pub(crate) fn check_interior(w: &[f64]) -> Result<()> {
    match w.iter().position(|&x| !(x > 0.0 && x < 1.0)) {
        Some(index) => Err(Error::Domain {
            index,
            value: w[index],
        }),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierParams {
    kappa: f64,
}

impl BarrierParams {
    pub fn new(kappa: f64) -> Result<Self> {
        if !kappa.is_finite() || kappa < 0.0 {
            return Err(Error::InvalidArgument(format!("kappa must be >= 0, got {kappa}")));
        }
        Ok(Self { kappa })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }
}

/// `log w + log(1 - w)`.
#[inline]
pub(crate) fn barrier(w: f64) -> f64 {
    w.ln() + (1.0 - w).ln()
}

#[inline]
pub(crate) fn barrier_grad(w: f64, kappa: f64) -> f64 {
    kappa / w - kappa / (1.0 - w)
}

/// `-κ d²/dw² barrier`, positive.
#[inline]
pub(crate) fn barrier_curvature(w: f64, kappa: f64) -> f64 {
    kappa * (1.0 / (w * w) + 1.0 / ((1.0 - w) * (1.0 - w)))
}

/// Fisher matrix `W = Uᵀ D_w U` with its Cholesky factor.
#[derive(Debug, Clone)]
pub struct FisherMatrix {
    w: DMatrix<f64>,
    chol: Cholesky,
}

impl FisherMatrix {
    pub fn from_matrix(mut w: DMatrix<f64>) -> Result<Self> {
        symmetrize(&mut w);
        let chol = Cholesky::new(w.clone())?;
        Ok(Self { w, chol })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn cholesky(&self) -> &Cholesky {
        &self.chol
    }

    pub fn log_det(&self) -> f64 {
        self.chol.log_det()
    }
}

/// `Uᵀ D_w U` without factoring. `O(n r²)` through one scaled copy of `U`.
pub fn fisher_matrix(u: &CandidateBasis, w: &[f64]) -> DMatrix<f64> {
    assert_eq!(u.n(), w.len(), "weight length must equal the number of candidates");
    let mut scaled = u.matrix().clone();
    for mut col in scaled.column_iter_mut() {
        col.component_mul_assign(&DVector::from_column_slice(w));
    }
    let mut fim = u.matrix().transpose() * scaled;
    symmetrize(&mut fim);
    fim
}

pub fn fisher(u: &CandidateBasis, w: &[f64]) -> Result<FisherMatrix> {
    FisherMatrix::from_matrix(fisher_matrix(u, w))
}

/// `log det` of a selection's Fisher matrix, or `-inf` flagged singular.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDet {
    pub value: f64,
    pub singular: bool,
}

impl LogDet {
    pub const SINGULAR: LogDet = LogDet {
        value: f64::NEG_INFINITY,
        singular: true,
    };
}

/// D-optimality `log det(U_Sᵀ U_S)` of the selected rows.
pub fn d_optimality(u: &CandidateBasis, sel: &SelectionVector) -> LogDet {
    log_det_of_rows(u, sel.indices())
}

pub(crate) fn log_det_of_rows(u: &CandidateBasis, rows: &[usize]) -> LogDet {
    if rows.len() < u.r() {
        return LogDet::SINGULAR;
    }
    let sub = u.rows_at(rows);
    match FisherMatrix::from_matrix(sub.tr_mul(&sub)) {
        Ok(fim) => LogDet {
            value: fim.log_det(),
            singular: false,
        },
        Err(_) => LogDet::SINGULAR,
    }
}

/// `f(w) = log det W + κ Σ (log w_i + log(1 - w_i))`.
pub fn relaxed_objective(u: &CandidateBasis, w: &[f64], kappa: f64) -> Result<f64> {
    check_interior(w)?;
    let fim = fisher(u, w)?;
    Ok(objective_with(&fim, w, kappa))
}

pub(crate) fn objective_with(fim: &FisherMatrix, w: &[f64], kappa: f64) -> f64 {
    fim.log_det() + kappa * w.iter().map(|&x| barrier(x)).sum::<f64>()
}

/// `L⁻¹ U_idxᵀ` (`r x |idx|`), where `W = L Lᵀ`. Column `a` is the
/// whitened observation vector of candidate `idx[a]`, so
/// `u_i W⁻¹ u_jᵀ` is the dot product of two columns.
pub(crate) fn whitened_rows(u: &CandidateBasis, fim: &FisherMatrix, idx: &[usize]) -> DMatrix<f64> {
    let mut vt = u.rows_at(idx).transpose();
    fim.cholesky().solve_lower_mut(&mut vt);
    vt
}

pub(crate) fn gradient_from_whitened(vt: &DMatrix<f64>, w: &[f64], idx: &[usize], kappa: f64) -> DVector<f64> {
    DVector::from_iterator(
        idx.len(),
        idx.iter().enumerate().map(|(a, &i)| {
            let info: f64 = vt.column(a).iter().map(|v| v * v).sum();
            info + barrier_grad(w[i], kappa)
        }),
    )
}

pub(crate) fn hessian_from_whitened(vt: &DMatrix<f64>, w: &[f64], idx: &[usize], kappa: f64) -> DMatrix<f64> {
    let mut h = vt.transpose() * vt;
    h.apply(|x| *x *= *x);
    for (a, &i) in idx.iter().enumerate() {
        h[(a, a)] += barrier_curvature(w[i], kappa);
    }
    symmetrize(&mut h);
    h
}

fn check_sketch(idx: &[usize], n: usize) -> Result<()> {
    if idx.is_empty() {
        return Err(Error::InvalidSketch("empty index set".into()));
    }
    let mut seen = vec![false; n];
    for &i in idx {
        if i >= n {
            return Err(Error::InvalidSketch(format!("index {i} out of range for n={n}")));
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::InvalidSketch(format!("duplicate index {i}")));
        }
    }
    Ok(())
}

/// `∇f`, restricted to `idx` when given (entry `a` is `(∇f)_{idx[a]}`).
pub fn gradient(u: &CandidateBasis, w: &[f64], kappa: f64, idx: Option<&[usize]>) -> Result<DVector<f64>> {
    check_interior(w)?;
    let fim = fisher(u, w)?;
    let all: Vec<usize>;
    let idx = match idx {
        Some(idx) => {
            check_sketch(idx, u.n())?;
            idx
        }
        None => {
            all = (0..u.n()).collect();
            &all
        }
    };
    let vt = whitened_rows(u, &fim, idx);
    Ok(gradient_from_whitened(&vt, w, idx, kappa))
}

/// The negated subspace Hessian `-Sᵀ ∇²f S` on `idx`:
/// `(u_a W⁻¹ u_bᵀ)² + δ_ab κ (1/w_a² + 1/(1-w_a)²)`. Never forms the
/// `n x n` Hessian.
pub fn sketched_hessian(u: &CandidateBasis, w: &[f64], kappa: f64, idx: &[usize]) -> Result<DMatrix<f64>> {
    check_interior(w)?;
    check_sketch(idx, u.n())?;
    let fim = fisher(u, w)?;
    let vt = whitened_rows(u, &fim, idx);
    Ok(hessian_from_whitened(&vt, w, idx, kappa))
}
