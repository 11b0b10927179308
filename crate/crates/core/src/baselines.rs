//! Reference selectors: determinant-based greedy and uniform random.
//!
//! The greedy selector is a reference implementation of the common
//! two-regime determinant greedy. While `k <= r` sensors are chosen it
//! maximizes `det(U_S U_Sᵀ)`; afterwards it maximizes `det(U_Sᵀ U_S)`.
//! Both criteria are tracked with rank-one updates so a step costs `O(n r)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::Cholesky;
use crate::model::{CandidateBasis, SelectionVector};

/// Residual norms at or below this fraction of the largest row norm count as
/// a zero determinant.
const DEGENERATE_REL: f64 = 1e-12;

/// Picks `p` sensors greedily. Returns them in the order they were chosen.
pub fn greedy_sequence(u: &CandidateBasis, p: usize) -> Result<Vec<usize>> {
    let (n, r) = (u.n(), u.r());
    if p == 0 || p > n {
        return Err(Error::InvalidArgument(format!("greedy needs 1 <= p <= n, got p={p}, n={n}")));
    }
    let m = u.matrix();
    let mut chosen = vec![false; n];
    let mut order = Vec::with_capacity(p);

    let argmax = |score: &dyn Fn(usize) -> f64, chosen: &[bool]| -> usize {
        let mut best: Option<(usize, f64)> = None;
        for i in (0..n).filter(|&i| !chosen[i]) {
            let s = score(i);
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((i, s));
            }
        }
        best.expect("an unselected candidate remains").0
    };

    // Gram regime: the determinant grows by the squared distance of u_i from
    // the span of the chosen rows.
    let mut resid: Vec<f64> = m.row_iter().map(|row| row.norm_squared()).collect();
    let tol = DEGENERATE_REL * resid.iter().copied().fold(0.0, f64::max);
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut degenerate = false;
    for _ in 0..p.min(r) {
        let j = argmax(
            &|i| if !degenerate && resid[i] > tol { resid[i] } else { 0.0 },
            &chosen,
        );
        chosen[j] = true;
        order.push(j);
        if degenerate || resid[j] <= tol {
            degenerate = true;
            continue;
        }
        let mut q = m.row(j).transpose();
        for _ in 0..2 {
            for b in &basis {
                let c = q.dot(b);
                q.axpy(-c, b, 1.0);
            }
        }
        let norm = q.norm();
        q /= norm;
        let proj = m * &q;
        for (ri, pi) in resid.iter_mut().zip(proj.iter()) {
            *ri -= pi * pi;
        }
        basis.push(q);
    }
    if order.len() == p {
        return Ok(order);
    }

    // Information regime: det(M + u_iᵀu_i) = det(M) (1 + u_i M⁻¹ u_iᵀ).
    let sel = u.rows_at(&order);
    let chol = match Cholesky::new(sel.tr_mul(&sel)) {
        Ok(c) => c,
        Err(_) => {
            // Rank-deficient basis: every candidate scores zero.
            order.extend((0..n).filter(|&i| !chosen[i]).take(p - order.len()));
            return Ok(order);
        }
    };
    let mut minv = {
        let mut eye = DMatrix::identity(r, r);
        for mut col in eye.column_iter_mut() {
            let x = chol.solve(&col.clone_owned());
            col.copy_from(&x);
        }
        eye
    };
    let mut lev: Vec<f64> = {
        let mut vt = m.transpose();
        chol.solve_lower_mut(&mut vt);
        vt.column_iter().map(|c| c.norm_squared()).collect()
    };
    while order.len() < p {
        let j = argmax(&|i| lev[i], &chosen);
        chosen[j] = true;
        order.push(j);
        let z = &minv * m.row(j).transpose();
        let denom = 1.0 + lev[j];
        let c = m * &z;
        for (li, ci) in lev.iter_mut().zip(c.iter()) {
            *li -= ci * ci / denom;
        }
        minv -= &z * z.transpose() / denom;
    }
    Ok(order)
}

pub fn greedy_select(u: &CandidateBasis, p: usize) -> Result<SelectionVector> {
    SelectionVector::new(greedy_sequence(u, p)?, u.n())
}

/// A uniform random `p`-subset of `0..n`.
pub fn random_select<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> Result<SelectionVector> {
    if p > n {
        return Err(Error::InvalidArgument(format!("cannot select p={p} of n={n}")));
    }
    let mut pool: Vec<usize> = (0..n).collect();
    for a in 0..p {
        let b = rng.random_range(a..n);
        pool.swap(a, b);
    }
    pool.truncate(p);
    SelectionVector::new(pool, n)
}
