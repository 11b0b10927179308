use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::Cholesky;

const DAMPING_START: f64 = 1e-10;
const DAMPING_MAX: f64 = 1e-4;

/// Factors `h`, retrying with `h + τ (tr h / s) I` for
/// `τ = 1e-10, 1e-9, ..., 1e-4` if needed.
fn factor_damped(h: &DMatrix<f64>) -> Result<Cholesky> {
    if let Ok(chol) = Cholesky::new(h.clone()) {
        return Ok(chol);
    }
    let s = h.nrows();
    let scale = h.trace().abs() / s as f64;
    let mut tau = DAMPING_START;
    loop {
        let mut damped = h.clone();
        for i in 0..s {
            damped[(i, i)] += tau * scale;
        }
        if let Ok(chol) = Cholesky::new(damped) {
            log::debug!("subspace Hessian needed damping {tau:e}");
            return Ok(chol);
        }
        if tau >= DAMPING_MAX * 0.999 {
            return Err(Error::DampedSolveFailure { damping: tau });
        }
        tau *= 10.0;
    }
}

/// Newton direction for minimizing with `Hessian h` and gradient `g` under
/// the constraint `1ᵀ δ = 0`:
///
/// ```text
/// δ = -H⁻¹g + (1ᵀH⁻¹g / 1ᵀH⁻¹1) H⁻¹1
/// ```
///
/// The rounding residue of `1ᵀδ` is removed before returning.
pub fn constrained_newton_step(g: &DVector<f64>, h: &DMatrix<f64>) -> Result<DVector<f64>> {
    let s = g.len();
    if h.shape() != (s, s) || s == 0 {
        return Err(Error::InvalidDimension(format!(
            "gradient of length {s} with Hessian {:?}",
            h.shape()
        )));
    }
    let chol = factor_damped(h)?;
    let hg = chol.solve(g);
    let h1 = chol.solve(&DVector::from_element(s, 1.0));
    let nu = hg.sum() / h1.sum();
    let mut delta = h1 * nu - hg;
    let residue = delta.sum() / s as f64;
    delta.add_scalar_mut(-residue);
    Ok(delta)
}

/// Newton decrement `sqrt(max(0, -gᵀδ))` (minimization convention).
pub fn decrement(g: &DVector<f64>, delta: &DVector<f64>) -> f64 {
    (-g.dot(delta)).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_hessian_centers_gradient() {
        let g = DVector::from_vec(vec![1.0, 3.0]);
        let d = constrained_newton_step(&g, &DMatrix::identity(2, 2)).unwrap();
        assert!((d - DVector::from_vec(vec![1.0, -1.0])).amax() < 1e-15);
        let d = DVector::from_vec(vec![1.0, -1.0]);
        assert!((decrement(&g, &d) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(decrement(&g, &DVector::zeros(2)), 0.0);
    }

    #[test]
    fn constant_gradient_gives_null_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b = DMatrix::from_fn(6, 6, |_, _| rng.random_range(-1.0..1.0));
        let h = &b * b.transpose() + DMatrix::identity(6, 6);
        let d = constrained_newton_step(&DVector::from_element(6, 2.5), &h).unwrap();
        assert!(d.amax() < 1e-13);
    }

    #[test]
    fn singular_hessian_is_damped() {
        // rank one, PSD
        let v = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let h = &v * v.transpose();
        let d = constrained_newton_step(&DVector::from_vec(vec![1.0, 0.0, -1.0]), &h).unwrap();
        assert!(d.iter().all(|x| x.is_finite()));
        assert!(d.sum().abs() < 1e-9 * d.abs().sum());
    }

    #[test]
    fn indefinite_hessian_errors() {
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        assert!(matches!(
            constrained_newton_step(&DVector::from_vec(vec![1.0, 0.0]), &h),
            Err(Error::DampedSolveFailure { .. })
        ));
    }

    #[test]
    fn dimension_mismatch() {
        assert!(constrained_newton_step(&DVector::zeros(2), &DMatrix::identity(3, 3)).is_err());
    }
}
