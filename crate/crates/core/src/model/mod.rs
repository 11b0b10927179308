//! Problem data: candidate bases, snapshot matrices, selections, and the
//! generators that produce them.

mod io;

pub use io::{format_matrix, parse_matrix, read_matrix, write_matrix};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng;

fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

/// The `n x r` sensor candidate matrix. Row `i` is the observation vector
/// of candidate sensor `i`.
///
/// Full column rank is not checked here; a deficient basis surfaces as a
/// Cholesky failure of the Fisher matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateBasis {
    u: DMatrix<f64>,
}

impl CandidateBasis {
    pub fn new(u: DMatrix<f64>) -> Result<Self> {
        let (n, r) = u.shape();
        if r == 0 || n < r {
            return Err(Error::InvalidDimension(format!(
                "candidate basis must satisfy n >= r >= 1, got n={n}, r={r}"
            )));
        }
        check_finite(&u)?;
        Ok(Self { u })
    }

    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    pub fn r(&self) -> usize {
        self.u.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.u
    }

    /// Rows at `idx`, stacked in order, as an `|idx| x r` matrix.
    pub fn rows_at(&self, idx: &[usize]) -> DMatrix<f64> {
        self.u.select_rows(idx)
    }
}

/// Snapshot data, `n` spatial points by `m` snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrix {
    x: DMatrix<f64>,
}

impl SnapshotMatrix {
    pub fn new(x: DMatrix<f64>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::InvalidDimension(format!(
                "snapshot matrix must be non-empty, got {}x{}",
                x.nrows(),
                x.ncols()
            )));
        }
        check_finite(&x)?;
        Ok(Self { x })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn m(&self) -> usize {
        self.x.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    /// Subtracts the temporal mean from every spatial point.
    pub fn centered(&self) -> Self {
        let mean = self.x.column_mean();
        let mut x = self.x.clone();
        for mut col in x.column_iter_mut() {
            col -= &mean;
        }
        Self { x }
    }
}

/// `p` distinct candidate indices, stored in ascending order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionVector {
    indices: Vec<usize>,
}

impl SelectionVector {
    pub fn new(mut indices: Vec<usize>, n: usize) -> Result<Self> {
        indices.sort_unstable();
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::InvalidArgument(format!(
                "selection index {bad} out of range for n={n}"
            )));
        }
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("selection has duplicate indices".into()));
        }
        Ok(Self { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn p(&self) -> usize {
        self.indices.len()
    }

    /// The binary vector `w̃` of length `n`.
    pub fn to_binary(&self, n: usize) -> DVector<f64> {
        let mut w = DVector::zeros(n);
        for &i in &self.indices {
            w[i] = 1.0;
        }
        w
    }
}

/// An `n x r` matrix of i.i.d. N(0, 1) draws, filled row by row from the
/// `"gaussian-basis"` stream of `seed`.
pub fn gen_gaussian_problem(n: usize, r: usize, seed: u64) -> Result<CandidateBasis> {
    if r == 0 || n < r {
        return Err(Error::InvalidDimension(format!(
            "gaussian problem needs n >= r >= 1, got n={n}, r={r}"
        )));
    }
    let mut rng = rng::stream(seed, "gaussian-basis", &[]);
    let mut u = DMatrix::zeros(n, r);
    for i in 0..n {
        for j in 0..r {
            u[(i, j)] = rng.sample(StandardNormal);
        }
    }
    CandidateBasis::new(u)
}

fn random_orthonormal(rows: usize, cols: usize, rng: &mut rng::StreamRng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q().columns(0, cols).clone_owned()
}

/// Exactly rank-`k` synthetic snapshots `Q diag(sigmas) Vᵀ` with random
/// orthonormal `Q` (`n x k`) and `V` (`m x k`), `k = sigmas.len()`.
pub fn gen_lowrank_snapshots(n: usize, m: usize, sigmas: &[f64], seed: u64) -> Result<SnapshotMatrix> {
    let k = sigmas.len();
    if k == 0 || k > n.min(m) {
        return Err(Error::InvalidRank {
            requested: k,
            max: n.min(m),
        });
    }
    let mut rng = rng::stream(seed, "lowrank-snapshots", &[]);
    let q = random_orthonormal(n, k, &mut rng);
    let v = random_orthonormal(m, k, &mut rng);
    let s = DMatrix::from_diagonal(&DVector::from_column_slice(sigmas));
    SnapshotMatrix::new(q * s * v.transpose())
}

/// The `r` leading left singular vectors of the snapshots.
///
/// Each column is normalized so that its largest-magnitude entry is positive
/// (on exact ties, the first such entry).
pub fn pod_basis(x: &SnapshotMatrix, r: usize) -> Result<CandidateBasis> {
    let max = x.n().min(x.m());
    if r == 0 || r > max {
        return Err(Error::InvalidRank { requested: r, max });
    }
    let svd = x.matrix().clone().svd(true, false);
    let left = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .total_cmp(&svd.singular_values[a])
            .then(a.cmp(&b))
    });

    let mut basis = DMatrix::zeros(x.n(), r);
    for (dst, &src) in order.iter().take(r).enumerate() {
        let mut col = left.column(src).clone_owned();
        let mut pivot = 0;
        for i in 1..col.len() {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
        basis.set_column(dst, &col);
    }
    CandidateBasis::new(basis)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_shape_and_determinism() {
        let a = gen_gaussian_problem(10_000, 10, 1).unwrap();
        assert_eq!((a.n(), a.r()), (10_000, 10));
        let b = gen_gaussian_problem(10_000, 10, 1).unwrap();
        assert!(a.matrix().iter().zip(b.matrix().iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        let c = gen_gaussian_problem(10_000, 10, 2).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn gaussian_rejects_n_below_r() {
        assert!(matches!(gen_gaussian_problem(3, 4, 0), Err(Error::InvalidDimension(_))));
        assert!(matches!(gen_gaussian_problem(3, 0, 0), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn gaussian_moments() {
        // 100k entries: mean within 3/sqrt(N), variance within 3*sqrt(2/N).
        let u = gen_gaussian_problem(10_000, 10, 42).unwrap();
        let total = 100_000.0_f64;
        let mean = u.matrix().sum() / total;
        let var = u.matrix().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (total - 1.0);
        assert!(mean.abs() <= 3.0 / total.sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() <= 3.0 * (2.0 / total).sqrt(), "var {var}");
    }

    #[test]
    fn pod_of_diagonal() {
        let x = SnapshotMatrix::new(DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0, 1.0]))).unwrap();
        let u = pod_basis(&x, 2).unwrap();
        let expected = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert!((u.matrix() - expected).amax() < 1e-14);
    }

    #[test]
    fn pod_full_rank_is_orthonormal() {
        let x = gen_gaussian_problem(15, 6, 9).unwrap().into_matrix();
        for x in [x.clone(), x.transpose()] {
            let snaps = SnapshotMatrix::new(x).unwrap();
            let r = snaps.n().min(snaps.m());
            let u = pod_basis(&snaps, r).unwrap();
            let gram = u.matrix().transpose() * u.matrix();
            assert!((gram - DMatrix::identity(r, r)).amax() < 1e-12);
        }
    }

    #[test]
    fn pod_sign_convention() {
        let x = gen_gaussian_problem(30, 5, 4).unwrap().into_matrix();
        let u = pod_basis(&SnapshotMatrix::new(x).unwrap(), 5).unwrap();
        for col in u.matrix().column_iter() {
            let imax = col.iamax();
            assert!(col[imax] > 0.0);
        }
    }

    #[test]
    fn pod_rank_errors() {
        let x = SnapshotMatrix::new(DMatrix::zeros(4, 2)).unwrap();
        assert!(matches!(pod_basis(&x, 3), Err(Error::InvalidRank { requested: 3, max: 2 })));
        assert!(pod_basis(&x, 0).is_err());
    }

    #[test]
    fn selection_validation() {
        let s = SelectionVector::new(vec![3, 0, 2], 4).unwrap();
        assert_eq!(s.indices(), &[0, 2, 3]);
        assert_eq!(s.to_binary(4).sum(), 3.0);
        assert!(SelectionVector::new(vec![1, 1], 4).is_err());
        assert!(SelectionVector::new(vec![4], 4).is_err());
    }

    #[test]
    fn centering_removes_row_means() {
        let x = SnapshotMatrix::new(DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 5.0, 5.0, 8.0])).unwrap();
        let c = x.centered();
        assert!(c.matrix().row(0).sum().abs() < 1e-14);
        assert!(c.matrix().row(1).sum().abs() < 1e-14);
    }

    #[test]
    fn lowrank_snapshots_have_given_spectrum() {
        let x = gen_lowrank_snapshots(40, 12, &[10.0, 8.0, 6.0], 3).unwrap();
        let sv = x.matrix().singular_values();
        let mut sv: Vec<f64> = sv.iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        assert!((sv[0] - 10.0).abs() < 1e-10);
        assert!((sv[2] - 6.0).abs() < 1e-10);
        assert!(sv[3] < 1e-10);
    }
}
