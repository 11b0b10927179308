use std::cmp::Ordering;

use rand::Rng;

use crate::error::{Error, Result};

/// The candidate indices a subspace step is allowed to move. Equivalent to
/// a column-selection sketch matrix with one unit entry per column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SketchIndexSet {
    indices: Vec<usize>,
    elite: usize,
    clamped: bool,
}

impl SketchIndexSet {
    /// Validates distinctness and range.
    pub fn new(indices: Vec<usize>, n: usize) -> Result<Self> {
        let mut seen = vec![false; n];
        for &i in &indices {
            if i >= n {
                return Err(Error::InvalidSketch(format!("index {i} out of range for n={n}")));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidSketch(format!("duplicate index {i}")));
            }
        }
        if indices.is_empty() {
            return Err(Error::InvalidSketch("empty index set".into()));
        }
        Ok(Self {
            indices,
            elite: 0,
            clamped: false,
        })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn s(&self) -> usize {
        self.indices.len()
    }

    /// Length of the elite prefix (zero for uniform sketches).
    pub fn elite_len(&self) -> usize {
        self.elite
    }

    /// Set when the requested size exceeded `n` and was reduced to `n`.
    pub fn clamped(&self) -> bool {
        self.clamped
    }

    /// Indices in ascending order.
    pub fn sorted(&self) -> Vec<usize> {
        let mut v = self.indices.clone();
        v.sort_unstable();
        v
    }
}

fn clamp_size(n: usize, s: usize) -> Result<(usize, bool)> {
    if n == 0 || s == 0 {
        return Err(Error::InvalidSketch(format!("sketch needs 1 <= s and n >= 1, got s={s}, n={n}")));
    }
    if s > n {
        log::warn!("sketch size {s} exceeds n={n}; clamping to n");
        Ok((n, true))
    } else {
        Ok((s, false))
    }
}

/// Moves a uniform random `k`-subset of `pool` to its front (partial
/// Fisher-Yates) and truncates to it.
fn draw_prefix<R: Rng + ?Sized>(mut pool: Vec<usize>, k: usize, rng: &mut R) -> Vec<usize> {
    let len = pool.len();
    for a in 0..k {
        let b = rng.random_range(a..len);
        pool.swap(a, b);
    }
    pool.truncate(k);
    pool
}

/// Descending weight, ties toward the lower index.
pub(crate) fn by_weight_desc(w: &[f64]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| w[b].total_cmp(&w[a]).then(a.cmp(&b))
}

/// The `k` largest-weight indices, largest first.
pub(crate) fn top_indices(w: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..w.len()).collect();
    if k == 0 {
        return Vec::new();
    }
    let cmp = by_weight_desc(w);
    if k < order.len() {
        order.select_nth_unstable_by(k - 1, &cmp);
        order.truncate(k);
    }
    order.sort_unstable_by(&cmp);
    order
}

/// `s` indices drawn uniformly without replacement: the first `s` entries
/// of a random permutation of `0..n`.
pub fn sketch_uniform<R: Rng + ?Sized>(n: usize, s: usize, rng: &mut R) -> Result<SketchIndexSet> {
    let (s, clamped) = clamp_size(n, s)?;
    Ok(SketchIndexSet {
        indices: draw_prefix((0..n).collect(), s, rng),
        elite: 0,
        clamped,
    })
}

/// `round(ρ s)` (half up) largest-weight indices followed by `s - round(ρ s)`
/// uniform draws from the remaining candidates.
///
/// With `ρ = 0` this consumes the generator exactly like [`sketch_uniform`].
pub fn sketch_elite<R: Rng + ?Sized>(w: &[f64], s: usize, rho: f64, rng: &mut R) -> Result<SketchIndexSet> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidArgument(format!("rho must lie in [0, 1], got {rho}")));
    }
    let n = w.len();
    let (s, clamped) = clamp_size(n, s)?;
    let elite = ((rho * s as f64) + 0.5).floor() as usize;
    let elite = elite.min(s);

    let mut indices = top_indices(w, elite);
    let mut is_elite = vec![false; n];
    for &i in &indices {
        is_elite[i] = true;
    }
    let pool: Vec<usize> = (0..n).filter(|&i| !is_elite[i]).collect();
    indices.extend(draw_prefix(pool, s - elite, rng));
    Ok(SketchIndexSet {
        indices,
        elite,
        clamped,
    })
}
