//! Small dense linear-algebra helpers shared across the crate: rank-revealing
//! SVD splits, nullspace bases, and affine-system parameterizations.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative singular-value threshold for numerical rank decisions.
pub(crate) const RANK_REL_TOL: f64 = 1e-10;

/// Rank-revealing SVD of an observation-style matrix `C = P1 * diag(sigma) * V1^T`
/// with an orthonormal basis `V2` of `ker(C)` attached.
pub(crate) struct SvdSplit {
    pub rank: usize,
    /// Left singular vectors for the nonzero singular values, `p x r`.
    pub p1: DMatrix<f64>,
    /// Nonzero singular values, length `r`.
    pub sigma: Vec<f64>,
    /// Right singular vectors for the nonzero singular values, `n x r`.
    pub v1: DMatrix<f64>,
    /// Orthonormal basis of the nullspace, `n x (n - r)`.
    pub v2: DMatrix<f64>,
}

impl SvdSplit {
    /// The map `V1 * diag(1/sigma) * P1^T` taking observations back to the
    /// row space of `C`. Equals the Moore-Penrose pseudoinverse of `C`.
    pub fn reverse_map(&self) -> DMatrix<f64> {
        let r = self.rank;
        let n = self.v1.nrows();
        let p = self.p1.nrows();
        if r == 0 {
            return DMatrix::zeros(n, p);
        }
        let mut v1_scaled = self.v1.clone();
        for (j, s) in self.sigma.iter().enumerate() {
            let mut col = v1_scaled.column_mut(j);
            col /= *s;
        }
        v1_scaled * self.p1.transpose()
    }
}

/// Compute the split SVD of `c` with numerical rank determined by
/// `sigma_i > rel_tol * sigma_max`.
pub(crate) fn svd_split(c: &DMatrix<f64>, rel_tol: f64) -> Result<SvdSplit> {
    let (p, n) = c.shape();
    if p == 0 || n == 0 {
        return Err(Error::InvalidArgument("svd of an empty matrix".into()));
    }
    let svd = c.clone().svd(true, true);
    let u = svd
        .u
        .ok_or_else(|| Error::Numerical("svd did not produce U".into()))?;
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Numerical("svd did not produce V^T".into()))?;
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let thresh = rel_tol * sigma_max;

    // nalgebra returns singular values in descending order, but rank
    // selection below does not rely on it.
    let mut keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > thresh && svd.singular_values[i] > 0.0)
        .collect();
    keep.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap()
    });
    let rank = keep.len();

    let mut p1 = DMatrix::zeros(p, rank);
    let mut v1 = DMatrix::zeros(n, rank);
    let mut sigma = Vec::with_capacity(rank);
    for (j, &i) in keep.iter().enumerate() {
        p1.set_column(j, &u.column(i));
        v1.set_column(j, &v_t.row(i).transpose());
        sigma.push(svd.singular_values[i]);
    }
    let v2 = orthonormal_complement(&v1, n);
    Ok(SvdSplit {
        rank,
        p1,
        sigma,
        v1,
        v2,
    })
}

/// Orthonormal basis of the complement of `span(q1)` in `R^k`. `q1` must have
/// orthonormal columns (possibly zero of them).
pub(crate) fn orthonormal_complement(q1: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let r = q1.ncols();
    if r == 0 {
        return DMatrix::identity(k, k);
    }
    if r >= k {
        return DMatrix::zeros(k, 0);
    }
    // QR of [q1 | I]: the first r columns of Q reproduce span(q1), the rest
    // complete the basis.
    let mut m = DMatrix::zeros(k, r + k);
    m.view_mut((0, 0), (k, r)).copy_from(q1);
    m.view_mut((0, r), (k, k))
        .copy_from(&DMatrix::identity(k, k));
    let q = m.qr().q();
    q.columns(r, k - r).into_owned()
}

/// Parameterization of the solution set of `A x = b`.
///
/// `particular` is the least-squares / minimum-norm solution, `nullspace` an
/// orthonormal basis of `ker(A)`, and `residual` the infinity norm of
/// `A * particular - b` (zero iff the system is consistent).
pub(crate) struct AffineSolution {
    pub particular: DVector<f64>,
    pub nullspace: DMatrix<f64>,
    pub residual: f64,
}

pub(crate) fn solve_affine(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<AffineSolution> {
    let (m, k) = a.shape();
    if b.len() != m {
        return Err(Error::Dimension(format!(
            "affine system: matrix has {m} rows but rhs has {} entries",
            b.len()
        )));
    }
    if k == 0 {
        return Ok(AffineSolution {
            particular: DVector::zeros(0),
            nullspace: DMatrix::zeros(0, 0),
            residual: b.amax(),
        });
    }
    if m == 0 {
        return Ok(AffineSolution {
            particular: DVector::zeros(k),
            nullspace: DMatrix::identity(k, k),
            residual: 0.0,
        });
    }
    let split = svd_split(a, RANK_REL_TOL)?;
    let particular = split.reverse_map() * b;
    let residual = (a * &particular - b).amax();
    Ok(AffineSolution {
        particular,
        nullspace: split.v2,
        residual,
    })
}

/// Solve the symmetric positive-(semi)definite system `K X = B` with a
/// Cholesky factorization, retrying with a tiny Tikhonov jitter when the
/// factorization fails.
pub(crate) fn solve_spd(k: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    debug_assert_eq!(k.nrows(), k.ncols());
    if let Some(chol) = k.clone().cholesky() {
        return Ok(chol.solve(b));
    }
    let jitter = 1e-12 * (1.0 + k.diagonal().amax());
    let mut kj = k.clone();
    for i in 0..kj.nrows() {
        kj[(i, i)] += jitter;
    }
    if let Some(chol) = kj.clone().cholesky() {
        return Ok(chol.solve(b));
    }
    kj.lu()
        .solve(b)
        .ok_or_else(|| Error::Numerical("SPD solve failed even with jitter".into()))
}
