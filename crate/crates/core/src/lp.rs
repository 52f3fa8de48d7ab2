//! Linear programs backing containment, feasibility, and hull queries.
//!
//! Every equality system `A beta = b` is first reduced to affine coordinates
//! `beta = beta0 + N z` (see [`crate::linalg::solve_affine`]), so the solver
//! only ever sees inequality constraints over free variables. That keeps the
//! problems small and sidesteps consistency issues with redundant equality
//! rows. The solver itself is an implementation detail; callers rely only on
//! feasibility/optimality to about 1e-9.

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Minimize `||beta0 + N z||_inf` over `z`. Returns the optimal norm and the
/// attaining `beta`. Always feasible and bounded below by zero.
pub(crate) fn min_inf_norm(
    beta0: &DVector<f64>,
    nullspace: &DMatrix<f64>,
) -> Result<(f64, DVector<f64>)> {
    let xi = beta0.len();
    let d = nullspace.ncols();
    if xi == 0 {
        return Ok((0.0, DVector::zeros(0)));
    }
    if d == 0 {
        return Ok((beta0.amax(), beta0.clone()));
    }
    debug_assert_eq!(nullspace.nrows(), xi);

    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let zs: Vec<_> = (0..d)
        .map(|_| problem.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY)))
        .collect();
    let t = problem.add_var(1.0, (0.0, f64::INFINITY));

    for i in 0..xi {
        // beta0_i + N_i z <= t  and  -(beta0_i + N_i z) <= t
        let mut pos = Vec::with_capacity(d + 1);
        let mut neg = Vec::with_capacity(d + 1);
        for j in 0..d {
            let a = nullspace[(i, j)];
            if a != 0.0 {
                pos.push((zs[j], a));
                neg.push((zs[j], -a));
            }
        }
        pos.push((t, -1.0));
        neg.push((t, -1.0));
        problem.add_constraint(pos.as_slice(), ComparisonOp::Le, -beta0[i]);
        problem.add_constraint(neg.as_slice(), ComparisonOp::Le, beta0[i]);
    }

    let sol = problem
        .solve()
        .map_err(|e| Error::Numerical(format!("inf-norm LP failed: {e:?}")))?;
    let z = DVector::from_iterator(d, zs.iter().map(|&v| sol[v]));
    let beta = beta0 + nullspace * z;
    Ok((sol.objective(), beta))
}

/// Optimize `q^T z` over `{ z : ||beta0 + N z||_inf <= 1 }`.
///
/// The caller is responsible for the region being nonempty; the basis
/// produced by the SVD is orthonormal, so the region is bounded and the LP
/// cannot be unbounded.
pub(crate) fn extremize(
    q: &DVector<f64>,
    beta0: &DVector<f64>,
    nullspace: &DMatrix<f64>,
    maximize: bool,
) -> Result<f64> {
    let xi = beta0.len();
    let d = nullspace.ncols();
    debug_assert_eq!(q.len(), d);
    if d == 0 {
        return Ok(0.0);
    }

    let direction = if maximize {
        OptimizationDirection::Maximize
    } else {
        OptimizationDirection::Minimize
    };
    let mut problem = Problem::new(direction);
    let zs: Vec<_> = (0..d)
        .map(|j| problem.add_var(q[j], (f64::NEG_INFINITY, f64::INFINITY)))
        .collect();

    for i in 0..xi {
        let mut row = Vec::with_capacity(d);
        for j in 0..d {
            let a = nullspace[(i, j)];
            if a != 0.0 {
                row.push((zs[j], a));
            }
        }
        if row.is_empty() {
            if beta0[i].abs() > 1.0 + 1e-9 {
                return Err(Error::EmptySet(
                    "box constraint violated on a fixed coordinate".into(),
                ));
            }
            continue;
        }
        problem.add_constraint(row.as_slice(), ComparisonOp::Le, 1.0 - beta0[i]);
        let neg: Vec<_> = row.iter().map(|&(v, a)| (v, -a)).collect();
        problem.add_constraint(neg.as_slice(), ComparisonOp::Le, 1.0 + beta0[i]);
    }

    let sol = problem.solve().map_err(|e| match e {
        microlp::Error::Infeasible => Error::EmptySet("extremize over empty region".into()),
        other => Error::Numerical(format!("extremize LP failed: {other:?}")),
    })?;
    Ok(sol.objective())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn min_inf_norm_unique_point() {
        let beta0 = DVector::from_row_slice(&[0.5, -0.25]);
        let n = DMatrix::zeros(2, 0);
        let (t, beta) = min_inf_norm(&beta0, &n).unwrap();
        assert_relative_eq!(t, 0.5);
        assert_eq!(beta, beta0);
    }

    #[test]
    fn min_inf_norm_uses_slack() {
        // beta = [2, 0] + z * [1, 0]: z = -2 gives beta = [0, 0]
        let beta0 = DVector::from_row_slice(&[2.0, 0.0]);
        let n = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let (t, beta) = min_inf_norm(&beta0, &n).unwrap();
        assert_relative_eq!(t, 0.0, epsilon = 1e-9);
        assert!(beta.amax() < 1e-9);
    }

    #[test]
    fn min_inf_norm_balances_coordinates() {
        // beta = [1, -1] + z * [1, 1] has min inf-norm 1 at z = 0.
        let beta0 = DVector::from_row_slice(&[1.0, -1.0]);
        let n = DMatrix::from_column_slice(2, 1, &[1.0, 1.0]);
        let (t, _) = min_inf_norm(&beta0, &n).unwrap();
        assert_relative_eq!(t, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn extremize_box() {
        // beta = z in 2d box: maximize z0 + z1 -> 2
        let beta0 = DVector::zeros(2);
        let n = DMatrix::identity(2, 2);
        let q = DVector::from_row_slice(&[1.0, 1.0]);
        let hi = extremize(&q, &beta0, &n, true).unwrap();
        let lo = extremize(&q, &beta0, &n, false).unwrap();
        assert_relative_eq!(hi, 2.0, epsilon = 1e-9);
        assert_relative_eq!(lo, -2.0, epsilon = 1e-9);
    }
}
