//! Interval vectors and interval matrices.
//!
//! Interval matrices carry elementwise `[lower, upper]` bounds and are the
//! enclosure representation for uncertain matrices: stacked noisy data,
//! learned model sets, and the rigorous pseudoinverse needed by the offline
//! phase.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, RANK_REL_TOL};

/// Axis-aligned box `[lower, upper]` in `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalVector {
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl IntervalVector {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Dimension(format!(
                "interval vector: lower has {} entries, upper {}",
                lower.len(),
                upper.len()
            )));
        }
        for i in 0..lower.len() {
            if !lower[i].is_finite() || !upper[i].is_finite() {
                return Err(Error::InvalidArgument(
                    "interval vector entries must be finite".into(),
                ));
            }
            if lower[i] > upper[i] {
                return Err(Error::InvalidArgument(format!(
                    "interval vector: lower {} > upper {} at index {i}",
                    lower[i], upper[i]
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn point(v: DVector<f64>) -> Self {
        Self {
            lower: v.clone(),
            upper: v,
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    pub fn center(&self) -> DVector<f64> {
        (&self.lower + &self.upper) * 0.5
    }

    /// Per-dimension widths `upper - lower`.
    pub fn widths(&self) -> DVector<f64> {
        &self.upper - &self.lower
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        x.len() == self.dim()
            && (0..x.len()).all(|i| x[i] >= self.lower[i] - tol && x[i] <= self.upper[i] + tol)
    }

    /// True when `self` contains `other` elementwise with slack `tol`.
    pub fn encloses(&self, other: &IntervalVector, tol: f64) -> bool {
        self.dim() == other.dim()
            && (0..self.dim()).all(|i| {
                self.lower[i] <= other.lower[i] + tol && self.upper[i] >= other.upper[i] - tol
            })
    }

    /// Elementwise intersection; `None` when empty in some dimension.
    pub fn intersect(&self, other: &IntervalVector) -> Option<IntervalVector> {
        if self.dim() != other.dim() {
            return None;
        }
        let lower = self.lower.zip_map(&other.lower, f64::max);
        let upper = self.upper.zip_map(&other.upper, f64::min);
        if (0..lower.len()).any(|i| lower[i] > upper[i]) {
            None
        } else {
            Some(IntervalVector { lower, upper })
        }
    }
}

/// Elementwise box of matrices `[lower, upper]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalMatrix {
    lower: DMatrix<f64>,
    upper: DMatrix<f64>,
}

impl IntervalMatrix {
    pub fn new(lower: DMatrix<f64>, upper: DMatrix<f64>) -> Result<Self> {
        if lower.shape() != upper.shape() {
            return Err(Error::Dimension(format!(
                "interval matrix: lower is {:?}, upper is {:?}",
                lower.shape(),
                upper.shape()
            )));
        }
        for i in 0..lower.nrows() {
            for j in 0..lower.ncols() {
                if !lower[(i, j)].is_finite() || !upper[(i, j)].is_finite() {
                    return Err(Error::InvalidArgument(
                        "interval matrix entries must be finite".into(),
                    ));
                }
                if lower[(i, j)] > upper[(i, j)] {
                    return Err(Error::InvalidArgument(format!(
                        "interval matrix: lower > upper at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self { lower, upper })
    }

    /// Degenerate interval `[m, m]`.
    pub fn degenerate(m: DMatrix<f64>) -> Self {
        Self {
            lower: m.clone(),
            upper: m,
        }
    }

    pub fn from_center_radius(center: DMatrix<f64>, radius: DMatrix<f64>) -> Result<Self> {
        if center.shape() != radius.shape() {
            return Err(Error::Dimension(
                "interval matrix: center and radius shapes differ".into(),
            ));
        }
        let lower = &center - &radius;
        let upper = center + radius;
        Self::new(lower, upper)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.lower.shape()
    }

    pub fn lower(&self) -> &DMatrix<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DMatrix<f64> {
        &self.upper
    }

    pub fn center(&self) -> DMatrix<f64> {
        (&self.lower + &self.upper) * 0.5
    }

    pub fn radius(&self) -> DMatrix<f64> {
        (&self.upper - &self.lower) * 0.5
    }

    pub fn transpose(&self) -> IntervalMatrix {
        IntervalMatrix {
            lower: self.lower.transpose(),
            upper: self.upper.transpose(),
        }
    }

    pub fn contains(&self, m: &DMatrix<f64>, tol: f64) -> bool {
        if m.shape() != self.shape() {
            return false;
        }
        (0..m.nrows()).all(|i| {
            (0..m.ncols()).all(|j| {
                m[(i, j)] >= self.lower[(i, j)] - tol && m[(i, j)] <= self.upper[(i, j)] + tol
            })
        })
    }

    /// Conservative interval product: contains `A * B` for every member `A`
    /// of `self` and `B` of `rhs`. Per scalar product the exact min/max over
    /// the four endpoint products is accumulated.
    pub fn mul_interval(&self, rhs: &IntervalMatrix) -> Result<IntervalMatrix> {
        let (n, k) = self.shape();
        let (k2, m) = rhs.shape();
        if k != k2 {
            return Err(Error::Dimension(format!(
                "interval product: {n}x{k} times {k2}x{m}"
            )));
        }
        let mut lower = DMatrix::zeros(n, m);
        let mut upper = DMatrix::zeros(n, m);
        for i in 0..n {
            for j in 0..m {
                let mut lo = 0.0;
                let mut hi = 0.0;
                for l in 0..k {
                    let al = self.lower[(i, l)];
                    let au = self.upper[(i, l)];
                    let bl = rhs.lower[(l, j)];
                    let bu = rhs.upper[(l, j)];
                    let p1 = al * bl;
                    let p2 = al * bu;
                    let p3 = au * bl;
                    let p4 = au * bu;
                    lo += p1.min(p2).min(p3).min(p4);
                    hi += p1.max(p2).max(p3).max(p4);
                }
                lower[(i, j)] = lo;
                upper[(i, j)] = hi;
            }
        }
        Ok(IntervalMatrix { lower, upper })
    }

    /// Rigorous enclosure of the inverse of every member of a square
    /// interval matrix, via the Neumann-series bound
    /// `|A^-1 - M^-1| <= (I - B)^-1 B |M^-1|` with `B = |M^-1| R`.
    fn inverse_enclosure(&self) -> Result<IntervalMatrix> {
        let (r, c) = self.shape();
        debug_assert_eq!(r, c);
        let center = self.center();
        let rad = self.radius();
        let center_inv = center.clone().try_inverse().ok_or_else(|| {
            Error::RankDeficient("interval inverse: center matrix is singular".into())
        })?;
        let abs_inv = center_inv.abs();
        let b = &abs_inv * &rad;
        let contraction = inf_norm(&b);
        if contraction >= 1.0 {
            return Err(Error::Inflation(format!(
                "interval too wide for a rigorous inverse (||.||_inf = {contraction:.3e} >= 1); \
                 the data interval does not pin down an invertible matrix"
            )));
        }
        let neumann = (DMatrix::identity(r, r) - &b).try_inverse().ok_or_else(|| {
            Error::Inflation("Neumann factor (I - B) not invertible despite norm check".into())
        })?;
        let mut radius_out = (&neumann - DMatrix::identity(r, r)) * abs_inv;
        radius_out.apply(|x| *x = x.max(0.0));
        IntervalMatrix::from_center_radius(center_inv, radius_out)
    }

    /// Enclosure of the Moore-Penrose pseudoinverse of every member matrix.
    ///
    /// Factors through the Gram matrix: for a full-row-rank interval,
    /// `A^+ = A^T (A A^T)^-1`, with the square inverse enclosed by the
    /// Neumann bound; full-column-rank intervals use the mirrored factoring.
    /// The center must have full numerical rank, and the interval must be
    /// narrow enough for the Neumann condition to hold — otherwise the data
    /// is insufficiently exciting and an error is returned.
    pub fn pinv_enclosure(&self) -> Result<IntervalMatrix> {
        let (r, c) = self.shape();
        let center = self.center();
        let split = linalg::svd_split(&center, RANK_REL_TOL)?;
        if split.rank < r.min(c) {
            return Err(Error::RankDeficient(format!(
                "interval pseudoinverse: center has rank {} < min({r},{c})",
                split.rank
            )));
        }
        if r <= c {
            let gram = self.mul_interval(&self.transpose())?;
            let inv = gram.inverse_enclosure()?;
            self.transpose().mul_interval(&inv)
        } else {
            let gram = self.transpose().mul_interval(self)?;
            let inv = gram.inverse_enclosure()?;
            inv.mul_interval(&self.transpose())
        }
    }
}

/// Max absolute row sum.
fn inf_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.nrows())
        .map(|i| m.row(i).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}
