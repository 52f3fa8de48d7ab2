//! Zonotope algebra: construction, linear maps, Minkowski sums, Cartesian
//! products, Girard order reduction, containment, hulls, and sampling.
//!
//! A zonotope is `{ c + G beta : ||beta||_inf <= 1 }` with center `c` and one
//! generator per column of `G`. The representation is closed under linear
//! maps and Minkowski sums, which is what makes the estimation loop cheap.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::interval::IntervalVector;
use crate::linalg::solve_affine;
use crate::lp;

/// Default containment tolerance, relative to the zonotope radius. Long
/// Minkowski chains accumulate floating-point slack of roughly this size.
pub const CONTAINS_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct Zonotope {
    center: DVector<f64>,
    /// One generator per column; `n x xi`.
    generators: DMatrix<f64>,
}

impl Zonotope {
    pub fn new(center: DVector<f64>, generators: DMatrix<f64>) -> Result<Self> {
        if generators.nrows() != center.len() {
            return Err(Error::Dimension(format!(
                "zonotope: center has {} entries but generators have {} rows",
                center.len(),
                generators.nrows()
            )));
        }
        if center.iter().any(|x| !x.is_finite()) || generators.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(
                "zonotope entries must be finite".into(),
            ));
        }
        Ok(Self { center, generators })
    }

    /// A single point: zero generators.
    pub fn point(center: DVector<f64>) -> Self {
        let n = center.len();
        Self {
            center,
            generators: DMatrix::zeros(n, 0),
        }
    }

    /// Axis-aligned box `center +- half_widths`.
    pub fn from_box(center: DVector<f64>, half_widths: &DVector<f64>) -> Result<Self> {
        if center.len() != half_widths.len() {
            return Err(Error::Dimension(
                "box zonotope: center and half-width lengths differ".into(),
            ));
        }
        let n = center.len();
        let generators = DMatrix::from_diagonal(half_widths);
        Self::new(center, generators.view((0, 0), (n, n)).into_owned())
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn num_generators(&self) -> usize {
        self.generators.ncols()
    }

    /// Generator count over dimension.
    pub fn order(&self) -> f64 {
        self.generators.ncols() as f64 / self.dim() as f64
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn generators(&self) -> &DMatrix<f64> {
        &self.generators
    }

    /// Image `A * self = < A c, A G >`; exact for zonotopes.
    pub fn linear_map(&self, a: &DMatrix<f64>) -> Result<Zonotope> {
        if a.ncols() != self.dim() {
            return Err(Error::Dimension(format!(
                "linear map: matrix has {} columns, zonotope dim is {}",
                a.ncols(),
                self.dim()
            )));
        }
        Ok(Zonotope {
            center: a * &self.center,
            generators: a * &self.generators,
        })
    }

    /// Minkowski sum `< c1 + c2, [G1 G2] >`; exact.
    pub fn minkowski_sum(&self, other: &Zonotope) -> Result<Zonotope> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension(format!(
                "minkowski sum: dims {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        let mut generators = DMatrix::zeros(self.dim(), self.num_generators() + other.num_generators());
        generators
            .view_mut((0, 0), (self.dim(), self.num_generators()))
            .copy_from(&self.generators);
        generators
            .view_mut((0, self.num_generators()), (self.dim(), other.num_generators()))
            .copy_from(&other.generators);
        Ok(Zonotope {
            center: &self.center + &other.center,
            generators,
        })
    }

    /// Cartesian product: stacked centers, block-diagonal generators.
    pub fn cartesian_product(&self, other: &Zonotope) -> Zonotope {
        let (n, m) = (self.dim(), other.dim());
        let (x1, x2) = (self.num_generators(), other.num_generators());
        let mut center = DVector::zeros(n + m);
        center.rows_mut(0, n).copy_from(&self.center);
        center.rows_mut(n, m).copy_from(&other.center);
        let mut generators = DMatrix::zeros(n + m, x1 + x2);
        generators.view_mut((0, 0), (n, x1)).copy_from(&self.generators);
        generators.view_mut((n, x1), (m, x2)).copy_from(&other.generators);
        Zonotope { center, generators }
    }

    /// Girard order reduction to at most `ceil(target_order * dim)`
    /// generators. Generators are ranked by `||g||_1 - ||g||_inf`
    /// (descending, ties broken by column index); the low-ranked remainder is
    /// replaced by its axis-aligned bounding box. The result is a superset.
    pub fn reduce_order(&self, target_order: f64) -> Result<Zonotope> {
        if !(target_order >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "reduction order must be >= 1, got {target_order}"
            )));
        }
        let budget = (target_order * self.dim() as f64).ceil() as usize;
        Ok(self.reduce_to_count(budget))
    }

    /// Girard reduction to an explicit generator budget (`budget >= dim`).
    pub(crate) fn reduce_to_count(&self, budget: usize) -> Zonotope {
        let n = self.dim();
        if self.num_generators() <= budget {
            return self.clone();
        }

        let nonzero: Vec<usize> = (0..self.num_generators())
            .filter(|&j| self.generators.column(j).amax() > 0.0)
            .collect();
        if nonzero.len() <= budget {
            let mut generators = DMatrix::zeros(n, nonzero.len());
            for (k, &j) in nonzero.iter().enumerate() {
                generators.set_column(k, &self.generators.column(j));
            }
            return Zonotope {
                center: self.center.clone(),
                generators,
            };
        }

        let mut ranked: Vec<(usize, f64)> = nonzero
            .iter()
            .map(|&j| {
                let col = self.generators.column(j);
                let l1: f64 = col.iter().map(|x| x.abs()).sum();
                let linf = col.amax();
                (j, l1 - linf)
            })
            .collect();
        ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));

        let keep_count = budget.saturating_sub(n);
        let mut box_widths = DVector::zeros(n);
        for &(j, _) in ranked.iter().skip(keep_count) {
            for i in 0..n {
                box_widths[i] += self.generators[(i, j)].abs();
            }
        }
        let box_cols: Vec<usize> = (0..n).filter(|&i| box_widths[i] > 0.0).collect();

        let mut generators = DMatrix::zeros(n, keep_count + box_cols.len());
        for (k, &(j, _)) in ranked.iter().take(keep_count).enumerate() {
            generators.set_column(k, &self.generators.column(j));
        }
        for (k, &i) in box_cols.iter().enumerate() {
            generators[(i, keep_count + k)] = box_widths[i];
        }
        Zonotope {
            center: self.center.clone(),
            generators,
        }
    }

    /// Upper bound on the radius of the smallest sphere around the center
    /// containing the set: the sum of generator 2-norms.
    pub fn radius(&self) -> f64 {
        (0..self.num_generators())
            .map(|j| self.generators.column(j).norm())
            .sum()
    }

    /// Sum of absolute generator entries per dimension; the hull half-width.
    pub fn abs_generator_row_sums(&self) -> DVector<f64> {
        let mut sums = DVector::zeros(self.dim());
        for j in 0..self.num_generators() {
            for i in 0..self.dim() {
                sums[i] += self.generators[(i, j)].abs();
            }
        }
        sums
    }

    /// Tight axis-aligned bounding box.
    pub fn interval_hull(&self) -> IntervalVector {
        let half = self.abs_generator_row_sums();
        IntervalVector::new(&self.center - &half, &self.center + &half)
            .expect("hull bounds are ordered by construction")
    }

    /// Decide `x in self` up to `tol`: is there `beta` with
    /// `||beta||_inf <= 1 + tol` and `G beta = x - c` (residual within
    /// `tol`, scaled by the set radius)? Solved as a min-inf-norm LP over the
    /// affine solution set; when `G` has full column rank this degenerates to
    /// a least-squares check.
    pub fn contains_point(&self, x: &DVector<f64>, tol: f64) -> Result<bool> {
        if x.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "contains_point: point dim {} vs zonotope dim {}",
                x.len(),
                self.dim()
            )));
        }
        let diff = x - &self.center;
        let eq_tol = tol * self.radius().max(1.0) + 1e-12;
        if self.num_generators() == 0 {
            return Ok(diff.amax() <= eq_tol);
        }
        let sol = solve_affine(&self.generators, &diff)?;
        if sol.residual > eq_tol {
            return Ok(false);
        }
        if sol.nullspace.ncols() == 0 {
            return Ok(sol.particular.amax() <= 1.0 + tol);
        }
        let (t, _) = lp::min_inf_norm(&sol.particular, &sol.nullspace)?;
        Ok(t <= 1.0 + tol)
    }

    /// Draw `c + G beta` with `beta` uniform on `[-1,1]^xi`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let beta = sample_beta(rng, self.num_generators());
        &self.center + &self.generators * beta
    }

    /// Sound over-approximation of `self ∩ other`: `other` is treated as a
    /// virtual measurement with identity observation matrix and folded in
    /// with the optimal-gain update, so the result stays a zonotope in
    /// closed form. May be loose; emptiness of the true intersection is not
    /// detected.
    pub fn intersect_over_approx(&self, other: &Zonotope) -> Result<Zonotope> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension(format!(
                "intersect: dims {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        let n = self.dim();
        let g1 = &self.generators;
        let g2 = &other.generators;
        let gg = g1 * g1.transpose();
        let k = &gg + g2 * g2.transpose();
        // lambda* = G1 G1^T (G1 G1^T + G2 G2^T)^-1, via the symmetric solve
        // K lambda^T = G1 G1^T.
        let lambda = crate::linalg::solve_spd(&k, &gg)?.transpose();

        let center = &self.center + &lambda * (&other.center - &self.center);
        let mut generators = DMatrix::zeros(n, g1.ncols() + g2.ncols());
        generators
            .view_mut((0, 0), (n, g1.ncols()))
            .copy_from(&((DMatrix::identity(n, n) - &lambda) * g1));
        generators
            .view_mut((0, g1.ncols()), (n, g2.ncols()))
            .copy_from(&(-&lambda * g2));
        Ok(Zonotope { center, generators })
    }
}

/// Uniform `[-1,1]^xi` draw.
pub(crate) fn sample_beta<R: Rng + ?Sized>(rng: &mut R, xi: usize) -> DVector<f64> {
    DVector::from_fn(xi, |_, _| rng.gen_range(-1.0..=1.0))
}
