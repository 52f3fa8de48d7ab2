//! Constrained zonotopes: zonotopes whose coefficient vector additionally
//! satisfies linear equalities `A beta = b`. They can represent arbitrary
//! convex polytopes and, unlike plain zonotopes, are closed under
//! intersection — the measurement update becomes exact.
//!
//! Emptiness, containment, and hulls are decided by small LPs posed in the
//! affine coordinates of the constraint solution set.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::interval::IntervalVector;
use crate::linalg::solve_affine;
use crate::lp;
use crate::zonotope::Zonotope;

#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedZonotope {
    center: DVector<f64>,
    /// `n x n_g`.
    generators: DMatrix<f64>,
    /// `n_c x n_g`.
    con_a: DMatrix<f64>,
    /// `n_c`.
    con_b: DVector<f64>,
}

impl ConstrainedZonotope {
    pub fn new(
        center: DVector<f64>,
        generators: DMatrix<f64>,
        con_a: DMatrix<f64>,
        con_b: DVector<f64>,
    ) -> Result<Self> {
        if generators.nrows() != center.len() {
            return Err(Error::Dimension(format!(
                "constrained zonotope: center has {} entries, generators {} rows",
                center.len(),
                generators.nrows()
            )));
        }
        if con_a.ncols() != generators.ncols() {
            return Err(Error::Dimension(format!(
                "constrained zonotope: constraints have {} columns, generators {}",
                con_a.ncols(),
                generators.ncols()
            )));
        }
        if con_a.nrows() != con_b.len() {
            return Err(Error::Dimension(format!(
                "constrained zonotope: {} constraint rows vs {} right-hand sides",
                con_a.nrows(),
                con_b.len()
            )));
        }
        let finite = center.iter().all(|x| x.is_finite())
            && generators.iter().all(|x| x.is_finite())
            && con_a.iter().all(|x| x.is_finite())
            && con_b.iter().all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidArgument(
                "constrained zonotope entries must be finite".into(),
            ));
        }
        Ok(Self {
            center,
            generators,
            con_a,
            con_b,
        })
    }

    /// Lift a plain zonotope: same center and generators, no constraints.
    pub fn from_zonotope(z: &Zonotope) -> Self {
        Self {
            center: z.center().clone(),
            generators: z.generators().clone(),
            con_a: DMatrix::zeros(0, z.num_generators()),
            con_b: DVector::zeros(0),
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn num_generators(&self) -> usize {
        self.generators.ncols()
    }

    pub fn num_constraints(&self) -> usize {
        self.con_a.nrows()
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn generators(&self) -> &DMatrix<f64> {
        &self.generators
    }

    pub fn constraint_matrix(&self) -> &DMatrix<f64> {
        &self.con_a
    }

    pub fn constraint_rhs(&self) -> &DVector<f64> {
        &self.con_b
    }

    /// The plain zonotope obtained by forgetting the constraints; always a
    /// superset.
    pub fn relaxation(&self) -> Zonotope {
        Zonotope::new(self.center.clone(), self.generators.clone())
            .expect("fields validated at construction")
    }

    /// Upper bound on the enclosing-sphere radius around the center
    /// (constraints ignored, so this is sound).
    pub fn radius_bound(&self) -> f64 {
        self.relaxation().radius()
    }

    /// Exact intersection: keeps the first operand's parameterization, pads
    /// the second one's generators, and pins both to agree through the
    /// coupling constraint `G1 b1 - G2 b2 = c2 - c1`.
    pub fn intersect(&self, other: &ConstrainedZonotope) -> Result<ConstrainedZonotope> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension(format!(
                "constrained intersection: dims {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        let n = self.dim();
        let (g1, g2) = (self.num_generators(), other.num_generators());
        let (c1, c2) = (self.num_constraints(), other.num_constraints());

        let mut generators = DMatrix::zeros(n, g1 + g2);
        generators.view_mut((0, 0), (n, g1)).copy_from(&self.generators);

        let mut con_a = DMatrix::zeros(c1 + c2 + n, g1 + g2);
        con_a.view_mut((0, 0), (c1, g1)).copy_from(&self.con_a);
        con_a.view_mut((c1, g1), (c2, g2)).copy_from(&other.con_a);
        con_a
            .view_mut((c1 + c2, 0), (n, g1))
            .copy_from(&self.generators);
        con_a
            .view_mut((c1 + c2, g1), (n, g2))
            .copy_from(&(-&other.generators));

        let mut con_b = DVector::zeros(c1 + c2 + n);
        con_b.rows_mut(0, c1).copy_from(&self.con_b);
        con_b.rows_mut(c1, c2).copy_from(&other.con_b);
        con_b
            .rows_mut(c1 + c2, n)
            .copy_from(&(&other.center - &self.center));

        ConstrainedZonotope::new(self.center.clone(), generators, con_a, con_b)
    }

    /// Feasibility of `{A beta = b, ||beta||_inf <= 1}`.
    pub fn is_empty(&self) -> Result<bool> {
        if self.num_constraints() == 0 {
            return Ok(false);
        }
        let sol = solve_affine(&self.con_a, &self.con_b)?;
        if sol.residual > 1e-9 * (1.0 + self.con_b.amax()) {
            return Ok(true);
        }
        if self.num_generators() == 0 {
            return Ok(false);
        }
        let (t, _) = lp::min_inf_norm(&sol.particular, &sol.nullspace)?;
        Ok(t > 1.0 + 1e-9)
    }

    /// Decide `x in self` up to `tol`: feasibility of the stacked system
    /// `G beta = x - c`, `A beta = b`, `||beta||_inf <= 1 + tol`.
    pub fn contains_point(&self, x: &DVector<f64>, tol: f64) -> Result<bool> {
        if x.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "contains_point: point dim {} vs set dim {}",
                x.len(),
                self.dim()
            )));
        }
        let diff = x - &self.center;
        let eq_tol = tol * self.radius_bound().max(1.0) + 1e-12;
        if self.num_generators() == 0 {
            return Ok(diff.amax() <= eq_tol && self.con_b.amax() <= eq_tol);
        }
        let (a, b) = self.stack_constraints(&diff);
        let sol = solve_affine(&a, &b)?;
        if sol.residual > eq_tol {
            return Ok(false);
        }
        if sol.nullspace.ncols() == 0 {
            return Ok(sol.particular.amax() <= 1.0 + tol);
        }
        let (t, _) = lp::min_inf_norm(&sol.particular, &sol.nullspace)?;
        Ok(t <= 1.0 + tol)
    }

    fn stack_constraints(&self, diff: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
        let n = self.dim();
        let nc = self.num_constraints();
        let ng = self.num_generators();
        let mut a = DMatrix::zeros(n + nc, ng);
        a.view_mut((0, 0), (n, ng)).copy_from(&self.generators);
        a.view_mut((n, 0), (nc, ng)).copy_from(&self.con_a);
        let mut b = DVector::zeros(n + nc);
        b.rows_mut(0, n).copy_from(diff);
        b.rows_mut(n, nc).copy_from(&self.con_b);
        (a, b)
    }

    /// Tight axis-aligned bounding box via `2n` LPs over the constrained
    /// coefficient polytope. Errors when the set is empty.
    pub fn interval_hull(&self) -> Result<IntervalVector> {
        if self.num_constraints() == 0 {
            return Ok(self.relaxation().interval_hull());
        }
        let sol = solve_affine(&self.con_a, &self.con_b)?;
        if sol.residual > 1e-9 * (1.0 + self.con_b.amax()) {
            return Err(Error::EmptySet(
                "interval hull of an empty constrained zonotope".into(),
            ));
        }
        let n = self.dim();
        let mut lower = DVector::zeros(n);
        let mut upper = DVector::zeros(n);
        for j in 0..n {
            let g_row = self.generators.row(j);
            let offset = self.center[j] + g_row.transpose().dot(&sol.particular);
            let q = (g_row * &sol.nullspace).transpose();
            let hi = lp::extremize(&q, &sol.particular, &sol.nullspace, true)?;
            let lo = lp::extremize(&q, &sol.particular, &sol.nullspace, false)?;
            lower[j] = offset + lo;
            upper[j] = offset + hi;
        }
        // LP round-off can cross the bounds on degenerate (point) dimensions.
        for j in 0..n {
            if lower[j] > upper[j] {
                let mid = 0.5 * (lower[j] + upper[j]);
                lower[j] = mid;
                upper[j] = mid;
            }
        }
        IntervalVector::new(lower, upper)
    }

    /// Image under a linear map: constraints are untouched.
    pub fn linear_map(&self, a: &DMatrix<f64>) -> Result<ConstrainedZonotope> {
        if a.ncols() != self.dim() {
            return Err(Error::Dimension(format!(
                "linear map: matrix has {} columns, set dim is {}",
                a.ncols(),
                self.dim()
            )));
        }
        ConstrainedZonotope::new(
            a * &self.center,
            a * &self.generators,
            self.con_a.clone(),
            self.con_b.clone(),
        )
    }

    /// Minkowski sum with a plain zonotope: its generators join as
    /// unconstrained columns.
    pub fn minkowski_sum_zonotope(&self, z: &Zonotope) -> Result<ConstrainedZonotope> {
        if self.dim() != z.dim() {
            return Err(Error::Dimension(format!(
                "minkowski sum: dims {} vs {}",
                self.dim(),
                z.dim()
            )));
        }
        let n = self.dim();
        let ng = self.num_generators();
        let zg = z.num_generators();
        let mut generators = DMatrix::zeros(n, ng + zg);
        generators.view_mut((0, 0), (n, ng)).copy_from(&self.generators);
        generators.view_mut((0, ng), (n, zg)).copy_from(z.generators());
        let mut con_a = DMatrix::zeros(self.num_constraints(), ng + zg);
        con_a
            .view_mut((0, 0), (self.num_constraints(), ng))
            .copy_from(&self.con_a);
        ConstrainedZonotope::new(&self.center + z.center(), generators, con_a, self.con_b.clone())
    }

    /// Cartesian product with a plain zonotope (stacked below).
    pub fn cartesian_product_zonotope(&self, z: &Zonotope) -> ConstrainedZonotope {
        let n = self.dim();
        let m = z.dim();
        let ng = self.num_generators();
        let zg = z.num_generators();
        let mut center = DVector::zeros(n + m);
        center.rows_mut(0, n).copy_from(&self.center);
        center.rows_mut(n, m).copy_from(z.center());
        let mut generators = DMatrix::zeros(n + m, ng + zg);
        generators.view_mut((0, 0), (n, ng)).copy_from(&self.generators);
        generators.view_mut((n, ng), (m, zg)).copy_from(z.generators());
        let mut con_a = DMatrix::zeros(self.num_constraints(), ng + zg);
        con_a
            .view_mut((0, 0), (self.num_constraints(), ng))
            .copy_from(&self.con_a);
        ConstrainedZonotope {
            center,
            generators,
            con_a,
            con_b: self.con_b.clone(),
        }
    }

    /// Reduce to at most `target_constraints` constraints and (when the
    /// budget is not below the lifted dimension) `ceil(target_order * dim)`
    /// generators; the result is a superset.
    ///
    /// Constraints are eliminated one at a time by solving the row for its
    /// largest-magnitude coefficient and substituting, which transfers the
    /// removed coefficient's range into the remaining generators. The row to
    /// eliminate is chosen greedily as the one whose removal inflates the
    /// hull-width product least. Generators are then Girard-reduced on the
    /// lifted `[G; A]` zonotope and projected back.
    pub fn reduce(
        &self,
        target_order: f64,
        target_constraints: usize,
    ) -> Result<ConstrainedZonotope> {
        if !(target_order >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "reduction order must be >= 1, got {target_order}"
            )));
        }
        let n = self.dim();
        let gen_budget = (target_order * n as f64).ceil() as usize;
        if self.num_constraints() <= target_constraints && self.num_generators() <= gen_budget {
            return Ok(self.clone());
        }

        let mut current = self.clone();
        current.drop_null_constraints();
        while current.num_constraints() > target_constraints {
            let mut best: Option<(f64, ConstrainedZonotope)> = None;
            for row in 0..current.num_constraints() {
                let candidate = current.eliminate_constraint(row);
                let score = match candidate.interval_hull() {
                    Ok(hull) => hull.widths().iter().product::<f64>(),
                    Err(_) => f64::INFINITY,
                };
                let better = match &best {
                    Some((best_score, _)) => score < *best_score,
                    None => true,
                };
                if better {
                    best = Some((score, candidate));
                }
            }
            current = best
                .map(|(_, cz)| cz)
                .ok_or_else(|| Error::Numerical("constraint elimination found no candidate".into()))?;
        }

        if current.num_generators() > gen_budget {
            current = current.reduce_generators(gen_budget)?;
        }
        Ok(current)
    }

    /// Remove all-zero constraint rows; they are either redundant or (with a
    /// nonzero right-hand side) mark an empty set that dropping only widens.
    fn drop_null_constraints(&mut self) {
        let keep: Vec<usize> = (0..self.num_constraints())
            .filter(|&i| self.con_a.row(i).amax() > 0.0)
            .collect();
        if keep.len() == self.num_constraints() {
            return;
        }
        let mut con_a = DMatrix::zeros(keep.len(), self.num_generators());
        let mut con_b = DVector::zeros(keep.len());
        for (k, &i) in keep.iter().enumerate() {
            con_a.row_mut(k).copy_from(&self.con_a.row(i));
            con_b[k] = self.con_b[i];
        }
        self.con_a = con_a;
        self.con_b = con_b;
    }

    /// Substitute constraint `row` into the representation, removing it and
    /// its pivot coefficient. Always a superset of `self`.
    fn eliminate_constraint(&self, row: usize) -> ConstrainedZonotope {
        let ng = self.num_generators();
        let pivot = (0..ng)
            .max_by(|&a, &b| {
                self.con_a[(row, a)]
                    .abs()
                    .partial_cmp(&self.con_a[(row, b)].abs())
                    .unwrap()
            })
            .filter(|&j| self.con_a[(row, j)] != 0.0);

        let Some(j) = pivot else {
            // all-zero row: just drop it
            return ConstrainedZonotope {
                center: self.center.clone(),
                generators: self.generators.clone(),
                con_a: self.con_a.clone().remove_row(row),
                con_b: self.con_b.clone().remove_row(row),
            };
        };
        let a_rj = self.con_a[(row, j)];
        // beta_j = rhs - row_coeffs . beta (the j-entry of row_coeffs is 1
        // and cancels below)
        let row_coeffs = self.con_a.row(row) / a_rj;
        let rhs = self.con_b[row] / a_rj;

        let g_j = self.generators.column(j).into_owned();
        let center = &self.center + &g_j * rhs;
        let generators = (&self.generators - &g_j * &row_coeffs).remove_column(j);

        let a_j = self.con_a.column(j).into_owned();
        let con_a = (&self.con_a - &a_j * &row_coeffs)
            .remove_column(j)
            .remove_row(row);
        let con_b = (&self.con_b - &a_j * rhs).remove_row(row);

        ConstrainedZonotope {
            center,
            generators,
            con_a,
            con_b,
        }
    }

    /// Girard reduction on the lifted `[G; A]` zonotope, projected back.
    fn reduce_generators(&self, budget: usize) -> Result<ConstrainedZonotope> {
        let n = self.dim();
        let nc = self.num_constraints();
        let ng = self.num_generators();
        let mut lifted_center = DVector::zeros(n + nc);
        lifted_center.rows_mut(0, n).copy_from(&self.center);
        lifted_center.rows_mut(n, nc).copy_from(&(-&self.con_b));
        let mut lifted_gens = DMatrix::zeros(n + nc, ng);
        lifted_gens.view_mut((0, 0), (n, ng)).copy_from(&self.generators);
        lifted_gens.view_mut((n, 0), (nc, ng)).copy_from(&self.con_a);

        let lifted = Zonotope::new(lifted_center, lifted_gens)?;
        let reduced = lifted.reduce_to_count(budget.max(n + nc));

        let new_gens = reduced.generators().rows(0, n).into_owned();
        let new_a = reduced.generators().rows(n, nc).into_owned();
        ConstrainedZonotope::new(self.center.clone(), new_gens, new_a, self.con_b.clone())
    }

    /// Draw points from the set via a hit-and-run walk over the constrained
    /// coefficient polytope. Errors when the set is empty. With no
    /// constraints this is plain zonotope sampling.
    pub fn sample_many<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        count: usize,
    ) -> Result<Vec<DVector<f64>>> {
        if self.num_constraints() == 0 {
            let z = self.relaxation();
            return Ok((0..count).map(|_| z.sample(rng)).collect());
        }
        let sol = solve_affine(&self.con_a, &self.con_b)?;
        if sol.residual > 1e-9 * (1.0 + self.con_b.amax()) {
            return Err(Error::EmptySet(
                "sampling an empty constrained zonotope".into(),
            ));
        }
        let (t, start) = lp::min_inf_norm(&sol.particular, &sol.nullspace)?;
        if t > 1.0 + 1e-9 {
            return Err(Error::EmptySet(
                "sampling an empty constrained zonotope".into(),
            ));
        }
        let d = sol.nullspace.ncols();
        if d == 0 {
            let x = &self.center + &self.generators * &start;
            return Ok(vec![x; count]);
        }

        let mut beta = start;
        beta.apply(|x| *x = x.clamp(-1.0, 1.0));
        let burn_in = 10 + 2 * d;
        let mut out = Vec::with_capacity(count);
        let total = burn_in + count;
        for step in 0..total {
            let mut v = DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0f64));
            while v.norm() < 1e-9 {
                v = DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0f64));
            }
            let norm = v.norm();
            let dir = &sol.nullspace * (v / norm);
            let mut alpha_lo = f64::NEG_INFINITY;
            let mut alpha_hi = f64::INFINITY;
            for i in 0..beta.len() {
                let w = dir[i];
                if w.abs() < 1e-14 {
                    continue;
                }
                let to_upper = (1.0 - beta[i]) / w;
                let to_lower = (-1.0 - beta[i]) / w;
                let (lo, hi) = if w > 0.0 {
                    (to_lower, to_upper)
                } else {
                    (to_upper, to_lower)
                };
                alpha_lo = alpha_lo.max(lo);
                alpha_hi = alpha_hi.min(hi);
            }
            alpha_lo = alpha_lo.min(0.0);
            alpha_hi = alpha_hi.max(0.0);
            let alpha = rng.gen_range(alpha_lo..=alpha_hi);
            beta += dir * alpha;
            beta.apply(|x| *x = x.clamp(-1.0, 1.0));
            if step >= burn_in {
                out.push(&self.center + &self.generators * &beta);
            }
        }
        Ok(out)
    }
}
