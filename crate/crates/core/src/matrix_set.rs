//! Matrix zonotopes: set-valued matrices built from stacked noise sequences,
//! with the interval enclosures and mixed products the learning phase needs.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::interval::IntervalMatrix;
use crate::zonotope::{sample_beta, Zonotope};

/// A zonotope whose elements are matrices: center `C` plus generator
/// matrices `G^(i)` scaled by shared `beta^(i)` in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixZonotope {
    center: DMatrix<f64>,
    generators: Vec<DMatrix<f64>>,
}

impl MatrixZonotope {
    pub fn new(center: DMatrix<f64>, generators: Vec<DMatrix<f64>>) -> Result<Self> {
        for (i, g) in generators.iter().enumerate() {
            if g.shape() != center.shape() {
                return Err(Error::Dimension(format!(
                    "matrix zonotope: generator {i} is {:?}, center is {:?}",
                    g.shape(),
                    center.shape()
                )));
            }
        }
        if center.iter().any(|x| !x.is_finite())
            || generators.iter().any(|g| g.iter().any(|x| !x.is_finite()))
        {
            return Err(Error::InvalidArgument(
                "matrix zonotope entries must be finite".into(),
            ));
        }
        Ok(Self { center, generators })
    }

    pub fn point(center: DMatrix<f64>) -> Self {
        Self {
            center,
            generators: Vec::new(),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.center.shape()
    }

    pub fn num_generators(&self) -> usize {
        self.generators.len()
    }

    pub fn center(&self) -> &DMatrix<f64> {
        &self.center
    }

    pub fn generators(&self) -> &[DMatrix<f64>] {
        &self.generators
    }

    /// Bound for a length-`t` sequence of vectors each drawn from `noise`:
    /// the center repeats the noise center in every column, and generator
    /// `j + i*t` places the `i`-th noise generator into column `j`
    /// (`xi * t` generators in total, one nonzero column each).
    pub fn from_noise_sequence(noise: &Zonotope, t: usize) -> Result<Self> {
        if t < 1 {
            return Err(Error::InvalidArgument(
                "noise sequence length must be at least 1".into(),
            ));
        }
        let n = noise.dim();
        let xi = noise.num_generators();
        let mut center = DMatrix::zeros(n, t);
        for j in 0..t {
            center.set_column(j, noise.center());
        }
        let mut generators = Vec::with_capacity(xi * t);
        for i in 0..xi {
            for j in 0..t {
                let mut g = DMatrix::zeros(n, t);
                g.set_column(j, &noise.generators().column(i));
                generators.push(g);
            }
        }
        Ok(Self { center, generators })
    }

    /// Elementwise enclosure `[C - sum|G|, C + sum|G|]`.
    pub fn to_interval(&self) -> IntervalMatrix {
        let mut half = DMatrix::zeros(self.center.nrows(), self.center.ncols());
        for g in &self.generators {
            half += g.abs();
        }
        IntervalMatrix::from_center_radius(self.center.clone(), half)
            .expect("radius is nonnegative by construction")
    }

    /// Interval enclosure of `A * B` over all members `A` of `self` and `B`
    /// of `rhs`.
    pub fn mul_interval(&self, rhs: &IntervalMatrix) -> Result<IntervalMatrix> {
        self.to_interval().mul_interval(rhs)
    }

    /// Set difference in the `Z1 + (-Z2)` sense: center difference,
    /// concatenated generators.
    pub fn sub(&self, other: &MatrixZonotope) -> Result<MatrixZonotope> {
        if self.shape() != other.shape() {
            return Err(Error::Dimension(format!(
                "matrix zonotope subtraction: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let mut generators = self.generators.clone();
        generators.extend(other.generators.iter().cloned());
        Ok(MatrixZonotope {
            center: &self.center - &other.center,
            generators,
        })
    }

    /// Stack exactly-known rows below the uncertain block: the result has
    /// center `[C; exact]` and each generator zero-padded in the new rows.
    pub fn vstack_exact(&self, exact: &DMatrix<f64>) -> Result<MatrixZonotope> {
        let (n, t) = self.shape();
        if exact.ncols() != t {
            return Err(Error::Dimension(format!(
                "vstack: uncertain block has {t} columns, exact block has {}",
                exact.ncols()
            )));
        }
        let m = exact.nrows();
        let mut center = DMatrix::zeros(n + m, t);
        center.view_mut((0, 0), (n, t)).copy_from(&self.center);
        center.view_mut((n, 0), (m, t)).copy_from(exact);
        let generators = self
            .generators
            .iter()
            .map(|g| {
                let mut padded = DMatrix::zeros(n + m, t);
                padded.view_mut((0, 0), (n, t)).copy_from(g);
                padded
            })
            .collect();
        Ok(MatrixZonotope { center, generators })
    }

    /// Draw a member matrix with shared uniform `beta`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DMatrix<f64> {
        let beta = sample_beta(rng, self.generators.len());
        let mut m = self.center.clone();
        for (i, g) in self.generators.iter().enumerate() {
            m += g * beta[i];
        }
        m
    }
}

/// Sound enclosure of `{ A x : A in m, x in z }` as a zonotope:
/// `< Mc c, [Mc G, diag(d)] >` with `d = Mr (|c| + sum_i |g_i|)`.
/// Zero diagonal entries are dropped, so a degenerate interval reduces to the
/// plain linear map.
pub fn interval_map_zonotope(m: &IntervalMatrix, z: &Zonotope) -> Result<Zonotope> {
    let (rows, cols) = m.shape();
    if cols != z.dim() {
        return Err(Error::Dimension(format!(
            "interval-matrix map: matrix has {cols} columns, zonotope dim is {}",
            z.dim()
        )));
    }
    let mc = m.center();
    let mr = m.radius();
    let reach = z.center().abs() + z.abs_generator_row_sums();
    let d = &mr * reach;

    let mapped_center = &mc * z.center();
    let mapped_gens = &mc * z.generators();
    let extra: Vec<usize> = (0..rows).filter(|&i| d[i] > 0.0).collect();
    let mut generators = DMatrix::zeros(rows, mapped_gens.ncols() + extra.len());
    generators
        .view_mut((0, 0), (rows, mapped_gens.ncols()))
        .copy_from(&mapped_gens);
    for (k, &i) in extra.iter().enumerate() {
        generators[(i, mapped_gens.ncols() + k)] = d[i];
    }
    Zonotope::new(mapped_center, generators)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DVector;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn noise_2d() -> Zonotope {
        Zonotope::new(DVector::zeros(2), DMatrix::identity(2, 2) * 0.02).unwrap()
    }

    #[test]
    fn noise_sequence_t1_placement() {
        let m = MatrixZonotope::from_noise_sequence(&noise_2d(), 1).unwrap();
        assert_eq!(m.shape(), (2, 1));
        assert_eq!(m.num_generators(), 2);
        assert_eq!(m.center(), &DMatrix::zeros(2, 1));
        assert_eq!(m.generators()[0], DMatrix::from_column_slice(2, 1, &[0.02, 0.0]));
        assert_eq!(m.generators()[1], DMatrix::from_column_slice(2, 1, &[0.0, 0.02]));
    }

    #[test]
    fn noise_sequence_scalar_t3() {
        let z = Zonotope::new(
            DVector::from_row_slice(&[1.0]),
            DMatrix::from_row_slice(1, 1, &[2.0]),
        )
        .unwrap();
        let m = MatrixZonotope::from_noise_sequence(&z, 3).unwrap();
        assert_eq!(m.center(), &DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]));
        assert_eq!(m.num_generators(), 3);
        assert_eq!(m.generators()[0], DMatrix::from_row_slice(1, 3, &[2.0, 0.0, 0.0]));
        assert_eq!(m.generators()[1], DMatrix::from_row_slice(1, 3, &[0.0, 2.0, 0.0]));
        assert_eq!(m.generators()[2], DMatrix::from_row_slice(1, 3, &[0.0, 0.0, 2.0]));
    }

    #[test]
    fn noise_sequence_generators_have_one_nonzero_column() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let z = Zonotope::new(
            DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0)),
            DMatrix::from_fn(3, 4, |_, _| rng.gen_range(-1.0..1.0)),
        )
        .unwrap();
        let t = 5;
        let m = MatrixZonotope::from_noise_sequence(&z, t).unwrap();
        assert_eq!(m.num_generators(), 4 * t);
        for g in m.generators() {
            let nonzero_cols = (0..t).filter(|&j| g.column(j).amax() > 0.0).count();
            assert_eq!(nonzero_cols, 1);
        }
    }

    #[test]
    fn noise_sequence_member_columns_stay_in_noise_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let z = Zonotope::new(
            DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0)),
            DMatrix::from_fn(2, 3, |_, _| rng.gen_range(-1.0..1.0)),
        )
        .unwrap();
        let m = MatrixZonotope::from_noise_sequence(&z, 4).unwrap();
        for _ in 0..200 {
            let member = m.sample(&mut rng);
            for j in 0..4 {
                let col = member.column(j).into_owned();
                assert!(z.contains_point(&col, 1e-9).unwrap());
            }
        }
    }

    #[test]
    fn to_interval_cases() {
        let m = MatrixZonotope::point(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        let iv = m.to_interval();
        assert_eq!(iv.lower(), iv.upper());

        let m = MatrixZonotope::new(
            DMatrix::zeros(1, 2),
            vec![DMatrix::from_row_slice(1, 2, &[1.0, -2.0])],
        )
        .unwrap();
        let iv = m.to_interval();
        assert_eq!(iv.lower(), &DMatrix::from_row_slice(1, 2, &[-1.0, -2.0]));
        assert_eq!(iv.upper(), &DMatrix::from_row_slice(1, 2, &[1.0, 2.0]));
    }

    #[test]
    fn to_interval_contains_members() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let gens: Vec<_> = (0..5)
            .map(|_| DMatrix::from_fn(2, 3, |_, _| rng.gen_range(-1.0..1.0)))
            .collect();
        let m = MatrixZonotope::new(DMatrix::from_fn(2, 3, |_, _| rng.gen_range(-1.0..1.0)), gens)
            .unwrap();
        let iv = m.to_interval();
        for _ in 0..500 {
            assert!(iv.contains(&m.sample(&mut rng), 1e-9));
        }
    }

    #[test]
    fn mul_interval_point_cases() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, -1.0, 2.0]);
        let m = MatrixZonotope::point(a.clone());
        let prod = m.mul_interval(&IntervalMatrix::degenerate(b.clone())).unwrap();
        let exact = a * b;
        assert_relative_eq!(prod.center(), &exact, epsilon = 1e-12);
        assert!(prod.radius().amax() < 1e-12);

        let m = MatrixZonotope::new(
            DMatrix::identity(2, 2),
            vec![DMatrix::identity(2, 2) * 0.1],
        )
        .unwrap();
        let prod = m
            .mul_interval(&IntervalMatrix::degenerate(DMatrix::identity(2, 2)))
            .unwrap();
        assert_relative_eq!(prod.center(), &DMatrix::identity(2, 2), epsilon = 1e-12);
        assert_relative_eq!(prod.radius(), &(DMatrix::identity(2, 2) * 0.1), epsilon = 1e-12);
    }

    #[test]
    fn mul_interval_contains_sampled_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let gens: Vec<_> = (0..4)
            .map(|_| DMatrix::from_fn(2, 3, |_, _| rng.gen_range(-0.5..0.5)))
            .collect();
        let m = MatrixZonotope::new(DMatrix::from_fn(2, 3, |_, _| rng.gen_range(-1.0..1.0)), gens)
            .unwrap();
        let bc = DMatrix::from_fn(3, 2, |_, _| rng.gen_range(-1.0..1.0));
        let br = DMatrix::from_fn(3, 2, |_, _| rng.gen_range(0.0..0.2));
        let bi = IntervalMatrix::from_center_radius(bc.clone(), br.clone()).unwrap();
        let prod = m.mul_interval(&bi).unwrap();
        for _ in 0..500 {
            let a = m.sample(&mut rng);
            let b = DMatrix::from_fn(3, 2, |i, j| bc[(i, j)] + rng.gen_range(-1.0..1.0) * br[(i, j)]);
            assert!(prod.contains(&(a * b), 1e-9));
        }
    }

    #[test]
    fn sub_identity_and_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let gens: Vec<_> = (0..3)
            .map(|_| DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0)))
            .collect();
        let m = MatrixZonotope::new(DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0)), gens)
            .unwrap();
        let zero = MatrixZonotope::point(DMatrix::zeros(2, 2));
        let diff = m.sub(&zero).unwrap();
        assert_eq!(diff, m);

        let m2 = MatrixZonotope::new(
            DMatrix::zeros(2, 2),
            vec![DMatrix::identity(2, 2), DMatrix::identity(2, 2) * 0.5],
        )
        .unwrap();
        let diff = m.sub(&m2).unwrap();
        assert_eq!(diff.num_generators(), 5);
    }

    #[test]
    fn sub_contains_sampled_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let m1 = MatrixZonotope::new(
            DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0)),
            vec![DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-0.5..0.5))],
        )
        .unwrap();
        let m2 = MatrixZonotope::new(
            DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0)),
            vec![DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-0.5..0.5))],
        )
        .unwrap();
        let diff = m1.sub(&m2).unwrap();
        let iv = diff.to_interval();
        for _ in 0..500 {
            let a1 = m1.sample(&mut rng);
            let a2 = m2.sample(&mut rng);
            assert!(iv.contains(&(a1 - a2), 1e-9));
        }
    }

    #[test]
    fn vstack_pads_generators_with_zeros() {
        let m = MatrixZonotope::new(
            DMatrix::from_row_slice(1, 2, &[1.0, 2.0]),
            vec![DMatrix::from_row_slice(1, 2, &[0.5, 0.5])],
        )
        .unwrap();
        let exact = DMatrix::from_row_slice(1, 2, &[7.0, 8.0]);
        let stacked = m.vstack_exact(&exact).unwrap();
        assert_eq!(stacked.shape(), (2, 2));
        assert_eq!(stacked.center().row(1).transpose(), DVector::from_row_slice(&[7.0, 8.0]));
        assert_eq!(stacked.generators()[0].row(1).amax(), 0.0);
    }

    #[test]
    fn interval_map_degenerate_is_linear_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        let z = Zonotope::new(
            DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0)),
            DMatrix::from_fn(2, 3, |_, _| rng.gen_range(-1.0..1.0)),
        )
        .unwrap();
        let a = DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0));
        let mapped = interval_map_zonotope(&IntervalMatrix::degenerate(a.clone()), &z).unwrap();
        assert_eq!(mapped, z.linear_map(&a).unwrap());
    }

    #[test]
    fn interval_map_pure_radius_case() {
        let eps = 0.25;
        let m = IntervalMatrix::from_center_radius(
            DMatrix::zeros(2, 2),
            DMatrix::identity(2, 2) * eps,
        )
        .unwrap();
        let z = Zonotope::point(DVector::from_row_slice(&[1.0, 1.0]));
        let mapped = interval_map_zonotope(&m, &z).unwrap();
        let widths = mapped.interval_hull().widths();
        assert_relative_eq!(widths[0], 2.0 * eps, epsilon = 1e-12);
        assert_relative_eq!(widths[1], 2.0 * eps, epsilon = 1e-12);

        // the radius only sees |x| through reachable magnitudes
        let z = Zonotope::point(DVector::from_row_slice(&[1.0, 0.0]));
        let mapped = interval_map_zonotope(&m, &z).unwrap();
        let widths = mapped.interval_hull().widths();
        assert_relative_eq!(widths[0], 2.0 * eps, epsilon = 1e-12);
        assert_relative_eq!(widths[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn interval_map_contains_sampled_images() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let mc = DMatrix::from_fn(2, 3, |_, _| rng.gen_range(-1.0..1.0));
        let mr = DMatrix::from_fn(2, 3, |_, _| rng.gen_range(0.0..0.3));
        let m = IntervalMatrix::from_center_radius(mc.clone(), mr.clone()).unwrap();
        let z = Zonotope::new(
            DVector::from_fn(3, |_, _| rng.gen_range(-2.0..2.0)),
            DMatrix::from_fn(3, 4, |_, _| rng.gen_range(-1.0..1.0)),
        )
        .unwrap();
        let mapped = interval_map_zonotope(&m, &z).unwrap();
        for _ in 0..1000 {
            let a = DMatrix::from_fn(2, 3, |i, j| mc[(i, j)] + rng.gen_range(-1.0..1.0) * mr[(i, j)]);
            let x = z.sample(&mut rng);
            assert!(mapped.contains_point(&(a * x), 1e-9).unwrap());
        }
    }
}
