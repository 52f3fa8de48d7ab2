//! Point-estimate baseline: a least-squares model identified from the
//! learned data stacks, a standard discrete Kalman filter, and 3-sigma
//! ellipse reporting for side-by-side comparison with the set-based
//! estimators. The filter's bounds carry no containment guarantee; that is
//! the point of the comparison.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::learn::LearnedModelSet;
use crate::linalg::{svd_split, RANK_REL_TOL};
use crate::zonotope::Zonotope;

/// Gaussian filter state.
#[derive(Debug, Clone)]
pub struct KfState {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl KfState {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if covariance.shape() != (n, n) {
            return Err(Error::Dimension(format!(
                "kf state: covariance is {:?} for a {n}-state mean",
                covariance.shape()
            )));
        }
        let asym = (&covariance - covariance.transpose()).amax();
        if asym > 1e-10 * (1.0 + covariance.amax()) {
            return Err(Error::InvalidArgument(format!(
                "kf state: covariance asymmetry {asym:.2e}"
            )));
        }
        let sym = symmetrize(&covariance);
        let min_eig = sym
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -1e-12 * (1.0 + sym.amax()) {
            return Err(Error::InvalidArgument(format!(
                "kf state: covariance has eigenvalue {min_eig:.2e} < 0"
            )));
        }
        Ok(Self {
            mean,
            covariance: sym,
        })
    }
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Point model for the filter: the center of the learned model set,
/// `[A B] = center(M+ - M_w) * pinv([center(M-); U-])`.
pub fn identify_point_model(model: &LearnedModelSet) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = model.state_dim();
    let m = model.input_dim();
    let t = model.stacked_center().ncols();

    let split = svd_split(model.stacked_center(), RANK_REL_TOL)?;
    if split.rank < n + m {
        return Err(Error::RankDeficient(format!(
            "point-model identification: regressor rank {} < {}",
            split.rank,
            n + m
        )));
    }
    let mut diff_center = model.m_plus.center().clone();
    for j in 0..t {
        let mut col = diff_center.column_mut(j);
        col -= model.noise_w.center();
    }
    let ab = diff_center * split.reverse_map();
    let a_hat = ab.view((0, 0), (n, n)).into_owned();
    let b_hat = ab.view((0, n), (n, m)).into_owned();
    Ok((a_hat, b_hat))
}

/// One predict + update cycle of the discrete Kalman filter with stacked
/// measurements. The covariance update uses the Joseph form so positive
/// semidefiniteness survives round-off.
#[allow(clippy::too_many_arguments)]
pub fn kf_step(
    state: &KfState,
    u: &DVector<f64>,
    y: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<KfState> {
    let n = state.mean.len();
    // predict
    let mean_pred = a * &state.mean + b * u;
    let cov_pred = symmetrize(&(a * &state.covariance * a.transpose() + q));

    // update
    let innovation_cov = symmetrize(&(c * &cov_pred * c.transpose() + r));
    let chol = innovation_cov.clone().cholesky().ok_or_else(|| {
        Error::Numerical("kf update: innovation covariance is singular".into())
    })?;
    // K = P C^T S^-1  solved as  S K^T = C P
    let gain = chol.solve(&(c * &cov_pred)).transpose();

    let mean = &mean_pred + &gain * (y - c * mean_pred.clone());
    let ikc = DMatrix::identity(n, n) - &gain * c;
    let cov = symmetrize(&(&ikc * cov_pred * ikc.transpose() + &gain * r * gain.transpose()));
    KfState::new(mean, cov)
}

/// Confidence ellipse of a filter state: semi-axes `3 sqrt(eigenvalue)`
/// along the covariance eigenvectors, sorted largest first. The orientation
/// is the angle of the major axis (meaningful for 2-state filters; zero
/// otherwise).
#[derive(Debug, Clone)]
pub struct ThreeSigmaEllipse {
    pub center: DVector<f64>,
    pub semi_axes: DVector<f64>,
    pub angle_rad: f64,
}

pub fn three_sigma_ellipse(state: &KfState) -> Result<ThreeSigmaEllipse> {
    let n = state.mean.len();
    let eig = symmetrize(&state.covariance).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());

    let mut semi_axes = DVector::zeros(n);
    for (k, &i) in order.iter().enumerate() {
        let lam = eig.eigenvalues[i];
        if lam < -1e-12 * (1.0 + state.covariance.amax()) {
            return Err(Error::InvalidArgument(format!(
                "3-sigma ellipse: covariance eigenvalue {lam:.2e} < 0"
            )));
        }
        semi_axes[k] = 3.0 * lam.max(0.0).sqrt();
    }
    let angle_rad = if n == 2 {
        let major = eig.eigenvectors.column(order[0]);
        major[1].atan2(major[0])
    } else {
        0.0
    };
    Ok(ThreeSigmaEllipse {
        center: state.mean.clone(),
        semi_axes,
        angle_rad,
    })
}

/// Second moment of the uniform distribution over a zonotope's coefficient
/// box: `G G^T / 3`. Used to derive `Q`/`R` for the baseline from the
/// declared noise bounds.
pub fn uniform_covariance(z: &Zonotope) -> DMatrix<f64> {
    z.generators() * z.generators().transpose() / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kf_state_rejects_asymmetric_covariance() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.5, 1.0]);
        assert!(KfState::new(DVector::zeros(2), cov).is_err());
    }

    #[test]
    fn exact_model_tracks_exactly() {
        let a = DMatrix::from_row_slice(2, 2, &[0.9455, -0.2426, 0.2486, 0.9455]);
        let b = DMatrix::from_row_slice(2, 1, &[0.1, 0.0]);
        let c = DMatrix::identity(2, 2);
        let q = DMatrix::zeros(2, 2);
        let r = DMatrix::identity(2, 2) * 1e-12;
        let mut x = DVector::from_row_slice(&[-1.0, 2.0]);
        let mut kf = KfState::new(x.clone(), DMatrix::zeros(2, 2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let u = DVector::from_element(1, rng.gen_range(-1.0..1.0));
            x = &a * &x + &b * &u;
            kf = kf_step(&kf, &u, &x, &a, &b, &c, &q, &r).unwrap();
            assert!((&kf.mean - &x).amax() < 1e-8);
        }
    }

    #[test]
    fn update_never_increases_trace() {
        // A = I, B = 0, Q = 0: predict leaves the covariance unchanged, so
        // any trace change comes from the measurement update alone.
        let a = DMatrix::identity(2, 2);
        let b = DMatrix::zeros(2, 1);
        let c = DMatrix::from_row_slice(1, 2, &[1.0, 0.3]);
        let q = DMatrix::zeros(2, 2);
        let r = DMatrix::from_element(1, 1, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let g = DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0));
            let cov = &g * g.transpose() + DMatrix::identity(2, 2) * 0.1;
            let state = KfState::new(DVector::zeros(2), cov.clone()).unwrap();
            let y = DVector::from_element(1, rng.gen_range(-1.0..1.0));
            let next = kf_step(
                &state,
                &DVector::zeros(1),
                &y,
                &a,
                &b,
                &c,
                &q,
                &r,
            )
            .unwrap();
            assert!(next.covariance.trace() <= cov.trace() + 1e-12);
        }
    }

    #[test]
    fn scalar_riccati_step() {
        // A=1, C=1, Q=R=1, prior variance 1: predicted 2, posterior 2/3
        let one = DMatrix::from_element(1, 1, 1.0);
        let state = KfState::new(DVector::zeros(1), one.clone()).unwrap();
        let next = kf_step(
            &state,
            &DVector::zeros(1),
            &DVector::zeros(1),
            &one,
            &DMatrix::zeros(1, 1),
            &one,
            &one,
            &one,
        )
        .unwrap();
        assert_relative_eq!(next.covariance[(0, 0)], 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn singular_innovation_errors() {
        let zero = DMatrix::zeros(1, 1);
        let state = KfState::new(DVector::zeros(1), zero.clone()).unwrap();
        let res = kf_step(
            &state,
            &DVector::zeros(1),
            &DVector::zeros(1),
            &DMatrix::identity(1, 1),
            &DMatrix::zeros(1, 1),
            &DMatrix::identity(1, 1),
            &zero,
            &zero,
        );
        assert!(matches!(res, Err(Error::Numerical(_))));
    }

    #[test]
    fn ellipse_identity_and_diagonal() {
        let s = KfState::new(DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
        let e = three_sigma_ellipse(&s).unwrap();
        assert_relative_eq!(e.semi_axes[0], 3.0, epsilon = 1e-12);
        assert_relative_eq!(e.semi_axes[1], 3.0, epsilon = 1e-12);

        let s = KfState::new(
            DVector::zeros(2),
            DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0]),
        )
        .unwrap();
        let e = three_sigma_ellipse(&s).unwrap();
        assert_relative_eq!(e.semi_axes[0], 6.0, epsilon = 1e-12);
        assert_relative_eq!(e.semi_axes[1], 3.0, epsilon = 1e-12);
        assert!(e.angle_rad.cos().abs() > 1.0 - 1e-12);
    }

    #[test]
    fn ellipse_rotation_recovered() {
        let theta = 0.7f64;
        let rot = DMatrix::from_row_slice(
            2,
            2,
            &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()],
        );
        let cov = &rot * DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0]) * rot.transpose();
        let s = KfState::new(DVector::zeros(2), cov).unwrap();
        let e = three_sigma_ellipse(&s).unwrap();
        assert_relative_eq!(e.semi_axes[0], 6.0, epsilon = 1e-9);
        assert_relative_eq!(e.semi_axes[1], 3.0, epsilon = 1e-9);
        // the major axis direction matches up to sign
        let delta = (e.angle_rad - theta).abs();
        assert!(delta < 1e-9 || (delta - std::f64::consts::PI).abs() < 1e-9);
    }

    #[test]
    fn uniform_covariance_matches_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = DMatrix::from_fn(2, 3, |_, _| rng.gen_range(-1.0..1.0));
        let z = Zonotope::new(DVector::zeros(2), g).unwrap();
        let expected = uniform_covariance(&z);
        let mut acc = DMatrix::zeros(2, 2);
        let count = 100_000;
        for _ in 0..count {
            let x = z.sample(&mut rng);
            acc += &x * x.transpose();
        }
        let sample_cov = acc / count as f64;
        let rel = (&sample_cov - &expected).norm() / expected.norm();
        assert!(rel < 0.05, "sample covariance off by {rel:.3}");
    }
}
