//! Offline learning phase: turn recorded input-output data plus declared
//! noise bounds into a set of system matrices guaranteed to contain the true
//! `[A B]`.
//!
//! The pipeline reverse-maps the noisy output sequences into state space
//! through the SVD of the observation matrix (with a nullspace inflation term
//! when the sensor is rank deficient), subtracts the process-noise stack, and
//! multiplies by a rigorous interval pseudoinverse of the stacked regressor
//! matrix. The result is kept as an interval-matrix enclosure; containment of
//! the true model survives every over-approximation along the way.

use nalgebra::DMatrix;
use std::io::Read;

use crate::error::{Error, Result};
use crate::interval::IntervalMatrix;
use crate::linalg::{svd_split, RANK_REL_TOL};
use crate::matrix_set::MatrixZonotope;
use crate::zonotope::Zonotope;

/// Recorded training experiment: inputs `u(0..T-1)`, stacked noisy outputs
/// `z(0..T)`, the (combined) observation matrix producing them, and the bound
/// on the training measurement noise.
#[derive(Debug, Clone)]
pub struct TrainingData {
    /// `m x T`.
    inputs: DMatrix<f64>,
    /// `p x (T+1)`.
    outputs: DMatrix<f64>,
    /// `p x n`.
    obs_matrix: DMatrix<f64>,
    /// Training noise bound, dimension `p`.
    noise: Zonotope,
}

impl TrainingData {
    pub fn new(
        inputs: DMatrix<f64>,
        outputs: DMatrix<f64>,
        obs_matrix: DMatrix<f64>,
        noise: Zonotope,
    ) -> Result<Self> {
        if outputs.ncols() != inputs.ncols() + 1 {
            return Err(Error::Dimension(format!(
                "training data: {} input columns require {} output columns, got {}",
                inputs.ncols(),
                inputs.ncols() + 1,
                outputs.ncols()
            )));
        }
        if obs_matrix.nrows() != outputs.nrows() {
            return Err(Error::Dimension(format!(
                "training data: observation matrix has {} rows, outputs {}",
                obs_matrix.nrows(),
                outputs.nrows()
            )));
        }
        if noise.dim() != outputs.nrows() {
            return Err(Error::Dimension(format!(
                "training data: noise dim {} vs output dim {}",
                noise.dim(),
                outputs.nrows()
            )));
        }
        if inputs.iter().any(|x| !x.is_finite()) || outputs.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(
                "training data entries must be finite".into(),
            ));
        }
        Ok(Self {
            inputs,
            outputs,
            obs_matrix,
            noise,
        })
    }

    /// Parse from CSV with a mandatory header `k,u_1..u_m,z_1..z_p`. The last
    /// row carries the final output `z(T)`; its input cells may be empty.
    pub fn from_csv<R: Read>(reader: R, obs_matrix: DMatrix<f64>, noise: Zonotope) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = csv
            .headers()
            .map_err(|e| Error::Config(format!("training csv: {e}")))?
            .clone();
        let u_cols: Vec<usize> = headers
            .iter()
            .enumerate()
            .filter(|(_, h)| h.starts_with("u_"))
            .map(|(i, _)| i)
            .collect();
        let z_cols: Vec<usize> = headers
            .iter()
            .enumerate()
            .filter(|(_, h)| h.starts_with("z_"))
            .map(|(i, _)| i)
            .collect();
        if z_cols.is_empty() {
            return Err(Error::Config(
                "training csv: header must name z_1..z_p columns".into(),
            ));
        }

        let mut u_rows: Vec<Vec<f64>> = Vec::new();
        let mut z_rows: Vec<Vec<f64>> = Vec::new();
        for record in csv.records() {
            let record = record.map_err(|e| Error::Config(format!("training csv: {e}")))?;
            let parse = |idx: usize| -> Result<Option<f64>> {
                match record.get(idx) {
                    None | Some("") => Ok(None),
                    Some(s) => s.parse::<f64>().map(Some).map_err(|e| {
                        Error::Config(format!("training csv: bad number {s:?}: {e}"))
                    }),
                }
            };
            let mut z = Vec::with_capacity(z_cols.len());
            for &i in &z_cols {
                z.push(parse(i)?.ok_or_else(|| {
                    Error::Config("training csv: missing z value in a row".into())
                })?);
            }
            z_rows.push(z);
            let mut u = Vec::with_capacity(u_cols.len());
            for &i in &u_cols {
                u.push(parse(i)?);
            }
            if u.iter().all(|v| v.is_some()) {
                u_rows.push(u.into_iter().map(|v| v.unwrap()).collect());
            }
        }
        let t = z_rows.len().saturating_sub(1);
        if t == 0 {
            return Err(Error::Config("training csv: need at least two rows".into()));
        }
        u_rows.truncate(t);
        if u_rows.len() != t {
            return Err(Error::Config(format!(
                "training csv: {t} transitions but only {} complete input rows",
                u_rows.len()
            )));
        }
        let m = u_cols.len();
        let p = z_cols.len();
        let inputs = DMatrix::from_fn(m, t, |i, j| u_rows[j][i]);
        let outputs = DMatrix::from_fn(p, t + 1, |i, j| z_rows[j][i]);
        TrainingData::new(inputs, outputs, obs_matrix, noise)
    }

    /// Number of recorded transitions.
    pub fn t_len(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn state_dim(&self) -> usize {
        self.obs_matrix.ncols()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn outputs(&self) -> &DMatrix<f64> {
        &self.outputs
    }

    pub fn obs_matrix(&self) -> &DMatrix<f64> {
        &self.obs_matrix
    }

    pub fn noise(&self) -> &Zonotope {
        &self.noise
    }

    /// Shifted data sequences: `Z+ = z(1..T)`, `Z- = z(0..T-1)`, and the
    /// input block `U-`.
    pub fn split_sequences(&self) -> Result<(DMatrix<f64>, DMatrix<f64>, &DMatrix<f64>)> {
        let t = self.t_len();
        let need = self.state_dim() + self.input_dim();
        if t < need {
            return Err(Error::InvalidArgument(format!(
                "training length T={t} is shorter than n+m={need}; not enough excitation"
            )));
        }
        let p = self.outputs.nrows();
        let z_plus = self.outputs.view((0, 1), (p, t)).into_owned();
        let z_minus = self.outputs.view((0, 0), (p, t)).into_owned();
        Ok((z_plus, z_minus, &self.inputs))
    }
}

/// The learned propagation model: an interval enclosure of every `[A B]`
/// consistent with the data, plus the reverse-mapped state stacks it was
/// built from.
#[derive(Debug, Clone)]
pub struct LearnedModelSet {
    /// `n x (n+m)` enclosure of the consistent models.
    pub m_sigma_interval: IntervalMatrix,
    /// Reverse-mapped bound on the shifted state stack `X+`.
    pub m_plus: MatrixZonotope,
    /// Reverse-mapped bound on the state stack `X-`.
    pub m_minus: MatrixZonotope,
    /// State-norm bound used for nullspace inflation.
    pub m_bound: f64,
    /// Declared process noise bound.
    pub noise_w: Zonotope,
    /// Center of the stacked regressor `[center(M-); U-]`, kept for the
    /// point-model baseline.
    stacked_center: DMatrix<f64>,
    /// Non-fatal diagnostics (conditioning and bound checks).
    pub warnings: Vec<String>,
}

impl LearnedModelSet {
    /// Assemble a model set directly from an enclosure and a process-noise
    /// bound, bypassing the data-driven pipeline. Used by tests and the
    /// interactive demo; the reverse-mapped stacks are empty placeholders,
    /// so point-model identification is not available on such a model.
    pub fn from_enclosure(
        m_sigma_interval: IntervalMatrix,
        noise_w: Zonotope,
        m_bound: f64,
    ) -> Result<Self> {
        let (n, cols) = m_sigma_interval.shape();
        if noise_w.dim() != n || cols < n {
            return Err(Error::Dimension(format!(
                "model enclosure is {n}x{cols} with noise dim {}",
                noise_w.dim()
            )));
        }
        Ok(Self {
            m_sigma_interval,
            m_plus: MatrixZonotope::point(DMatrix::zeros(n, 1)),
            m_minus: MatrixZonotope::point(DMatrix::zeros(n, 1)),
            m_bound,
            noise_w,
            stacked_center: DMatrix::zeros(cols, 1),
            warnings: Vec::new(),
        })
    }

    pub fn state_dim(&self) -> usize {
        self.m_sigma_interval.shape().0
    }

    pub fn input_dim(&self) -> usize {
        self.m_sigma_interval.shape().1 - self.state_dim()
    }

    pub fn stacked_center(&self) -> &DMatrix<f64> {
        &self.stacked_center
    }
}

/// Bound the states consistent with a block of noisy outputs: each column of
/// `zdata` is mapped back through the observation matrix. The center and the
/// noise placements travel through `V1 S^-1 P1^T`; when `rank(C) < n` a
/// single extra generator `M * V2 * 1` covers the unobservable directions up
/// to the state-norm bound `M`.
pub fn reverse_map_outputs(
    zdata: &DMatrix<f64>,
    obs_matrix: &DMatrix<f64>,
    noise: &Zonotope,
    m_bound: f64,
) -> Result<MatrixZonotope> {
    let (p, t) = zdata.shape();
    let n = obs_matrix.ncols();
    if obs_matrix.nrows() != p {
        return Err(Error::Dimension(format!(
            "reverse map: outputs have {p} rows, observation matrix {}",
            obs_matrix.nrows()
        )));
    }
    if noise.dim() != p {
        return Err(Error::Dimension(format!(
            "reverse map: noise dim {} vs output dim {p}",
            noise.dim()
        )));
    }
    if !(m_bound > 0.0) || !m_bound.is_finite() {
        return Err(Error::InvalidArgument(
            "reverse map: state-norm bound must be positive and finite".into(),
        ));
    }
    if zdata.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(
            "reverse map: output data must be finite".into(),
        ));
    }
    let split = svd_split(obs_matrix, RANK_REL_TOL)?;
    if split.rank == 0 {
        return Err(Error::RankDeficient(
            "reverse map: observation matrix is zero".into(),
        ));
    }
    let rmap = split.reverse_map();

    // center: rmap * (Z - [c_gamma ... c_gamma])
    let mut shifted = zdata.clone();
    for j in 0..t {
        let mut col = shifted.column_mut(j);
        col -= noise.center();
    }
    let center = &rmap * shifted;

    // noise generators, indexed exactly as the placement stack: generator
    // (i, j) puts the mapped i-th noise generator into column j
    let xi = noise.num_generators();
    let mut generators = Vec::with_capacity(xi * t + 1);
    for i in 0..xi {
        let mapped = &rmap * noise.generators().column(i);
        for j in 0..t {
            let mut g = DMatrix::zeros(n, t);
            g.set_column(j, &mapped);
            generators.push(g);
        }
    }
    if split.rank < n {
        let ones = DMatrix::from_element(n - split.rank, t, 1.0);
        generators.push(&split.v2 * ones * m_bound);
    }
    MatrixZonotope::new(center, generators)
}

/// Learn the set of models consistent with the training data and noise
/// bounds. The returned interval is guaranteed to contain the `[A B]` that
/// generated the data, provided the noise stayed within its declared bounds.
pub fn learn_model_set(
    td: &TrainingData,
    noise_w: &Zonotope,
    m_bound: f64,
) -> Result<LearnedModelSet> {
    let n = td.state_dim();
    let m = td.input_dim();
    if noise_w.dim() != n {
        return Err(Error::Dimension(format!(
            "process noise dim {} vs state dim {n}",
            noise_w.dim()
        )));
    }
    let (z_plus, z_minus, u_minus) = td.split_sequences()?;
    let t = td.t_len();

    let m_plus = reverse_map_outputs(&z_plus, td.obs_matrix(), td.noise(), m_bound)?;
    let m_minus = reverse_map_outputs(&z_minus, td.obs_matrix(), td.noise(), m_bound)?;
    let m_w = MatrixZonotope::from_noise_sequence(noise_w, t)?;
    let m_diff = m_plus.sub(&m_w)?;

    let stacked = m_minus.vstack_exact(u_minus)?;
    let mut warnings = Vec::new();
    let split = svd_split(stacked.center(), RANK_REL_TOL)?;
    if split.rank < n + m {
        return Err(Error::RankDeficient(format!(
            "stacked regressor [X-; U-] has rank {} < {}; the training data is not \
             persistently exciting",
            split.rank,
            n + m
        )));
    }
    let cond = split.sigma[0] / split.sigma[n + m - 1];
    if cond > 1e8 {
        warnings.push(format!(
            "stacked regressor is ill-conditioned (cond ~ {cond:.1e}); the learned model \
             set may be very wide"
        ));
    }

    let pinv_int = stacked.to_interval().pinv_enclosure().map_err(|e| match e {
        Error::Inflation(msg) => Error::Inflation(format!(
            "{msg}; the training data is too short or too noisy for a rigorous model set"
        )),
        other => other,
    })?;
    let m_sigma_interval = m_diff.mul_interval(&pinv_int)?;

    Ok(LearnedModelSet {
        m_sigma_interval,
        m_plus,
        m_minus,
        m_bound,
        noise_w: noise_w.clone(),
        stacked_center: stacked.center().clone(),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DVector;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rotation_system() -> (DMatrix<f64>, DMatrix<f64>) {
        (
            DMatrix::from_row_slice(2, 2, &[0.9455, -0.2426, 0.2486, 0.9455]),
            DMatrix::from_row_slice(2, 1, &[0.1, 0.0]),
        )
    }

    /// Simulate with full-state training measurements `z = x + gamma`.
    fn simulate(
        a: &DMatrix<f64>,
        b: &DMatrix<f64>,
        t: usize,
        noise_w: &Zonotope,
        noise_gamma: &Zonotope,
        input_half_width: f64,
        rng: &mut ChaCha8Rng,
    ) -> (TrainingData, DMatrix<f64>) {
        let n = a.nrows();
        let mut x = DVector::zeros(n);
        let mut states = DMatrix::zeros(n, t + 1);
        let mut inputs = DMatrix::zeros(1, t);
        let mut outputs = DMatrix::zeros(n, t + 1);
        for k in 0..=t {
            states.set_column(k, &x);
            outputs.set_column(k, &(&x + noise_gamma.sample(rng)));
            if k < t {
                let u = rng.gen_range(-input_half_width..=input_half_width);
                inputs[(0, k)] = u;
                x = a * &x + b * DVector::from_element(1, u) + noise_w.sample(rng);
            }
        }
        let td = TrainingData::new(
            inputs,
            outputs,
            DMatrix::identity(n, n),
            noise_gamma.clone(),
        )
        .unwrap();
        (td, states)
    }

    fn small_noise(n: usize, scale: f64) -> Zonotope {
        Zonotope::new(DVector::zeros(n), DMatrix::identity(n, n) * scale).unwrap()
    }

    #[test]
    fn split_sequences_shapes_and_roundtrip() {
        let inputs = DMatrix::from_row_slice(1, 3, &[1.0, 2.0, 3.0]);
        let outputs = DMatrix::from_row_slice(1, 4, &[10.0, 11.0, 12.0, 13.0]);
        let noise = small_noise(1, 0.0);
        let td = TrainingData::new(inputs, outputs, DMatrix::identity(1, 1), noise).unwrap();
        let (z_plus, z_minus, u_minus) = td.split_sequences().unwrap();
        assert_eq!(z_plus, DMatrix::from_row_slice(1, 3, &[11.0, 12.0, 13.0]));
        assert_eq!(z_minus, DMatrix::from_row_slice(1, 3, &[10.0, 11.0, 12.0]));
        assert_eq!(u_minus, &DMatrix::from_row_slice(1, 3, &[1.0, 2.0, 3.0]));
        // reassembling z(0) with Z+ reproduces the outputs
        let mut rebuilt = DMatrix::zeros(1, 4);
        rebuilt.set_column(0, &z_minus.column(0));
        rebuilt.view_mut((0, 1), (1, 3)).copy_from(&z_plus);
        assert_eq!(rebuilt, *td.outputs());
    }

    #[test]
    fn split_sequences_rejects_short_data() {
        let inputs = DMatrix::from_row_slice(1, 1, &[1.0]);
        let outputs = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let td = TrainingData::new(
            inputs,
            outputs,
            DMatrix::identity(2, 2),
            small_noise(2, 0.0),
        )
        .unwrap();
        assert!(td.split_sequences().is_err());
    }

    #[test]
    fn reverse_map_identity_sensor() {
        let z = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let noise = small_noise(2, 0.02);
        let m = reverse_map_outputs(&z, &DMatrix::identity(2, 2), &noise, 50.0).unwrap();
        assert_relative_eq!(m.center(), &z, epsilon = 1e-12);
        // 2 noise generators x 3 columns, no nullspace generator
        assert_eq!(m.num_generators(), 6);
        for g in m.generators() {
            assert_relative_eq!(g.abs().max(), 0.02, epsilon = 1e-12);
        }
    }

    #[test]
    fn reverse_map_rank_deficient_sensor() {
        // C = [1 0], z = [5]: x_1 in 5 +- 0.1, x_2 covered by the nullspace
        // generator up to the norm bound
        let z = DMatrix::from_row_slice(1, 1, &[5.0]);
        let c = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let noise =
            Zonotope::new(DVector::zeros(1), DMatrix::from_row_slice(1, 1, &[0.1])).unwrap();
        let m = reverse_map_outputs(&z, &c, &noise, 10.0).unwrap();
        assert_relative_eq!(
            m.center(),
            &DMatrix::from_column_slice(2, 1, &[5.0, 0.0]),
            epsilon = 1e-12
        );
        assert_eq!(m.num_generators(), 2);
        assert_relative_eq!(
            m.generators()[0].column(0).into_owned().abs(),
            DVector::from_row_slice(&[0.1, 0.0]),
            epsilon = 1e-12
        );
        assert_relative_eq!(
            m.generators()[1].column(0).into_owned().abs(),
            DVector::from_row_slice(&[0.0, 10.0]),
            epsilon = 1e-12
        );

        // brute-force oracle: any x with ||x|| <= 10 and C x in z - Z_gamma
        // must land inside the (single-column) zonotope
        let col = Zonotope::new(
            m.center().column(0).into_owned(),
            DMatrix::from_fn(2, 2, |i, j| m.generators()[j][(i, 0)]),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(113);
        let mut accepted = 0;
        while accepted < 500 {
            let x = DVector::from_fn(2, |_, _| rng.gen_range(-10.0..10.0f64));
            if x.norm() <= 10.0 && (x[0] - 5.0).abs() <= 0.1 {
                accepted += 1;
                assert!(col.contains_point(&x, 1e-9).unwrap());
            }
        }
    }

    #[test]
    fn reverse_map_rejects_zero_observation() {
        let z = DMatrix::zeros(1, 1);
        let c = DMatrix::zeros(1, 2);
        let noise = small_noise(1, 0.1);
        assert!(reverse_map_outputs(&z, &c, &noise, 10.0).is_err());
    }

    #[test]
    fn reverse_map_contains_true_state_stack() {
        let (a, b) = rotation_system();
        let mut rng = ChaCha8Rng::seed_from_u64(127);
        let noise = small_noise(2, 0.02);
        let (td, states) = simulate(&a, &b, 120, &noise, &noise, 10.0, &mut rng);
        let (_, z_minus, _) = td.split_sequences().unwrap();
        let m = reverse_map_outputs(&z_minus, td.obs_matrix(), td.noise(), 50.0).unwrap();
        let x_minus = states.view((0, 0), (2, 120)).into_owned();
        assert!(m.to_interval().contains(&x_minus, 1e-9));
    }

    #[test]
    fn learn_exact_limit_recovers_true_model() {
        let (a, b) = rotation_system();
        let mut rng = ChaCha8Rng::seed_from_u64(131);
        let zero = small_noise(2, 0.0);
        let (td, _) = simulate(&a, &b, 60, &zero, &zero, 10.0, &mut rng);
        let model = learn_model_set(&td, &zero, 50.0).unwrap();
        assert!(model.m_sigma_interval.radius().amax() < 1e-8);
        let mut truth = DMatrix::zeros(2, 3);
        truth.view_mut((0, 0), (2, 2)).copy_from(&a);
        truth.view_mut((0, 2), (2, 1)).copy_from(&b);
        assert!(model.m_sigma_interval.contains(&truth, 1e-8));
        assert_relative_eq!(model.m_sigma_interval.center(), &truth, epsilon = 1e-7);
    }

    #[test]
    fn learn_contains_true_model_with_noise() {
        let (a, b) = rotation_system();
        let noise = small_noise(2, 0.02);
        let mut truth = DMatrix::zeros(2, 3);
        truth.view_mut((0, 0), (2, 2)).copy_from(&a);
        truth.view_mut((0, 2), (2, 1)).copy_from(&b);
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let (td, _) = simulate(&a, &b, 500, &noise, &noise, 10.0, &mut rng);
            let model = learn_model_set(&td, &noise, 50.0).unwrap();
            assert!(
                model.m_sigma_interval.contains(&truth, 1e-9),
                "true model escaped the learned set for seed {seed}"
            );
        }
    }

    #[test]
    fn learn_radius_shrinks_with_noise() {
        let (a, b) = rotation_system();
        let radius_for = |scale: f64| {
            let mut rng = ChaCha8Rng::seed_from_u64(47);
            let noise = small_noise(2, scale);
            let (td, _) = simulate(&a, &b, 300, &noise, &noise, 10.0, &mut rng);
            learn_model_set(&td, &noise, 50.0)
                .unwrap()
                .m_sigma_interval
                .radius()
        };
        let full = radius_for(0.02);
        let half = radius_for(0.01);
        for i in 0..2 {
            for j in 0..3 {
                assert!(
                    half[(i, j)] <= full[(i, j)] + 1e-12,
                    "halving the noise enlarged the model set at ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn learn_rejects_unexcited_data() {
        // zero inputs from a zero initial state: the regressor stack cannot
        // have full row rank
        let (a, b) = rotation_system();
        let zero = small_noise(2, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(137);
        let (td, _) = simulate(&a, &b, 40, &zero, &zero, 0.0, &mut rng);
        assert!(matches!(
            learn_model_set(&td, &zero, 50.0),
            Err(Error::RankDeficient(_))
        ));
    }

    #[test]
    fn training_data_from_csv() {
        let csv = "k,u_1,z_1,z_2\n0,1.5,0.1,0.2\n1,-0.5,0.3,0.4\n2,,0.5,0.6\n";
        let td = TrainingData::from_csv(
            csv.as_bytes(),
            DMatrix::identity(2, 2),
            small_noise(2, 0.02),
        )
        .unwrap();
        assert_eq!(td.t_len(), 2);
        assert_eq!(td.inputs(), &DMatrix::from_row_slice(1, 2, &[1.5, -0.5]));
        assert_eq!(
            td.outputs(),
            &DMatrix::from_row_slice(2, 3, &[0.1, 0.3, 0.5, 0.2, 0.4, 0.6])
        );
    }
}
