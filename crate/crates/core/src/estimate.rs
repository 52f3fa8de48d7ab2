//! Online estimation phase: alternate a set-valued time update through the
//! learned model enclosure with one of two measurement updates, then reduce
//! the representation order so step cost stays flat.
//!
//! The reverse-mapping update maps each measurement back to state space
//! through the sensor SVD and intersects; the implicit update folds all
//! measurements in at once through gain-like weights chosen to minimize the
//! Frobenius norm of the resulting generator matrix. Both exist for plain
//! zonotopes (sound over-approximation) and constrained zonotopes (exact
//! intersection).

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};

use crate::conzono::ConstrainedZonotope;
use crate::error::{Error, Result};
use crate::interval::IntervalVector;
use crate::learn::LearnedModelSet;
use crate::linalg::{solve_spd, svd_split, RANK_REL_TOL};
use crate::matrix_set::interval_map_zonotope;
use crate::zonotope::Zonotope;

/// One sensor: known observation matrix and measurement-noise bound.
#[derive(Debug, Clone)]
pub struct SensorModel {
    /// `p_i x n`.
    pub obs_matrix: DMatrix<f64>,
    /// Noise bound, dimension `p_i`.
    pub noise: Zonotope,
}

impl SensorModel {
    pub fn new(obs_matrix: DMatrix<f64>, noise: Zonotope) -> Result<Self> {
        if noise.dim() != obs_matrix.nrows() {
            return Err(Error::Dimension(format!(
                "sensor: noise dim {} vs {} observation rows",
                noise.dim(),
                obs_matrix.nrows()
            )));
        }
        Ok(Self { obs_matrix, noise })
    }

    pub fn output_dim(&self) -> usize {
        self.obs_matrix.nrows()
    }
}

/// Set representation used by the estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    Zonotope,
    Constrained,
}

/// Measurement-update algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Approach {
    ReverseMapping,
    Implicit,
}

/// Estimator settings for one variant.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct EstimatorConfig {
    pub representation: Representation,
    pub approach: Approach,
    /// Generator budget per state dimension after each step.
    pub reduction_order: f64,
    /// Constraint budget after each step (constrained representation only).
    pub constraint_budget: usize,
    /// Tolerance used for containment checks in reports.
    pub containment_tol: f64,
}

impl EstimatorConfig {
    pub fn new(representation: Representation, approach: Approach) -> Self {
        Self {
            representation,
            approach,
            reduction_order: 5.0,
            constraint_budget: 5,
            containment_tol: 1e-6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.reduction_order >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "reduction order must be >= 1, got {}",
                self.reduction_order
            )));
        }
        if !(self.containment_tol >= 0.0) {
            return Err(Error::InvalidArgument(
                "containment tolerance must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Either set representation, so the estimator loop and reports can treat
/// both uniformly.
#[derive(Debug, Clone)]
pub enum StateSet {
    Zonotope(Zonotope),
    Constrained(ConstrainedZonotope),
}

impl StateSet {
    pub fn from_initial(x0: &Zonotope, representation: Representation) -> StateSet {
        match representation {
            Representation::Zonotope => StateSet::Zonotope(x0.clone()),
            Representation::Constrained => {
                StateSet::Constrained(ConstrainedZonotope::from_zonotope(x0))
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            StateSet::Zonotope(z) => z.dim(),
            StateSet::Constrained(c) => c.dim(),
        }
    }

    pub fn center(&self) -> &DVector<f64> {
        match self {
            StateSet::Zonotope(z) => z.center(),
            StateSet::Constrained(c) => c.center(),
        }
    }

    pub fn generator_matrix(&self) -> &DMatrix<f64> {
        match self {
            StateSet::Zonotope(z) => z.generators(),
            StateSet::Constrained(c) => c.generators(),
        }
    }

    pub fn num_generators(&self) -> usize {
        self.generator_matrix().ncols()
    }

    /// Enclosing-sphere radius bound around the center.
    pub fn radius_bound(&self) -> f64 {
        match self {
            StateSet::Zonotope(z) => z.radius(),
            StateSet::Constrained(c) => c.radius_bound(),
        }
    }

    pub fn interval_hull(&self) -> Result<IntervalVector> {
        match self {
            StateSet::Zonotope(z) => Ok(z.interval_hull()),
            StateSet::Constrained(c) => c.interval_hull(),
        }
    }

    pub fn contains_point(&self, x: &DVector<f64>, tol: f64) -> Result<bool> {
        match self {
            StateSet::Zonotope(z) => z.contains_point(x, tol),
            StateSet::Constrained(c) => c.contains_point(x, tol),
        }
    }

    pub fn is_empty(&self) -> Result<bool> {
        match self {
            StateSet::Zonotope(_) => Ok(false),
            StateSet::Constrained(c) => c.is_empty(),
        }
    }

    fn reduce(&self, cfg: &EstimatorConfig) -> Result<StateSet> {
        Ok(match self {
            StateSet::Zonotope(z) => StateSet::Zonotope(z.reduce_order(cfg.reduction_order)?),
            StateSet::Constrained(c) => {
                StateSet::Constrained(c.reduce(cfg.reduction_order, cfg.constraint_budget)?)
            }
        })
    }
}

/// Propagate a state set one step through the learned model enclosure:
/// the enclosure is applied to `rhat x input` and the process-noise bound is
/// added. Every `A_tr x + B_tr u + w` with members drawn from the respective
/// sets lands inside the result.
pub fn time_update(
    model: &LearnedModelSet,
    rhat: &StateSet,
    input: &Zonotope,
) -> Result<StateSet> {
    let n = model.state_dim();
    if rhat.dim() != n || input.dim() != model.input_dim() {
        return Err(Error::Dimension(format!(
            "time update: set dim {} / input dim {} vs model {}+{}",
            rhat.dim(),
            input.dim(),
            n,
            model.input_dim()
        )));
    }
    match rhat {
        StateSet::Zonotope(z) => {
            let prod = z.cartesian_product(input);
            let mapped = interval_map_zonotope(&model.m_sigma_interval, &prod)?;
            Ok(StateSet::Zonotope(mapped.minkowski_sum(&model.noise_w)?))
        }
        StateSet::Constrained(c) => {
            // center matrix keeps the constraints; the interval radius and
            // the process noise join as unconstrained generators
            let prod = c.cartesian_product_zonotope(input);
            let mapped = prod.linear_map(&model.m_sigma_interval.center())?;
            let reach = prod.center().abs() + prod.relaxation().abs_generator_row_sums();
            let d = model.m_sigma_interval.radius() * reach;
            let radius_box = Zonotope::from_box(DVector::zeros(n), &d)?;
            let with_radius = mapped.minkowski_sum_zonotope(&radius_box.reduce_order(1.0)?)?;
            Ok(StateSet::Constrained(
                with_radius.minkowski_sum_zonotope(&model.noise_w)?,
            ))
        }
    }
}

/// States consistent with one measurement: the observation is mapped back
/// through the sensor's SVD, and when the sensor is rank deficient the
/// nullspace directions are padded with generators sized
/// `radius(rtilde) + ||V2^T c~||` — enough to cover anything that can
/// survive the subsequent intersection with `rtilde`.
pub fn measurement_zonotope(
    y: &DVector<f64>,
    sensor: &SensorModel,
    rtilde: &StateSet,
) -> Result<Zonotope> {
    let n = sensor.obs_matrix.ncols();
    if y.len() != sensor.output_dim() {
        return Err(Error::Dimension(format!(
            "measurement dim {} vs sensor output dim {}",
            y.len(),
            sensor.output_dim()
        )));
    }
    if rtilde.dim() != n {
        return Err(Error::Dimension(format!(
            "measurement map: set dim {} vs sensor state dim {n}",
            rtilde.dim()
        )));
    }
    let split = svd_split(&sensor.obs_matrix, RANK_REL_TOL)?;
    if split.rank == 0 {
        return Err(Error::RankDeficient(
            "measurement map: observation matrix is zero".into(),
        ));
    }
    let rmap = split.reverse_map();
    let center = &rmap * (y - sensor.noise.center());
    let mapped_noise = &rmap * sensor.noise.generators();

    let nullspace_cols = n - split.rank;
    let mut generators = DMatrix::zeros(n, mapped_noise.ncols() + nullspace_cols);
    generators
        .view_mut((0, 0), (n, mapped_noise.ncols()))
        .copy_from(&mapped_noise);
    if nullspace_cols > 0 {
        let m_bound = rtilde.radius_bound() + (split.v2.transpose() * rtilde.center()).norm();
        generators
            .view_mut((0, mapped_noise.ncols()), (n, nullspace_cols))
            .copy_from(&(&split.v2 * m_bound));
    }
    Zonotope::new(center, generators)
}

/// Reverse-mapping measurement update: intersect the time-updated set with
/// every per-sensor consistent region. Plain zonotopes use the sound
/// over-approximating intersection; constrained zonotopes intersect exactly
/// and report an inconsistency error when the result is empty.
pub fn update_approach1(
    rtilde: &StateSet,
    sensors: &[SensorModel],
    ys: &[DVector<f64>],
) -> Result<StateSet> {
    check_measurements(rtilde, sensors, ys)?;
    match rtilde {
        StateSet::Zonotope(z) => {
            let mut acc = z.clone();
            for (sensor, y) in sensors.iter().zip(ys) {
                let meas = measurement_zonotope(y, sensor, rtilde)?;
                acc = acc.intersect_over_approx(&meas)?;
            }
            Ok(StateSet::Zonotope(acc))
        }
        StateSet::Constrained(c) => {
            let mut acc = c.clone();
            for (sensor, y) in sensors.iter().zip(ys) {
                let meas = measurement_zonotope(y, sensor, rtilde)?;
                acc = acc.intersect(&ConstrainedZonotope::from_zonotope(&meas))?;
            }
            if acc.is_empty()? {
                return Err(Error::EmptySet(
                    "measurement update produced an empty set; a measurement is \
                     inconsistent with the declared noise bounds"
                        .into(),
                ));
            }
            Ok(StateSet::Constrained(acc))
        }
    }
}

/// Optimal gain-like weights: minimize the squared Frobenius norm of the
/// implicit-update generator matrix. Closed form via the normal equations
/// `lambda [C S C^T + N] = S C^T` with `S = G G^T` and `N` the block-diagonal
/// noise Gram matrix; a tiny Tikhonov jitter covers the singular case.
pub fn solve_lambda(
    gen_matrix: &DMatrix<f64>,
    sensors: &[SensorModel],
) -> Result<Vec<DMatrix<f64>>> {
    if sensors.is_empty() {
        return Err(Error::InvalidArgument(
            "lambda optimization needs at least one sensor".into(),
        ));
    }
    let n = gen_matrix.nrows();
    let p_total: usize = sensors.iter().map(|s| s.output_dim()).sum();
    let mut c_stack = DMatrix::zeros(p_total, n);
    let mut noise_gram = DMatrix::zeros(p_total, p_total);
    let mut row = 0;
    for sensor in sensors {
        let p = sensor.output_dim();
        if sensor.obs_matrix.ncols() != n {
            return Err(Error::Dimension(format!(
                "lambda optimization: sensor has {} state columns, set has {n}",
                sensor.obs_matrix.ncols()
            )));
        }
        c_stack
            .view_mut((row, 0), (p, n))
            .copy_from(&sensor.obs_matrix);
        let gram = sensor.noise.generators() * sensor.noise.generators().transpose();
        noise_gram.view_mut((row, row), (p, p)).copy_from(&gram);
        row += p;
    }
    let s = gen_matrix * gen_matrix.transpose();
    let k = &c_stack * &s * c_stack.transpose() + noise_gram;
    let rhs_t = &c_stack * s.transpose();
    let lambda = solve_spd(&k, &rhs_t)?.transpose();

    let mut out = Vec::with_capacity(sensors.len());
    let mut col = 0;
    for sensor in sensors {
        let p = sensor.output_dim();
        out.push(lambda.view((0, col), (n, p)).into_owned());
        col += p;
    }
    Ok(out)
}

/// Implicit measurement update with explicit weights. For zonotopes the
/// result over-approximates the intersection for any weights; for
/// constrained zonotopes it equals the intersection exactly and the weights
/// only shape the generator parameterization.
pub fn update_approach2_with_lambda(
    rtilde: &StateSet,
    sensors: &[SensorModel],
    ys: &[DVector<f64>],
    lambdas: &[DMatrix<f64>],
) -> Result<StateSet> {
    check_measurements(rtilde, sensors, ys)?;
    if lambdas.len() != sensors.len() {
        return Err(Error::Dimension(format!(
            "{} weight blocks for {} sensors",
            lambdas.len(),
            sensors.len()
        )));
    }
    let n = rtilde.dim();
    let g_tilde = rtilde.generator_matrix();
    let c_tilde = rtilde.center();

    let mut center = c_tilde.clone();
    let mut lambda_c = DMatrix::zeros(n, n);
    for ((sensor, y), lambda) in sensors.iter().zip(ys).zip(lambdas) {
        if lambda.shape() != (n, sensor.output_dim()) {
            return Err(Error::Dimension(format!(
                "weight block is {:?}, expected ({n}, {})",
                lambda.shape(),
                sensor.output_dim()
            )));
        }
        let innovation = y - &sensor.obs_matrix * c_tilde - sensor.noise.center();
        center += lambda * innovation;
        lambda_c += lambda * &sensor.obs_matrix;
    }

    let noise_cols: usize = sensors.iter().map(|s| s.noise.num_generators()).sum();
    let mut generators = DMatrix::zeros(n, g_tilde.ncols() + noise_cols);
    generators
        .view_mut((0, 0), (n, g_tilde.ncols()))
        .copy_from(&((DMatrix::identity(n, n) - &lambda_c) * g_tilde));
    let mut col = g_tilde.ncols();
    for (sensor, lambda) in sensors.iter().zip(lambdas) {
        let cols = sensor.noise.num_generators();
        generators
            .view_mut((0, col), (n, cols))
            .copy_from(&(-(lambda * sensor.noise.generators())));
        col += cols;
    }

    match rtilde {
        StateSet::Zonotope(_) => Ok(StateSet::Zonotope(Zonotope::new(center, generators)?)),
        StateSet::Constrained(cz) => {
            // constraints pin the coefficient vector to the measurement
            // equations: [A 0; C^i G v-blocks] [z; d] = [b; y^i - C^i c - c_v]
            let nc = cz.num_constraints();
            let q: usize = sensors.iter().map(|s| s.output_dim()).sum();
            let ng = g_tilde.ncols();
            let mut con_a = DMatrix::zeros(nc + q, ng + noise_cols);
            con_a
                .view_mut((0, 0), (nc, ng))
                .copy_from(cz.constraint_matrix());
            let mut con_b = DVector::zeros(nc + q);
            con_b.rows_mut(0, nc).copy_from(cz.constraint_rhs());
            let mut row = nc;
            let mut ncol = ng;
            for (sensor, y) in sensors.iter().zip(ys) {
                let p = sensor.output_dim();
                let cols = sensor.noise.num_generators();
                con_a
                    .view_mut((row, 0), (p, ng))
                    .copy_from(&(&sensor.obs_matrix * g_tilde));
                con_a
                    .view_mut((row, ncol), (p, cols))
                    .copy_from(sensor.noise.generators());
                con_b
                    .rows_mut(row, p)
                    .copy_from(&(y - &sensor.obs_matrix * c_tilde - sensor.noise.center()));
                row += p;
                ncol += cols;
            }
            Ok(StateSet::Constrained(ConstrainedZonotope::new(
                center, generators, con_a, con_b,
            )?))
        }
    }
}

/// Implicit measurement update with the Frobenius-optimal weights.
pub fn update_approach2(
    rtilde: &StateSet,
    sensors: &[SensorModel],
    ys: &[DVector<f64>],
) -> Result<StateSet> {
    let lambdas = solve_lambda(rtilde.generator_matrix(), sensors)?;
    let updated = update_approach2_with_lambda(rtilde, sensors, ys, &lambdas)?;
    if let StateSet::Constrained(c) = &updated {
        if c.is_empty()? {
            return Err(Error::EmptySet(
                "measurement update produced an empty set; a measurement is \
                 inconsistent with the declared noise bounds"
                    .into(),
            ));
        }
    }
    Ok(updated)
}

fn check_measurements(
    rtilde: &StateSet,
    sensors: &[SensorModel],
    ys: &[DVector<f64>],
) -> Result<()> {
    if sensors.is_empty() {
        return Err(Error::InvalidArgument(
            "measurement update needs at least one sensor".into(),
        ));
    }
    if sensors.len() != ys.len() {
        return Err(Error::Dimension(format!(
            "{} sensors but {} measurements",
            sensors.len(),
            ys.len()
        )));
    }
    for (sensor, y) in sensors.iter().zip(ys) {
        if sensor.obs_matrix.ncols() != rtilde.dim() {
            return Err(Error::Dimension(format!(
                "sensor expects state dim {}, set has {}",
                sensor.obs_matrix.ncols(),
                rtilde.dim()
            )));
        }
        if y.len() != sensor.output_dim() {
            return Err(Error::Dimension(format!(
                "measurement dim {} vs sensor output dim {}",
                y.len(),
                sensor.output_dim()
            )));
        }
    }
    Ok(())
}

/// Per-step estimator output. `measurement_updated` is the set before order
/// reduction (the reduced set feeds the next iteration); `hull` and `radius`
/// describe it.
#[derive(Debug, Clone)]
pub struct StepResult {
    /// 1-based step index.
    pub step: usize,
    pub time_updated: StateSet,
    pub measurement_updated: StateSet,
    pub hull: IntervalVector,
    pub radius: f64,
    pub wall_time: Duration,
}

/// Run the online estimation loop for `K = inputs.len()` steps: time update
/// with the per-step input set, the configured measurement update with that
/// step's measurements, then order reduction. The wall time covers the
/// update-reduce body, not report bookkeeping.
pub fn run_estimator(
    model: &LearnedModelSet,
    sensors: &[SensorModel],
    inputs: &[Zonotope],
    ys: &[Vec<DVector<f64>>],
    x0: &Zonotope,
    cfg: &EstimatorConfig,
) -> Result<Vec<StepResult>> {
    cfg.validate()?;
    if inputs.len() != ys.len() {
        return Err(Error::Dimension(format!(
            "{} input steps but {} measurement steps",
            inputs.len(),
            ys.len()
        )));
    }
    if x0.dim() != model.state_dim() {
        return Err(Error::Dimension(format!(
            "initial set dim {} vs model state dim {}",
            x0.dim(),
            model.state_dim()
        )));
    }
    let mut state = StateSet::from_initial(x0, cfg.representation);
    let mut results = Vec::with_capacity(inputs.len());
    for (idx, (input, y_step)) in inputs.iter().zip(ys).enumerate() {
        let step = idx + 1;
        let with_step = |e: Error| match e {
            Error::EmptySet(msg) => Error::EmptySet(format!("step {step}: {msg}")),
            other => other,
        };
        let start = Instant::now();
        let time_updated = time_update(model, &state, input).map_err(with_step)?;
        let measurement_updated = match cfg.approach {
            Approach::ReverseMapping => {
                update_approach1(&time_updated, sensors, y_step).map_err(with_step)?
            }
            Approach::Implicit => {
                update_approach2(&time_updated, sensors, y_step).map_err(with_step)?
            }
        };
        let reduced = measurement_updated.reduce(cfg).map_err(with_step)?;
        let wall_time = start.elapsed();

        let hull = measurement_updated.interval_hull().map_err(with_step)?;
        let radius = measurement_updated.radius_bound();
        results.push(StepResult {
            step,
            time_updated,
            measurement_updated,
            hull,
            radius,
            wall_time,
        });
        state = reduced;
    }
    Ok(results)
}
