//! Square-root cubature Kalman filter, heave-to-pitch measurement fusion,
//! and the baseline linear Kalman filter with known vessel parameters.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::noise_model::{self, NoiseConfig};
use crate::simharness::MeasurementFrame;
use crate::vessel_model::{
    assemble_augmented, AugmentedModel, MotionChannel, PhaseMode, BLOCK_DIM,
};
use crate::wave_env::{FrequencyGrid, VesselConfig, WaveComponent};

/// Gaussian filter state: mean and lower-triangular covariance factor.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    pub mean: DVector<f64>,
    /// Lower-triangular S with covariance S S'.
    pub sqrt_cov: DMatrix<f64>,
}

impl GaussianBelief {
    pub fn new(mean: DVector<f64>, sqrt_cov: DMatrix<f64>) -> Result<Self> {
        if mean.len() != sqrt_cov.nrows() || sqrt_cov.nrows() != sqrt_cov.ncols() {
            return Err(Error::Domain(format!(
                "belief dimensions disagree: mean {} vs factor {}x{}",
                mean.len(),
                sqrt_cov.nrows(),
                sqrt_cov.ncols()
            )));
        }
        Ok(Self { mean, sqrt_cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        &self.sqrt_cov * self.sqrt_cov.transpose()
    }
}

/// The 2n equi-weighted spherical-radial cubature points for dimension n.
#[derive(Debug, Clone, PartialEq)]
pub struct CubatureSet {
    pub points: Vec<DVector<f64>>,
    pub weight: f64,
}

pub fn cubature_points(n: usize) -> Result<CubatureSet> {
    if n == 0 {
        return Err(Error::Domain("cubature dimension must be >= 1".into()));
    }
    let scale = (n as f64).sqrt();
    let mut points = Vec::with_capacity(2 * n);
    for i in 0..n {
        let mut p = DVector::zeros(n);
        p[i] = scale;
        points.push(p.clone());
        p[i] = -scale;
        points.push(p);
    }
    Ok(CubatureSet {
        points,
        weight: 1.0 / (2 * n) as f64,
    })
}

/// Lower-triangular S with S S' = rect rect', via QR of rect' and a
/// non-negative-diagonal sign convention.
pub fn triangularize(rect: &DMatrix<f64>) -> DMatrix<f64> {
    debug_assert!(rect.ncols() >= rect.nrows());
    let qr = rect.transpose().qr();
    let r = qr.r();
    let mut s = r.transpose();
    for i in 0..s.ncols() {
        if s[(i, i)] < 0.0 {
            for j in 0..s.nrows() {
                s[(j, i)] = -s[(j, i)];
            }
        }
    }
    s
}

/// Physical box (0, b_max] x (0, t_max] that cubature points on the
/// parameter block are reflected back into.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaBox {
    pub b_max: f64,
    pub t_max: f64,
}

impl EtaBox {
    pub fn reflect(&self, eta: [f64; 2]) -> [f64; 2] {
        [
            reflect_into(eta[0], self.b_max),
            reflect_into(eta[1], self.t_max),
        ]
    }
}

fn reflect_into(value: f64, hi: f64) -> f64 {
    // Single fold at each edge, then clamp. Points that overshoot by more
    // than the box width would otherwise fold repeatedly and land at
    // effectively arbitrary positions, which injects spurious
    // parameter-to-measurement correlations into the cubature moments.
    let lo = 0.05 * hi;
    let mut v = value;
    if v < lo {
        v = 2.0 * lo - v;
    } else if v > hi {
        v = 2.0 * hi - v;
    }
    v.clamp(lo, hi)
}

/// Per-point system model evaluated inside a filter step.
pub trait StepModel {
    /// Map a cubature point through the transition; may adjust the point
    /// (parameter reflection) before evaluating.
    fn propagate(&self, point: &mut DVector<f64>) -> Result<DVector<f64>>;
    /// Map a predicted point through the measurement model.
    fn measure(&self, point: &mut DVector<f64>) -> Result<Vector3<f64>>;
}

/// Step model backed by the parameter-augmented wave-vessel assembly.
pub struct AugmentedStepModel<'a> {
    pub components: &'a [WaveComponent],
    pub vessel: &'a VesselConfig,
    pub ts: f64,
    pub k: usize,
    pub channel: MotionChannel,
    pub phase_mode: PhaseMode,
    pub eta_box: EtaBox,
}

impl AugmentedStepModel<'_> {
    fn reflect_point(&self, point: &mut DVector<f64>) -> Result<AugmentedModel> {
        let tail = point.len() - 2;
        let eta = self.eta_box.reflect([point[tail], point[tail + 1]]);
        point[tail] = eta[0];
        point[tail + 1] = eta[1];
        assemble_augmented(
            eta,
            self.components,
            self.vessel,
            self.ts,
            self.k,
            self.channel,
            self.phase_mode,
        )
    }
}

impl StepModel for AugmentedStepModel<'_> {
    fn propagate(&self, point: &mut DVector<f64>) -> Result<DVector<f64>> {
        let model = self.reflect_point(point)?;
        Ok(model.apply_transition(point))
    }

    fn measure(&self, point: &mut DVector<f64>) -> Result<Vector3<f64>> {
        let model = self.reflect_point(point)?;
        Ok(model.apply_measurement(point))
    }
}

/// Result of one SRCKF predict/update cycle.
#[derive(Debug, Clone)]
pub struct SrckfStep {
    pub belief: GaussianBelief,
    pub innovation: Vector3<f64>,
    pub nis: f64,
}

/// One square-root cubature Kalman filter cycle.
pub fn srckf_step(
    belief: &GaussianBelief,
    y: &Vector3<f64>,
    model: &dyn StepModel,
    sqrt_q: &DMatrix<f64>,
    sqrt_r: &Matrix3<f64>,
    step: usize,
) -> Result<SrckfStep> {
    let n = belief.dim();
    let scale = (n as f64).sqrt();
    let m = 2 * n;
    let inv_sqrt_m = 1.0 / (m as f64).sqrt();

    // Time update: propagate the prior cubature points.
    let mut propagated = Vec::with_capacity(m);
    let mut pred_mean = DVector::zeros(n);
    for i in 0..n {
        for sign in [1.0, -1.0] {
            let mut point = &belief.mean + belief.sqrt_cov.column(i) * (sign * scale);
            let prop = model.propagate(&mut point)?;
            pred_mean += &prop;
            propagated.push(prop);
        }
    }
    pred_mean /= m as f64;

    let mut spread = DMatrix::zeros(n, m + n);
    for (j, p) in propagated.iter().enumerate() {
        spread
            .column_mut(j)
            .copy_from(&((p - &pred_mean) * inv_sqrt_m));
    }
    spread.view_mut((0, m), (n, n)).copy_from(sqrt_q);
    let sqrt_pred = triangularize(&spread);

    // Measurement update: redraw points from the predicted factor.
    let mut pred_points = Vec::with_capacity(m);
    let mut meas = Vec::with_capacity(m);
    let mut pred_y = Vector3::zeros();
    for i in 0..n {
        for sign in [1.0, -1.0] {
            let mut point = &pred_mean + sqrt_pred.column(i) * (sign * scale);
            let z = model.measure(&mut point)?;
            pred_y += z;
            pred_points.push(point);
            meas.push(z);
        }
    }
    pred_y /= m as f64;

    let mut y_spread = DMatrix::zeros(3, m + 3);
    for (j, z) in meas.iter().enumerate() {
        y_spread
            .column_mut(j)
            .copy_from(&((z - pred_y) * inv_sqrt_m));
    }
    y_spread.view_mut((0, m), (3, 3)).copy_from(sqrt_r);
    let s_yy = triangularize(&y_spread);

    let mut x_spread = DMatrix::zeros(n, m);
    for (j, p) in pred_points.iter().enumerate() {
        x_spread
            .column_mut(j)
            .copy_from(&((p - &pred_mean) * inv_sqrt_m));
    }
    let y_dev = y_spread.view((0, 0), (3, m)).into_owned();
    let sigma_xy = &x_spread * y_dev.transpose();

    // L = Sigma_xy (S_yy S_yy')^-1 through two triangular solves.
    let w = s_yy
        .solve_lower_triangular(&sigma_xy.transpose())
        .ok_or_else(|| Error::Conditioning("singular innovation factor".into()))?;
    let gain = s_yy
        .transpose()
        .solve_upper_triangular(&w)
        .ok_or_else(|| Error::Conditioning("singular innovation factor".into()))?
        .transpose();

    let innovation = y - pred_y;
    let nis = noise_model::nis(
        &DVector::from_iterator(3, innovation.iter().copied()),
        &s_yy,
    )?;

    let post_mean = &pred_mean + &gain * innovation;

    let mut post_spread = DMatrix::zeros(n, m + 3);
    let corrected = &x_spread - &gain * y_dev;
    post_spread.view_mut((0, 0), (n, m)).copy_from(&corrected);
    post_spread
        .view_mut((0, m), (n, 3))
        .copy_from(&(&gain * sqrt_r));
    let post_sqrt = triangularize(&post_spread);

    if post_mean.iter().any(|v| !v.is_finite()) || !nis.is_finite() || nis > 1e6 {
        return Err(Error::Divergence {
            step,
            channel: None,
            detail: format!("non-finite state or NIS = {nis}"),
        });
    }

    Ok(SrckfStep {
        belief: GaussianBelief {
            mean: post_mean,
            sqrt_cov: post_sqrt,
        },
        innovation,
        nis,
    })
}

/// Full-covariance Gaussian belief of the baseline linear filter.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearBelief {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// One linear Kalman predict/update on the known-parameter irregular model.
pub fn kf_step(
    belief: &LinearBelief,
    y: &Vector3<f64>,
    a: &DMatrix<f64>,
    g: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &Matrix3<f64>,
) -> Result<(LinearBelief, Vector3<f64>, f64)> {
    let pred_mean = a * &belief.mean;
    let pred_cov = a * &belief.cov * a.transpose() + q;

    let s = g * &pred_cov * g.transpose() + DMatrix::from_iterator(3, 3, r.iter().copied());
    let s_inv = s
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Conditioning("singular innovation covariance".into()))?;
    let gain = &pred_cov * g.transpose() * &s_inv;

    let pred_y = g * &pred_mean;
    let innovation = Vector3::from_iterator((y - pred_y).iter().copied());
    let nis = (innovation.transpose()
        * Matrix3::from_iterator(s_inv.iter().copied())
        * innovation)[(0, 0)];

    let mean = &pred_mean + &gain * innovation;
    // Joseph form keeps the covariance symmetric positive semi-definite.
    let ikg = DMatrix::identity(pred_mean.len(), pred_mean.len()) - &gain * g;
    let r_dense = DMatrix::from_iterator(3, 3, r.iter().copied());
    let cov = &ikg * pred_cov * ikg.transpose() + &gain * r_dense * gain.transpose();

    Ok((LinearBelief { mean, cov }, innovation, nis))
}

/// One heave-to-pitch fusion cycle: the pitch posterior parameters seed
/// the heave prior, and the fresh heave posterior parameters seed pitch.
#[allow(clippy::too_many_arguments)]
pub fn fuse_step(
    heave: &GaussianBelief,
    pitch: &GaussianBelief,
    y_heave: &Vector3<f64>,
    y_pitch: &Vector3<f64>,
    heave_model: &dyn StepModel,
    pitch_model: &dyn StepModel,
    sqrt_q_heave: &DMatrix<f64>,
    sqrt_q_pitch: &DMatrix<f64>,
    sqrt_r_heave: &Matrix3<f64>,
    sqrt_r_pitch: &Matrix3<f64>,
    step: usize,
) -> Result<(SrckfStep, SrckfStep)> {
    let tail_h = heave.dim() - 2;
    let tail_p = pitch.dim() - 2;

    let mut heave_prior = heave.clone();
    heave_prior.mean[tail_h] = pitch.mean[tail_p];
    heave_prior.mean[tail_h + 1] = pitch.mean[tail_p + 1];

    let heave_step = srckf_step(
        &heave_prior,
        y_heave,
        heave_model,
        sqrt_q_heave,
        sqrt_r_heave,
        step,
    )
    .map_err(|e| tag_channel(e, "heave"))?;

    let mut pitch_prior = pitch.clone();
    pitch_prior.mean[tail_p] = heave_step.belief.mean[tail_h];
    pitch_prior.mean[tail_p + 1] = heave_step.belief.mean[tail_h + 1];

    let pitch_step = srckf_step(
        &pitch_prior,
        y_pitch,
        pitch_model,
        sqrt_q_pitch,
        sqrt_r_pitch,
        step,
    )
    .map_err(|e| tag_channel(e, "pitch"))?;

    Ok((heave_step, pitch_step))
}

fn tag_channel(err: Error, channel: &str) -> Error {
    match err {
        Error::Divergence { step, detail, .. } => Error::Divergence {
            step,
            channel: Some(channel.to_string()),
            detail,
        },
        other => other,
    }
}

/// Which estimator a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterMode {
    /// Joint input-state-parameter SRCKF (fused when pitch is present).
    Srckf,
    /// Linear Kalman filter with the true parameters supplied.
    BaselineKf,
}

/// Everything a filter run needs besides the measurement stream.
#[derive(Debug, Clone)]
pub struct FilterSetup {
    /// Estimation-grid wave components (phases used only in oracle mode).
    pub components: Vec<WaveComponent>,
    /// Estimation grid matching `components`.
    pub grid: FrequencyGrid,
    pub vessel: VesselConfig,
    pub ts: f64,
    pub mode: FilterMode,
    pub phase_mode: PhaseMode,
    pub noise_heave: NoiseConfig,
    pub noise_pitch: NoiseConfig,
    /// Initial parameter estimate (drawn from the priors by the caller).
    pub eta0: [f64; 2],
    /// Initial parameter variance, the variance of the uniform priors.
    pub eta0_var: [f64; 2],
    /// Initial per-state variance of the regular blocks.
    pub state_var: f64,
    /// Geometry prior [B_0, CoG_z] used when assembling the process noise.
    pub eta_prior_geom: [f64; 2],
    /// True parameters; required in baseline mode.
    pub eta_true: Option<[f64; 2]>,
    pub eta_box: EtaBox,
    /// Rebuild the process noise each step at the current parameter
    /// estimate (the amplitude prior and lambda are functions of the
    /// geometry, for which the prior only supplies initial values).
    pub adaptive_q: bool,
}

/// Per-step record of a filter run.
#[derive(Debug, Clone, Serialize)]
pub struct TraceStep {
    pub step: usize,
    pub t: f64,
    /// Reconstructed irregular heave excitation (sum over components).
    pub excitation_heave: f64,
    pub excitation_pitch: Option<f64>,
    pub eta: [f64; 2],
    pub nis_heave: f64,
    pub nis_pitch: Option<f64>,
    pub innovation_heave: [f64; 3],
    /// Posterior standard deviation of the parameter estimates (zero for
    /// the known-parameter baseline).
    pub eta_sigma: [f64; 2],
}

/// Filter run output: per-step posterior summaries.
#[derive(Debug, Clone, Default, Serialize)]
pub struct EstimateTrace {
    pub steps: Vec<TraceStep>,
    /// Heave-channel excitation estimate per component:
    /// `comp_excitation_heave[n][k]` is component n at step k.
    pub comp_excitation_heave: Vec<Vec<f64>>,
}

impl EstimateTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn terminal_eta(&self) -> Option<[f64; 2]> {
        self.steps.last().map(|s| s.eta)
    }

    pub fn mean_nis_tail(&self, fraction: f64) -> f64 {
        if self.steps.is_empty() {
            return f64::NAN;
        }
        let start = ((1.0 - fraction) * self.steps.len() as f64) as usize;
        let tail = &self.steps[start.min(self.steps.len() - 1)..];
        tail.iter().map(|s| s.nis_heave).sum::<f64>() / tail.len() as f64
    }

    /// Write per-step columns as CSV.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "step",
            "t",
            "excitation_heave",
            "excitation_pitch",
            "b_hat",
            "t_hat",
            "nis_heave",
            "nis_pitch",
        ])
        .map_err(|e| Error::Data(e.to_string()))?;
        for s in &self.steps {
            w.write_record([
                s.step.to_string(),
                format!("{:.6}", s.t),
                format!("{:.9e}", s.excitation_heave),
                s.excitation_pitch
                    .map(|v| format!("{v:.9e}"))
                    .unwrap_or_default(),
                format!("{:.9e}", s.eta[0]),
                format!("{:.9e}", s.eta[1]),
                format!("{:.6e}", s.nis_heave),
                s.nis_pitch.map(|v| format!("{v:.6e}")).unwrap_or_default(),
            ])
            .map_err(|e| Error::Data(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Sum of the per-component excitation states in an augmented mean.
pub fn excitation_sum(mean: &DVector<f64>, n_components: usize) -> f64 {
    (0..n_components).map(|n| mean[BLOCK_DIM * n + 2]).sum()
}

fn initial_belief(setup: &FilterSetup) -> GaussianBelief {
    let n = setup.components.len();
    let dim = BLOCK_DIM * n + 2;
    let mut mean = DVector::zeros(dim);
    mean[dim - 2] = setup.eta0[0];
    mean[dim - 1] = setup.eta0[1];
    let mut sqrt = DMatrix::zeros(dim, dim);
    for i in 0..BLOCK_DIM * n {
        sqrt[(i, i)] = setup.state_var.sqrt();
    }
    sqrt[(dim - 2, dim - 2)] = setup.eta0_var[0].sqrt();
    sqrt[(dim - 1, dim - 1)] = setup.eta0_var[1].sqrt();
    GaussianBelief { mean, sqrt_cov: sqrt }
}

fn sqrt_r(noise: &NoiseConfig) -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vector3::new(
        noise.r[0].sqrt(),
        noise.r[1].sqrt(),
        noise.r[2].sqrt(),
    ))
}

/// Run the configured filter over a time-ordered measurement stream.
///
/// Frame `i` is processed as step `k = i + 1`. SRCKF mode fuses heave and
/// pitch when pitch frames are present and degenerates to a single-channel
/// heave SRCKF otherwise. Baseline mode requires the true parameters.
pub fn run_filter(frames: &[MeasurementFrame], setup: &FilterSetup) -> Result<EstimateTrace> {
    if frames.is_empty() {
        return Ok(EstimateTrace::default());
    }
    crate::simharness::validate_frame_timing(frames, setup.ts)?;
    let has_pitch = frames.iter().all(|f| f.pitch.is_some());

    match setup.mode {
        FilterMode::Srckf => run_srckf(frames, setup, has_pitch),
        FilterMode::BaselineKf => run_baseline(frames, setup),
    }
}

fn run_srckf(
    frames: &[MeasurementFrame],
    setup: &FilterSetup,
    has_pitch: bool,
) -> Result<EstimateTrace> {
    let n = setup.components.len();
    let q_heave = noise_model::assemble_process_cov(
        &setup.grid,
        setup.eta_prior_geom,
        &setup.noise_heave,
        &setup.vessel,
        setup.ts,
    )?
    .sqrt_dense();
    let q_pitch = noise_model::assemble_process_cov(
        &setup.grid,
        setup.eta_prior_geom,
        &setup.noise_pitch,
        &setup.vessel,
        setup.ts,
    )?
    .sqrt_dense();
    let r_heave = sqrt_r(&setup.noise_heave);
    let r_pitch = sqrt_r(&setup.noise_pitch);

    let mut heave = initial_belief(setup);
    let mut pitch = initial_belief(setup);
    let mut trace = EstimateTrace {
        comp_excitation_heave: vec![Vec::with_capacity(frames.len()); n],
        ..EstimateTrace::default()
    };

    for (i, frame) in frames.iter().enumerate() {
        let k = i + 1;
        let (q_heave_k, q_pitch_k) = if setup.adaptive_q {
            let tail = heave.dim() - 2;
            let eta_hat = setup
                .eta_box
                .reflect([heave.mean[tail], heave.mean[tail + 1]]);
            let lambda = setup.ts * crate::wave_env::GRAVITY / (2.0 * eta_hat[1]);
            let mut nh = setup.noise_heave.clone();
            nh.lambda = lambda;
            let mut np = setup.noise_pitch.clone();
            np.lambda = lambda;
            let qh = noise_model::assemble_process_cov(
                &setup.grid,
                eta_hat,
                &nh,
                &setup.vessel,
                setup.ts,
            )?
            .sqrt_dense();
            let qp = noise_model::assemble_process_cov(
                &setup.grid,
                eta_hat,
                &np,
                &setup.vessel,
                setup.ts,
            )?
            .sqrt_dense();
            (qh, qp)
        } else {
            (q_heave.clone(), q_pitch.clone())
        };
        let heave_model = AugmentedStepModel {
            components: &setup.components,
            vessel: &setup.vessel,
            ts: setup.ts,
            k,
            channel: MotionChannel::Heave,
            phase_mode: setup.phase_mode,
            eta_box: setup.eta_box,
        };
        let y_h = Vector3::from_column_slice(&frame.heave);

        let (step_h, step_p) = if has_pitch {
            let pitch_model = AugmentedStepModel {
                channel: MotionChannel::Pitch,
                ..heave_model
            };
            let y_p = Vector3::from_column_slice(&frame.pitch.unwrap());
            let (h, p) = fuse_step(
                &heave, &pitch, &y_h, &y_p, &heave_model, &pitch_model, &q_heave_k,
                &q_pitch_k, &r_heave, &r_pitch, k,
            )?;
            (h, Some(p))
        } else {
            let h = srckf_step(&heave, &y_h, &heave_model, &q_heave_k, &r_heave, k)
                .map_err(|e| tag_channel(e, "heave"))?;
            (h, None)
        };

        let tail = step_h.belief.dim() - 2;
        for (c, series) in trace.comp_excitation_heave.iter_mut().enumerate() {
            series.push(step_h.belief.mean[BLOCK_DIM * c + 2]);
        }
        trace.steps.push(TraceStep {
            step: k,
            t: frame.t,
            excitation_heave: excitation_sum(&step_h.belief.mean, n),
            excitation_pitch: step_p
                .as_ref()
                .map(|p| excitation_sum(&p.belief.mean, n)),
            eta: [step_h.belief.mean[tail], step_h.belief.mean[tail + 1]],
            nis_heave: step_h.nis,
            nis_pitch: step_p.as_ref().map(|p| p.nis),
            innovation_heave: [
                step_h.innovation[0],
                step_h.innovation[1],
                step_h.innovation[2],
            ],
            eta_sigma: [
                step_h.belief.sqrt_cov.row(tail).norm(),
                step_h.belief.sqrt_cov.row(tail + 1).norm(),
            ],
        });
        heave = step_h.belief;
        if let Some(p) = step_p {
            pitch = p.belief;
        }
    }
    Ok(trace)
}

fn run_baseline(frames: &[MeasurementFrame], setup: &FilterSetup) -> Result<EstimateTrace> {
    let eta_true = setup
        .eta_true
        .ok_or_else(|| Error::Config("baseline mode requires the true parameters".into()))?;
    let n = setup.components.len();
    let dim = BLOCK_DIM * n;

    let q = noise_model::assemble_process_cov(
        &setup.grid,
        setup.eta_prior_geom,
        &setup.noise_heave,
        &setup.vessel,
        setup.ts,
    )?
    .irregular()
    .dense();
    let r = Matrix3::from_diagonal(&Vector3::new(
        setup.noise_heave.r[0],
        setup.noise_heave.r[1],
        setup.noise_heave.r[2],
    ));

    let mut belief = LinearBelief {
        mean: DVector::zeros(dim),
        cov: DMatrix::identity(dim, dim) * setup.state_var,
    };
    let mut trace = EstimateTrace {
        comp_excitation_heave: vec![Vec::with_capacity(frames.len()); n],
        ..EstimateTrace::default()
    };

    for (i, frame) in frames.iter().enumerate() {
        let k = i + 1;
        let model = assemble_augmented(
            eta_true,
            &setup.components,
            &setup.vessel,
            setup.ts,
            k,
            MotionChannel::Heave,
            setup.phase_mode,
        )?;
        let a = model.irregular_transition_dense();
        let g = model.irregular_measurement_dense();
        let y = Vector3::from_column_slice(&frame.heave);
        let (next, innovation, nis) = kf_step(&belief, &y, &a, &g, &q, &r)?;
        if next.mean.iter().any(|v| !v.is_finite()) || nis > 1e6 {
            return Err(Error::Divergence {
                step: k,
                channel: Some("heave".into()),
                detail: format!("baseline KF NIS = {nis}"),
            });
        }
        for (c, series) in trace.comp_excitation_heave.iter_mut().enumerate() {
            series.push(next.mean[BLOCK_DIM * c + 2]);
        }
        trace.steps.push(TraceStep {
            step: k,
            t: frame.t,
            excitation_heave: excitation_sum(&next.mean, n),
            excitation_pitch: None,
            eta: eta_true,
            nis_heave: nis,
            nis_pitch: None,
            innovation_heave: [innovation[0], innovation[1], innovation[2]],
            eta_sigma: [0.0, 0.0],
        });
        belief = next;
    }
    Ok(trace)
}
