//! Pseudo mass-spring-damper state space for the wave-vessel system:
//! continuous model, first-order-hold discretization, recursive wave
//! excitation, and assembly of the regular, irregular and
//! parameter-augmented transition/measurement matrices.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Matrix3x2, Vector2, Vector3};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wave_env::{self, VesselConfig, WaveComponent, GRAVITY};

/// Number of unknown vessel parameters (breadth, draught).
pub const ETA_DIM: usize = 2;
/// States per regular wave component: displacement, velocity, excitation.
pub const BLOCK_DIM: usize = 3;

/// Pseudo mass and damping of the surrogate oscillator (stiffness
/// normalized to one).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudoCoeffs {
    /// Pseudo mass coefficient (s^2).
    pub mass: f64,
    /// Pseudo damping coefficient (s).
    pub damping: f64,
}

/// M = 2T/g and C = g A_v^2 / (B w^3 alpha^3) at wave frequency `omega`.
pub fn pseudo_coeffs(omega: f64, vessel: &VesselConfig) -> Result<PseudoCoeffs> {
    let h = wave_env::hydro_coeffs(omega, vessel)?;
    let mass = 2.0 * vessel.draught / GRAVITY;
    let damping =
        GRAVITY * h.a_v * h.a_v / (vessel.breadth * omega.powi(3) * h.alpha.powi(3));
    Ok(PseudoCoeffs { mass, damping })
}

/// Continuous-time state space of one oscillator with position, velocity
/// and acceleration outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousSS {
    pub a: Matrix2<f64>,
    pub b: Vector2<f64>,
    pub g: Matrix3x2<f64>,
    pub j: Vector3<f64>,
}

pub fn continuous_ss(coeffs: &PseudoCoeffs) -> Result<ContinuousSS> {
    if coeffs.mass <= 0.0 {
        return Err(Error::Domain(format!(
            "pseudo mass must be positive, got {}",
            coeffs.mass
        )));
    }
    let m = coeffs.mass;
    let c = coeffs.damping;
    Ok(ContinuousSS {
        a: Matrix2::new(0.0, 1.0, -1.0 / m, -c / m),
        b: Vector2::new(0.0, 1.0 / m),
        g: Matrix3x2::new(1.0, 0.0, 0.0, 1.0, -1.0 / m, -c / m),
        j: Vector3::new(0.0, 0.0, 1.0 / m),
    })
}

/// Closed-form matrix exponential of a 2x2 matrix.
///
/// Uses exp(A) = exp(tr/2) (cosh(mu) I + sinh(mu)/mu (A - tr/2 I)) with
/// mu^2 = tr^2/4 - det, switching to the trigonometric branch when the
/// discriminant is negative and to a series near zero.
pub fn expm2(m: &Matrix2<f64>) -> Matrix2<f64> {
    let half_tr = 0.5 * (m[(0, 0)] + m[(1, 1)]);
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let disc = half_tr * half_tr - det;
    let n = m - Matrix2::identity() * half_tr;
    let (cosh_mu, sinhc_mu) = if disc.abs() < 1e-12 {
        (1.0 + disc / 2.0, 1.0 + disc / 6.0)
    } else if disc > 0.0 {
        let mu = disc.sqrt();
        (mu.cosh(), mu.sinh() / mu)
    } else {
        let nu = (-disc).sqrt();
        (nu.cos(), nu.sin() / nu)
    };
    (Matrix2::identity() * cosh_mu + n * sinhc_mu) * half_tr.exp()
}

/// First-order-hold discretization of one oscillator block.
#[derive(Debug, Clone, PartialEq)]
pub struct FohDiscrete {
    pub a_k: Matrix2<f64>,
    pub b_k: Vector2<f64>,
    pub g_k: Matrix3x2<f64>,
    pub j_k: Vector3<f64>,
}

pub fn foh_discretize(ss: &ContinuousSS, ts: f64) -> Result<FohDiscrete> {
    if ts <= 0.0 {
        return Err(Error::Discretization(format!(
            "sampling time must be positive, got {ts}"
        )));
    }
    let a_inv = ss
        .a
        .try_inverse()
        .ok_or_else(|| Error::Discretization("singular continuous state matrix".into()))?;
    let a_inv2 = a_inv * a_inv;
    let a_k = expm2(&(ss.a * ts));
    let shifted = a_k - Matrix2::identity();
    let b_k = a_inv2 * shifted * shifted * ss.b / ts;
    let g_k = ss.g;
    let j_k = ss.j + g_k * ((a_inv2 / ts) * shifted - a_inv) * ss.b;
    Ok(FohDiscrete { a_k, b_k, g_k, j_k })
}

/// Recursive propagation factor for a regular sinusoidal excitation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExcitationFactor {
    /// p_k = gamma * p_{k-1}.
    Gamma(f64),
    /// Tangent too close to zero; fall back to p_k = p_{k-1}.
    Hold,
}

impl ExcitationFactor {
    pub fn value(&self) -> f64 {
        match self {
            ExcitationFactor::Gamma(g) => *g,
            ExcitationFactor::Hold => 1.0,
        }
    }
}

/// gamma = cos(w Ts) + sin(w Ts)/tan(w (k-1) Ts + phase), guarding the
/// tangent singularity with a hold sentinel.
pub fn excitation_factor(omega_e: f64, k: usize, ts: f64, phase: f64) -> ExcitationFactor {
    let arg = omega_e * (k as f64 - 1.0) * ts + phase;
    let tan = arg.tan();
    if tan.abs() < 1e-6 {
        return ExcitationFactor::Hold;
    }
    ExcitationFactor::Gamma((omega_e * ts).cos() + (omega_e * ts).sin() / tan)
}

/// One discretized regular wave-vessel block: transition over
/// [x, xdot, p] and the matching measurement rows.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteRegularBlock {
    pub a_r: Matrix3<f64>,
    pub g_r: Matrix3<f64>,
    pub omega_e: f64,
    pub phase: f64,
}

impl DiscreteRegularBlock {
    fn from_parts(foh: &FohDiscrete, gamma: f64, omega_e: f64, phase: f64) -> Self {
        let mut a_r = Matrix3::zeros();
        a_r.fixed_view_mut::<2, 2>(0, 0).copy_from(&foh.a_k);
        a_r.fixed_view_mut::<2, 1>(0, 2).copy_from(&foh.b_k);
        a_r[(2, 2)] = gamma;
        let mut g_r = Matrix3::zeros();
        g_r.fixed_view_mut::<3, 2>(0, 0).copy_from(&foh.g_k);
        g_r.fixed_view_mut::<3, 1>(0, 2).copy_from(&foh.j_k);
        Self {
            a_r,
            g_r,
            omega_e,
            phase,
        }
    }
}

/// Which vertical motion a model instance describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MotionChannel {
    Heave,
    Pitch,
}

impl MotionChannel {
    /// Pitch excitation leads heave by pi/2.
    pub fn phase_offset(&self) -> f64 {
        match self {
            MotionChannel::Heave => 0.0,
            MotionChannel::Pitch => std::f64::consts::FRAC_PI_2,
        }
    }
}

/// How the estimator fills the unknown excitation phase in the
/// transition factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseMode {
    /// All phases zero; the phase error is absorbed by the process noise.
    Zero,
    /// Use the true component phases (validation only).
    Oracle,
    /// Random-walk fallback p_k = p_{k-1}.
    Hold,
}

/// Block-structured transition/measurement model for N regular
/// components with the parameter vector appended as identity dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedModel {
    blocks: Vec<DiscreteRegularBlock>,
}

impl AugmentedModel {
    pub fn component_count(&self) -> usize {
        self.blocks.len()
    }

    /// Augmented state dimension 3N + 2.
    pub fn state_dim(&self) -> usize {
        BLOCK_DIM * self.blocks.len() + ETA_DIM
    }

    /// Irregular (known-parameter) state dimension 3N.
    pub fn irregular_dim(&self) -> usize {
        BLOCK_DIM * self.blocks.len()
    }

    pub fn blocks(&self) -> &[DiscreteRegularBlock] {
        &self.blocks
    }

    /// A_k(eta) x for the augmented state; the eta tail is copied through.
    pub fn apply_transition(&self, x: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(x.len(), self.state_dim());
        let mut out = DVector::zeros(x.len());
        for (n, block) in self.blocks.iter().enumerate() {
            let seg = x.fixed_rows::<3>(BLOCK_DIM * n);
            out.fixed_rows_mut::<3>(BLOCK_DIM * n)
                .copy_from(&(block.a_r * seg));
        }
        let tail = self.irregular_dim();
        out[tail] = x[tail];
        out[tail + 1] = x[tail + 1];
        out
    }

    /// G_k(eta) x; the eta columns are zero.
    pub fn apply_measurement(&self, x: &DVector<f64>) -> Vector3<f64> {
        let mut y = Vector3::zeros();
        for (n, block) in self.blocks.iter().enumerate() {
            let seg = x.fixed_rows::<3>(BLOCK_DIM * n);
            y += block.g_r * seg;
        }
        y
    }

    /// Irregular-model transition on the 3N state (no eta block).
    pub fn apply_irregular_transition(&self, x: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(x.len(), self.irregular_dim());
        let mut out = DVector::zeros(x.len());
        for (n, block) in self.blocks.iter().enumerate() {
            let seg = x.fixed_rows::<3>(BLOCK_DIM * n);
            out.fixed_rows_mut::<3>(BLOCK_DIM * n)
                .copy_from(&(block.a_r * seg));
        }
        out
    }

    /// Dense (3N+2)x(3N+2) transition matrix.
    pub fn transition_dense(&self) -> DMatrix<f64> {
        let dim = self.state_dim();
        let mut a = DMatrix::zeros(dim, dim);
        for (n, block) in self.blocks.iter().enumerate() {
            a.view_mut((BLOCK_DIM * n, BLOCK_DIM * n), (3, 3))
                .copy_from(&block.a_r);
        }
        let tail = self.irregular_dim();
        a[(tail, tail)] = 1.0;
        a[(tail + 1, tail + 1)] = 1.0;
        a
    }

    /// Dense 3x(3N+2) measurement matrix.
    pub fn measurement_dense(&self) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(3, self.state_dim());
        for (n, block) in self.blocks.iter().enumerate() {
            g.view_mut((0, BLOCK_DIM * n), (3, 3)).copy_from(&block.g_r);
        }
        g
    }

    /// Dense 3Nx3N transition of the known-parameter irregular model.
    pub fn irregular_transition_dense(&self) -> DMatrix<f64> {
        let dim = self.irregular_dim();
        let mut a = DMatrix::zeros(dim, dim);
        for (n, block) in self.blocks.iter().enumerate() {
            a.view_mut((BLOCK_DIM * n, BLOCK_DIM * n), (3, 3))
                .copy_from(&block.a_r);
        }
        a
    }

    /// Dense 3x3N measurement of the known-parameter irregular model.
    pub fn irregular_measurement_dense(&self) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(3, self.irregular_dim());
        for (n, block) in self.blocks.iter().enumerate() {
            g.view_mut((0, BLOCK_DIM * n), (3, 3)).copy_from(&block.g_r);
        }
        g
    }
}

/// Build the step-k augmented model for the given parameter vector.
///
/// Each component gets its own discretized oscillator evaluated at the
/// component's wave frequency and the vessel's encountered frequency. The
/// pitch channel shifts every excitation phase by pi/2 relative to heave.
pub fn assemble_augmented(
    eta: [f64; 2],
    components: &[WaveComponent],
    vessel: &VesselConfig,
    ts: f64,
    k: usize,
    channel: MotionChannel,
    phase_mode: PhaseMode,
) -> Result<AugmentedModel> {
    if components.is_empty() {
        return Err(Error::Domain("no wave components to assemble".into()));
    }
    let vessel_eta = vessel.with_eta(eta)?;
    let blocks = components
        .iter()
        .map(|comp| {
            let coeffs = pseudo_coeffs(comp.omega, &vessel_eta)?;
            let ss = continuous_ss(&coeffs)?;
            let foh = foh_discretize(&ss, ts)?;
            let omega_e = wave_env::doppler_encounter(comp.omega, vessel);
            let phase = match phase_mode {
                PhaseMode::Zero => channel.phase_offset(),
                PhaseMode::Oracle => comp.phase + channel.phase_offset(),
                PhaseMode::Hold => 0.0,
            };
            let gamma = match phase_mode {
                PhaseMode::Hold => 1.0,
                _ => excitation_factor(omega_e, k, ts, phase).value(),
            };
            Ok(DiscreteRegularBlock::from_parts(&foh, gamma, omega_e, phase))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AugmentedModel { blocks })
}

/// Discrete steady-state phasor of one oscillator driven by a sampled
/// sinusoid: x_k = Im(z e^{i(w kTs + phi)}) with
/// z = (e^{i w Ts} I - A_k)^{-1} B_k.
pub fn steady_state_phasor(
    a: &Matrix2<f64>,
    b: &Vector2<f64>,
    omega_e: f64,
    ts: f64,
) -> [Complex64; 2] {
    let e = Complex64::from_polar(1.0, omega_e * ts);
    let m00 = e - a[(0, 0)];
    let m01 = Complex64::new(-a[(0, 1)], 0.0);
    let m10 = Complex64::new(-a[(1, 0)], 0.0);
    let m11 = e - a[(1, 1)];
    let det = m00 * m11 - m01 * m10;
    let b0 = Complex64::new(b[0], 0.0);
    let b1 = Complex64::new(b[1], 0.0);
    [(m11 * b0 - m01 * b1) / det, (m00 * b1 - m10 * b0) / det]
}
