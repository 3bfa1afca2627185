//! Wave spectra, irregular-wave synthesis, wave kinematics and
//! hull-geometry forcing functions.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Acceleration due to gravity (m/s^2).
pub const GRAVITY: f64 = 9.8;

/// Two-parameter Bretschneider spectrum of a fully developed sea.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BretschneiderSpec {
    /// Significant wave height (m).
    pub hs: f64,
    /// Zero up-crossing period (s).
    pub tz: f64,
}

impl BretschneiderSpec {
    pub fn new(hs: f64, tz: f64) -> Result<Self> {
        if hs <= 0.0 || tz <= 0.0 {
            return Err(Error::Domain(format!(
                "Bretschneider parameters must be positive (Hs = {hs}, Tz = {tz})"
            )));
        }
        Ok(Self { hs, tz })
    }

    /// Shape coefficient `a` in S(w) = a/w^5 exp(-b/w^4).
    pub fn coeff_a(&self) -> f64 {
        let base = 2.0 * std::f64::consts::PI / self.tz;
        self.hs * self.hs / (4.0 * std::f64::consts::PI) * base.powi(4)
    }

    /// Decay coefficient `b` in S(w) = a/w^5 exp(-b/w^4).
    pub fn coeff_b(&self) -> f64 {
        let base = 2.0 * std::f64::consts::PI / self.tz;
        base.powi(4) / std::f64::consts::PI
    }
}

/// Spectral density (m^2 s) of the Bretschneider spectrum at `omega` (rad/s).
pub fn bretschneider_density(omega: f64, spec: &BretschneiderSpec) -> Result<f64> {
    if omega <= 0.0 {
        return Err(Error::Domain(format!(
            "spectral density requires omega > 0, got {omega}"
        )));
    }
    Ok(spec.coeff_a() / omega.powi(5) * (-spec.coeff_b() / omega.powi(4)).exp())
}

/// One regular harmonic of an irregular sea.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveComponent {
    /// Wave frequency (rad/s).
    pub omega: f64,
    /// Component amplitude (m).
    pub amplitude: f64,
    /// Random phase in [0, 2pi) (rad).
    pub phase: f64,
}

/// Ordered frequency grid with per-component bin widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    omegas: Vec<f64>,
    deltas: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(omegas: Vec<f64>, deltas: Vec<f64>) -> Result<Self> {
        if omegas.is_empty() {
            return Err(Error::Domain("frequency grid is empty".into()));
        }
        if omegas.len() != deltas.len() {
            return Err(Error::Domain(format!(
                "grid has {} frequencies but {} bin widths",
                omegas.len(),
                deltas.len()
            )));
        }
        if omegas[0] <= 0.0 || omegas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain(
                "grid frequencies must be positive and strictly increasing".into(),
            ));
        }
        if deltas.iter().any(|&d| d <= 0.0) {
            return Err(Error::Domain("grid bin widths must be positive".into()));
        }
        Ok(Self { omegas, deltas })
    }

    /// Uniform grid over [min, max] with constant bin width (max-min)/(n-1).
    pub fn uniform(omega_min: f64, omega_max: f64, n: usize) -> Result<Self> {
        if n < 2 || omega_min <= 0.0 || omega_max <= omega_min {
            return Err(Error::Domain(format!(
                "invalid uniform grid [{omega_min}, {omega_max}] with n = {n}"
            )));
        }
        let delta = (omega_max - omega_min) / (n - 1) as f64;
        let omegas: Vec<f64> = (0..n).map(|i| omega_min + i as f64 * delta).collect();
        let deltas = vec![delta; n];
        Self::new(omegas, deltas)
    }

    /// Keep only the bins whose centre frequency lies in [lo, hi].
    pub fn truncate(&self, lo: f64, hi: f64) -> Result<Self> {
        let mut omegas = Vec::new();
        let mut deltas = Vec::new();
        for (&w, &d) in self.omegas.iter().zip(&self.deltas) {
            if w >= lo && w <= hi {
                omegas.push(w);
                deltas.push(d);
            }
        }
        Self::new(omegas, deltas)
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }
}

/// Geometry-dependent coefficients of the vessel response at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HydroCoeffs {
    /// Wave number (1/m).
    pub k_w: f64,
    /// Speed correction factor.
    pub alpha: f64,
    /// Sectional damping approximation.
    pub a_v: f64,
    /// Effective wave number (1/m).
    pub k_e: f64,
    /// Smith correction.
    pub kappa: f64,
    /// Combined response factor.
    pub psi: f64,
}

/// Fixed geometry and kinematics of the vessel; `breadth` and `draught`
/// double as the unknown parameter vector eta = [B, T].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VesselConfig {
    /// Length (m).
    pub length: f64,
    /// Waterline breadth (m).
    pub breadth: f64,
    /// Draught (m).
    pub draught: f64,
    /// Longitudinal centre of gravity (m).
    pub cog_x: f64,
    /// Vertical centre of gravity (m).
    pub cog_z: f64,
    /// Forward speed (m/s).
    pub speed: f64,
    /// Relative heading between vessel motion and wave propagation (rad).
    pub heading: f64,
}

impl VesselConfig {
    pub fn validate(&self) -> Result<()> {
        if self.length <= 0.0 || self.breadth <= 0.0 || self.draught <= 0.0 {
            return Err(Error::Domain(format!(
                "vessel dimensions must be positive (L = {}, B = {}, T = {})",
                self.length, self.breadth, self.draught
            )));
        }
        if self.speed < 0.0 {
            return Err(Error::Domain(format!(
                "forward speed must be non-negative, got {}",
                self.speed
            )));
        }
        check_heading(self.heading)?;
        Ok(())
    }

    /// Copy with the unknown parameters eta = [B, T] replaced.
    pub fn with_eta(&self, eta: [f64; 2]) -> Result<Self> {
        if eta[0] <= 0.0 || eta[1] <= 0.0 {
            return Err(Error::Domain(format!(
                "non-physical parameter vector eta = [{}, {}]",
                eta[0], eta[1]
            )));
        }
        Ok(Self {
            breadth: eta[0],
            draught: eta[1],
            ..*self
        })
    }

    pub fn eta(&self) -> [f64; 2] {
        [self.breadth, self.draught]
    }
}

fn check_heading(beta: f64) -> Result<()> {
    let half_pi = std::f64::consts::FRAC_PI_2;
    if !(half_pi..=std::f64::consts::PI + 1e-12).contains(&beta) {
        return Err(Error::UnsupportedHeading { beta });
    }
    Ok(())
}

/// Draw irregular-wave components from a spectrum over a grid.
///
/// Amplitudes follow the sampling rule amp_n = sqrt(2 dw_n S(w_n)); phases
/// are uniform on [0, 2pi) from a seeded RNG, so the result is
/// bit-reproducible for a fixed seed.
pub fn sample_components(
    spec: &BretschneiderSpec,
    grid: &FrequencyGrid,
    rng_seed: u64,
) -> Result<Vec<WaveComponent>> {
    if grid.is_empty() {
        return Err(Error::Domain("cannot sample from an empty grid".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    grid.omegas()
        .iter()
        .zip(grid.deltas())
        .map(|(&omega, &delta)| {
            let s = bretschneider_density(omega, spec)?;
            Ok(WaveComponent {
                omega,
                amplitude: (2.0 * delta * s).sqrt(),
                phase: rng.gen_range(0.0..std::f64::consts::TAU),
            })
        })
        .collect()
}

/// Doppler shift from wave frequency to the frequency encountered aboard.
pub fn doppler_encounter(omega: f64, vessel: &VesselConfig) -> f64 {
    omega - omega * omega / GRAVITY * vessel.speed * vessel.heading.cos()
}

/// Invert the Doppler shift on the supported heading range [pi/2, pi],
/// where the encounter map is strictly increasing and hence injective.
pub fn inverse_doppler(omega_e: f64, vessel: &VesselConfig) -> Result<f64> {
    check_heading(vessel.heading)?;
    if omega_e < 0.0 {
        return Err(Error::Domain(format!(
            "encountered frequency must be non-negative, got {omega_e}"
        )));
    }
    // omega_e = omega + c omega^2 with c = V |cos beta| / g >= 0.
    let c = vessel.speed * vessel.heading.cos().abs() / GRAVITY;
    if c * omega_e < 1e-12 {
        return Ok(omega_e);
    }
    Ok((-1.0 + (1.0 + 4.0 * c * omega_e).sqrt()) / (2.0 * c))
}

/// Vessel response coefficients at wave frequency `omega`.
pub fn hydro_coeffs(omega: f64, vessel: &VesselConfig) -> Result<HydroCoeffs> {
    if omega <= 0.0 {
        return Err(Error::Domain(format!(
            "hydro coefficients require omega > 0, got {omega}"
        )));
    }
    let k_w = omega * omega / GRAVITY;
    let alpha = 1.0 - vessel.speed * (k_w / GRAVITY).sqrt() * vessel.heading.cos();
    if alpha <= 0.0 {
        return Err(Error::DegenerateKinematics { omega, alpha });
    }
    let b = vessel.breadth;
    let t = vessel.draught;
    let a_v = 2.0 * (k_w * b * alpha * alpha / 2.0).sin() * (-k_w * t * alpha * alpha).exp();
    // Snap beam seas to an exact zero so the pitch channel carries no
    // signal instead of a cos(pi/2) rounding residue.
    let cos_heading = vessel.heading.cos();
    let k_e = if cos_heading.abs() < 1e-12 {
        0.0
    } else {
        (k_w * cos_heading).abs()
    };
    let kappa = (-k_w * t).exp();
    let damping_term = a_v * a_v / (k_w * b * alpha.powi(3));
    let psi = ((1.0 - k_w * t).powi(2) + damping_term * damping_term).sqrt();
    Ok(HydroCoeffs {
        k_w,
        alpha,
        a_v,
        k_e,
        kappa,
        psi,
    })
}

/// sin(x)/x with the removable singularity filled in.
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-6 {
        1.0
    } else {
        x.sin() / x
    }
}

/// Heave forcing function P_tau mapping wave amplitude to heave excitation.
pub fn forcing_heave(omega: f64, vessel: &VesselConfig) -> Result<f64> {
    let h = hydro_coeffs(omega, vessel)?;
    let half = h.k_e * vessel.length / 2.0;
    Ok(2.0 * h.kappa * h.psi * sinc(half))
}

/// Pitch forcing function P_theta; vanishes in beam seas (k_e = 0).
pub fn forcing_pitch(omega: f64, vessel: &VesselConfig) -> Result<f64> {
    let h = hydro_coeffs(omega, vessel)?;
    let l = vessel.length;
    let kel = h.k_e * l;
    if h.k_e == 0.0 {
        return Ok(0.0);
    }
    let x = kel / 2.0;
    let ratio = if kel < 1e-3 {
        // Third-order series of sin(x) - x cos(x) ~ x^3/3 - x^5/30.
        (x.powi(3) / 3.0 - x.powi(5) / 30.0) / (h.k_e * h.k_e * l.powi(3))
    } else {
        (x.sin() - x * x.cos()) / (h.k_e * h.k_e * l.powi(3))
    };
    Ok(24.0 * h.kappa * h.psi * ratio)
}
