//! Scenario configuration: one TOML file describes the vessel, the sea,
//! the frequency grids, the noise model, the filter, and the run layout.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::estimators::FilterMode;
use crate::spectrum::Taper;
use crate::vessel_model::PhaseMode;
use crate::wave_env::{BretschneiderSpec, FrequencyGrid, VesselConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VesselSection {
    pub length: f64,
    /// Nominal waterline breadth B_0 (prior geometry).
    pub breadth: f64,
    /// Nominal draught.
    pub draught: f64,
    pub cog_x: f64,
    pub cog_z: f64,
    /// Forward speed (m/s).
    pub speed: f64,
    /// Wave heading in degrees; 180 = head seas, 90 = beam seas.
    pub heading_deg: f64,
}

impl Default for VesselSection {
    fn default() -> Self {
        Self {
            length: 7.0,
            breadth: 2.77,
            draught: 0.35,
            cog_x: 2.11,
            cog_z: 0.79,
            speed: 4.0,
            heading_deg: 180.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeaSection {
    pub hs: f64,
    pub tz: f64,
    /// True [breadth, draught] used when synthesizing truth.
    pub eta_truth: [f64; 2],
}

impl Default for SeaSection {
    fn default() -> Self {
        Self {
            hs: 1.25,
            tz: 7.0,
            eta_truth: [1.47, 0.35],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub synthesis_min: f64,
    pub synthesis_max: f64,
    pub synthesis_count: usize,
    pub estimation_min: f64,
    pub estimation_max: f64,
    /// Override for the estimation component count; by default the
    /// synthesis spacing is reused, truncated to the estimation band.
    pub estimation_count: Option<usize>,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            synthesis_min: 0.20,
            synthesis_max: 1.60,
            synthesis_count: 30,
            estimation_min: 0.40,
            estimation_max: 1.50,
            estimation_count: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub r_heave: [f64; 3],
    pub r_pitch: [f64; 3],
    pub q_eta: [f64; 2],
    /// Velocity-uncertainty scale; defaults to Ts / M when absent.
    pub lambda: Option<f64>,
    /// Leading span of measurements used for the magnitude priors.
    pub sample_seconds: f64,
    /// Multiplier applied jointly to the amplitude priors (a_max, x, xdot)
    /// of both channels; the knob the NIS tuner turns.
    pub q_scale: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            r_heave: [1.53e-4, 1.79e-4, 8.40e-4],
            r_pitch: [8.95e-6, 2.25e-6, 8.40e-6],
            q_eta: crate::noise_model::Q_ETA_DEFAULT,
            lambda: None,
            sample_seconds: 10.0,
            q_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSection {
    pub mode: FilterModeKey,
    pub phase_mode: PhaseModeKey,
    /// Initial per-state variance of the regular blocks.
    pub state_var: f64,
    /// Initial variance of [breadth, draught].
    pub eta_var: [f64; 2],
    pub use_pitch: bool,
    /// Rebuild the process noise each step at the current parameter estimate.
    pub adaptive_q: bool,
    /// Tune the process-noise scale against the NIS before estimating.
    pub auto_tune: bool,
}

impl Default for FilterSection {
    fn default() -> Self {
        Self {
            mode: FilterModeKey::Srckf,
            phase_mode: PhaseModeKey::Estimated,
            state_var: 100.0,
            eta_var: [0.25, 0.05],
            use_pitch: true,
            adaptive_q: true,
            auto_tune: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterModeKey {
    Srckf,
    Baseline,
}

impl From<FilterModeKey> for FilterMode {
    fn from(k: FilterModeKey) -> Self {
        match k {
            FilterModeKey::Srckf => FilterMode::Srckf,
            FilterModeKey::Baseline => FilterMode::BaselineKf,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseModeKey {
    Zero,
    Oracle,
    Hold,
    /// Per-component phases estimated from the measurements before the
    /// filter run (complex projection of the measurement-implied
    /// excitation at each encountered frequency).
    Estimated,
}

impl From<PhaseModeKey> for PhaseMode {
    fn from(k: PhaseModeKey) -> Self {
        match k {
            PhaseModeKey::Zero => PhaseMode::Zero,
            PhaseModeKey::Oracle => PhaseMode::Oracle,
            PhaseModeKey::Hold => PhaseMode::Hold,
            // Estimated phases are resolved into concrete component phases
            // before the filter runs; the transition then reads them the
            // same way the oracle mode does.
            PhaseModeKey::Estimated => PhaseMode::Oracle,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub ts: f64,
    pub duration: f64,
    pub seed: u64,
    pub n_runs: usize,
    /// Worker threads for Monte Carlo runs; 0 = library default.
    pub parallelism: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            ts: 0.04,
            duration: 90.0,
            seed: 1841,
            n_runs: 10,
            parallelism: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    pub taper: TaperKey,
    /// Leading seconds dropped before the spectral analysis so the filter
    /// transient does not bias the amplitudes.
    pub warmup_seconds: f64,
    /// Combine heave- and pitch-derived spectra by inverse-variance
    /// averaging instead of using heave alone.
    pub combine_channels: bool,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self {
            taper: TaperKey::Hann,
            warmup_seconds: 20.0,
            combine_channels: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaperKey {
    Hann,
    Rect,
}

impl From<TaperKey> for Taper {
    fn from(k: TaperKey) -> Self {
        match k {
            TaperKey::Hann => Taper::Hann,
            TaperKey::Rect => Taper::Rect,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

/// A complete scenario; every field has a head-seas default.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub vessel: VesselSection,
    pub sea: SeaSection,
    pub grid: GridSection,
    pub noise: NoiseSection,
    pub filter: FilterSection,
    pub run: RunSection,
    pub spectrum: SpectrumSection,
    pub output: OutputSection,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let scenario: Scenario =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{e}")))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<()> {
        self.vessel_prior().validate().map_err(config_err)?;
        self.vessel_truth()
            .and_then(|v| v.validate())
            .map_err(config_err)?;
        BretschneiderSpec::new(self.sea.hs, self.sea.tz).map_err(config_err)?;
        if self.run.ts <= 0.0 || self.run.duration <= 0.0 {
            return Err(Error::Config("ts and duration must be positive".into()));
        }
        if self.grid.estimation_min < self.grid.synthesis_min
            || self.grid.estimation_max > self.grid.synthesis_max
        {
            return Err(Error::Config(
                "estimation band must lie inside the synthesis band".into(),
            ));
        }
        self.synthesis_grid()?;
        if self.estimation_grid()?.len() < 2 {
            return Err(Error::Config("estimation grid has fewer than 2 bins".into()));
        }
        Ok(())
    }

    pub fn heading(&self) -> f64 {
        self.vessel.heading_deg.to_radians()
    }

    /// Vessel at the nominal (prior) geometry.
    pub fn vessel_prior(&self) -> VesselConfig {
        VesselConfig {
            length: self.vessel.length,
            breadth: self.vessel.breadth,
            draught: self.vessel.draught,
            cog_x: self.vessel.cog_x,
            cog_z: self.vessel.cog_z,
            speed: self.vessel.speed,
            heading: self.heading(),
        }
    }

    /// Vessel at the true [breadth, draught] used for synthesis.
    pub fn vessel_truth(&self) -> Result<VesselConfig> {
        self.vessel_prior().with_eta(self.sea.eta_truth)
    }

    pub fn bretschneider(&self) -> Result<BretschneiderSpec> {
        BretschneiderSpec::new(self.sea.hs, self.sea.tz)
    }

    pub fn synthesis_grid(&self) -> Result<FrequencyGrid> {
        FrequencyGrid::uniform(
            self.grid.synthesis_min,
            self.grid.synthesis_max,
            self.grid.synthesis_count,
        )
    }

    /// Estimation grid: synthesis spacing truncated to the estimation band
    /// unless an explicit count re-divides the band.
    pub fn estimation_grid(&self) -> Result<FrequencyGrid> {
        match self.grid.estimation_count {
            Some(n) => {
                FrequencyGrid::uniform(self.grid.estimation_min, self.grid.estimation_max, n)
            }
            None => self
                .synthesis_grid()?
                .truncate(self.grid.estimation_min, self.grid.estimation_max),
        }
    }

    /// Uniform prior ranges for the initial parameter estimate:
    /// B ~ U[B0/2, 2 B0/3], T ~ U[CoG_z/8, CoG_z].
    pub fn eta_prior_range(&self) -> ([f64; 2], [f64; 2]) {
        let b0 = self.vessel.breadth;
        let cg = self.vessel.cog_z;
        ([b0 / 2.0, 2.0 * b0 / 3.0], [cg / 8.0, cg])
    }

    pub fn steps(&self) -> usize {
        (self.run.duration / self.run.ts).round() as usize
    }
}

fn config_err(e: Error) -> Error {
    Error::Config(e.to_string())
}
