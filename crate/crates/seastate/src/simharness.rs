//! Synthetic truth propagation, measurement generation, CSV ingestion and
//! the Monte Carlo campaign driver.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;
use std::io::BufRead;
use std::path::Path;

use crate::config::Scenario;
use crate::error::{Error, Result};
use crate::estimators::{self, EstimateTrace, EtaBox, FilterMode, FilterSetup};
use crate::noise_model::{self, NoiseConfig, TuneReport};
use crate::pcrlb;
use crate::spectrum::{self, SeaParameters, SpectrumEstimate};
use crate::vessel_model::{
    continuous_ss, foh_discretize, pseudo_coeffs, MotionChannel,
};
use crate::wave_env::{
    self, doppler_encounter, forcing_heave, forcing_pitch, sample_components, BretschneiderSpec,
    FrequencyGrid, VesselConfig, WaveComponent,
};

/// One time-stamped motion measurement; pitch is optional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasurementFrame {
    pub t: f64,
    /// Position (m), velocity (m/s), acceleration (m/s^2).
    pub heave: [f64; 3],
    /// Position (rad), velocity (rad/s), acceleration (rad/s^2).
    pub pitch: Option<[f64; 3]>,
}

/// Check that frames are strictly increasing in time with constant period
/// `ts` (1e-6 relative tolerance).
pub fn validate_frame_timing(frames: &[MeasurementFrame], ts: f64) -> Result<()> {
    for (i, pair) in frames.windows(2).enumerate() {
        let dt = pair[1].t - pair[0].t;
        if ((dt - ts) / ts).abs() > 1e-6 {
            return Err(Error::Data(format!(
                "irregular sample period {dt} (expected {ts}) between frames {} and {}",
                i,
                i + 1
            )));
        }
    }
    Ok(())
}

/// Noise-free truth of one motion channel over k = 1..=steps.
#[derive(Debug, Clone)]
pub struct ChannelTruth {
    /// Model output (position, velocity, acceleration) per step.
    pub clean: Vec<[f64; 3]>,
    /// Summed irregular excitation per step.
    pub excitation: Vec<f64>,
}

/// Deterministic synthetic truth of the wave-vessel system.
#[derive(Debug, Clone)]
pub struct TruthRecord {
    pub ts: f64,
    pub eta: [f64; 2],
    pub vessel: VesselConfig,
    pub components: Vec<WaveComponent>,
    pub heave: ChannelTruth,
    pub pitch: ChannelTruth,
}

impl TruthRecord {
    pub fn steps(&self) -> usize {
        self.heave.excitation.len()
    }

    /// Summed excitation restricted to components with wave frequency in
    /// [lo, hi], from the closed-form sinusoids.
    pub fn excitation_band(
        &self,
        channel: MotionChannel,
        lo: f64,
        hi: f64,
    ) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.steps()];
        for c in &self.components {
            if c.omega < lo || c.omega > hi {
                continue;
            }
            let p = match channel {
                MotionChannel::Heave => forcing_heave(c.omega, &self.vessel)?,
                MotionChannel::Pitch => forcing_pitch(c.omega, &self.vessel)?,
            };
            let amp = c.amplitude * p;
            let omega_e = doppler_encounter(c.omega, &self.vessel);
            let phase = c.phase + channel.phase_offset();
            for (k, v) in out.iter_mut().enumerate() {
                *v += amp * (omega_e * (k + 1) as f64 * self.ts + phase).sin();
            }
        }
        Ok(out)
    }
}

fn propagate_channel(
    components: &[WaveComponent],
    vessel: &VesselConfig,
    ts: f64,
    steps: usize,
    channel: MotionChannel,
) -> Result<ChannelTruth> {
    let mut clean = vec![[0.0; 3]; steps];
    let mut excitation = vec![0.0; steps];
    for c in components {
        let forcing = match channel {
            MotionChannel::Heave => forcing_heave(c.omega, vessel)?,
            MotionChannel::Pitch => forcing_pitch(c.omega, vessel)?,
        };
        let amp = c.amplitude * forcing;
        let omega_e = doppler_encounter(c.omega, vessel);
        let phase = c.phase + channel.phase_offset();
        let coeffs = pseudo_coeffs(c.omega, vessel)?;
        let ss = continuous_ss(&coeffs)?;
        let foh = foh_discretize(&ss, ts)?;

        // Start from rest: the vessel state is zero and only the excitation
        // is live at k = 0. The resulting start-up transient rings the
        // system's natural modes, which is what makes the geometry
        // observable to the joint estimator.
        let mut x = nalgebra::Vector2::zeros();
        let mut p = amp * phase.sin();
        for k in 1..=steps {
            x = foh.a_k * x + foh.b_k * p;
            p = amp * (omega_e * k as f64 * ts + phase).sin();
            let y = foh.g_k * x + foh.j_k * p;
            let row = &mut clean[k - 1];
            row[0] += y[0];
            row[1] += y[1];
            row[2] += y[2];
            excitation[k - 1] += p;
        }
    }
    Ok(ChannelTruth { clean, excitation })
}

/// Sample components from the spectrum and propagate both channels
/// deterministically (no process noise enters the truth).
pub fn generate_truth(
    spec: &BretschneiderSpec,
    grid: &FrequencyGrid,
    vessel_truth: &VesselConfig,
    ts: f64,
    duration: f64,
    seed: u64,
) -> Result<TruthRecord> {
    let components = sample_components(spec, grid, seed)?;
    let steps = (duration / ts).round() as usize;
    let heave = propagate_channel(&components, vessel_truth, ts, steps, MotionChannel::Heave)?;
    let pitch = propagate_channel(&components, vessel_truth, ts, steps, MotionChannel::Pitch)?;
    Ok(TruthRecord {
        ts,
        eta: vessel_truth.eta(),
        vessel: vessel_truth.clone(),
        components,
        heave,
        pitch,
    })
}

/// Add zero-mean Gaussian noise to the truth outputs. Pass `None` for
/// `r_pitch` to emit heave-only frames.
pub fn generate_measurements(
    truth: &TruthRecord,
    r_heave: [f64; 3],
    r_pitch: Option<[f64; 3]>,
    seed: u64,
) -> Result<Vec<MeasurementFrame>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = |v: f64| -> Result<Normal<f64>> {
        Normal::new(0.0, v.max(0.0).sqrt())
            .map_err(|e| Error::Domain(format!("invalid noise variance {v}: {e}")))
    };
    let heave_dists = [dist(r_heave[0])?, dist(r_heave[1])?, dist(r_heave[2])?];
    let pitch_dists = match r_pitch {
        Some(r) => Some([dist(r[0])?, dist(r[1])?, dist(r[2])?]),
        None => None,
    };
    let mut frames = Vec::with_capacity(truth.steps());
    for k in 0..truth.steps() {
        let mut heave = truth.heave.clean[k];
        for (v, d) in heave.iter_mut().zip(&heave_dists) {
            *v += d.sample(&mut rng);
        }
        let pitch = pitch_dists.as_ref().map(|dists| {
            let mut p = truth.pitch.clean[k];
            for (v, d) in p.iter_mut().zip(dists) {
                *v += d.sample(&mut rng);
            }
            p
        });
        frames.push(MeasurementFrame {
            t: (k + 1) as f64 * truth.ts,
            heave,
            pitch,
        });
    }
    Ok(frames)
}

const HEAVE_UNITS: &str = "m,m/s,m/s2";
const PITCH_UNITS: &str = "rad,rad/s,rad/s2";

/// Write frames in the CSV dialect that `ingest_csv` reads back
/// bit-identically.
pub fn write_measurements_csv<W: std::io::Write>(
    frames: &[MeasurementFrame],
    mut out: W,
) -> Result<()> {
    let has_pitch = frames.iter().all(|f| f.pitch.is_some()) && !frames.is_empty();
    writeln!(out, "# seastate measurements")?;
    writeln!(out, "# units: t=s heave={HEAVE_UNITS}")?;
    if has_pitch {
        writeln!(out, "# units: pitch={PITCH_UNITS}")?;
    }
    if has_pitch {
        writeln!(
            out,
            "t,heave_pos,heave_vel,heave_acc,pitch_pos,pitch_vel,pitch_acc"
        )?;
    } else {
        writeln!(out, "t,heave_pos,heave_vel,heave_acc")?;
    }
    for f in frames {
        write!(out, "{},{},{},{}", f.t, f.heave[0], f.heave[1], f.heave[2])?;
        if let Some(p) = f.pitch {
            write!(out, ",{},{},{}", p[0], p[1], p[2])?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Parse a measurement CSV: '#' metadata lines must declare units, the
/// header names a time column plus 3 or 6 motion columns, and the sample
/// period must be constant to 1e-6 relative.
pub fn ingest_csv(path: &Path) -> Result<Vec<MeasurementFrame>> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    let reader = std::io::BufReader::new(file);

    let mut heave_units = None;
    let mut pitch_units = None;
    let mut header: Option<(usize, Vec<String>)> = None;
    let mut frames: Vec<MeasurementFrame> = Vec::new();
    let mut ts: Option<f64> = None;

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::Data(format!("line {lineno}: {e}")))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(meta) = trimmed.strip_prefix('#') {
            if let Some(units) = meta.trim().strip_prefix("units:") {
                for decl in units.split_whitespace() {
                    if let Some(u) = decl.strip_prefix("heave=") {
                        heave_units = Some(u.to_string());
                    } else if let Some(u) = decl.strip_prefix("pitch=") {
                        pitch_units = Some(u.to_string());
                    }
                }
            }
            continue;
        }
        let cols: Vec<&str> = trimmed.split(',').collect();
        let Some((ncols, _)) = &header else {
            if cols.len() != 4 && cols.len() != 7 {
                return Err(Error::Data(format!(
                    "line {lineno}: header must name 4 or 7 columns, found {}",
                    cols.len()
                )));
            }
            match heave_units.as_deref() {
                Some(HEAVE_UNITS) => {}
                Some(other) => {
                    return Err(Error::Data(format!(
                        "line {lineno}: heave units '{other}' do not match '{HEAVE_UNITS}'"
                    )))
                }
                None => {
                    return Err(Error::Data(format!(
                        "line {lineno}: missing '# units:' declaration for heave"
                    )))
                }
            }
            if cols.len() == 7 {
                match pitch_units.as_deref() {
                    Some(PITCH_UNITS) => {}
                    Some(other) => {
                        return Err(Error::Data(format!(
                            "line {lineno}: pitch units '{other}' do not match '{PITCH_UNITS}'"
                        )))
                    }
                    None => {
                        return Err(Error::Data(format!(
                            "line {lineno}: missing '# units:' declaration for pitch"
                        )))
                    }
                }
            }
            header = Some((cols.len(), cols.iter().map(|s| s.to_string()).collect()));
            continue;
        };
        if cols.len() != *ncols {
            return Err(Error::Data(format!(
                "line {lineno}: expected {ncols} columns, found {}",
                cols.len()
            )));
        }
        let mut vals = Vec::with_capacity(cols.len());
        for (ci, c) in cols.iter().enumerate() {
            vals.push(c.parse::<f64>().map_err(|e| {
                Error::Data(format!("line {lineno}: column {}: {e}", ci + 1))
            })?);
        }
        let frame = MeasurementFrame {
            t: vals[0],
            heave: [vals[1], vals[2], vals[3]],
            pitch: (vals.len() == 7).then(|| [vals[4], vals[5], vals[6]]),
        };
        if let Some(prev) = frames.last() {
            let dt = frame.t - prev.t;
            match ts {
                None => {
                    if dt <= 0.0 {
                        return Err(Error::Data(format!(
                            "line {lineno}: non-increasing timestamp"
                        )));
                    }
                    ts = Some(dt);
                }
                Some(t0) => {
                    if ((dt - t0) / t0).abs() > 1e-6 {
                        return Err(Error::Data(format!(
                            "line {lineno}: timestamp gap {dt} s (expected {t0} s)"
                        )));
                    }
                }
            }
        }
        frames.push(frame);
    }
    if header.is_none() {
        return Err(Error::Data("no header row found".into()));
    }
    Ok(frames)
}

/// Shared setup of a filter run built from a scenario.
#[allow(clippy::too_many_arguments)]
/// Estimate per-component excitation phases from the heave measurements.
///
/// The heave position series is fit jointly by least squares against the
/// sin/cos pair of every component's encountered frequency; the fitted
/// quadrature pair, rotated back through the component's steady-state
/// response phase at the supplied geometry, gives the excitation phase.
/// The joint solve matters: adjacent encountered frequencies are barely
/// resolved by the record length, and independent projections leak power
/// between neighbours, which corrupts the phases of the small
/// high-frequency components. Used to resolve the `estimated` phase mode
/// before a filter run.
pub fn estimate_phases(
    frames: &[MeasurementFrame],
    components: &[WaveComponent],
    vessel: &VesselConfig,
    eta: [f64; 2],
    ts: f64,
) -> Result<Vec<f64>> {
    if frames.is_empty() {
        return Err(Error::Data("phase estimation needs measurements".into()));
    }
    let mut geom = vessel.clone();
    geom.breadth = eta[0];
    geom.draught = eta[1];
    let m_hat = 2.0 * eta[1] / wave_env::GRAVITY;
    let n = components.len();
    let rows = frames.len();
    let y = DVector::from_iterator(rows, frames.iter().map(|f| f.heave[0]));

    // Design matrix: [sin(w_e t), cos(w_e t)] per component.
    let mut x = DMatrix::zeros(rows, 2 * n);
    for (i, c) in components.iter().enumerate() {
        let omega_e = doppler_encounter(c.omega, vessel);
        for j in 0..rows {
            let t = (j + 1) as f64 * ts;
            x[(j, 2 * i)] = (omega_e * t).sin();
            x[(j, 2 * i + 1)] = (omega_e * t).cos();
        }
    }
    // Ridge term: a Gaussian prior on each quadrature coefficient scaled
    // by the component's expected output amplitude. When the record is
    // shorter than the beat period of adjacent encountered frequencies the
    // plain normal equations are near-singular (beam seas: the encounter
    // spacing drops below the Fourier resolution of the record) and the
    // unregularised coefficients explode in cancelling pairs; the prior
    // caps them at physical scale.
    let mut xtx = x.transpose() * &x;
    let xty = x.transpose() * y;
    let r_pos = 1e-4; // heave position noise scale (m^2); sets ridge strength
    for (i, c) in components.iter().enumerate() {
        let omega_e = doppler_encounter(c.omega, vessel);
        let coeffs = pseudo_coeffs(c.omega, &geom)?;
        let re = 1.0 - coeffs.mass * omega_e * omega_e;
        let im = coeffs.damping * omega_e;
        let gain = (re * re + im * im).sqrt().recip();
        let p = wave_env::forcing_heave(c.omega, &geom)?;
        let out_amp = (c.amplitude * p * gain).max(1e-6);
        let ridge = r_pos / (out_amp * out_amp / 2.0);
        xtx[(2 * i, 2 * i)] += ridge;
        xtx[(2 * i + 1, 2 * i + 1)] += ridge;
    }
    let coef = xtx
        .cholesky()
        .ok_or_else(|| {
            Error::Conditioning("phase regression design is rank deficient".into())
        })?
        .solve(&xty);

    let mut phases = Vec::with_capacity(n);
    for (i, c) in components.iter().enumerate() {
        // a sin(wt + phi) = a cos(phi) sin(wt) + a sin(phi) cos(wt); the
        // fitted output phase lags the excitation by the response phase
        // arg 1/(1 - M w_e^2 + i C w_e) of the unit-stiffness oscillator.
        let out_phase = coef[2 * i + 1].atan2(coef[2 * i]);
        let c_hat = pseudo_coeffs(c.omega, &geom)?.damping;
        let omega_e = doppler_encounter(c.omega, vessel);
        let resp_phase = -(c_hat * omega_e).atan2(1.0 - m_hat * omega_e * omega_e);
        phases.push((out_phase - resp_phase).rem_euclid(std::f64::consts::TAU));
    }
    Ok(phases)
}

pub fn build_setup(
    scenario: &Scenario,
    frames: &[MeasurementFrame],
    components_est: Vec<WaveComponent>,
    grid_est: FrequencyGrid,
    eta0: [f64; 2],
    mode: FilterMode,
    eta_true: Option<[f64; 2]>,
) -> Result<FilterSetup> {
    let mut components_est = components_est;
    let vessel = scenario.vessel_prior();
    let ts = scenario.run.ts;
    let phase_mode = if scenario.filter.phase_mode == crate::config::PhaseModeKey::Estimated {
        let phases = estimate_phases(frames, &components_est, &vessel, eta0, ts)?;
        for (c, ph) in components_est.iter_mut().zip(phases) {
            c.phase = ph;
        }
        crate::vessel_model::PhaseMode::Oracle
    } else {
        scenario.filter.phase_mode.into()
    };
    let sample_len = ((scenario.noise.sample_seconds / ts) as usize)
        .clamp(1, frames.len().max(1));
    let pseudo_mass = 2.0 * vessel.draught / wave_env::GRAVITY;

    let heave_sample: Vec<[f64; 3]> = frames[..sample_len].iter().map(|f| f.heave).collect();
    let mut noise_heave = NoiseConfig::from_measurement_sample(
        &heave_sample,
        ts,
        pseudo_mass,
        scenario.noise.r_heave,
    )?;
    noise_heave.q_eta = scenario.noise.q_eta;
    if let Some(l) = scenario.noise.lambda {
        noise_heave.lambda = l;
    }

    let pitch_sample: Vec<[f64; 3]> = frames[..sample_len]
        .iter()
        .filter_map(|f| f.pitch)
        .collect();
    let mut noise_pitch = if pitch_sample.is_empty() {
        let mut n = noise_heave.clone();
        n.r = scenario.noise.r_pitch;
        n
    } else {
        NoiseConfig::from_measurement_sample(
            &pitch_sample,
            ts,
            pseudo_mass,
            scenario.noise.r_pitch,
        )?
    };
    noise_pitch.q_eta = scenario.noise.q_eta;
    if let Some(l) = scenario.noise.lambda {
        noise_pitch.lambda = l;
    }
    for nc in [&mut noise_heave, &mut noise_pitch] {
        nc.a_max *= scenario.noise.q_scale;
        nc.x_prior *= scenario.noise.q_scale;
        nc.xdot_prior *= scenario.noise.q_scale;
    }

    Ok(FilterSetup {
        components: components_est,
        grid: grid_est,
        vessel: vessel.clone(),
        ts,
        mode,
        phase_mode,
        noise_heave,
        noise_pitch,
        eta0,
        eta0_var: scenario.filter.eta_var,
        state_var: scenario.filter.state_var,
        eta_prior_geom: [vessel.breadth, vessel.cog_z],
        eta_true,
        eta_box: EtaBox {
            b_max: 2.0 * vessel.breadth,
            t_max: vessel.cog_z,
        },
        adaptive_q: scenario.filter.adaptive_q,
    })
}

/// Output of one estimate-plus-spectrum run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: EstimateTrace,
    pub spectrum: SpectrumEstimate,
    pub sea: SeaParameters,
}

/// Recover the wave spectrum from a finished trace: the summed estimated
/// excitation is demodulated jointly at the encountered frequencies, then
/// inverted through the forcing at the estimated geometry. The joint solve
/// matters: the filter trades power freely between components whose
/// encounter frequencies are closer than the record's resolution (large
/// cancelling pairs), so any per-component power readout over-counts while
/// the summed series keeps the correct total.
pub fn spectrum_from_trace(
    scenario: &Scenario,
    trace: &EstimateTrace,
    grid_est: &FrequencyGrid,
) -> Result<(SpectrumEstimate, SeaParameters)> {
    let ts = scenario.run.ts;
    let eta_hat = trace
        .terminal_eta()
        .ok_or_else(|| Error::InsufficientData("empty trace".into()))?;
    let vessel_hat = scenario.vessel_prior().with_eta(eta_hat)?;
    let enc: Vec<f64> = grid_est
        .omegas()
        .iter()
        .map(|&w| doppler_encounter(w, &vessel_hat))
        .collect();

    let skip = ((scenario.spectrum.warmup_seconds / ts) as usize)
        .min(trace.len().saturating_sub(2));
    let series: Vec<f64> = trace.steps[skip..]
        .iter()
        .map(|s| s.excitation_heave)
        .collect();
    let amps = spectrum::joint_demodulation(&series, &enc, ts)?;
    let est =
        spectrum::excitation_to_spectrum(&amps, MotionChannel::Heave, &vessel_hat, grid_est)?;
    let sea = spectrum::sea_parameters(&est)?;
    Ok((est, sea))
}

/// Run the scenario's filter over the frames and recover the spectrum.
pub fn estimate_run(
    scenario: &Scenario,
    frames: &[MeasurementFrame],
    components_est: Vec<WaveComponent>,
    grid_est: FrequencyGrid,
    eta0: [f64; 2],
    mode: FilterMode,
    eta_true: Option<[f64; 2]>,
) -> Result<RunOutput> {
    let setup = build_setup(
        scenario,
        frames,
        components_est,
        grid_est.clone(),
        eta0,
        mode,
        eta_true,
    )?;
    let trace = estimators::run_filter(frames, &setup)?;
    let (spectrum, sea) = spectrum_from_trace(scenario, &trace, &grid_est)?;
    Ok(RunOutput { trace, spectrum, sea })
}

/// Tune (lambda, a_max) against the mean NIS of the replayed run.
pub fn tune_noise(
    scenario: &Scenario,
    frames: &[MeasurementFrame],
    components_est: &[WaveComponent],
    grid_est: &FrequencyGrid,
    eta0: [f64; 2],
) -> Result<(NoiseConfig, TuneReport)> {
    let base = build_setup(
        scenario,
        frames,
        components_est.to_vec(),
        grid_est.clone(),
        eta0,
        FilterMode::Srckf,
        None,
    )?;
    // Bound the replay cost: tune on a prefix long enough for the NIS
    // tail statistic to settle.
    let prefix = ((45.0 / scenario.run.ts) as usize).min(frames.len());
    let evaluate = |cfg: &NoiseConfig| -> Result<f64> {
        let mut setup = base.clone();
        // The pitch channel shares the tuning scale: copy lambda and apply
        // the heave amplitude multiplier to the pitch priors.
        let m = cfg.a_max / base.noise_heave.a_max;
        setup.noise_pitch.lambda = cfg.lambda;
        setup.noise_pitch.a_max *= m;
        setup.noise_pitch.x_prior *= m;
        setup.noise_pitch.xdot_prior *= m;
        setup.noise_heave = cfg.clone();
        let trace = estimators::run_filter(&frames[..prefix], &setup)?;
        Ok(trace.mean_nis_tail(1.0 / 3.0))
    };
    noise_model::tune(
        &base.noise_heave,
        evaluate,
        3.0,
        0.05,
        6,
        !scenario.filter.adaptive_q,
    )
}

/// Aggregated Monte Carlo campaign results.
#[derive(Debug, Clone, Serialize)]
pub struct McSummary {
    pub n_runs: usize,
    pub excluded_runs: usize,
    pub divergences: Vec<String>,
    /// Per-step pooled RMSE of the summed heave excitation.
    pub rmse_srckf: Vec<f64>,
    pub rmse_baseline: Vec<f64>,
    /// Per-step +/- 1 sigma band of the SRCKF excitation error.
    pub sigma_srckf: Vec<f64>,
    /// Per-step sqrt of the mean excitation bound across runs.
    pub sqrt_pcrlb: Vec<f64>,
    pub hs: Vec<f64>,
    pub tz_visual: Vec<f64>,
    pub tz_moment: Vec<f64>,
    pub tp: Vec<f64>,
    pub terminal_eta: Vec<[f64; 2]>,
    pub mean_hs: f64,
    pub mean_tz_visual: f64,
    pub mean_tz_moment: f64,
    pub mean_terminal_eta: [f64; 2],
}

struct McRun {
    srckf_err: Vec<f64>,
    baseline_err: Vec<f64>,
    bound: Vec<f64>,
    sea: SeaParameters,
    terminal_eta: [f64; 2],
}

/// Inputs for one seeded run: truth, noisy frames, in-band estimation
/// components and the drawn initial parameter guess.
pub struct RunData {
    pub truth: TruthRecord,
    pub frames: Vec<MeasurementFrame>,
    pub components_est: Vec<WaveComponent>,
    pub grid_est: FrequencyGrid,
    pub eta0: [f64; 2],
}

/// Generate the seeded truth/measurement/initialisation data of one run.
pub fn prepare_run(scenario: &Scenario, run_idx: usize) -> Result<RunData> {
    let spec = scenario.bretschneider()?;
    let synth_grid = scenario.synthesis_grid()?;
    let grid_est = scenario.estimation_grid()?;
    let vessel_truth = scenario.vessel_truth()?;
    let seed = scenario.run.seed + run_idx as u64;

    let truth = generate_truth(
        &spec,
        &synth_grid,
        &vessel_truth,
        scenario.run.ts,
        scenario.run.duration,
        seed,
    )?;
    let r_pitch = scenario.filter.use_pitch.then_some(scenario.noise.r_pitch);
    let frames = generate_measurements(&truth, scenario.noise.r_heave, r_pitch, seed + 7777)?;

    // Estimation components: truth components inside the band (phases are
    // only consumed in oracle mode).
    let lo = scenario.grid.estimation_min;
    let hi = scenario.grid.estimation_max;
    let components_est: Vec<WaveComponent> = truth
        .components
        .iter()
        .filter(|c| (lo..=hi).contains(&c.omega))
        .cloned()
        .collect();

    let (b_range, t_range) = scenario.eta_prior_range();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 555);
    let eta0 = [
        rng.gen_range(b_range[0]..b_range[1]),
        rng.gen_range(t_range[0]..t_range[1]),
    ];

    Ok(RunData {
        truth,
        frames,
        components_est,
        grid_est,
        eta0,
    })
}

fn mc_single_run(scenario: &Scenario, run_idx: usize) -> Result<McRun> {
    let vessel_truth = scenario.vessel_truth()?;
    let lo = scenario.grid.estimation_min;
    let hi = scenario.grid.estimation_max;
    let RunData {
        truth,
        frames,
        components_est,
        grid_est,
        eta0,
    } = prepare_run(scenario, run_idx)?;

    let out = estimate_run(
        scenario,
        &frames,
        components_est.clone(),
        grid_est.clone(),
        eta0,
        scenario.filter.mode.into(),
        Some(scenario.sea.eta_truth),
    )?;
    let baseline_setup = build_setup(
        scenario,
        &frames,
        components_est.clone(),
        grid_est.clone(),
        eta0,
        FilterMode::BaselineKf,
        Some(scenario.sea.eta_truth),
    )?;
    let baseline = estimators::run_filter(&frames, &baseline_setup)?;

    let bound = pcrlb::run_bound(
        truth.steps(),
        &pcrlb::BoundSetup {
            components: components_est,
            grid: grid_est,
            vessel: vessel_truth.clone(),
            eta_true: scenario.sea.eta_truth,
            ts: scenario.run.ts,
            noise: baseline_setup.noise_heave.clone(),
            state_var: scenario.filter.state_var,
            eta_prior_geom: baseline_setup.eta_prior_geom,
        },
    )?;

    let truth_band = truth.excitation_band(MotionChannel::Heave, lo, hi)?;
    let err = |trace: &EstimateTrace| -> Vec<f64> {
        trace
            .steps
            .iter()
            .zip(&truth_band)
            .map(|(s, &t)| s.excitation_heave - t)
            .collect()
    };

    Ok(McRun {
        srckf_err: err(&out.trace),
        baseline_err: err(&baseline),
        bound,
        sea: out.sea,
        terminal_eta: out.trace.terminal_eta().unwrap(),
    })
}

/// Run the Monte Carlo campaign: independent seeded runs of
/// truth -> measurements -> both filters -> spectrum, aggregated into
/// pooled RMSE curves with the averaged excitation bound for overlay.
/// Diverged runs are excluded and counted.
pub fn run_mc(scenario: &Scenario) -> Result<McSummary> {
    let n_runs = scenario.run.n_runs;
    if n_runs < 2 {
        return Err(Error::Config("Monte Carlo needs n_runs >= 2".into()));
    }
    // Tune the process-noise scale once, on the first run's data, and
    // apply the resulting amplitude multiplier to every run.
    let mut scenario = scenario.clone();
    if scenario.filter.auto_tune {
        let data = prepare_run(&scenario, 0)?;
        let (_, report) = tune_noise(
            &scenario,
            &data.frames,
            &data.components_est,
            &data.grid_est,
            data.eta0,
        )?;
        scenario.noise.q_scale *= report.amp_scale;
        if !scenario.filter.adaptive_q {
            scenario.noise.lambda = Some(report.lambda);
        }
        scenario.filter.auto_tune = false;
    }
    let scenario = &scenario;
    let results: Vec<(usize, Result<McRun>)> = if scenario.run.parallelism == 1 {
        (0..n_runs).map(|r| (r, mc_single_run(scenario, r))).collect()
    } else {
        (0..n_runs)
            .into_par_iter()
            .map(|r| (r, mc_single_run(scenario, r)))
            .collect()
    };

    let mut runs = Vec::new();
    let mut divergences = Vec::new();
    for (idx, res) in results {
        match res {
            Ok(run) => runs.push(run),
            Err(Error::Divergence {
                step,
                channel,
                detail,
            }) => divergences.push(format!(
                "run {idx}: diverged at step {step} ({}): {detail}",
                channel.unwrap_or_else(|| "heave".into())
            )),
            Err(e) => return Err(e),
        }
    }
    if runs.is_empty() {
        return Err(Error::Divergence {
            step: 0,
            channel: None,
            detail: "all Monte Carlo runs diverged".into(),
        });
    }

    let steps = runs[0].srckf_err.len();
    let nr = runs.len() as f64;
    let mut rmse_srckf = vec![0.0; steps];
    let mut rmse_baseline = vec![0.0; steps];
    let mut sigma_srckf = vec![0.0; steps];
    let mut sqrt_pcrlb = vec![0.0; steps];
    for k in 0..steps {
        let mut s2 = 0.0;
        let mut b2 = 0.0;
        let mut mean_e = 0.0;
        let mut bnd = 0.0;
        for run in &runs {
            s2 += run.srckf_err[k] * run.srckf_err[k];
            b2 += run.baseline_err[k] * run.baseline_err[k];
            mean_e += run.srckf_err[k];
            bnd += run.bound[k];
        }
        rmse_srckf[k] = (s2 / nr).sqrt();
        rmse_baseline[k] = (b2 / nr).sqrt();
        mean_e /= nr;
        sigma_srckf[k] = (s2 / nr - mean_e * mean_e).max(0.0).sqrt();
        sqrt_pcrlb[k] = (bnd / nr).sqrt();
    }

    let hs: Vec<f64> = runs.iter().map(|r| r.sea.hs).collect();
    let tz_visual: Vec<f64> = runs.iter().map(|r| r.sea.tz_visual).collect();
    let tz_moment: Vec<f64> = runs.iter().map(|r| r.sea.tz_moment).collect();
    let tp: Vec<f64> = runs.iter().map(|r| r.sea.tp).collect();
    let terminal_eta: Vec<[f64; 2]> = runs.iter().map(|r| r.terminal_eta).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;

    Ok(McSummary {
        n_runs,
        excluded_runs: divergences.len(),
        divergences,
        mean_hs: mean(&hs),
        mean_tz_visual: mean(&tz_visual),
        mean_tz_moment: mean(&tz_moment),
        mean_terminal_eta: [
            mean(&terminal_eta.iter().map(|e| e[0]).collect::<Vec<_>>()),
            mean(&terminal_eta.iter().map(|e| e[1]).collect::<Vec<_>>()),
        ],
        rmse_srckf,
        rmse_baseline,
        sigma_srckf,
        sqrt_pcrlb,
        hs,
        tz_visual,
        tz_moment,
        tp,
        terminal_eta,
    })
}

impl McSummary {
    /// Per-step CSV of the RMSE curves and the bound.
    pub fn write_steps_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "rmse_srckf", "rmse_baseline", "sigma_srckf", "sqrt_pcrlb"])
            .map_err(|e| Error::Data(e.to_string()))?;
        for k in 0..self.rmse_srckf.len() {
            w.write_record([
                (k + 1).to_string(),
                format!("{:.9e}", self.rmse_srckf[k]),
                format!("{:.9e}", self.rmse_baseline[k]),
                format!("{:.9e}", self.sigma_srckf[k]),
                format!("{:.9e}", self.sqrt_pcrlb[k]),
            ])
            .map_err(|e| Error::Data(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vessel_model::steady_state_phasor;
    use rustfft::num_complex::Complex64;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    fn head_scenario() -> Scenario {
        Scenario::default()
    }

    #[test]
    fn zero_amplitude_spectrum_gives_zero_truth() {
        let s = head_scenario();
        // A spectrum with vanishing Hs produces vanishing amplitudes.
        let spec = BretschneiderSpec::new(1e-12, 7.0).unwrap();
        let truth = generate_truth(
            &spec,
            &s.synthesis_grid().unwrap(),
            &s.vessel_truth().unwrap(),
            0.04,
            5.0,
            3,
        )
        .unwrap();
        assert!(truth.heave.excitation.iter().all(|&p| p.abs() < 1e-9));
        assert!(truth
            .heave
            .clean
            .iter()
            .all(|row| row.iter().all(|v| v.abs() < 1e-9)));
    }

    #[test]
    fn same_seed_same_truth() {
        let s = head_scenario();
        let spec = s.bretschneider().unwrap();
        let grid = s.synthesis_grid().unwrap();
        let vessel = s.vessel_truth().unwrap();
        let a = generate_truth(&spec, &grid, &vessel, 0.04, 10.0, 42).unwrap();
        let b = generate_truth(&spec, &grid, &vessel, 0.04, 10.0, 42).unwrap();
        assert_eq!(a.heave.excitation, b.heave.excitation);
        assert_eq!(a.pitch.clean, b.pitch.clean);
    }

    #[test]
    fn truth_excitation_matches_closed_form() {
        let s = head_scenario();
        let spec = s.bretschneider().unwrap();
        let grid = s.synthesis_grid().unwrap();
        let vessel = s.vessel_truth().unwrap();
        let truth = generate_truth(&spec, &grid, &vessel, 0.04, 20.0, 11).unwrap();
        for (k, &p) in truth.heave.excitation.iter().enumerate() {
            let mut expect = 0.0;
            for c in &truth.components {
                let amp = c.amplitude * forcing_heave(c.omega, &vessel).unwrap();
                let we = doppler_encounter(c.omega, &vessel);
                expect += amp * (we * (k + 1) as f64 * 0.04 + c.phase).sin();
            }
            assert_relative_eq!(p, expect, epsilon = 1e-8);
        }
        // Band restriction over the full band reproduces the total.
        let band = truth
            .excitation_band(MotionChannel::Heave, 0.0, 10.0)
            .unwrap();
        for (a, b) in band.iter().zip(&truth.heave.excitation) {
            assert_relative_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn truth_settles_onto_stationary_response() {
        // The record starts from rest, so early samples carry the natural
        // transient; once it decays the output must match the steady-state
        // phasor solution of the driven oscillator.
        let s = head_scenario();
        let vessel = s.vessel_truth().unwrap();
        let omega = 0.9;
        let ts = 0.04;
        let comp = WaveComponent {
            omega,
            amplitude: 0.3,
            phase: 1.1,
        };
        let truth =
            propagate_channel(&[comp.clone()], &vessel, ts, 4000, MotionChannel::Heave)
                .unwrap();

        let amp = comp.amplitude * forcing_heave(omega, &vessel).unwrap();
        let omega_e = doppler_encounter(omega, &vessel);
        let coeffs = pseudo_coeffs(omega, &vessel).unwrap();
        let foh = foh_discretize(&continuous_ss(&coeffs).unwrap(), ts).unwrap();
        let z = steady_state_phasor(&foh.a_k, &foh.b_k, omega_e, ts);
        // Stationary position output: the FOH feedthrough couples the
        // excitation into every output row, so include g row 1 and j[0].
        let y_phasor = Complex64::new(foh.g_k[(0, 0)], 0.0) * z[0]
            + Complex64::new(foh.g_k[(0, 1)], 0.0) * z[1]
            + Complex64::new(foh.j_k[0], 0.0);
        let expected = |k: usize| {
            let e = Complex64::from_polar(1.0, omega_e * (k + 1) as f64 * ts + comp.phase);
            amp * (y_phasor * e).im
        };

        // Early on the transient must be visible ...
        let early_err: f64 = (0..100)
            .map(|k| (truth.clean[k][0] - expected(k)).abs())
            .fold(0.0, f64::max);
        assert!(early_err > 1e-3, "no start-up transient: {early_err}");
        // ... and fully decayed near the end of the record.
        for k in 3900..4000 {
            assert_relative_eq!(
                truth.clean[k][0],
                expected(k),
                epsilon = 1e-9,
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn noise_free_measurements_equal_truth() {
        let s = head_scenario();
        let truth = generate_truth(
            &s.bretschneider().unwrap(),
            &s.synthesis_grid().unwrap(),
            &s.vessel_truth().unwrap(),
            0.04,
            5.0,
            7,
        )
        .unwrap();
        let frames =
            generate_measurements(&truth, [0.0; 3], Some([0.0; 3]), 9).unwrap();
        for (k, f) in frames.iter().enumerate() {
            assert_eq!(f.heave, truth.heave.clean[k]);
            assert_eq!(f.pitch.unwrap(), truth.pitch.clean[k]);
        }
    }

    #[test]
    fn measurement_noise_covariance_statistics() {
        let s = head_scenario();
        let truth = generate_truth(
            &s.bretschneider().unwrap(),
            &s.synthesis_grid().unwrap(),
            &s.vessel_truth().unwrap(),
            0.04,
            // 1e5 frames at 25 Hz.
            4000.0,
            13,
        )
        .unwrap();
        let r = s.noise.r_heave;
        let frames = generate_measurements(&truth, r, None, 17).unwrap();
        for i in 0..3 {
            let var: f64 = frames
                .iter()
                .zip(&truth.heave.clean)
                .map(|(f, c)| (f.heave[i] - c[i]).powi(2))
                .sum::<f64>()
                / frames.len() as f64;
            assert_relative_eq!(var, r[i], max_relative = 0.05);
        }
    }

    #[test]
    fn beam_seas_pitch_is_pure_noise() {
        let mut s = head_scenario();
        s.vessel.heading_deg = 90.0;
        let truth = generate_truth(
            &s.bretschneider().unwrap(),
            &s.synthesis_grid().unwrap(),
            &s.vessel_truth().unwrap(),
            0.04,
            5.0,
            5,
        )
        .unwrap();
        assert!((s.vessel_truth().unwrap().heading - FRAC_PI_2).abs() < 1e-12);
        assert!(truth
            .pitch
            .clean
            .iter()
            .all(|row| row.iter().all(|v| v.abs() < 1e-12)));
        assert!(truth.pitch.excitation.iter().all(|&p| p.abs() < 1e-12));
    }

    #[test]
    fn csv_round_trip_is_bit_identical() {
        let s = head_scenario();
        let truth = generate_truth(
            &s.bretschneider().unwrap(),
            &s.synthesis_grid().unwrap(),
            &s.vessel_truth().unwrap(),
            0.04,
            3.0,
            23,
        )
        .unwrap();
        let frames =
            generate_measurements(&truth, s.noise.r_heave, Some(s.noise.r_pitch), 29).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let mut buf = Vec::new();
        write_measurements_csv(&frames, &mut buf).unwrap();
        std::fs::write(&path, &buf).unwrap();
        let back = ingest_csv(&path).unwrap();
        assert_eq!(frames, back);
    }

    #[test]
    fn csv_gap_error_names_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gap.csv");
        let mut text = String::from("# units: t=s heave=m,m/s,m/s2\nt,heave_pos,heave_vel,heave_acc\n");
        for k in 1..=10 {
            let t = if k == 7 { k as f64 * 0.1 + 0.05 } else { k as f64 * 0.1 };
            text.push_str(&format!("{t},0,0,0\n"));
        }
        std::fs::write(&path, text).unwrap();
        let err = ingest_csv(&path).unwrap_err().to_string();
        assert!(err.contains("line 9"), "unexpected message: {err}");
    }

    #[test]
    fn csv_unit_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.csv");
        std::fs::write(
            &path,
            "# units: t=s heave=ft,ft/s,ft/s2\nt,heave_pos,heave_vel,heave_acc\n0.1,0,0,0\n",
        )
        .unwrap();
        let err = ingest_csv(&path).unwrap_err().to_string();
        assert!(err.contains("heave units"), "unexpected message: {err}");
    }

    #[test]
    fn frame_timing_validation() {
        let mk = |t: f64| MeasurementFrame {
            t,
            heave: [0.0; 3],
            pitch: None,
        };
        let good = vec![mk(0.04), mk(0.08), mk(0.12)];
        validate_frame_timing(&good, 0.04).unwrap();
        let bad = vec![mk(0.04), mk(0.08), mk(0.16)];
        assert!(validate_frame_timing(&bad, 0.04).is_err());
    }
}
