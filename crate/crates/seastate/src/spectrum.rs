//! Wave-spectrum recovery: sliding-window harmonic amplitude estimation of
//! the irregular excitation and conversion back to a wave-frequency
//! spectral density with the derived sea parameters.

use rustfft::{num_complex::Complex, FftPlanner};
use serde::Serialize;
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::vessel_model::MotionChannel;
use crate::wave_env::{self, FrequencyGrid, VesselConfig};

/// Taper applied to each analysis window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Taper {
    Hann,
    Rect,
}

impl Taper {
    fn weights(self, n: usize) -> Vec<f64> {
        match self {
            Taper::Rect => vec![1.0; n],
            Taper::Hann => (0..n)
                .map(|i| 0.5 * (1.0 - (TAU * i as f64 / n as f64).cos()))
                .collect(),
        }
    }
}

/// Sliding-window layout for the excitation FFT.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowPlan {
    pub window_samples: usize,
    pub hop_samples: usize,
    pub ts: f64,
}

impl WindowPlan {
    pub fn seconds(&self) -> f64 {
        self.window_samples as f64 * self.ts
    }
}

/// Window seconds resolving both the lowest encountered frequency and the
/// tightest encountered spacing: 2*pi / min(min omega_e, min delta omega_e).
pub fn window_seconds(omega_enc: &[f64]) -> Result<f64> {
    if omega_enc.is_empty() {
        return Err(Error::Domain("empty encountered-frequency grid".into()));
    }
    let mut sorted = omega_enc.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    if sorted[0] <= 0.0 {
        return Err(Error::Domain(format!(
            "encountered frequencies must be positive, got {}",
            sorted[0]
        )));
    }
    let mut scale = sorted[0];
    for pair in sorted.windows(2) {
        let d = pair[1] - pair[0];
        if d <= 0.0 {
            return Err(Error::Domain("duplicate encountered frequencies".into()));
        }
        scale = scale.min(d);
    }
    Ok(TAU / scale)
}

/// Window plan for a signal of `signal_len` samples. Errors when the
/// resolution-driven window does not fit in the signal; `clamp` shortens
/// the window to the signal instead.
pub fn window_length(
    omega_enc: &[f64],
    ts: f64,
    signal_len: usize,
    clamp: bool,
) -> Result<WindowPlan> {
    if ts <= 0.0 {
        return Err(Error::Domain(format!("sample period must be positive, got {ts}")));
    }
    let mut window_samples = (window_seconds(omega_enc)? / ts).ceil() as usize;
    if window_samples > signal_len {
        if clamp {
            window_samples = signal_len;
        } else {
            return Err(Error::InsufficientData(format!(
                "window of {window_samples} samples exceeds signal of {signal_len}"
            )));
        }
    }
    if window_samples < 2 {
        return Err(Error::InsufficientData(format!(
            "window of {window_samples} samples is too short"
        )));
    }
    Ok(WindowPlan {
        window_samples,
        hop_samples: (window_samples / 2).max(1),
        ts,
    })
}

/// Normalized taper gain |W(theta)| / W(0) at `delta` bins off center.
fn taper_gain(weights: &[f64], delta: f64) -> f64 {
    let n = weights.len() as f64;
    let theta = TAU * delta / n;
    let mut re = 0.0;
    let mut im = 0.0;
    for (i, w) in weights.iter().enumerate() {
        let a = theta * i as f64;
        re += w * a.cos();
        im -= w * a.sin();
    }
    let sum: f64 = weights.iter().sum();
    (re * re + im * im).sqrt() / sum
}

/// Averaged single-sided harmonic amplitudes of `series` at the encountered
/// frequencies `omega_enc`, from Hann- (or rect-) tapered windows laid out
/// by `plan`. Each target is read at its nearest DFT bin and corrected by
/// the taper gain at the fractional bin offset.
pub fn sliding_fft(
    series: &[f64],
    plan: &WindowPlan,
    taper: Taper,
    omega_enc: &[f64],
) -> Result<Vec<f64>> {
    let nw = plan.window_samples;
    if series.len() < nw {
        return Err(Error::InsufficientData(format!(
            "series of {} samples is shorter than the {nw}-sample window",
            series.len()
        )));
    }
    let weights = taper.weights(nw);
    let wsum: f64 = weights.iter().sum();
    let bin_width = TAU / (nw as f64 * plan.ts);

    // Resolve each target to (bin index, gain correction) once.
    let mut bins = Vec::with_capacity(omega_enc.len());
    for &w in omega_enc {
        let pos = w / bin_width;
        let k = pos.round() as usize;
        if k == 0 || k >= nw / 2 {
            return Err(Error::Domain(format!(
                "frequency {w} rad/s is outside the resolvable band of the window"
            )));
        }
        let gain = taper_gain(&weights, pos - k as f64);
        if gain < 1e-3 {
            return Err(Error::Domain(format!(
                "taper gain vanishes at frequency {w} rad/s"
            )));
        }
        bins.push((k, gain));
    }

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(nw);
    let mut sums = vec![0.0; omega_enc.len()];
    let mut windows = 0usize;
    let mut start = 0usize;
    while start + nw <= series.len() {
        let chunk = &series[start..start + nw];
        if chunk.iter().all(|v| v.is_nan()) {
            return Err(Error::Data("all-NaN analysis window".into()));
        }
        let mut buf: Vec<Complex<f64>> = chunk
            .iter()
            .zip(&weights)
            .map(|(&x, &w)| Complex::new(x * w, 0.0))
            .collect();
        fft.process(&mut buf);
        for (s, &(k, gain)) in sums.iter_mut().zip(&bins) {
            *s += 2.0 * buf[k].norm() / (wsum * gain);
        }
        windows += 1;
        start += plan.hop_samples;
    }
    Ok(sums.into_iter().map(|s| s / windows as f64).collect())
}

/// Harmonic amplitudes of `series` at the encountered frequencies
/// `omega_enc` by one joint least-squares fit of all sin/cos pairs over the
/// whole record. Unlike a windowed DFT, the joint solve separates
/// frequencies spaced more finely than any practical window resolution
/// (adjacent encounter frequencies in beam seas), as long as the full
/// record length resolves them; a small ridge keeps near-degenerate pairs
/// from exploding.
pub fn joint_demodulation(series: &[f64], omega_enc: &[f64], ts: f64) -> Result<Vec<f64>> {
    let n = series.len();
    let m = omega_enc.len();
    if m == 0 {
        return Ok(Vec::new());
    }
    if n < 2 * m {
        return Err(Error::InsufficientData(format!(
            "{n} samples cannot resolve {m} sinusoid pairs"
        )));
    }
    let mut x = nalgebra::DMatrix::zeros(n, 2 * m);
    for (i, &w) in omega_enc.iter().enumerate() {
        for j in 0..n {
            let a = w * (j + 1) as f64 * ts;
            x[(j, 2 * i)] = a.sin();
            x[(j, 2 * i + 1)] = a.cos();
        }
    }
    let y = nalgebra::DVector::from_row_slice(series);
    let mut gram = x.transpose() * &x;
    let ridge = 1e-9 * n as f64;
    for i in 0..2 * m {
        gram[(i, i)] += ridge;
    }
    let rhs = x.transpose() * y;
    let coeffs = gram
        .cholesky()
        .ok_or_else(|| Error::Conditioning("demodulation normal equations are singular".into()))?
        .solve(&rhs);
    Ok((0..m)
        .map(|i| coeffs[2 * i].hypot(coeffs[2 * i + 1]))
        .collect())
}

/// Wave spectral density recovered on a wave-frequency grid, with the bins
/// whose forcing fell below the reliability floor excluded.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumEstimate {
    pub omegas: Vec<f64>,
    pub deltas: Vec<f64>,
    /// Spectral density (m^2 s); zero on excluded bins.
    pub density: Vec<f64>,
    /// Recovered wave amplitudes (m); zero on excluded bins.
    pub amplitudes: Vec<f64>,
    /// Indices of bins excluded because the forcing was below the floor.
    pub excluded: Vec<usize>,
}

/// Forcing magnitude below which a bin cannot be inverted reliably.
pub const FORCING_FLOOR: f64 = 1e-4;

/// Map per-component excitation amplitudes back into a wave spectrum:
/// zeta_n = amp_n / P_channel(omega_n), S(omega_n) = zeta_n^2 / (2 dOmega_n)
/// with the bin widths taken in the wave domain.
pub fn excitation_to_spectrum(
    amps: &[f64],
    channel: MotionChannel,
    vessel: &VesselConfig,
    grid: &FrequencyGrid,
) -> Result<SpectrumEstimate> {
    if amps.len() != grid.len() {
        return Err(Error::Domain(format!(
            "{} amplitudes for a grid of {} components",
            amps.len(),
            grid.len()
        )));
    }
    let mut density = vec![0.0; amps.len()];
    let mut amplitudes = vec![0.0; amps.len()];
    let mut excluded = Vec::new();
    for (n, (&amp, &omega)) in amps.iter().zip(grid.omegas()).enumerate() {
        let p = match channel {
            MotionChannel::Heave => wave_env::forcing_heave(omega, vessel)?,
            MotionChannel::Pitch => wave_env::forcing_pitch(omega, vessel)?,
        };
        if p.abs() < FORCING_FLOOR {
            excluded.push(n);
            continue;
        }
        let zeta = amp / p.abs();
        amplitudes[n] = zeta;
        density[n] = zeta * zeta / (2.0 * grid.deltas()[n]);
    }
    Ok(SpectrumEstimate {
        omegas: grid.omegas().to_vec(),
        deltas: grid.deltas().to_vec(),
        density,
        amplitudes,
        excluded,
    })
}

/// Integral sea parameters of a recovered (or analytic) spectrum.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SeaParameters {
    pub hs: f64,
    pub tp: f64,
    pub tz_visual: f64,
    pub tz_moment: f64,
    pub m0: f64,
    pub m2: f64,
}

/// Ratio between the peak period and the visually estimated zero
/// up-crossing period of a narrow-band sea.
pub const TP_OVER_TZ: f64 = 1.41;

/// Locate the spectral peak by fitting the two-parameter family
/// S(w) = A w^-5 exp(-beta w^-4) to the density and reading its mode
/// wp = (4 beta / 5)^(1/4).
///
/// The family covers the Pierson-Moskowitz/Bretschneider shapes and the
/// fit is linear in (ln A, beta) after taking logs, weighted by the
/// squared density so strong bins dominate. Per-bin estimates scatter by
/// large factors, which makes a raw or interpolated argmax biased toward
/// whichever bin spiked; the fit pools all bins instead. Falls back to
/// the interpolated argmax when the fitted shape is degenerate.
fn peak_frequency(omegas: &[f64], density: &[f64]) -> f64 {
    let n = density.len();
    if n >= 4 {
        // Weighted LS on y = ln S + 5 ln w = c - beta w^-4.
        let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&w, &s) in omegas.iter().zip(density) {
            if s <= 0.0 {
                continue;
            }
            let wt = s * s;
            let x = w.powi(-4);
            let y = s.ln() + 5.0 * w.ln();
            sw += wt;
            sx += wt * x;
            sy += wt * y;
            sxx += wt * x * x;
            sxy += wt * x * y;
        }
        let denom = sw * sxx - sx * sx;
        if denom > 0.0 {
            let beta = -(sw * sxy - sx * sy) / denom;
            if beta > 0.0 {
                let wp = (4.0 * beta / 5.0).powf(0.25);
                if wp >= omegas[0] && wp <= omegas[n - 1] {
                    return wp;
                }
            }
        }
    }
    interpolated_argmax(omegas, density)
}

/// Smoothed, parabolically interpolated argmax of the density.
fn interpolated_argmax(omegas: &[f64], density: &[f64]) -> f64 {
    let n = density.len();
    if n < 3 {
        return omegas[density
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0)];
    }
    let smooth: Vec<f64> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(n - 1);
            density[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    let mut k = 0;
    for (i, &s) in smooth.iter().enumerate() {
        if s > smooth[k] {
            k = i;
        }
    }
    if k == 0 || k == n - 1 {
        return omegas[k];
    }
    // Parabola through (k-1, k, k+1); vertex offset in bin units.
    let (a, b, c) = (smooth[k - 1], smooth[k], smooth[k + 1]);
    let denom = a - 2.0 * b + c;
    let shift = if denom.abs() < 1e-300 {
        0.0
    } else {
        (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
    };
    omegas[k] + shift * 0.5 * (omegas[k + 1] - omegas[k - 1])
}

/// Moments and derived parameters: Hs = 4 sqrt(m0), Tp from the smoothed
/// interpolated peak, Tz-I = Tp / 1.41, Tz-II = 2 pi sqrt(m0 / m2).
pub fn sea_parameters(est: &SpectrumEstimate) -> Result<SeaParameters> {
    if est.omegas.is_empty() {
        return Err(Error::Domain("empty spectrum".into()));
    }
    let mut m0 = 0.0;
    let mut m2 = 0.0;
    for ((&w, &d), &s) in est
        .omegas
        .iter()
        .zip(&est.deltas)
        .zip(&est.density)
    {
        if s < 0.0 {
            return Err(Error::Domain(format!("negative density {s} at {w} rad/s")));
        }
        m0 += s * d;
        m2 += w * w * s * d;
    }
    if m0 <= 0.0 {
        return Err(Error::Domain("degenerate spectrum: m0 = 0".into()));
    }
    let tp = TAU / peak_frequency(&est.omegas, &est.density);
    Ok(SeaParameters {
        hs: 4.0 * m0.sqrt(),
        tp,
        tz_visual: tp / TP_OVER_TZ,
        tz_moment: TAU * (m0 / m2).sqrt(),
        m0,
        m2,
    })
}

/// Write (omega, S) rows as CSV.
pub fn write_spectrum_csv<W: std::io::Write>(est: &SpectrumEstimate, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["omega", "delta", "density", "amplitude", "excluded"])
        .map_err(|e| Error::Data(e.to_string()))?;
    for n in 0..est.omegas.len() {
        w.write_record([
            format!("{:.9e}", est.omegas[n]),
            format!("{:.9e}", est.deltas[n]),
            format!("{:.9e}", est.density[n]),
            format!("{:.9e}", est.amplitudes[n]),
            u8::from(est.excluded.contains(&n)).to_string(),
        ])
        .map_err(|e| Error::Data(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn window_seconds_trivial() {
        // Lowest frequency and spacing both 2 pi -> one second.
        let w = window_seconds(&[TAU, 2.0 * TAU, 3.0 * TAU]).unwrap();
        assert_relative_eq!(w, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn window_plan_contract() {
        let grid: Vec<f64> = (0..10).map(|i| 0.5 + 0.1 * i as f64).collect();
        let plan = window_length(&grid, 0.04, 100_000, false).unwrap();
        assert_eq!(plan.window_samples, (TAU / 0.1 / 0.04).ceil() as usize);
        assert_eq!(plan.hop_samples, plan.window_samples / 2);
    }

    #[test]
    fn window_longer_than_signal_errors_or_clamps() {
        let grid = [0.5, 0.6];
        assert!(matches!(
            window_length(&grid, 0.04, 100, false),
            Err(Error::InsufficientData(_))
        ));
        let plan = window_length(&grid, 0.04, 100, true).unwrap();
        assert_eq!(plan.window_samples, 100);
    }

    fn tone(amp: f64, omega: f64, phase: f64, n: usize, ts: f64) -> Vec<f64> {
        (0..n)
            .map(|i| amp * (omega * i as f64 * ts + phase).sin())
            .collect()
    }

    #[test]
    fn rect_taper_recovers_bin_centered_tone() {
        let ts = 0.05;
        let n = 2000;
        // Bin width 2 pi / (n ts); put the tone exactly on bin 40.
        let omega = TAU * 40.0 / (n as f64 * ts);
        let series = tone(1.7, omega, 0.3, n, ts);
        let plan = WindowPlan {
            window_samples: n,
            hop_samples: n / 2,
            ts,
        };
        let amps = sliding_fft(&series, &plan, Taper::Rect, &[omega]).unwrap();
        assert_relative_eq!(amps[0], 1.7, max_relative = 0.01);
    }

    #[test]
    fn hann_taper_recovers_off_bin_tone() {
        // The gain correction removes the scalloping loss of a tone that
        // falls between bins.
        let ts = 0.04;
        let n = 2500;
        let omega = TAU * 33.37 / (n as f64 * ts);
        let series = tone(0.42, omega, 1.1, n, ts);
        let plan = WindowPlan {
            window_samples: n,
            hop_samples: n / 2,
            ts,
        };
        let amps = sliding_fft(&series, &plan, Taper::Hann, &[omega]).unwrap();
        assert_relative_eq!(amps[0], 0.42, max_relative = 0.01);
    }

    #[test]
    fn three_tones_at_distinct_bins() {
        let ts = 0.05;
        let n = 4000;
        let bw = TAU / (n as f64 * ts);
        let freqs = [30.0 * bw, 45.0 * bw, 80.0 * bw];
        let amps_true = [1.0, 0.5, 0.25];
        let mut series = vec![0.0; n];
        for (a, w) in amps_true.iter().zip(&freqs) {
            for (s, t) in series.iter_mut().zip(tone(*a, *w, 0.7, n, ts)) {
                *s += t;
            }
        }
        let plan = WindowPlan {
            window_samples: n,
            hop_samples: n / 2,
            ts,
        };
        let amps = sliding_fft(&series, &plan, Taper::Hann, &freqs).unwrap();
        for (got, want) in amps.iter().zip(&amps_true) {
            assert_relative_eq!(got, want, max_relative = 0.02);
        }
    }

    #[test]
    fn zero_signal_zero_amplitudes() {
        let plan = WindowPlan {
            window_samples: 500,
            hop_samples: 250,
            ts: 0.04,
        };
        let amps = sliding_fft(&vec![0.0; 1000], &plan, Taper::Hann, &[1.0, 2.0]).unwrap();
        assert!(amps.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn all_nan_window_is_a_data_error() {
        let plan = WindowPlan {
            window_samples: 100,
            hop_samples: 50,
            ts: 0.04,
        };
        assert!(matches!(
            sliding_fft(&vec![f64::NAN; 200], &plan, Taper::Hann, &[2.0]),
            Err(Error::Data(_))
        ));
    }

    fn beam_vessel() -> VesselConfig {
        VesselConfig {
            length: 7.0,
            breadth: 1.47,
            draught: 0.35,
            cog_x: 2.11,
            cog_z: 0.79,
            speed: 4.0,
            heading: FRAC_PI_2,
        }
    }

    #[test]
    fn single_component_spectrum_algebra() {
        let vessel = beam_vessel();
        let grid = FrequencyGrid::new(vec![0.8], vec![0.05]).unwrap();
        let p = wave_env::forcing_heave(0.8, &vessel).unwrap();
        let est =
            excitation_to_spectrum(&[0.3], MotionChannel::Heave, &vessel, &grid).unwrap();
        let zeta = 0.3 / p;
        assert_relative_eq!(est.density[0], zeta * zeta / (2.0 * 0.05), epsilon = 1e-12);
        assert!(est.excluded.is_empty());
    }

    #[test]
    fn pitch_at_beam_seas_is_all_excluded() {
        // Beam seas null the pitch forcing, so no pitch bin is invertible.
        let vessel = beam_vessel();
        let grid = FrequencyGrid::uniform(0.4, 1.5, 5).unwrap();
        let est = excitation_to_spectrum(
            &[0.1; 5],
            MotionChannel::Pitch,
            &vessel,
            &grid,
        )
        .unwrap();
        assert_eq!(est.excluded, vec![0, 1, 2, 3, 4]);
        assert!(est.density.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn delta_spectrum_parameters() {
        let est = SpectrumEstimate {
            omegas: vec![0.9],
            deltas: vec![1.0],
            density: vec![0.04],
            amplitudes: vec![0.0],
            excluded: vec![],
        };
        let p = sea_parameters(&est).unwrap();
        assert_relative_eq!(p.hs, 4.0 * 0.04f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(p.tz_moment, TAU / 0.9, epsilon = 1e-12);
        assert_relative_eq!(p.tp, TAU / 0.9, epsilon = 1e-12);
    }

    #[test]
    fn truncated_bretschneider_moments() {
        // Direct moment computation on the sampled truth spectrum
        // quantifies the truncation bias of the synthesis band.
        let spec = wave_env::BretschneiderSpec::new(1.25, 7.0).unwrap();
        let grid = FrequencyGrid::uniform(0.2, 1.6, 30).unwrap();
        let density: Vec<f64> = grid
            .omegas()
            .iter()
            .map(|&w| wave_env::bretschneider_density(w, &spec).unwrap())
            .collect();
        let est = SpectrumEstimate {
            omegas: grid.omegas().to_vec(),
            deltas: grid.deltas().to_vec(),
            density,
            amplitudes: vec![0.0; grid.len()],
            excluded: vec![],
        };
        let p = sea_parameters(&est).unwrap();
        assert_relative_eq!(p.hs, 1.25, max_relative = 0.03);
        assert_relative_eq!(p.tz_moment, 7.0, max_relative = 0.15);
    }

    #[test]
    fn peak_tie_goes_to_lowest_frequency() {
        let est = SpectrumEstimate {
            omegas: vec![0.5, 0.7, 0.9],
            deltas: vec![0.1; 3],
            density: vec![1.0, 1.0, 0.5],
            amplitudes: vec![0.0; 3],
            excluded: vec![],
        };
        let p = sea_parameters(&est).unwrap();
        assert_relative_eq!(p.tp, TAU / 0.5, epsilon = 1e-12);
    }

    #[test]
    fn sea_parameters_scale_covariance() {
        let grid = FrequencyGrid::uniform(0.3, 1.4, 12).unwrap();
        let density: Vec<f64> = grid.omegas().iter().map(|&w| 0.2 / (w * w)).collect();
        let base = SpectrumEstimate {
            omegas: grid.omegas().to_vec(),
            deltas: grid.deltas().to_vec(),
            density: density.clone(),
            amplitudes: vec![0.0; grid.len()],
            excluded: vec![],
        };
        let scaled = SpectrumEstimate {
            density: density.iter().map(|s| 4.0 * s).collect(),
            ..base.clone()
        };
        let p0 = sea_parameters(&base).unwrap();
        let p1 = sea_parameters(&scaled).unwrap();
        assert_relative_eq!(p1.hs, 2.0 * p0.hs, epsilon = 1e-12);
        assert_relative_eq!(p1.tz_moment, p0.tz_moment, epsilon = 1e-12);
        assert_relative_eq!(p1.tz_visual, p0.tz_visual, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_spectrum_errors() {
        let est = SpectrumEstimate {
            omegas: vec![0.5],
            deltas: vec![0.1],
            density: vec![0.0],
            amplitudes: vec![0.0],
            excluded: vec![],
        };
        assert!(sea_parameters(&est).is_err());
    }

    #[test]
    fn no_filter_round_trip_recovers_interior_density() {
        // Synthesize the heave excitation directly from sampled components
        // (beam seas, bin-aligned uniform grid) and push it through the
        // sliding FFT and the spectrum inversion.
        let vessel = beam_vessel();
        let spec = wave_env::BretschneiderSpec::new(1.25, 7.0).unwrap();
        let grid = FrequencyGrid::uniform(0.4, 1.5, 23).unwrap(); // 0.05 spacing
        let comps = wave_env::sample_components(&spec, &grid, 7).unwrap();
        let ts = 0.04;
        let n = 15_000; // 600 s
        let mut series = vec![0.0; n];
        for c in &comps {
            let p = wave_env::forcing_heave(c.omega, &vessel).unwrap();
            for (i, s) in series.iter_mut().enumerate() {
                *s += c.amplitude * p * (c.omega * i as f64 * ts + c.phase).sin();
            }
        }
        let plan = window_length(grid.omegas(), ts, n, false).unwrap();
        let amps = sliding_fft(&series, &plan, Taper::Rect, grid.omegas()).unwrap();
        let est = excitation_to_spectrum(&amps, MotionChannel::Heave, &vessel, &grid).unwrap();
        for i in 2..grid.len() - 2 {
            let truth = wave_env::bretschneider_density(grid.omegas()[i], &spec).unwrap();
            assert_relative_eq!(est.density[i], truth, max_relative = 0.10);
        }
    }
}
