use seastate::config::Scenario;
use seastate::estimators::FilterMode;
use seastate::simharness;

#[test]
#[ignore]
fn probe_beam_single() {
    let mut scenario = Scenario::default();
    scenario.vessel.heading_deg = 90.0;
    scenario.filter.use_pitch = false;
    scenario.noise.q_scale = 0.001;
    scenario.run.duration = 180.0;
    let d = simharness::prepare_run(&scenario, 0).unwrap();
    // phase errors first
    let phases = simharness::estimate_phases(
        &d.frames, &d.components_est, &scenario.vessel_prior(), d.eta0, scenario.run.ts,
    ).unwrap();
    let errs: Vec<String> = d.components_est.iter().zip(&phases).map(|(c, &ph)| {
        let mut e = (ph - c.phase) % std::f64::consts::TAU;
        if e > std::f64::consts::PI { e -= std::f64::consts::TAU; }
        if e < -std::f64::consts::PI { e += std::f64::consts::TAU; }
        format!("{:+.2}", e)
    }).collect();
    println!("phase errs: {}", errs.join(" "));
    let out = simharness::estimate_run(
        &scenario, &d.frames, d.components_est.clone(), d.grid_est.clone(),
        d.eta0, FilterMode::Srckf, Some(scenario.sea.eta_truth),
    ).unwrap();
    let n = out.trace.len();
    let maxexc = out.trace.steps.iter().map(|s| s.excitation_heave.abs()).fold(0.0f64, f64::max);
    println!(
        "hs={:.3} nis={:.2} term=[{:.3} {:.3}] max_exc={:.2}",
        out.sea.hs, out.trace.mean_nis_tail(1.0/3.0),
        out.trace.steps[n-1].eta[0], out.trace.steps[n-1].eta[1], maxexc
    );
    let amps: Vec<String> = out.spectrum.amplitudes.iter().map(|a| format!("{:.2}", a)).collect();
    println!("amps: {}", amps.join(" "));
    let dens: Vec<String> = out.spectrum.density.iter().map(|a| format!("{:.2}", a)).collect();
    println!("dens: {}", dens.join(" "));
}

#[test]
#[ignore]
fn probe_beam_mc() {
    let mut scenario = Scenario::default();
    scenario.vessel.heading_deg = 90.0;
    scenario.filter.use_pitch = false;
    scenario.run.duration = 180.0;
    let summary = simharness::run_mc(&scenario).unwrap();
    let viol = summary.rmse_srckf.iter().zip(&summary.sqrt_pcrlb)
        .enumerate().filter(|(i, (r, b))| *i > 10 && *r < *b).count();
    println!(
        "BEAM MC: hs={:.4} tzI={:.3} tzII={:.3} T={:.4} viol={} div={}",
        summary.mean_hs, summary.mean_tz_visual, summary.mean_tz_moment,
        summary.mean_terminal_eta[1], viol, summary.divergences.len()
    );
}

#[test]
#[ignore]
fn probe_beam_scales() {
    for &qs in &[0.01, 0.003, 0.001, 0.0003, 0.0001] {
        let mut scenario = Scenario::default();
        scenario.vessel.heading_deg = 90.0;
        scenario.filter.use_pitch = false;
        scenario.filter.auto_tune = false;
        scenario.noise.q_scale = qs;
        scenario.run.duration = 180.0;
        let mut hs = 0.0;
        let mut nis = 0.0;
        for run in 0..3 {
            let d = simharness::prepare_run(&scenario, run).unwrap();
            let out = simharness::estimate_run(
                &scenario, &d.frames, d.components_est.clone(), d.grid_est.clone(),
                d.eta0, FilterMode::Srckf, Some(scenario.sea.eta_truth),
            ).unwrap();
            hs += out.sea.hs / 3.0;
            nis += out.trace.mean_nis_tail(1.0 / 3.0) / 3.0;
        }
        println!("qs={:.4}: hs={:.3} nis={:.2}", qs, hs, nis);
    }
}

#[test]
#[ignore]
fn probe_beam_power() {
    let mut scenario = Scenario::default();
    scenario.vessel.heading_deg = 90.0;
    scenario.filter.use_pitch = false;
    scenario.filter.auto_tune = false;
    scenario.noise.q_scale = 0.003;
    scenario.run.duration = 180.0;
    let d = simharness::prepare_run(&scenario, 0).unwrap();
    let out = simharness::estimate_run(
        &scenario, &d.frames, d.components_est.clone(), d.grid_est.clone(),
        d.eta0, FilterMode::Srckf, Some(scenario.sea.eta_truth),
    ).unwrap();
    let skip = (20.0 / scenario.run.ts) as usize;
    // truth per-component excitation rms vs estimated per-component rms
    let geom = d.truth.vessel.clone();
    let n_steps = out.trace.len();
    let mut sum_true_p = 0.0;
    let mut sum_est_p = 0.0;
    for (i, c) in d.components_est.iter().enumerate() {
        let p = seastate::wave_env::forcing_heave(c.omega, &geom).unwrap();
        let enc = seastate::wave_env::doppler_encounter(c.omega, &geom);
        let amp_true = (c.amplitude * p).abs();
        let est: &Vec<f64> = &out.trace.comp_excitation_heave[i];
        let ms: f64 = est[skip..].iter().map(|x| x * x).sum::<f64>() / (n_steps - skip) as f64;
        sum_true_p += amp_true * amp_true / 2.0;
        sum_est_p += ms;
        println!(
            "comp {:2} w={:.3} we={:.3} true_rms={:.4} est_rms={:.4}",
            i, c.omega, enc, amp_true / 2f64.sqrt(), ms.sqrt()
        );
    }
    // summed series
    let lo = d.components_est.first().unwrap().omega - 1e-9;
    let hi = d.components_est.last().unwrap().omega + 1e-9;
    let truth_sum = d.truth.excitation_band(
        seastate::vessel_model::MotionChannel::Heave, lo, hi,
    ).unwrap();
    let est_sum: Vec<f64> = out.trace.steps.iter().map(|s| s.excitation_heave).collect();
    let t_ms: f64 = truth_sum[skip..n_steps].iter().map(|x| x * x).sum::<f64>() / (n_steps - skip) as f64;
    let e_ms: f64 = est_sum[skip..].iter().map(|x| x * x).sum::<f64>() / (n_steps - skip) as f64;
    println!(
        "sum-of-comp power: true={:.4} est={:.4}; summed-series power: true={:.4} est={:.4}",
        sum_true_p, sum_est_p, t_ms, e_ms
    );
    println!("hs={:.3}", out.sea.hs);
}
