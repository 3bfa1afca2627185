use seastate::config::Scenario;
use seastate::estimators::FilterMode;
use seastate::simharness;

#[test]
#[ignore]
fn probe_scale_quality() {
    for scale in [0.003, 0.001, 0.0003] {
        let mut scenario = Scenario::default();
        scenario.noise.q_scale = scale;
        let (mut hs, mut tp, mut nis, mut tz2) = (0.0, 0.0, 0.0, 0.0);
        for run in 0..10 {
            let d = simharness::prepare_run(&scenario, run).unwrap();
            let out = simharness::estimate_run(
                &scenario,
                &d.frames,
                d.components_est.clone(),
                d.grid_est.clone(),
                d.eta0,
                FilterMode::Srckf,
                Some(scenario.sea.eta_truth),
            )
            .unwrap();
            let n = out.trace.mean_nis_tail(1.0 / 3.0);
            println!(
                "  scale={scale} run{run}: hs={:.3} tp={:.2} tzII={:.2} nis={:.2} T=[{:.3}->{:.3}]",
                out.sea.hs, out.sea.tp, out.sea.tz_moment, n, d.eta0[1],
                out.trace.terminal_eta().unwrap()[1],
            );
            hs += out.sea.hs; tp += out.sea.tp; nis += n; tz2 += out.sea.tz_moment;
        }
        println!(
            "scale={scale}: mean hs={:.3} tp={:.2} tzI={:.3} tzII={:.3} nis={:.2}",
            hs / 10.0, tp / 10.0, tp / 14.1, tz2 / 10.0, nis / 10.0
        );
    }
}
