use seastate::config::Scenario;
use seastate::simharness;

#[test]
#[ignore]
fn probe_mc_seeds() {
    for seed in [1841u64] {
        let mut scenario = Scenario::default();
        scenario.run.seed = seed;
        let s = simharness::run_mc(&scenario).unwrap();
        let n = s.rmse_srckf.len();
        let viol_s = (11..n).filter(|&k| s.rmse_srckf[k] < s.sqrt_pcrlb[k]).count();
        let viol_b = (11..n).filter(|&k| s.rmse_baseline[k] < s.sqrt_pcrlb[k]).count();
        println!(
            "seed={seed}: hs={:.4} tzI={:.3} tzII={:.3} T={:.4} viol_s={viol_s} viol_b={viol_b} excl={}",
            s.mean_hs, s.mean_tz_visual, s.mean_tz_moment, s.mean_terminal_eta[1], s.excluded_runs
        );
    }
}
