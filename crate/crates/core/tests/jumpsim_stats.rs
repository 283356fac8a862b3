//! Statistical checks of the jump simulator and readout against closed forms.

use mimqnd::jumpsim::{
    binned_readout, dwell_stats, fit_level_mixture, fit_level_mixture_histogram, jump_detection_stats,
    simulate_ensemble, simulate_trajectory, Histogram, ReadoutModel,
};
use mimqnd::qnd::jump_budget;
use mimqnd::stats::{gaussian_tail, ks_exponential};
use mimqnd::ExperimentParams;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

#[test]
fn first_ground_visits_are_exponential() {
    let p = ExperimentParams::reference_set_1();
    let b = jump_budget(&p).unwrap();
    // windows long enough that the first visit is essentially never censored
    let ens = simulate_ensemble(&p, 20.0 * b.tau_total, 11, 3000, true).unwrap();
    let first: Vec<f64> = ens
        .iter()
        .filter_map(|t| t.events.first().map(|e| e.time))
        .collect();
    assert!(first.len() >= 2990);
    let (d, pv) = ks_exponential(&first, 1.0 / b.tau_total);
    assert!(pv > 0.01, "D = {d}, p = {pv}");
    // a 10% wrong rate is rejected at this sample size
    let (_, p_wrong) = ks_exponential(&first, 1.1 / b.tau_total);
    assert!(p_wrong < 0.01, "{p_wrong}");
}

#[test]
fn ground_exit_rate_within_three_standard_errors() {
    for (p, base) in [
        (ExperimentParams::reference_set_1(), 100),
        (ExperimentParams::reference_set_2(), 200),
    ] {
        let b = jump_budget(&p).unwrap();
        let ens = simulate_ensemble(&p, 5.0 * b.tau_total, base, 4000, true).unwrap();
        let d = dwell_stats(&ens, 0);
        let rate = d.exit_rate().unwrap();
        let se = d.rate_std_error.unwrap();
        assert!(
            (rate - 1.0 / b.tau_total).abs() < 3.0 * se,
            "{rate} vs {} ± {se}",
            1.0 / b.tau_total
        );
    }
}

#[test]
fn thermal_only_exit_rate_matches_thermal_lifetime() {
    let p = ExperimentParams::reference_set_1();
    let b = jump_budget(&p).unwrap();
    let ens = simulate_ensemble(&p, 5.0 * b.tau_thermal, 300, 4000, false).unwrap();
    let d = dwell_stats(&ens, 0);
    let rate = d.exit_rate().unwrap();
    assert!((rate * b.tau_thermal - 1.0).abs() < 3.0 * d.rate_std_error.unwrap() * b.tau_thermal);
}

#[test]
fn readout_noise_variance_matches_psd() {
    // T = 0 without measurement channels keeps the membrane in the ground
    // state; the detector noise does not depend on T
    let model = ReadoutModel::from_params(&ExperimentParams::reference_set_2()).unwrap();
    let mut p = ExperimentParams::reference_set_2();
    p.temperature = 0.0;
    let bin = 1e-4;
    let traj = simulate_trajectory(&p, 1e4 * bin, 5, false).unwrap();
    assert!(traj.events.is_empty());
    let trace = binned_readout(&traj, &model, bin, 6).unwrap();
    assert_eq!(trace.freq_estimates.len(), 10_000);
    let n = trace.freq_estimates.len() as f64;
    let mean = trace.freq_estimates.iter().sum::<f64>() / n;
    let var = trace
        .freq_estimates
        .iter()
        .map(|v| (v - mean).powi(2))
        .sum::<f64>()
        / (n - 1.0);
    let expected = model.s_omega / bin;
    assert!((var / expected - 1.0).abs() < 0.05, "{var} vs {expected}");
    assert!((mean - model.level(0.0)).abs() < 4.0 * (expected / n).sqrt());
}

#[test]
fn false_alarms_follow_gaussian_tail() {
    let model = ReadoutModel::from_params(&ExperimentParams::reference_set_1()).unwrap();
    let mut p = ExperimentParams::reference_set_1();
    p.temperature = 0.0;
    let bin = 2e-4;
    let traj = simulate_trajectory(&p, 2e4 * bin, 1, false).unwrap();
    let trace = binned_readout(&traj, &model, bin, 2).unwrap();
    let sigma = model.noise_std(bin);
    let z = 0.3 * model.delta_omega / sigma;
    let stats = jump_detection_stats(&trace, model.level(0.0) + z * sigma).unwrap();
    let expected = gaussian_tail(z);
    let got = stats.false_alarm_rate.unwrap();
    assert_eq!(stats.excited_bins, 0);
    assert!((got / expected - 1.0).abs() < 0.1, "{got} vs {expected}");
}

/// Detection probability with the threshold `z` bin-noise deviations above
/// the ground level, which fixes the false-alarm rate of jump-free bins.
fn detection_at(p: &ExperimentParams, z: f64, seed: u64) -> f64 {
    let b = jump_budget(p).unwrap();
    let model = ReadoutModel::from_params(p).unwrap();
    let bin = b.tau_total;
    let sigma = model.noise_std(bin);
    let threshold = model.level(0.0) + z * sigma;
    let ens = simulate_ensemble(p, 5.0 * b.tau_total, seed, 4000, true).unwrap();
    let (mut exc, mut hit) = (0.0, 0.0);
    for (i, t) in ens.iter().enumerate() {
        let trace = binned_readout(t, &model, bin, seed + 1_000_000 + i as u64).unwrap();
        let s = jump_detection_stats(&trace, threshold).unwrap();
        exc += s.excited_bins as f64;
        hit += s.detection_probability.unwrap_or(0.0) * s.excited_bins as f64;
    }
    hit / exc
}

#[test]
fn higher_snr_detects_better_at_equal_false_alarms() {
    let z = 0.9;
    let pd1 = detection_at(&ExperimentParams::reference_set_1(), z, 10);
    let pd2 = detection_at(&ExperimentParams::reference_set_2(), z, 20);
    assert!(pd2 > pd1, "set 2 {pd2} vs set 1 {pd1}");
}

#[test]
fn resolvable_levels_are_recovered() {
    // noise a quarter of the level spacing: two clearly separate peaks
    let spacing = 0.1;
    let sigma = spacing / 4.0;
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let noise = Normal::new(0.0, sigma).unwrap();
    let values: Vec<f64> = (0..20_000)
        .map(|i| {
            let n = if i % 3 == 0 { 1.0 } else { 0.0 };
            spacing * (n + 0.5) + noise.sample(&mut rng)
        })
        .collect();
    let fit = fit_level_mixture(&values[..4000], sigma, 2).unwrap();
    assert!((fit.spacing / spacing - 1.0).abs() < 0.05, "{fit:?}");
    assert!((fit.offset / (0.5 * spacing) - 1.0).abs() < 0.05);
    assert!((fit.weights[0] - 2.0 / 3.0).abs() < 0.03);

    let hist = Histogram::new(&values, 400, (-0.1, 0.3));
    let hfit = fit_level_mixture_histogram(&hist, sigma, 3).unwrap();
    assert!((hfit.spacing / spacing - 1.0).abs() < 0.05, "{hfit:?}");
}

#[test]
fn simulated_readout_resolves_levels_with_quiet_detector() {
    // set 2 dynamics with a detector 16x quieter than shot noise allows
    let p = ExperimentParams::reference_set_2();
    let b = jump_budget(&p).unwrap();
    let mut model = ReadoutModel::from_params(&p).unwrap();
    model.s_omega /= 16.0;
    let bin = b.tau_total / 4.0;
    let sigma = model.noise_std(bin);
    let range = (-5.0 * sigma, 10.0 * b.delta_omega);
    let ens = simulate_ensemble(&p, 2.0 * b.tau_total, 40, 5000, true).unwrap();
    let mut hist = Histogram::new(&[], 800, range);
    for (i, t) in ens.iter().enumerate() {
        let trace = binned_readout(t, &model, bin, 50_000 + i as u64).unwrap();
        // bins without a jump inside
        let steady: Vec<f64> = trace
            .freq_estimates
            .iter()
            .zip(&trace.true_n_per_bin)
            .filter(|(_, n)| n.fract() == 0.0)
            .map(|(v, _)| *v)
            .collect();
        hist.accumulate(&Histogram::new(&steady, 800, range));
    }
    let fit = fit_level_mixture_histogram(&hist, sigma, 4).unwrap();
    assert!(
        (fit.spacing / b.delta_omega - 1.0).abs() < 0.05,
        "{:+.3}",
        fit.spacing / b.delta_omega - 1.0
    );
}
