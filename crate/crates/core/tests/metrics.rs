mod common;

use common::{geometry, median, rel_close};
use dam_core::beamforming::mrt_per_path;
use dam_core::benchmarks::{ofdm_mrt, sp_mrt};
use dam_core::channel::{ofdm_channel, synthesize_channel};
use dam_core::metrics::{
    dam_papr_trial, effective_spectral_efficiency, exceedance_level, ofdm_papr_trial, papr_ccdf,
    qam_constellation, sp_papr_trial, threshold_grid, CcdfCurve, OverheadConfig, PaprConfig, Scheme, SchemeSinr,
};
use num_rational::Ratio;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn overheads_are_exact_ratios() {
    let cfg = OverheadConfig::new(128_000, 512, 80).unwrap();
    assert_eq!(cfg.overhead(Scheme::Dam).unwrap(), Ratio::new(160, 128_000));
    assert_eq!(cfg.overhead(Scheme::StrongestPath).unwrap(), Ratio::new(80, 128_000));
    assert_eq!(cfg.overhead(Scheme::Ofdm).unwrap(), Ratio::new(80, 592));
    assert_eq!(format!("{:.3}%", 100.0 * 160.0 / 128_000.0), "0.125%");
}

#[test]
fn spectral_efficiency_formulas() {
    let cfg = OverheadConfig::new(1000, 4, 3).unwrap();
    let sc = [1.0, 3.0];
    let dam = effective_spectral_efficiency(SchemeSinr::Dam(&sc), &cfg).unwrap();
    assert!(rel_close(dam, 0.994 * 3.0, 1e-12));
    let sp = effective_spectral_efficiency(SchemeSinr::StrongestPath(&sc), &cfg).unwrap();
    assert!(rel_close(sp, 0.997 * 3.0, 1e-12));
    let of = vec![vec![1.0, 3.0, 0.0, 7.0]];
    let got = effective_spectral_efficiency(SchemeSinr::Ofdm(&of), &cfg).unwrap();
    assert!(rel_close(got, (1.0 + 2.0 + 0.0 + 3.0) / 7.0, 1e-12));
}

#[test]
fn median_papr_follows_superposition_count() {
    let cfg = PaprConfig { qam_order: 4, num_trials: 200, samples_per_trial: 512, rng_seed: 17 };
    let geo = geometry(16, &[3, 3, 3], 40, 0);
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| synthesize_channel(&geo.clone().with_seed(rng.next_u64()), 1.0).unwrap();
    let grid = threshold_grid(0.0, 15.0, 31).unwrap();
    let (_, dam) = papr_ccdf(&cfg, &grid, |_, rng| {
        let ch = draw(rng);
        dam_papr_trial(&mrt_per_path(&ch, 1.0)?, &cfg, rng)
    })
    .unwrap();
    let (_, sp) = papr_ccdf(&cfg, &grid, |_, rng| {
        let ch = draw(rng);
        sp_papr_trial(&sp_mrt(&ch, 1.0)?.beams, &cfg, rng)
    })
    .unwrap();
    let (_, ofdm) = papr_ccdf(&cfg, &grid, |_, rng| {
        let ch = draw(rng);
        ofdm_papr_trial(&ofdm_mrt(&ofdm_channel(&ch, 64)?, 1.0)?.beams, &cfg, rng)
    })
    .unwrap();
    let (sp, dam, ofdm) = (median(sp), median(dam), median(ofdm));
    assert!(sp <= dam && dam <= ofdm, "{sp} {dam} {ofdm}");
}

#[test]
fn qam_alphabets_have_unit_energy() {
    for q in [4, 16, 64] {
        let a = qam_constellation(q).unwrap();
        assert_eq!(a.len(), q);
        assert!(rel_close(a.iter().map(|s| s.norm_sqr()).sum::<f64>() / q as f64, 1.0, 1e-12));
    }
}

#[test]
fn single_tap_constant_modulus_is_zero_db() {
    let cfg = PaprConfig { qam_order: 4, num_trials: 5, samples_per_trial: 300, rng_seed: 1 };
    for seed in 0..5 {
        let ch = synthesize_channel(&geometry(1, &[1], 0, seed), 1.0).unwrap();
        let beams = mrt_per_path(&ch, 2.0).unwrap();
        let v = dam_papr_trial(&beams, &cfg, &mut cfg.trial_rng(seed as usize)).unwrap();
        assert!(v.abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn ccdf_monotone_in_unit_range(samples in prop::collection::vec(-5.0f64..20.0, 1..200), lo in -10.0f64..-5.0) {
        let grid = threshold_grid(lo, 25.0, 40).unwrap();
        let c = CcdfCurve::from_samples(&samples, &grid).unwrap();
        prop_assert!(c.probabilities.iter().all(|p| (0.0..=1.0).contains(p)));
        prop_assert!(c.probabilities.windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(c.probabilities[0], 1.0);
        prop_assert_eq!(*c.probabilities.last().unwrap(), 0.0);
    }

    #[test]
    fn exceedance_level_bounds_the_tail(samples in prop::collection::vec(-5.0f64..20.0, 1..300), prob in 0.0f64..0.5) {
        let level = exceedance_level(&samples, prob).unwrap();
        let above = samples.iter().filter(|&&s| s > level).count() as f64;
        prop_assert!(above <= prob * samples.len() as f64);
    }

    #[test]
    fn overhead_matches_integer_arithmetic(n in 0u64..500, extra in 1u64..5000, m in 1u64..2048) {
        let gc = 2 * n + extra;
        let cfg = OverheadConfig::new(gc, n + m, n).unwrap();
        prop_assert_eq!(cfg.overhead(Scheme::Dam).unwrap(), Ratio::new(2 * n, gc));
        prop_assert_eq!(cfg.overhead(Scheme::Ofdm).unwrap(), Ratio::new(n, 2 * n + m));
        prop_assert_eq!(cfg.overhead(Scheme::Dam).unwrap() + cfg.efficiency_factor(Scheme::Dam).unwrap(), Ratio::from_integer(1));
    }
}
