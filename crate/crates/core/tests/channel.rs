mod common;

use common::{channel, geometry, median, rel_close};
use dam_core::channel::{ofdm_channel, orthogonality_metric, stack_user_channel, synthesize_channel};
use dam_core::C64;
use proptest::prelude::*;
use std::f64::consts::PI;

#[test]
fn section_six_shape() {
    let ch = channel(128, &[5, 5, 5], 80, 11, 1.0);
    assert_eq!(ch.num_users(), 3);
    for k in 0..3 {
        assert_eq!(ch.num_paths(k), 5);
        let mut d: Vec<_> = ch.paths(k).iter().map(|p| p.delay).collect();
        assert!(d.iter().all(|&x| x <= 80));
        d.sort();
        d.dedup();
        assert_eq!(d.len(), 5);
        let norms: Vec<f64> = ch.paths(k).iter().map(|p| p.gain.norm()).collect();
        assert!(norms.windows(2).all(|w| w[0] >= w[1]), "strongest path first");
    }
}

#[test]
fn same_seed_same_channel() {
    let g = geometry(16, &[3, 2], 40, 99);
    assert_eq!(synthesize_channel(&g, 0.1).unwrap(), synthesize_channel(&g, 0.1).unwrap());
    assert_ne!(synthesize_channel(&g, 0.1).unwrap(), synthesize_channel(&g.clone().with_seed(100), 0.1).unwrap());
}

#[test]
fn orthogonality_trend_over_array_size() {
    let medians: Vec<f64> = [16, 64, 256, 1024]
        .iter()
        .map(|&mt| median((0..100).map(|s| orthogonality_metric(&channel(mt, &[2, 2], 40, s, 1.0)).unwrap()).collect()))
        .collect();
    assert!(medians.windows(2).all(|w| w[1] < w[0]), "{medians:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stacked_norm_matches_path_sum(seed in 0u64..10_000, mt in 1usize..12, l1 in 1usize..5, l2 in 1usize..5) {
        let ch = channel(mt, &[l1, l2], 20, seed, 1.0);
        for k in 0..2 {
            let stacked = stack_user_channel(&ch, k).unwrap();
            let mut direct = 0.0;
            for p in ch.paths(k) {
                for v in p.gain.iter() {
                    direct += v.re * v.re + v.im * v.im;
                }
            }
            prop_assert!(rel_close(stacked.norm_squared(), direct, 1e-12));
            prop_assert!(rel_close(ch.user_gain(k), direct, 1e-12));
        }
    }

    #[test]
    fn subcarrier_gains_match_direct_dft(seed in 0u64..10_000, mt in 1usize..6, paths in 1usize..5, extra in 1usize..20) {
        let ch = channel(mt, &[paths], 12, seed, 2.0);
        let m_total = ch.overall_max_delay() + extra;
        let ofdm = ofdm_channel(&ch, m_total).unwrap();
        prop_assert!(rel_close(ofdm.subcarrier_noise_power(), 2.0 / m_total as f64, 1e-15));
        let mut energy = 0.0;
        for m in 0..m_total {
            for a in 0..mt {
                let mut acc = C64::new(0.0, 0.0);
                for p in ch.paths(0) {
                    let phase = -2.0 * PI * (m * p.delay) as f64 / m_total as f64;
                    acc += p.gain[a] * C64::from_polar(1.0, phase);
                }
                acc /= (m_total as f64).sqrt();
                let got = ofdm.gain(0, m)[a];
                prop_assert!((got - acc).norm() <= 1e-10 * (1.0 + acc.norm()));
            }
            energy += ofdm.gain(0, m).norm_squared();
        }
        prop_assert!(rel_close(energy, ch.user_gain(0), 1e-10));
    }

    #[test]
    fn orthogonality_in_unit_interval(seed in 0u64..10_000, mt in 1usize..32) {
        let v = orthogonality_metric(&channel(mt, &[2, 1], 10, seed, 1.0)).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
    }
}
