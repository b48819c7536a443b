mod common;

use common::{channel, rel_close};
use dam_core::channel::{ofdm_channel, ChannelSet, Path};
use dam_core::conic::{solve_power_min_socp, water_fill, SocpInstance, SolverSettings};
use dam_core::rate_region::{
    dam_pareto_point, ofdm_pareto_point, sp_pareto_point, trace_region, RateProfile,
};
use dam_core::{CVector, C64};

fn basis(gains: [f64; 2]) -> ChannelSet {
    let path = |v: [f64; 2]| Path { gain: CVector::from_vec(v.iter().map(|&x| C64::new(x, 0.0)).collect()), delay: 0 };
    ChannelSet::new(vec![vec![path([gains[0], 0.0])], vec![path([0.0, gains[1]])]], 1.0).unwrap()
}

/// Best common scale for two orthogonal users sharing power `p`, by a fine
/// sweep of the split followed by local refinement.
fn split_sweep(g: [f64; 2], alpha: [f64; 2], p: f64) -> f64 {
    let scale = |s: f64| {
        let r = [(1.0 + s * p * g[0]).log2(), (1.0 + (1.0 - s) * p * g[1]).log2()];
        (0..2).filter(|&k| alpha[k] > 0.0).map(|k| r[k] / alpha[k]).fold(f64::INFINITY, f64::min)
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut best = (f64::NEG_INFINITY, 0.5);
    for _ in 0..6 {
        for i in 0..=1000 {
            let s = lo + (hi - lo) * i as f64 / 1000.0;
            let v = scale(s);
            if v > best.0 {
                best = (v, s);
            }
        }
        let w = (hi - lo) / 100.0;
        lo = (best.1 - w).max(0.0);
        hi = (best.1 + w).min(1.0);
    }
    best.0
}

#[test]
fn orthogonal_users_match_power_split_sweep() {
    let settings = SolverSettings::default();
    let g: [f64; 2] = [2.0, 0.7];
    let ch = basis([g[0].sqrt(), g[1].sqrt()]);
    for alpha in [[0.5, 0.5], [0.3, 0.7], [0.9, 0.1]] {
        let profile = RateProfile::new(alpha.to_vec()).unwrap();
        let want = split_sweep(g, alpha, 10.0);
        let pt = dam_pareto_point(&ch, &profile, 10.0, &settings).unwrap();
        assert!(rel_close(pt.r_star, want, 2.0 * settings.bisection_epsilon), "{alpha:?}: {} vs {want}", pt.r_star);
        let ofdm = ofdm_channel(&ch, 4).unwrap();
        let of = ofdm_pareto_point(&ofdm, &profile, 10.0, &settings).unwrap();
        assert!(rel_close(of.r_star, want, 0.01), "ofdm {alpha:?}: {} vs {want}", of.r_star);
    }
}

#[test]
fn ofdm_single_user_is_water_filling_capacity() {
    let settings = SolverSettings::default();
    for seed in 0..4 {
        let ch = channel(4, &[3], 6, seed, 4.0);
        let ofdm = ofdm_channel(&ch, 8).unwrap();
        let noise = ofdm.subcarrier_noise_power();
        let inv: Vec<f64> = (0..8).map(|m| noise / ofdm.gain(0, m).norm_squared()).collect();
        let alloc = water_fill(&inv, 8.0 * 2.0).unwrap();
        let want: f64 = alloc.iter().zip(&inv).map(|(p, i)| (1.0 + p / i).log2()).sum::<f64>() / 8.0;
        let pt = ofdm_pareto_point(&ofdm, &RateProfile::new(vec![1.0]).unwrap(), 2.0, &settings).unwrap();
        assert!(rel_close(pt.r_star, want, 0.01), "seed {seed}: {} vs {want}", pt.r_star);
        assert!(pt.trace.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-6)));
    }
}

#[test]
fn strongest_path_never_beats_dam() {
    let settings = SolverSettings::default();
    for seed in 0..6 {
        let ch = channel(8, &[2, 2], 20, seed, 1.0);
        for alpha in [[1.0, 0.0], [0.5, 0.5], [0.2, 0.8]] {
            let profile = RateProfile::new(alpha.to_vec()).unwrap();
            let dam = dam_pareto_point(&ch, &profile, 5.0, &settings).unwrap();
            let sp = sp_pareto_point(&ch, &profile, 5.0, &settings).unwrap();
            assert!(sp.r_star <= dam.r_star * (1.0 + 1e-3), "seed {seed} {alpha:?}: {} > {}", sp.r_star, dam.r_star);
        }
        let single = channel(8, &[2], 20, seed, 1.0);
        let one = RateProfile::new(vec![1.0]).unwrap();
        let dam = dam_pareto_point(&single, &one, 5.0, &settings).unwrap();
        let sp = sp_pareto_point(&single, &one, 5.0, &settings).unwrap();
        assert!(sp.r_star <= dam.r_star * (1.0 + 1e-3));
    }
}

#[test]
fn bisection_certificate_and_achievability() {
    let settings = SolverSettings::default();
    let ch = channel(8, &[2, 2], 20, 3, 1.0);
    let profile = RateProfile::new(vec![0.4, 0.6]).unwrap();
    let pt = dam_pareto_point(&ch, &profile, 5.0, &settings).unwrap();
    assert!(pt.status.is_optimal());
    let probe = |r: f64| {
        let targets = profile.alpha().iter().map(|a| (a * r).exp2() - 1.0).collect();
        solve_power_min_socp(&SocpInstance::dam(&ch, targets).unwrap(), &settings).unwrap()
    };
    let at = probe(pt.r_star);
    assert!(at.status.is_optimal() && at.total_power <= 5.0);
    let above = probe(pt.r_star * (1.0 + settings.bisection_epsilon));
    assert!(!above.status.is_optimal() || above.total_power > 5.0);
    for (r, a) in pt.rates.iter().zip(profile.alpha()) {
        assert!(*r >= a * pt.r_star - 1e-3);
    }
}

#[test]
fn region_trace_shape() {
    let settings = SolverSettings::default();
    let ch = channel(8, &[2, 2], 20, 5, 1.0);
    let coarse = RateProfile::simplex_grid(2, 2).unwrap();
    let fine = RateProfile::simplex_grid(2, 8).unwrap();
    for p in &coarse {
        assert!(fine.contains(p));
    }
    let trace = trace_region(&fine, |a| dam_pareto_point(&ch, a, 5.0, &settings)).unwrap();
    assert_eq!(trace.points.len(), fine.len());
    for (pt, a) in trace.points.iter().zip(&fine) {
        assert_eq!(pt.alpha.as_slice(), a.alpha());
    }
    let one = RateProfile::new(vec![1.0]).unwrap();
    for k in 0..2 {
        let solo = dam_pareto_point(&ch.select_users(&[k]).unwrap(), &one, 5.0, &settings).unwrap();
        let end = trace.points.iter().find(|p| p.alpha[k] == 1.0).unwrap();
        assert!(rel_close(end.rates[k], solo.r_star, 2e-3));
    }
    // walk by increasing share of user 0
    let mut pts: Vec<_> = trace.points.iter().collect();
    pts.sort_by(|a, b| a.alpha[0].total_cmp(&b.alpha[0]));
    for w in pts.windows(2) {
        let r0 = |p: &dam_core::rate_region::ParetoPoint| p.alpha[0] * p.r_star;
        let r1 = |p: &dam_core::rate_region::ParetoPoint| p.alpha[1] * p.r_star;
        assert!(r0(w[1]) >= r0(w[0]) - 2e-3 * w[0].r_star);
        assert!(r1(w[1]) <= r1(w[0]) + 2e-3 * w[0].r_star);
    }
}
