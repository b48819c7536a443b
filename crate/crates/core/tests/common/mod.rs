#![allow(dead_code)]

use dam_core::channel::{synthesize_channel, ChannelSet, GeometryConfig};
use dam_core::dam::PathBeamformerSet;
use dam_core::{CVector, C64};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn geometry(mt: usize, paths: &[usize], max_delay: usize, seed: u64) -> GeometryConfig {
    let mut cfg = GeometryConfig::uniform(mt, paths.len(), 1, max_delay, seed);
    cfg.paths_per_user = paths.to_vec();
    cfg
}

pub fn channel(mt: usize, paths: &[usize], max_delay: usize, seed: u64, noise: f64) -> ChannelSet {
    synthesize_channel(&geometry(mt, paths, max_delay, seed), noise).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> CVector {
    CVector::from_fn(n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

/// Random per-path beams scaled to total power `p`.
pub fn random_path_beams(ch: &ChannelSet, rng: &mut ChaCha8Rng, p: f64) -> PathBeamformerSet {
    let mt = ch.num_antennas();
    let raw: Vec<CVector> = (0..ch.num_users()).map(|k| random_vector(rng, mt * ch.num_paths(k))).collect();
    let norm2: f64 = raw.iter().map(|v| v.norm_squared()).sum();
    let c = C64::new((p / norm2).sqrt(), 0.0);
    PathBeamformerSet::new(ch, raw.into_iter().map(|v| v * c).collect()).unwrap()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Active-set enumeration: try every nonempty subset as the active set and
/// keep the one whose level is consistent.
pub fn water_fill_by_enumeration(inv: &[f64], budget: f64) -> Vec<f64> {
    let n = inv.len();
    for mask in 1u32..(1 << n) {
        let active: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let level = (budget + active.iter().map(|&i| inv[i]).sum::<f64>()) / active.len() as f64;
        let ok_active = active.iter().all(|&i| level > inv[i]);
        let ok_dry = (0..n).filter(|i| mask & (1 << i) == 0).all(|i| inv[i] >= level);
        if ok_active && ok_dry {
            return (0..n).map(|i| if mask & (1 << i) != 0 { level - inv[i] } else { 0.0 }).collect();
        }
    }
    panic!("no consistent active set");
}
