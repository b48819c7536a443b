use std::fs::File;
use std::path::{Path, PathBuf};

use dam_core::beamforming::{mrt_per_path, rzf_per_path, zf_per_path};
use dam_core::benchmarks::{ofdm_mrt, ofdm_rzf, ofdm_zf, sp_mrt, sp_rzf, sp_zf, OfdmSolution, SpSolution};
use dam_core::channel::{ofdm_channel, synthesize_channel, ChannelSet};
use dam_core::conic::{SolveStatus, SolverSettings};
use dam_core::dam::{dam_sinr, PathBeamformerSet};
use dam_core::metrics::{
    dam_papr_trial, effective_spectral_efficiency, ofdm_papr_trial, ratio_f64, sp_papr_trial, threshold_grid,
    CcdfCurve, OverheadConfig, PaprConfig, Scheme, SchemeSinr,
};
use dam_core::rate_region::{dam_pareto_point, ofdm_pareto_point, sp_pareto_point, ParetoPoint, RateProfile};
use dam_core::{DamError, Result as CoreResult};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Beamformer, Kind, ScenarioConfig, SweepVariable};

/// One long-format result row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub sweep_value: f64,
    pub scheme: String,
    pub beamformer: String,
    pub metric: String,
    pub seed: u64,
    pub value: f64,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcdfRow {
    pub scheme: String,
    pub beamformer: String,
    pub threshold_db: f64,
    pub prob: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScenarioOutput {
    pub rows: Vec<Row>,
    pub ccdf: Vec<CcdfRow>,
}

/// Rates of one beamformer on one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeRates {
    pub per_user: Vec<f64>,
    /// Sum rate after the guard interval or cyclic prefix.
    pub effective: f64,
}

fn status_of(err: &DamError) -> &'static str {
    match err {
        DamError::InfeasibleZf(_) => "infeasible",
        _ => "error",
    }
}

fn dam_beams(ch: &ChannelSet, bf: Beamformer, p: f64, settings: &SolverSettings) -> CoreResult<PathBeamformerSet> {
    Ok(match bf {
        Beamformer::Mrt => mrt_per_path(ch, p)?,
        Beamformer::Zf => zf_per_path(ch, p)?.beams,
        Beamformer::Rzf => rzf_per_path(ch, p, settings)?.beams,
    })
}

fn sp_solution(ch: &ChannelSet, bf: Beamformer, p: f64, settings: &SolverSettings) -> CoreResult<SpSolution> {
    match bf {
        Beamformer::Mrt => sp_mrt(ch, p),
        Beamformer::Zf => sp_zf(ch, p),
        Beamformer::Rzf => sp_rzf(ch, p, settings),
    }
}

fn ofdm_solution(
    ch: &ChannelSet,
    m: usize,
    bf: Beamformer,
    p: f64,
    settings: &SolverSettings,
) -> CoreResult<OfdmSolution> {
    let ofdm = ofdm_channel(ch, m)?;
    match bf {
        Beamformer::Mrt => ofdm_mrt(&ofdm, p),
        Beamformer::Zf => ofdm_zf(&ofdm, p),
        Beamformer::Rzf => ofdm_rzf(&ofdm, p, settings),
    }
}

fn overhead_for(ch: &ChannelSet, m: usize, coherence: u64) -> CoreResult<OverheadConfig> {
    OverheadConfig::new(coherence, m as u64, ch.overall_max_delay() as u64)
}

/// Per-user raw rates and effective sum rate of `scheme` with `bf` on `ch`.
pub fn scheme_rates(
    ch: &ChannelSet,
    scheme: Scheme,
    bf: Beamformer,
    p: f64,
    num_subcarriers: usize,
    coherence_samples: u64,
    settings: &SolverSettings,
) -> CoreResult<SchemeRates> {
    let oh = overhead_for(ch, num_subcarriers, coherence_samples)?;
    match scheme {
        Scheme::Dam => {
            let beams = dam_beams(ch, bf, p, settings)?;
            let sinr: Vec<f64> = dam_sinr(ch, &beams)?.iter().map(|r| r.sinr).collect();
            Ok(SchemeRates {
                per_user: sinr.iter().map(|g| g.ln_1p() / std::f64::consts::LN_2).collect(),
                effective: effective_spectral_efficiency(SchemeSinr::Dam(&sinr), &oh)?,
            })
        }
        Scheme::StrongestPath => {
            let sol = sp_solution(ch, bf, p, settings)?;
            let sinr: Vec<f64> = sol.reports.iter().map(|r| r.sinr).collect();
            Ok(SchemeRates {
                per_user: sol.per_user_rate(),
                effective: effective_spectral_efficiency(SchemeSinr::StrongestPath(&sinr), &oh)?,
            })
        }
        Scheme::Ofdm => {
            let sol = ofdm_solution(ch, num_subcarriers, bf, p, settings)?;
            let sinr = sol.sinr();
            let m = num_subcarriers as f64;
            Ok(SchemeRates {
                per_user: sol.reports.iter().map(|r| r.iter().map(|x| x.rate()).sum::<f64>() / m).collect(),
                effective: effective_spectral_efficiency(SchemeSinr::Ofdm(&sinr), &oh)?,
            })
        }
    }
}

/// One PAPR sample (dB) for a fresh channel drawn from the trial stream.
pub fn papr_sample(
    cfg: &ScenarioConfig,
    papr: &PaprConfig,
    scheme: Scheme,
    bf: Beamformer,
    trial: usize,
) -> CoreResult<f64> {
    let mut rng = papr.trial_rng(trial);
    let geometry = cfg.geometry.clone().with_seed(rng.next_u64());
    let ch = synthesize_channel(&geometry, cfg.noise_w)?;
    let p = cfg.power_w;
    match scheme {
        Scheme::Dam => dam_papr_trial(&dam_beams(&ch, bf, p, &cfg.settings)?, papr, &mut rng),
        Scheme::StrongestPath => sp_papr_trial(&sp_solution(&ch, bf, p, &cfg.settings)?.beams, papr, &mut rng),
        Scheme::Ofdm => {
            let sol = ofdm_solution(&ch, cfg.num_subcarriers, bf, p, &cfg.settings)?;
            ofdm_papr_trial(&sol.beams, papr, &mut rng)
        }
    }
}

/// Boundary point of `scheme` along `alpha`, rates scaled by the scheme's
/// guard or cyclic-prefix efficiency.
pub fn region_point(
    ch: &ChannelSet,
    scheme: Scheme,
    alpha: &RateProfile,
    p: f64,
    num_subcarriers: usize,
    coherence_samples: u64,
    settings: &SolverSettings,
) -> CoreResult<ParetoPoint> {
    let oh = overhead_for(ch, num_subcarriers, coherence_samples)?;
    let raw = match scheme {
        Scheme::Dam => dam_pareto_point(ch, alpha, p, settings)?,
        Scheme::StrongestPath => sp_pareto_point(ch, alpha, p, settings)?,
        Scheme::Ofdm => ofdm_pareto_point(&ofdm_channel(ch, num_subcarriers)?, alpha, p, settings)?,
    };
    Ok(raw.scaled(ratio_f64(oh.efficiency_factor(scheme)?)))
}

fn row(sweep_value: f64, scheme: Scheme, bf: &str, metric: impl Into<String>, seed: u64, value: f64, status: &str) -> Row {
    Row {
        sweep_value,
        scheme: scheme.as_str().to_string(),
        beamformer: bf.to_string(),
        metric: metric.into(),
        seed,
        value,
        status: status.to_string(),
    }
}

fn status_str(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Optimal => "ok",
        other => other.as_str(),
    }
}

fn spectral_efficiency_rows(cfg: &ScenarioConfig, value: f64, seed: u64) -> Vec<Row> {
    let sweep = cfg.sweep.as_ref().expect("validated");
    let mut geometry = cfg.geometry.clone().with_seed(seed);
    let mut p = cfg.power_w;
    match sweep.variable {
        SweepVariable::PowerDbm => p = dam_core::units::dbm_to_watts(value),
        SweepVariable::Paths => geometry.paths_per_user = vec![value as usize; geometry.num_users],
        SweepVariable::NumAntennas => geometry.num_antennas = value as usize,
        SweepVariable::Alpha => unreachable!("validated"),
    }
    let ch = match synthesize_channel(&geometry, cfg.noise_w) {
        Ok(ch) => ch,
        Err(e) => {
            log::warn!("{}: channel synthesis failed at {value}, seed {seed}: {e}", cfg.name);
            return cfg
                .schemes
                .iter()
                .flat_map(|&s| cfg.beamformers.iter().map(move |b| row(value, s, b.as_str(), "effective_se", seed, f64::NAN, "error")))
                .collect();
        }
    };
    let mut rows = Vec::new();
    for &scheme in &cfg.schemes {
        for &bf in &cfg.beamformers {
            match scheme_rates(&ch, scheme, bf, p, cfg.num_subcarriers, cfg.coherence_samples, &cfg.settings) {
                Ok(r) => {
                    rows.push(row(value, scheme, bf.as_str(), "effective_se", seed, r.effective, "ok"));
                    rows.push(row(value, scheme, bf.as_str(), "raw_sum_rate", seed, r.per_user.iter().sum(), "ok"));
                }
                Err(e) => {
                    let status = status_of(&e);
                    log::warn!("{}: {scheme}/{} at {value}, seed {seed}: {e}", cfg.name, bf.as_str());
                    rows.push(row(value, scheme, bf.as_str(), "effective_se", seed, f64::NAN, status));
                    rows.push(row(value, scheme, bf.as_str(), "raw_sum_rate", seed, f64::NAN, status));
                }
            }
        }
    }
    rows
}

enum RegionUnit {
    Point(Scheme, usize),
    Beamformer(Scheme, Beamformer),
}

fn region_rows(cfg: &ScenarioConfig, grid: &[RateProfile], seed: u64, unit: &RegionUnit) -> Vec<Row> {
    let kk = cfg.geometry.num_users;
    let ch = match synthesize_channel(&cfg.geometry.clone().with_seed(seed), cfg.noise_w) {
        Ok(ch) => ch,
        Err(e) => {
            log::warn!("{}: channel synthesis failed for seed {seed}: {e}", cfg.name);
            return Vec::new();
        }
    };
    let (m, gc, p) = (cfg.num_subcarriers, cfg.coherence_samples, cfg.power_w);
    match *unit {
        RegionUnit::Point(scheme, i) => {
            let alpha = &grid[i];
            let x = i as f64;
            let mut rows: Vec<Row> =
                (0..kk).map(|k| row(x, scheme, "pareto", format!("alpha_{k}"), seed, alpha.alpha()[k], "ok")).collect();
            match region_point(&ch, scheme, alpha, p, m, gc, &cfg.settings) {
                Ok(pt) => {
                    let status = status_str(pt.status);
                    rows.push(row(x, scheme, "pareto", "r_star", seed, pt.r_star, status));
                    for (k, r) in pt.rates.iter().enumerate() {
                        rows.push(row(x, scheme, "pareto", format!("rate_{k}"), seed, *r, status));
                    }
                }
                Err(e) => {
                    log::warn!("{}: {scheme} region point {i}, seed {seed}: {e}", cfg.name);
                    rows.push(row(x, scheme, "pareto", "r_star", seed, f64::NAN, status_of(&e)));
                }
            }
            rows
        }
        RegionUnit::Beamformer(scheme, bf) => {
            let factor = overhead_for(&ch, m, gc).and_then(|oh| oh.efficiency_factor(scheme)).map(ratio_f64);
            match (scheme_rates(&ch, scheme, bf, p, m, gc, &cfg.settings), factor) {
                (Ok(r), Ok(f)) => r
                    .per_user
                    .iter()
                    .enumerate()
                    .map(|(k, rk)| row(0.0, scheme, bf.as_str(), format!("rate_{k}"), seed, rk * f, "ok"))
                    .collect(),
                (Err(e), _) | (_, Err(e)) => {
                    log::warn!("{}: {scheme}/{} seed {seed}: {e}", cfg.name, bf.as_str());
                    (0..kk)
                        .map(|k| row(0.0, scheme, bf.as_str(), format!("rate_{k}"), seed, f64::NAN, status_of(&e)))
                        .collect()
                }
            }
        }
    }
}

fn run_units<U: Sync, F>(units: &[U], jobs: usize, f: F) -> anyhow::Result<Vec<Row>>
where
    F: Fn(&U) -> Vec<Row> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
    // `collect` keeps unit order whatever the completion order
    let chunks: Vec<Vec<Row>> = pool.install(|| units.par_iter().map(&f).collect());
    Ok(chunks.into_iter().flatten().collect())
}

/// Computes every row of the scenario on `jobs` worker threads.
pub fn run_experiment(cfg: &ScenarioConfig, jobs: usize) -> anyhow::Result<ScenarioOutput> {
    match cfg.kind {
        Kind::SpectralEfficiency => {
            let values = &cfg.sweep.as_ref().expect("validated").values;
            let units: Vec<(f64, u64)> =
                values.iter().flat_map(|&v| cfg.seeds.iter().map(move |&s| (v, s))).collect();
            let rows = run_units(&units, jobs, |&(v, s)| spectral_efficiency_rows(cfg, v, s))?;
            Ok(ScenarioOutput { rows, ccdf: Vec::new() })
        }
        Kind::RateRegion => {
            let divisions = cfg.sweep.as_ref().and_then(|s| s.divisions).expect("validated");
            let grid = RateProfile::simplex_grid(cfg.geometry.num_users, divisions)?;
            let mut units = Vec::new();
            for &seed in &cfg.seeds {
                for &scheme in &cfg.schemes {
                    units.extend((0..grid.len()).map(|i| (seed, RegionUnit::Point(scheme, i))));
                    units.extend(cfg.beamformers.iter().map(|&b| (seed, RegionUnit::Beamformer(scheme, b))));
                }
            }
            let rows = run_units(&units, jobs, |(seed, unit)| region_rows(cfg, &grid, *seed, unit))?;
            Ok(ScenarioOutput { rows, ccdf: Vec::new() })
        }
        Kind::Papr => run_papr(cfg, jobs),
    }
}

fn run_papr(cfg: &ScenarioConfig, jobs: usize) -> anyhow::Result<ScenarioOutput> {
    let section = cfg.papr.as_ref().expect("validated");
    let (lo, hi, n) = section.thresholds_db;
    let thresholds = threshold_grid(lo, hi, n)?;
    let mut out = ScenarioOutput::default();
    for &scheme in &cfg.schemes {
        for &bf in &cfg.beamformers {
            let units: Vec<(u64, usize)> =
                cfg.seeds.iter().flat_map(|&s| (0..section.trials).map(move |t| (s, t))).collect();
            let rows = run_units(&units, jobs, |&(seed, trial)| {
                let papr = PaprConfig {
                    qam_order: section.qam_order,
                    num_trials: section.trials,
                    samples_per_trial: section.samples_per_trial,
                    rng_seed: seed,
                };
                let (value, status) = match papr_sample(cfg, &papr, scheme, bf, trial) {
                    Ok(v) => (v, "ok"),
                    Err(e) => {
                        log::warn!("{}: {scheme}/{} trial {trial}, seed {seed}: {e}", cfg.name, bf.as_str());
                        (f64::NAN, status_of(&e))
                    }
                };
                vec![row(trial as f64, scheme, bf.as_str(), "papr_db", seed, value, status)]
            })?;
            let samples: Vec<f64> = rows.iter().map(|r| r.value).filter(|v| v.is_finite()).collect();
            if !samples.is_empty() {
                let curve = CcdfCurve::from_samples(&samples, &thresholds)?;
                out.ccdf.extend(curve.thresholds_db.iter().zip(&curve.probabilities).map(|(&t, &p)| CcdfRow {
                    scheme: scheme.as_str().to_string(),
                    beamformer: bf.as_str().to_string(),
                    threshold_db: t,
                    prob: p,
                }));
            }
            out.rows.extend(rows);
        }
    }
    Ok(out)
}

/// CCDF file name derived from the main output name.
pub fn ccdf_file_name(output: &str) -> String {
    match output.strip_suffix(".csv") {
        Some(stem) => format!("{stem}_ccdf.csv"),
        None => format!("{output}_ccdf.csv"),
    }
}

pub const ROW_COLUMNS: [&str; 7] = ["sweep_value", "scheme", "beamformer", "metric", "seed", "value", "status"];
pub const CCDF_COLUMNS: [&str; 4] = ["scheme", "beamformer", "threshold_db", "prob"];

fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> anyhow::Result<()> {
    // header written by hand so an empty result still has one
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(File::create(path)?);
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the scenario's CSV files into `dir` and returns their paths.
pub fn write_output(cfg: &ScenarioConfig, out: &ScenarioOutput, dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let main = dir.join(&cfg.output);
    write_csv(&main, &ROW_COLUMNS, &out.rows)?;
    let mut written = vec![main];
    if cfg.kind == Kind::Papr {
        let path = dir.join(ccdf_file_name(&cfg.output));
        write_csv(&path, &CCDF_COLUMNS, &out.ccdf)?;
        written.push(path);
    }
    Ok(written)
}

pub fn run_scenario(cfg: &ScenarioConfig, dir: &Path, jobs: usize) -> anyhow::Result<Vec<PathBuf>> {
    let out = run_experiment(cfg, jobs)?;
    let failed = out.rows.iter().filter(|r| r.status != "ok").count();
    if failed > 0 {
        log::warn!("{}: {failed} of {} rows not ok", cfg.name, out.rows.len());
    }
    write_output(cfg, &out, dir)
}
