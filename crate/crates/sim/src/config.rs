use std::path::Path;

use dam_core::channel::GeometryConfig;
use dam_core::conic::SolverSettings;
use dam_core::metrics::{PaprConfig, Scheme};
use dam_core::units::dbm_to_watts;
use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: String, source: toml::de::Error },
    #[error("{path}: field `{field}`: {message}")]
    Invalid { path: String, field: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    SpectralEfficiency,
    RateRegion,
    Papr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Beamformer {
    Mrt,
    Zf,
    Rzf,
}

impl Beamformer {
    pub fn as_str(self) -> &'static str {
        match self {
            Beamformer::Mrt => "mrt",
            Beamformer::Zf => "zf",
            Beamformer::Rzf => "rzf",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    PowerDbm,
    Paths,
    NumAntennas,
    Alpha,
}

/// Either an explicit seed list or `count` consecutive seeds from `start`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    List(Vec<u64>),
    Range { start: u64, count: u64 },
}

impl Seeds {
    pub fn expand(&self) -> Vec<u64> {
        match self {
            Seeds::List(v) => v.clone(),
            Seeds::Range { start, count } => (*start..start + count).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub num_antennas: usize,
    pub num_users: usize,
    pub paths_per_user: usize,
    pub delay_range: (usize, usize),
    #[serde(default = "default_aod")]
    pub aod_range_deg: (f64, f64),
    #[serde(default = "default_spacing")]
    pub antenna_spacing: f64,
    #[serde(default)]
    pub path_loss_db: f64,
}

fn default_aod() -> (f64, f64) {
    (-90.0, 90.0)
}

fn default_spacing() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub variable: SweepVariable,
    #[serde(default)]
    pub values: Vec<f64>,
    /// Simplex grid resolution for `alpha` sweeps.
    pub divisions: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PaprSection {
    #[serde(default = "default_qam")]
    pub qam_order: usize,
    pub trials: usize,
    pub samples_per_trial: usize,
    #[serde(default = "default_thresholds")]
    pub thresholds_db: (f64, f64, usize),
}

fn default_qam() -> usize {
    4
}

fn default_thresholds() -> (f64, f64, usize) {
    (0.0, 16.0, 65)
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub feasibility_tolerance: Option<f64>,
    pub duality_gap_tolerance: Option<f64>,
    pub bisection_epsilon: Option<f64>,
    pub sca_relative_stop: Option<f64>,
    pub max_iterations: Option<usize>,
}

/// Scenario file as written on disk.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub kind: Kind,
    pub geometry: GeometrySection,
    pub power_dbm: f64,
    pub noise_dbm: f64,
    pub schemes: Vec<String>,
    #[serde(default)]
    pub beamformers: Vec<Beamformer>,
    pub seeds: Seeds,
    pub sweep: Option<SweepSection>,
    #[serde(default = "default_subcarriers")]
    pub num_subcarriers: usize,
    #[serde(default = "default_coherence")]
    pub coherence_samples: u64,
    pub papr: Option<PaprSection>,
    #[serde(default)]
    pub solver: SolverSection,
    /// CSV file name, relative to the output directory.
    pub output: String,
}

fn default_subcarriers() -> usize {
    512
}

fn default_coherence() -> u64 {
    128_000
}

/// Validated scenario with powers in watts.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub kind: Kind,
    pub geometry: GeometryConfig,
    pub power_w: f64,
    pub noise_w: f64,
    pub schemes: Vec<Scheme>,
    pub beamformers: Vec<Beamformer>,
    pub seeds: Vec<u64>,
    pub sweep: Option<SweepSection>,
    pub num_subcarriers: usize,
    pub coherence_samples: u64,
    pub papr: Option<PaprSection>,
    pub settings: SolverSettings,
    pub output: String,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let label = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: label.clone(), source })?;
        Self::parse(&text, &label)
    }

    pub fn parse(text: &str, label: &str) -> Result<Self, ConfigError> {
        let file: ScenarioFile =
            toml::from_str(text).map_err(|source| ConfigError::Parse { path: label.to_string(), source })?;
        Self::from_file(file, label)
    }

    fn from_file(f: ScenarioFile, label: &str) -> Result<Self, ConfigError> {
        let bad = |field: &str, message: String| ConfigError::Invalid {
            path: label.to_string(),
            field: field.to_string(),
            message,
        };

        let schemes = f
            .schemes
            .iter()
            .map(|s| s.parse::<Scheme>().map_err(|e| bad("schemes", e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        if schemes.is_empty() {
            return Err(bad("schemes", "at least one of DAM, SP, OFDM is required".into()));
        }
        let seeds = f.seeds.expand();
        if seeds.is_empty() {
            return Err(bad("seeds", "no seeds given".into()));
        }
        if !f.power_dbm.is_finite() {
            return Err(bad("power_dbm", "must be finite".into()));
        }
        if !f.noise_dbm.is_finite() {
            return Err(bad("noise_dbm", "must be finite".into()));
        }

        let g = &f.geometry;
        let geometry = GeometryConfig {
            num_antennas: g.num_antennas,
            num_users: g.num_users,
            paths_per_user: vec![g.paths_per_user; g.num_users],
            delay_range: g.delay_range,
            aod_range_deg: g.aod_range_deg,
            antenna_spacing: g.antenna_spacing,
            path_loss_db: g.path_loss_db,
            rng_seed: seeds[0],
        };
        geometry.validate().map_err(|e| bad("geometry", e.to_string()))?;

        if schemes.contains(&Scheme::Ofdm) && f.num_subcarriers <= g.delay_range.1 {
            return Err(bad(
                "num_subcarriers",
                format!("{} sub-carriers cannot hold a cyclic prefix for delays up to {}", f.num_subcarriers, g.delay_range.1),
            ));
        }
        if f.coherence_samples < 2 * g.delay_range.1 as u64 {
            return Err(bad("coherence_samples", "must cover at least twice the largest delay".into()));
        }

        match (&f.kind, &f.sweep) {
            (Kind::RateRegion, Some(s)) if s.variable == SweepVariable::Alpha => {
                if s.divisions.unwrap_or(0) == 0 {
                    return Err(bad("sweep.divisions", "alpha sweeps need a positive grid resolution".into()));
                }
            }
            (Kind::RateRegion, _) => return Err(bad("sweep.variable", "rate_region scenarios sweep `alpha`".into())),
            (Kind::SpectralEfficiency, Some(s)) => {
                if s.variable == SweepVariable::Alpha {
                    return Err(bad("sweep.variable", "`alpha` belongs to rate_region scenarios".into()));
                }
                if s.values.is_empty() {
                    return Err(bad("sweep.values", "empty sweep".into()));
                }
                if s.values.iter().any(|v| !v.is_finite()) || s.values.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(bad("sweep.values", "values must be finite and strictly increasing".into()));
                }
                if matches!(s.variable, SweepVariable::Paths | SweepVariable::NumAntennas)
                    && s.values.iter().any(|v| v.fract() != 0.0 || *v < 1.0)
                {
                    return Err(bad("sweep.values", "path and antenna counts must be positive integers".into()));
                }
                if s.variable == SweepVariable::Paths {
                    let span = g.delay_range.1 - g.delay_range.0 + 1;
                    if s.values.iter().any(|&v| v as usize > span) {
                        return Err(bad("sweep.values", format!("delay range holds at most {span} distinct delays")));
                    }
                }
            }
            (Kind::SpectralEfficiency, None) => {
                return Err(bad("sweep", "spectral_efficiency scenarios need a sweep".into()))
            }
            (Kind::Papr, Some(_)) => return Err(bad("sweep", "papr scenarios take no sweep".into())),
            (Kind::Papr, None) => {}
        }

        if f.kind != Kind::RateRegion && f.beamformers.is_empty() {
            return Err(bad("beamformers", "at least one of mrt, zf, rzf is required".into()));
        }
        if f.kind == Kind::RateRegion && schemes.contains(&Scheme::Ofdm) && f.num_subcarriers > 256 {
            log::warn!("{label}: OFDM region with {} sub-carriers will be slow", f.num_subcarriers);
        }

        let papr = match (f.kind, f.papr) {
            (Kind::Papr, Some(p)) => {
                let cfg = PaprConfig {
                    qam_order: p.qam_order,
                    num_trials: p.trials,
                    samples_per_trial: p.samples_per_trial,
                    rng_seed: 0,
                };
                cfg.validate().map_err(|e| bad("papr", e.to_string()))?;
                let (lo, hi, n) = p.thresholds_db;
                dam_core::metrics::threshold_grid(lo, hi, n).map_err(|e| bad("papr.thresholds_db", e.to_string()))?;
                Some(p)
            }
            (Kind::Papr, None) => return Err(bad("papr", "papr scenarios need a [papr] section".into())),
            (_, Some(_)) => return Err(bad("papr", "only papr scenarios take a [papr] section".into())),
            (_, None) => None,
        };

        let mut settings = SolverSettings::default();
        let s = &f.solver;
        if let Some(v) = s.feasibility_tolerance {
            settings.feasibility_tolerance = v;
        }
        if let Some(v) = s.duality_gap_tolerance {
            settings.duality_gap_tolerance = v;
        }
        if let Some(v) = s.bisection_epsilon {
            settings.bisection_epsilon = v;
        }
        if let Some(v) = s.sca_relative_stop {
            settings.sca_relative_stop = v;
        }
        if let Some(v) = s.max_iterations {
            settings.max_iterations = v;
        }
        settings.validate().map_err(|e| bad("solver", e.to_string()))?;

        if f.output.is_empty() || Path::new(&f.output).components().count() != 1 {
            return Err(bad("output", "must be a plain file name".into()));
        }

        let power_w = dbm_to_watts(f.power_dbm);
        let noise_w = dbm_to_watts(f.noise_dbm);
        log::info!("{label}: power {} dBm = {power_w:e} W, noise {} dBm = {noise_w:e} W", f.power_dbm, f.noise_dbm);

        Ok(Self {
            name: f.name,
            kind: f.kind,
            geometry,
            power_w,
            noise_w,
            schemes,
            beamformers: f.beamformers,
            seeds,
            sweep: f.sweep,
            num_subcarriers: f.num_subcarriers,
            coherence_samples: f.coherence_samples,
            papr,
            settings,
            output: f.output,
        })
    }

    pub fn with_seed_offset(mut self, offset: u64) -> Self {
        for s in &mut self.seeds {
            *s = s.wrapping_add(offset);
        }
        self
    }
}
