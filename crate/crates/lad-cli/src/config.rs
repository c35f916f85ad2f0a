//! Experiment configuration: TOML file schema, per-experiment defaults, and
//! the fully resolved settings handed to the runners.
//!
//! Resolution order is fixed: built-in defaults for the experiment (picked by
//! `--paper-scale`), then the config file, then command-line flags. The
//! resolved settings are serialized verbatim into the run manifest, so a run
//! can always be repeated from its manifest alone.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{CliError, Result};

/// The experiment an invocation runs. Serialized ids use snake_case and are
/// what the `experiment` key in a config file must contain, if present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Generate,
    Embed,
    LandmarkSweep,
    AlphaSweep,
    InitialSensor,
    LandmarkCases,
    VarianceRate,
    BenchTiming,
}

impl Experiment {
    pub fn id(self) -> &'static str {
        match self {
            Experiment::Generate => "generate",
            Experiment::Embed => "embed",
            Experiment::LandmarkSweep => "landmark_sweep",
            Experiment::AlphaSweep => "alpha_sweep",
            Experiment::InitialSensor => "initial_sensor",
            Experiment::LandmarkCases => "landmark_cases",
            Experiment::VarianceRate => "variance_rate",
            Experiment::BenchTiming => "bench_timing",
        }
    }
}

/// Manifold selector as written in config files, e.g.
/// `sensor1 = { kind = "torus", major = 3.0, minor = 1.0 }`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ManifoldSpec {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub major: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub minor: Option<f64>,
}

impl ManifoldSpec {
    pub fn named(kind: &str) -> Self {
        ManifoldSpec {
            kind: kind.to_string(),
            scale: None,
            a: None,
            b: None,
            major: None,
            minor: None,
        }
    }

    pub fn scaled(kind: &str, scale: f64) -> Self {
        let mut s = Self::named(kind);
        s.scale = Some(scale);
        s
    }

    pub fn torus_like(kind: &str, major: f64, minor: f64) -> Self {
        let mut s = Self::named(kind);
        s.major = Some(major);
        s.minor = Some(minor);
        s
    }

    pub fn ellipse(a: f64, b: f64) -> Self {
        let mut s = Self::named("ellipse");
        s.a = Some(a);
        s.b = Some(b);
        s
    }

    /// Builds the generator, rejecting unknown kinds and parameter misuse.
    pub fn build(&self) -> Result<lad::manifolds::ManifoldGenerator> {
        use lad::manifolds::ManifoldGenerator as G;
        let gen = match self.kind.as_str() {
            "circle" => match self.scale {
                Some(s) => G::scaled_circle(s),
                None => G::circle(),
            },
            "ellipse" => match (self.a, self.b) {
                (Some(a), Some(b)) => G::ellipse_axes(a, b),
                (None, None) => G::ellipse(),
                _ => {
                    return Err(CliError::config(
                        "ellipse needs both `a` and `b`, or neither",
                    ))
                }
            },
            "trefoil" => G::trefoil(),
            "torus" => {
                let major = self.major.unwrap_or(3.0);
                let minor = self.minor.unwrap_or(1.0);
                G::torus(major, minor)
            }
            "deformed_torus" => {
                let major = self.major.unwrap_or(3.0);
                let minor = self.minor.unwrap_or(1.0);
                G::deformed_torus(major, minor)
            }
            "sphere" => match self.scale {
                Some(s) => G::scaled_sphere(s),
                None => G::sphere(),
            },
            other => return Err(CliError::config(format!("unknown generator kind: {other}"))),
        };
        gen.validate().map_err(CliError::from)?;
        Ok(gen)
    }
}

/// Bandwidth setting: a fixed value, or the median-squared-distance heuristic
/// resolved against the sensor's point cloud at run time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EpsSetting {
    Fixed(f64),
    Named(MedianName),
}

/// The only named bandwidth rule. A dedicated enum keeps the TOML form a
/// plain string (`eps1 = "median"`) while rejecting typos at parse time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MedianName {
    #[serde(rename = "median")]
    Median,
}

impl EpsSetting {
    pub const MEDIAN: EpsSetting = EpsSetting::Named(MedianName::Median);

    pub fn validate(&self) -> Result<()> {
        if let EpsSetting::Fixed(v) = self {
            if !(v.is_finite() && *v > 0.0) {
                return Err(CliError::config(format!(
                    "bandwidth must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// How landmarks are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LandmarkScheme {
    /// Uniform subset of the data (landmark density follows the data density).
    Subset,
    /// Fresh draw from `landmark_density`, independent of the data.
    Density,
    /// Every sample is a landmark.
    Full,
}

/// Fused-model selector for `embed`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ad,
    Lad,
}

/// Which sensor's diffusion acts first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartChoice {
    Sensor1,
    Sensor2,
}

impl StartChoice {
    pub fn to_lad(self) -> lad::diffusion::StartSensor {
        match self {
            StartChoice::Sensor1 => lad::diffusion::StartSensor::Sensor1,
            StartChoice::Sensor2 => lad::diffusion::StartSensor::Sensor2,
        }
    }
}

/// Surface for the operator-deviation experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Surface {
    Circle,
    Sphere,
}

/// Raw config-file schema. Everything is optional; absent keys fall back to
/// the experiment's defaults. Unknown keys are rejected so a misspelled
/// field cannot silently revert to a default.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub experiment: Option<Experiment>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub n_list: Option<Vec<usize>>,
    pub m_list: Option<Vec<usize>>,
    pub alphas: Option<Vec<f64>>,
    pub alpha: Option<f64>,
    pub eps1: Option<EpsSetting>,
    pub eps2: Option<EpsSetting>,
    pub eps_grid: Option<Vec<f64>>,
    pub q: Option<usize>,
    pub t: Option<f64>,
    pub trials: Option<usize>,
    pub sensor1: Option<ManifoldSpec>,
    pub sensor2: Option<ManifoldSpec>,
    pub data_density: Option<String>,
    pub landmark_density: Option<String>,
    pub landmarks: Option<LandmarkScheme>,
    pub model: Option<ModelKind>,
    pub start: Option<StartChoice>,
    pub points: Option<PathBuf>,
    pub bench_runs: Option<usize>,
    pub bench_warmup: Option<usize>,
    pub oracle_nodes: Option<usize>,
    pub oracle_theta: Option<usize>,
    pub oracle_phi: Option<usize>,
    pub surface: Option<Surface>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::config(format!("cannot parse {}: {e}", path.display())))
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub paper_scale: bool,
}

/// Fully resolved settings: every field concrete, every list nonempty where
/// the experiment reads it. This is what runners consume and what the
/// manifest records.
#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    pub experiment: Experiment,
    pub seed: u64,
    pub out: PathBuf,
    pub paper_scale: bool,
    pub n: usize,
    pub m: usize,
    pub n_list: Vec<usize>,
    pub m_list: Vec<usize>,
    pub alphas: Vec<f64>,
    pub alpha: f64,
    pub eps1: EpsSetting,
    pub eps2: EpsSetting,
    pub eps_grid: Vec<f64>,
    pub q: usize,
    pub t: f64,
    pub trials: usize,
    pub sensor1: ManifoldSpec,
    pub sensor2: ManifoldSpec,
    pub data_density: String,
    pub landmark_density: String,
    pub landmarks: LandmarkScheme,
    pub model: ModelKind,
    pub start: StartChoice,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<PathBuf>,
    pub bench_runs: usize,
    pub bench_warmup: usize,
    pub oracle_nodes: usize,
    pub oracle_theta: usize,
    pub oracle_phi: usize,
    pub surface: Surface,
}

/// The five-point alpha grid shared by the sweep experiments.
pub const ALPHA_GRID: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

fn geomspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let ratio = (hi / lo).powf(1.0 / (count as f64 - 1.0));
    (0..count).map(|i| lo * ratio.powi(i as i32)).collect()
}

impl Settings {
    /// Built-in defaults for one experiment. Desk scale keeps the whole suite
    /// in the minutes range on one core; paper scale restores the sizes the
    /// published figures used.
    pub fn defaults(experiment: Experiment, paper_scale: bool) -> Settings {
        let mut s = Settings {
            experiment,
            seed: 7,
            out: PathBuf::from(format!("runs/{}", experiment.id())),
            paper_scale,
            n: 1000,
            m: 200,
            n_list: Vec::new(),
            m_list: Vec::new(),
            alphas: ALPHA_GRID.to_vec(),
            alpha: 0.5,
            eps1: EpsSetting::MEDIAN,
            eps2: EpsSetting::MEDIAN,
            eps_grid: Vec::new(),
            q: 3,
            t: 1.0,
            trials: 1,
            sensor1: ManifoldSpec::ellipse(2.0, 1.0),
            sensor2: ManifoldSpec::named("circle"),
            data_density: "uniform".to_string(),
            landmark_density: "uniform".to_string(),
            landmarks: LandmarkScheme::Subset,
            model: ModelKind::Lad,
            start: StartChoice::Sensor2,
            points: None,
            bench_runs: 5,
            bench_warmup: 1,
            oracle_nodes: lad::oracle::CURVE_NODES,
            oracle_theta: lad::oracle::SPHERE_THETA,
            oracle_phi: lad::oracle::SPHERE_PHI,
            surface: Surface::Circle,
        };
        match experiment {
            Experiment::Generate | Experiment::Embed => {
                s.n = if paper_scale { 3000 } else { 1000 };
                s.m = if paper_scale { 600 } else { 200 };
            }
            Experiment::LandmarkSweep => {
                s.sensor1 = ManifoldSpec::torus_like("torus", 3.0, 1.0);
                s.sensor2 = ManifoldSpec::torus_like("deformed_torus", 3.0, 1.0);
                s.q = 6;
                s.eps1 = EpsSetting::Fixed(1.0);
                s.eps2 = EpsSetting::Fixed(1.0);
                if paper_scale {
                    s.n = 5000;
                    s.m_list = vec![45, 64, 90, 128, 181, 256, 362, 512, 724, 1024];
                    s.trials = 30;
                } else {
                    s.n = 2000;
                    s.m_list = vec![32, 64, 128, 256, 512];
                    s.trials = 5;
                }
            }
            Experiment::AlphaSweep => {
                s.data_density = "cosine".to_string();
                // Small enough that kernel bias does not mask the alpha
                // effect on eigenvector spans at these sample sizes.
                s.eps1 = EpsSetting::Fixed(0.03);
                s.eps2 = EpsSetting::Fixed(0.03);
                if paper_scale {
                    s.n = 2500;
                    s.m = 1000;
                    s.trials = 10;
                } else {
                    s.n = 1000;
                    s.m = 400;
                    s.trials = 7;
                }
            }
            Experiment::InitialSensor => {
                s.sensor1 = ManifoldSpec::ellipse(3.0, 1.0);
                s.eps1 = EpsSetting::Fixed(0.2);
                s.eps2 = EpsSetting::Fixed(0.2);
                if paper_scale {
                    s.n = 2000;
                } else {
                    s.n = 800;
                }
                // The AD-recovery check in this report uses m = n/10 subset
                // landmarks.
                s.m = s.n / 10;
            }
            Experiment::LandmarkCases => {
                s.eps1 = EpsSetting::Fixed(0.1);
                s.eps2 = EpsSetting::Fixed(0.1);
                s.landmarks = LandmarkScheme::Density;
                if paper_scale {
                    s.n = 2800;
                    s.m = 800;
                    s.trials = 3;
                } else {
                    s.n = 1400;
                    s.m = 400;
                    s.trials = 1;
                }
            }
            Experiment::VarianceRate => {
                s.sensor1 = ManifoldSpec::named("circle");
                s.sensor2 = ManifoldSpec::scaled("circle", 1.5);
                if paper_scale {
                    s.n = 3000;
                    s.m = 1500;
                    s.trials = 50;
                } else {
                    s.n = 1500;
                    s.m = 750;
                    s.trials = 20;
                }
                s.eps_grid = geomspace(5e-3, 0.32, 8);
            }
            Experiment::BenchTiming => {
                s.m = 256;
                s.n_list = vec![2000, 4000, 8000, 16000];
                s.m_list = vec![64, 128, 256, 512];
                s.n = 4000;
                s.eps1 = EpsSetting::Fixed(1.0);
                s.eps2 = EpsSetting::Fixed(1.0);
                s.sensor1 = ManifoldSpec::torus_like("torus", 3.0, 1.0);
                s.sensor2 = ManifoldSpec::torus_like("deformed_torus", 3.0, 1.0);
                if paper_scale {
                    s.bench_runs = 5;
                } else {
                    s.bench_runs = 3;
                }
            }
        }
        s
    }

    /// Applies defaults, then the file, then flags, and validates the result.
    pub fn resolve(
        experiment: Experiment,
        file: &FileConfig,
        over: &Overrides,
    ) -> Result<Settings> {
        if let Some(declared) = file.experiment {
            if declared != experiment {
                return Err(CliError::config(format!(
                    "config file declares experiment `{}` but the `{}` command was invoked",
                    declared.id(),
                    experiment.id()
                )));
            }
        }
        let mut s = Settings::defaults(experiment, over.paper_scale);
        if let Some(v) = file.seed {
            s.seed = v;
        }
        if let Some(v) = &file.out {
            s.out = v.clone();
        }
        if let Some(v) = file.n {
            s.n = v;
            if experiment == Experiment::InitialSensor && file.m.is_none() {
                s.m = v / 10;
            }
        }
        if let Some(v) = file.m {
            s.m = v;
        }
        if let Some(v) = &file.n_list {
            s.n_list = v.clone();
        }
        if let Some(v) = &file.m_list {
            s.m_list = v.clone();
        }
        if let Some(v) = &file.alphas {
            s.alphas = v.clone();
        }
        if let Some(v) = file.alpha {
            s.alpha = v;
        }
        if let Some(v) = file.eps1 {
            s.eps1 = v;
        }
        if let Some(v) = file.eps2 {
            s.eps2 = v;
        }
        if let Some(v) = &file.eps_grid {
            s.eps_grid = v.clone();
        }
        if let Some(v) = file.q {
            s.q = v;
        }
        if let Some(v) = file.t {
            s.t = v;
        }
        if let Some(v) = file.trials {
            s.trials = v;
        }
        if let Some(v) = &file.sensor1 {
            s.sensor1 = v.clone();
        }
        if let Some(v) = &file.sensor2 {
            s.sensor2 = v.clone();
        }
        if let Some(v) = &file.data_density {
            s.data_density = v.clone();
        }
        if let Some(v) = &file.landmark_density {
            s.landmark_density = v.clone();
        }
        if let Some(v) = file.landmarks {
            s.landmarks = v;
        }
        if let Some(v) = file.model {
            s.model = v;
        }
        if let Some(v) = file.start {
            s.start = v;
        }
        if let Some(v) = &file.points {
            s.points = Some(v.clone());
        }
        if let Some(v) = file.bench_runs {
            s.bench_runs = v;
        }
        if let Some(v) = file.bench_warmup {
            s.bench_warmup = v;
        }
        if let Some(v) = file.oracle_nodes {
            s.oracle_nodes = v;
        }
        if let Some(v) = file.oracle_theta {
            s.oracle_theta = v;
        }
        if let Some(v) = file.oracle_phi {
            s.oracle_phi = v;
        }
        if let Some(v) = file.surface {
            s.surface = v;
        }
        // The sphere deviation study swaps in its own defaults: sphere
        // sensors, and a shorter, higher bandwidth grid, since the oracle
        // floor sits near eps = 6e-3 at the default sphere resolution and
        // each trial costs more than on the circle.
        if experiment == Experiment::VarianceRate && s.surface == Surface::Sphere {
            if file.sensor1.is_none() {
                s.sensor1 = ManifoldSpec::named("sphere");
            }
            if file.sensor2.is_none() {
                s.sensor2 = ManifoldSpec::scaled("sphere", 0.8);
            }
            if file.eps_grid.is_none() {
                s.eps_grid = geomspace(0.03, 0.3, 6);
            }
            if file.trials.is_none() {
                s.trials = if over.paper_scale { 25 } else { 10 };
            }
        }
        if let Some(v) = over.seed {
            s.seed = v;
        }
        if let Some(v) = &over.out {
            s.out = v.clone();
        }
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(CliError::config("trials must be at least 1"));
        }
        if self.n < 2 {
            return Err(CliError::config("n must be at least 2"));
        }
        if self.m == 0 {
            return Err(CliError::config("m must be positive"));
        }
        if self.q == 0 {
            return Err(CliError::config("q must be positive"));
        }
        if !self.t.is_finite() {
            return Err(CliError::config("t must be finite"));
        }
        for &a in std::iter::once(&self.alpha).chain(self.alphas.iter()) {
            if !(0.0..=1.0).contains(&a) {
                return Err(CliError::config(format!("alpha {a} outside [0, 1]")));
            }
        }
        self.eps1.validate()?;
        self.eps2.validate()?;
        for &e in &self.eps_grid {
            if !(e.is_finite() && e > 0.0) {
                return Err(CliError::config(format!(
                    "bandwidth grid entry {e} must be positive"
                )));
            }
        }
        match self.experiment {
            Experiment::LandmarkSweep => {
                if self.m_list.is_empty() {
                    return Err(CliError::config("m_list must be nonempty"));
                }
                if self.m_list.iter().any(|&m| m == 0 || m > self.n) {
                    return Err(CliError::config("every m in m_list must be in 1..=n"));
                }
            }
            Experiment::AlphaSweep | Experiment::LandmarkCases => {
                if self.alphas.is_empty() {
                    return Err(CliError::config("alphas must be nonempty"));
                }
            }
            Experiment::VarianceRate => {
                if self.eps_grid.len() < 2 {
                    return Err(CliError::config(
                        "eps_grid needs at least two bandwidths to fit a slope",
                    ));
                }
            }
            Experiment::BenchTiming => {
                if self.n_list.is_empty() || self.m_list.is_empty() {
                    return Err(CliError::config("n_list and m_list must be nonempty"));
                }
            }
            _ => {}
        }
        // Surface the generator errors at config time rather than mid-run.
        self.sensor1.build()?;
        self.sensor2.build()?;
        lad::manifolds::builtin_density(&self.data_density).map_err(CliError::from)?;
        lad::manifolds::builtin_density(&self.landmark_density).map_err(CliError::from)?;
        Ok(())
    }

    /// Seed for one trial; trials are independent streams derived by XOR so
    /// they can run in any order.
    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.seed ^ (trial as u64)
    }

    pub fn density(&self) -> lad::manifolds::Density {
        // validate() has already vetted the name.
        lad::manifolds::builtin_density(&self.data_density).expect("validated density")
    }

    pub fn landmark_density_fn(&self) -> lad::manifolds::Density {
        lad::manifolds::builtin_density(&self.landmark_density).expect("validated density")
    }
}
