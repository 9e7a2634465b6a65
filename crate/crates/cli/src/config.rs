//! Experiment configuration: defaults, `key = value` files, environment and
//! flags, resolved in that order of increasing precedence.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Serialize;
use sqe_core::{AlphaGrid, EvolutionMode, EvolutionPlan, GridAngle, RelaxationParams};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}:{line}: {message}")]
    File {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("cannot read config file {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

impl From<sqe_core::SqeError> for ConfigError {
    fn from(e: sqe_core::SqeError) -> Self {
        ConfigError::Invalid(e.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    ModelA,
    Born,
    RelaxTime,
    Evolve,
    Corr,
    Chsh,
    Marginals,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::ModelA,
        Experiment::Born,
        Experiment::RelaxTime,
        Experiment::Evolve,
        Experiment::Corr,
        Experiment::Chsh,
        Experiment::Marginals,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::ModelA => "model-a",
            Experiment::Born => "born",
            Experiment::RelaxTime => "relax-time",
            Experiment::Evolve => "evolve",
            Experiment::Corr => "corr",
            Experiment::Chsh => "chsh",
            Experiment::Marginals => "marginals",
        }
    }

    fn default_trials(self) -> u64 {
        match self {
            Experiment::ModelA => 10_000,
            Experiment::RelaxTime => 100,
            Experiment::Evolve => 1_000,
            Experiment::Born | Experiment::Corr | Experiment::Chsh | Experiment::Marginals => 100_000,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn parse_mode(s: &str) -> Result<EvolutionMode, String> {
    s.parse().map_err(|e: sqe_core::SqeError| e.to_string())
}

/// Optional settings from one source; sources are layered with
/// [`Overrides::or`].
#[derive(Clone, Debug, Default, clap::Args)]
pub struct Overrides {
    /// Master seed
    #[arg(long, env = "SQE_LAB_SEED")]
    pub seed: Option<u64>,
    /// Trials (chains for evolve, runs per coupling for relax-time)
    #[arg(long)]
    pub trials: Option<u64>,
    /// SQEs per system
    #[arg(long)]
    pub n_sqe: Option<usize>,
    /// Points on the setting circle (even, at least 4)
    #[arg(long)]
    pub grid_size: Option<u32>,
    /// Per-sweep relaxation rate
    #[arg(long)]
    pub eta: Option<f64>,
    /// Equilibrium tolerance
    #[arg(long)]
    pub eps: Option<f64>,
    /// Output directory
    #[arg(long, env = "SQE_LAB_OUT_DIR")]
    pub out: Option<PathBuf>,
    /// Minimum dt/tau for the pure-state regime
    #[arg(long)]
    pub r_min: Option<f64>,
    /// Relaxation budget in sweeps
    #[arg(long)]
    pub max_sweeps: Option<u64>,
    /// Worker threads (0 = one per core)
    #[arg(long)]
    pub workers: Option<usize>,
    /// model-a: total entity count
    #[arg(long)]
    pub n_total: Option<u64>,
    /// model-a: target hbar
    #[arg(long)]
    pub hbar: Option<f64>,
    /// evolve: start setting in degrees
    #[arg(long, allow_hyphen_values = true)]
    pub alpha_start: Option<f64>,
    /// evolve: end setting in degrees
    #[arg(long, allow_hyphen_values = true)]
    pub alpha_end: Option<f64>,
    /// evolve: number of steps
    #[arg(long)]
    pub steps: Option<u32>,
    /// evolve: sweeps per step
    #[arg(long)]
    pub dt_sweeps: Option<u64>,
    /// evolve: adiabatic or stochastic
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<EvolutionMode>,
    /// chsh: a,a',b,b' in degrees
    #[arg(long, value_delimiter = ',', num_args = 1.., allow_hyphen_values = true)]
    pub angles: Option<Vec<f64>>,
    /// marginals: own setting in degrees
    #[arg(long, allow_hyphen_values = true)]
    pub own_alpha: Option<f64>,
    /// relax-time: peak couplings to sweep
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub g_peaks: Option<Vec<f64>>,
    /// Record wall time in the summary (makes it non-reproducible)
    #[arg(long)]
    pub timing: bool,
}

macro_rules! merge {
    ($hi:expr, $lo:expr, $($field:ident),*) => {
        Overrides {
            $($field: $hi.$field.or($lo.$field),)*
            timing: $hi.timing || $lo.timing,
        }
    };
}

impl Overrides {
    /// Field-wise `self` where set, otherwise `lower`.
    pub fn or(self, lower: Overrides) -> Overrides {
        merge!(
            self, lower, seed, trials, n_sqe, grid_size, eta, eps, out, r_min, max_sweeps, workers,
            n_total, hbar, alpha_start, alpha_end, steps, dt_sweeps, mode, angles, own_alpha, g_peaks
        )
    }

    /// Reads a `key = value` file. Blank lines and `#` comments are skipped;
    /// keys may use `-` or `_`.
    pub fn from_file(path: &Path) -> Result<Overrides, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::parse_str(&text).map_err(|(line, message)| ConfigError::File {
            path: path.to_owned(),
            line,
            message,
        })
    }

    pub fn parse_str(text: &str) -> Result<Overrides, (usize, String)> {
        let mut o = Overrides::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err((n + 1, format!("expected `key = value`, got {line:?}")));
            };
            o.set(&key.trim().replace('-', "_"), value.trim())
                .map_err(|m| (n + 1, m))?;
        }
        Ok(o)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<Option<T>, String> {
            v.parse().map(Some).map_err(|_| format!("invalid value {v:?} for {key}"))
        }
        fn list(key: &str, v: &str) -> Result<Option<Vec<f64>>, String> {
            v.split(',')
                .map(|x| x.trim().parse().map_err(|_| format!("invalid value {x:?} in {key}")))
                .collect::<Result<_, _>>()
                .map(Some)
        }
        match key {
            "seed" => self.seed = num(key, value)?,
            "trials" => self.trials = num(key, value)?,
            "n_sqe" => self.n_sqe = num(key, value)?,
            "grid_size" => self.grid_size = num(key, value)?,
            "eta" => self.eta = num(key, value)?,
            "eps" | "eps_eq" => self.eps = num(key, value)?,
            "out" | "output_path" => self.out = Some(PathBuf::from(value)),
            "r_min" => self.r_min = num(key, value)?,
            "max_sweeps" => self.max_sweeps = num(key, value)?,
            "workers" => self.workers = num(key, value)?,
            "n_total" => self.n_total = num(key, value)?,
            "hbar" => self.hbar = num(key, value)?,
            "alpha_start" => self.alpha_start = num(key, value)?,
            "alpha_end" => self.alpha_end = num(key, value)?,
            "steps" => self.steps = num(key, value)?,
            "dt_sweeps" => self.dt_sweeps = num(key, value)?,
            "mode" => self.mode = Some(parse_mode(value)?),
            "angles" => self.angles = list(key, value)?,
            "own_alpha" => self.own_alpha = num(key, value)?,
            "g_peaks" => self.g_peaks = list(key, value)?,
            "timing" => self.timing = num::<bool>(key, value)?.unwrap_or(false),
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }
}

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_OUT_DIR: &str = "sqe-lab-out";
pub const TSIRELSON_ANGLES_DEG: [f64; 4] = [0.0, 90.0, 45.0, 135.0];

/// Fully resolved configuration. Everything that can change a result is
/// echoed into the run summary; the output location, worker count and
/// timing flag are not.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub master_seed: u64,
    pub trials: u64,
    pub n_sqe: usize,
    pub grid_size: u32,
    pub eta: f64,
    pub eps_eq: f64,
    pub r_min: f64,
    pub max_sweeps: u64,
    pub n_total: u64,
    pub hbar: f64,
    pub alpha_start_deg: f64,
    pub alpha_end_deg: f64,
    pub steps: u32,
    pub dt_sweeps: u64,
    pub mode: EvolutionMode,
    pub angles_deg: [f64; 4],
    pub own_alpha_deg: f64,
    pub g_peaks: Vec<f64>,
    #[serde(skip)]
    pub output_path: PathBuf,
    #[serde(skip)]
    pub workers: usize,
    #[serde(skip)]
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn resolve(experiment: Experiment, o: Overrides) -> Result<Self, ConfigError> {
        // Relaxation-time sweeps default to a small fixture; the law is
        // independent of N and M.
        let (n_default, grid_default) = match experiment {
            Experiment::RelaxTime => (256, 16),
            _ => (1000, 360),
        };
        let angles = o.angles.unwrap_or(TSIRELSON_ANGLES_DEG.to_vec());
        let angles_deg: [f64; 4] = angles
            .try_into()
            .map_err(|v: Vec<f64>| ConfigError::Invalid(format!("angles needs 4 values, got {}", v.len())))?;
        let config = ExperimentConfig {
            experiment,
            master_seed: o.seed.unwrap_or(DEFAULT_SEED),
            trials: o.trials.unwrap_or(experiment.default_trials()),
            n_sqe: o.n_sqe.unwrap_or(n_default),
            grid_size: o.grid_size.unwrap_or(grid_default),
            eta: o.eta.unwrap_or(0.1),
            eps_eq: o.eps.unwrap_or(1e-3),
            r_min: o.r_min.unwrap_or(sqe_core::DEFAULT_R_MIN),
            max_sweeps: o.max_sweeps.unwrap_or(10_000),
            n_total: o.n_total.unwrap_or(10_000),
            hbar: o.hbar.unwrap_or(1.0),
            alpha_start_deg: o.alpha_start.unwrap_or(0.0),
            alpha_end_deg: o.alpha_end.unwrap_or(90.0),
            steps: o.steps.unwrap_or(10),
            dt_sweeps: o.dt_sweeps.unwrap_or(1000),
            mode: o.mode.unwrap_or(EvolutionMode::Stochastic),
            angles_deg,
            own_alpha_deg: o.own_alpha.unwrap_or(0.0),
            g_peaks: o.g_peaks.unwrap_or(vec![1.0, 0.5, 0.25]),
            output_path: o.out.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)),
            workers: o.workers.unwrap_or(0),
            timing: o.timing,
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.trials == 0 {
            return bad("trials must be positive".into());
        }
        if self.experiment == Experiment::ModelA && self.trials < 2 {
            return bad("model-a needs at least 2 trials".into());
        }
        if self.n_sqe < 2 {
            return bad(format!("n_sqe must be at least 2, got {}", self.n_sqe));
        }
        if !(self.r_min > 0.0 && self.r_min.is_finite()) {
            return bad(format!("r_min must be positive, got {}", self.r_min));
        }
        if self.n_total < 2 {
            return bad(format!("n_total must be at least 2, got {}", self.n_total));
        }
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return bad(format!("hbar must be positive, got {}", self.hbar));
        }
        if self.g_peaks.is_empty() || self.g_peaks.iter().any(|g| !(*g > 0.0 && *g <= 1.0)) {
            return bad("g_peaks must be non-empty values in (0, 1]".into());
        }
        self.grid()?;
        self.relaxation()?;
        match self.experiment {
            Experiment::Evolve => {
                self.plan()?;
            }
            Experiment::Chsh => {
                self.chsh_angles()?;
            }
            Experiment::Marginals => {
                self.angle(self.own_alpha_deg)?;
            }
            _ => {}
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<AlphaGrid, ConfigError> {
        Ok(AlphaGrid::new(self.grid_size)?)
    }

    pub fn relaxation(&self) -> Result<RelaxationParams, ConfigError> {
        Ok(RelaxationParams::new(self.eta, self.eps_eq, self.max_sweeps)?)
    }

    pub fn angle(&self, degrees: f64) -> Result<GridAngle, ConfigError> {
        Ok(self.grid()?.angle_deg(degrees)?)
    }

    pub fn plan(&self) -> Result<EvolutionPlan, ConfigError> {
        Ok(EvolutionPlan::new(
            self.grid()?,
            self.angle(self.alpha_start_deg)?,
            self.angle(self.alpha_end_deg)?,
            self.steps,
            self.dt_sweeps,
            self.mode,
        )?)
    }

    pub fn chsh_angles(&self) -> Result<sqe_core::ChshAngles, ConfigError> {
        let [a, a_prime, b, b_prime] = self.angles_deg;
        Ok(sqe_core::ChshAngles {
            a: self.angle(a)?,
            a_prime: self.angle(a_prime)?,
            b: self.angle(b)?,
            b_prime: self.angle(b_prime)?,
        })
    }
}
