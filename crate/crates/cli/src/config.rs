//! Experiment configuration: JSON file plus flag overrides.

use std::path::PathBuf;

use clap::Parser;
use serde::{Deserialize, Serialize};

/// Pipelines the runner can execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Stationary,
    Sweep,
    Evolve,
    Decay,
    Oracle,
    Convergence,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stationary" => Ok(Mode::Stationary),
            "sweep" => Ok(Mode::Sweep),
            "evolve" => Ok(Mode::Evolve),
            "decay" => Ok(Mode::Decay),
            "oracle" => Ok(Mode::Oracle),
            "convergence" => Ok(Mode::Convergence),
            other => Err(format!(
                "unknown mode '{other}' (expected stationary|sweep|evolve|decay|oracle|convergence)"
            )),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub d: f64,
    pub v_star: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    pub dt: f64,
    pub t_final: f64,
    #[serde(default = "default_sample_every")]
    pub sample_every: usize,
}

fn default_sample_every() -> usize {
    200
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSection {
    pub eps: f64,
    /// Perturbation shape tag; only "default" (the cosine/sine pair) exists.
    #[serde(default = "default_mode_tag")]
    pub mode: String,
}

fn default_mode_tag() -> String {
    "default".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Strictly descending, strictly positive diffusivities.
    pub d_values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSection {
    /// Ladder length; grid.n and scheme.dt describe the coarsest rung,
    /// each finer rung halves h and quarters dt.
    pub levels: usize,
}

/// The full experiment description. `seed` is echoed into summaries for
/// provenance but unused: every pipeline is deterministic.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub model: ModelSection,
    pub grid: GridSection,
    #[serde(default)]
    pub scheme: Option<SchemeSection>,
    #[serde(default)]
    pub perturbation: Option<PerturbationSection>,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub convergence: Option<ConvergenceSection>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Write the timestamp comment line into CSV artifacts.
    #[serde(default = "default_true")]
    pub timestamp: bool,
}

fn default_true() -> bool {
    true
}

/// Numerical verification runner for the 1D exogenous chemotaxis system.
#[derive(Debug, Parser)]
#[command(name = "exochem", version, about)]
pub struct Flags {
    /// JSON config file; flags given alongside override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// stationary | sweep | evolve | decay | oracle | convergence
    #[arg(long)]
    pub mode: Option<Mode>,
    /// Chemical diffusivity D >= 0.
    #[arg(long = "D", allow_hyphen_values = true)]
    pub d: Option<f64>,
    /// Dirichlet boundary value v* (needed when D > 0).
    #[arg(long)]
    pub vstar: Option<f64>,
    /// Total cell mass M.
    #[arg(long, allow_hyphen_values = true)]
    pub mass: Option<f64>,
    /// Grid nodes n >= 3.
    #[arg(long)]
    pub n: Option<usize>,
    /// Time step.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Final time.
    #[arg(long = "T")]
    pub t_final: Option<f64>,
    /// Perturbation amplitude.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Sampling stride in steps.
    #[arg(long)]
    pub sample_every: Option<usize>,
    /// Comma-separated descending D values (sweep mode).
    #[arg(long, value_delimiter = ',')]
    pub d_values: Option<Vec<f64>>,
    /// Convergence-ladder length (convergence mode).
    #[arg(long)]
    pub levels: Option<usize>,
    /// Output directory.
    #[arg(long = "out")]
    pub output_dir: Option<PathBuf>,
    /// Reserved; echoed into summaries.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Suppress the timestamp comment line in CSV artifacts, making reruns
    /// byte-identical.
    #[arg(long)]
    pub no_timestamp: bool,
}

/// Schema or precondition failure; maps to exit code 4.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl ExperimentConfig {
    /// Builds the effective config: file values (when given) overridden by
    /// flags, then validated.
    pub fn from_flags(flags: &Flags) -> Result<ExperimentConfig, ConfigError> {
        let mut config = match &flags.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
                serde_json::from_str::<ExperimentConfig>(&text)
                    .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?
            }
            None => ExperimentConfig {
                mode: flags
                    .mode
                    .ok_or_else(|| ConfigError("--mode (or --config) is required".into()))?,
                model: ModelSection {
                    d: flags.d.ok_or_else(|| ConfigError("--D is required".into()))?,
                    v_star: flags.vstar.unwrap_or(0.0),
                    mass: flags
                        .mass
                        .ok_or_else(|| ConfigError("--mass is required".into()))?,
                },
                grid: GridSection {
                    n: flags.n.ok_or_else(|| ConfigError("--n is required".into()))?,
                },
                scheme: None,
                perturbation: None,
                sweep: None,
                convergence: None,
                output_dir: PathBuf::from("out"),
                seed: 0,
                timestamp: true,
            },
        };

        if let Some(mode) = flags.mode {
            config.mode = mode;
        }
        if let Some(d) = flags.d {
            config.model.d = d;
        }
        if let Some(v) = flags.vstar {
            config.model.v_star = v;
        }
        if let Some(m) = flags.mass {
            config.model.mass = m;
        }
        if let Some(n) = flags.n {
            config.grid.n = n;
        }
        if flags.dt.is_some() || flags.t_final.is_some() || flags.sample_every.is_some() {
            let current = config.scheme.take();
            config.scheme = Some(SchemeSection {
                dt: flags
                    .dt
                    .or(current.as_ref().map(|s| s.dt))
                    .ok_or_else(|| ConfigError("--dt is required for this mode".into()))?,
                t_final: flags
                    .t_final
                    .or(current.as_ref().map(|s| s.t_final))
                    .ok_or_else(|| ConfigError("--T is required for this mode".into()))?,
                sample_every: flags
                    .sample_every
                    .or(current.as_ref().map(|s| s.sample_every))
                    .unwrap_or_else(default_sample_every),
            });
        }
        if let Some(eps) = flags.eps {
            let mode_tag = config
                .perturbation
                .as_ref()
                .map(|p| p.mode.clone())
                .unwrap_or_else(default_mode_tag);
            config.perturbation = Some(PerturbationSection { eps, mode: mode_tag });
        }
        if let Some(values) = &flags.d_values {
            config.sweep = Some(SweepSection { d_values: values.clone() });
        }
        if let Some(levels) = flags.levels {
            config.convergence = Some(ConvergenceSection { levels });
        }
        if let Some(out) = &flags.output_dir {
            config.output_dir = out.clone();
        }
        if let Some(seed) = flags.seed {
            config.seed = seed;
        }
        if flags.no_timestamp {
            config.timestamp = false;
        }

        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let m = &self.model;
        if !m.d.is_finite() || m.d < 0.0 {
            return Err(ConfigError(format!("model.d must be >= 0, got {}", m.d)));
        }
        if !m.mass.is_finite() || m.mass < 0.0 {
            return Err(ConfigError(format!("model.mass must be >= 0, got {}", m.mass)));
        }
        if m.d > 0.0 && (m.v_star.is_nan() || m.v_star <= 0.0) {
            return Err(ConfigError(format!(
                "model.v_star must be > 0 when D > 0, got {}",
                m.v_star
            )));
        }
        if self.grid.n < 3 {
            return Err(ConfigError(format!("grid.n must be >= 3, got {}", self.grid.n)));
        }
        if let Some(s) = &self.scheme {
            if s.dt.is_nan() || s.dt <= 0.0 || s.t_final.is_nan() || s.t_final <= 0.0 {
                return Err(ConfigError(format!(
                    "scheme.dt and scheme.t_final must be > 0, got dt={} t_final={}",
                    s.dt, s.t_final
                )));
            }
            if s.sample_every == 0 {
                return Err(ConfigError("scheme.sample_every must be >= 1".into()));
            }
        }
        if let Some(p) = &self.perturbation {
            if !p.eps.is_finite() || p.eps < 0.0 {
                return Err(ConfigError(format!(
                    "perturbation.eps must be >= 0, got {}",
                    p.eps
                )));
            }
            if p.mode != "default" {
                return Err(ConfigError(format!(
                    "perturbation.mode '{}' unknown (only \"default\" exists)",
                    p.mode
                )));
            }
        }

        // mode-specific requirements
        let need_scheme = matches!(
            self.mode,
            Mode::Evolve | Mode::Decay | Mode::Oracle | Mode::Convergence
        );
        if need_scheme && self.scheme.is_none() {
            return Err(ConfigError(format!(
                "mode {:?} requires the scheme section (--dt, --T)",
                self.mode
            )));
        }
        match self.mode {
            Mode::Sweep => {
                let sweep = self
                    .sweep
                    .as_ref()
                    .ok_or_else(|| ConfigError("sweep mode requires sweep.d_values".into()))?;
                if sweep.d_values.is_empty() {
                    return Err(ConfigError("sweep.d_values must be non-empty".into()));
                }
            }
            Mode::Evolve | Mode::Decay | Mode::Oracle => {
                if self.perturbation.is_none() {
                    return Err(ConfigError(format!(
                        "mode {:?} requires the perturbation section (--eps)",
                        self.mode
                    )));
                }
            }
            Mode::Convergence => {
                let levels = self.convergence.as_ref().map(|c| c.levels).unwrap_or(0);
                if levels < 3 {
                    return Err(ConfigError(
                        "convergence mode requires convergence.levels >= 3".into(),
                    ));
                }
            }
            Mode::Stationary => {
                if self.model.d <= 0.0 {
                    return Err(ConfigError(
                        "stationary mode requires D > 0 (the D = 0 steady state is (M, 0))".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}
