//! Experiment configuration: a flat TOML file merged with presets and flags.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use graph_rbm::Mesh1D;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const PAPER_GRAPH: &str = "paper";
pub const OVERLAP: &str = "paper_overlap_3";
pub const NONOVERLAP: &str = "paper_nonoverlap_3";
pub const TRIVIAL: &str = "trivial";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    #[value(name = "paper")]
    Paper,
    #[value(name = "paper_overlap_3")]
    PaperOverlap3,
    #[value(name = "paper_nonoverlap_3")]
    PaperNonoverlap3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Solve,
    Rbm,
    Sweep,
    Control,
    Report,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Solve => "solve",
            CommandKind::Rbm => "rbm",
            CommandKind::Sweep => "sweep",
            CommandKind::Control => "control",
            CommandKind::Report => "report",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initial {
    #[default]
    Manufactured,
    Zero,
}

/// Keys accepted in a config file. Every key is optional; unknown keys are errors.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub graph: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zeta: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decomposition: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub realizations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<Initial>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub meshes: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dof_cap: Option<usize>,
    /// Per-edge coefficients of the manufactured solution, in edge order.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Command-line values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub preset: Option<Preset>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
}

/// Fully resolved run parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub command: CommandKind,
    pub graph: String,
    pub n: usize,
    pub zeta: usize,
    pub horizon: f64,
    pub length: f64,
    pub decomposition: String,
    /// Batch length after alignment with the time step; `None` for `solve` and `sweep`.
    pub delta: Option<f64>,
    /// Requested batch length when alignment changed it.
    pub delta_requested: Option<f64>,
    pub epsilon: Option<f64>,
    pub realizations: usize,
    pub seed: u64,
    pub target: f64,
    pub initial: Initial,
    pub tol: f64,
    pub max_iter: usize,
    pub out: PathBuf,
    pub jobs: Option<usize>,
    pub meshes: Vec<usize>,
    pub dof_cap: usize,
    pub coefficients: Option<Vec<f64>>,
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> CliResult<()> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(msg()))
    }
}

fn positive(name: &str, v: f64) -> CliResult<()> {
    check(v.is_finite() && v > 0.0, || format!("{name} must be positive, got {v}"))
}

fn anchored(base: Option<&Path>, value: &str) -> String {
    let p = Path::new(value);
    match base {
        Some(dir) if p.is_relative() => dir.join(p).to_string_lossy().into_owned(),
        _ => value.to_string(),
    }
}

/// Aligns `delta` to the nearest positive multiple of `dt`.
pub fn align_delta(delta: f64, dt: f64) -> f64 {
    (delta / dt).round().max(1.0) * dt
}

impl Resolved {
    pub fn new(command: CommandKind, cfg: ExperimentConfig, config_dir: Option<&Path>, ov: &Overrides) -> CliResult<Self> {
        let preset = ov.preset.unwrap_or(Preset::Paper);
        let control = command == CommandKind::Control;
        let n = cfg.n.unwrap_or(if control { 30 } else { 300 });
        let zeta = cfg.zeta.unwrap_or(if control { 300 } else { 201 });
        let horizon = cfg.horizon.unwrap_or(1.0);
        let length = cfg.length.unwrap_or(1.0);
        let realizations = cfg.realizations.unwrap_or(if control { 20 } else { 30 });
        let tol = cfg.tol.unwrap_or(1e-8);
        let jobs = ov.jobs.or(cfg.jobs);
        let meshes = cfg.meshes.clone().unwrap_or_else(|| vec![1, 2, 3, 4, 6]);

        check(n >= 1, || "n must be positive".into())?;
        check(zeta >= 2, || format!("zeta must be at least 2, got {zeta}"))?;
        positive("horizon", horizon)?;
        positive("length", length)?;
        check(realizations >= 1, || "realizations must be positive".into())?;
        positive("tol", tol)?;
        check(jobs != Some(0), || "jobs must be positive".into())?;
        check(!meshes.is_empty() && meshes.iter().all(|&m| m >= 1), || "meshes must be a nonempty list of positive sizes".into())?;
        let dof_cap = cfg.dof_cap.unwrap_or(1_000_000);
        check(dof_cap >= 1, || "dof_cap must be positive".into())?;
        let target = cfg.target.unwrap_or(1.0);
        check(target.is_finite(), || "target must be finite".into())?;
        if let Some(c) = &cfg.coefficients {
            check(c.iter().all(|v| v.is_finite()), || "coefficients must be finite".into())?;
        }

        if cfg.delta.is_some() && cfg.epsilon.is_some() {
            return Err(CliError::Config("give either delta or epsilon, not both".into()));
        }
        if let Some(d) = cfg.delta {
            positive("delta", d)?;
        }
        if let Some(e) = cfg.epsilon {
            check((0.0..1.0).contains(&e), || format!("epsilon must lie in [0, 1), got {e}"))?;
        }

        let (delta, delta_requested, epsilon) = match command {
            CommandKind::Solve => (None, None, None),
            CommandKind::Sweep => {
                check(cfg.delta.is_none(), || "sweep derives delta from epsilon; remove delta".into())?;
                (None, None, Some(cfg.epsilon.unwrap_or(1e-4)))
            }
            CommandKind::Rbm | CommandKind::Control | CommandKind::Report => {
                let dt = horizon / (zeta - 1) as f64;
                let raw = match (cfg.delta, cfg.epsilon) {
                    (Some(d), _) => d,
                    (None, Some(e)) => Mesh1D::for_length(length, n).h.powf(7.0 / (1.0 - e)),
                    (None, None) if control => dt,
                    (None, None) => 0.01,
                };
                let aligned = align_delta(raw, dt);
                let moved = (aligned - raw).abs() > 1e-9 * raw;
                (Some(aligned), moved.then_some(raw), cfg.epsilon)
            }
        };

        let decomposition = match cfg.decomposition.as_deref() {
            Some(name @ (OVERLAP | NONOVERLAP | TRIVIAL)) => name.to_string(),
            Some(path) => anchored(config_dir, path),
            None => match preset {
                Preset::PaperNonoverlap3 => NONOVERLAP.into(),
                Preset::Paper | Preset::PaperOverlap3 => OVERLAP.into(),
            },
        };
        let graph = match cfg.graph.as_deref() {
            None | Some(PAPER_GRAPH) => PAPER_GRAPH.to_string(),
            Some(path) => anchored(config_dir, path),
        };
        let out = ov
            .out
            .clone()
            .or_else(|| cfg.out.as_ref().map(|p| PathBuf::from(anchored(config_dir, &p.to_string_lossy()))))
            .unwrap_or_else(|| PathBuf::from("out").join(command.name()));

        Ok(Self {
            command,
            graph,
            n,
            zeta,
            horizon,
            length,
            decomposition,
            delta,
            delta_requested,
            epsilon,
            realizations,
            seed: ov.seed.or(cfg.seed).unwrap_or(0),
            target,
            initial: cfg.initial.unwrap_or_default(),
            tol,
            max_iter: cfg.max_iter.unwrap_or(500),
            out,
            jobs,
            meshes,
            dof_cap,
            coefficients: cfg.coefficients,
        })
    }

    /// Config that reproduces this run when passed back with `--config`.
    pub fn to_config(&self) -> ExperimentConfig {
        ExperimentConfig {
            graph: Some(self.graph.clone()),
            n: Some(self.n),
            zeta: Some(self.zeta),
            horizon: Some(self.horizon),
            length: Some(self.length),
            decomposition: Some(self.decomposition.clone()),
            delta: self.delta,
            epsilon: if self.delta.is_some() { None } else { self.epsilon },
            realizations: Some(self.realizations),
            seed: Some(self.seed),
            target: Some(self.target),
            initial: Some(self.initial),
            tol: Some(self.tol),
            max_iter: Some(self.max_iter),
            out: Some(self.out.clone()),
            jobs: self.jobs,
            meshes: Some(self.meshes.clone()),
            dof_cap: Some(self.dof_cap),
            coefficients: self.coefficients.clone(),
        }
    }

    /// The resolved config as TOML, with the command and any delta adjustment
    /// recorded in leading comments.
    pub fn to_toml(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# command: {}", self.command.name());
        if let Some(e) = self.epsilon.filter(|_| self.delta.is_some()) {
            let _ = writeln!(s, "# delta derived from epsilon = {e:e}");
        }
        if let (Some(req), Some(d)) = (self.delta_requested, self.delta) {
            let _ = writeln!(s, "# delta adjusted from {req:e} to {d:e}, the nearest multiple of the time step");
        }
        s.push_str(&toml::to_string(&self.to_config()).expect("config serializes"));
        s
    }
}
