//! Experiment configuration: a JSON file and command-line flags, flags winning.

use std::path::{Path, PathBuf};

use cpm_core::{DetectorParams, DiagonalFockState, StateKind};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelChoice {
    Sd,
    E,
    Both,
}

impl ModelChoice {
    pub fn models(self) -> &'static [cpm_core::Model] {
        use cpm_core::Model;
        match self {
            ModelChoice::Sd => &[Model::Sd],
            ModelChoice::E => &[Model::E],
            ModelChoice::Both => &[Model::Sd, Model::E],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum StateChoice {
    Coherent,
    Number,
    Thermal,
}

impl StateChoice {
    pub const ALL: [StateChoice; 3] = [StateChoice::Coherent, StateChoice::Number, StateChoice::Thermal];

    pub fn with_nbar(self, nbar: f64) -> Result<StateKind> {
        match self {
            StateChoice::Coherent => Ok(StateKind::Coherent(nbar)),
            StateChoice::Thermal => Ok(StateKind::Thermal(nbar)),
            StateChoice::Number => {
                if nbar < 0.0 || nbar.fract() != 0.0 {
                    return Err(CliError::Config(format!("number state needs an integer nbar, got {nbar}")));
                }
                Ok(StateKind::Number(nbar as usize))
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StateChoice::Coherent => "coherent",
            StateChoice::Number => "number",
            StateChoice::Thermal => "thermal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Partially specified configuration, as read from a file or from flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigPatch {
    pub model: Option<ModelChoice>,
    pub state: Option<StateChoice>,
    pub nbar: Option<f64>,
    pub eta: Option<f64>,
    pub dark: Option<f64>,
    pub cavity: Option<f64>,
    pub tmin: Option<f64>,
    pub tmax: Option<f64>,
    pub points: Option<usize>,
    pub nmax: Option<usize>,
    pub mmax: Option<usize>,
    pub traj: Option<u64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

impl ConfigPatch {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Fields set in `over` replace those in `self`.
    pub fn overlay(self, over: ConfigPatch) -> ConfigPatch {
        ConfigPatch {
            model: over.model.or(self.model),
            state: over.state.or(self.state),
            nbar: over.nbar.or(self.nbar),
            eta: over.eta.or(self.eta),
            dark: over.dark.or(self.dark),
            cavity: over.cavity.or(self.cavity),
            tmin: over.tmin.or(self.tmin),
            tmax: over.tmax.or(self.tmax),
            points: over.points.or(self.points),
            nmax: over.nmax.or(self.nmax),
            mmax: over.mmax.or(self.mmax),
            traj: over.traj.or(self.traj),
            seed: over.seed.or(self.seed),
            out: over.out.or(self.out),
            format: over.format.or(self.format),
        }
    }
}

/// Fully resolved configuration. Unset optional fields fall back to
/// per-command defaults.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub model: ModelChoice,
    pub state: Option<StateChoice>,
    pub nbar: Option<f64>,
    pub eta: f64,
    pub dark: f64,
    pub cavity: f64,
    pub tmin: Option<f64>,
    pub tmax: Option<f64>,
    pub points: Option<usize>,
    pub nmax: Option<usize>,
    pub mmax: Option<usize>,
    pub traj: u64,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: Format,
}

pub const DEFAULT_ETA: f64 = 0.6;
pub const DEFAULT_DARK: f64 = 5e-3;

impl ExperimentConfig {
    pub fn resolve(patch: ConfigPatch) -> Result<Self> {
        let config = Self {
            model: patch.model.unwrap_or(ModelChoice::Both),
            state: patch.state,
            nbar: patch.nbar,
            eta: patch.eta.unwrap_or(DEFAULT_ETA),
            dark: patch.dark.unwrap_or(DEFAULT_DARK),
            cavity: patch.cavity.unwrap_or(0.0),
            tmin: patch.tmin,
            tmax: patch.tmax,
            points: patch.points,
            nmax: patch.nmax,
            mmax: patch.mmax,
            traj: patch.traj.unwrap_or(100_000),
            seed: patch.seed.unwrap_or(1),
            out: patch.out,
            format: patch.format.unwrap_or(Format::Csv),
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        self.params()?;
        if let Some(points) = self.points.filter(|&p| p < 2) {
            return Err(CliError::Config(format!("points must be at least 2, got {points}")));
        }
        if let Some(nbar) = self.nbar {
            if !(nbar.is_finite() && nbar >= 0.0) {
                return Err(CliError::Config(format!("nbar must be finite and >= 0, got {nbar}")));
            }
        }
        for (name, v) in [("tmin", self.tmin), ("tmax", self.tmax)] {
            if let Some(v) = v {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(CliError::Config(format!("{name} must be finite and >= 0, got {v}")));
                }
            }
        }
        if let (Some(lo), Some(hi)) = (self.tmin, self.tmax) {
            if hi <= lo {
                return Err(CliError::Config(format!("tmax ({hi}) must exceed tmin ({lo})")));
            }
        }
        if self.traj == 0 {
            return Err(CliError::Config("traj must be at least 1".into()));
        }
        Ok(())
    }

    /// Time grid of `points` values, `[tmin, tmax]` with the given fallbacks.
    pub fn grid(&self, tmin: f64, tmax: f64, points: usize) -> Result<Vec<f64>> {
        let lo = self.tmin.unwrap_or(tmin);
        let hi = self.tmax.unwrap_or(tmax);
        if hi <= lo {
            return Err(CliError::Config(format!("tmax ({hi}) must exceed tmin ({lo})")));
        }
        Ok(linspace(lo, hi, self.points.unwrap_or(points)))
    }

    /// Rejects a nonzero cavity damping for commands that do not model it.
    pub fn require_undamped(&self, command: &str) -> Result<()> {
        if self.cavity != 0.0 {
            return Err(CliError::Config(format!(
                "{command} does not model cavity damping; --cavity must be 0"
            )));
        }
        Ok(())
    }

    /// Truncated state: `nmax` if given, else the default tail.
    pub fn fock_state(&self, kind: StateKind) -> Result<DiagonalFockState> {
        match self.nmax {
            Some(n) => kind.state_with_n_max(n),
            None => kind.state(),
        }
        .map_err(CliError::from)
    }

    /// Detector parameters with `λ = 1`, so times are `λt`.
    pub fn params(&self) -> Result<DetectorParams> {
        DetectorParams::with_losses(1.0, self.eta, self.dark, self.cavity, 0.0)
            .map_err(|e| CliError::Config(e.to_string()))
    }

    /// States to run: the configured one, or every kind, at each `n̄`.
    pub fn states(&self, default_nbars: &[f64], kinds: &[StateChoice]) -> Result<Vec<(StateChoice, f64, StateKind)>> {
        let nbars: Vec<f64> = match self.nbar {
            Some(n) => vec![n],
            None => default_nbars.to_vec(),
        };
        let kinds: Vec<StateChoice> = match self.state {
            Some(s) => vec![s],
            None => kinds.to_vec(),
        };
        let mut out = Vec::new();
        for &nbar in &nbars {
            for &kind in &kinds {
                out.push((kind, nbar, kind.with_nbar(nbar)?));
            }
        }
        Ok(out)
    }

    pub fn comment_line(&self, command: &str) -> String {
        let json = serde_json::to_string(self).expect("config serialises");
        format!("# cpm {command} {json}")
    }
}

pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (points - 1) as f64;
    (0..points)
        .map(|i| if i + 1 == points { hi } else { lo + step * i as f64 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let file = ConfigPatch {
            eta: Some(0.9),
            seed: Some(3),
            ..Default::default()
        };
        let flags = ConfigPatch {
            seed: Some(7),
            ..Default::default()
        };
        let c = ExperimentConfig::resolve(file.overlay(flags)).unwrap();
        assert_eq!(c.eta, 0.9);
        assert_eq!(c.seed, 7);
        assert_eq!(c.dark, DEFAULT_DARK);
    }

    #[test]
    fn rejects_bad_values() {
        for patch in [
            ConfigPatch { eta: Some(1.5), ..Default::default() },
            ConfigPatch { points: Some(1), ..Default::default() },
            ConfigPatch { tmin: Some(2.0), tmax: Some(1.0), ..Default::default() },
            ConfigPatch { traj: Some(0), ..Default::default() },
        ] {
            assert!(ExperimentConfig::resolve(patch).is_err());
        }
        assert!(StateChoice::Number.with_nbar(2.5).is_err());
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(serde_json::from_str::<ConfigPatch>(r#"{"etaa": 0.5}"#).is_err());
        let p: ConfigPatch = serde_json::from_str(r#"{"model": "e", "state": "thermal"}"#).unwrap();
        assert_eq!(p.model, Some(ModelChoice::E));
        assert_eq!(p.state, Some(StateChoice::Thermal));
    }
}
