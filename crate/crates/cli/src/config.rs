//! Run configuration: command-line flags merged over an optional JSON file.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use csplab_core::ensemble::{builtin, load_distribution, Builtin};
use csplab_core::{ClauseDistribution, CspError, Result};
use serde::Deserialize;

#[derive(Parser, Debug)]
#[command(name = "csplab", version, about = "Random CSP threshold, reconstruction and overlap analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Analyze,
    Thresholds,
    TreeRecon,
    SecondMoment,
    Instances,
    ColoringOpt,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Ensemble constants and structural conditions.
    Analyze(Flags),
    /// Satisfiability, clustering and reconstruction thresholds.
    Thresholds(Flags),
    /// Monte-Carlo reconstruction statistics on random trees.
    TreeRecon(Flags),
    /// Second-moment exponent on a grid and its supremum certificate.
    SecondMoment(Flags),
    /// Random finite instances with exhaustive solution statistics.
    Instances(Flags),
    /// Entropy-energy optimization for colorings.
    ColoringOpt(Flags),
}

impl Command {
    pub fn split(self) -> (CommandKind, Flags) {
        match self {
            Command::Analyze(f) => (CommandKind::Analyze, f),
            Command::Thresholds(f) => (CommandKind::Thresholds, f),
            Command::TreeRecon(f) => (CommandKind::TreeRecon, f),
            Command::SecondMoment(f) => (CommandKind::SecondMoment, f),
            Command::Instances(f) => (CommandKind::Instances, f),
            Command::ColoringOpt(f) => (CommandKind::ColoringOpt, f),
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Every flag is optional so that a config file can supply it.
#[derive(Args, Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Flags {
    /// Builtin ensemble (hyp2col, nae, xor) or path to a distribution JSON file.
    #[arg(long)]
    pub ensemble: Option<String>,
    /// Clause arity for builtin ensembles.
    #[arg(long)]
    pub k: Option<usize>,
    /// Number of colors.
    #[arg(long)]
    pub q: Option<usize>,
    /// Number of variables (instances).
    #[arg(long)]
    pub n: Option<usize>,
    /// Constraint density.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Density sweep `start:end:step`, inclusive.
    #[arg(long)]
    pub alpha_range: Option<String>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Grid size for theta sweeps.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Marginal deviation bound for the constrained coloring set.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Total deviation bound for the constrained coloring set.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Output file (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Worker threads (default: hardware parallelism).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Emit the threshold table instead of the full report.
    #[arg(long)]
    #[serde(default)]
    pub table: bool,
    /// JSON file with the same keys as the flags; flags take precedence.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl Flags {
    /// Fills unset fields from the config file, if any.
    pub fn merged(self) -> Result<Flags> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = std::fs::read_to_string(&path)?;
        let file: Flags = serde_json::from_str(&text)?;
        Ok(Flags {
            ensemble: self.ensemble.or(file.ensemble),
            k: self.k.or(file.k),
            q: self.q.or(file.q),
            n: self.n.or(file.n),
            alpha: self.alpha.or(file.alpha),
            alpha_range: self.alpha_range.or(file.alpha_range),
            depth: self.depth.or(file.depth),
            samples: self.samples.or(file.samples),
            seed: self.seed.or(file.seed),
            grid: self.grid.or(file.grid),
            delta: self.delta.or(file.delta),
            eps: self.eps.or(file.eps),
            out: self.out.or(file.out),
            format: self.format.or(file.format),
            workers: self.workers.or(file.workers),
            table: self.table || file.table,
            config: self.config,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn format(&self) -> Format {
        self.format.unwrap_or_default()
    }

    pub fn distribution(&self) -> Result<ClauseDistribution> {
        let src = self.ensemble.as_deref().ok_or_else(|| CspError::Validation("--ensemble is required".into()))?;
        match src.parse::<Builtin>() {
            Ok(kind) => {
                let k = self.k.ok_or_else(|| CspError::Validation("--k is required for builtin ensembles".into()))?;
                builtin(kind, k)
            }
            Err(_) if std::path::Path::new(src).exists() => {
                if self.k.is_some() {
                    return Err(CspError::Validation("--k conflicts with a distribution file".into()));
                }
                load_distribution(src)
            }
            Err(e) => Err(e),
        }
    }

    /// The single density or the swept range.
    pub fn alphas(&self) -> Result<Vec<f64>> {
        match (self.alpha, self.alpha_range.as_deref()) {
            (Some(_), Some(_)) => Err(CspError::Validation("give either --alpha or --alpha-range".into())),
            (Some(a), None) => Ok(vec![a]),
            (None, Some(r)) => parse_range(r),
            (None, None) => Err(CspError::Validation("--alpha or --alpha-range is required".into())),
        }
    }
}

pub fn parse_range(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || CspError::Validation(format!("alpha range {s:?} is not start:end:step"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<f64> = parts.iter().map(|p| p.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_>>()?;
    let (a, b, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0) || b < a || !a.is_finite() || !b.is_finite() {
        return Err(bad());
    }
    let count = ((b - a) / step + 1e-9).floor() as usize + 1;
    if count > 100_000 {
        return Err(CspError::Validation(format!("alpha range has {count} points")));
    }
    Ok((0..count).map(|i| a + step * i as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_is_inclusive() {
        assert_eq!(parse_range("0.5:1:0.25").unwrap(), vec![0.5, 0.75, 1.0]);
        let r = parse_range("0.1:0.3:0.1").unwrap();
        assert_eq!(r.len(), 3);
        assert!(parse_range("1:0:0.1").is_err());
        assert!(parse_range("0:1").is_err());
        assert!(parse_range("0:1:0").is_err());
    }

    #[test]
    fn flags_win_over_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, r#"{"ensemble": "xor", "k": 4, "alpha": 0.5, "seed": 3}"#).unwrap();
        let flags = Flags { alpha: Some(0.9), config: Some(path), ..Default::default() }.merged().unwrap();
        assert_eq!(flags.alpha, Some(0.9));
        assert_eq!(flags.seed(), 3);
        assert_eq!(flags.distribution().unwrap().k(), 4);
    }

    #[test]
    fn ensemble_sources() {
        let f = Flags { ensemble: Some("hyp2col".into()), ..Default::default() };
        assert!(f.distribution().is_err());
        let f = Flags { ensemble: Some("nope".into()), k: Some(3), ..Default::default() };
        assert!(f.distribution().is_err());
        let f = Flags { alpha: Some(1.0), alpha_range: Some("0:1:0.5".into()), ..Default::default() };
        assert!(f.alphas().is_err());
    }
}
