//! JSON run configuration.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use wavelab_core::flow::SlopeScheme;
use wavelab_core::forcing::{Forcing, Mode};
use wavelab_core::grid::PeriodicGrid;
use wavelab_core::variational::{SpeedOptions, DEFAULT_SUPPORT_THRESHOLD};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dimension: usize,
    pub resolution: usize,
    pub forcing: ForcingSpec,
    #[serde(default)]
    pub command: CommandParams,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ForcingSpec {
    pub a0: f64,
    #[serde(default)]
    pub modes: Vec<ModeSpec>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub k: Vec<i64>,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

/// Parameters shared by the subcommands. Every field is optional.
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CommandParams {
    /// Final time of the evolution.
    pub final_time: Option<f64>,
    /// CFL safety factor of the explicit scheme, in (0, 1).
    pub cfl_safety: Option<f64>,
    pub snapshot_stride: Option<usize>,
    /// Slope discretisation of the forcing term; `upwind` is needed once
    /// the graph develops near-vertical fronts.
    pub scheme: Option<SchemeName>,
    /// Width of the final speed bracket.
    pub tol_c: Option<f64>,
    /// Objective accuracy of the constrained minimizer.
    pub tol_obj: Option<f64>,
    /// Relative support threshold.
    pub threshold: Option<f64>,
    /// Speed used by `evolve`; the wave speed is computed when absent.
    pub speed: Option<f64>,
    /// Seeds the random initial datum of `evolve` and `crosscheck`.
    pub seed: Option<u64>,
    /// Sup norm of the random initial datum; 0 starts from a flat graph.
    pub initial_amplitude: Option<f64>,
    /// Saved `wave.json` for `wave` to reload and re-verify.
    pub verify: Option<PathBuf>,
    /// Default output directory when `--out` is not given.
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum SchemeName {
    Centered,
    Upwind,
}

pub const DEFAULT_FINAL_TIME: f64 = 10.0;
pub const DEFAULT_CFL_SAFETY: f64 = 0.2;
pub const DEFAULT_SNAPSHOT_STRIDE: usize = 1000;
pub const DEFAULT_TOL_C: f64 = 1e-4;

impl RunConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(CliError::Parse)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Checks everything that can be checked without allocating a grid.
    pub fn validate(&self) -> CliResult<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if !(1..=2).contains(&self.dimension) {
            return bad(format!("dimension {} must be 1 or 2", self.dimension));
        }
        if self.resolution < 4 {
            return bad(format!("resolution {} must be at least 4", self.resolution));
        }
        if !self.forcing.a0.is_finite() {
            return bad("forcing.a0 must be finite".into());
        }
        for (j, m) in self.forcing.modes.iter().enumerate() {
            if m.k.len() != self.dimension {
                return Err(CliError::DimensionMismatch {
                    what: format!("forcing.modes[{j}].k"),
                    expected: self.dimension,
                    got: m.k.len(),
                });
            }
            if !(m.cos.is_finite() && m.sin.is_finite()) {
                return bad(format!("forcing.modes[{j}] has a non-finite coefficient"));
            }
        }
        let p = &self.command;
        let positive = [
            ("final_time", p.final_time),
            ("tol_c", p.tol_c),
            ("tol_obj", p.tol_obj),
            ("speed", p.speed),
        ];
        for (name, v) in positive {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return bad(format!("command.{name} = {v} must be positive"));
                }
            }
        }
        if let Some(s) = p.cfl_safety {
            if !(s > 0.0 && s < 1.0) {
                return bad(format!("command.cfl_safety = {s} must lie in (0, 1)"));
            }
        }
        if let Some(t) = p.threshold {
            if !(0.0..1.0).contains(&t) {
                return bad(format!("command.threshold = {t} must lie in [0, 1)"));
            }
        }
        if p.snapshot_stride == Some(0) {
            return bad("command.snapshot_stride must be at least 1".into());
        }
        if let Some(a) = p.initial_amplitude {
            if !(a.is_finite() && a >= 0.0) {
                return bad(format!(
                    "command.initial_amplitude = {a} must be nonnegative"
                ));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> CliResult<PeriodicGrid> {
        Ok(PeriodicGrid::new(self.dimension, self.resolution)?)
    }

    pub fn forcing(&self) -> CliResult<Forcing<f64>> {
        let modes = self
            .forcing
            .modes
            .iter()
            .map(|m| {
                let k = [m.k[0], m.k.get(1).copied().unwrap_or(0)];
                Mode {
                    k,
                    cos: m.cos,
                    sin: m.sin,
                }
            })
            .collect();
        Ok(Forcing::new(self.dimension, self.forcing.a0, modes)?)
    }

    pub fn speed_options(&self) -> SpeedOptions<f64> {
        let mut opts = SpeedOptions {
            tol_c: self.command.tol_c.unwrap_or(DEFAULT_TOL_C),
            ..SpeedOptions::default()
        };
        if let Some(t) = self.command.tol_obj {
            opts.tol_obj = t;
            opts.min_tol_obj = opts.min_tol_obj.min(t);
        }
        opts
    }

    pub fn threshold(&self) -> f64 {
        self.command.threshold.unwrap_or(DEFAULT_SUPPORT_THRESHOLD)
    }

    pub fn final_time(&self) -> f64 {
        self.command.final_time.unwrap_or(DEFAULT_FINAL_TIME)
    }

    pub fn cfl_safety(&self) -> f64 {
        self.command.cfl_safety.unwrap_or(DEFAULT_CFL_SAFETY)
    }

    pub fn scheme(&self) -> SlopeScheme {
        match self.command.scheme {
            Some(SchemeName::Upwind) => SlopeScheme::Upwind,
            Some(SchemeName::Centered) | None => SlopeScheme::Centered,
        }
    }

    pub fn snapshot_stride(&self) -> usize {
        self.command
            .snapshot_stride
            .unwrap_or(DEFAULT_SNAPSHOT_STRIDE)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str =
        r#"{"dimension": 1, "resolution": 64, "forcing": {"a0": 1.0, "modes": []}}"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.command, CommandParams::default());
        assert_eq!(cfg.final_time(), DEFAULT_FINAL_TIME);
        assert_eq!(cfg.threshold(), DEFAULT_SUPPORT_THRESHOLD);
        assert_eq!(cfg.forcing().unwrap().mean(), 1.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"{"dimension": 1, "resolution": 64, "forcing": {"a0": 1.0, "modes": []}, "colour": 3}"#;
        assert!(matches!(
            RunConfig::from_json(text),
            Err(CliError::Parse(_))
        ));
        let text = r#"{"dimension": 1, "resolution": 64, "forcing": {"a0": 1.0, "modes": [{"k": [1], "cosine": 1.0}]}}"#;
        assert!(matches!(
            RunConfig::from_json(text),
            Err(CliError::Parse(_))
        ));
        let text =
            r#"{"dimension": 1, "resolution": 64, "forcing": {"a0": 1.0}, "command": {"T": 3}}"#;
        assert!(matches!(
            RunConfig::from_json(text),
            Err(CliError::Parse(_))
        ));
    }

    #[test]
    fn parse_errors_carry_a_position() {
        let err = RunConfig::from_json("{\"dimension\": 1,\n \"resolution\": }").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn mode_vectors_must_match_the_dimension() {
        let text = r#"{"dimension": 2, "resolution": 16, "forcing": {"a0": 1.0, "modes": [{"k": [1], "cos": 0.1}]}}"#;
        assert!(matches!(
            RunConfig::from_json(text),
            Err(CliError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn parameters_are_range_checked() {
        for cmd in [
            r#"{"cfl_safety": 1.5}"#,
            r#"{"tol_c": -1}"#,
            r#"{"threshold": 1.0}"#,
            r#"{"snapshot_stride": 0}"#,
            r#"{"final_time": 0}"#,
            r#"{"scheme": "sideways"}"#,
        ] {
            let text = format!(
                r#"{{"dimension": 1, "resolution": 16, "forcing": {{"a0": 1.0}}, "command": {cmd}}}"#
            );
            assert!(RunConfig::from_json(&text).is_err(), "{cmd}");
        }
        let text = r#"{"dimension": 3, "resolution": 16, "forcing": {"a0": 1.0}}"#;
        assert!(RunConfig::from_json(text).is_err());
    }
}
