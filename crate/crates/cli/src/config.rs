//! Experiment configuration: a JSON file whose fields can each be
//! overridden from the command line.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Exact,
    Jbss,
    Rmax,
    Doa,
    Decompose,
    Generate,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Exact => "exact",
            Experiment::Jbss => "jbss",
            Experiment::Rmax => "rmax",
            Experiment::Doa => "doa",
            Experiment::Decompose => "decompose",
            Experiment::Generate => "generate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
pub enum SolverKind {
    #[serde(rename = "algebraic")]
    #[value(name = "algebraic")]
    Algebraic,
    /// ALS from the best of several random starts.
    #[serde(rename = "als")]
    #[value(name = "als")]
    Als,
    /// ALS initialized by the algebraic solution.
    #[serde(rename = "algebraic+als")]
    #[value(name = "algebraic+als")]
    AlgebraicAls,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Algebraic => "algebraic",
            SolverKind::Als => "als",
            SolverKind::AlgebraicAls => "algebraic+als",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ArrayKind {
    /// Sensors on the x and y axes sharing the origin.
    LShaped,
    /// Sensors evenly spaced on a circle in the xy-plane.
    Circular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DoaConfig {
    pub array: ArrayKind,
    /// Sensor count (`2·arm + 1` for the L shape).
    pub sensors: usize,
    /// `(azimuth, elevation)` in degrees.
    pub sources: Vec<[f64; 2]>,
    pub samples_per_bin: usize,
    /// Amplitude-modulated segments per source.
    pub segments: usize,
    /// Covariance frame length (frames overlap by half).
    pub frame_len: usize,
    pub fft_len: usize,
    pub sample_rate: f64,
    /// 1-based index of the first STFT bin used.
    pub first_bin: usize,
    pub bins: usize,
    pub speed: f64,
}

impl Default for DoaConfig {
    fn default() -> Self {
        Self {
            array: ArrayKind::LShaped,
            sensors: 5,
            sources: vec![[30.0, 15.0], [90.0, 45.0], [150.0, 75.0]],
            samples_per_bin: 400,
            segments: 16,
            frame_len: 24,
            fft_len: 256,
            sample_rate: 2.5e9,
            first_bin: 8,
            bins: 8,
            speed: 3.0e8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "R")]
    pub r: usize,
    #[serde(rename = "M")]
    pub m: usize,
    /// Frame length in samples.
    #[serde(rename = "L")]
    pub l: usize,
    /// Frame count, or the third dimension for synthetic grids.
    #[serde(rename = "T")]
    pub t: Option<usize>,
    pub alpha: f64,
    #[serde(rename = "P")]
    pub p: usize,
    pub snr_db_list: Vec<f64>,
    pub runs: usize,
    pub seed: u64,
    pub solvers: Vec<SolverKind>,
    pub output_path: Option<PathBuf>,
    /// Input tensor-set file of `decompose`.
    pub input: Option<PathBuf>,
    /// Rank passed to the solvers; detected from the data when absent.
    pub rank: Option<usize>,
    pub n_list: Vec<usize>,
    pub trials: usize,
    pub max_iter: usize,
    /// ALS stopping threshold; 1e-16 for exact data and 1e-7 otherwise
    /// when absent.
    pub rel_tol: Option<f64>,
    /// Generate a grid without conjugate symmetry.
    pub nonsymmetric: bool,
    pub doa: DoaConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::Exact,
            n: 3,
            r: 5,
            m: 3,
            l: 50,
            t: None,
            alpha: 0.5,
            p: 20,
            snr_db_list: vec![20.0],
            runs: 20,
            seed: 0,
            solvers: vec![SolverKind::Algebraic, SolverKind::AlgebraicAls],
            output_path: None,
            input: None,
            rank: None,
            n_list: vec![2, 3, 4, 5],
            trials: 1,
            max_iter: 2000,
            rel_tol: None,
            nonsymmetric: false,
            doa: DoaConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }

    /// Third dimension of synthetic exact grids and frame count of J-BSS data.
    pub fn third_dim(&self) -> usize {
        match self.experiment {
            Experiment::Jbss => self.t.unwrap_or(39),
            _ => self.t.unwrap_or(self.r),
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |msg: &str| Err(CliError::Input(msg.to_string()));
        match self.experiment {
            Experiment::Exact | Experiment::Jbss | Experiment::Generate => {
                if self.n == 0 || self.r == 0 || self.m == 0 {
                    return bad("N, R and M must be positive");
                }
                if self.third_dim() == 0 {
                    return bad("T must be positive");
                }
            }
            Experiment::Rmax => {
                if self.n_list.iter().any(|&n| n < 2) || self.m < 2 || self.trials == 0 {
                    return bad("rmax needs every N ≥ 2, M ≥ 2 and at least one trial");
                }
            }
            Experiment::Doa => {
                let d = &self.doa;
                if d.sensors < 2 {
                    return bad("the array needs at least two sensors");
                }
                if d.array == ArrayKind::LShaped && d.sensors.is_multiple_of(2) {
                    return bad("an L-shaped array has an odd sensor count");
                }
                if d.bins < 2 {
                    return bad("DOA estimation needs at least two frequency bins");
                }
                if d.sources.is_empty()
                    || d.speed <= 0.0
                    || d.sample_rate <= 0.0
                    || d.first_bin == 0
                {
                    return bad("DOA scene needs sources, positive speed and sample rate, and a 1-based first bin");
                }
            }
            Experiment::Decompose => {
                if self.input.is_none() {
                    return bad("decompose needs an input tensor-set file");
                }
            }
        }
        if matches!(
            self.experiment,
            Experiment::Exact | Experiment::Jbss | Experiment::Doa
        ) {
            if self.runs == 0 {
                return bad("runs must be positive");
            }
            if self.solvers.is_empty() {
                return bad("at least one solver is required");
            }
        }
        if self.experiment == Experiment::Jbss {
            if self.snr_db_list.is_empty() {
                return bad("snr_db_list must not be empty");
            }
            if !(0.0..1.0).contains(&self.alpha) || self.l == 0 || self.p == 0 {
                return bad("L and P must be positive and alpha in [0,1)");
            }
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive");
        }
        if let Some(t) = self.rel_tol {
            if !(t > 0.0 && t < 1.0) {
                return bad("rel_tol must lie in (0,1)");
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trips_with_symbolic_keys() {
        let cfg = ExperimentConfig {
            experiment: Experiment::Jbss,
            solvers: vec![SolverKind::AlgebraicAls],
            ..Default::default()
        };
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains("\"N\":3") && text.contains("\"algebraic+als\""));
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_json_uses_defaults_and_unknown_keys_fail() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"experiment":"rmax","M":2}"#).unwrap();
        assert_eq!(cfg.m, 2);
        assert_eq!(cfg.n_list, vec![2, 3, 4, 5]);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"bogus":1}"#).is_err());
    }

    #[test]
    fn validation_rejects_bad_fields() {
        let cfg = ExperimentConfig {
            runs: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig {
            experiment: Experiment::Decompose,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(CliError::Input(_))));
        assert!(ExperimentConfig::default().validate().is_ok());
    }
}
