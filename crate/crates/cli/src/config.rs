//! Line-oriented `section.key = value` experiment configuration.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ricker_ide::kernels::KernelSpec;
use ricker_ide::model::ModelParams;
use ricker_ide::waves::{ValidationTolerances, WaveOptions};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("flag override {key}: {message}")]
    Override { key: String, message: String },

    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Recognized keys, their defaults and meaning. Printed by `--help`.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("model.r1", "required", "growth rate of species 1, in (0,1)"),
    ("model.r2", "required", "growth rate of species 2, in (0,1)"),
    ("model.a1", "required", "competition coefficient a1 > 1"),
    ("model.a2", "required", "competition coefficient a2 > 1"),
    ("kernel1.family", "required", "gaussian | uniform | table"),
    ("kernel1.sigma", "1", "Gaussian standard deviation"),
    ("kernel1.halfwidth", "1", "uniform kernel half-width"),
    (
        "kernel1.table",
        "required for table",
        "density table path, relative to the config file",
    ),
    ("kernel2.*", "", "same keys as kernel1"),
    ("grid.L", "200", "half-length of the domain [-L, L]"),
    ("grid.dx", "0.1", "grid spacing"),
    (
        "grid.truncation",
        "1e-12",
        "kernel tail mass dropped by discretization",
    ),
    (
        "solver.profile_tol",
        "1e-6",
        "wave profile change tolerance",
    ),
    (
        "solver.speed_tol",
        "1e-4",
        "trailing wave speed spread tolerance",
    ),
    ("solver.max_steps", "2000", "wave solver step limit"),
    (
        "solver.speed_window",
        "20",
        "steps averaged into the wave speed",
    ),
    (
        "solver.initial_width",
        "1",
        "width of the sigmoid initial data",
    ),
    (
        "solver.tail_tol",
        "1e-3",
        "allowed tail distance from the limit states",
    ),
    ("solver.residual_tol", "1e-4", "allowed wave residual"),
    (
        "solver.monotone_slack",
        "1e-10",
        "allowed decrease between neighbouring samples",
    ),
    ("simulate.steps", "150", "number of operator steps"),
    ("simulate.thin", "10", "write every thin-th step"),
    ("sweep.r1", "model.r1", "comma-separated lattice"),
    ("sweep.r2", "model.r2", "comma-separated lattice"),
    ("sweep.a1", "model.a1", "comma-separated lattice"),
    ("sweep.a2", "model.a2", "comma-separated lattice"),
    (
        "sweep.sigma",
        "configured kernels",
        "Gaussian sigma lattice applied to both kernels",
    ),
    ("output.dir", "out", "artifact directory"),
];

const REQUIRED: &[&str] = &[
    "model.r1",
    "model.r2",
    "model.a1",
    "model.a2",
    "kernel1.family",
    "kernel2.family",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Gaussian,
    Uniform,
    Table,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelConfig {
    pub family: Family,
    pub sigma: f64,
    pub half_width: f64,
    pub table: Option<PathBuf>,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            family: Family::Gaussian,
            sigma: 1.0,
            half_width: 1.0,
            table: None,
        }
    }
}

impl KernelConfig {
    pub fn spec(&self) -> Result<KernelSpec, ConfigError> {
        Ok(match self.family {
            Family::Gaussian => KernelSpec::Gaussian { sigma: self.sigma },
            Family::Uniform => KernelSpec::Uniform {
                half_width: self.half_width,
            },
            Family::Table => KernelSpec::TableFile(
                self.table
                    .clone()
                    .ok_or_else(|| ConfigError::Invalid("table kernel without a path".into()))?,
            ),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepConfig {
    pub r1: Option<Vec<f64>>,
    pub r2: Option<Vec<f64>>,
    pub a1: Option<Vec<f64>>,
    pub a2: Option<Vec<f64>>,
    pub sigma: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelParams,
    pub kernel1: KernelConfig,
    pub kernel2: KernelConfig,
    pub half_length: f64,
    pub dx: f64,
    pub truncation: f64,
    pub wave: WaveOptions,
    pub tolerances: ValidationTolerances,
    pub steps: usize,
    pub thin: usize,
    pub sweep: SweepConfig,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelParams::default(),
            kernel1: KernelConfig::default(),
            kernel2: KernelConfig::default(),
            half_length: 200.0,
            dx: 0.1,
            truncation: 1e-12,
            wave: WaveOptions::default(),
            tolerances: ValidationTolerances::default(),
            steps: 150,
            thin: 10,
            sweep: SweepConfig::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

fn parse_f64(value: &str) -> Result<f64, String> {
    value
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| format!("expected a finite number, got `{value}`"))
}

fn parse_usize(value: &str) -> Result<usize, String> {
    value
        .parse::<usize>()
        .map_err(|_| format!("expected a nonnegative integer, got `{value}`"))
}

fn parse_list(value: &str) -> Result<Vec<f64>, String> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|s| parse_f64(s.trim())).collect()
}

impl ExperimentConfig {
    /// Applies one `key = value` assignment. `base` resolves relative paths.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<(), String> {
        let f = || parse_f64(value);
        match key {
            "model.r1" => self.model.r1 = f()?,
            "model.r2" => self.model.r2 = f()?,
            "model.a1" => self.model.a1 = f()?,
            "model.a2" => self.model.a2 = f()?,
            "grid.L" => self.half_length = f()?,
            "grid.dx" => self.dx = f()?,
            "grid.truncation" => self.truncation = f()?,
            "solver.profile_tol" => self.wave.profile_tol = f()?,
            "solver.speed_tol" => self.wave.speed_tol = f()?,
            "solver.max_steps" => self.wave.max_steps = parse_usize(value)?,
            "solver.speed_window" => self.wave.speed_window = parse_usize(value)?,
            "solver.initial_width" => self.wave.initial_width = f()?,
            "solver.tail_tol" => self.tolerances.tail_tol = f()?,
            "solver.residual_tol" => self.tolerances.max_residual = f()?,
            "solver.monotone_slack" => self.tolerances.monotone_slack = f()?,
            "simulate.steps" => self.steps = parse_usize(value)?,
            "simulate.thin" => self.thin = parse_usize(value)?,
            "sweep.r1" => self.sweep.r1 = Some(parse_list(value)?),
            "sweep.r2" => self.sweep.r2 = Some(parse_list(value)?),
            "sweep.a1" => self.sweep.a1 = Some(parse_list(value)?),
            "sweep.a2" => self.sweep.a2 = Some(parse_list(value)?),
            "sweep.sigma" => self.sweep.sigma = Some(parse_list(value)?),
            "output.dir" => self.output_dir = PathBuf::from(value),
            _ => {
                let (section, field) = key.split_once('.').ok_or(format!("unknown key `{key}`"))?;
                let kernel = match section {
                    "kernel1" => &mut self.kernel1,
                    "kernel2" => &mut self.kernel2,
                    _ => return Err(format!("unknown key `{key}`")),
                };
                match field {
                    "family" => {
                        kernel.family = match value.to_ascii_lowercase().as_str() {
                            "gaussian" => Family::Gaussian,
                            "uniform" => Family::Uniform,
                            "table" => Family::Table,
                            _ => return Err(format!("unknown kernel family `{value}`")),
                        }
                    }
                    "sigma" => kernel.sigma = f()?,
                    "halfwidth" => kernel.half_width = f()?,
                    "table" => kernel.table = Some(base.join(value)),
                    _ => return Err(format!("unknown key `{key}`")),
                }
            }
        }
        Ok(())
    }

    /// Parses configuration text. Relative table paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut seen = HashSet::new();
        let mut last_line = 0;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            last_line = line;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Parse {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            })?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::Parse {
                    line,
                    message: format!("duplicate key `{key}`"),
                });
            }
            cfg.set(key, value.trim(), base)
                .map_err(|message| ConfigError::Parse { line, message })?;
        }
        for key in REQUIRED {
            if !seen.contains(*key) {
                return Err(ConfigError::Parse {
                    line: last_line + 1,
                    message: format!("missing required key `{key}` (end of input)"),
                });
            }
        }
        for (name, kernel) in [("kernel1", &cfg.kernel1), ("kernel2", &cfg.kernel2)] {
            if kernel.family == Family::Table && kernel.table.is_none() {
                return Err(ConfigError::Parse {
                    line: last_line + 1,
                    message: format!("missing required key `{name}.table` (end of input)"),
                });
            }
        }
        Ok(cfg)
    }

    /// Rejects nonpositive tolerances and grid settings.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("grid.L", self.half_length),
            ("grid.dx", self.dx),
            ("grid.truncation", self.truncation),
            ("solver.profile_tol", self.wave.profile_tol),
            ("solver.speed_tol", self.wave.speed_tol),
            ("solver.initial_width", self.wave.initial_width),
            ("solver.tail_tol", self.tolerances.tail_tol),
            ("solver.residual_tol", self.tolerances.max_residual),
            ("solver.monotone_slack", self.tolerances.monotone_slack),
        ];
        for (key, value) in positive {
            if !(value > 0.0) {
                return Err(ConfigError::Invalid(format!(
                    "{key} must be positive, got {value}"
                )));
            }
        }
        for (key, value) in [
            ("solver.max_steps", self.wave.max_steps),
            ("solver.speed_window", self.wave.speed_window),
            ("simulate.thin", self.thin),
        ] {
            if value == 0 {
                return Err(ConfigError::Invalid(format!("{key} must be at least 1")));
            }
        }
        Ok(())
    }

    /// Parameter lattices for `sweep`; unset axes hold the model value.
    pub fn sweep_lattice(&self) -> Result<[Vec<f64>; 4], ConfigError> {
        let axes = [
            ("sweep.r1", &self.sweep.r1, self.model.r1),
            ("sweep.r2", &self.sweep.r2, self.model.r2),
            ("sweep.a1", &self.sweep.a1, self.model.a1),
            ("sweep.a2", &self.sweep.a2, self.model.a2),
        ];
        let mut out: [Vec<f64>; 4] = Default::default();
        for (slot, (key, list, fallback)) in out.iter_mut().zip(axes) {
            *slot = match list {
                None => vec![fallback],
                Some(v) if v.is_empty() => {
                    return Err(ConfigError::Invalid(format!("{key} is empty")));
                }
                Some(v) => v.clone(),
            };
        }
        if matches!(&self.sweep.sigma, Some(v) if v.is_empty()) {
            return Err(ConfigError::Invalid("sweep.sigma is empty".into()));
        }
        Ok(out)
    }

    /// Every setting as `key = value`, in a fixed order with round-trip
    /// float formatting.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let m = &self.model;
        let _ = writeln!(s, "model = {:?} {:?} {:?} {:?}", m.r1, m.r2, m.a1, m.a2);
        for (name, k) in [("kernel1", &self.kernel1), ("kernel2", &self.kernel2)] {
            let _ = match k.family {
                Family::Gaussian => writeln!(s, "{name} = gaussian {:?}", k.sigma),
                Family::Uniform => writeln!(s, "{name} = uniform {:?}", k.half_width),
                Family::Table => writeln!(s, "{name} = table {:?}", k.table),
            };
        }
        let _ = writeln!(
            s,
            "grid = {:?} {:?} {:?}",
            self.half_length, self.dx, self.truncation
        );
        let w = &self.wave;
        let _ = writeln!(
            s,
            "solver = {:?} {:?} {} {} {:?}",
            w.profile_tol, w.speed_tol, w.max_steps, w.speed_window, w.initial_width
        );
        let t = &self.tolerances;
        let _ = writeln!(
            s,
            "tolerances = {:?} {:?} {:?} {:?}",
            t.monotone_slack, t.tail_tol, t.tail_fraction, t.max_residual
        );
        let _ = writeln!(s, "simulate = {} {}", self.steps, self.thin);
        let sw = &self.sweep;
        let _ = writeln!(
            s,
            "sweep = {:?} {:?} {:?} {:?} {:?}",
            sw.r1, sw.r2, sw.a1, sw.a2, sw.sigma
        );
        s
    }

    /// Hex SHA-256 of [`canonical`](Self::canonical).
    pub fn digest(&self) -> String {
        Sha256::digest(self.canonical().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Reads `path` (or starts from the defaults when `None`), then applies the
/// flag overrides in order.
pub fn load_config(
    path: Option<&Path>,
    overrides: &[(String, String)],
) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                path: p.to_path_buf(),
                source,
            })?;
            let base = p.parent().unwrap_or(Path::new("."));
            ExperimentConfig::parse(&text, base)?
        }
        None => ExperimentConfig::default(),
    };
    for (key, value) in overrides {
        if key == "output.dir" {
            cfg.output_dir = PathBuf::from(value);
            continue;
        }
        cfg.set(key, value, Path::new("."))
            .map_err(|message| ConfigError::Override {
                key: key.clone(),
                message,
            })?;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
model.r1 = 0.5
model.r2 = 0.5
model.a1 = 2
model.a2 = 3
kernel1.family = gaussian
kernel2.family = gaussian
";

    #[test]
    fn minimal_file_takes_defaults() {
        let cfg = ExperimentConfig::parse(MINIMAL, Path::new(".")).unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
    }

    #[test]
    fn comments_and_blank_lines() {
        let text = format!("# header\n\n{MINIMAL}grid.dx = 0.05   # finer\n");
        let cfg = ExperimentConfig::parse(&text, Path::new(".")).unwrap();
        assert_eq!(cfg.dx, 0.05);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = format!("{MINIMAL}grid.spacing = 0.1\n");
        match ExperimentConfig::parse(&bad, Path::new(".")) {
            Err(ConfigError::Parse { line: 7, message }) => {
                assert!(message.contains("unknown key"))
            }
            other => panic!("{other:?}"),
        }
        let bad = MINIMAL.replace("model.a1 = 2", "model.a1 = two");
        assert!(matches!(
            ExperimentConfig::parse(&bad, Path::new(".")),
            Err(ConfigError::Parse { line: 3, .. })
        ));
        let bad = MINIMAL.replace("kernel2.family = gaussian\n", "");
        match ExperimentConfig::parse(&bad, Path::new(".")) {
            Err(ConfigError::Parse { message, .. }) => assert!(message.contains("kernel2.family")),
            other => panic!("{other:?}"),
        }
        let bad = format!("{MINIMAL}model.r1 = 0.3\n");
        assert!(matches!(
            ExperimentConfig::parse(&bad, Path::new(".")),
            Err(ConfigError::Parse { line: 7, .. })
        ));
    }

    #[test]
    fn lists_and_lattice() {
        let text = format!("{MINIMAL}sweep.a2 = 2, 3,4\n");
        let cfg = ExperimentConfig::parse(&text, Path::new(".")).unwrap();
        let lattice = cfg.sweep_lattice().unwrap();
        assert_eq!(lattice[3], vec![2.0, 3.0, 4.0]);
        assert_eq!(lattice[0], vec![0.5]);
        let text = format!("{MINIMAL}sweep.r1 =\n");
        let cfg = ExperimentConfig::parse(&text, Path::new(".")).unwrap();
        assert!(cfg.sweep_lattice().is_err());
    }

    #[test]
    fn digest_tracks_settings() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.dx = 0.05;
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
    }

    #[test]
    fn nonpositive_tolerance_is_rejected() {
        let mut cfg = ExperimentConfig::default();
        cfg.wave.profile_tol = 0.0;
        assert!(matches!(cfg.validate(), Err(ConfigError::Invalid(_))));
    }
}
