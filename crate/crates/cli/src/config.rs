//! Run configuration: defaults, a flat `key=value` file, then command-line
//! flags, in increasing order of precedence.

use std::path::{Path, PathBuf};

use renewal_gauss_core::paths::TABULATED_TOL;
use renewal_gauss_core::sign_kernel::Polynomial;
use renewal_gauss_core::{InterarrivalLaw, KernelSpec, Process, ScaleSchedule, TimeGrid};
use serde::Serialize;

use crate::error::CliError;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "RENEWAL_GAUSS_OUT";

/// Keys accepted in a config file, with one-line descriptions for `--help`.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    (
        "law",
        "inter-arrival law: exp:<rate>, geom:<p>, gamma:<shape>,<rate>, unif, halfnormal",
    ),
    (
        "n",
        "approximation index n (beta = n^-exponent unless beta is set)",
    ),
    (
        "beta",
        "time scale beta used directly, overriding n and the exponent",
    ),
    (
        "exponent",
        "schedule exponent, beta(n) = n^-exponent (must exceed 1)",
    ),
    ("kernel", "bm or fbm:<H>"),
    ("process", "xn, yn, iterated, exact_bm or exact_fbm"),
    (
        "level",
        "recorded level of the iterated family (integrands all equal 1)",
    ),
    (
        "grid",
        "uniform point count, or comma-separated points from 0 to 1",
    ),
    ("paths", "number of paths"),
    ("seed", "master seed"),
    ("tol", "quadrature tolerance"),
    ("out", "output directory"),
    ("threads", "worker threads (does not change any output)"),
    ("suite", "comma-separated verification suites, or all"),
    (
        "sample_scale",
        "multiplier on every verification sample size",
    ),
    (
        "dump_path",
        "also dump theta and the renewal path of this path index",
    ),
];

/// Raw settings before validation; every field optional so that layers merge.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    pub law: Option<String>,
    pub n: Option<u64>,
    pub beta: Option<f64>,
    pub exponent: Option<f64>,
    pub kernel: Option<String>,
    pub process: Option<String>,
    pub level: Option<usize>,
    pub grid: Option<String>,
    pub paths: Option<usize>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub suite: Option<Vec<String>>,
    pub sample_scale: Option<f64>,
    pub dump_path: Option<u64>,
}

fn parse_value<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T, CliError> {
    raw.parse()
        .map_err(|_| CliError::config(key, format!("cannot parse `{raw}`")))
}

pub fn split_list(raw: &str) -> Vec<String> {
    raw.split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

impl Settings {
    /// Parse a flat `key=value` file. Blank lines and lines starting with `#`
    /// are ignored; unknown keys are rejected.
    pub fn from_file_text(text: &str) -> Result<Self, CliError> {
        let mut s = Settings::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::config("config", format!("line {}: expected key=value", lineno + 1))
            })?;
            s.set(key.trim(), value.trim())?;
        }
        Ok(s)
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::config("config", format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_file_text(&text)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<(), CliError> {
        match key {
            "law" => self.law = Some(v.into()),
            "n" => self.n = Some(parse_value(key, v)?),
            "beta" => self.beta = Some(parse_value(key, v)?),
            "exponent" => self.exponent = Some(parse_value(key, v)?),
            "kernel" => self.kernel = Some(v.into()),
            "process" => self.process = Some(v.into()),
            "level" => self.level = Some(parse_value(key, v)?),
            "grid" => self.grid = Some(v.into()),
            "paths" => self.paths = Some(parse_value(key, v)?),
            "seed" => self.seed = Some(parse_value(key, v)?),
            "tol" => self.tol = Some(parse_value(key, v)?),
            "out" => self.out = Some(v.into()),
            "threads" => self.threads = Some(parse_value(key, v)?),
            "suite" => self.suite = Some(split_list(v)),
            "sample_scale" => self.sample_scale = Some(parse_value(key, v)?),
            "dump_path" => self.dump_path = Some(parse_value(key, v)?),
            other => {
                let known: Vec<&str> = CONFIG_KEYS.iter().map(|k| k.0).collect();
                return Err(CliError::config(
                    "config",
                    format!("unknown key `{other}` (known: {})", known.join(", ")),
                ));
            }
        }
        Ok(())
    }

    /// Fields set in `over` win.
    pub fn overlay(self, over: Settings) -> Settings {
        Settings {
            law: over.law.or(self.law),
            n: over.n.or(self.n),
            beta: over.beta.or(self.beta),
            exponent: over.exponent.or(self.exponent),
            kernel: over.kernel.or(self.kernel),
            process: over.process.or(self.process),
            level: over.level.or(self.level),
            grid: over.grid.or(self.grid),
            paths: over.paths.or(self.paths),
            seed: over.seed.or(self.seed),
            tol: over.tol.or(self.tol),
            out: over.out.or(self.out),
            threads: over.threads.or(self.threads),
            suite: over.suite.or(self.suite),
            sample_scale: over.sample_scale.or(self.sample_scale),
            dump_path: over.dump_path.or(self.dump_path),
        }
    }
}

/// Which grid the user asked for.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum GridSpec {
    Uniform(usize),
    Points(Vec<f64>),
}

impl GridSpec {
    pub fn parse(raw: &str) -> Result<Self, CliError> {
        if raw.contains(',') {
            let pts = raw
                .split(',')
                .map(|p| parse_value::<f64>("grid", p.trim()))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(GridSpec::Points(pts))
        } else {
            Ok(GridSpec::Uniform(parse_value("grid", raw.trim())?))
        }
    }

    pub fn build(&self) -> Result<TimeGrid, CliError> {
        match self {
            GridSpec::Uniform(c) => TimeGrid::uniform(*c),
            GridSpec::Points(p) => TimeGrid::from_points(p.clone()),
        }
        .map_err(|e| CliError::config("grid", e.to_string()))
    }
}

/// A validated run configuration. Every output byte is a function of the
/// serialized fields; `threads` and `out` only say where and how fast.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub law: InterarrivalLaw,
    pub n: u64,
    pub beta: Option<f64>,
    pub exponent: f64,
    pub kernel: KernelSpec,
    pub process: String,
    pub level: usize,
    pub grid: GridSpec,
    pub paths: usize,
    pub seed: u64,
    pub tol: f64,
    pub suites: Vec<String>,
    pub sample_scale: f64,
    pub dump_path: Option<u64>,
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(skip)]
    pub threads: Option<usize>,
}

pub const DEFAULT_SEED: u64 = 20_240_601;

impl RunConfig {
    /// Defaults, then `settings`. The output directory falls back to
    /// [`OUT_ENV`] and then `./out`.
    pub fn resolve(settings: Settings) -> Result<Self, CliError> {
        let law_raw = settings.law.unwrap_or_else(|| "exp:1".into());
        let law: InterarrivalLaw = law_raw
            .parse()
            .map_err(|e: renewal_gauss_core::Error| CliError::config("law", e.to_string()))?;
        let kernel_raw = settings.kernel.unwrap_or_else(|| "bm".into());
        let kernel: KernelSpec = kernel_raw
            .parse()
            .map_err(|e: renewal_gauss_core::Error| CliError::config("kernel", e.to_string()))?;
        let grid = GridSpec::parse(settings.grid.as_deref().unwrap_or("101"))?;
        grid.build()?;
        let exponent = settings.exponent.unwrap_or(2.0);
        let n = settings.n.unwrap_or(1);
        let process = settings.process.unwrap_or_else(|| "yn".into());
        const PROCESSES: [&str; 5] = ["xn", "yn", "iterated", "exact_bm", "exact_fbm"];
        if !PROCESSES.contains(&process.as_str()) {
            return Err(CliError::config(
                "process",
                format!(
                    "unknown process `{process}` (expected one of {})",
                    PROCESSES.join(", ")
                ),
            ));
        }
        let tol = settings.tol.unwrap_or(TABULATED_TOL);
        if !(tol.is_finite() && tol > 0.0) {
            return Err(CliError::config(
                "tol",
                format!("must be positive, got {tol}"),
            ));
        }
        let sample_scale = settings.sample_scale.unwrap_or(1.0);
        if !(sample_scale.is_finite() && sample_scale > 0.0) {
            return Err(CliError::config(
                "sample_scale",
                format!("must be positive, got {sample_scale}"),
            ));
        }
        let paths = settings.paths.unwrap_or(1000);
        if paths == 0 {
            return Err(CliError::config("paths", "must be at least 1"));
        }
        if settings.threads == Some(0) {
            return Err(CliError::config("threads", "must be at least 1"));
        }
        let level = settings.level.unwrap_or(2);
        if level == 0 {
            return Err(CliError::config("level", "must be at least 1"));
        }
        let out = settings
            .out
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));
        let cfg = RunConfig {
            law,
            n,
            beta: settings.beta,
            exponent,
            kernel,
            process,
            level,
            grid,
            paths,
            seed: settings.seed.unwrap_or(DEFAULT_SEED),
            tol,
            suites: settings.suite.unwrap_or_else(|| vec!["all".into()]),
            sample_scale,
            dump_path: settings.dump_path,
            out,
            threads: settings.threads,
        };
        cfg.schedule()?
            .beta(cfg.n)
            .map_err(|e| CliError::config("n", e.to_string()))?;
        Ok(cfg)
    }

    pub fn schedule(&self) -> Result<ScaleSchedule, CliError> {
        match self.beta {
            Some(b) => ScaleSchedule::fixed(b).map_err(|e| CliError::config("beta", e.to_string())),
            None => ScaleSchedule::power(self.exponent)
                .map_err(|e| CliError::config("exponent", e.to_string())),
        }
    }

    pub fn time_grid(&self) -> Result<TimeGrid, CliError> {
        self.grid.build()
    }

    /// The process named by `process`, built from the other fields.
    pub fn process(&self) -> Result<Process, CliError> {
        let schedule = self.schedule()?;
        let (law, n) = (self.law, self.n);
        Ok(match self.process.as_str() {
            "xn" => Process::Xn { law, n, schedule },
            "yn" => Process::Yn {
                law,
                n,
                schedule,
                kernel: self.kernel.clone(),
                tol: self.tol,
            },
            "iterated" => Process::Iterated {
                law,
                n,
                schedule,
                integrands: vec![Polynomial::constant(1.0); self.level],
                record: self.level,
                tol: self.tol,
            },
            "exact_bm" => Process::ExactBm,
            "exact_fbm" => match &self.kernel {
                KernelSpec::Fbm(k) => Process::ExactFbm { hurst: k.hurst() },
                KernelSpec::BrownianIndicator => Process::ExactFbm { hurst: 0.5 },
            },
            other => {
                return Err(CliError::config(
                    "process",
                    format!("unknown process `{other}`"),
                ))
            }
        })
    }

    /// `key = value` lines for the config-file section of `--help`.
    pub fn help_text() -> String {
        let mut s = String::from(
            "Config file: flat key=value lines ('#' starts a comment); flags override it.\nKeys:\n",
        );
        for (k, d) in CONFIG_KEYS {
            s.push_str(&format!("  {k:<13} {d}\n"));
        }
        s.push_str(&format!(
            "The output directory defaults to ${OUT_ENV}, then ./out.\n"
        ));
        s
    }
}

/// Layers in precedence order: the `--config` file, then flags.
pub fn load(config_file: Option<&Path>, flags: Settings) -> Result<RunConfig, CliError> {
    let base = match config_file {
        Some(p) => Settings::from_file(p)?,
        None => Settings::default(),
    };
    RunConfig::resolve(base.overlay(flags))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_flags() {
        let file = Settings::from_file_text("# comment\nlaw = unif\nseed=3\n\npaths=10").unwrap();
        let flags = Settings {
            seed: Some(9),
            ..Settings::default()
        };
        let cfg = RunConfig::resolve(file.overlay(flags)).unwrap();
        assert_eq!(cfg.law, InterarrivalLaw::UniformUnit);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.paths, 10);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(Settings::from_file_text("colour=blue").is_err());
        assert!(Settings::from_file_text("paths=many").is_err());
        assert!(Settings::from_file_text("just a line").is_err());
        let bad = |s: Settings| RunConfig::resolve(s).unwrap_err();
        let e = bad(Settings {
            kernel: Some("fbm:1.5".into()),
            ..Settings::default()
        });
        assert_eq!(e.field(), Some("kernel"));
        assert!(e.to_string().contains("(0, 1)"), "{e}");
        let e = bad(Settings {
            law: Some("gamma:2".into()),
            ..Settings::default()
        });
        assert_eq!(e.field(), Some("law"));
        assert_eq!(
            bad(Settings {
                grid: Some("1".into()),
                ..Settings::default()
            })
            .field(),
            Some("grid")
        );
        assert_eq!(
            bad(Settings {
                exponent: Some(0.5),
                ..Settings::default()
            })
            .field(),
            Some("exponent")
        );
        assert_eq!(
            bad(Settings {
                process: Some("zn".into()),
                ..Settings::default()
            })
            .field(),
            Some("process")
        );
    }

    #[test]
    fn grid_specs() {
        assert_eq!(GridSpec::parse("5").unwrap(), GridSpec::Uniform(5));
        assert_eq!(
            GridSpec::parse("0, 0.5,1").unwrap(),
            GridSpec::Points(vec![0.0, 0.5, 1.0])
        );
        assert!(GridSpec::parse("0,0.7,0.5,1").unwrap().build().is_err());
    }

    #[test]
    fn processes() {
        let mut cfg = RunConfig::resolve(Settings::default()).unwrap();
        for p in ["xn", "yn", "iterated", "exact_bm", "exact_fbm"] {
            cfg.process = p.into();
            assert_eq!(format!("{}", cfg.process().unwrap().tag()), p);
        }
    }
}
