//! The three subcommands.

use std::path::PathBuf;

use renewal_gauss_core::gauss_kernels::fbm_covariance;
use renewal_gauss_core::renewal::{simulate_coupled, RewardPath};
use renewal_gauss_core::seed::path_seed;
use renewal_gauss_core::sign_kernel::build_theta_with_path;
use renewal_gauss_core::stats::empirical_covariance;
use renewal_gauss_core::{PathEnsemble, PathGenerator, Process, StreamSet};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::io::{
    covariance_csv, ensemble_csv, json_bytes, renewal_csv, theta_files, write_atomic,
    EnsembleSidecar,
};
use crate::parallel::{map_indexed, pool};
use crate::suites::{names, run_suite, SuiteOutcome};

pub const ENSEMBLE_CSV: &str = "ensemble.csv";
pub const ENSEMBLE_JSON: &str = "ensemble.json";
pub const SUMMARY_JSON: &str = "verify_summary.json";
pub const COVARIANCE_CSV: &str = "covariance.csv";

fn simulate_ensemble(cfg: &RunConfig) -> Result<(PathGenerator, PathEnsemble), CliError> {
    let grid = cfg.time_grid()?;
    let generator = PathGenerator::new(cfg.process()?, grid.clone())
        .map_err(|e| CliError::config("process", e.to_string()))?;
    let rows = pool(cfg.threads)?
        .install(|| map_indexed(cfg.paths, |i| generator.generate(path_seed(cfg.seed, i))))?;
    let e = PathEnsemble::from_rows(grid, cfg.seed, rows)?;
    Ok((generator, e))
}

/// Ensemble CSV and JSON sidecar, plus the optional per-path dumps. Returns
/// the files written.
pub fn run_simulate(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    if cfg.dump_path.is_some() && cfg.process.starts_with("exact") {
        return Err(CliError::config(
            "dump_path",
            "exact Gaussian paths have no sign kernel to dump",
        ));
    }
    let (generator, e) = simulate_ensemble(cfg)?;
    let mut written = Vec::new();
    let mut put = |name: String, bytes: Vec<u8>| -> Result<(), CliError> {
        let p = cfg.out.join(name);
        write_atomic(&p, &bytes)?;
        written.push(p);
        Ok(())
    };
    let sidecar = EnsembleSidecar::new(generator.process().info()?, &e);
    put(ENSEMBLE_CSV.into(), ensemble_csv(&e)?)?;
    put(ENSEMBLE_JSON.into(), json_bytes(&sidecar)?)?;
    if let Some(i) = cfg.dump_path {
        let seed = path_seed(cfg.seed, i);
        let beta = cfg.schedule()?.beta(cfg.n)?;
        // Same streams as path `i` of the ensemble, so theta matches its row.
        let (theta, rewards) =
            build_theta_with_path(&cfg.law, cfg.n, beta, &mut StreamSet::new(seed))?;
        let (csv, header) = theta_files(&theta, seed)?;
        put(format!("theta_{i}.csv"), csv)?;
        put(format!("theta_{i}.json"), header)?;
        let renewal = if cfg.law.is_discrete() {
            renewal_csv(&rewards, None)?
        } else {
            // The coupled construction draws its own epochs from the same seed.
            let mut streams = StreamSet::new(seed);
            let coupled = simulate_coupled(&cfg.law, 1.0 / beta, &mut streams)?;
            let rewards = RewardPath::with_rewards(coupled.base.clone(), &mut streams.rewards);
            renewal_csv(&rewards, Some(&coupled))?
        };
        put(format!("renewal_{i}.csv"), renewal)?;
    }
    Ok(written)
}

#[derive(Debug, Serialize)]
pub struct Summary<'a> {
    pub config: &'a RunConfig,
    pub pass: bool,
    pub suites: Vec<SuiteOutcome>,
}

pub struct VerifyOutcome {
    pub pass: bool,
    pub suites: Vec<SuiteOutcome>,
    pub summary_path: PathBuf,
}

/// Expand `all`, drop repeats, reject unknown names.
pub fn select_suites(requested: &[String]) -> Result<Vec<&'static str>, CliError> {
    if requested.is_empty() {
        return Err(CliError::config("suite", "no suite selected"));
    }
    let available = names();
    let mut out: Vec<&'static str> = Vec::new();
    for r in requested {
        let chosen: Vec<&'static str> = if r == "all" {
            available.clone()
        } else {
            match available.iter().find(|&&a| a == r) {
                Some(&a) => vec![a],
                None => {
                    return Err(CliError::config(
                        "suite",
                        format!(
                            "unknown suite `{r}`; available: all, {}",
                            available.join(", ")
                        ),
                    ))
                }
            }
        };
        for c in chosen {
            if !out.contains(&c) {
                out.push(c);
            }
        }
    }
    Ok(out)
}

/// Run the selected suites and write the summary JSON. The summary holds no
/// timings or thread counts, so it is a function of the config alone.
pub fn run_verify(
    cfg: &RunConfig,
    mut progress: impl FnMut(&SuiteOutcome),
) -> Result<VerifyOutcome, CliError> {
    let selected = select_suites(&cfg.suites)?;
    let workers = pool(cfg.threads)?;
    let mut suites = Vec::new();
    for name in selected {
        let outcome = workers
            .install(|| run_suite(name, cfg.seed, cfg.sample_scale))
            .expect("selected suites are registered");
        progress(&outcome);
        suites.push(outcome);
    }
    let pass = suites.iter().all(|s| s.pass);
    let summary = Summary {
        config: cfg,
        pass,
        suites,
    };
    let summary_path = cfg.out.join(SUMMARY_JSON);
    write_atomic(&summary_path, &json_bytes(&summary)?)?;
    Ok(VerifyOutcome {
        pass,
        suites: summary.suites,
        summary_path,
    })
}

/// Empirical against limiting covariance for every grid pair `0 < s <= t`.
pub fn run_report(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let (generator, e) = simulate_ensemble(cfg)?;
    let limit: Box<dyn Fn(f64, f64) -> f64> = match generator.process() {
        Process::Xn { .. } | Process::ExactBm => Box::new(f64::min),
        Process::Yn { kernel, .. } => {
            let k = kernel.clone();
            Box::new(move |s, t| k.limit_covariance(s, t))
        }
        Process::ExactFbm { hurst } => {
            let h = *hurst;
            Box::new(move |s, t| fbm_covariance(h, s, t))
        }
        Process::Iterated { .. } => {
            return Err(CliError::config(
                "process",
                "report supports xn, yn, exact_bm and exact_fbm",
            ))
        }
    };
    let pts: Vec<f64> = e
        .grid
        .points()
        .iter()
        .copied()
        .filter(|&t| t > 0.0)
        .collect();
    let mut rows = Vec::new();
    for (i, &s) in pts.iter().enumerate() {
        for &t in &pts[i..] {
            rows.push((s, t, empirical_covariance(&e, s, t)?.0, limit(s, t)));
        }
    }
    let p = cfg.out.join(COVARIANCE_CSV);
    write_atomic(&p, &covariance_csv(&rows)?)?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_selection() {
        let s = |v: &[&str]| select_suites(&v.iter().map(|x| x.to_string()).collect::<Vec<_>>());
        assert_eq!(s(&["all"]).unwrap().len(), names().len());
        assert_eq!(
            s(&["pair-moment", "pair-moment"]).unwrap(),
            vec!["pair-moment"]
        );
        let e = s(&["nosuch"]).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("geometric-laws"));
        assert!(s(&[]).is_err());
    }
}
