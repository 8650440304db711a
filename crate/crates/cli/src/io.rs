//! File formats and atomic writes.

use std::io::Write;
use std::path::Path;

use renewal_gauss_core::paths::GeneratorInfo;
use renewal_gauss_core::{CoupledPath, PathEnsemble, RewardPath, StepSign};
use serde::Serialize;

use crate::error::CliError;

/// Write `bytes` to a temporary file next to `path`, then rename it into
/// place, so that `path` is either absent, the old file or the full new one.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .map_err(|e| CliError::Io(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}

pub fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut v = serde_json::to_vec_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    v.push(b'\n');
    Ok(v)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>, CliError> {
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}

/// One row per path: `path, seed`, then the value at each grid point. The
/// header carries the grid points.
pub fn ensemble_csv(e: &PathEnsemble) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["path".to_string(), "seed".to_string()];
    header.extend(e.grid.points().iter().map(|t| format!("t={t}")));
    w.write_record(&header).map_err(csv_err)?;
    for (i, (row, seed)) in e.rows().zip(&e.seeds).enumerate() {
        let mut rec = vec![i.to_string(), seed.to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    finish(w)
}

#[derive(Debug, Serialize)]
pub struct EnsembleSidecar {
    #[serde(flatten)]
    pub info: GeneratorInfo,
    pub seed: u64,
    pub count: usize,
    pub grid: Vec<f64>,
}

impl EnsembleSidecar {
    pub fn new(info: GeneratorInfo, e: &PathEnsemble) -> Self {
        EnsembleSidecar {
            info,
            seed: e.master_seed,
            count: e.count(),
            grid: e.grid.points().to_vec(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ThetaHeader {
    pub n: u64,
    pub beta_n: f64,
    pub amplitude: f64,
    pub initial_sign: i8,
    pub seed: u64,
}

pub fn theta_files(theta: &StepSign, seed: u64) -> Result<(Vec<u8>, Vec<u8>), CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["flip_point"]).map_err(csv_err)?;
    for x in &theta.flip_points {
        w.write_record([x.to_string()]).map_err(csv_err)?;
    }
    let header = ThetaHeader {
        n: theta.n,
        beta_n: theta.beta_n,
        amplitude: theta.amplitude,
        initial_sign: theta.initial_sign,
        seed,
    };
    Ok((finish(w)?, json_bytes(&header)?))
}

/// `index, jump_time, eta_flip, poisson_flag`. Row 0 is the time origin and
/// carries `η_0`. The flag column is empty when there is no coupling.
pub fn renewal_csv(
    rewards: &RewardPath,
    coupled: Option<&CoupledPath>,
) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["index", "jump_time", "eta_flip", "poisson_flag"])
        .map_err(csv_err)?;
    let bit = |b: bool| if b { "1" } else { "0" };
    w.write_record(["0", "0", bit(rewards.eta0), ""])
        .map_err(csv_err)?;
    let within = rewards.base.epochs_within().len();
    for k in 0..within {
        let flag = coupled.map_or("", |c| bit(c.poisson_flags[k]));
        w.write_record([
            (k + 1).to_string().as_str(),
            rewards.base.jump_times[k].to_string().as_str(),
            bit(rewards.flips[k]),
            flag,
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

/// `s, t, empirical, theoretical` for covariance plots.
pub fn covariance_csv(rows: &[(f64, f64, f64, f64)]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["s", "t", "empirical", "theoretical"])
        .map_err(csv_err)?;
    for (s, t, e, th) in rows {
        w.write_record([s.to_string(), t.to_string(), e.to_string(), th.to_string()])
            .map_err(csv_err)?;
    }
    finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_whole_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("nested/out.txt");
        write_atomic(&p, b"first").unwrap();
        write_atomic(&p, b"second").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"second");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn covariance_rows() {
        let bytes = covariance_csv(&[(0.5, 1.0, 0.49, 0.5)]).unwrap();
        assert_eq!(
            String::from_utf8(bytes).unwrap(),
            "s,t,empirical,theoretical\n0.5,1,0.49,0.5\n"
        );
    }
}
