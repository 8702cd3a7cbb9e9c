//! Checkpoints and report files.
//!
//! A checkpoint directory `q{N}/` holds `u.csv`, `E.csv`, `w{n}.csv` for
//! n = 1..N and `manifest.json`. Coefficient files have the columns
//! `xi,re,im`, one row per nonzero, with shortest round-trip formatting so
//! that a reload is bit-exact. Every file is written to a temporary name
//! and renamed into place.

use crate::scheme::{IterationState, StageSummary};
use crate::spectral::{SpectralError, TorusFunction};
use crate::verify::Certificate;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{path}: {msg}")]
    Parse { path: PathBuf, msg: String },
    #[error("missing checkpoint: {0}")]
    MissingCheckpoint(PathBuf),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.to_path_buf(), source }
}

/// Writes `bytes` to a sibling temporary file, then renames onto `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(bytes).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn coeff_csv(f: &TorusFunction) -> Result<Vec<u8>, IoError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["xi", "re", "im"])?;
    for (xi, c) in f.nonzeros() {
        w.write_record([xi.to_string(), format!("{:e}", c.re), format!("{:e}", c.im)])?;
    }
    w.into_inner().map_err(|e| IoError::Parse { path: PathBuf::new(), msg: e.to_string() })
}

pub fn write_coeffs(path: &Path, f: &TorusFunction) -> Result<(), IoError> {
    write_atomic(path, &coeff_csv(f)?)
}

pub fn read_coeffs(path: &Path) -> Result<TorusFunction, IoError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut r = csv::Reader::from_reader(std::io::BufReader::new(file));
    let mut pairs = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let bad = |msg: String| IoError::Parse { path: path.to_path_buf(), msg };
        let xi: i64 = field(0).parse().map_err(|e| bad(format!("xi {:?}: {e}", field(0))))?;
        let re: f64 = field(1).parse().map_err(|e| bad(format!("re {:?}: {e}", field(1))))?;
        let im: f64 = field(2).parse().map_err(|e| bad(format!("im {:?}: {e}", field(2))))?;
        pairs.push((xi, Complex64::new(re, im)));
    }
    Ok(TorusFunction::from_pairs(pairs)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub q: usize,
    pub lambda: i64,
    pub epsilon: f64,
    pub sigma: i64,
    pub norms: ManifestNorms,
    pub stage: Option<StageSummary>,
    pub certificates: Vec<Certificate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestNorms {
    pub e_hs: f64,
    pub e0_hs: f64,
    pub u_l2: f64,
}

pub fn checkpoint_dir(root: &Path, q: usize) -> PathBuf {
    root.join(format!("q{q}"))
}

/// Writes `root/q{N}/` and returns its path.
pub fn save_checkpoint(root: &Path, state: &IterationState) -> Result<PathBuf, IoError> {
    let dir = checkpoint_dir(root, state.q);
    write_coeffs(&dir.join("u.csv"), &state.u)?;
    write_coeffs(&dir.join("E.csv"), &state.e)?;
    for (n, w) in state.increments.iter().enumerate() {
        write_coeffs(&dir.join(format!("w{}.csv", n + 1)), w)?;
    }
    let manifest = Manifest {
        q: state.q,
        lambda: state.lambda,
        epsilon: state.epsilon,
        sigma: state.sigma,
        norms: ManifestNorms { e_hs: state.e_norm, e0_hs: state.e0_norm, u_l2: state.u.coeff_l2_sq().sqrt() },
        stage: state.stage.clone(),
        certificates: state.certificates.clone(),
    };
    write_atomic(&dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    Ok(dir)
}

pub fn load_checkpoint(dir: &Path) -> Result<IterationState, IoError> {
    let mpath = dir.join("manifest.json");
    if !mpath.is_file() {
        return Err(IoError::MissingCheckpoint(dir.to_path_buf()));
    }
    let manifest: Manifest = serde_json::from_slice(&fs::read(&mpath).map_err(io_err(&mpath))?)?;
    let increments =
        (1..=manifest.q).map(|n| read_coeffs(&dir.join(format!("w{n}.csv")))).collect::<Result<Vec<_>, _>>()?;
    Ok(IterationState {
        q: manifest.q,
        u: read_coeffs(&dir.join("u.csv"))?,
        e: read_coeffs(&dir.join("E.csv"))?,
        lambda: manifest.lambda,
        epsilon: manifest.epsilon,
        sigma: manifest.sigma,
        increments,
        certificates: manifest.certificates,
        e_norm: manifest.norms.e_hs,
        e0_norm: manifest.norms.e0_hs,
        stage: manifest.stage,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    write_atomic(path, serde_json::to_string_pretty(value)?.as_bytes())
}

/// Writes a CSV with a header row and f64 rows.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|x| table_cell(*x)))?;
    }
    let bytes = w.into_inner().map_err(|e| IoError::Parse { path: path.to_path_buf(), msg: e.to_string() })?;
    write_atomic(path, &bytes)
}

/// Integral values below 2^53 print as integers, everything else in
/// shortest round-trip exponent form.
fn table_cell(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 9.007_199_254_740_992e15 {
        format!("{}", x as i64)
    } else {
        format!("{x:e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::base_case;

    #[test]
    fn coefficients_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let f = TorusFunction::sin_mode(0.1 + 0.2, 3).add(&TorusFunction::cos_mode(1.0 / 3.0, 1 << 40));
        let p = dir.path().join("f.csv");
        write_coeffs(&p, &f).unwrap();
        assert_eq!(read_coeffs(&p).unwrap().max_coeff_diff(&f), 0.0);
    }

    #[test]
    fn checkpoint_round_trip_and_missing() {
        let dir = tempfile::tempdir().unwrap();
        let b = base_case(0.03, 1, 0.0, 3);
        let path = save_checkpoint(dir.path(), &b).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back.u.max_coeff_diff(&b.u), 0.0);
        assert_eq!(back.e.max_coeff_diff(&b.e), 0.0);
        assert_eq!(back.e_norm, b.e_norm);
        assert!(matches!(load_checkpoint(&dir.path().join("q9")), Err(IoError::MissingCheckpoint(_))));
        assert!(fs::read_dir(&path).unwrap().all(|e| !e.unwrap().file_name().to_string_lossy().contains(".tmp")));
    }
}
