//! Binary model dump: the output of `identify` and an accepted input of
//! `oir` and `simulate`.
//!
//! Layout: a 36-byte header (magic `HOIMODEL`, version, M, p, T,
//! valid_from as little-endian u32, fs as f64) followed, per time step, by
//! the row-major `M x (M*p)` coefficient matrix and the row-major `M x M`
//! innovation covariance, all f64 little-endian.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use tvoir_core::TvVarModel;

use crate::{CliError, CliResult};

pub const MODEL_MAGIC: &[u8; 8] = b"HOIMODEL";
pub const MODEL_VERSION: u32 = 1;

pub fn write_model(model: &TvVarModel, path: &Path) -> CliResult<()> {
    let (m, p, t_len) = (model.m(), model.p(), model.len());
    let mut out = Vec::with_capacity(36 + t_len * (m * m * p + m * m) * 8);
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(m as u32).to_le_bytes());
    out.extend_from_slice(&(p as u32).to_le_bytes());
    out.extend_from_slice(&(t_len as u32).to_le_bytes());
    out.extend_from_slice(&(model.valid_from() as u32).to_le_bytes());
    out.extend_from_slice(&model.fs().to_le_bytes());
    let zero_a = DMatrix::<f64>::zeros(m, m * p);
    let eye = DMatrix::<f64>::identity(m, m);
    for t in 0..t_len {
        let a = model.coeffs_at(t).unwrap_or(&zero_a);
        let s = model.sigma_at(t).unwrap_or(&eye);
        for i in 0..m {
            for j in 0..m * p {
                out.extend_from_slice(&a[(i, j)].to_le_bytes());
            }
        }
        for i in 0..m {
            for j in 0..m {
                out.extend_from_slice(&s[(i, j)].to_le_bytes());
            }
        }
    }
    fs::File::create(path)?.write_all(&out)?;
    Ok(())
}

pub fn read_model(path: &Path) -> CliResult<TvVarModel> {
    let mut file = fs::File::open(path)?;
    let mut header = [0u8; 36];
    file.read_exact(&mut header)
        .map_err(|_| CliError::io(format!("{}: truncated header", path.display())))?;
    if &header[0..8] != MODEL_MAGIC {
        return Err(CliError::io(format!(
            "{}: not a model dump (bad magic)",
            path.display()
        )));
    }
    let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap()) as usize;
    if u32_at(8) != MODEL_VERSION as usize {
        return Err(CliError::io(format!(
            "{}: unsupported model version {}",
            path.display(),
            u32_at(8)
        )));
    }
    let (m, p, t_len, valid_from) = (u32_at(12), u32_at(16), u32_at(20), u32_at(24));
    let fs_hz = f64::from_le_bytes(header[28..36].try_into().unwrap());
    let per_step = (m * m * p + m * m) * 8;
    let mut payload = Vec::new();
    file.read_to_end(&mut payload)?;
    if payload.len() != t_len * per_step {
        return Err(CliError::io(format!(
            "{}: expected {} bytes of matrices, found {}",
            path.display(),
            t_len * per_step,
            payload.len()
        )));
    }
    let mut coeffs = Vec::with_capacity(t_len);
    let mut sigmas = Vec::with_capacity(t_len);
    let mut offset = 0usize;
    let mut next = || {
        let v = f64::from_le_bytes(payload[offset..offset + 8].try_into().unwrap());
        offset += 8;
        v
    };
    for _ in 0..t_len {
        let mut a = DMatrix::<f64>::zeros(m, m * p);
        for i in 0..m {
            for j in 0..m * p {
                a[(i, j)] = next();
            }
        }
        let mut s = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                s[(i, j)] = next();
            }
        }
        coeffs.push(a);
        sigmas.push(s);
    }
    Ok(TvVarModel::from_estimates(
        coeffs, sigmas, fs_hz, valid_from,
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tvoir_core::var::{build_benchmark_model, CoefficientSchedule};

    #[test]
    fn model_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        let schedule = CoefficientSchedule::constant(0.2, 16);
        let model = build_benchmark_model(&schedule, 100.0).unwrap();
        write_model(&model, &path).unwrap();
        let back = read_model(&path).unwrap();
        assert_eq!(model, back);
    }
}
