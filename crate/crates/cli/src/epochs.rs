//! Epoch ingestion and serialization.
//!
//! Two interchangeable representations:
//! - a directory of per-realization CSV files, each `T` rows by `M` columns
//!   with a one-line header of channel labels, realizations ordered by file
//!   name;
//! - a single binary container: a 32-byte header (magic `HOIEPOCH`,
//!   version, R, M, T as little-endian u32, fs as f64) followed by f64
//!   samples in realization-major, then channel-major, then time order.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use tvoir_core::EpochData;

use crate::{fmt_f64, CliError, CliResult};

pub const EPOCH_MAGIC: &[u8; 8] = b"HOIEPOCH";
pub const EPOCH_VERSION: u32 = 1;

/// Reads epochs from either representation, dispatching on the path kind
/// (directory -> CSV set, file -> binary container).
pub fn read_epochs(path: &Path) -> CliResult<EpochData> {
    if path.is_dir() {
        read_epochs_csv_dir(path)
    } else {
        read_epochs_binary(path)
    }
}

/// Reads a directory of per-realization CSVs, in lexicographic file order.
pub fn read_epochs_csv_dir(dir: &Path) -> CliResult<EpochData> {
    let mut files: Vec<_> = fs::read_dir(dir)?
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.is_file() && p.extension().map(|x| x == "csv").unwrap_or(false))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::io(format!(
            "no .csv files found in {}",
            dir.display()
        )));
    }

    let mut labels: Option<Vec<String>> = None;
    let mut t_len = 0usize;
    let mut samples: Vec<f64> = Vec::new();
    let mut m = 0usize;
    for (r, file) in files.iter().enumerate() {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(file)?;
        let header: Vec<String> = reader
            .headers()?
            .iter()
            .map(|s| s.trim().to_string())
            .collect();
        match &labels {
            None => {
                m = header.len();
                labels = Some(header);
            }
            Some(expected) => {
                if *expected != header {
                    return Err(CliError::io(format!(
                        "channel labels in {} differ from {}",
                        file.display(),
                        files[0].display()
                    )));
                }
            }
        }
        // rows are time-major; the container wants channel-major series
        let mut rows = 0usize;
        let mut columns: Vec<Vec<f64>> = vec![Vec::new(); m];
        for (row_idx, record) in reader.records().enumerate() {
            let record = record?;
            if record.len() != m {
                return Err(CliError::io(format!(
                    "{} row {}: expected {m} columns, found {}",
                    file.display(),
                    row_idx + 2,
                    record.len()
                )));
            }
            for (ch, cell) in record.iter().enumerate() {
                let value: f64 = cell.trim().parse().map_err(|_| {
                    CliError::io(format!(
                        "{} row {} column {}: unparsable value {cell:?}",
                        file.display(),
                        row_idx + 2,
                        ch + 1
                    ))
                })?;
                if !value.is_finite() {
                    return Err(CliError::io(format!(
                        "{} row {} column {}: non-finite value",
                        file.display(),
                        row_idx + 2,
                        ch + 1
                    )));
                }
                columns[ch].push(value);
            }
            rows += 1;
        }
        if r == 0 {
            t_len = rows;
        } else if rows != t_len {
            return Err(CliError::io(format!(
                "{}: {} rows, but earlier realizations have {}",
                file.display(),
                rows,
                t_len
            )));
        }
        for column in columns {
            samples.extend(column);
        }
    }
    // the CSV set carries no sampling frequency; callers override via flags
    let data = EpochData::new(samples, files.len(), m, t_len, 1.0, labels)?;
    Ok(data)
}

/// Reads the binary epoch container.
pub fn read_epochs_binary(path: &Path) -> CliResult<EpochData> {
    let mut file = fs::File::open(path)?;
    let mut header = [0u8; 32];
    file.read_exact(&mut header)
        .map_err(|_| CliError::io(format!("{}: truncated header", path.display())))?;
    if &header[0..8] != EPOCH_MAGIC {
        return Err(CliError::io(format!(
            "{}: not an epoch container (bad magic)",
            path.display()
        )));
    }
    let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap());
    let version = u32_at(8);
    if version != EPOCH_VERSION {
        return Err(CliError::io(format!(
            "{}: unsupported container version {version}",
            path.display()
        )));
    }
    let (r, m, t_len) = (
        u32_at(12) as usize,
        u32_at(16) as usize,
        u32_at(20) as usize,
    );
    let fs_hz = f64::from_le_bytes(header[24..32].try_into().unwrap());
    let expected = r
        .checked_mul(m)
        .and_then(|x| x.checked_mul(t_len))
        .ok_or_else(|| CliError::io("container dimensions overflow"))?;
    let mut payload = Vec::new();
    file.read_to_end(&mut payload)?;
    if payload.len() != expected * 8 {
        return Err(CliError::io(format!(
            "{}: expected {} samples, found {} bytes",
            path.display(),
            expected,
            payload.len()
        )));
    }
    let samples: Vec<f64> = payload
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    if let Some(idx) = samples.iter().position(|x| !x.is_finite()) {
        let rr = idx / (m * t_len);
        let rest = idx % (m * t_len);
        return Err(CliError::io(format!(
            "{}: non-finite sample at realization {}, channel {}, sample {}",
            path.display(),
            rr + 1,
            rest / t_len + 1,
            rest % t_len + 1
        )));
    }
    Ok(EpochData::new(samples, r, m, t_len, fs_hz, None)?)
}

/// Writes the binary epoch container, bit-exact against [`read_epochs_binary`].
pub fn write_epochs_binary(data: &EpochData, path: &Path) -> CliResult<()> {
    let mut out = Vec::with_capacity(32 + data.raw().len() * 8);
    out.extend_from_slice(EPOCH_MAGIC);
    out.extend_from_slice(&EPOCH_VERSION.to_le_bytes());
    out.extend_from_slice(&(data.realizations() as u32).to_le_bytes());
    out.extend_from_slice(&(data.channels() as u32).to_le_bytes());
    out.extend_from_slice(&(data.samples_per_channel() as u32).to_le_bytes());
    out.extend_from_slice(&data.fs().to_le_bytes());
    for x in data.raw() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&out)?;
    Ok(())
}

/// Writes one CSV per realization into `dir` (`epoch_0001.csv`, ...).
pub fn write_epochs_csv_dir(data: &EpochData, dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    let width = data.realizations().to_string().len().max(4);
    for r in 0..data.realizations() {
        let path = dir.join(format!("epoch_{:0width$}.csv", r + 1));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(data.labels())?;
        for t in 0..data.samples_per_channel() {
            let row: Vec<String> = (0..data.channels())
                .map(|ch| fmt_f64(data.value(r, ch, t)))
                .collect();
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tvoir_core::var::{simulate, TvVarModel};

    fn sample_data() -> EpochData {
        let coeffs = vec![nalgebra_matrix(0.4); 32];
        let sigma = vec![nalgebra_matrix(1.0); 32];
        let model = TvVarModel::new(coeffs, sigma, 250.0).unwrap();
        simulate(&model, 3, 99, 50).unwrap()
    }

    fn nalgebra_matrix(v: f64) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("epochs.bin");
        let data = sample_data();
        write_epochs_binary(&data, &path).unwrap();
        let back = read_epochs_binary(&path).unwrap();
        assert_eq!(data.raw(), back.raw());
        assert_eq!(data.fs(), back.fs());
        assert_eq!(
            (
                data.realizations(),
                data.channels(),
                data.samples_per_channel()
            ),
            (
                back.realizations(),
                back.channels(),
                back.samples_per_channel()
            )
        );
    }

    #[test]
    fn csv_round_trip_is_exact_at_printed_precision() {
        let dir = tempfile::tempdir().unwrap();
        let data = sample_data();
        write_epochs_csv_dir(&data, dir.path()).unwrap();
        let back = read_epochs_csv_dir(dir.path()).unwrap();
        // 17 significant digits round-trip f64 exactly
        assert_eq!(data.raw(), back.raw());
        assert_eq!(back.labels(), data.labels());
    }

    #[test]
    fn empty_directory_is_an_ingest_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            read_epochs_csv_dir(dir.path()),
            Err(CliError::Io(_))
        ));
    }

    #[test]
    fn ragged_realizations_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.csv"), "Y1,Y2\n1.0,2.0\n3.0,4.0\n").unwrap();
        std::fs::write(dir.path().join("b.csv"), "Y1,Y2\n1.0,2.0\n").unwrap();
        let err = read_epochs_csv_dir(dir.path()).unwrap_err();
        assert!(err.to_string().contains("rows"));
    }

    #[test]
    fn non_finite_values_are_located() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.csv"), "Y1,Y2\n1.0,2.0\n3.0,inf\n").unwrap();
        let err = read_epochs_csv_dir(dir.path()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 3") && msg.contains("column 2"), "{msg}");
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.bin");
        std::fs::write(&path, b"NOTMAGIC").unwrap();
        assert!(read_epochs_binary(&path).is_err());
    }
}
