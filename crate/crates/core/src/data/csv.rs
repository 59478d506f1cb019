//! Text layout:
//!
//! ```text
//! # shape N C T K
//! label,c0_t0,c0_t1,...,c{C-1}_t{T-1}
//! 1,0.25,-1.5,...
//! ```
//!
//! One row per instance: the integer label, then `C * T` values in
//! channel-major order. Values are written as the shortest decimal that
//! round-trips the 32-bit float.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Dataset, DatasetSplits, Split};
use crate::error::{CsvErrorKind, Error, Result};
use crate::tensor::Tensor;

fn csv_err(path: &Path, line: usize, kind: CsvErrorKind) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        line,
        kind,
    }
}

/// Renders a dataset in the CSV layout.
pub fn write_csv_file(ds: &Dataset, path: &Path) -> Result<()> {
    let (n, c, t) = (ds.len(), ds.channels(), ds.length());
    let mut out = String::with_capacity(n * c * t * 10);
    let _ = writeln!(out, "# shape {n} {c} {t} {}", ds.class_count());
    out.push_str("label");
    for ch in 0..c {
        for step in 0..t {
            let _ = write!(out, ",c{ch}_t{step}");
        }
    }
    out.push('\n');
    for (i, row) in ds.inputs().data().chunks(c * t).enumerate() {
        let _ = write!(out, "{}", ds.labels()[i]);
        for &v in row {
            let _ = write!(out, ",{}", v as f32);
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Parses one CSV file into a dataset of the given split.
pub fn read_csv_file(path: &Path, split: Split) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (line_no, header) = lines
        .next()
        .ok_or_else(|| csv_err(path, 1, CsvErrorKind::MissingHeader))?;
    let Some(rest) = header.trim().strip_prefix("# shape") else {
        return Err(csv_err(path, line_no, CsvErrorKind::MissingHeader));
    };
    let dims: Vec<usize> = rest
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| {
            csv_err(
                path,
                line_no,
                CsvErrorKind::BadHeader(rest.trim().to_string()),
            )
        })?;
    let [n, c, t, k] = dims[..] else {
        return Err(csv_err(
            path,
            line_no,
            CsvErrorKind::BadHeader(rest.trim().to_string()),
        ));
    };
    if n == 0 || c == 0 || t == 0 || k < 2 {
        return Err(csv_err(
            path,
            line_no,
            CsvErrorKind::BadHeader(rest.trim().to_string()),
        ));
    }
    match lines.next() {
        Some((_, cols)) if cols.trim_start().starts_with("label") => {}
        Some((no, _)) => return Err(csv_err(path, no, CsvErrorKind::MissingColumns)),
        None => return Err(csv_err(path, line_no + 1, CsvErrorKind::MissingColumns)),
    }

    let width = c * t;
    let mut data = Vec::with_capacity(n * width);
    let mut labels = Vec::with_capacity(n);
    let mut last_line = line_no + 1;
    for (no, line) in lines {
        last_line = no;
        if line.trim().is_empty() {
            continue;
        }
        let mut cells = line.split(',').map(str::trim);
        let label_cell = cells.next().unwrap_or_default();
        let label: i64 = label_cell
            .parse()
            .map_err(|_| csv_err(path, no, CsvErrorKind::NonNumeric(label_cell.to_string())))?;
        if label < 0 || label as usize >= k {
            return Err(csv_err(
                path,
                no,
                CsvErrorKind::LabelOutOfRange { label, classes: k },
            ));
        }
        let values: Vec<&str> = cells.collect();
        if values.len() != width {
            return Err(csv_err(
                path,
                no,
                CsvErrorKind::RaggedRow {
                    expected: width,
                    found: values.len(),
                },
            ));
        }
        for cell in values {
            let v: f32 = cell
                .parse()
                .map_err(|_| csv_err(path, no, CsvErrorKind::NonNumeric(cell.to_string())))?;
            if !v.is_finite() {
                return Err(csv_err(
                    path,
                    no,
                    CsvErrorKind::NonFiniteValue(cell.to_string()),
                ));
            }
            data.push(v as f64);
        }
        labels.push(label as usize);
    }
    if labels.len() != n {
        return Err(csv_err(
            path,
            last_line,
            CsvErrorKind::RowCount {
                declared: n,
                found: labels.len(),
            },
        ));
    }
    Dataset::new(Tensor::new(vec![n, c, t], data)?, labels, split, k)
}

/// Writes `train.csv`, `val.csv` and `test.csv` into `dir`.
pub fn write_csv_dataset(splits: &DatasetSplits, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for split in Split::ALL {
        write_csv_file(splits.get(split), &dir.join(format!("{split}.csv")))?;
    }
    Ok(())
}

/// Reads `train.csv`, `val.csv` and `test.csv` from `dir`.
pub fn load_csv_dataset(dir: &Path) -> Result<DatasetSplits> {
    let read = |split: Split| read_csv_file(&dir.join(format!("{split}.csv")), split);
    let splits = DatasetSplits {
        train: read(Split::Train)?,
        val: read(Split::Val)?,
        test: read(Split::Test)?,
    };
    for split in [Split::Val, Split::Test] {
        let ds = splits.get(split);
        if ds.channels() != splits.train.channels()
            || ds.length() != splits.train.length()
            || ds.class_count() != splits.train.class_count()
        {
            return Err(Error::shape(
                "csv dataset",
                format!("{split} split shape disagrees with train"),
            ));
        }
    }
    Ok(splits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic_anomaly, SynthConfig};

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn parses_declared_shape() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "train.csv",
            "# shape 2 1 4 2\nlabel,c0_t0,c0_t1,c0_t2,c0_t3\n0,1,2,3,4\n1,0.5,-1,2e-1,7\n",
        );
        let ds = read_csv_file(&p, Split::Train).unwrap();
        assert_eq!(ds.inputs().shape(), &[2, 1, 4]);
        assert_eq!(ds.labels(), &[0, 1]);
        assert_eq!(ds.instance(1).data(), &[0.5, -1.0, 0.2f32 as f64, 7.0]);
    }

    #[test]
    fn diagnostics_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let cases = [
            (
                "# shape 2 1 4 2\nlabel\n0,1,2,3,4\n1,1,2,3,4,5\n",
                4,
                "ragged",
            ),
            ("# shape 1 1 2 2\nlabel\n0,1,x\n", 3, "non-numeric"),
            ("# shape 1 1 2 2\nlabel\n2,1,1\n", 3, "label"),
            ("label\n0,1,1\n", 1, "header"),
            ("# shape 1 1 2 2\n0,1,1\n", 2, "column"),
        ];
        for (body, line, needle) in cases {
            let p = write(dir.path(), "f.csv", body);
            let err = read_csv_file(&p, Split::Train).unwrap_err();
            match &err {
                Error::Csv { line: l, .. } => assert_eq!(*l, line, "{err}"),
                other => panic!("unexpected {other}"),
            }
            assert!(err.to_string().contains(needle), "{err}");
        }
    }

    #[test]
    fn synthetic_round_trip_is_bit_identical_in_f32() {
        let cfg = SynthConfig {
            train_size: 20,
            val_size: 5,
            test_size: 7,
            seed: 2,
            ..SynthConfig::default()
        };
        let splits = generate_synthetic_anomaly(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_csv_dataset(&splits, dir.path()).unwrap();
        let back = load_csv_dataset(dir.path()).unwrap();
        for split in Split::ALL {
            let a = splits.get(split);
            let b = back.get(split);
            assert_eq!(a.labels(), b.labels());
            let a32: Vec<f32> = a.inputs().data().iter().map(|&v| v as f32).collect();
            let b32: Vec<f32> = b.inputs().data().iter().map(|&v| v as f32).collect();
            assert_eq!(a32, b32);
        }
    }
}
