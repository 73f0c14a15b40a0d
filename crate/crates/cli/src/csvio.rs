//! CSV readers and writers for datasets, uncertainty reports, and curves.
//!
//! Dataset files carry the header `x0,...,xd-1,y,ambiguous,split` with
//! floats printed at 17 significant digits.

use std::fs;
use std::path::Path;

use uqlab_core::dataset::{Dataset, Split};
use uqlab_core::linalg::Matrix;
use uqlab_core::uncertainty::UncertaintyReport;

use crate::errors::{CliError, Result};
use crate::fmtnum::g17;

pub fn write_dataset(path: &Path, ds: &Dataset) -> Result<()> {
    let d = ds.dim();
    let mut out = String::new();
    for j in 0..d {
        out.push_str(&format!("x{j},"));
    }
    out.push_str("y,ambiguous,split\n");
    for i in 0..ds.len() {
        for &v in ds.x.row(i) {
            out.push_str(&g17(v));
            out.push(',');
        }
        out.push_str(&format!(
            "{},{},{}\n",
            ds.y[i],
            ds.ambiguous[i],
            ds.split[i].as_str()
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read a dataset CSV. The feature columns `x0..` are required; `y`,
/// `ambiguous`, and `split` are optional and default to 0 / false / train.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| CliError::Data(format!("{}: empty file", path.display())))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let mut x_cols = Vec::new();
    for (idx, name) in cols.iter().enumerate() {
        if let Some(stripped) = name.strip_prefix('x') {
            if stripped.parse::<usize>().is_ok() {
                x_cols.push(idx);
            }
        }
    }
    if x_cols.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no feature columns (x0, x1, ...) in header",
            path.display()
        )));
    }
    let y_col = cols.iter().position(|&c| c == "y");
    let amb_col = cols.iter().position(|&c| c == "ambiguous");
    let split_col = cols.iter().position(|&c| c == "split");

    let d = x_cols.len();
    let mut data = Vec::new();
    let mut y = Vec::new();
    let mut ambiguous = Vec::new();
    let mut split = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < cols.len() {
            return Err(CliError::Data(format!(
                "{}:{}: expected {} fields, found {}",
                path.display(),
                lineno + 1,
                cols.len(),
                fields.len()
            )));
        }
        for &c in &x_cols {
            let v: f64 = fields[c].parse().map_err(|_| {
                CliError::Data(format!(
                    "{}:{}: bad float {:?}",
                    path.display(),
                    lineno + 1,
                    fields[c]
                ))
            })?;
            data.push(v);
        }
        y.push(match y_col {
            Some(c) => fields[c].parse().map_err(|_| {
                CliError::Data(format!("{}:{}: bad label", path.display(), lineno + 1))
            })?,
            None => 0,
        });
        ambiguous.push(match amb_col {
            Some(c) => fields[c] == "true",
            None => false,
        });
        split.push(match split_col {
            Some(c) => Split::parse(fields[c]).ok_or_else(|| {
                CliError::Data(format!(
                    "{}:{}: bad split {:?}",
                    path.display(),
                    lineno + 1,
                    fields[c]
                ))
            })?,
            None => Split::Train,
        });
    }
    let n = y.len();
    Ok(Dataset::new(Matrix::from_vec(n, d, data), y, ambiguous, split))
}

pub fn write_reports(path: &Path, reports: &[UncertaintyReport]) -> Result<()> {
    let mut out = String::from("entropy,log_density,verdict\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{}\n",
            g17(r.softmax_entropy),
            g17(r.log_density),
            r.verdict.as_str()
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Generic CSV writer: a header plus rows of preformatted fields.
pub fn write_rows(path: &Path, header: &str, rows: &[Vec<String>]) -> Result<()> {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}
