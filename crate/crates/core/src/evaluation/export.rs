use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Histogram, SpectrumReport, SuppressionCurve};
use crate::error::{Error, Result};

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// `method,keep_fraction,accuracy_mean,accuracy_std` rows at `path`, plus the
/// full curves (per-run accuracies included) as JSON beside it.
pub fn write_curves(curves: &[SuppressionCurve], path: &Path) -> Result<()> {
    let mut text = String::from("method,keep_fraction,accuracy_mean,accuracy_std\n");
    for c in curves {
        for (i, f) in c.keep_fractions.iter().enumerate() {
            writeln!(
                text,
                "{},{f},{},{}",
                c.method, c.accuracy_mean[i], c.accuracy_std[i]
            )
            .unwrap();
        }
    }
    write_text(path, &text)?;
    write_text(
        &path.with_extension("json"),
        &serde_json::to_string_pretty(curves)?,
    )
}

/// `rank,singular_value` rows plus a JSON copy of the report.
pub fn write_spectrum_csv(report: &SpectrumReport, path: &Path) -> Result<()> {
    let mut text = String::from("rank,singular_value\n");
    for (i, s) in report.singular_values.iter().enumerate() {
        writeln!(text, "{i},{s}").unwrap();
    }
    write_text(path, &text)?;
    write_text(
        &path.with_extension("json"),
        &serde_json::to_string_pretty(report)?,
    )
}

pub fn write_histogram_csv(hist: &Histogram, path: &Path) -> Result<()> {
    let mut text = String::from("bin_start,bin_end,count\n");
    for (i, c) in hist.counts.iter().enumerate() {
        writeln!(text, "{},{},{c}", hist.edges[i], hist.edges[i + 1]).unwrap();
    }
    write_text(path, &text)
}
