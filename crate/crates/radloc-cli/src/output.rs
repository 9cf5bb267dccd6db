//! Output writers. All floating-point numbers are serialized as decimal
//! with 17 significant digits so that files round-trip f64 exactly and
//! reruns are byte-identical.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::Formatter;

use radloc::harness::ExperimentResult;
use radloc::serialize::float17;

use crate::CliError;

/// Compact JSON with 17-significant-digit floats.
struct Float17Formatter;

impl Formatter for Float17Formatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::Io(path.display().to_string(), e))?;
    let mut writer = BufWriter::new(file);
    let mut ser = serde_json::Serializer::with_formatter(&mut writer, Float17Formatter);
    value
        .serialize(&mut ser)
        .map_err(|e| CliError::Config(format!("serializing {}: {e}", path.display())))?;
    writer
        .write_all(b"\n")
        .and_then(|_| writer.flush())
        .map_err(|e| CliError::Io(path.display().to_string(), e))?;
    Ok(())
}

pub fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(path.display().to_string(), e))
}

/// `rmse_vs_snr.csv`: one row per SNR point.
pub fn write_experiment_csv(path: &Path, result: &ExperimentResult) -> Result<(), CliError> {
    let mut w = create(path)?;
    let io_err = |e: io::Error| CliError::Io(path.display().to_string(), e);
    let dim = result
        .per_snr
        .first()
        .map(|p| p.mean_estimate.dim())
        .unwrap_or(0);
    let mut header = String::from("snr_db,rmse");
    for i in 1..=dim {
        header.push_str(&format!(",mean_y{i}"));
    }
    header.push_str(",escape_fraction,runs,failures");
    writeln!(w, "{header}").map_err(io_err)?;
    for p in &result.per_snr {
        write!(w, "{},{}", float17(p.snr_db), float17(p.rmse)).map_err(io_err)?;
        for c in p.mean_estimate.coords() {
            write!(w, ",{}", float17(*c)).map_err(io_err)?;
        }
        writeln!(
            w,
            ",{},{},{}",
            float17(p.escape_fraction),
            p.runs,
            p.failures
        )
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// `convergence_curve.csv`: `k, rmse`.
pub fn write_curve_csv(path: &Path, curve: &[(usize, f64)]) -> Result<(), CliError> {
    let mut w = create(path)?;
    let io_err = |e: io::Error| CliError::Io(path.display().to_string(), e);
    writeln!(w, "k,rmse").map_err(io_err)?;
    for (k, rmse) in curve {
        writeln!(w, "{k},{}", float17(*rmse)).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}
