//! CSV and JSON emission. Every float is printed with 17 significant
//! digits so the text round-trips to the exact f64; all output for one
//! command goes through a single writer after the parallel work is merged.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use continuized::baselines::BaselineRecord;
use continuized::process::TrajectoryRecord;

use crate::commands::{AggregateRow, CompareRow};
use crate::CliError;

/// 17 significant digits: the shortest width that round-trips every f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent() {
                if !dir.as_os_str().is_empty() {
                    std::fs::create_dir_all(dir)?;
                }
            }
            Ok(Box::new(BufWriter::new(File::create(p).map_err(|e| {
                CliError::Config(format!("cannot create {}: {e}", p.display()))
            })?)))
        }
        None => Ok(Box::new(BufWriter::new(io::stdout()))),
    }
}

pub fn write_trajectory_csv(
    w: &mut dyn Write,
    records: &[TrajectoryRecord],
) -> Result<(), CliError> {
    writeln!(w, "k,T_k,f_gap,dist_xz,lyapunov")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.k,
            fmt_f64(r.t),
            fmt_f64(r.f_gap),
            fmt_f64(r.dist_xz),
            fmt_opt(r.lyapunov)
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_aggregate_csv(w: &mut dyn Write, rows: &[AggregateRow]) -> Result<(), CliError> {
    writeln!(
        w,
        "k,mean_T_k,mean_gap,se_gap,mean_weighted_gap,se_weighted_gap,bound"
    )?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.k,
            fmt_f64(r.mean_t),
            fmt_f64(r.mean_gap),
            fmt_f64(r.se_gap),
            fmt_f64(r.mean_weighted_gap),
            fmt_f64(r.se_weighted_gap),
            fmt_opt(r.bound)
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_compare_csv(w: &mut dyn Write, rows: &[CompareRow]) -> Result<(), CliError> {
    writeln!(w, "method,beta_theoretical,slope_fitted,iters_to_1e-6")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{}",
            r.method,
            fmt_opt(r.beta_theoretical),
            fmt_opt(r.slope_fitted),
            r.iters.map(|n| n.to_string()).unwrap_or_default()
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_baseline_csv(w: &mut dyn Write, records: &[BaselineRecord]) -> Result<(), CliError> {
    writeln!(w, "k,f_gap")?;
    for r in records {
        writeln!(w, "{},{}", r.k, fmt_f64(r.f_gap))?;
    }
    w.flush()?;
    Ok(())
}

/// Gap-only view of a continuized trajectory, in the baseline schema.
pub fn write_gap_csv(w: &mut dyn Write, records: &[TrajectoryRecord]) -> Result<(), CliError> {
    writeln!(w, "k,f_gap")?;
    for r in records {
        writeln!(w, "{},{}", r.k, fmt_f64(r.f_gap))?;
    }
    w.flush()?;
    Ok(())
}

/// File name for one sweep cell: `key=value` pairs joined by underscores,
/// in grid order, with path separators kept out of the name.
pub fn cell_file_name(pairs: &[(String, serde_json::Value)]) -> PathBuf {
    let mut parts = Vec::with_capacity(pairs.len());
    for (key, value) in pairs {
        let rendered = match value {
            serde_json::Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        let cleaned: String = format!("{key}={rendered}")
            .chars()
            .map(|c| if c == '/' || c == '\\' { '_' } else { c })
            .collect();
        parts.push(cleaned);
    }
    PathBuf::from(format!("{}.csv", parts.join("_")))
}
