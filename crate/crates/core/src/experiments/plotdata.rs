//! CSV, JSON and PGM emitters.

use std::fmt::Display;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::learn::StepMetrics;

/// Writes a header line and comma-separated rows.
pub fn write_csv<T: Display>(path: &Path, header: &str, rows: &[Vec<T>]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{header}")?;
    for r in rows {
        let line: Vec<String> = r.iter().map(|v| v.to_string()).collect();
        writeln!(f, "{}", line.join(","))?;
    }
    f.flush()?;
    Ok(())
}

/// Columns `step,cost,loss,penalty,min_trace,param_norm`.
pub fn write_metrics(path: &Path, history: &[StepMetrics]) -> Result<()> {
    let rows: Vec<Vec<String>> = history
        .iter()
        .map(|m| {
            vec![
                m.step.to_string(),
                m.cost.to_string(),
                m.loss.to_string(),
                m.penalty.to_string(),
                m.min_trace.to_string(),
                m.param_norm.to_string(),
            ]
        })
        .collect();
    write_csv(path, StepMetrics::CSV_HEADER, &rows)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

/// Binary greyscale PGM (P5); values are clamped to `[0, 1]` and scaled by `1/max`.
pub fn write_pgm(path: &Path, grid: &[Vec<f64>], scale: usize) -> Result<()> {
    let h = grid.len();
    let w = grid.first().map_or(0, Vec::len);
    let max = grid.iter().flatten().cloned().fold(0.0, f64::max);
    let s = scale.max(1);
    let mut bytes = format!("P5\n{} {}\n255\n", w * s, h * s).into_bytes();
    for row in grid {
        for _ in 0..s {
            for &v in row {
                let g = if max > 0.0 { (v / max).clamp(0.0, 1.0) } else { 0.0 };
                bytes.extend(std::iter::repeat((g * 255.0).round() as u8).take(s));
            }
        }
    }
    std::fs::write(path, bytes)?;
    Ok(())
}
