//! CSV emission and ingestion for training curves, per-point errors,
//! error distributions, and summary tables.

use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use csiloc_core::metrics::ErrorReport;
use csiloc_core::quantifier::EpochStats;

use crate::formats::create_output;

/// Spacing of the resampled distribution output, meters.
pub const CDF_RESOLUTION: f64 = 0.05;

pub fn write_curve(path: &Path, stats: &[EpochStats], force: bool) -> Result<()> {
    let mut w = create_output(path, force)?;
    writeln!(w, "epoch,train_loss_m,val_error_m")?;
    for s in stats {
        writeln!(w, "{},{:?},{:?}", s.epoch, s.train_loss, s.val_error)?;
    }
    w.flush()?;
    Ok(())
}

/// One evaluated capture: where the user stood, where the pipeline put
/// them, and how far apart the two are.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub index: usize,
    pub route: usize,
    /// Simulated day the capture belongs to.
    pub day: usize,
    pub truth: (f64, f64),
    pub pred: (f64, f64),
    pub error: f64,
}

pub fn write_errors(path: &Path, rows: &[ErrorRow], force: bool) -> Result<()> {
    let mut w = create_output(path, force)?;
    writeln!(w, "index,route,day,x_true,y_true,x_pred,y_pred,error_m")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{:?},{:?},{:?},{:?},{:?}",
            r.index, r.route, r.day, r.truth.0, r.truth.1, r.pred.0, r.pred.1, r.error
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Pull one named numeric column out of a CSV written by this crate.
pub fn read_column(path: &Path, column: &str) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| anyhow::anyhow!("{} is empty", path.display()))?;
    let col = header
        .split(',')
        .position(|h| h == column)
        .ok_or_else(|| anyhow::anyhow!("{} has no '{column}' column", path.display()))?;
    let mut values = Vec::new();
    for (ln, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let field = line
            .split(',')
            .nth(col)
            .ok_or_else(|| anyhow::anyhow!("{}:{}: short row", path.display(), ln + 2))?;
        let v: f64 = field
            .parse()
            .with_context(|| format!("{}:{}: bad number '{field}'", path.display(), ln + 2))?;
        values.push(v);
    }
    Ok(values)
}

/// Resample the empirical distribution on a regular error grid from zero
/// past the maximum, so different runs plot on common axes.
pub fn write_cdf(path: &Path, report: &ErrorReport, force: bool) -> Result<()> {
    let mut w = create_output(path, force)?;
    writeln!(w, "error_m,fraction")?;
    let n = report.sorted_errors.len() as f64;
    let steps = (report.max / CDF_RESOLUTION).ceil() as usize + 1;
    let mut at_or_below = 0usize;
    for k in 0..=steps {
        let threshold = k as f64 * CDF_RESOLUTION;
        while at_or_below < report.sorted_errors.len()
            && report.sorted_errors[at_or_below] <= threshold
        {
            at_or_below += 1;
        }
        writeln!(w, "{threshold:?},{:?}", at_or_below as f64 / n)?;
    }
    w.flush()?;
    Ok(())
}

/// Summary table over labeled reports plus a pooled row across all of
/// their errors.
pub fn write_summary(path: &Path, reports: &[ErrorReport], force: bool) -> Result<()> {
    if reports.is_empty() {
        bail!("summary needs at least one report");
    }
    let mut w = create_output(path, force)?;
    writeln!(w, "label,count,mean_m,std_m,p80_m,max_m")?;
    let mut pooled = Vec::new();
    for r in reports {
        if r.label.contains(',') || r.label.contains('\n') {
            bail!("label '{}' cannot appear in a CSV", r.label);
        }
        writeln!(
            w,
            "{},{},{:?},{:?},{:?},{:?}",
            r.label,
            r.sorted_errors.len(),
            r.mean,
            r.std,
            r.p80,
            r.max
        )?;
        pooled.extend_from_slice(&r.sorted_errors);
    }
    if reports.len() > 1 {
        let all = ErrorReport::from_errors(&pooled)?;
        writeln!(
            w,
            "average,{},{:?},{:?},{:?},{:?}",
            all.sorted_errors.len(),
            all.mean,
            all.std,
            all.p80,
            all.max
        )?;
    }
    w.flush()?;
    Ok(())
}

/// The one-line human digest printed after evaluation.
pub fn summary_line(report: &ErrorReport) -> String {
    format!(
        "{}: n={} mean={:.3} m std={:.3} m p80={:.3} m max={:.3} m",
        if report.label.is_empty() {
            "errors"
        } else {
            &report.label
        },
        report.sorted_errors.len(),
        report.mean,
        report.std,
        report.p80,
        report.max
    )
}
