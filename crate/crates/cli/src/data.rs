use std::path::Path;

use bilarx_core::OutputSeries;

use crate::error::{CliError, CliResult};

/// Reads `t,y` or `t,y,series` CSV. Other columns are ignored; series keep
/// their order of first appearance and `t` must run 1, 2, .. within each.
pub fn read_series(path: &Path) -> CliResult<Vec<OutputSeries>> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::Usage(format!("cannot read data {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Usage(format!("data {}: {e}", path.display())))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let t_col = col("t").ok_or_else(|| CliError::Usage(format!("data {}: missing column `t`", path.display())))?;
    let y_col = col("y").ok_or_else(|| CliError::Usage(format!("data {}: missing column `y`", path.display())))?;
    let s_col = col("series");

    let mut out: Vec<(String, Vec<f64>)> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| CliError::Usage(format!("data {} line {line}: {e}", path.display())))?;
        let field = |c: usize, name: &str| {
            rec.get(c)
                .map(str::trim)
                .ok_or_else(|| CliError::Usage(format!("data line {line}: missing field `{name}`")))
        };
        let t: usize = field(t_col, "t")?
            .parse()
            .map_err(|_| CliError::Usage(format!("data line {line}: field `t` is not a positive integer")))?;
        let y: f64 = field(y_col, "y")?
            .parse()
            .map_err(|_| CliError::Usage(format!("data line {line}: field `y` is not a number")))?;
        let label = match s_col {
            Some(c) => field(c, "series")?.to_string(),
            None => "y".to_string(),
        };
        let idx = match out.iter().position(|(l, _)| *l == label) {
            Some(k) => k,
            None => {
                out.push((label.clone(), Vec::new()));
                out.len() - 1
            }
        };
        let samples = &mut out[idx].1;
        if t != samples.len() + 1 {
            return Err(CliError::Data(format!(
                "data line {line}: series `{label}` expects t = {}, found {t}",
                samples.len() + 1
            )));
        }
        samples.push(y);
    }
    if out.is_empty() {
        return Err(CliError::Data(format!("data {} has no samples", path.display())));
    }
    Ok(out.into_iter().map(|(l, s)| OutputSeries::new(l, s)).collect())
}

/// Writes a CSV with the given header; floats use 17 significant digits.
pub fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<()> {
    let io = |e: csv::Error| CliError::Usage(format!("cannot write {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(&row).map_err(io)?;
    }
    w.flush()
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
