use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

use super::config::Scheme;
use super::sweep::TrialRecord;

pub const CSV_HEADER: [&str; 8] = [
    "seed",
    "trial",
    "scheme",
    "capacity_bps",
    "mse",
    "iterations",
    "converged",
    "wall_time_ms",
];

/// One parsed CSV data row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub seed: u64,
    pub trial: usize,
    pub scheme: Scheme,
    pub capacity_bps: f64,
    pub mse: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time_ms: f64,
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => Error::Parse {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

/// Writes one row per record, sorted by (trial, scheme, capacity). Floats use
/// the shortest decimal that round-trips.
pub fn write_csv(records: &[TrialRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut sorted: Vec<&TrialRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        (a.trial_index, a.scheme.name())
            .cmp(&(b.trial_index, b.scheme.name()))
            .then(a.capacity_bps.total_cmp(&b.capacity_bps))
    });
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    writer.write_record(CSV_HEADER).map_err(|e| csv_error(path, e))?;
    for r in sorted {
        writer
            .write_record([
                r.seed.to_string(),
                r.trial_index.to_string(),
                r.scheme.name().to_string(),
                r.capacity_bps.to_string(),
                r.mse.to_string(),
                r.iterations.to_string(),
                r.converged.to_string(),
                r.wall_time_ms.to_string(),
            ])
            .map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a file produced by [`write_csv`].
pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<CsvRow>> {
    let path = path.as_ref();
    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?;
    if header.iter().ne(CSV_HEADER) {
        return Err(parse_err(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let field = |i: usize| record.get(i).unwrap_or_default();
        let bad = |i: usize| parse_err(format!("row {}: bad `{}` value `{}`", line + 1, CSV_HEADER[i], field(i)));
        rows.push(CsvRow {
            seed: field(0).parse().map_err(|_| bad(0))?,
            trial: field(1).parse().map_err(|_| bad(1))?,
            scheme: field(2).parse().map_err(|_| bad(2))?,
            capacity_bps: field(3).parse().map_err(|_| bad(3))?,
            mse: field(4).parse().map_err(|_| bad(4))?,
            iterations: field(5).parse().map_err(|_| bad(5))?,
            converged: field(6).parse().map_err(|_| bad(6))?,
            wall_time_ms: field(7).parse().map_err(|_| bad(7))?,
        });
    }
    Ok(rows)
}

/// Mean MSE of one (scheme, capacity) cell over trials.
#[derive(Debug, Clone, PartialEq)]
pub struct MseSummary {
    pub scheme: Scheme,
    pub capacity_bps: f64,
    pub mean: f64,
    pub std_error: f64,
    pub count: usize,
}

/// Averages `(scheme, capacity, mse)` triples per (scheme, capacity), ordered
/// by scheme then capacity.
pub fn summarize<I>(rows: I) -> Vec<MseSummary>
where
    I: IntoIterator<Item = (Scheme, f64, f64)>,
{
    let mut cells: BTreeMap<(Scheme, u64), Vec<f64>> = BTreeMap::new();
    for (scheme, capacity, mse) in rows {
        // capacities are non-negative, so the bit pattern orders like the value
        cells.entry((scheme, capacity.to_bits())).or_default().push(mse);
    }
    cells
        .into_iter()
        .map(|((scheme, bits), values)| {
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = if values.len() > 1 {
                values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            MseSummary {
                scheme,
                capacity_bps: f64::from_bits(bits),
                mean,
                std_error: (var / n).sqrt(),
                count: values.len(),
            }
        })
        .collect()
}
