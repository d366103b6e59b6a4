//! Reading data matrices and writing results.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;
use spreaddetect::matrix::{DataMatrix, Matrix};

use crate::error::{invalid, read_failed, write_failed, CliResult};

/// A data matrix plus its row labels, if the file had them.
#[derive(Debug, Clone)]
pub struct LabelledData {
    pub data: DataMatrix,
    pub row_labels: Option<Vec<String>>,
}

fn is_number(cell: &str) -> bool {
    cell.trim().parse::<f64>().is_ok()
}

/// Parses a CSV with one row per node and one column per time point.
///
/// A first column is taken as row labels when the first cell of the first
/// data row is not a number. The first line is taken as a header when any of
/// its value cells is not a number, or when row labels are present and its
/// first cell is empty.
pub fn parse_data<R: Read>(reader: R) -> CliResult<LabelledData> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| invalid("--data", e))?;
        records.push(rec.iter().map(str::to_string).collect::<Vec<_>>());
    }
    if records.is_empty() {
        return Err(invalid("--data", "no rows"));
    }

    let first_row_labelled = !is_number(&records[0][0]);
    let header_by_values = records[0].iter().skip(1).any(|c| !is_number(c));
    let has_header = header_by_values
        || (records.len() > 1 && first_row_labelled && !is_number(&records[1][0]) && records[0][0].is_empty());
    if has_header {
        records.remove(0);
    }
    if records.is_empty() {
        return Err(invalid("--data", "header but no data rows"));
    }
    let labelled = !is_number(&records[0][0]);

    let mut labels = Vec::new();
    let mut rows = Vec::with_capacity(records.len());
    for (i, rec) in records.into_iter().enumerate() {
        let line = i + 1 + has_header as usize;
        let mut cells = rec.into_iter();
        if labelled {
            labels.push(cells.next().unwrap_or_default());
        }
        let row = cells
            .enumerate()
            .map(|(c, cell)| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| invalid("--data", format!("line {line}, value {}: `{cell}` is not a finite number", c + 1)))
            })
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(row);
    }
    let data = DataMatrix::from_rows(rows).map_err(|e| invalid("--data", e))?;
    Ok(LabelledData {
        data,
        row_labels: labelled.then_some(labels),
    })
}

pub fn read_data(path: &Path) -> CliResult<LabelledData> {
    let file = File::open(path).map_err(|e| read_failed(path, e))?;
    parse_data(file).map_err(|e| match e {
        crate::error::CliError::Invalid(msg) => {
            crate::error::CliError::Invalid(format!("{msg} (in {})", path.display()))
        }
        other => other,
    })
}

/// Runs `body` against the file at `path`, or stdout when `path` is `None`.
pub fn with_output<F>(path: Option<&Path>, body: F) -> CliResult<()>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    let result = match path {
        Some(p) => File::create(p).and_then(|f| {
            let mut w = BufWriter::new(f);
            body(&mut w)?;
            w.flush()
        }),
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            body(&mut w).and_then(|_| w.flush())
        }
    };
    result.map_err(|e| write_failed(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: Option<&Path>, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| write_failed(path, e))?;
    with_output(path, |w| writeln!(w, "{text}"))
}

/// Plain numeric CSV, optionally with a header line and a label column.
pub fn write_matrix(
    w: &mut dyn Write,
    m: &Matrix,
    header: Option<&[String]>,
    labels: Option<&[String]>,
) -> io::Result<()> {
    if let Some(h) = header {
        writeln!(w, "{}", h.join(","))?;
    }
    for (j, row) in m.iter_rows().enumerate() {
        let mut line = String::new();
        if let Some(l) = labels {
            line.push_str(&l[j]);
            line.push(',');
        }
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&v.to_string());
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}
