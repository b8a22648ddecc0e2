//! CSV datasets, reports, search traces and plot data.

use std::io::{Read, Write};

use serde::Serialize;
use symreduce_core::bench::{Report, NUMERIC_COLUMNS};
use symreduce_core::beam::SearchResult;
use symreduce_core::substitution::SubstError;
use symreduce_core::{Dataset, Matrix, Measure};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("header must be x1,...,xd,y; got {0}")]
    Header(String),
    #[error("row {row}, column {col}: cannot parse {value:?}")]
    Value { row: usize, col: usize, value: String },
    #[error("row {row} has {got} fields, expected {want}")]
    Width { row: usize, got: usize, want: usize },
    #[error("dataset: {0}")]
    Dataset(#[from] SubstError),
}

/// Reads a dataset with header `x1,...,xd,y`.
pub fn read_dataset<R: Read>(reader: R) -> Result<Dataset, IoError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let d = header.len().saturating_sub(1);
    let expected: Vec<String> =
        (1..=d).map(|j| format!("x{j}")).chain(std::iter::once("y".to_string())).collect();
    if d == 0 || header != expected {
        return Err(IoError::Header(header.join(",")));
    }
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != d + 1 {
            return Err(IoError::Width { row: i + 1, got: rec.len(), want: d + 1 });
        }
        let mut vals = Vec::with_capacity(d + 1);
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| IoError::Value { row: i + 1, col: j + 1, value: field.to_string() })?;
            vals.push(v);
        }
        y.push(vals.pop().expect("d + 1 values"));
        rows.push(vals);
    }
    let x = if rows.is_empty() { Matrix::zeros(0, d) } else { Matrix::from_rows(&rows) };
    Ok(Dataset::new(x, y)?)
}

pub fn read_dataset_file(path: &std::path::Path) -> Result<Dataset, IoError> {
    read_dataset(std::fs::File::open(path)?)
}

/// Writes a dataset with header `x1,...,xd,y`, values in shortest
/// round-trip form.
pub fn write_dataset<W: Write>(ds: &Dataset, writer: W) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(writer);
    let d = ds.n_vars();
    let mut header: Vec<String> = (1..=d).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    w.write_record(&header)?;
    for i in 0..ds.n_rows() {
        let mut rec: Vec<String> = ds.x().row(i).iter().map(|v| format!("{v:?}")).collect();
        rec.push(format!("{:?}", ds.y()[i]));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

/// Report rows followed by one `mean` line with the column aggregates.
/// Undefined values are empty fields.
pub fn write_report<W: Write>(report: &Report, writer: W) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["id", "d", "status"];
    header.extend(NUMERIC_COLUMNS);
    w.write_record(&header)?;
    for r in &report.rows {
        let mut rec = vec![r.id.clone(), r.d.to_string(), r.status.clone()];
        rec.extend(r.numeric().iter().map(|&v| fmt_num(v)));
        w.write_record(&rec)?;
    }
    let mut rec = vec!["mean".to_string(), String::new(), "aggregate".to_string()];
    rec.extend(report.aggregates().iter().map(|&v| fmt_num(v)));
    w.write_record(&rec)?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct TraceLine<'a> {
    problem: &'a str,
    node: usize,
    parent: Option<usize>,
    depth: usize,
    substitution: String,
    score: Option<f64>,
    n_vars: usize,
    rows_dropped: usize,
    on_best_path: bool,
    var_map: Vec<String>,
    y_map: String,
}

/// One JSON object per search node.
pub fn write_trace<W: Write>(problem: &str, result: &SearchResult, mut writer: W) -> Result<(), IoError> {
    for t in result.trace() {
        let ds = &result.nodes[t.node].dataset;
        let line = TraceLine {
            problem,
            node: t.node,
            parent: t.parent,
            depth: t.depth,
            substitution: t.substitution,
            score: t.score.is_finite().then_some(t.score),
            n_vars: t.n_vars,
            rows_dropped: t.rows_dropped,
            on_best_path: t.on_best_path,
            var_map: ds.var_map().iter().map(|e| e.to_text()).collect(),
            y_map: y_map_text(ds),
        };
        serde_json::to_writer(&mut writer, &line)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// The response map with the original response printed as `y`.
pub fn y_map_text(ds: &Dataset) -> String {
    let ysym = ds.y_symbol();
    ds.y_map().to_text_with(&|v| if v == ysym { "y".to_string() } else { format!("x{}", v + 1) })
}

/// `(noise_level, mean_reduction_rate, measure)` records.
pub fn write_plot_data<W: Write>(points: &[(f64, f64, Measure)], writer: W) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["noise_level", "mean_reduction_rate", "measure"])?;
    for (g, r, m) in points {
        w.write_record([fmt_num(*g), fmt_num(*r), m.name().to_string()])?;
    }
    w.flush()?;
    Ok(())
}
