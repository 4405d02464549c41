//! CSV ingestion.
//!
//! Observation files carry a header with `y`, `x1..xq` and optionally `r`
//! (0/1) and `w` (positive). Missing `r`/`w` columns default to 1. Covariate
//! cells of incomplete rows may be empty or `NA`. Ties in `y` are detected
//! by exact equality of the parsed values.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{PlrError, Result};
use crate::model::ObservationSet;
use crate::projection::FiniteModel;

fn parse_cell(s: &str, allow_missing: bool, what: &str, row: usize) -> Result<f64> {
    let t = s.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan") {
        return if allow_missing {
            Ok(f64::NAN)
        } else {
            Err(PlrError::InvalidData(format!("missing {what} at data row {row}")))
        };
    }
    t.parse::<f64>().map_err(|_| PlrError::InvalidData(format!("cannot parse {what} '{t}' at data row {row}")))
}

/// Positions of `x1, x2, ...` in the header; at least `x1` must exist.
fn covariate_columns(headers: &csv::StringRecord) -> Result<Vec<usize>> {
    let mut cols = Vec::new();
    for j in 1.. {
        match headers.iter().position(|h| h.trim() == format!("x{j}")) {
            Some(c) => cols.push(c),
            None => break,
        }
    }
    if cols.is_empty() {
        return Err(PlrError::InvalidData("header has no x1 column".into()));
    }
    Ok(cols)
}

fn column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim() == name)
}

pub fn read_observations<R: Read>(reader: R) -> Result<ObservationSet> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let ycol = column(&headers, "y").ok_or_else(|| PlrError::InvalidData("header has no y column".into()))?;
    let xcols = covariate_columns(&headers)?;
    let rcol = column(&headers, "r");
    let wcol = column(&headers, "w");
    let q = xcols.len();

    let (mut y, mut x, mut r, mut w) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let get = |c: usize| rec.get(c).unwrap_or("");
        let ri = match rcol {
            Some(c) => match get(c) {
                "1" | "" => true,
                "0" => false,
                other => return Err(PlrError::InvalidData(format!("r must be 0 or 1, got '{other}' at row {row}"))),
            },
            None => true,
        };
        y.push(parse_cell(get(ycol), !ri, "y", row)?);
        for &c in &xcols {
            x.push(parse_cell(get(c), !ri, "covariate", row)?);
        }
        r.push(ri);
        w.push(match wcol {
            Some(c) if !get(c).is_empty() => parse_cell(get(c), false, "w", row)?,
            _ => 1.0,
        });
    }
    ObservationSet::from_flat(y, x, q, r, w)
}

pub fn read_observations_file(path: &Path) -> Result<ObservationSet> {
    read_observations(std::fs::File::open(path)?)
}

fn fmt_cell(v: f64) -> String {
    if v.is_nan() {
        "NA".to_string()
    } else {
        format!("{v:?}")
    }
}

/// Writes `y, x1..xq, r, w` with round-trip float formatting.
pub fn write_observations<W: Write>(data: &ObservationSet, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["y".to_string()];
    header.extend((1..=data.q()).map(|j| format!("x{j}")));
    header.push("r".into());
    header.push("w".into());
    wtr.write_record(&header)?;
    for i in 0..data.n() {
        let mut rec = vec![fmt_cell(data.y()[i])];
        rec.extend(data.x_row(i).iter().map(|v| fmt_cell(*v)));
        rec.push(if data.r()[i] { "1".into() } else { "0".into() });
        rec.push(fmt_cell(data.w()[i]));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Joint pmf file with columns `y, x1..xq, prob`; unlisted grid cells
/// have zero mass.
pub fn read_joint_pmf<R: Read>(reader: R) -> Result<FiniteModel> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let ycol = column(&headers, "y").ok_or_else(|| PlrError::InvalidData("header has no y column".into()))?;
    let pcol = column(&headers, "prob").ok_or_else(|| PlrError::InvalidData("header has no prob column".into()))?;
    let xcols = covariate_columns(&headers)?;
    let mut cells = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let get = |c: usize| rec.get(c).unwrap_or("");
        let y = parse_cell(get(ycol), false, "y", row)?;
        let x: Vec<f64> = xcols.iter().map(|&c| parse_cell(get(c), false, "covariate", row)).collect::<Result<_>>()?;
        let p = parse_cell(get(pcol), false, "prob", row)?;
        cells.push((y, x, p));
    }
    FiniteModel::from_cells(&cells)
}

pub fn read_joint_pmf_file(path: &Path) -> Result<FiniteModel> {
    read_joint_pmf(std::fs::File::open(path)?)
}
