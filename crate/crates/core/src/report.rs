//! Canonical number formatting and report export.
//!
//! Reports carry floats rounded to 12 significant digits; non-finite values
//! are written as the strings `"inf"`, `"-inf"` and `"nan"`. Struct fields
//! serialize in declaration order and maps are `BTreeMap`s, so identical
//! inputs give byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Round to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// Text form used in CSV cells and (for non-finite values) JSON strings.
pub fn fmt12(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        let r = round12(x);
        // normalise −0
        if r == 0.0 {
            "0".into()
        } else if r.abs() < 1e-6 || r.abs() >= 1e16 {
            format!("{r:e}")
        } else {
            format!("{r}")
        }
    }
}

fn ser<S: serde::Serializer>(x: f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_finite() {
        let r = round12(x);
        s.serialize_f64(if r == 0.0 { 0.0 } else { r })
    } else {
        s.serialize_str(&fmt12(x))
    }
}

/// `#[serde(with = "report::real")]` for `f64` fields.
pub mod real {
    pub fn serialize<S: serde::Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        super::ser(*x, s)
    }
}

pub mod real_vec {
    use serde::ser::SerializeSeq;

    pub fn serialize<S: serde::Serializer>(x: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(x.len()))?;
        for v in x {
            seq.serialize_element(&super::Real(*v))?;
        }
        seq.end()
    }
}

pub mod real_opt {
    pub fn serialize<S: serde::Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match x {
            Some(v) => super::ser(*v, s),
            None => s.serialize_none(),
        }
    }
}

/// A float that serializes canonically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Real(pub f64);

impl Serialize for Real {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ser(self.0, s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Format> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(Error::Unsupported(format!("export format `{other}`"))),
        }
    }
}

/// A table with a fixed header, rendered as CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Table {
        Table {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Num(x) => fmt12(*x),
                    Cell::Int(n) => n.to_string(),
                    Cell::Text(t) if t.contains([',', '"', '\n']) => {
                        format!("\"{}\"", t.replace('"', "\"\""))
                    }
                    Cell::Text(t) => t.clone(),
                })
                .collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(report: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report).map_err(|e| Error::Parse {
        what: "report".into(),
        source: e,
    })?;
    s.push('\n');
    Ok(s)
}

/// Writes `report` as JSON, or `table` as CSV.
pub fn export_report<T: Serialize>(report: &T, table: Option<&Table>, format: Format, path: &Path) -> Result<()> {
    let body = match format {
        Format::Json => to_json(report)?,
        Format::Csv => table
            .ok_or_else(|| Error::Unsupported("this report has no tabular form".into()))?
            .to_csv(),
    };
    fs::write(path, body)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_is_twelve_digits() {
        assert_eq!(fmt12(std::f64::consts::PI), "3.14159265359");
        assert_eq!(fmt12(-0.0), "0");
        assert_eq!(fmt12(f64::NEG_INFINITY), "-inf");
        assert_eq!(fmt12(1e-30 / 3.0), "3.33333333333e-31");
    }

    #[test]
    fn json_nonfinite_as_strings() {
        #[derive(Serialize)]
        struct R {
            #[serde(with = "real")]
            a: f64,
            #[serde(with = "real_vec")]
            b: Vec<f64>,
        }
        let s = serde_json::to_string(&R {
            a: f64::INFINITY,
            b: vec![1.0 / 3.0, f64::NAN],
        })
        .unwrap();
        assert_eq!(s, r#"{"a":"inf","b":[0.333333333333,"nan"]}"#);
    }

    #[test]
    fn xml_is_rejected() {
        assert!("xml".parse::<Format>().is_err());
        assert_eq!("csv".parse::<Format>().unwrap(), Format::Csv);
    }

    #[test]
    fn csv_header_and_rows() {
        let mut t = Table::new(vec!["re", "im", "r", "op", "value", "nodes"]);
        t.push(vec![
            Cell::Num(0.5),
            Cell::Num(0.0),
            Cell::Num(0.25),
            Cell::Text("circle".into()),
            Cell::Num(-0.1),
            Cell::Int(256),
        ]);
        let csv = t.to_csv();
        assert!(csv.starts_with("re,im,r,op,value,nodes\n"));
        assert!(csv.contains("0.5,0,0.25,circle,-0.1,256"));
    }

    #[test]
    fn export_to_unwritable_path_fails() {
        let t = Table::new(vec!["a"]);
        let err = export_report(&1u8, Some(&t), Format::Csv, Path::new("/nonexistent/dir/x.csv"));
        assert!(matches!(err, Err(Error::Io(_))));
    }
}
