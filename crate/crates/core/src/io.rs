//! CSV input and output.
//!
//! Series: `t,value[,label]`. Detection records: `t,pvalue,threshold,decision[,label]`.
//! Warm-up records leave `pvalue` and `threshold` empty.

use std::io::{Read, Write};
use std::path::Path;

use crate::detector::DetectionRecord;
use crate::error::{Error, Result};
use crate::generator::LabeledSeries;

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::Usage(format!("i/o: {e}"))
}

fn parse_label(s: &str) -> Option<bool> {
    match s.trim() {
        "0" | "false" => Some(false),
        "1" | "true" => Some(true),
        _ => None,
    }
}

/// Values and, when every row has a third column, labels.
pub fn read_series<R: Read>(input: R) -> Result<(Vec<f64>, Option<Vec<bool>>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut labelled: Option<bool> = None;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(i + 1, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(i + 1, |p| p.line() as usize);
        let perr = |message: String| Error::Parse { line, message };
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        if i == 0 && rec.get(1).is_some_and(|v| v.parse::<f64>().is_err()) {
            continue; // header
        }
        if rec.len() < 2 || rec.len() > 3 {
            return Err(perr(format!("expected `t,value[,label]`, got {} fields", rec.len())));
        }
        let v: f64 = rec[1].parse().map_err(|_| perr(format!("bad value `{}`", &rec[1])))?;
        if !v.is_finite() {
            return Err(perr(format!("non-finite value `{}`", &rec[1])));
        }
        let has = rec.len() == 3;
        match labelled {
            None => labelled = Some(has),
            Some(l) if l != has => return Err(perr("label column present on some rows only".into())),
            _ => {}
        }
        if has {
            labels.push(parse_label(&rec[2]).ok_or_else(|| perr(format!("bad label `{}`", &rec[2])))?);
        }
        values.push(v);
    }
    Ok((values, if labelled == Some(true) { Some(labels) } else { None }))
}

pub fn write_series<W: Write>(out: W, series: &LabeledSeries, with_labels: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if with_labels {
        w.write_record(["t", "value", "label"]).map_err(io_err)?;
    } else {
        w.write_record(["t", "value"]).map_err(io_err)?;
    }
    for (i, (x, a)) in series.values.iter().zip(&series.labels).enumerate() {
        let t = (i + 1).to_string();
        let v = x.to_string();
        if with_labels {
            w.write_record([t.as_str(), v.as_str(), if *a { "1" } else { "0" }]).map_err(io_err)?;
        } else {
            w.write_record([t.as_str(), v.as_str()]).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

pub fn write_records<W: Write>(out: W, records: &[DetectionRecord]) -> Result<()> {
    let labelled = records.iter().any(|r| r.label.is_some());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t", "pvalue", "threshold", "decision"];
    if labelled {
        header.push("label");
    }
    w.write_record(&header).map_err(io_err)?;
    for r in records {
        let mut row = vec![
            r.t.to_string(),
            r.pvalue.map(|p| p.as_f64().to_string()).unwrap_or_default(),
            r.threshold.map(|x| x.to_string()).unwrap_or_default(),
            u8::from(r.decision).to_string(),
        ];
        if labelled {
            row.push(r.label.map(|a| u8::from(a).to_string()).unwrap_or_default());
        }
        w.write_record(&row).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// A plain table with a header row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header).map_err(io_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(io_err)?;
        }
        w.flush().map_err(io_err)
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| io_err(format!("{}: {e}", path.display())))?;
        self.write(std::io::BufWriter::new(f))
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("utf8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_labelled_and_unlabelled() {
        let (v, l) = read_series("t,value,label\n1,0.5,0\n2,4,1\n".as_bytes()).unwrap();
        assert_eq!(v, vec![0.5, 4.0]);
        assert_eq!(l, Some(vec![false, true]));
        let (v, l) = read_series("1,0.5\n2,-1\n".as_bytes()).unwrap();
        assert_eq!(v, vec![0.5, -1.0]);
        assert_eq!(l, None);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        match read_series("t,value\n1,0.5\n2,abc\n".as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(read_series("1,0.5,1\n2,0.1\n".as_bytes()), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(read_series("1,0.5,7\n".as_bytes()), Err(Error::Parse { .. })));
    }

    #[test]
    fn series_round_trip() {
        let s = LabeledSeries { values: vec![0.25, 4.0], labels: vec![false, true] };
        let mut buf = Vec::new();
        write_series(&mut buf, &s, true).unwrap();
        let (v, l) = read_series(buf.as_slice()).unwrap();
        assert_eq!(v, s.values);
        assert_eq!(l.unwrap(), s.labels);
    }
}
