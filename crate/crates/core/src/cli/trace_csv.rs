//! Trace CSV: `k, x_true_1..n, x_hat_1..n, lo_p_1..n, hi_p_1..n, lo_z_1..n,
//! hi_z_1..n, lo_1..n, hi_1..n, contained`. Reals are written with 17
//! significant digits so a write/read round trip is lossless.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::simkit::SimulationTrace;

const GROUPS: [&str; 8] = ["x_true", "x_hat", "lo_p", "hi_p", "lo_z", "hi_z", "lo", "hi"];

/// One parsed CSV row; each vector has `n` entries.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub x_true: Vec<f64>,
    pub x_hat: Vec<f64>,
    pub lo_p: Vec<f64>,
    pub hi_p: Vec<f64>,
    pub lo_z: Vec<f64>,
    pub hi_z: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub contained: bool,
}

impl TraceRow {
    fn groups(&self) -> [&Vec<f64>; 8] {
        [&self.x_true, &self.x_hat, &self.lo_p, &self.hi_p, &self.lo_z, &self.hi_z, &self.lo, &self.hi]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceTable {
    pub n: usize,
    pub rows: Vec<TraceRow>,
}

pub fn header(n: usize) -> Vec<String> {
    let mut h = vec!["k".to_string()];
    for g in GROUPS {
        h.extend((1..=n).map(|i| format!("{g}_{i}")));
    }
    h.push("contained".into());
    h
}

pub fn rows_from_trace(trace: &SimulationTrace) -> Vec<TraceRow> {
    let v = |d: &nalgebra::DVector<f64>| d.iter().copied().collect::<Vec<_>>();
    trace
        .records
        .iter()
        .map(|r| {
            let o = &r.output;
            TraceRow {
                k: r.k,
                x_true: v(&r.x_true),
                x_hat: v(&o.x_hat),
                lo_p: v(o.box_p.lower()),
                hi_p: v(o.box_p.upper()),
                lo_z: v(o.box_z.lower()),
                hi_z: v(o.box_z.upper()),
                lo: v(o.box_fused.lower()),
                hi: v(o.box_fused.upper()),
                contained: r.contained_fused,
            }
        })
        .collect()
}

pub fn write_rows<W: Write>(out: W, n: usize, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(header(n)).map_err(csv_err)?;
    for row in rows {
        let mut rec = vec![row.k.to_string()];
        for g in row.groups() {
            rec.extend(g.iter().map(|x| format!("{x:.16e}")));
        }
        rec.push(if row.contained { "1" } else { "0" }.into());
        w.write_record(rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace<W: Write>(out: W, trace: &SimulationTrace) -> Result<()> {
    let n = trace.records.first().map_or(0, |r| r.x_true.len());
    write_rows(out, n, &rows_from_trace(trace))
}

/// Parses a trace CSV; errors carry the 1-based line number.
pub fn read_trace<R: Read>(input: R) -> Result<TraceTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let parse_err = |line: u64, msg: String| Error::Parse { line, msg };
    let head = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    let cols = head.len();
    if cols < 10 || (cols - 2) % 8 != 0 {
        return Err(parse_err(1, format!("unexpected column count {cols}")));
    }
    let n = (cols - 2) / 8;
    let expected = header(n);
    if let Some((got, want)) = head.iter().zip(&expected).find(|(g, w)| g != w) {
        return Err(parse_err(1, format!("expected column `{want}`, found `{got}`")));
    }

    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != cols {
            return Err(parse_err(line, format!("expected {cols} fields, found {}", rec.len())));
        }
        let k = rec[0].trim().parse::<usize>().map_err(|e| parse_err(line, format!("k: {e}")))?;
        let mut groups: Vec<Vec<f64>> = Vec::with_capacity(8);
        for (gi, g) in GROUPS.iter().enumerate() {
            let mut vals = Vec::with_capacity(n);
            for i in 0..n {
                let field = &rec[1 + gi * n + i];
                let v = field
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| parse_err(line, format!("{g}_{}: `{field}`: {e}", i + 1)))?;
                vals.push(v);
            }
            groups.push(vals);
        }
        let contained = match rec[cols - 1].trim() {
            "1" => true,
            "0" => false,
            other => return Err(parse_err(line, format!("contained must be 0 or 1, found `{other}`"))),
        };
        let mut it = groups.into_iter();
        let mut next = || it.next().expect("eight groups");
        rows.push(TraceRow {
            k,
            x_true: next(),
            x_hat: next(),
            lo_p: next(),
            hi_p: next(),
            lo_z: next(),
            hi_z: next(),
            lo: next(),
            hi: next(),
            contained,
        });
    }
    Ok(TraceTable { n, rows })
}
