//! CSV readers and writers for traces, sweeps and scans.
//!
//! Every file has one header row, comma delimiter and `.` decimals. Errors
//! carry the 1-based line number of the offending record.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use thiserror::Error;

use crate::duffing::SweepResult;
use crate::quantities::{FrequencyTrace, QuantityError, TimeTrace};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Open { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {message}")]
    Format { line: u64, message: String },
    #[error("unexpected header {found:?}; expected one of {expected}")]
    Header { found: Vec<String>, expected: String },
    #[error(transparent)]
    Quantity(#[from] QuantityError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn open(path: &Path) -> Result<File, IoError> {
    File::open(path).map_err(|source| IoError::Open {
        path: path.to_path_buf(),
        source,
    })
}

fn create(path: &Path) -> Result<File, IoError> {
    File::create(path).map_err(|source| IoError::Open {
        path: path.to_path_buf(),
        source,
    })
}

/// Column layout of a frequency-domain file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    /// `f_Hz,mag`
    Magnitude,
    /// `f_Hz,re,im`
    Complex,
    /// `f_Hz,ReY_S,ImY_S`
    Admittance,
}

impl TraceKind {
    fn header(self) -> &'static [&'static str] {
        match self {
            TraceKind::Magnitude => &["f_Hz", "mag"],
            TraceKind::Complex => &["f_Hz", "re", "im"],
            TraceKind::Admittance => &["f_Hz", "ReY_S", "ImY_S"],
        }
    }
}

/// Parsed rows tagged with their 1-based line numbers.
type Rows = Vec<(u64, Vec<f64>)>;

/// Records parsed as floats, with the header row returned separately.
fn read_table<R: Read>(reader: R) -> Result<(Vec<String>, Rows), IoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            IoError::Format {
                line,
                message: e.to_string(),
            }
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != header.len() {
            return Err(IoError::Format {
                line,
                message: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        let values = rec
            .iter()
            .enumerate()
            .map(|(col, field)| {
                field.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| IoError::Format {
                    line,
                    message: format!("column {:?}: {field:?} is not a finite number", header[col]),
                })
            })
            .collect::<Result<Vec<f64>, IoError>>()?;
        rows.push((line, values));
    }
    Ok((header, rows))
}

fn header_is(found: &[String], expected: &[&str]) -> bool {
    found.len() == expected.len() && found.iter().zip(expected).all(|(a, b)| a == b)
}

pub fn read_frequency_trace<R: Read>(reader: R) -> Result<(FrequencyTrace, TraceKind), IoError> {
    let (header, rows) = read_table(reader)?;
    let kind = [TraceKind::Magnitude, TraceKind::Complex, TraceKind::Admittance]
        .into_iter()
        .find(|k| header_is(&header, k.header()))
        .ok_or_else(|| IoError::Header {
            found: header.clone(),
            expected: "f_Hz,mag | f_Hz,re,im | f_Hz,ReY_S,ImY_S".into(),
        })?;
    let f = rows.iter().map(|(_, r)| r[0]).collect();
    let z = rows
        .iter()
        .map(|(_, r)| match kind {
            TraceKind::Magnitude => Complex64::new(r[1], 0.0),
            _ => Complex64::new(r[1], r[2]),
        })
        .collect();
    Ok((FrequencyTrace::new(f, z)?, kind))
}

pub fn read_frequency_trace_path(path: impl AsRef<Path>) -> Result<(FrequencyTrace, TraceKind), IoError> {
    read_frequency_trace(open(path.as_ref())?)
}

pub fn write_frequency_trace<W: Write>(writer: W, trace: &FrequencyTrace, kind: TraceKind) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(kind.header())?;
    for (f, z) in trace.frequencies().iter().zip(trace.response()) {
        match kind {
            TraceKind::Magnitude => w.write_record([f.to_string(), z.norm().to_string()])?,
            _ => w.write_record([f.to_string(), z.re.to_string(), z.im.to_string()])?,
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_frequency_trace_path(
    path: impl AsRef<Path>,
    trace: &FrequencyTrace,
    kind: TraceKind,
) -> Result<(), IoError> {
    write_frequency_trace(create(path.as_ref())?, trace, kind)
}

const TIME_HEADER: [&str; 2] = ["t_s", "amp"];

pub fn read_time_trace<R: Read>(reader: R) -> Result<TimeTrace, IoError> {
    let (header, rows) = read_table(reader)?;
    if !header_is(&header, &TIME_HEADER) {
        return Err(IoError::Header {
            found: header,
            expected: TIME_HEADER.join(","),
        });
    }
    let (t, y) = rows.into_iter().map(|(_, r)| (r[0], r[1])).unzip();
    Ok(TimeTrace::new(t, y)?)
}

pub fn read_time_trace_path(path: impl AsRef<Path>) -> Result<TimeTrace, IoError> {
    read_time_trace(open(path.as_ref())?)
}

pub fn write_time_trace<W: Write>(writer: W, trace: &TimeTrace) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TIME_HEADER)?;
    for (t, y) in trace.times().iter().zip(trace.amplitude()) {
        w.write_record([t.to_string(), y.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_time_trace_path(path: impl AsRef<Path>, trace: &TimeTrace) -> Result<(), IoError> {
    write_time_trace(create(path.as_ref())?, trace)
}

/// `f_Hz,amp,branch`, rows in sweep order.
pub fn write_sweep<W: Write>(writer: W, sweep: &SweepResult) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["f_Hz", "amp", "branch"])?;
    for ((f, a), b) in sweep.frequencies.iter().zip(&sweep.amplitudes).zip(&sweep.branch_labels) {
        w.write_record([f.to_string(), a.to_string(), b.as_str().to_string()])?;
    }
    w.flush()?;
    Ok(())
}

const BACKBONE_HEADER: [&str; 2] = ["amp", "f_Hz"];

/// Backbone points as `amp,f_Hz`.
pub fn read_backbone<R: Read>(reader: R) -> Result<Vec<(f64, f64)>, IoError> {
    let (header, rows) = read_table(reader)?;
    if !header_is(&header, &BACKBONE_HEADER) {
        return Err(IoError::Header {
            found: header,
            expected: BACKBONE_HEADER.join(","),
        });
    }
    Ok(rows.into_iter().map(|(_, r)| (r[0], r[1])).collect())
}

pub fn read_backbone_path(path: impl AsRef<Path>) -> Result<Vec<(f64, f64)>, IoError> {
    read_backbone(open(path.as_ref())?)
}

pub fn write_backbone<W: Write>(writer: W, points: &[(f64, f64)]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(BACKBONE_HEADER)?;
    for (a, f) in points {
        w.write_record([a.to_string(), f.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `y_um,signal_norm` with positions given in metres.
pub fn write_scan<W: Write>(writer: W, scan: &[(f64, f64)]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["y_um", "signal_norm"])?;
    for (y, s) in scan {
        w.write_record([(y * 1e6).to_string(), s.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::duffing::{sweep, DuffingParams, SweepDirection};

    #[test]
    fn frequency_trace_round_trips() {
        let f = vec![1.0, 2.0, 3.5];
        let z = vec![Complex64::new(0.1, -0.2), Complex64::new(1e-9, 3.0), Complex64::new(-4.0, 0.0)];
        let trace = FrequencyTrace::new(f, z).unwrap();
        for kind in [TraceKind::Complex, TraceKind::Admittance] {
            let mut buf = Vec::new();
            write_frequency_trace(&mut buf, &trace, kind).unwrap();
            let (back, k) = read_frequency_trace(buf.as_slice()).unwrap();
            assert_eq!(k, kind);
            assert_eq!(back, trace);
        }
        let mut buf = Vec::new();
        write_frequency_trace(&mut buf, &trace, TraceKind::Magnitude).unwrap();
        let (back, k) = read_frequency_trace(buf.as_slice()).unwrap();
        assert_eq!(k, TraceKind::Magnitude);
        assert_eq!(back.magnitudes(), trace.magnitudes());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = "t_s,amp\n0,1\n1,abc\n";
        match read_time_trace(bad.as_bytes()) {
            Err(IoError::Format { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("amp"));
            }
            other => panic!("{other:?}"),
        }
        let short = "t_s,amp\n0,1\n1\n";
        assert!(matches!(read_time_trace(short.as_bytes()), Err(IoError::Format { line: 3, .. })));
        assert!(matches!(read_time_trace("time,amp\n0,1\n".as_bytes()), Err(IoError::Header { .. })));
        assert!(matches!(
            read_time_trace("t_s,amp\n1,1\n0,1\n".as_bytes()),
            Err(IoError::Quantity(_))
        ));
        assert!(matches!(read_time_trace_path("/nonexistent/x.csv"), Err(IoError::Open { .. })));
    }

    #[test]
    fn sweep_and_scan_layout() {
        let p = DuffingParams::new(1e6, 100.0, 0.0, 1.0).unwrap();
        let s = sweep(&p, 0.9e6, 1.1e6, 3, SweepDirection::Forward).unwrap();
        let mut buf = Vec::new();
        write_sweep(&mut buf, &s).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "f_Hz,amp,branch");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("900000,") && lines[1].ends_with(",upper"));
        assert!(!text.contains('\r'));

        let mut buf = Vec::new();
        write_scan(&mut buf, &[(-2e-5, 0.5), (0.0, 1.0)]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "y_um,signal_norm\n-20,0.5\n0,1\n");

        let mut buf = Vec::new();
        write_backbone(&mut buf, &[(0.1, 97.2e6)]).unwrap();
        assert_eq!(read_backbone(buf.as_slice()).unwrap(), vec![(0.1, 97.2e6)]);
    }
}
