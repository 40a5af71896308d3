//! CSV readers and writers for traces, reports and uncertainty data.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::force_angle::{TipoverWindow, TraceAnalysis, WrenchTrace};
use crate::geometry::Vec3;
use crate::uncertainty::{MeasuredRow, Provenance, UncertaintyTrace};

/// Numeric table read by header name.
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    index: HashMap<String, usize>,
}

impl Table {
    pub fn has(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = *self.index.get(name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    fn vec3_column(&self, names: [&str; 3]) -> Option<Vec<Vec3>> {
        let cols: Option<Vec<_>> = names.iter().map(|n| self.column(n)).collect();
        let cols = cols?;
        Some(
            (0..self.rows.len())
                .map(|k| Vec3::new(cols[0][k], cols[1][k], cols[2][k]))
                .collect(),
        )
    }
}

/// Reads a headed CSV of numbers, requiring the `required` columns.
pub fn read_table(path: &Path, required: &[&str]) -> Result<Table> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_table(file, path, required)
}

/// As [`read_table`] from any reader; `path` only labels errors.
pub fn parse_table<R: Read>(reader: R, path: &Path, required: &[&str]) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::csv(path, e))?
        .iter()
        .map(str::to_owned)
        .collect();
    let index: HashMap<_, _> = headers.iter().enumerate().map(|(i, h)| (h.clone(), i)).collect();
    if let Some(missing) = required.iter().find(|r| !index.contains_key(**r)) {
        return Err(Error::Data {
            path: path.into(),
            message: format!("missing column `{missing}`"),
        });
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let row: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let row = row.map_err(|e| Error::Data {
            path: path.into(),
            message: format!("row {}: {e}", line + 2),
        })?;
        rows.push(row);
    }
    Ok(Table { headers, rows, index })
}

fn data_err(path: &Path, e: Error) -> Error {
    match e {
        Error::Contract(message) | Error::Degenerate(message) => Error::Data {
            path: path.into(),
            message,
        },
        other => other,
    }
}

/// Writes a headed CSV; values use the shortest round-trip representation.
pub fn write_table(path: &Path, headers: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(headers).map_err(|e| Error::csv(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn fmt(v: f64) -> String {
    format!("{v}")
}

fn fmt_vec(row: &mut Vec<String>, v: &Vec3) {
    row.extend(v.iter().map(|c| fmt(*c)));
}

const TRACE_COLS: [&str; 7] = ["t", "fax", "fay", "faz", "tax", "tay", "taz"];
const GRAVITY_COLS: [&str; 3] = ["gx", "gy", "gz"];

pub fn read_wrench_trace(path: &Path) -> Result<WrenchTrace> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_wrench_trace(file, path)
}

pub fn parse_wrench_trace<R: Read>(reader: R, path: &Path) -> Result<WrenchTrace> {
    let t = parse_table(reader, path, &TRACE_COLS)?;
    let time = t.column("t").unwrap_or_default();
    let gravity = if GRAVITY_COLS.iter().all(|c| t.has(c)) {
        t.vec3_column(GRAVITY_COLS).unwrap_or_default()
    } else {
        vec![Vec3::zeros(); time.len()]
    };
    let trace = WrenchTrace {
        force: t.vec3_column(["fax", "fay", "faz"]).unwrap_or_default(),
        torque: t.vec3_column(["tax", "tay", "taz"]).unwrap_or_default(),
        gravity,
        time,
    };
    trace.validate().map_err(|e| data_err(path, e))?;
    Ok(trace)
}

pub fn write_wrench_trace(path: &Path, trace: &WrenchTrace) -> Result<()> {
    let with_g = trace.gravity.iter().any(|g| *g != Vec3::zeros());
    let mut headers = TRACE_COLS.to_vec();
    if with_g {
        headers.extend(GRAVITY_COLS);
    }
    let rows = (0..trace.len()).map(|k| {
        let mut row = vec![fmt(trace.time[k])];
        fmt_vec(&mut row, &trace.force[k]);
        fmt_vec(&mut row, &trace.torque[k]);
        if with_g {
            fmt_vec(&mut row, &trace.gravity[k]);
        }
        row
    });
    write_table(path, &headers, rows)
}

/// Per-sample stability report. Indeterminate samples leave empty fields;
/// `argmin_axis` is 1-based.
pub fn write_stability_report(path: &Path, analysis: &TraceAnalysis) -> Result<()> {
    let headers = ["t", "theta1", "theta2", "theta3", "alpha", "argmin_axis"];
    let rows = analysis.time.iter().zip(&analysis.reports).map(|(t, rep)| {
        let mut row = vec![fmt(*t)];
        match rep {
            Some(r) => {
                for i in 0..3 {
                    row.push(r.per_axis.get(i).map(|a| fmt(a.theta)).unwrap_or_default());
                }
                row.push(fmt(r.alpha));
                row.push((r.argmin_axis + 1).to_string());
            }
            None => row.extend(std::iter::repeat_n(String::new(), 5)),
        }
        row
    });
    write_table(path, &headers, rows)
}

pub fn write_windows(path: &Path, windows: &[TipoverWindow]) -> Result<()> {
    write_table(
        path,
        &["t_start", "t_end"],
        windows.iter().map(|w| vec![fmt(w.t_start), fmt(w.t_end)]),
    )
}

pub fn read_windows(path: &Path) -> Result<Vec<TipoverWindow>> {
    let t = read_table(path, &["t_start", "t_end"])?;
    let (s, e) = (
        t.column("t_start").unwrap_or_default(),
        t.column("t_end").unwrap_or_default(),
    );
    Ok(s.into_iter()
        .zip(e)
        .map(|(t_start, t_end)| TipoverWindow { t_start, t_end })
        .collect())
}

const UNC_COLS: [&str; 7] = ["t", "fux", "fuy", "fuz", "tux", "tuy", "tuz"];

pub fn read_uncertainty(path: &Path, provenance: Provenance) -> Result<UncertaintyTrace> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_uncertainty(file, path, provenance)
}

pub fn parse_uncertainty<R: Read>(reader: R, path: &Path, provenance: Provenance) -> Result<UncertaintyTrace> {
    let t = parse_table(reader, path, &UNC_COLS)?;
    UncertaintyTrace::new(
        t.column("t").unwrap_or_default(),
        t.vec3_column(["fux", "fuy", "fuz"]).unwrap_or_default(),
        t.vec3_column(["tux", "tuy", "tuz"]).unwrap_or_default(),
        provenance,
    )
    .map_err(|e| data_err(path, e))
}

pub fn write_uncertainty(path: &Path, trace: &UncertaintyTrace) -> Result<()> {
    let rows = (0..trace.len()).map(|k| {
        let mut row = vec![fmt(trace.time[k])];
        fmt_vec(&mut row, &trace.force[k]);
        fmt_vec(&mut row, &trace.torque[k]);
        row
    });
    write_table(path, &UNC_COLS, rows)
}

const MEASURED_COLS: [&str; 13] = [
    "t", "fmx", "fmy", "fmz", "tmx", "tmy", "tmz", "fex", "fey", "fez", "tex", "tey", "tez",
];

pub fn read_measured_input(path: &Path) -> Result<Vec<MeasuredRow>> {
    let t = read_table(path, &MEASURED_COLS)?;
    let col = |names| t.vec3_column(names).unwrap_or_default();
    let (fm, tm, fe, te) = (
        col(["fmx", "fmy", "fmz"]),
        col(["tmx", "tmy", "tmz"]),
        col(["fex", "fey", "fez"]),
        col(["tex", "tey", "tez"]),
    );
    Ok(t.column("t")
        .unwrap_or_default()
        .into_iter()
        .enumerate()
        .map(|(k, time)| MeasuredRow {
            t: time,
            f_meas: fm[k],
            tau_meas: tm[k],
            f_est: fe[k],
            tau_est: te[k],
        })
        .collect())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Data {
        path: path.into(),
        message: e.to_string(),
    })?;
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes())
        .and_then(|_| f.write_all(b"\n"))
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::force_angle::analyze_trace;
    use crate::geometry::WheelLayout;
    use crate::uncertainty::{synthesize, SynthesisSpec};

    #[test]
    fn wrench_trace_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("trace.csv");
        let trace = WrenchTrace {
            time: vec![0.0, 0.01, 0.02],
            force: vec![Vec3::new(0.1, -0.2, 15.0); 3],
            torque: vec![Vec3::new(0.01, 0.0, -0.3); 3],
            gravity: vec![Vec3::zeros(); 3],
        };
        write_wrench_trace(&p, &trace).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("t,fax,fay,faz,tax,tay,taz\n"));
        assert_eq!(read_wrench_trace(&p).unwrap(), trace);

        let mut with_g = trace.clone();
        with_g.gravity[1] = Vec3::new(0.0, 0.0, 39.24);
        write_wrench_trace(&p, &with_g).unwrap();
        assert_eq!(read_wrench_trace(&p).unwrap(), with_g);
    }

    #[test]
    fn uncertainty_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("unc.csv");
        let tr = synthesize(1.0, 0.01, &SynthesisSpec::reference(), 5).unwrap();
        write_uncertainty(&p, &tr).unwrap();
        assert_eq!(read_uncertainty(&p, Provenance::Synthetic).unwrap(), tr);
    }

    #[test]
    fn report_and_windows() {
        let dir = tempfile::tempdir().unwrap();
        let trace = WrenchTrace {
            time: vec![0.0, 0.01, 0.02],
            force: vec![
                Vec3::new(0.0, 0.0, 15.0),
                Vec3::new(20.0, 0.0, 15.0),
                Vec3::new(0.0, 0.0, 15.0),
            ],
            torque: vec![Vec3::zeros(); 3],
            gravity: vec![Vec3::zeros(); 3],
        };
        let a = analyze_trace(&trace, &WheelLayout::reference_three_wheel()).unwrap();
        let rp = dir.path().join("report.csv");
        write_stability_report(&rp, &a).unwrap();
        let t = read_table(&rp, &["t", "alpha", "argmin_axis"]).unwrap();
        assert_eq!(t.rows.len(), 3);
        let wp = dir.path().join("windows.csv");
        write_windows(&wp, &a.windows).unwrap();
        assert_eq!(read_windows(&wp).unwrap(), a.windows);
    }

    #[test]
    fn malformed_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "t,fax\n0,1\n").unwrap();
        assert!(matches!(read_wrench_trace(&p), Err(Error::Data { .. })));
        std::fs::write(&p, "t,fax,fay,faz,tax,tay,taz\n0,1,2,x,0,0,0\n").unwrap();
        assert!(matches!(read_wrench_trace(&p), Err(Error::Data { .. })));
        std::fs::write(&p, "t,fax,fay,faz,tax,tay,taz\n1,0,0,1,0,0,0\n0,0,0,1,0,0,0\n").unwrap();
        assert!(matches!(read_wrench_trace(&p), Err(Error::Data { .. })));
        assert!(matches!(
            read_wrench_trace(&dir.path().join("missing.csv")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn measured_input_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        std::fs::write(
            &p,
            "t,fmx,fmy,fmz,tmx,tmy,tmz,fex,fey,fez,tex,tey,tez\n0,0,0,10,0,0,0,0,0,0,0,0,0\n",
        )
        .unwrap();
        let rows = read_measured_input(&p).unwrap();
        assert_eq!(rows[0].f_meas, Vec3::new(0.0, 0.0, 10.0));
    }
}
