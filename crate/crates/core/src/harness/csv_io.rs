//! CSV output for every record type, written atomically.

use std::io::Write;
use std::path::Path;

use csv::{ReaderBuilder, Terminator, WriterBuilder};

use crate::ddo::DdoRecord;
use crate::error::{ApdError, Result};
use crate::flow::FlowRecord;
use crate::solvers::IterationRecord;

pub const SOLVE_HEADER: [&str; 10] = [
    "k",
    "alpha",
    "theta",
    "gamma",
    "obj_gap",
    "feasibility",
    "lagrangian_gap",
    "lyapunov",
    "inner_iters",
    "wall_ns",
];
pub const FLOW_HEADER: [&str; 5] = ["t", "E", "feasibility", "theta", "gamma"];
pub const DDO_HEADER: [&str; 5] = ["k", "obj_gap", "consensus_residual", "inner_iters", "wall_ns"];
pub const ROBUSTNESS_HEADER: [&str; 6] = ["eps", "method", "system", "iterations", "converged", "relative_residual"];

/// 17 significant digits, enough to round-trip every double.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// One row of the robustness table.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessRow {
    pub eps: f64,
    pub method: String,
    /// `augmented` or `plain`.
    pub system: String,
    pub iterations: usize,
    pub converged: bool,
    pub relative_residual: f64,
}

/// Writes `header` and `rows` to a temporary file next to `path`, then renames it into place.
pub fn write_table<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = WriterBuilder::new()
            .terminator(Terminator::Any(b'\n'))
            .from_writer(tmp.as_file_mut());
        w.write_record(header).map_err(csv_error)?;
        for row in rows {
            w.write_record(&row).map_err(csv_error)?;
        }
        w.flush()?;
    }
    tmp.as_file_mut().flush()?;
    tmp.persist(path).map_err(|e| ApdError::Io(e.error))?;
    Ok(())
}

fn csv_error(e: csv::Error) -> ApdError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => ApdError::Io(io),
        other => ApdError::InvalidInput(format!("csv: {other:?}")),
    }
}

pub fn write_solve_csv(path: &Path, records: &[IterationRecord]) -> Result<()> {
    write_table(
        path,
        &SOLVE_HEADER,
        records.iter().map(|r| {
            vec![
                r.k.to_string(),
                fmt_real(r.alpha),
                fmt_real(r.theta),
                fmt_real(r.gamma),
                fmt_real(r.obj_gap),
                fmt_real(r.feasibility),
                fmt_real(r.lagrangian_gap),
                fmt_real(r.lyapunov),
                r.inner_iters.to_string(),
                r.wall_ns.to_string(),
            ]
        }),
    )
}

pub fn write_flow_csv(path: &Path, records: &[FlowRecord]) -> Result<()> {
    write_table(
        path,
        &FLOW_HEADER,
        records.iter().map(|r| {
            vec![
                fmt_real(r.t),
                fmt_real(r.lyapunov),
                fmt_real(r.feasibility),
                fmt_real(r.theta),
                fmt_real(r.gamma),
            ]
        }),
    )
}

pub fn write_ddo_csv(path: &Path, records: &[DdoRecord]) -> Result<()> {
    write_table(
        path,
        &DDO_HEADER,
        records.iter().map(|r| {
            vec![
                r.k.to_string(),
                fmt_real(r.obj_gap),
                fmt_real(r.consensus_residual),
                r.inner_iters.to_string(),
                r.wall_ns.to_string(),
            ]
        }),
    )
}

pub fn write_robustness_csv(path: &Path, rows: &[RobustnessRow]) -> Result<()> {
    write_table(
        path,
        &ROBUSTNESS_HEADER,
        rows.iter().map(|r| {
            vec![
                fmt_real(r.eps),
                r.method.clone(),
                r.system.clone(),
                r.iterations.to_string(),
                r.converged.to_string(),
                fmt_real(r.relative_residual),
            ]
        }),
    )
}

/// Reads a solver CSV back, checking the header.
pub fn read_solve_csv(path: &Path) -> Result<Vec<IterationRecord>> {
    let mut rdr = ReaderBuilder::new().from_path(path).map_err(csv_error)?;
    let header = rdr.headers().map_err(csv_error)?.clone();
    if header.iter().ne(SOLVE_HEADER.iter().copied()) {
        return Err(ApdError::Parse {
            position: 0,
            message: format!("unexpected header {:?}", header.iter().collect::<Vec<_>>()),
        });
    }
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_error)?;
        let bad = |field: usize| ApdError::Parse {
            position: line + 2,
            message: format!("bad value in column {}", SOLVE_HEADER[field]),
        };
        let real = |i: usize| rec.get(i).and_then(|s| s.parse::<f64>().ok()).ok_or_else(|| bad(i));
        let int = |i: usize| rec.get(i).and_then(|s| s.parse::<u64>().ok()).ok_or_else(|| bad(i));
        out.push(IterationRecord {
            k: int(0)? as usize,
            alpha: real(1)?,
            theta: real(2)?,
            gamma: real(3)?,
            obj_gap: real(4)?,
            feasibility: real(5)?,
            lagrangian_gap: real(6)?,
            lyapunov: real(7)?,
            inner_iters: int(8)? as usize,
            wall_ns: int(9)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(k: usize, x: f64) -> IterationRecord {
        IterationRecord {
            k,
            alpha: x,
            theta: x / 3.0,
            gamma: 1e-300,
            obj_gap: f64::NAN,
            feasibility: 0.1 + 0.2,
            lagrangian_gap: -0.0,
            lyapunov: f64::MIN_POSITIVE,
            inner_iters: k * 7,
            wall_ns: 0,
        }
    }

    #[test]
    fn empty_and_single_record_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        write_solve_csv(&p, &[]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text, format!("{}\n", SOLVE_HEADER.join(",")));
        write_solve_csv(&p, &[record(0, 0.0)]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(!text.contains('\r'));
    }

    #[test]
    fn values_round_trip_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.csv");
        let recs: Vec<_> = (0..5).map(|k| record(k, 1.0 / (k as f64 + 3.0))).collect();
        write_solve_csv(&p, &recs).unwrap();
        let back = read_solve_csv(&p).unwrap();
        for (a, b) in recs.iter().zip(&back) {
            assert_eq!(a.alpha.to_bits(), b.alpha.to_bits());
            assert_eq!(a.theta.to_bits(), b.theta.to_bits());
            assert_eq!(a.gamma.to_bits(), b.gamma.to_bits());
            assert!(b.obj_gap.is_nan());
            assert_eq!(a.feasibility.to_bits(), b.feasibility.to_bits());
            assert_eq!(a.lagrangian_gap.to_bits(), b.lagrangian_gap.to_bits());
            assert_eq!(a.lyapunov.to_bits(), b.lyapunov.to_bits());
            assert_eq!((a.k, a.inner_iters, a.wall_ns), (b.k, b.inner_iters, b.wall_ns));
        }
    }

    #[test]
    fn wrong_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        std::fs::write(&p, "k,alpha\n0,1\n").unwrap();
        assert!(matches!(read_solve_csv(&p), Err(ApdError::Parse { .. })));
    }
}
