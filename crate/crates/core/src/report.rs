//! Long-format per-path series and per-step aggregates as CSV or JSON.
//!
//! Row order is path-major, then `t`, so output bytes depend only on the data.

use std::io::Write;

use serde::Serialize;

use crate::dynamics::{AggregatePoint, TrajectoryRecord};
use crate::error::{Error, Result};

pub const PATH_COLUMNS: [&str; 5] = ["path", "t", "diameter", "disagreement_inf", "disagreement_l2"];
pub const AGGREGATE_COLUMNS: [&str; 5] = ["t", "mean_diameter", "p_exceed_eps", "max_diameter", "lp_mean"];

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PathRow {
    pub path: u64,
    pub t: usize,
    pub diameter: f64,
    pub disagreement_inf: f64,
    pub disagreement_l2: f64,
}

pub fn path_rows(records: &[TrajectoryRecord]) -> impl Iterator<Item = PathRow> + '_ {
    records.iter().flat_map(|r| {
        r.series.iter().map(move |p| PathRow {
            path: r.path_id,
            t: p.t,
            diameter: p.diameter,
            disagreement_inf: p.disagreement_inf,
            disagreement_l2: p.disagreement_l2,
        })
    })
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

fn write_csv<W: Write, T: Serialize>(out: W, rows: impl Iterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_paths_csv<W: Write>(out: W, records: &[TrajectoryRecord]) -> Result<()> {
    write_csv(out, path_rows(records))
}

pub fn write_aggregate_csv<W: Write>(out: W, rows: &[AggregatePoint]) -> Result<()> {
    write_csv(out, rows.iter())
}

pub fn write_paths_json<W: Write>(mut out: W, records: &[TrajectoryRecord]) -> Result<()> {
    let rows: Vec<PathRow> = path_rows(records).collect();
    serde_json::to_writer_pretty(&mut out, &rows).map_err(|e| Error::Io(e.into()))?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn write_aggregate_json<W: Write>(mut out: W, rows: &[AggregatePoint]) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, rows).map_err(|e| Error::Io(e.into()))?;
    out.write_all(b"\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{aggregate, simulate_paths};
    use crate::{Generator, MatrixDistribution, RngPolicy};

    #[test]
    fn headers_and_row_counts() {
        let d = MatrixDistribution::generator(Generator::PairwiseGossip, 3).unwrap();
        let recs = simulate_paths(&d, &[1.0, 0.0, 0.0], 4, 5, &RngPolicy::new(1)).unwrap();
        let mut buf = Vec::new();
        write_paths_csv(&mut buf, &recs).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), PATH_COLUMNS.join(","));
        assert_eq!(lines.count(), 4 * 6);

        let agg = aggregate(&recs, 1e-3, 1.0);
        let mut buf = Vec::new();
        write_aggregate_csv(&mut buf, &agg).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), AGGREGATE_COLUMNS.join(","));
        assert_eq!(lines.count(), 6);
        assert!(text.lines().nth(1).unwrap().starts_with("0,"));
    }
}
