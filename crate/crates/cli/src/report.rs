//! CSV reports: one row per run and solver, followed by per-point means.

use std::io::Write;

use crate::error::CliResult;

pub const CSV_HEADER: [&str; 9] = [
    "experiment",
    "run",
    "snr_db",
    "solver",
    "epsilon",
    "iterations",
    "wall_ms",
    "seed",
    "status",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub experiment: String,
    /// Run index, or `None` for a mean row.
    pub run: Option<usize>,
    pub snr_db: f64,
    pub solver: String,
    pub epsilon: f64,
    pub iterations: f64,
    pub wall_ms: f64,
    pub seed: u64,
    /// `ok`, or a short failure description.
    pub status: String,
}

impl Row {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// 17 significant digits, enough to round-trip any double.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Appends one mean row per `(snr_db, solver)` group, in order of first
/// appearance. Failed runs enter the mean with their sentinel `ε`.
pub fn with_means(rows: Vec<Row>) -> Vec<Row> {
    let mut keys: Vec<(u64, String)> = Vec::new();
    for r in &rows {
        let k = (r.snr_db.to_bits(), r.solver.clone());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let mut means = Vec::with_capacity(keys.len());
    for (snr_bits, solver) in keys {
        let group: Vec<&Row> = rows
            .iter()
            .filter(|r| r.snr_db.to_bits() == snr_bits && r.solver == solver)
            .collect();
        let k = group.len() as f64;
        let failures = group.iter().filter(|r| !r.is_ok()).count();
        let first = group[0];
        means.push(Row {
            experiment: first.experiment.clone(),
            run: None,
            snr_db: first.snr_db,
            solver,
            epsilon: group.iter().map(|r| r.epsilon).sum::<f64>() / k,
            iterations: group.iter().map(|r| r.iterations).sum::<f64>() / k,
            wall_ms: group.iter().map(|r| r.wall_ms).sum::<f64>() / k,
            seed: first.seed,
            status: if failures == 0 {
                "ok".into()
            } else {
                format!("failures={failures}")
            },
        });
    }
    let mut out = rows;
    out.extend(means);
    out
}

/// Mean row for `solver` at `snr_db`, if present.
pub fn mean_of<'a>(rows: &'a [Row], snr_db: f64, solver: &str) -> Option<&'a Row> {
    rows.iter()
        .find(|r| r.run.is_none() && r.solver == solver && r.snr_db.to_bits() == snr_db.to_bits())
}

pub fn write_csv<W: Write>(out: W, rows: &[Row]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.experiment.clone(),
            r.run.map_or_else(|| "mean".to_string(), |i| i.to_string()),
            fmt_f64(r.snr_db),
            r.solver.clone(),
            fmt_f64(r.epsilon),
            fmt_f64(r.iterations),
            fmt_f64(r.wall_ms),
            r.seed.to_string(),
            r.status.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(run: usize, solver: &str, eps: f64, status: &str) -> Row {
        Row {
            experiment: "jbss".into(),
            run: Some(run),
            snr_db: 20.0,
            solver: solver.into(),
            epsilon: eps,
            iterations: 3.0,
            wall_ms: 1.5,
            seed: 7,
            status: status.into(),
        }
    }

    #[test]
    fn means_follow_the_rows() {
        let rows = with_means(vec![
            row(0, "a", 0.1, "ok"),
            row(0, "b", 1.0, "inapplicable"),
            row(1, "a", 0.3, "ok"),
        ]);
        let a = mean_of(&rows, 20.0, "a").unwrap();
        assert!((a.epsilon - 0.2).abs() < 1e-15);
        assert!(a.is_ok());
        assert_eq!(mean_of(&rows, 20.0, "b").unwrap().status, "failures=1");
    }

    #[test]
    fn csv_uses_seventeen_digits() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[row(0, "a", 0.1, "ok")]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let line = text.lines().nth(1).unwrap();
        assert!(line.contains("1.0000000000000001e-1"));
        let eps: f64 = line.split(',').nth(4).unwrap().parse().unwrap();
        assert_eq!(eps, 0.1);
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
    }
}
