//! CSV and JSON output.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::RunSummary;

pub const CSV_HEADER: &str =
    "swept_param,value,scheme,csi_mode,antennas,mean_success_per_frame,std,runs,frames,seed";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub swept_param: String,
    pub value: f64,
    pub scheme: String,
    pub csi_mode: String,
    pub antennas: usize,
    pub mean_success_per_frame: f64,
    pub std: f64,
    pub runs: usize,
    pub frames: usize,
    pub seed: u64,
}

impl SweepRow {
    // floats use the shortest representation that parses back exactly
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.swept_param,
            self.value,
            self.scheme,
            self.csi_mode,
            self.antennas,
            self.mean_success_per_frame,
            self.std,
            self.runs,
            self.frames,
            self.seed
        )
    }

    pub fn from_csv_line(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.split(',').collect();
        let parse_err = |reason: String| Error::Parse {
            what: "csv row",
            reason,
        };
        if fields.len() != 10 {
            return Err(parse_err(format!(
                "expected 10 fields, found {}",
                fields.len()
            )));
        }
        fn num<T: std::str::FromStr>(s: &str, name: &str) -> std::result::Result<T, String> {
            s.parse().map_err(|_| format!("bad {name} `{s}`"))
        }
        let row = (|| -> std::result::Result<SweepRow, String> {
            Ok(SweepRow {
                swept_param: fields[0].to_string(),
                value: num(fields[1], "value")?,
                scheme: fields[2].to_string(),
                csi_mode: fields[3].to_string(),
                antennas: num(fields[4], "antennas")?,
                mean_success_per_frame: num(fields[5], "mean_success_per_frame")?,
                std: num(fields[6], "std")?,
                runs: num(fields[7], "runs")?,
                frames: num(fields[8], "frames")?,
                seed: num(fields[9], "seed")?,
            })
        })();
        row.map_err(parse_err)
    }
}

pub fn csv_string(rows: &[SweepRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv_line());
        out.push('\n');
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => {
            return Err(Error::Parse {
                what: "csv header",
                reason: format!("unexpected header {other:?}"),
            })
        }
    }
    lines
        .filter(|l| !l.is_empty())
        .map(SweepRow::from_csv_line)
        .collect()
}

pub fn write_csv(path: impl AsRef<Path>, rows: &[SweepRow]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(csv_string(rows).as_bytes())?;
    Ok(())
}

pub fn write_json<S: Serialize + ?Sized>(path: impl AsRef<Path>, value: &S) -> Result<()> {
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(f, value)?;
    Ok(())
}

/// Final Q-tables of every learner as `run,user,state,action,value` CSV.
pub fn qtables_csv(summaries: &[RunSummary]) -> String {
    let mut out = String::from("run,user,state,action,value\n");
    for s in summaries {
        for (user, table) in s.q_tables.iter().enumerate() {
            for e in table {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    s.run_index, user, e.state, e.action, e.value
                ));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> SweepRow {
        SweepRow {
            swept_param: "pb_power_w".into(),
            value: 2.0,
            scheme: "qlearning".into(),
            csi_mode: "fcsi".into(),
            antennas: 8,
            mean_success_per_frame: 0.1 + 0.2,
            std: 1.0 / 3.0,
            runs: 10,
            frames: 5000,
            seed: u64::MAX,
        }
    }

    #[test]
    fn header_and_line_endings() {
        let s = csv_string(&[row()]);
        assert!(s.starts_with(CSV_HEADER));
        assert!(!s.contains('\r'));
        assert!(s.ends_with('\n'));
        assert_eq!(s.lines().nth(1).unwrap(), "pb_power_w,2,qlearning,fcsi,8,0.30000000000000004,0.3333333333333333,10,5000,18446744073709551615");
    }

    #[test]
    fn round_trip_is_exact() {
        let rows = vec![
            row(),
            SweepRow {
                value: 0.1,
                ..row()
            },
        ];
        assert_eq!(parse_csv(&csv_string(&rows)).unwrap(), rows);
    }

    #[test]
    fn rejects_malformed() {
        assert!(parse_csv("a,b\n").is_err());
        assert!(parse_csv(&format!("{CSV_HEADER}\n1,2,3\n")).is_err());
        assert!(parse_csv(&format!("{CSV_HEADER}\nx,y,q,f,8,1,1,1,1,1\n")).is_err());
    }
}
