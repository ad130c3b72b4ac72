//! Parameter sweeps over a base scenario.
//!
//! A sweep file is a scenario config with a few extra keys:
//!
//! ```text
//! sweep = pb_power_w
//! values = 1, 2, 4, 6, 8
//! schemes = qlearning, crdsa
//! csi_modes = fcsi, acsi
//! antenna_set = 4, 8
//! ```
//!
//! Every combination of swept value, scheme, CSI mode and antenna count is
//! simulated `runs` times under the base seed. Rows come back ordered by
//! value, then scheme, CSI mode and antenna count, whatever the execution order.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{key_values, ScenarioConfig, Scheme};
use crate::error::{Error, Result};
use crate::harvest::CsiMode;
use crate::report::SweepRow;
use crate::simulator::{aggregate, run_all, Aggregate};

/// Bundled sweep files, by name.
pub const PRESETS: &[(&str, &str)] = &[
    (
        "fig3_convergence",
        include_str!("../presets/fig3_convergence.conf"),
    ),
    ("fig4_power", include_str!("../presets/fig4_power.conf")),
    ("fig5_users", include_str!("../presets/fig5_users.conf")),
    (
        "fig6_charging",
        include_str!("../presets/fig6_charging.conf"),
    ),
    ("fig7_los", include_str!("../presets/fig7_los.conf")),
];

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    PbPowerW,
    Users,
    ChargingSlotMs,
    KappaDb,
    Antennas,
}

impl SweepParam {
    pub const ALL: [SweepParam; 5] = [
        SweepParam::PbPowerW,
        SweepParam::Users,
        SweepParam::ChargingSlotMs,
        SweepParam::KappaDb,
        SweepParam::Antennas,
    ];

    /// Config key driven by this parameter.
    pub fn key(self) -> &'static str {
        match self {
            SweepParam::PbPowerW => "pb_power_w",
            SweepParam::Users => "users",
            SweepParam::ChargingSlotMs => "charging_slot_ms",
            SweepParam::KappaDb => "kappa_db",
            SweepParam::Antennas => "antennas",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.key() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub csi_modes: Vec<CsiMode>,
    /// Antenna counts to cross with the sweep; empty keeps the base value.
    pub antenna_set: Vec<usize>,
    pub base: ScenarioConfig,
    pub output: Option<PathBuf>,
}

const SWEEP_KEYS: &[&str] = &[
    "sweep",
    "values",
    "schemes",
    "csi_modes",
    "antenna_set",
    "output",
];

fn list<T>(
    line: usize,
    key: &str,
    value: &str,
    parse: impl Fn(&str) -> Option<T>,
) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            parse(s).ok_or_else(|| Error::Config {
                line,
                key: key.to_string(),
                reason: format!("cannot parse list item `{s}`"),
            })
        })
        .collect()
}

impl SweepSpec {
    pub fn new(param: SweepParam, values: Vec<f64>, base: ScenarioConfig) -> Self {
        Self {
            param,
            values,
            schemes: vec![base.scheme],
            csi_modes: vec![base.csi_mode],
            antenna_set: Vec::new(),
            base,
            output: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut base_lines = String::new();
        let mut param = None;
        let mut values = None;
        let mut schemes = None;
        let mut csi_modes = None;
        let mut antenna_set = Vec::new();
        let mut output = None;
        let mut seen = HashSet::new();
        for (line, key, value) in key_values(text)? {
            if !SWEEP_KEYS.contains(&key.as_str()) {
                // keep line numbers aligned for config errors
                while base_lines.lines().count() + 1 < line {
                    base_lines.push('\n');
                }
                base_lines.push_str(&format!("{key} = {value}\n"));
                continue;
            }
            if !seen.insert(key.clone()) {
                return Err(Error::Config {
                    line,
                    key,
                    reason: "duplicate key".into(),
                });
            }
            match key.as_str() {
                "sweep" => {
                    param = Some(SweepParam::parse(&value).ok_or_else(|| Error::Config {
                        line,
                        key: key.clone(),
                        reason: format!("`{value}` is not a sweepable parameter"),
                    })?)
                }
                "values" => values = Some(list(line, &key, &value, |s| s.parse::<f64>().ok())?),
                "schemes" => schemes = Some(list(line, &key, &value, Scheme::parse)?),
                "csi_modes" => csi_modes = Some(list(line, &key, &value, CsiMode::parse)?),
                "antenna_set" => {
                    antenna_set = list(line, &key, &value, |s| s.parse::<usize>().ok())?
                }
                "output" => output = Some(PathBuf::from(value)),
                _ => unreachable!(),
            }
        }
        let base = ScenarioConfig::parse(&base_lines)?;
        let missing = |key: &str| Error::Config {
            line: 0,
            key: key.to_string(),
            reason: "required for a sweep".into(),
        };
        let spec = Self {
            param: param.ok_or_else(|| missing("sweep"))?,
            values: values.ok_or_else(|| missing("values"))?,
            schemes: schemes.unwrap_or_else(|| vec![base.scheme]),
            csi_modes: csi_modes.unwrap_or_else(|| vec![base.csi_mode]),
            antenna_set,
            base,
            output,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: &str| Error::Config {
            line: 0,
            key: key.to_string(),
            reason: reason.to_string(),
        };
        if self.values.is_empty() {
            return Err(bad("values", "must not be empty"));
        }
        if self.schemes.is_empty() {
            return Err(bad("schemes", "must not be empty"));
        }
        if self.csi_modes.is_empty() {
            return Err(bad("csi_modes", "must not be empty"));
        }
        if self.param == SweepParam::Antennas && !self.antenna_set.is_empty() {
            return Err(bad(
                "antenna_set",
                "cannot be combined with an antenna sweep",
            ));
        }
        for job in self.jobs() {
            self.config_for(&job)?;
        }
        Ok(())
    }

    fn jobs(&self) -> Vec<Job> {
        let antennas: Vec<Option<usize>> = if self.antenna_set.is_empty() {
            vec![None]
        } else {
            self.antenna_set.iter().copied().map(Some).collect()
        };
        let mut jobs = Vec::new();
        for &value in &self.values {
            for &scheme in &self.schemes {
                for &csi in &self.csi_modes {
                    for &m in &antennas {
                        jobs.push(Job {
                            value,
                            scheme,
                            csi,
                            antennas: m,
                        });
                    }
                }
            }
        }
        jobs
    }

    fn config_for(&self, job: &Job) -> Result<ScenarioConfig> {
        let mut cfg = self.base.clone();
        cfg.scheme = job.scheme;
        cfg.csi_mode = job.csi;
        if let Some(m) = job.antennas {
            cfg.antennas = m;
        }
        cfg.apply(self.param.key(), &job.value.to_string())
            .map_err(|reason| Error::Config {
                line: 0,
                key: self.param.key().to_string(),
                reason,
            })?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy)]
struct Job {
    value: f64,
    scheme: Scheme,
    csi: CsiMode,
    antennas: Option<usize>,
}

/// One simulated sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub row: SweepRow,
    pub aggregate: Aggregate,
}

/// Outcome of a sweep: completed points in order, and the first failure if any.
#[derive(Debug)]
pub struct SweepOutcome {
    pub points: Vec<SweepPoint>,
    pub error: Option<Error>,
}

impl SweepOutcome {
    pub fn rows(&self) -> Vec<SweepRow> {
        self.points.iter().map(|p| p.row.clone()).collect()
    }

    pub fn into_result(self) -> Result<Vec<SweepPoint>> {
        match self.error {
            Some(e) => Err(e),
            None => Ok(self.points),
        }
    }
}

/// Runs every point of `spec` on the current rayon pool.
pub fn run_sweep(spec: &SweepSpec) -> SweepOutcome {
    let jobs = spec.jobs();
    let results: Vec<Result<SweepPoint>> = jobs
        .par_iter()
        .map(|job| {
            let cfg = spec.config_for(job)?;
            let summaries = run_all::<f64>(&cfg)?;
            let agg = aggregate(&summaries)?;
            Ok(SweepPoint {
                row: SweepRow {
                    swept_param: spec.param.key().to_string(),
                    value: job.value,
                    scheme: cfg.scheme.as_str().to_string(),
                    csi_mode: cfg.csi_mode.as_str().to_string(),
                    antennas: cfg.antennas,
                    mean_success_per_frame: agg.mean_success.mean,
                    std: agg.mean_success.std,
                    runs: cfg.runs,
                    frames: cfg.frames,
                    seed: cfg.seed,
                },
                aggregate: agg,
            })
        })
        .collect();
    let mut points = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(p) => points.push(p),
            Err(e) => {
                return SweepOutcome {
                    points,
                    error: Some(e),
                }
            }
        }
    }
    SweepOutcome {
        points,
        error: None,
    }
}

/// Runs the sweep on a dedicated pool of `threads` workers.
pub fn run_sweep_parallel(spec: &SweepSpec, threads: usize) -> Result<SweepOutcome> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidRequest(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(|| run_sweep(spec)))
}
