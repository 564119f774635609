use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const REPORT_SCHEMA: &str = "craft-test-report";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    Pullout,
    Repeatability,
    Holding,
}

/// One logged instant of a harness run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    /// Which model or configuration produced the sample.
    pub series: String,
    /// Applied load: force in N for pull-out, mass in kg for holding.
    pub load: f64,
    pub commanded: Vec<f64>,
    pub achieved: Vec<f64>,
    #[serde(with = "super::pullout::inf_vec")]
    pub currents_ma: Vec<f64>,
    pub failed: bool,
}

/// Logs plus summary scalars. The summary is a pure function of the kind,
/// the config snapshot and the samples, so a report can be checked by
/// recomputing it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub kind: TestKind,
    pub config: serde_json::Value,
    pub samples: Vec<Sample>,
    pub summary: BTreeMap<String, f64>,
}

/// One line of the serialized form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum ReportLine {
    Header {
        schema: String,
        kind: TestKind,
        config: serde_json::Value,
    },
    Sample(Sample),
    Summary {
        values: BTreeMap<String, f64>,
    },
}

impl TestReport {
    pub fn new(kind: TestKind, config: serde_json::Value, samples: Vec<Sample>) -> Self {
        let summary = summarize(kind, &config, &samples);
        TestReport {
            kind,
            config,
            samples,
            summary,
        }
    }

    pub fn get(&self, key: &str) -> f64 {
        *self
            .summary
            .get(key)
            .unwrap_or_else(|| panic!("report has no summary value {key:?}"))
    }

    /// True when recomputing the summary from the logs reproduces the stored
    /// values bit for bit.
    pub fn verify(&self) -> bool {
        let again = summarize(self.kind, &self.config, &self.samples);
        again.len() == self.summary.len()
            && again
                .iter()
                .zip(&self.summary)
                .all(|((ka, va), (kb, vb))| ka == kb && va.to_bits() == vb.to_bits())
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let header = ReportLine::Header {
            schema: REPORT_SCHEMA.into(),
            kind: self.kind,
            config: self.config.clone(),
        };
        writeln!(w, "{}", serde_json::to_string(&header)?)?;
        for s in &self.samples {
            writeln!(w, "{}", serde_json::to_string(&ReportLine::Sample(s.clone()))?)?;
        }
        let summary = ReportLine::Summary {
            values: self.summary.clone(),
        };
        writeln!(w, "{}", serde_json::to_string(&summary)?)?;
        Ok(())
    }

    pub fn read_from(r: impl BufRead) -> Result<TestReport> {
        let mut header = None;
        let mut samples = Vec::new();
        let mut summary = None;
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<ReportLine>(&line)? {
                ReportLine::Header { schema, kind, config } => {
                    if schema != REPORT_SCHEMA {
                        return Err(Error::Parse(format!("unknown report schema {schema:?}")));
                    }
                    header = Some((kind, config));
                }
                ReportLine::Sample(s) => samples.push(s),
                ReportLine::Summary { values } => summary = Some(values),
            }
        }
        let (kind, config) = header.ok_or_else(|| Error::Parse("report has no header".into()))?;
        let summary = summary.ok_or_else(|| Error::Parse("report has no summary".into()))?;
        Ok(TestReport {
            kind,
            config,
            samples,
            summary,
        })
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Mean absolute commanded-minus-achieved difference over a sample's joints.
pub(crate) fn tracking_error(s: &Sample) -> f64 {
    mean(s.commanded.iter().zip(&s.achieved).map(|(c, a)| (c - a).abs()))
}

fn max_deviation(s: &Sample) -> f64 {
    s.commanded
        .iter()
        .zip(&s.achieved)
        .map(|(c, a)| (c - a).abs())
        .fold(0.0, f64::max)
}

fn summarize(kind: TestKind, config: &serde_json::Value, samples: &[Sample]) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    match kind {
        TestKind::Pullout => {
            // the ramp of each series ends at its first failing sample
            let mut series: Vec<&str> = samples.iter().map(|s| s.series.as_str()).collect();
            series.dedup();
            for name in series {
                let run: Vec<&Sample> = samples.iter().filter(|s| s.series == name).collect();
                let held = run.iter().take_while(|s| !s.failed);
                let force = held.clone().map(|s| s.load).fold(0.0, f64::max);
                let deflection = held.map(|s| max_deviation(s)).fold(0.0, f64::max);
                let failed = run.iter().any(|s| s.failed);
                out.insert(format!("{name}.pullout_force_n"), force);
                out.insert(format!("{name}.max_deflection_rad"), deflection);
                out.insert(format!("{name}.failed"), failed as u8 as f64);
            }
        }
        TestKind::Repeatability => {
            let errs: Vec<f64> = samples.iter().map(tracking_error).collect();
            let half = errs.len() / 2;
            out.insert("mean_error_rad".into(), mean(errs.iter().copied()));
            out.insert("max_error_rad".into(), errs.iter().copied().fold(0.0, f64::max));
            out.insert("first_half_mean_rad".into(), mean(errs[..half].iter().copied()));
            out.insert("second_half_mean_rad".into(), mean(errs[half..].iter().copied()));
            out.insert("samples".into(), errs.len() as f64);
        }
        TestKind::Holding => {
            let limit = config
                .get("motor")
                .and_then(|m| m.get("current_limit_ma"))
                .and_then(|v| v.as_f64())
                .unwrap_or(f64::INFINITY);
            let mut series: Vec<&str> = samples.iter().map(|s| s.series.as_str()).collect();
            series.dedup();
            for name in series {
                let run: Vec<&Sample> = samples.iter().filter(|s| s.series == name).collect();
                let totals: Vec<f64> = run
                    .iter()
                    .map(|s| s.currents_ma.iter().map(|c| c.abs()).sum())
                    .collect();
                let peak_motor = run
                    .iter()
                    .flat_map(|s| s.currents_ma.iter().map(|c| c.abs()))
                    .fold(0.0, f64::max);
                out.insert(format!("{name}.mean_total_current_ma"), mean(totals.iter().copied()));
                let first = totals.first().copied().unwrap_or(0.0);
                let last = totals.last().copied().unwrap_or(0.0);
                // relative change over the last tenth of the run
                let tail = totals.get(totals.len() * 9 / 10).copied().unwrap_or(last);
                out.insert(format!("{name}.first_total_current_ma"), first);
                out.insert(format!("{name}.final_total_current_ma"), last);
                out.insert(
                    format!("{name}.monotone"),
                    totals.windows(2).all(|w| w[1] >= w[0] - 1e-9 * w[0].abs()) as u8 as f64,
                );
                out.insert(
                    format!("{name}.plateau_slope"),
                    if last > 0.0 { (last - tail).abs() / last } else { 0.0 },
                );
                out.insert(format!("{name}.peak_motor_current_ma"), peak_motor);
                out.insert(format!("{name}.at_clamp"), (peak_motor >= limit) as u8 as f64);
                out.insert(format!("{name}.hold_failed"), run.iter().any(|s| s.failed) as u8 as f64);
                out.insert(
                    format!("{name}.max_sag_rad"),
                    run.iter().map(|s| max_deviation(s)).fold(0.0, f64::max),
                );
            }
            if let (Some(t), Some(d)) = (
                out.get("tendon.mean_total_current_ma").copied(),
                out.get("direct.mean_total_current_ma").copied(),
            ) {
                out.insert("current_ratio".into(), if d > 0.0 { t / d } else { 0.0 });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(t: f64, load: f64, c: f64, a: f64, failed: bool) -> Sample {
        Sample {
            t,
            series: "tendon".into(),
            load,
            commanded: vec![c, c],
            achieved: vec![a, c],
            currents_ma: vec![1.0 / 3.0, -2.0],
            failed,
        }
    }

    #[test]
    fn pullout_summary_stops_at_first_failure() {
        let samples = vec![
            sample(0.0, 0.0, 1.0, 1.0, false),
            sample(1.0, 0.1, 1.0, 0.9, false),
            sample(2.0, 0.2, 1.0, 0.5, true),
            sample(3.0, 0.3, 1.0, 1.0, false),
        ];
        let r = TestReport::new(TestKind::Pullout, serde_json::json!({}), samples);
        assert_eq!(r.get("tendon.pullout_force_n"), 0.1);
        assert!((r.get("tendon.max_deflection_rad") - 0.1).abs() < 1e-15);
        assert_eq!(r.get("tendon.failed"), 1.0);
    }

    #[test]
    fn serialized_report_still_verifies() {
        let samples: Vec<Sample> = (0..50)
            .map(|k| sample(k as f64 * 0.1, 0.0, (k as f64).sin(), (k as f64).sin() + 1e-3 / 7.0, false))
            .collect();
        let r = TestReport::new(TestKind::Repeatability, serde_json::json!({"seed": 3}), samples);
        assert!(r.verify());
        let mut buf = Vec::new();
        r.write_to(&mut buf).unwrap();
        let back = TestReport::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, r);
        assert!(back.verify());
    }

    #[test]
    fn infinite_currents_survive_serialization() {
        let mut s = sample(0.0, 1.0, 1.0, 0.5, true);
        s.currents_ma = vec![f64::INFINITY, 2.0, f64::NEG_INFINITY];
        let r = TestReport::new(TestKind::Pullout, serde_json::json!({}), vec![s]);
        let mut buf = Vec::new();
        r.write_to(&mut buf).unwrap();
        assert_eq!(TestReport::read_from(buf.as_slice()).unwrap(), r);
    }

    #[test]
    fn tampering_is_detected() {
        let samples = vec![sample(0.0, 1.0, 1.0, 0.9, false)];
        let mut r = TestReport::new(TestKind::Holding, serde_json::json!({}), samples);
        assert!(r.verify());
        r.samples[0].currents_ma[0] += 1e-12;
        assert!(!r.verify());
    }
}
