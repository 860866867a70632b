//! Study reports: per-step summaries, terminal samples and verdicts.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::stats::{quantile_sorted, sorted, Welford};

/// One pass/fail decision. Non-gating verdicts are informational and do
/// not affect [`StudyReport::passed`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub statistic: f64,
    /// One of `<`, `<=`, `>`, `>=`.
    pub comparison: String,
    pub threshold: f64,
    pub sample_size: usize,
    pub gating: bool,
    pub detail: String,
}

impl Verdict {
    pub fn check(name: impl Into<String>, statistic: f64, comparison: &str, threshold: f64, sample_size: usize) -> Self {
        let passed = match comparison {
            "<" => statistic < threshold,
            "<=" => statistic <= threshold,
            ">" => statistic > threshold,
            ">=" => statistic >= threshold,
            _ => panic!("unknown comparison {comparison}"),
        };
        Verdict {
            name: name.into(),
            passed,
            statistic,
            comparison: comparison.to_string(),
            threshold,
            sample_size,
            gating: true,
            detail: String::new(),
        }
    }

    pub fn gating(mut self, gating: bool) -> Self {
        self.gating = gating;
        self
    }

    pub fn detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

/// Summary of one quantity at one step over trajectories.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub n: usize,
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub se: f64,
    pub min: f64,
    pub q05: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q95: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(n: usize, values: &[f64]) -> Self {
        let w = Welford::from_slice(values);
        let s = sorted(values);
        let q = |p| if s.is_empty() { f64::NAN } else { quantile_sorted(&s, p) };
        Summary {
            n,
            count: values.len(),
            mean: w.mean,
            variance: w.variance(),
            se: w.se(),
            min: s.first().copied().unwrap_or(f64::NAN),
            q05: q(0.05),
            q25: q(0.25),
            median: q(0.5),
            q75: q(0.75),
            q95: q(0.95),
            max: s.last().copied().unwrap_or(f64::NAN),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub below: u64,
    pub above: u64,
}

impl Histogram {
    /// `bins` equal-width bins on `[lo, hi)`.
    pub fn new(values: &[f64], lo: f64, hi: f64, bins: usize) -> Self {
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins).map(|i| lo + width * i as f64).collect();
        let mut counts = vec![0; bins];
        let (mut below, mut above) = (0, 0);
        for &v in values {
            if v < lo {
                below += 1;
            } else if v >= hi {
                above += 1;
            } else {
                counts[(((v - lo) / width) as usize).min(bins - 1)] += 1;
            }
        }
        Histogram { edges, counts, below, above }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StudyReport {
    pub study: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub trajectories: usize,
    pub truncated: usize,
    pub horizon: usize,
    pub curves: BTreeMap<String, Vec<Summary>>,
    pub terminal: BTreeMap<String, Vec<f64>>,
    pub histograms: BTreeMap<String, Histogram>,
    pub scalars: BTreeMap<String, f64>,
    pub flags: BTreeMap<String, String>,
    pub notes: Vec<String>,
    pub verdicts: Vec<Verdict>,
}

impl StudyReport {
    pub fn new(study: &str, seed: u64, horizon: usize) -> Self {
        StudyReport {
            study: study.to_string(),
            seed,
            config: serde_json::Value::Null,
            trajectories: 0,
            truncated: 0,
            horizon,
            curves: BTreeMap::new(),
            terminal: BTreeMap::new(),
            histograms: BTreeMap::new(),
            scalars: BTreeMap::new(),
            flags: BTreeMap::new(),
            notes: Vec::new(),
            verdicts: Vec::new(),
        }
    }

    /// Every gating verdict passed.
    pub fn passed(&self) -> bool {
        self.verdicts.iter().filter(|v| v.gating).all(|v| v.passed)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn push(&mut self, v: Verdict) {
        self.verdicts.push(v);
    }

    pub fn scalar(&mut self, key: &str, value: f64) {
        self.scalars.insert(key.to_string(), value);
    }

    pub fn flag(&mut self, key: &str, value: impl Into<String>) {
        self.flags.insert(key.to_string(), value.into());
    }

    /// Per-step summaries of `values[n]` for `n = 0..`.
    pub fn curve(&mut self, key: &str, per_step: &[Vec<f64>]) {
        self.curves
            .insert(key.to_string(), per_step.iter().enumerate().map(|(n, v)| Summary::of(n, v)).collect());
    }

    pub fn to_json(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let serde_json::Value::Object(map) = &mut v {
            map.insert("passed".into(), serde_json::Value::Bool(self.passed()));
        }
        let mut s = serde_json::to_string_pretty(&v)?;
        s.push('\n');
        Ok(s)
    }

    /// Rows `curve, n, count, mean, variance, se, min, q05, q25, median,
    /// q75, q95, max`.
    pub fn write_curves_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record([
            "curve", "n", "count", "mean", "variance", "se", "min", "q05", "q25", "median", "q75", "q95", "max",
        ])?;
        for (name, rows) in &self.curves {
            for s in rows {
                let mut rec = vec![name.clone(), s.n.to_string(), s.count.to_string()];
                rec.extend(
                    [s.mean, s.variance, s.se, s.min, s.q05, s.q25, s.median, s.q75, s.q95, s.max]
                        .iter()
                        .map(|v| v.to_string()),
                );
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Rows `verdict, passed, statistic, comparison, threshold,
    /// sample_size, gating`.
    pub fn write_verdicts_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["verdict", "passed", "statistic", "comparison", "threshold", "sample_size", "gating"])?;
        for v in &self.verdicts {
            w.write_record([
                v.name.clone(),
                v.passed.to_string(),
                v.statistic.to_string(),
                v.comparison.clone(),
                v.threshold.to_string(),
                v.sample_size.to_string(),
                v.gating.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
