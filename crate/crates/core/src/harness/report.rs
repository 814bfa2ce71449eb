use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::HarnessError;
use crate::distributions::MdpDistribution;
use crate::pce::{default_accuracy, mean_and_stderr};

/// Recognized CSV layouts, by header row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsvSchema {
    RegretTrace,
    BanditRuns,
    RatioTable,
    OmermLog,
}

impl CsvSchema {
    pub fn header(self) -> &'static [&'static str] {
        match self {
            Self::RegretTrace => &[
                "seed",
                "test_draw",
                "episode",
                "phase",
                "pair_index",
                "return",
                "inst_regret",
                "cum_regret",
            ],
            Self::BanditRuns => &["T", "seed", "algorithm", "pseudo_regret"],
            Self::RatioTable => &["T", "mean_informed", "mean_ucb", "ratio"],
            Self::OmermLog => &["iter_k", "mdp_index", "avg_optimistic_value", "episode_return"],
        }
    }

    pub fn detect(header: &[&str]) -> Option<Self> {
        [Self::RegretTrace, Self::BanditRuns, Self::RatioTable, Self::OmermLog]
            .into_iter()
            .find(|s| s.header() == header)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub source: String,
    pub group: String,
    pub x: u64,
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
}

/// Least-squares fit of `ln y = intercept + slope ln x`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeFit {
    pub source: String,
    pub group: String,
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityNote {
    pub k: u64,
    pub delta: f64,
    pub value: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub rows: Vec<SummaryRow>,
    pub fits: Vec<SlopeFit>,
    pub complexity: Vec<ComplexityNote>,
}

/// Slope and intercept on the points with positive coordinates; `None`
/// with fewer than two distinct `x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if logs.len() < 2 {
        return None;
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

fn schema_error(path: &Path, message: impl Into<String>) -> HarnessError {
    HarnessError::Schema {
        path: path.display().to_string(),
        message: message.into(),
    }
}

fn num<T: std::str::FromStr>(path: &Path, field: &str, line: usize) -> Result<T, HarnessError> {
    field
        .parse()
        .map_err(|_| schema_error(path, format!("line {line}: cannot parse {field:?}")))
}

/// Groups keyed `(group, x)`, each holding per-run values keyed by a run id
/// so that one run contributes one sample per point.
type Grouped = BTreeMap<(String, u64), BTreeMap<(u64, u64), f64>>;

fn read_file(path: &Path) -> Result<(CsvSchema, Grouped), HarnessError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| schema_error(path, e.to_string()))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| schema_error(path, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let schema = CsvSchema::detect(&refs)
        .ok_or_else(|| schema_error(path, format!("unrecognized header {}", header.join(","))))?;
    let mut grouped = Grouped::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| schema_error(path, e.to_string()))?;
        let f = |j: usize| rec.get(j).unwrap_or("");
        let (group, x, run, y) = match schema {
            CsvSchema::RegretTrace => (
                "cum_regret".to_string(),
                num::<u64>(path, f(2), line)?,
                (num::<u64>(path, f(0), line)?, num::<u64>(path, f(1), line)?),
                num::<f64>(path, f(7), line)?,
            ),
            CsvSchema::BanditRuns => (
                f(2).to_string(),
                num::<u64>(path, f(0), line)?,
                (num::<u64>(path, f(1), line)?, 0),
                num::<f64>(path, f(3), line)?,
            ),
            CsvSchema::RatioTable => (
                "ratio".to_string(),
                num::<u64>(path, f(0), line)?,
                (0, 0),
                num::<f64>(path, f(3), line)?,
            ),
            CsvSchema::OmermLog => (
                "episode_return".to_string(),
                num::<u64>(path, f(0), line)?,
                (num::<u64>(path, f(1), line)?, 0),
                num::<f64>(path, f(3), line)?,
            ),
        };
        grouped.entry((group, x)).or_default().insert(run, y);
    }
    Ok((schema, grouped))
}

/// Aggregates CSV outputs into mean and standard error per group and point,
/// with log-log slope fits. Regret traces also contribute their final mean
/// to a cross-file fit against `K`.
pub fn summarize(inputs: &[PathBuf]) -> Result<Report, HarnessError> {
    let mut report = Report::default();
    let mut finals: BTreeMap<u64, f64> = BTreeMap::new();
    for path in inputs {
        let source = path.display().to_string();
        let (schema, grouped) = read_file(path)?;
        let mut curves: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
        for ((group, x), runs) in grouped {
            let samples: Vec<Vec<f64>> = runs.values().map(|v| vec![*v]).collect();
            let (m, s) = mean_and_stderr(&samples);
            curves.entry(group.clone()).or_default().push((x as f64, m[0]));
            report.rows.push(SummaryRow {
                source: source.clone(),
                group,
                x,
                n: samples.len(),
                mean: m[0],
                stderr: s[0],
            });
        }
        if schema == CsvSchema::RatioTable {
            continue;
        }
        for (group, pts) in curves {
            if schema == CsvSchema::RegretTrace {
                if let Some(last) = pts.last() {
                    finals.insert(last.0 as u64, last.1);
                }
            }
            if let Some((slope, intercept)) = loglog_slope(&pts) {
                report.fits.push(SlopeFit {
                    source: source.clone(),
                    group,
                    slope,
                    intercept,
                    points: pts.len(),
                });
            }
        }
    }
    let pts: Vec<(f64, f64)> = finals.iter().map(|(k, v)| (*k as f64, *v)).collect();
    if let Some((slope, intercept)) = loglog_slope(&pts) {
        report.fits.push(SlopeFit {
            source: "*".into(),
            group: "final_regret_vs_K".into(),
            slope,
            intercept,
            points: pts.len(),
        });
    }
    Ok(report)
}

impl Report {
    /// `K` values seen as the last episode of regret traces or as bandit
    /// horizons.
    pub fn horizons(&self) -> Vec<u64> {
        let mut ks: Vec<u64> = Vec::new();
        let mut last: BTreeMap<&str, u64> = BTreeMap::new();
        for r in &self.rows {
            if r.group == "cum_regret" {
                let e = last.entry(&r.source).or_default();
                *e = (*e).max(r.x);
            } else if r.group != "episode_return" {
                ks.push(r.x);
            }
        }
        ks.extend(last.values());
        ks.sort_unstable();
        ks.dedup();
        ks
    }

    /// Adds `C(D)` at `delta = 1/sqrt(K)` for every horizon in the report.
    pub fn add_complexity(&mut self, dist: &MdpDistribution) {
        self.complexity = self
            .horizons()
            .into_iter()
            .filter(|k| *k >= 1)
            .map(|k| {
                let delta = default_accuracy(k);
                ComplexityNote {
                    k,
                    delta,
                    value: dist.complexity_measure(delta),
                }
            })
            .collect();
    }

    /// `source,group,x,n,mean,stderr`
    pub fn write_rows<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["source", "group", "x", "n", "mean", "stderr"])?;
        for r in &self.rows {
            w.write_record([
                r.source.clone(),
                r.group.clone(),
                r.x.to_string(),
                r.n.to_string(),
                r.mean.to_string(),
                r.stderr.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// `source,group,slope,intercept,points`
    pub fn write_fits<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["source", "group", "slope", "intercept", "points"])?;
        for f in &self.fits {
            w.write_record([
                f.source.clone(),
                f.group.clone(),
                f.slope.to_string(),
                f.intercept.to_string(),
                f.points.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.rows.iter().any(|r| r.group == "ratio") {
            writeln!(f, "# {}", super::run::RATIO_NOTE)?;
        }
        // Long traces are summarized by their last point.
        let mut last: BTreeMap<(&str, &str), &SummaryRow> = BTreeMap::new();
        let mut shown = Vec::new();
        for r in &self.rows {
            if r.group == "cum_regret" || r.group == "episode_return" {
                last.insert((&r.source, &r.group), r);
            } else {
                shown.push(r);
            }
        }
        shown.extend(last.into_values());
        writeln!(f, "{:<40} {:<20} {:>10} {:>6} {:>14} {:>12}", "source", "group", "x", "n", "mean", "stderr")?;
        for r in shown {
            writeln!(
                f,
                "{:<40} {:<20} {:>10} {:>6} {:>14.6} {:>12.6}",
                r.source, r.group, r.x, r.n, r.mean, r.stderr
            )?;
        }
        for fit in &self.fits {
            writeln!(
                f,
                "slope {:<40} {:<20} {:.4} over {} points",
                fit.source, fit.group, fit.slope, fit.points
            )?;
        }
        for c in &self.complexity {
            writeln!(f, "C(D) at delta = 1/sqrt({}) = {:.6}: {}", c.k, c.delta, c.value)?;
        }
        Ok(())
    }
}
