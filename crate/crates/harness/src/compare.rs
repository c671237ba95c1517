//! Side-by-side comparison of evaluation runs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::warn;

use crate::error::{HarnessError, Result};
use crate::metrics::RunSummary;

pub const SUMMARY_FILE: &str = "summary.json";
pub const COMPARE_CSV: &str = "compare.csv";
pub const DELTAS_CSV: &str = "compare_deltas.csv";
pub const COMPARE_MD: &str = "compare.md";

/// The results-table columns, in order.
pub const COLUMNS: [&str; 9] = [
    "approach",
    "testing_episodes",
    "saturation_rate",
    "collision_rate",
    "fuel_cost",
    "electricity_cost",
    "combined_cost",
    "avg_jerk",
    "merge_behind_rate",
];

pub const BASELINE_APPROACH: &str = "seq1";

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub runs: Vec<RunSummary>,
    pub sources: Vec<PathBuf>,
    /// Index of the run used as the percent-delta reference.
    pub baseline: usize,
    /// Relative change of combined cost against the baseline, in percent.
    pub cost_delta_pct: Vec<Option<f64>>,
    pub jerk_delta_pct: Vec<Option<f64>>,
    /// True when the runs disagree on the scenario they were produced under.
    pub mixed_configs: bool,
}

/// Percent change of `x` relative to `base`; undefined for a zero base
/// unless both are zero.
pub fn pct_delta(x: f64, base: f64) -> Option<f64> {
    if base != 0.0 {
        Some(100.0 * (x - base) / base.abs())
    } else if x == 0.0 {
        Some(0.0)
    } else {
        None
    }
}

impl Comparison {
    pub fn new(runs: Vec<RunSummary>, sources: Vec<PathBuf>) -> Result<Self> {
        if runs.len() < 2 {
            return Err(HarnessError::Usage(format!("compare needs at least 2 runs, got {}", runs.len())));
        }
        let baseline = runs.iter().position(|r| r.approach == BASELINE_APPROACH).unwrap_or(0);
        let base = &runs[baseline];
        let cost_delta_pct = runs.iter().map(|r| pct_delta(r.avg_combined_cost, base.avg_combined_cost)).collect();
        let jerk_delta_pct = runs.iter().map(|r| pct_delta(r.avg_jerk, base.avg_jerk)).collect();
        let mixed_configs = runs.iter().any(|r| r.scenario_hash != base.scenario_hash);
        if mixed_configs {
            warn!("runs were produced under different scenario configurations; deltas are not like-for-like");
        }
        Ok(Self { runs, sources, baseline, cost_delta_pct, jerk_delta_pct, mixed_configs })
    }

    pub fn load(dirs: &[PathBuf]) -> Result<Self> {
        let runs = dirs.iter().map(|d| RunSummary::read(&d.join(SUMMARY_FILE))).collect::<Result<Vec<_>>>()?;
        Self::new(runs, dirs.to_vec())
    }

    fn cells(r: &RunSummary) -> [String; 9] {
        [
            r.approach.clone(),
            r.n_episodes.to_string(),
            r.saturation_rate.to_string(),
            r.collision_rate.to_string(),
            r.avg_fuel_cost.to_string(),
            r.avg_electricity_cost.to_string(),
            r.avg_combined_cost.to_string(),
            r.avg_jerk.to_string(),
            r.merge_behind_rate.to_string(),
        ]
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::format(path, e))?;
        w.write_record(COLUMNS).map_err(|e| HarnessError::format(path, e))?;
        for r in &self.runs {
            w.write_record(Self::cells(r)).map_err(|e| HarnessError::format(path, e))?;
        }
        w.flush().map_err(|e| HarnessError::io(path, e))
    }

    pub fn write_deltas_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::format(path, e))?;
        w.write_record(["approach", "baseline", "combined_cost_delta_pct", "avg_jerk_delta_pct", "source"])
            .map_err(|e| HarnessError::format(path, e))?;
        let fmt = |d: Option<f64>| d.map_or_else(String::new, |x| x.to_string());
        let base = &self.runs[self.baseline].approach;
        for (i, r) in self.runs.iter().enumerate() {
            let source = self.sources.get(i).map(|p| p.display().to_string()).unwrap_or_default();
            let row = [r.approach.clone(), base.clone(), fmt(self.cost_delta_pct[i]), fmt(self.jerk_delta_pct[i]), source];
            w.write_record(row).map_err(|e| HarnessError::format(path, e))?;
        }
        w.flush().map_err(|e| HarnessError::io(path, e))
    }

    pub fn markdown(&self) -> String {
        let pct = |d: Option<f64>| match d {
            Some(x) => format!(" ({x:+.0}%)"),
            None => " (n/a)".to_string(),
        };
        let mut s = String::new();
        let _ = writeln!(
            s,
            "| Approach | # testing episodes | Saturation rate | Collision rate | Fuel cost ($) | Electricity cost ($) | Combined cost ($) | Average jerk (m/s^3) | Merge-behind rate |"
        );
        let _ = writeln!(s, "|---|---:|---:|---:|---:|---:|---:|---:|---:|");
        for (i, r) in self.runs.iter().enumerate() {
            let (cost, jerk) = if i == self.baseline {
                (String::new(), String::new())
            } else {
                (pct(self.cost_delta_pct[i]), pct(self.jerk_delta_pct[i]))
            };
            let _ = writeln!(
                s,
                "| {} | {} | {:.2}% | {:.2}% | {:.4} | {:.4} | {:.4}{} | {:.3}{} | {:.2}% |",
                r.approach,
                r.n_episodes,
                100.0 * r.saturation_rate,
                100.0 * r.collision_rate,
                r.avg_fuel_cost,
                r.avg_electricity_cost,
                r.avg_combined_cost,
                cost,
                r.avg_jerk,
                jerk,
                100.0 * r.merge_behind_rate,
            );
        }
        let _ = writeln!(s, "\nPercentages in parentheses are relative to `{}`.", self.runs[self.baseline].approach);
        if self.mixed_configs {
            let _ = writeln!(s, "\n**Warning:** these runs use different scenario configurations.");
        }
        s
    }

    /// Writes the plain table, the delta table and the Markdown rendering.
    pub fn write_all(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        self.write_csv(&dir.join(COMPARE_CSV))?;
        self.write_deltas_csv(&dir.join(DELTAS_CSV))?;
        let md = dir.join(COMPARE_MD);
        fs::write(&md, self.markdown()).map_err(|e| HarnessError::io(&md, e))
    }
}
