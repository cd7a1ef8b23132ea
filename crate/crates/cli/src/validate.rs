use std::collections::BTreeSet;
use std::fmt;

use newsflow_core::stats::{Direction, TestReport, CORRELATION_PAIRS, GRANGER_DIRECTIONS};
use newsflow_core::series::SeriesKind;
use newsflow_core::synth::{self, GroundTruth};
use newsflow_core::{Error, Result};
use serde::Serialize;

use crate::config::RunConfig;
use crate::prepare::{IngestSummary, SUMMARY_FILE};

pub const WS_R: Direction = Direction {
    cause: SeriesKind::WS,
    effect: SeriesKind::R,
};
pub const R_WS: Direction = Direction {
    cause: SeriesKind::R,
    effect: SeriesKind::WS,
};
pub const S_R: Direction = Direction {
    cause: SeriesKind::S,
    effect: SeriesKind::R,
};

/// Bounds for a run with planted causality.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PowerThresholds {
    /// Minimum share of planted companies where WS->R is detected.
    pub power: f64,
    /// Maximum share of other companies where WS->R is detected.
    pub false_positive: f64,
    /// Minimum share of planted companies where WS->R survives correction.
    pub power_corrected: f64,
    /// Maximum share of companies with a corrected S->R rejection.
    pub spurious_corrected: f64,
}

impl Default for PowerThresholds {
    fn default() -> Self {
        Self {
            power: 0.8,
            false_positive: 0.1,
            power_corrected: 0.8,
            spurious_corrected: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: String,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Validation {
    pub planted: usize,
    pub companies: usize,
    pub checks: Vec<Check>,
}

impl Validation {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

impl fmt::Display for Validation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} companies, {} with planted causality", self.companies, self.planted)?;
        for c in &self.checks {
            writeln!(
                f,
                "{} {:<34} {:>8.4}  {}",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.bound
            )?;
        }
        write!(f, "{}", if self.passed() { "calibration ok" } else { "calibration FAILED" })
    }
}

fn check(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Check {
    Check {
        name: name.into(),
        value,
        bound: format!("[{lo:.4}, {hi:.4}]"),
        pass: value >= lo && value <= hi,
    }
}

/// `level ± 2σ` with σ the binomial standard deviation of a rate over `n`.
pub fn null_band(level: f64, n: usize) -> (f64, f64) {
    let sd = (level * (1.0 - level) / n as f64).sqrt();
    (level - 2.0 * sd, level + 2.0 * sd)
}

/// Rejects a ground truth that does not describe the ingested files.
pub fn check_inputs(truth: &GroundTruth, summary: &IngestSummary) -> Result<()> {
    for (role, file) in [
        ("market", synth::MARKET_FILE),
        ("clicks", synth::CLICKS_FILE),
        ("news", synth::NEWS_FILE),
        ("calendar", synth::CALENDAR_FILE),
    ] {
        let planted = truth.files.get(file);
        let seen = summary.inputs.get(role);
        if planted.is_none() || planted != seen {
            return Err(Error::Mismatch(format!(
                "ground truth does not describe the ingested {role} file ({file} digest differs)"
            )));
        }
    }
    Ok(())
}

fn rate(flags: impl Iterator<Item = bool>) -> (f64, usize) {
    let (mut k, mut n) = (0, 0);
    for f in flags {
        k += f as usize;
        n += 1;
    }
    (if n > 0 { k as f64 / n as f64 } else { 0.0 }, n)
}

/// Null runs: every test's rejection rate inside the binomial band.
/// Planted runs: WS->R power and specificity, R->WS near the level,
/// corrected rejections a subset of raw ones, the planted signal surviving
/// correction and S->R not.
pub fn validate_report(truth: &GroundTruth, report: &TestReport, thresholds: &PowerThresholds) -> Result<Validation> {
    let level = report.config.level;
    let known: BTreeSet<&str> = truth.companies.iter().map(|c| c.ticker.as_str()).collect();
    for c in &report.companies {
        if !known.contains(c.company.as_str()) {
            return Err(Error::Mismatch(format!("{} is not in the ground truth", c.company)));
        }
    }
    let causal = truth.causal_tickers();
    let mut checks = Vec::new();

    if causal.is_empty() {
        for pair in CORRELATION_PAIRS {
            let (r, n) = rate(report.companies.iter().filter_map(|c| {
                c.correlation(pair).filter(|e| e.result.is_some()).map(|e| e.reject)
            }));
            let (lo, hi) = null_band(level, n.max(1));
            checks.push(check(format!("null {pair}"), r, lo, hi));
        }
        for d in GRANGER_DIRECTIONS {
            let (r, n) = rate(
                report
                    .companies
                    .iter()
                    .filter_map(|c| c.granger(d).filter(|e| e.result.is_some()).map(|e| e.reject)),
            );
            let (lo, hi) = null_band(level, n.max(1));
            checks.push(check(format!("null {d}"), r, lo, hi));
        }
    } else {
        let flags = |d: Direction, planted: bool, bonf: bool| {
            rate(report.companies.iter().filter(|c| causal.contains(&c.company) == planted).filter_map(|c| {
                c.granger(d)
                    .filter(|e| e.result.is_some())
                    .map(|e| if bonf { e.reject_bonferroni } else { e.reject })
            }))
        };
        let (power, _) = flags(WS_R, true, false);
        checks.push(check("power WS->R (planted)", power, thresholds.power, 1.0));
        let (fp, _) = flags(WS_R, false, false);
        checks.push(check("false positives WS->R", fp, 0.0, thresholds.false_positive));

        let (r, n) = rate(
            report
                .companies
                .iter()
                .filter_map(|c| c.granger(R_WS).filter(|e| e.result.is_some()).map(|e| e.reject)),
        );
        checks.push(check("reverse R->WS (all)", r, 0.0, null_band(level, n.max(1)).1));

        let violations = report
            .companies
            .iter()
            .flat_map(|c| {
                c.granger
                    .iter()
                    .map(|e| (e.reject, e.reject_bonferroni))
                    .chain(c.correlations.iter().map(|e| (e.reject, e.reject_bonferroni)))
            })
            .filter(|(raw, corrected)| *corrected && !*raw)
            .count();
        checks.push(check("corrected not subset of raw", violations as f64, 0.0, 0.0));

        let (corrected, _) = flags(WS_R, true, true);
        checks.push(check("power WS->R corrected (planted)", corrected, thresholds.power_corrected, 1.0));
        let (s_r, _) = rate(
            report
                .companies
                .iter()
                .filter_map(|c| c.granger(S_R).filter(|e| e.result.is_some()).map(|e| e.reject_bonferroni)),
        );
        checks.push(check("S->R after correction", s_r, 0.0, thresholds.spurious_corrected));
    }
    Ok(Validation {
        planted: causal.len(),
        companies: report.companies.len(),
        checks,
    })
}

/// Compares the analysis under `cfg.out` with the ground truth.
pub fn cmd_validate(cfg: &RunConfig, thresholds: &PowerThresholds) -> Result<Validation> {
    let truth_path = cfg
        .ground_truth
        .as_ref()
        .ok_or_else(|| Error::Config("no ground_truth configured".into()))?;
    let truth = GroundTruth::from_file(truth_path)?;
    let summary_path = cfg.cache_dir().join(SUMMARY_FILE);
    let text = std::fs::read_to_string(&summary_path).map_err(crate::output::io_err(&summary_path))?;
    let summary: IngestSummary = serde_json::from_str(&text)?;
    check_inputs(&truth, &summary)?;

    let scale = truth.config.coupling_scale;
    let path = cfg.out.join(format!("scale_{}", scale.label())).join("report.json");
    let text = std::fs::read_to_string(&path)
        .map_err(|_| Error::Config(format!("no report at {}; analyze at scale {scale} first", path.display())))?;
    let report: TestReport = serde_json::from_str(&text)?;
    validate_report(&truth, &report, thresholds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_for_hundred_companies() {
        let (lo, hi) = null_band(0.05, 100);
        // 0.05 ± 2·sqrt(0.0475/100)
        assert!((lo - 0.0064110106).abs() < 1e-9);
        assert!((hi - 0.0935889894).abs() < 1e-9);
    }
}
