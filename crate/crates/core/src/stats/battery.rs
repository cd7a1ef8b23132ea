//! The per-company test battery and its report.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::granger::{granger, select_lag, GrangerResult};
use super::spearman::{correlate, CorrelationResult, Significance};
use super::bonferroni;
use crate::calendar::TimeScale;
use crate::rng::substream;
use crate::series::{CompanyPanel, SeriesKind};

/// Unordered pair for synchronous correlation, printed `X~Y`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Pair(pub SeriesKind, pub SeriesKind);

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}~{}", self.0, self.1)
    }
}

/// Ordered pair `cause->effect`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Direction {
    pub cause: SeriesKind,
    pub effect: SeriesKind,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.cause, self.effect)
    }
}

const fn dir(cause: SeriesKind, effect: SeriesKind) -> Direction {
    Direction { cause, effect }
}

use SeriesKind::{Sigma, C, R, S, V, WS};

pub const CORRELATION_PAIRS: [Pair; 3] = [Pair(C, V), Pair(C, Sigma), Pair(WS, R)];

pub const GRANGER_DIRECTIONS: [Direction; 8] = [
    dir(S, R),
    dir(R, S),
    dir(R, WS),
    dir(WS, R),
    dir(V, C),
    dir(C, V),
    dir(C, Sigma),
    dir(Sigma, C),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatteryConfig {
    pub level: f64,
    pub n_perm: usize,
    pub max_lag: usize,
    /// Overrides BIC lag selection when set.
    pub fixed_lag: Option<usize>,
    pub seed: u64,
    pub significance: Significance,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        Self {
            level: 0.05,
            n_perm: 1000,
            max_lag: 5,
            fixed_lag: None,
            seed: 0,
            significance: Significance::Permutation,
        }
    }
}

/// One test on one company.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Entry<T> {
    pub test: String,
    pub result: Option<T>,
    pub error: Option<String>,
    pub reject: bool,
    pub reject_bonferroni: bool,
}

impl<T> Entry<T> {
    fn new(test: String, outcome: crate::Result<T>) -> Self {
        let (result, error) = match outcome {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        };
        Self {
            test,
            result,
            error,
            reject: false,
            reject_bonferroni: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompanyReport {
    pub company: String,
    pub n_bins: usize,
    pub correlations: Vec<Entry<CorrelationResult>>,
    pub granger: Vec<Entry<GrangerResult>>,
}

impl CompanyReport {
    pub fn correlation(&self, pair: Pair) -> Option<&Entry<CorrelationResult>> {
        let label = pair.to_string();
        self.correlations.iter().find(|e| e.test == label)
    }

    pub fn granger(&self, d: Direction) -> Option<&Entry<GrangerResult>> {
        let label = d.to_string();
        self.granger.iter().find(|e| e.test == label)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestKind {
    Correlation,
    Granger,
}

/// Cross-company summary of one test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub test: String,
    pub kind: TestKind,
    /// Companies with a valid result; the Bonferroni `N_t`.
    pub n_valid: usize,
    pub n_failed: usize,
    pub raw_rejections: usize,
    pub raw_percent: f64,
    pub bonferroni_threshold: f64,
    pub bonferroni_rejections: usize,
    pub bonferroni_percent: f64,
    /// Mean rho over valid companies (correlations only).
    pub mean_rho: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub scale: TimeScale,
    pub config: BatteryConfig,
    pub companies: Vec<CompanyReport>,
    pub summary: Vec<SummaryRow>,
}

fn test_company(panel: &CompanyPanel, config: &BatteryConfig) -> CompanyReport {
    let correlations = CORRELATION_PAIRS
        .iter()
        .map(|pair| {
            let label = pair.to_string();
            let mut rng = substream(config.seed, &format!("{}/{label}", panel.company));
            let outcome = correlate(
                &label,
                panel.series(pair.0),
                panel.series(pair.1),
                config.significance,
                config.n_perm,
                &mut rng,
            );
            Entry::new(label, outcome)
        })
        .collect();
    let granger = GRANGER_DIRECTIONS
        .iter()
        .map(|d| {
            let (x, y) = (panel.series(d.cause), panel.series(d.effect));
            let lag = config.fixed_lag.unwrap_or_else(|| select_lag(x, y, config.max_lag));
            let outcome = granger(x, y, lag).map(|mut g| {
                g.direction = d.to_string();
                g
            });
            Entry::new(d.to_string(), outcome)
        })
        .collect();
    CompanyReport {
        company: panel.company.clone(),
        n_bins: panel.n_bins(),
        correlations,
        granger,
    }
}

fn flag<T>(
    companies: &mut [CompanyReport],
    kind: TestKind,
    test: String,
    level: f64,
    p_of: impl Fn(&T) -> f64,
    pick: impl Fn(&mut CompanyReport) -> &mut Entry<T>,
) -> SummaryRow {
    let p: Vec<f64> = companies
        .iter_mut()
        .filter_map(|c| pick(c).result.as_ref().map(&p_of))
        .collect();
    let n_valid = p.len();
    let bonf = if n_valid > 0 {
        bonferroni(&p, level, n_valid)
    } else {
        vec![]
    };
    let mut k = 0;
    let (mut raw, mut corrected) = (0, 0);
    for c in companies.iter_mut() {
        let e = pick(c);
        if e.result.is_some() {
            e.reject = p[k] < level;
            e.reject_bonferroni = bonf[k];
            raw += e.reject as usize;
            corrected += e.reject_bonferroni as usize;
            k += 1;
        }
    }
    let pct = |x: usize| if n_valid > 0 { 100.0 * x as f64 / n_valid as f64 } else { 0.0 };
    SummaryRow {
        test,
        kind,
        n_valid,
        n_failed: companies.len() - n_valid,
        raw_rejections: raw,
        raw_percent: pct(raw),
        bonferroni_threshold: if n_valid > 0 { level / n_valid as f64 } else { level },
        bonferroni_rejections: corrected,
        bonferroni_percent: pct(corrected),
        mean_rho: None,
    }
}

/// Runs the 3 correlation pairs and 8 Granger directions on every panel.
///
/// Companies are processed in parallel; each test draws from its own random
/// stream keyed by company and test, so results do not depend on scheduling.
/// Per-company failures are recorded in the report.
pub fn run_test_battery(panels: &[CompanyPanel], scale: TimeScale, config: &BatteryConfig) -> TestReport {
    let mut companies: Vec<CompanyReport> = panels.par_iter().map(|p| test_company(p, config)).collect();
    let mut summary = Vec::new();
    for (i, pair) in CORRELATION_PAIRS.iter().enumerate() {
        let mut row = flag(
            &mut companies,
            TestKind::Correlation,
            pair.to_string(),
            config.level,
            |r: &CorrelationResult| r.p_value,
            |c| &mut c.correlations[i],
        );
        let rhos: Vec<f64> = companies
            .iter()
            .filter_map(|c| c.correlations[i].result.as_ref().map(|r| r.rho))
            .collect();
        if !rhos.is_empty() {
            row.mean_rho = Some(rhos.iter().sum::<f64>() / rhos.len() as f64);
        }
        summary.push(row);
    }
    for (i, d) in GRANGER_DIRECTIONS.iter().enumerate() {
        summary.push(flag(
            &mut companies,
            TestKind::Granger,
            d.to_string(),
            config.level,
            |r: &GrangerResult| r.p_value,
            |c| &mut c.granger[i],
        ));
    }
    TestReport {
        scale,
        config: config.clone(),
        companies,
        summary,
    }
}

impl TestReport {
    pub fn summary_row(&self, test: &str) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.test == test)
    }

    /// Companies × pairs matrix of rho; failed tests are empty cells.
    pub fn write_rho_matrix<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<String> = CORRELATION_PAIRS.iter().map(|p| p.to_string()).collect();
        writeln!(w, "ticker,{}", header.join(","))?;
        for c in &self.companies {
            let cells: Vec<String> = c
                .correlations
                .iter()
                .map(|e| e.result.as_ref().map(|r| r.rho.to_string()).unwrap_or_default())
                .collect();
            writeln!(w, "{},{}", c.company, cells.join(","))?;
        }
        Ok(())
    }

    /// Companies × directions matrix of 0/1 rejections.
    pub fn write_granger_matrix<W: Write>(&self, mut w: W, bonferroni: bool) -> std::io::Result<()> {
        let header: Vec<String> = GRANGER_DIRECTIONS.iter().map(|d| d.to_string()).collect();
        writeln!(w, "ticker,{}", header.join(","))?;
        for c in &self.companies {
            let cells: Vec<&str> = c
                .granger
                .iter()
                .map(|e| {
                    let r = if bonferroni { e.reject_bonferroni } else { e.reject };
                    if r {
                        "1"
                    } else {
                        "0"
                    }
                })
                .collect();
            writeln!(w, "{},{}", c.company, cells.join(","))?;
        }
        Ok(())
    }

    /// Percent of companies rejecting each test, raw or corrected.
    pub fn write_summary<W: Write>(&self, mut w: W, bonferroni: bool) -> std::io::Result<()> {
        writeln!(w, "test,kind,n_valid,threshold,rejections,percent")?;
        for r in &self.summary {
            let kind = match r.kind {
                TestKind::Correlation => "correlation",
                TestKind::Granger => "granger",
            };
            let (t, k, p) = if bonferroni {
                (r.bonferroni_threshold, r.bonferroni_rejections, r.bonferroni_percent)
            } else {
                (self.config.level, r.raw_rejections, r.raw_percent)
            };
            writeln!(w, "{},{kind},{},{t},{k},{p}", r.test, r.n_valid)?;
        }
        Ok(())
    }
}
