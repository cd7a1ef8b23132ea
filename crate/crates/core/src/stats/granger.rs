//! Pairwise Granger causality by nested OLS regressions.

use serde::{Deserialize, Serialize};

use super::ols::{ols, Design};
use super::special::f_sf;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrangerResult {
    pub direction: String,
    pub lag: usize,
    pub f_stat: f64,
    pub p_value: f64,
    pub n_effective: usize,
    pub rss_restricted: f64,
    pub rss_unrestricted: f64,
}

/// Smallest series length accepted for `lag`.
pub fn min_length(lag: usize) -> usize {
    3 * lag + 6
}

fn check_inputs(x: &[f64], y: &[f64], lag: usize) -> Result<()> {
    if lag == 0 {
        return Err(Error::InvalidArgument("lag must be at least 1".into()));
    }
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!("lengths {} and {}", x.len(), y.len())));
    }
    if x.len() < min_length(lag) {
        return Err(Error::InsufficientData(format!(
            "{} observations for lag {lag}",
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite value".into()));
    }
    Ok(())
}

/// Designs over rows `start..n` (targets `y[start..]`).
fn designs(x: &[f64], y: &[f64], lag: usize, start: usize) -> (Design, Design) {
    let n = y.len() - start;
    let mut restricted = Design::new(n);
    restricted.push_column(std::iter::repeat_n(1.0, n));
    for k in 1..=lag {
        restricted.push_column(y[start - k..y.len() - k].iter().copied());
    }
    let mut unrestricted = restricted.clone();
    for k in 1..=lag {
        unrestricted.push_column(x[start - k..x.len() - k].iter().copied());
    }
    (restricted, unrestricted)
}

/// Tests whether the history of `x` improves the prediction of `y`.
pub fn granger(x: &[f64], y: &[f64], lag: usize) -> Result<GrangerResult> {
    check_inputs(x, y, lag)?;
    let (restricted, unrestricted) = designs(x, y, lag, lag);
    let target = &y[lag..];
    let rss_r = ols(&restricted, target)?.rss;
    let rss_u = ols(&unrestricted, target)?.rss;
    if rss_u <= 0.0 {
        return Err(Error::SingularRegression("unrestricted model fits exactly".into()));
    }
    let n_eff = y.len() - lag;
    let df2 = n_eff - 2 * lag - 1;
    let f_stat = ((rss_r - rss_u).max(0.0) / lag as f64) / (rss_u / df2 as f64);
    Ok(GrangerResult {
        direction: String::new(),
        lag,
        f_stat,
        p_value: f_sf(f_stat, lag as f64, df2 as f64),
        n_effective: n_eff,
        rss_restricted: rss_r,
        rss_unrestricted: rss_u.min(rss_r),
    })
}

/// BIC of the autoregression of `y` on its own lags for each lag in
/// `1..=max_lag`, all fitted on the common sample that drops the first
/// `max_lag` observations. Lags whose regression is singular are `None`.
///
/// The candidate cause `x` is left out so that the chosen lag carries no
/// information about its coefficients and the F test keeps its size.
pub fn bic_table(x: &[f64], y: &[f64], max_lag: usize) -> Result<Vec<Option<f64>>> {
    check_inputs(x, y, max_lag)?;
    let target = &y[max_lag..];
    let n = target.len() as f64;
    Ok((1..=max_lag)
        .map(|lag| {
            let (restricted, _) = designs(x, y, lag, max_lag);
            let k = (lag + 1) as f64;
            ols(&restricted, target)
                .ok()
                .filter(|fit| fit.rss > 0.0)
                .map(|fit| n * (fit.rss / n).ln() + k * n.ln())
        })
        .collect())
}

/// Lag in `1..=max_lag` minimizing the autoregressive BIC; ties go to the
/// smaller lag. `max_lag` is capped to what the series length supports.
pub fn select_lag(x: &[f64], y: &[f64], max_lag: usize) -> usize {
    let mut max_lag = max_lag.max(1);
    while max_lag > 1 && x.len() < min_length(max_lag) {
        max_lag -= 1;
    }
    if max_lag == 1 {
        return 1;
    }
    let Ok(table) = bic_table(x, y, max_lag) else {
        return 1;
    };
    let mut best = (1, f64::INFINITY);
    for (i, bic) in table.iter().enumerate() {
        if let Some(b) = bic {
            if *b < best.1 {
                best = (i + 1, *b);
            }
        }
    }
    best.0
}
