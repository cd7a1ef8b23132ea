//! How fast readers reach an article after it is published.
//!
//! Each article's cumulative click count is normalized by its one-week total
//! and sampled on wall-clock minutes after publication. Articles are grouped
//! into deciles of one-week total clicks and each decile's mean curve is fit
//! with `A (1 − e^{−m/τ})`.

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{epoch_minute, ClickEvent, ClickLog, NewsArticle};

pub const WEEK_MINUTES: i64 = 7 * 1440;
pub const DEFAULT_HORIZON: usize = 300;
pub const N_DECILES: usize = 10;

/// Normalized cumulative click curve of one article.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArticleAttention {
    pub article_id: String,
    /// Clicks in the first week, publication minute and the minute one week later included.
    pub week_total: u64,
    /// `F(m)` for `m = 0..=horizon`.
    pub curve: Vec<f64>,
}

/// `F(m)` = clicks at offsets `0..=m` over clicks at offsets `0..=WEEK_MINUTES`.
///
/// `clicks` holds `(minutes after publication, clicks)`; returns `None` when
/// the week holds no clicks.
pub fn article_cum_curve(clicks: &[(i64, u64)], horizon: usize) -> Option<(u64, Vec<f64>)> {
    let in_week = |m: i64| (0..=WEEK_MINUTES).contains(&m);
    let total: u64 = clicks.iter().filter(|(m, _)| in_week(*m)).map(|(_, c)| c).sum();
    if total == 0 {
        return None;
    }
    let mut per_minute = vec![0u64; horizon + 1];
    for &(m, c) in clicks {
        if m >= 0 && (m as usize) <= horizon {
            per_minute[m as usize] += c;
        }
    }
    let mut acc = 0u64;
    let curve = per_minute
        .iter()
        .map(|c| {
            acc += c;
            acc as f64 / total as f64
        })
        .collect();
    Some((total, curve))
}

fn article_offsets(published: i64, events: &[ClickEvent]) -> Vec<(i64, u64)> {
    events.iter().map(|e| (e.minute - published, e.clicks)).collect()
}

/// Curves for every article; the second value counts articles without
/// clicks in their first week.
pub fn article_curves(articles: &[NewsArticle], clicks: &ClickLog, horizon: usize) -> (Vec<ArticleAttention>, usize) {
    let by_article: HashMap<&str, &[ClickEvent]> = clicks.by_article();
    let curves: Vec<Option<ArticleAttention>> = articles
        .par_iter()
        .map(|a| {
            let events = by_article.get(a.article_id.as_str()).copied().unwrap_or(&[]);
            let offsets = article_offsets(epoch_minute(&a.published), events);
            article_cum_curve(&offsets, horizon).map(|(week_total, curve)| ArticleAttention {
                article_id: a.article_id.clone(),
                week_total,
                curve,
            })
        })
        .collect();
    let excluded = curves.iter().filter(|c| c.is_none()).count();
    (curves.into_iter().flatten().collect(), excluded)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionCurve {
    /// 1 = least clicked.
    pub decile: usize,
    pub minutes: Vec<usize>,
    pub mean_cum_fraction: Vec<f64>,
    pub n_articles: usize,
}

/// Splits articles into ten equal-count groups ordered by
/// `(week_total, article_id)` and averages their curves pointwise.
pub fn decile_curves(articles: &[ArticleAttention]) -> Result<Vec<AttentionCurve>> {
    let n = articles.len();
    if n < N_DECILES {
        return Err(Error::InsufficientData(format!("{n} articles for {N_DECILES} deciles")));
    }
    let horizon = articles[0].curve.len();
    if articles.iter().any(|a| a.curve.len() != horizon) {
        return Err(Error::InvalidArgument("curves of different horizons".into()));
    }
    let mut order: Vec<&ArticleAttention> = articles.iter().collect();
    order.sort_by(|a, b| a.week_total.cmp(&b.week_total).then_with(|| a.article_id.cmp(&b.article_id)));
    Ok((0..N_DECILES)
        .map(|d| {
            let group = &order[d * n / N_DECILES..(d + 1) * n / N_DECILES];
            let mut mean = vec![0.0; horizon];
            for a in group {
                for (m, f) in mean.iter_mut().zip(&a.curve) {
                    *m += f;
                }
            }
            mean.iter_mut().for_each(|m| *m /= group.len() as f64);
            AttentionCurve {
                decile: d + 1,
                minutes: (0..horizon).collect(),
                mean_cum_fraction: mean,
                n_articles: group.len(),
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionFit {
    pub decile: usize,
    pub tau: f64,
    /// Residual-based standard error; zero for a curve the model fits exactly.
    pub se_tau: f64,
    pub amplitude: f64,
    pub iterations: usize,
}

const MAX_ITER: usize = 200;
const STEP_TOL: f64 = 1e-6;

fn model_sse(m: &[f64], f: &[f64], a: f64, tau: f64) -> f64 {
    m.iter()
        .zip(f)
        .map(|(m, f)| (f - a * (1.0 - (-m / tau).exp())).powi(2))
        .sum()
}

// best amplitude in (0, 1] for a fixed tau
fn amplitude_for(m: &[f64], f: &[f64], tau: f64) -> f64 {
    let (mut fg, mut gg) = (0.0, 0.0);
    for (m, f) in m.iter().zip(f) {
        let g = 1.0 - (-m / tau).exp();
        fg += f * g;
        gg += g * g;
    }
    if gg > 0.0 {
        (fg / gg).clamp(1e-9, 1.0)
    } else {
        1e-9
    }
}

/// Least-squares fit of `A (1 − e^{−m/τ})` with `A ∈ (0, 1]`, `τ > 0`.
///
/// A log-spaced grid over `τ` seeds a damped Gauss-Newton iteration that
/// stops once both parameters move by less than 1e-6 relative.
pub fn fit_tau(curve: &AttentionCurve) -> Result<AttentionFit> {
    let m: Vec<f64> = curve.minutes.iter().map(|m| *m as f64).collect();
    let f = &curve.mean_cum_fraction;
    if m.len() < 10 || m.len() != f.len() {
        return Err(Error::InvalidArgument(format!("curve with {} points", m.len())));
    }
    if f.iter().all(|v| *v <= 0.0) {
        return Err(Error::FitFailure(format!("decile {}: curve is identically zero", curve.decile)));
    }
    let (mut a, mut tau) = (0..=120)
        .map(|k| 10f64.powf(k as f64 / 24.0)) // 1 .. 1e5 minutes
        .map(|t| (amplitude_for(&m, f, t), t))
        .min_by(|x, y| model_sse(&m, f, x.0, x.1).total_cmp(&model_sse(&m, f, y.0, y.1)))
        .expect("non-empty grid");
    let mut sse = model_sse(&m, f, a, tau);
    for iter in 1..=MAX_ITER {
        // normal equations for (δA, δτ)
        let (mut jaa, mut jat, mut jtt, mut ra, mut rt) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (mi, fi) in m.iter().zip(f) {
            let e = (-mi / tau).exp();
            let ga = 1.0 - e;
            let gt = -a * e * mi / (tau * tau);
            let r = fi - a * ga;
            jaa += ga * ga;
            jat += ga * gt;
            jtt += gt * gt;
            ra += ga * r;
            rt += gt * r;
        }
        let det = jaa * jtt - jat * jat;
        if !(det.abs() > 0.0) || !det.is_finite() {
            return Err(Error::FitFailure(format!(
                "decile {}: singular Jacobian at A={a}, tau={tau}",
                curve.decile
            )));
        }
        let da = (jtt * ra - jat * rt) / det;
        let dt = (jaa * rt - jat * ra) / det;
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let na = (a + scale * da).min(1.0);
            let nt = tau + scale * dt;
            if na > 0.0 && nt > 0.0 {
                let ns = model_sse(&m, f, na, nt);
                if ns <= sse {
                    accepted = Some((na, nt, ns));
                    break;
                }
            }
            scale *= 0.5;
        }
        let Some((na, nt, ns)) = accepted else {
            // no descent direction left: at the optimum to machine precision
            return Ok(finish(curve.decile, &m, f, a, tau, iter));
        };
        let moved_a = (na - a).abs() <= STEP_TOL * a.abs();
        let moved_t = (nt - tau).abs() <= STEP_TOL * tau;
        a = na;
        tau = nt;
        sse = ns;
        if moved_a && moved_t {
            return Ok(finish(curve.decile, &m, f, a, tau, iter));
        }
    }
    Err(Error::FitFailure(format!(
        "decile {}: no convergence after {MAX_ITER} iterations (A={a}, tau={tau}, sse={sse})",
        curve.decile
    )))
}

fn finish(decile: usize, m: &[f64], f: &[f64], a: f64, tau: f64, iterations: usize) -> AttentionFit {
    let n = m.len() as f64;
    let sigma2 = model_sse(m, f, a, tau) / (n - 2.0);
    let (mut jaa, mut jat, mut jtt) = (0.0, 0.0, 0.0);
    for mi in m {
        let e = (-mi / tau).exp();
        let ga = 1.0 - e;
        let gt = -a * e * mi / (tau * tau);
        jaa += ga * ga;
        jat += ga * gt;
        jtt += gt * gt;
    }
    let det = jaa * jtt - jat * jat;
    let var_tau = if det > 0.0 { sigma2 * jaa / det } else { f64::INFINITY };
    AttentionFit {
        decile,
        tau,
        se_tau: var_tau.max(0.0).sqrt(),
        amplitude: a,
        iterations,
    }
}

pub fn write_curves_csv<W: Write>(curves: &[AttentionCurve], mut w: W) -> std::io::Result<()> {
    writeln!(w, "decile,minute,mean_cum_fraction,n_articles")?;
    for c in curves {
        for (m, f) in c.minutes.iter().zip(&c.mean_cum_fraction) {
            writeln!(w, "{},{m},{f},{}", c.decile, c.n_articles)?;
        }
    }
    Ok(())
}

pub fn write_fits_csv<W: Write>(fits: &[AttentionFit], mut w: W) -> std::io::Result<()> {
    writeln!(w, "decile,tau,se_tau")?;
    for f in fits {
        writeln!(w, "{},{},{}", f.decile, f.tau, f.se_tau)?;
    }
    Ok(())
}
