//! De-seasonalized per-company series.
//!
//! All work happens first on the minute grid ([`MinuteSeries`]) and is then
//! summed into bins of the requested [`TimeScale`] ([`CompanyPanel`]).
//!
//! Volume and clicks are divided by a minute-of-day profile `ζ_t`, the
//! average over days of the minute's share of the daily total. Returns are
//! divided by the average over days of `|r_{d,t}|` relative to that day's
//! mean absolute return. Days whose normalizer is zero are left out of the
//! averages; minutes with `ζ_t = 0` map to 0.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::calendar::{GridPoint, TimeScale, TradingCalendar, SESSION_MINUTES};
use crate::error::{Error, Result};
use crate::ingest::{CompanyClicks, MarketBar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    Volume,
    Returns,
    Clicks,
}

/// Minute-of-day rescaling factors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeasonalProfile {
    pub kind: ProfileKind,
    pub zeta: Vec<f64>,
}

impl SeasonalProfile {
    /// Profile that leaves a series unchanged.
    pub fn identity(kind: ProfileKind, day_len: usize) -> Self {
        Self {
            kind,
            zeta: vec![1.0; day_len],
        }
    }

    pub fn day_len(&self) -> usize {
        self.zeta.len()
    }
}

fn check_grid(values: &[f64], day_len: usize) -> Result<usize> {
    if day_len == 0 || !values.len().is_multiple_of(day_len) {
        return Err(Error::InvalidArgument(format!(
            "grid of {} values is not a whole number of {day_len}-minute days",
            values.len()
        )));
    }
    Ok(values.len() / day_len)
}

/// `ζ_t = mean over days with Λ_d > 0 of x_{d,t} / Λ_d`, `Λ_d = Σ_t x_{d,t}`.
pub(crate) fn share_profile(kind: ProfileKind, raw: &[f64], day_len: usize) -> Result<SeasonalProfile> {
    let n_days = check_grid(raw, day_len)?;
    let mut zeta = vec![0.0; day_len];
    let mut used = 0usize;
    for day in raw.chunks_exact(day_len).take(n_days) {
        let total: f64 = day.iter().sum();
        if total > 0.0 {
            used += 1;
            for (z, x) in zeta.iter_mut().zip(day) {
                *z += x / total;
            }
        }
    }
    if used == 0 {
        return Err(Error::DegenerateInput(format!("{kind:?}: every day sums to zero")));
    }
    zeta.iter_mut().for_each(|z| *z /= used as f64);
    Ok(SeasonalProfile { kind, zeta })
}

/// `ζ^r_t = mean over days with Ξ_d > 0 of |r_{d,t}| / Ξ_d`, `Ξ_d = mean_t |r_{d,t}|`.
pub(crate) fn returns_profile(returns: &[f64], day_len: usize) -> Result<SeasonalProfile> {
    let n_days = check_grid(returns, day_len)?;
    let mut zeta = vec![0.0; day_len];
    let mut used = 0usize;
    for day in returns.chunks_exact(day_len).take(n_days) {
        let xi = day.iter().map(|r| r.abs()).sum::<f64>() / day_len as f64;
        if xi > 0.0 {
            used += 1;
            for (z, r) in zeta.iter_mut().zip(day) {
                *z += r.abs() / xi;
            }
        }
    }
    if used == 0 {
        return Err(Error::DegenerateInput("returns: every day is flat".into()));
    }
    zeta.iter_mut().for_each(|z| *z /= used as f64);
    Ok(SeasonalProfile {
        kind: ProfileKind::Returns,
        zeta,
    })
}

/// Volume profile over a day-major grid of 390-minute days.
pub fn seasonal_profile_volume(raw: &[f64]) -> Result<SeasonalProfile> {
    share_profile(ProfileKind::Volume, raw, SESSION_MINUTES)
}

/// Click profile; same construction as volume.
pub fn seasonal_profile_clicks(raw: &[f64]) -> Result<SeasonalProfile> {
    share_profile(ProfileKind::Clicks, raw, SESSION_MINUTES)
}

pub fn seasonal_profile_returns(returns: &[f64]) -> Result<SeasonalProfile> {
    returns_profile(returns, SESSION_MINUTES)
}

/// Divides each minute by its profile factor; minutes with `ζ_t = 0` give 0.
pub fn deseasonalize(raw: &[f64], profile: &SeasonalProfile) -> Result<Vec<f64>> {
    check_grid(raw, profile.day_len())?;
    Ok(raw
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let z = profile.zeta[i % profile.day_len()];
            if z > 0.0 {
                x / z
            } else {
                0.0
            }
        })
        .collect())
}

/// Base-10 log returns from per-minute last prices.
///
/// A minute without a trade carries the previous price forward (return 0).
/// The first return of each day is taken against the previous day's close;
/// minutes before the first observed price have return 0.
pub fn minute_returns(prices: &[Option<f64>]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(prices.len());
    let mut prev: Option<f64> = None;
    for p in prices {
        let r = match (prev, p) {
            (Some(a), Some(b)) => (b / a).log10(),
            _ => 0.0,
        };
        out.push(r);
        if p.is_some() {
            prev = *p;
        }
    }
    if prev.is_none() {
        return Err(Error::DegenerateInput("no price observed".into()));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Profiles {
    pub volume: SeasonalProfile,
    pub returns: SeasonalProfile,
    pub clicks: SeasonalProfile,
}

/// Minute-level series for one company, the shared input to every panel.
#[derive(Clone, Debug, PartialEq)]
pub struct MinuteSeries {
    pub company: String,
    pub n_days: usize,
    pub raw_volume: Vec<f64>,
    pub raw_returns: Vec<f64>,
    pub raw_clicks: Vec<f64>,
    /// Σ over articles of clicks × sentiment sign, per minute.
    pub signed_clicks: Vec<f64>,
    /// Σ of sentiment signs of articles published in the minute.
    pub published_sentiment: Vec<f64>,
    /// Last price of each day, carried forward; `None` before the first trade.
    pub closes: Vec<Option<f64>>,
    pub profiles: Profiles,
    /// De-seasonalized volume `V_{d,t}`.
    pub volume: Vec<f64>,
    /// Rescaled returns `R_{d,t}`.
    pub returns: Vec<f64>,
    /// De-seasonalized clicks `C_{d,t}`.
    pub clicks: Vec<f64>,
}

/// Sentiment sign and in-session publication point of one article.
#[derive(Clone, Debug, PartialEq)]
pub struct ArticleSign {
    pub article_id: String,
    pub sign: i8,
    pub published: Option<GridPoint>,
}

impl MinuteSeries {
    pub fn build(
        company: &str,
        n_days: usize,
        bars: &[MarketBar],
        clicks: &CompanyClicks,
        articles: &[ArticleSign],
    ) -> Result<Self> {
        let n = n_days * SESSION_MINUTES;
        let mut raw_volume = vec![0.0; n];
        let mut prices = vec![None; n];
        for b in bars {
            let i = b.point().flat();
            raw_volume[i] = b.volume;
            prices[i] = Some(b.last_price);
        }
        let raw_returns = minute_returns(&prices)?;
        let mut closes = Vec::with_capacity(n_days);
        let mut last = None;
        for day in prices.chunks_exact(SESSION_MINUTES) {
            if let Some(p) = day.iter().rev().flatten().next() {
                last = Some(*p);
            }
            closes.push(last);
        }

        let signs: HashMap<&str, i8> = articles.iter().map(|a| (a.article_id.as_str(), a.sign)).collect();
        let mut raw_clicks = vec![0.0; n];
        let mut signed_clicks = vec![0.0; n];
        for e in &clicks.entries {
            let i = e.point().flat();
            let c = e.clicks as f64;
            raw_clicks[i] += c;
            signed_clicks[i] += c * f64::from(signs.get(e.article_id.as_str()).copied().unwrap_or(0));
        }
        let mut published_sentiment = vec![0.0; n];
        for a in articles {
            if let Some(p) = a.published {
                published_sentiment[p.flat()] += f64::from(a.sign);
            }
        }

        let profiles = Profiles {
            volume: seasonal_profile_volume(&raw_volume)
                .map_err(|e| Error::DegenerateInput(format!("{company}: {e}")))?,
            returns: seasonal_profile_returns(&raw_returns)
                .map_err(|e| Error::DegenerateInput(format!("{company}: {e}")))?,
            clicks: seasonal_profile_clicks(&raw_clicks)
                .map_err(|e| Error::DegenerateInput(format!("{company}: {e}")))?,
        };
        let volume = deseasonalize(&raw_volume, &profiles.volume)?;
        let returns = deseasonalize(&raw_returns, &profiles.returns)?;
        let clicks = deseasonalize(&raw_clicks, &profiles.clicks)?;
        Ok(Self {
            company: company.to_string(),
            n_days,
            raw_volume,
            raw_returns,
            raw_clicks,
            signed_clicks,
            published_sentiment,
            closes,
            profiles,
            volume,
            returns,
            clicks,
        })
    }
}

/// The six aligned series.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SeriesKind {
    V,
    R,
    Sigma,
    C,
    S,
    WS,
}

impl SeriesKind {
    pub const ALL: [SeriesKind; 6] = [
        SeriesKind::V,
        SeriesKind::R,
        SeriesKind::Sigma,
        SeriesKind::C,
        SeriesKind::S,
        SeriesKind::WS,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SeriesKind::V => "V",
            SeriesKind::R => "R",
            SeriesKind::Sigma => "sigma",
            SeriesKind::C => "C",
            SeriesKind::S => "S",
            SeriesKind::WS => "WS",
        }
    }
}

impl fmt::Display for SeriesKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SeriesKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SeriesKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown series {s:?}")))
    }
}

/// Per-company bundle of the six series at one scale.
#[derive(Clone, Debug, PartialEq)]
pub struct CompanyPanel {
    pub company: String,
    pub scale: TimeScale,
    pub v: Vec<f64>,
    pub r: Vec<f64>,
    pub sigma: Vec<f64>,
    pub c: Vec<f64>,
    pub s: Vec<f64>,
    pub ws: Vec<f64>,
}

impl CompanyPanel {
    pub fn n_bins(&self) -> usize {
        self.v.len()
    }

    pub fn series(&self, kind: SeriesKind) -> &[f64] {
        match kind {
            SeriesKind::V => &self.v,
            SeriesKind::R => &self.r,
            SeriesKind::Sigma => &self.sigma,
            SeriesKind::C => &self.c,
            SeriesKind::S => &self.s,
            SeriesKind::WS => &self.ws,
        }
    }

    /// Writes the panel as `bin_start_iso,V,R,sigma,C,S,WS`.
    pub fn write_csv<W: Write>(&self, cal: &TradingCalendar, mut w: W) -> std::io::Result<()> {
        writeln!(w, "bin_start_iso,V,R,sigma,C,S,WS")?;
        let per_day = self.scale.bins_per_day();
        let width = self.scale.width();
        for k in 0..self.n_bins() {
            let day = k / per_day;
            let minute = ((k % per_day) * width) as u16;
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                cal.instant_fixed(day, minute).to_rfc3339(),
                self.v[k],
                self.r[k],
                self.sigma[k],
                self.c[k],
                self.s[k],
                self.ws[k]
            )?;
        }
        Ok(())
    }

    /// Reads a panel written by [`write_csv`](Self::write_csv).
    pub fn read_csv<R: BufRead>(company: &str, scale: TimeScale, r: R) -> Result<Self> {
        let origin = std::path::PathBuf::from(format!("{company}_{scale}.csv"));
        let mut panel = CompanyPanel {
            company: company.to_string(),
            scale,
            v: vec![],
            r: vec![],
            sigma: vec![],
            c: vec![],
            s: vec![],
            ws: vec![],
        };
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::io(&origin, e))?;
            if i == 0 {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 7 {
                return Err(Error::parse(&origin, i as u64 + 1, "expected 7 fields"));
            }
            let mut vals = [0.0; 6];
            for (v, f) in vals.iter_mut().zip(&fields[1..]) {
                *v = f
                    .parse()
                    .map_err(|_| Error::parse(&origin, i as u64 + 1, format!("bad number {f:?}")))?;
            }
            panel.v.push(vals[0]);
            panel.r.push(vals[1]);
            panel.sigma.push(vals[2]);
            panel.c.push(vals[3]);
            panel.s.push(vals[4]);
            panel.ws.push(vals[5]);
        }
        Ok(panel)
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn bin_sums(minutes: &[f64], width: usize) -> Vec<f64> {
    minutes.chunks_exact(width).map(|c| c.iter().sum()).collect()
}

/// Aggregates the minute series into bins of `scale`.
///
/// At the daily scale volume and clicks are raw daily totals and the return
/// is close-to-close; intraday scales sum the de-seasonalized minutes.
pub fn build_panel(m: &MinuteSeries, scale: TimeScale) -> CompanyPanel {
    let width = scale.width();
    let (v, r, c) = match scale {
        TimeScale::Minutes(_) => (
            bin_sums(&m.volume, width),
            bin_sums(&m.returns, width),
            bin_sums(&m.clicks, width),
        ),
        TimeScale::Daily => {
            let mut r = Vec::with_capacity(m.n_days);
            let mut prev: Option<f64> = None;
            for close in &m.closes {
                r.push(match (prev, close) {
                    (Some(a), Some(b)) => (b / a).log10(),
                    _ => 0.0,
                });
                if close.is_some() {
                    prev = *close;
                }
            }
            (bin_sums(&m.raw_volume, width), r, bin_sums(&m.raw_clicks, width))
        }
    };
    let sigma = r.iter().map(|x| x.abs()).collect();
    let s = bin_sums(&m.published_sentiment, width);
    let ws_bar = bin_sums(&m.signed_clicks, width);
    let ws = ws_bar.iter().zip(&c).map(|(w, c)| sign(*w) * c).collect();
    CompanyPanel {
        company: m.company.clone(),
        scale,
        v,
        r,
        sigma,
        c,
        s,
        ws,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::ClickMinute;
    use proptest::prelude::*;

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn uniform_volume_profile() {
        let raw = vec![7.0; 2 * SESSION_MINUTES];
        let p = seasonal_profile_volume(&raw).unwrap();
        assert!(p.zeta.iter().all(|z| rel_close(*z, 1.0 / 390.0, 1e-12)));
        assert!(rel_close(p.zeta.iter().sum::<f64>(), 1.0, 1e-12));
        let v = deseasonalize(&raw, &p).unwrap();
        assert!(v.iter().all(|x| rel_close(*x, 390.0 * 7.0, 1e-12)));
    }

    #[test]
    fn multiplicative_toy_grid_by_hand() {
        // 2 days x 4 minutes, v = a_d * b_t with a = (1, 3), b = (1, 2, 3, 4).
        // Λ = (10, 30); shares are b_t / 10 on both days, so ζ_t = b_t / 10.
        let a = [1.0, 3.0];
        let b = [1.0, 2.0, 3.0, 4.0];
        let raw: Vec<f64> = a.iter().flat_map(|ad| b.iter().map(move |bt| ad * bt)).collect();
        let p = share_profile(ProfileKind::Volume, &raw, 4).unwrap();
        for (z, bt) in p.zeta.iter().zip(b) {
            assert!(rel_close(*z, bt / 10.0, 1e-15));
        }
        let v = deseasonalize(&raw, &p).unwrap();
        // a_d * Σb = (10, 30)
        assert!(v[..4].iter().all(|x| rel_close(*x, 10.0, 1e-12)));
        assert!(v[4..].iter().all(|x| rel_close(*x, 30.0, 1e-12)));
    }

    #[test]
    fn zero_volume_day_excluded() {
        let mut raw = vec![1.0; 3 * 4];
        raw[4..8].iter_mut().for_each(|x| *x = 0.0);
        raw[8] = 5.0;
        let p = share_profile(ProfileKind::Volume, &raw, 4).unwrap();
        // day0 shares 0.25 each; day2 shares (5,1,1,1)/8
        assert!(rel_close(p.zeta[0], (0.25 + 5.0 / 8.0) / 2.0, 1e-15));
        assert!(rel_close(p.zeta[1], (0.25 + 1.0 / 8.0) / 2.0, 1e-15));
    }

    #[test]
    fn all_zero_is_degenerate() {
        let raw = vec![0.0; 2 * SESSION_MINUTES];
        assert!(matches!(seasonal_profile_volume(&raw), Err(Error::DegenerateInput(_))));
        assert!(matches!(seasonal_profile_returns(&raw), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn zero_zeta_maps_to_zero() {
        let mut raw = vec![1.0; 2 * 4];
        raw[1] = 0.0;
        raw[5] = 0.0;
        let p = share_profile(ProfileKind::Volume, &raw, 4).unwrap();
        assert_eq!(p.zeta[1], 0.0);
        let v = deseasonalize(&raw, &p).unwrap();
        assert_eq!(v[1], 0.0);
        assert_eq!(v[5], 0.0);
    }

    #[test]
    fn constant_abs_returns_profile_is_one() {
        let r: Vec<f64> = (0..2 * SESSION_MINUTES)
            .map(|i| if i % 3 == 0 { -0.002 } else { 0.002 })
            .collect();
        let p = seasonal_profile_returns(&r).unwrap();
        assert!(p.zeta.iter().all(|z| rel_close(*z, 1.0, 1e-12)));
    }

    #[test]
    fn returns_profile_toy_grid_by_hand() {
        // |r| = a_d b_t with a = (2, 5), b = (1, 3); mean(b) = 2 so ζ = b / 2.
        let r = [2.0, -6.0, -5.0, 15.0];
        let p = returns_profile(&r, 2).unwrap();
        assert!(rel_close(p.zeta[0], 0.5, 1e-15));
        assert!(rel_close(p.zeta[1], 1.5, 1e-15));
    }

    #[test]
    fn single_nonzero_day_drives_returns_profile() {
        let r = [0.0, 0.0, 1.0, 3.0];
        let p = returns_profile(&r, 2).unwrap();
        assert!(rel_close(p.zeta[0], 0.5, 1e-15));
        assert!(rel_close(p.zeta[1], 1.5, 1e-15));
    }

    #[test]
    fn minute_returns_examples() {
        let r = minute_returns(&[Some(100.0), Some(100.0)]).unwrap();
        assert_eq!(r, [0.0, 0.0]);
        let r = minute_returns(&[Some(100.0), Some(1000.0)]).unwrap();
        assert!(rel_close(r[1], 1.0, 1e-15));
        // a gap minute carries 100 forward, then 100 -> 102
        let r = minute_returns(&[Some(100.0), None, Some(102.0)]).unwrap();
        assert_eq!(r[0], 0.0);
        assert_eq!(r[1], 0.0);
        assert!(rel_close(r[2], 1.02f64.log10(), 1e-15));
        let r = minute_returns(&[None, Some(5.0), Some(10.0)]).unwrap();
        assert_eq!(&r[..2], &[0.0, 0.0]);
        assert!(minute_returns(&[None, None]).is_err());
    }

    fn toy_minutes(n_days: usize) -> MinuteSeries {
        let n = n_days * SESSION_MINUTES;
        let mut bars = Vec::new();
        for i in 0..n {
            let (day, minute) = (i / SESSION_MINUTES, (i % SESSION_MINUTES) as u16);
            bars.push(MarketBar {
                company: "X".into(),
                day,
                minute,
                last_price: 100.0 * (1.0 + 0.001 * ((i * 7919 % 13) as f64 - 6.0)),
                volume: 100.0 + ((i * 31) % 17) as f64,
            });
        }
        let mut entries = Vec::new();
        for i in (0..n).step_by(7) {
            let (day, minute) = (i / SESSION_MINUTES, (i % SESSION_MINUTES) as u16);
            entries.push(ClickMinute {
                article_id: if i % 2 == 0 { "p".into() } else { "n".into() },
                day,
                minute,
                clicks: 1 + (i % 5) as u64,
            });
        }
        let clicks = CompanyClicks {
            company: "X".into(),
            entries,
            ..Default::default()
        };
        let arts = vec![
            ArticleSign {
                article_id: "p".into(),
                sign: 1,
                published: Some(GridPoint { day: 0, minute: 3 }),
            },
            ArticleSign {
                article_id: "n".into(),
                sign: -1,
                published: Some(GridPoint { day: 0, minute: 70 }),
            },
        ];
        MinuteSeries::build("X", n_days, &bars, &clicks, &arts).unwrap()
    }

    #[test]
    fn panel_invariants() {
        let m = toy_minutes(3);
        for scale in TimeScale::ALL {
            let p = build_panel(&m, scale);
            let n = p.n_bins();
            assert_eq!(n, 3 * scale.bins_per_day());
            for k in SeriesKind::ALL {
                assert_eq!(p.series(k).len(), n);
            }
            for i in 0..n {
                assert_eq!(p.sigma[i], p.r[i].abs());
                assert!(p.ws[i] == 0.0 || p.ws[i].abs() == p.c[i]);
            }
        }
    }

    #[test]
    fn aggregation_consistency() {
        let m = toy_minutes(3);
        let p10 = build_panel(&m, TimeScale::Minutes(10));
        let p130 = build_panel(&m, TimeScale::Minutes(130));
        let p1 = build_panel(&m, TimeScale::Minutes(1));
        let p65 = build_panel(&m, TimeScale::Minutes(65));
        for (k, v) in p130.v.iter().enumerate() {
            let s: f64 = p10.v[k * 13..(k + 1) * 13].iter().sum();
            assert!(rel_close(s, *v, 1e-9));
        }
        for (k, r) in p65.r.iter().enumerate() {
            let s: f64 = p1.r[k * 65..(k + 1) * 65].iter().sum();
            assert!((s - r).abs() <= 1e-9 * r.abs().max(1e-12));
        }
    }

    #[test]
    fn sentiment_series() {
        let m = toy_minutes(2);
        let p = build_panel(&m, TimeScale::Minutes(65));
        // publications: +1 at minute 3 (bin 0), -1 at minute 70 (bin 1)
        assert_eq!(p.s[0], 1.0);
        assert_eq!(p.s[1], -1.0);
        assert!(p.s[2..].iter().all(|s| *s == 0.0));
    }

    fn single_bin(entries: Vec<ClickMinute>, arts: Vec<ArticleSign>) -> CompanyPanel {
        let bars: Vec<MarketBar> = (0..SESSION_MINUTES)
            .map(|t| MarketBar {
                company: "X".into(),
                day: 0,
                minute: t as u16,
                last_price: 10.0 + (t % 3) as f64,
                volume: 1.0,
            })
            .collect();
        // uniform background clicks keep the click profile flat
        let mut all = entries;
        let clicks = CompanyClicks {
            company: "X".into(),
            entries: {
                all.extend((0..SESSION_MINUTES).map(|t| ClickMinute {
                    article_id: "bg".into(),
                    day: 0,
                    minute: t as u16,
                    clicks: 0,
                }));
                all
            },
            ..Default::default()
        };
        let m = MinuteSeries::build("X", 1, &bars, &clicks, &arts).unwrap();
        build_panel(&m, TimeScale::Daily)
    }

    #[test]
    fn weighted_sentiment_sign_rules() {
        let pos = ArticleSign {
            article_id: "p".into(),
            sign: 1,
            published: Some(GridPoint { day: 0, minute: 0 }),
        };
        let neg = ArticleSign {
            article_id: "n".into(),
            sign: -1,
            published: Some(GridPoint { day: 0, minute: 0 }),
        };
        let click = |id: &str, minute, clicks| ClickMinute {
            article_id: id.into(),
            day: 0,
            minute,
            clicks,
        };
        let p = single_bin(vec![click("p", 5, 5)], vec![pos.clone()]);
        assert_eq!((p.c[0], p.ws[0]), (5.0, 5.0));
        let p = single_bin(vec![click("p", 5, 3), click("n", 6, 3)], vec![pos, neg]);
        assert_eq!((p.c[0], p.ws[0], p.s[0]), (6.0, 0.0, 0.0));
    }

    #[test]
    fn empty_bins_are_zero() {
        let m = toy_minutes(1);
        let p = build_panel(&m, TimeScale::Minutes(1));
        // no click entries at minute 1
        assert_eq!((p.c[1], p.s[1], p.ws[1]), (0.0, 0.0, 0.0));
    }

    #[test]
    fn daily_returns_close_to_close() {
        let m = toy_minutes(3);
        let p = build_panel(&m, TimeScale::Daily);
        assert_eq!(p.r[0], 0.0);
        let expect = (m.closes[1].unwrap() / m.closes[0].unwrap()).log10();
        assert!(rel_close(p.r[1], expect, 1e-15));
        assert_eq!(p.v[0], m.raw_volume[..SESSION_MINUTES].iter().sum::<f64>());
    }

    #[test]
    fn build_is_deterministic() {
        let a = build_panel(&toy_minutes(2), TimeScale::Minutes(30));
        let b = build_panel(&toy_minutes(2), TimeScale::Minutes(30));
        let bits = |p: &CompanyPanel| {
            SeriesKind::ALL
                .iter()
                .flat_map(|k| p.series(*k).iter().map(|x| x.to_bits()).collect::<Vec<_>>())
                .collect::<Vec<_>>()
        };
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn csv_round_trip() {
        use chrono::NaiveDate;
        let cal = TradingCalendar::new(vec![
            NaiveDate::from_ymd_opt(2012, 6, 4).unwrap(),
            NaiveDate::from_ymd_opt(2012, 6, 5).unwrap(),
        ])
        .unwrap();
        let p = build_panel(&toy_minutes(2), TimeScale::Minutes(65));
        let mut buf = Vec::new();
        p.write_csv(&cal, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("bin_start_iso,V,R,sigma,C,S,WS\n2012-06-04T09:30:00-04:00,"));
        assert!(text.contains("\n2012-06-04T10:35:00-04:00,"));
        let back = CompanyPanel::read_csv("X", TimeScale::Minutes(65), buf.as_slice()).unwrap();
        assert_eq!(back, p);
    }

    proptest! {
        #[test]
        fn multiplicative_inputs_flatten_within_day(
            a in proptest::collection::vec(0.1f64..50.0, 2..5),
            b in proptest::collection::vec(0.05f64..20.0, 8),
        ) {
            let raw: Vec<f64> = a.iter().flat_map(|ad| b.iter().map(move |bt| ad * bt)).collect();
            let day_len = b.len();
            let p = share_profile(ProfileKind::Clicks, &raw, day_len).unwrap();
            let v = deseasonalize(&raw, &p).unwrap();
            for day in v.chunks(day_len) {
                for x in day {
                    prop_assert!(rel_close(*x, day[0], 1e-9));
                }
            }
            let rp = returns_profile(&raw, day_len).unwrap();
            let r = deseasonalize(&raw, &rp).unwrap();
            for day in r.chunks(day_len) {
                for x in day {
                    prop_assert!(rel_close(*x, day[0], 1e-9));
                }
            }
        }
    }
}
