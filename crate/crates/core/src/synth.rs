//! Synthetic inputs with planted structure.
//!
//! Every company gets one bar per session minute, a set of articles with
//! power-law click totals, and clicks that arrive with an exponential delay
//! modulated by the intraday pattern. For companies flagged causal the
//! returns of coupling bin `k` contain `causal_strength · X_{k−causal_lag}`,
//! spread evenly over the bin's minutes. `X` is the weighted-sentiment signal
//! at `coupling_scale`: the sign of the bin's net signed clicks times its
//! clicks de-seasonalized by the intraday pattern, scaled to unit mean
//! absolute value.
//!
//! All randomness comes from streams keyed by the seed and a label such as
//! `S017/clicks`, so a company's data does not depend on how many companies
//! are generated or on thread scheduling.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_distr::{Binomial, Distribution, Exp, LogNormal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calendar::{TimeScale, TradingCalendar, SESSION_MINUTES};
use crate::error::{Error, Result};
use crate::ingest::{epoch_minute, AliasTable, ClickEvent, ClickLog, MarketBar, MarketData, NewsArticle};
use crate::rng::substream;
use crate::sentiment::Lexicon;
use crate::stats::granger;
use crate::tails::DiscretePowerLaw;

pub const MARKET_FILE: &str = "market.csv";
pub const CLICKS_FILE: &str = "clicks.csv";
pub const NEWS_FILE: &str = "news.jsonl";
pub const LEXICON_FILE: &str = "lexicon.csv";
pub const ALIASES_FILE: &str = "aliases.csv";
pub const CALENDAR_FILE: &str = "trading_days.txt";
pub const TRUTH_FILE: &str = "ground_truth.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseScales {
    /// Log-normal sigma of minute volume around its intraday level.
    pub volume: f64,
    /// Standard deviation of a minute's base-10 log return at average activity.
    pub returns: f64,
}

impl Default for NoiseScales {
    fn default() -> Self {
        Self {
            volume: 0.5,
            returns: 2e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_companies: usize,
    pub n_days: usize,
    pub seed: u64,
    pub start_date: NaiveDate,
    /// Mean articles per company and trading day.
    pub articles_per_day: f64,
    pub click_alpha: f64,
    pub click_xmin: u64,
    /// Attention time scale in minutes, rising with an article's click total.
    pub tau_range: (f64, f64),
    pub intraday_pattern: Vec<f64>,
    pub causal_fraction: f64,
    pub causal_strength: f64,
    /// Lag in bins of `coupling_scale`.
    pub causal_lag: usize,
    pub coupling_scale: TimeScale,
    pub noise_scales: NoiseScales,
    /// Share of articles also tagged with a company they do not mention.
    pub decoy_fraction: f64,
    /// Market-wide digests tagged with more than four companies, per company article.
    pub digest_fraction: f64,
    /// Probabilities of a positive, negative and neutral headline.
    pub sentiment_mix: [f64; 3],
}

/// U-shaped activity with a lunchtime dip, normalized to mean 1.
pub fn default_pattern() -> Vec<f64> {
    let raw: Vec<f64> = (0..SESSION_MINUTES)
        .map(|t| {
            let x = (t as f64 + 0.5) / SESSION_MINUTES as f64;
            let u = 1.0 + 6.0 * (x - 0.5).powi(2) + 1.2 * (-x / 0.04).exp() + 0.8 * (-(1.0 - x) / 0.03).exp();
            u * (1.0 - 0.25 * (-((x - 0.45) / 0.08).powi(2)).exp())
        })
        .collect();
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    raw.into_iter().map(|v| v / mean).collect()
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_companies: 100,
            n_days: 60,
            seed: 1,
            start_date: NaiveDate::from_ymd_opt(2012, 6, 1).expect("valid date"),
            articles_per_day: 2.0,
            click_alpha: 1.15,
            click_xmin: 10,
            tau_range: (60.0, 120.0),
            intraday_pattern: default_pattern(),
            causal_fraction: 0.0,
            causal_strength: 0.0,
            causal_lag: 1,
            coupling_scale: TimeScale::Minutes(65),
            noise_scales: NoiseScales::default(),
            decoy_fraction: 0.05,
            digest_fraction: 0.02,
            sentiment_mix: [0.4, 0.35, 0.25],
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_companies == 0 || self.n_companies > 999 {
            return bad(format!("n_companies must be in 1..=999, got {}", self.n_companies));
        }
        if self.n_days == 0 {
            return bad("n_days must be positive".into());
        }
        if !(self.articles_per_day > 0.0 && self.articles_per_day.is_finite()) {
            return bad(format!("articles_per_day must be positive, got {}", self.articles_per_day));
        }
        if !(self.click_alpha > 0.0) || self.click_xmin == 0 {
            return bad(format!("click law alpha {} x_min {}", self.click_alpha, self.click_xmin));
        }
        let (lo, hi) = self.tau_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return bad(format!("tau_range {lo}..{hi}"));
        }
        if self.intraday_pattern.len() != SESSION_MINUTES {
            return bad(format!(
                "intraday_pattern needs {SESSION_MINUTES} values, got {}",
                self.intraday_pattern.len()
            ));
        }
        if self.intraday_pattern.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return bad("intraday_pattern must be strictly positive".into());
        }
        if !(0.0..=1.0).contains(&self.causal_fraction) {
            return bad(format!("causal_fraction {} outside [0, 1]", self.causal_fraction));
        }
        if !(self.causal_strength >= 0.0 && self.causal_strength.is_finite()) {
            return bad(format!("causal_strength {}", self.causal_strength));
        }
        if self.causal_lag == 0 || self.coupling_scale.is_daily() {
            return bad("causal_lag must be positive and coupling_scale intraday".into());
        }
        if !(self.noise_scales.volume > 0.0 && self.noise_scales.returns > 0.0) {
            return bad("noise scales must be positive".into());
        }
        for (name, p) in [("decoy_fraction", self.decoy_fraction), ("digest_fraction", self.digest_fraction)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} {p} outside [0, 1]"));
            }
        }
        let mix = self.sentiment_mix;
        if mix.iter().any(|p| !(*p >= 0.0)) || (mix.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad(format!("sentiment_mix {mix:?} is not a distribution"));
        }
        Ok(())
    }

    /// Weekdays from `start_date`.
    pub fn calendar(&self) -> TradingCalendar {
        let mut days = Vec::with_capacity(self.n_days);
        let mut d = self.start_date;
        while days.len() < self.n_days {
            if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
                days.push(d);
            }
            d = d.succ_opt().expect("date in range");
        }
        TradingCalendar::new(days).expect("increasing days")
    }

    pub fn ticker(i: usize) -> String {
        format!("S{:03}", i + 1)
    }

    /// Number of companies with planted causality.
    pub fn n_causal(&self) -> usize {
        (self.causal_fraction * self.n_companies as f64).round() as usize
    }

}

const NAME_HEADS: [&str; 25] = [
    "Alder", "Birch", "Cedar", "Dorran", "Elmont", "Fenwick", "Garrow", "Halden", "Istra", "Jorvik", "Kestrel",
    "Lomond", "Marlow", "Norcross", "Oakham", "Penrith", "Quarry", "Redfern", "Sutton", "Tamsin", "Ulverston",
    "Vantor", "Wexham", "Yarrow", "Zephyr",
];
const NAME_TAILS: [&str; 40] = [
    "Systems", "Holdings", "Energy", "Pharma", "Motors", "Foods", "Networks", "Capital", "Mining", "Retail",
    "Aerospace", "Logistics", "Chemicals", "Media", "Software", "Devices", "Telecom", "Insurance", "Textiles",
    "Robotics", "Shipping", "Steel", "Brewing", "Optics", "Biotech", "Paper", "Airlines", "Utilities", "Realty",
    "Semiconductors", "Gaming", "Apparel", "Tools", "Labs", "Instruments", "Materials", "Farms", "Water", "Rail",
    "Security",
];
const FILLER: [&str; 10] = [
    "shares", "in focus", "after the session", "analysts watch", "trading update", "today", "market note",
    "midday report", "investors react", "company update",
];

pub fn company_alias(i: usize) -> String {
    format!("{} {}", NAME_HEADS[i % NAME_HEADS.len()], NAME_TAILS[(i / NAME_HEADS.len()) % NAME_TAILS.len()])
}

/// Lexicon words usable in titles without a conflicting general-purpose valence.
fn headline_words(financial: &Lexicon, general: &Lexicon) -> (Vec<String>, Vec<String>) {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (w, v) in financial.entries() {
        if general.valence(w).is_some() {
            continue;
        }
        match v.signum() {
            1 => pos.push(w.clone()),
            -1 => neg.push(w.clone()),
            _ => {}
        }
    }
    (pos, neg)
}

/// Planted truth for one company.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompanyTruth {
    pub ticker: String,
    pub alias: String,
    pub causal: bool,
    pub n_articles: usize,
    pub n_decoys: usize,
    pub base_price: f64,
    pub base_volume: f64,
    /// Mean absolute value of the raw binned signal before scaling.
    pub signal_scale: f64,
    pub clicks_total: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub config: SynthConfig,
    pub companies: Vec<CompanyTruth>,
    pub n_digests: usize,
    /// Click totals of every company article, in article order; the sample
    /// the click law was drawn for.
    pub clicks_per_article: Vec<u64>,
    /// SHA-256 of each emitted input file.
    pub files: BTreeMap<String, String>,
}

impl GroundTruth {
    pub fn causal_tickers(&self) -> BTreeSet<String> {
        self.companies.iter().filter(|c| c.causal).map(|c| c.ticker.clone()).collect()
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub struct SynthDataset {
    pub calendar: TradingCalendar,
    pub market: MarketData,
    pub articles: Vec<NewsArticle>,
    pub clicks: ClickLog,
    pub lexicon: Lexicon,
    pub aliases: AliasTable,
    pub truth: GroundTruth,
}

struct CompanyDraw {
    truth: CompanyTruth,
    bars: Vec<MarketBar>,
    articles: Vec<NewsArticle>,
    clicks: Vec<ClickEvent>,
    click_totals: Vec<u64>,
    /// Scaled signal `X` per coupling bin.
    signal: Vec<f64>,
    /// Unit return noise per minute.
    noise: Vec<f64>,
}

/// Splits `k` items over slots with the given weights (sequential binomials);
/// `rest` is the weight of an overflow slot returned last.
fn multinomial<R: Rng + ?Sized>(rng: &mut R, k: u64, weights: &[f64], rest: f64) -> (Vec<u64>, u64) {
    let mut suffix = vec![0.0; weights.len() + 1];
    suffix[weights.len()] = rest;
    for j in (0..weights.len()).rev() {
        suffix[j] = suffix[j + 1] + weights[j];
    }
    let mut out = vec![0u64; weights.len()];
    let mut remaining = k;
    for (j, w) in weights.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        let p = (w / suffix[j]).clamp(0.0, 1.0);
        let n = if p >= 1.0 {
            remaining
        } else {
            Binomial::new(remaining, p).expect("valid binomial").sample(rng)
        };
        out[j] = n;
        remaining -= n;
    }
    (out, remaining)
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

struct Shared<'a> {
    cfg: &'a SynthConfig,
    cal: &'a TradingCalendar,
    pos_words: &'a [String],
    neg_words: &'a [String],
    causal: &'a BTreeSet<usize>,
    click_law: DiscretePowerLaw,
}

fn draw_company(sh: &Shared, idx: usize) -> CompanyDraw {
    let cfg = sh.cfg;
    let ticker = SynthConfig::ticker(idx);
    let alias = company_alias(idx);
    let n_min = sh.cal.n_minutes();
    let pattern = &cfg.intraday_pattern;
    let mean_pattern = pattern.iter().sum::<f64>() / pattern.len() as f64;
    let pattern_unit = |t: usize| pattern[t % SESSION_MINUTES] / mean_pattern;

    // articles
    let mut rng = substream(cfg.seed, &format!("{ticker}/articles"));
    let activity: f64 = LogNormal::new(0.0, 0.5).expect("lognormal").sample(&mut rng);
    let n_articles = ((cfg.articles_per_day * cfg.n_days as f64 * activity).round() as usize).max(1);
    let mut published: Vec<usize> = (0..n_articles).map(|_| rng.random_range(0..n_min)).collect();
    published.sort_unstable();
    let mut articles = Vec::with_capacity(n_articles);
    let mut signs = Vec::with_capacity(n_articles);
    let mut n_decoys = 0;
    for (k, &p) in published.iter().enumerate() {
        let u: f64 = rng.random();
        let (s, word) = if u < cfg.sentiment_mix[0] {
            (1i8, sh.pos_words.choose(&mut rng).cloned())
        } else if u < cfg.sentiment_mix[0] + cfg.sentiment_mix[1] {
            (-1, sh.neg_words.choose(&mut rng).cloned())
        } else {
            (0, None)
        };
        let filler = FILLER.choose(&mut rng).expect("filler");
        let title = match word {
            Some(w) => format!("{alias} {w} {filler}"),
            None => format!("{alias} {filler}"),
        };
        let mut tickers = BTreeSet::from([ticker.clone()]);
        if cfg.n_companies > 1 && rng.random::<f64>() < cfg.decoy_fraction {
            let mut other = rng.random_range(0..cfg.n_companies - 1);
            if other >= idx {
                other += 1;
            }
            tickers.insert(SynthConfig::ticker(other));
            n_decoys += 1;
        }
        let second: i64 = rng.random_range(0..60);
        let at = sh.cal.instant_fixed(p / SESSION_MINUTES, (p % SESSION_MINUTES) as u16) + Duration::seconds(second);
        articles.push(NewsArticle {
            article_id: format!("{ticker}-{k:05}"),
            published: at,
            title,
            first_paragraph: Some(format!("Coverage of {alias}.")),
            tickers,
        });
        signs.push(s);
    }

    // clicks on the trading clock
    let mut rng = substream(cfg.seed, &format!("{ticker}/clicks"));
    let mut minute_clicks = vec![0u64; n_min];
    let mut minute_signed = vec![0i64; n_min];
    let mut clicks = Vec::new();
    let mut click_totals = Vec::with_capacity(n_articles);
    let last_close = epoch_minute(&sh.cal.instant_fixed(sh.cal.n_days() - 1, (SESSION_MINUTES - 1) as u16)) + 1;
    let (tau_lo, tau_hi) = cfg.tau_range;
    for ((a, &p), &s) in articles.iter().zip(&published).zip(&signs) {
        let k = sh.click_law.sample(&mut rng);
        click_totals.push(k);
        let rank = 1.0 - sh.click_law.ccdf(k + 1);
        let tau = tau_lo + (tau_hi - tau_lo) * rank;
        let horizon = ((25.0 * tau) as usize).min(n_min - p);
        let weights: Vec<f64> = (0..horizon).map(|j| pattern_unit(p + j) * (-(j as f64) / tau).exp()).collect();
        let rest = if p + horizon >= n_min {
            (-(horizon as f64) / tau).exp() / (1.0 - (-1.0 / tau).exp())
        } else {
            0.0
        };
        let (counts, overflow) = multinomial(&mut rng, k, &weights, rest);
        let s = i64::from(s);
        for (j, c) in counts.iter().enumerate() {
            if *c == 0 {
                continue;
            }
            let t = p + j;
            minute_clicks[t] += c;
            minute_signed[t] += s * *c as i64;
            let at = sh.cal.instant_fixed(t / SESSION_MINUTES, (t % SESSION_MINUTES) as u16);
            clicks.push(ClickEvent {
                article_id: a.article_id.clone(),
                minute: epoch_minute(&at),
                clicks: *c,
            });
        }
        if overflow > 0 {
            // readers after the sample ends, outside any session
            let delay = 1 + Exp::new(1.0 / tau).expect("rate").sample(&mut rng) as i64;
            clicks.push(ClickEvent {
                article_id: a.article_id.clone(),
                minute: last_close + delay,
                clicks: overflow,
            });
        }
    }

    // planted signal, one value per coupling bin
    let w = cfg.coupling_scale.width();
    let raw: Vec<f64> = (0..n_min / w)
        .map(|k| {
            let bin = k * w..(k + 1) * w;
            let net: i64 = minute_signed[bin.clone()].iter().sum();
            let clicks: f64 = bin.map(|t| minute_clicks[t] as f64 / pattern_unit(t)).sum();
            sign(net as f64) * clicks
        })
        .collect();
    let scale = raw.iter().map(|x| x.abs()).sum::<f64>() / raw.len() as f64;
    let signal: Vec<f64> = if scale > 0.0 {
        raw.iter().map(|x| x / scale).collect()
    } else {
        vec![0.0; raw.len()]
    };

    // market
    let mut rng = substream(cfg.seed, &format!("{ticker}/market"));
    let base_price = 20.0 * 10f64.powf(rng.random_range(0.0..1.0));
    let base_volume = 2000.0 * LogNormal::new(0.0, 0.7).expect("lognormal").sample(&mut rng);
    let mut rng_noise = substream(cfg.seed, &format!("{ticker}/returns"));
    let noise: Vec<f64> = (0..n_min).map(|_| rng_noise.sample(StandardNormal)).collect();
    let causal = sh.causal.contains(&idx);
    let lag = cfg.causal_lag;
    let sv = cfg.noise_scales.volume;
    let vol_noise = LogNormal::new(-0.5 * sv * sv, sv).expect("lognormal");
    let mut log_p = base_price.log10();
    let mut bars = Vec::with_capacity(n_min);
    for t in 0..n_min {
        // spread evenly over the minutes of the bin `lag` bins later
        let k = t / w;
        let drive = if causal && k >= lag { cfg.causal_strength * signal[k - lag] / w as f64 } else { 0.0 };
        log_p += cfg.noise_scales.returns * pattern_unit(t) * (noise[t] + drive);
        let volume = (base_volume * pattern_unit(t) * vol_noise.sample(&mut rng)).round();
        bars.push(MarketBar {
            company: ticker.clone(),
            day: t / SESSION_MINUTES,
            minute: (t % SESSION_MINUTES) as u16,
            last_price: 10f64.powf(log_p),
            volume,
        });
    }

    let clicks_total = click_totals.iter().sum();
    CompanyDraw {
        truth: CompanyTruth {
            ticker,
            alias,
            causal,
            n_articles,
            n_decoys,
            base_price,
            base_volume,
            signal_scale: scale,
            clicks_total,
        },
        bars,
        articles,
        clicks,
        click_totals,
        signal,
        noise,
    }
}

fn causal_set(cfg: &SynthConfig) -> BTreeSet<usize> {
    let mut idx: Vec<usize> = (0..cfg.n_companies).collect();
    idx.shuffle(&mut substream(cfg.seed, "causal"));
    idx.into_iter().take(cfg.n_causal()).collect()
}

fn shared_parts(cfg: &SynthConfig) -> Result<(TradingCalendar, Vec<String>, Vec<String>, DiscretePowerLaw)> {
    cfg.validate()?;
    let (pos, neg) = headline_words(&Lexicon::demo_financial(), &Lexicon::demo_general());
    Ok((cfg.calendar(), pos, neg, DiscretePowerLaw::new(cfg.click_alpha, cfg.click_xmin)?))
}

fn draw_all(cfg: &SynthConfig, causal: &BTreeSet<usize>) -> Result<(TradingCalendar, Vec<CompanyDraw>)> {
    let (cal, pos, neg, click_law) = shared_parts(cfg)?;
    let sh = Shared {
        cfg,
        cal: &cal,
        pos_words: &pos,
        neg_words: &neg,
        causal,
        click_law,
    };
    let draws = (0..cfg.n_companies).into_par_iter().map(|i| draw_company(&sh, i)).collect();
    Ok((cal, draws))
}

/// Builds the full dataset in memory.
pub fn generate(cfg: &SynthConfig) -> Result<SynthDataset> {
    let causal = causal_set(cfg);
    let (cal, draws) = draw_all(cfg, &causal)?;

    let mut bars = Vec::with_capacity(draws.iter().map(|d| d.bars.len()).sum());
    let mut articles = Vec::new();
    let mut events = Vec::new();
    let mut companies = Vec::new();
    let mut clicks_per_article = Vec::new();
    for d in draws {
        bars.extend(d.bars);
        articles.extend(d.articles);
        events.extend(d.clicks);
        clicks_per_article.extend(d.click_totals);
        companies.push(d.truth);
    }

    // digests tagged with many companies; ingest drops them
    let mut rng = substream(cfg.seed, "digests");
    let n_digests = (cfg.digest_fraction * articles.len() as f64).round() as usize;
    let n_min = cal.n_minutes();
    for k in 0..n_digests {
        let n_tags = 5.min(cfg.n_companies);
        let tickers: BTreeSet<String> = (0..cfg.n_companies)
            .collect::<Vec<_>>()
            .choose_multiple(&mut rng, n_tags)
            .map(|i| SynthConfig::ticker(*i))
            .collect();
        let p = rng.random_range(0..n_min);
        let at = cal.instant_fixed(p / SESSION_MINUTES, (p % SESSION_MINUTES) as u16);
        let id = format!("D{k:05}");
        events.push(ClickEvent {
            article_id: id.clone(),
            minute: epoch_minute(&at),
            clicks: rng.random_range(1..100),
        });
        articles.push(NewsArticle {
            article_id: id,
            published: at,
            title: "Market digest: movers of the day".into(),
            first_paragraph: None,
            tickers,
        });
    }

    let aliases = AliasTable::new(
        companies
            .iter()
            .map(|c| (c.ticker.clone(), vec![c.alias.clone()]))
            .collect(),
    );
    Ok(SynthDataset {
        market: MarketData {
            bars,
            dropped_out_of_session: 0,
        },
        articles,
        clicks: ClickLog::from_events(events),
        lexicon: Lexicon::demo_financial(),
        aliases,
        truth: GroundTruth {
            config: cfg.clone(),
            companies,
            n_digests,
            clicks_per_article,
            files: BTreeMap::new(),
        },
        calendar: cal,
    })
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

#[derive(Serialize)]
struct NewsLine<'a> {
    article_id: &'a str,
    published: String,
    title: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    first_paragraph: Option<&'a str>,
    tickers: Vec<&'a str>,
}

impl SynthDataset {
    /// Writes the ingest inputs and `ground_truth.json` into `dir`; returns
    /// the truth with file digests filled in.
    pub fn write(&self, dir: &Path) -> Result<GroundTruth> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let io = |p: &Path| {
            let p = p.to_path_buf();
            move |e: std::io::Error| Error::io(p, e)
        };

        let path = dir.join(MARKET_FILE);
        let mut w = create(&path)?;
        writeln!(w, "ticker,timestamp,last_price,volume").map_err(io(&path))?;
        let opens: Vec<_> = (0..self.calendar.n_days()).map(|d| self.calendar.instant_fixed(d, 0)).collect();
        for b in &self.market.bars {
            let at = opens[b.day] + Duration::minutes(i64::from(b.minute));
            writeln!(w, "{},{},{},{}", b.company, at.to_rfc3339(), b.last_price, b.volume).map_err(io(&path))?;
        }
        w.flush().map_err(io(&path))?;

        let path = dir.join(CLICKS_FILE);
        let mut w = create(&path)?;
        writeln!(w, "article_id,timestamp,clicks").map_err(io(&path))?;
        for e in &self.clicks.events {
            let at = crate::ingest::minute_instant(e.minute).with_timezone(&crate::calendar::EXCHANGE_TZ);
            writeln!(w, "{},{},{}", e.article_id, at.to_rfc3339(), e.clicks).map_err(io(&path))?;
        }
        w.flush().map_err(io(&path))?;

        let path = dir.join(NEWS_FILE);
        let mut w = create(&path)?;
        for a in &self.articles {
            let line = NewsLine {
                article_id: &a.article_id,
                published: a.published.to_rfc3339(),
                title: &a.title,
                first_paragraph: a.first_paragraph.as_deref(),
                tickers: a.tickers.iter().map(String::as_str).collect(),
            };
            serde_json::to_writer(&mut w, &line)?;
            writeln!(w).map_err(io(&path))?;
        }
        w.flush().map_err(io(&path))?;

        let text_files = [
            (LEXICON_FILE, self.lexicon.to_csv()),
            (ALIASES_FILE, self.aliases.to_csv()),
            (CALENDAR_FILE, self.calendar.to_text()),
        ];
        for (name, text) in &text_files {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(io(&path))?;
        }

        let mut truth = self.truth.clone();
        for name in [MARKET_FILE, CLICKS_FILE, NEWS_FILE, LEXICON_FILE, ALIASES_FILE, CALENDAR_FILE] {
            truth.files.insert(name.to_string(), sha256_file(&dir.join(name))?);
        }
        let path = dir.join(TRUTH_FILE);
        std::fs::write(&path, serde_json::to_string_pretty(&truth)? + "\n").map_err(io(&path))?;
        Ok(truth)
    }
}

/// Binned signal and noise of every company, for predicting how often a
/// coupling of a given strength is detectable.
pub struct CausalOracle {
    companies: Vec<(Vec<f64>, Vec<f64>)>,
    lag: usize,
    level: f64,
}

impl CausalOracle {
    /// Draws every company as if it were causal, binned at `coupling_scale`.
    pub fn new(cfg: &SynthConfig, level: f64) -> Result<Self> {
        let none = BTreeSet::new();
        let (_, draws) = draw_all(cfg, &none)?;
        let w = cfg.coupling_scale.width();
        let bin = |v: &[f64]| -> Vec<f64> { v.chunks_exact(w).map(|c| c.iter().sum()).collect() };
        Ok(Self {
            companies: draws.iter().map(|d| (d.signal.clone(), bin(&d.noise))).collect(),
            lag: cfg.causal_lag,
            level,
        })
    }

    /// Fraction of companies whose binned returns, with the coupling at
    /// `strength`, reject "signal does not Granger-cause returns".
    /// Binned planted signal and unit return noise per company.
    pub fn signals(&self) -> &[(Vec<f64>, Vec<f64>)] {
        &self.companies
    }

    pub fn power(&self, strength: f64) -> f64 {
        let hits = self
            .companies
            .par_iter()
            .filter(|(x, e)| {
                let r: Vec<f64> = (0..e.len())
                    .map(|k| e[k] + if k >= self.lag { strength * x[k - self.lag] } else { 0.0 })
                    .collect();
                granger(x, &r, self.lag).map(|g| g.p_value < self.level).unwrap_or(false)
            })
            .count();
        hits as f64 / self.companies.len() as f64
    }
}

pub fn oracle_power(cfg: &SynthConfig, strength: f64, level: f64) -> Result<f64> {
    Ok(CausalOracle::new(cfg, level)?.power(strength))
}

/// Smallest strength (to 1% relative) at which the oracle's power reaches `target`.
pub fn tune_causal_strength(cfg: &SynthConfig, target: f64, level: f64) -> Result<f64> {
    let oracle = CausalOracle::new(cfg, level)?;
    let mut hi = 0.01;
    while oracle.power(hi) < target {
        hi *= 2.0;
        if hi > 1e3 {
            return Err(Error::FitFailure(format!("power {target} unreachable")));
        }
    }
    let mut lo = 0.0;
    while hi - lo > 0.01 * hi {
        let mid = 0.5 * (lo + hi);
        if oracle.power(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Articles whose clicks arrive after exponential wall-clock delays, with the
/// delay scale rising linearly with the article's click-total rank.
pub struct AttentionCohort {
    pub articles: Vec<NewsArticle>,
    pub clicks: ClickLog,
    /// Planted time scale per article, in article order.
    pub taus: Vec<f64>,
}

pub fn attention_cohort(
    n_articles: usize,
    tau_range: (f64, f64),
    click_law: DiscretePowerLaw,
    seed: u64,
) -> AttentionCohort {
    let mut rng = substream(seed, "attention");
    let origin = NaiveDate::from_ymd_opt(2013, 1, 7)
        .expect("date")
        .and_hms_opt(14, 30, 0)
        .expect("time")
        .and_utc()
        .fixed_offset();
    let totals: Vec<u64> = (0..n_articles).map(|_| click_law.sample(&mut rng).min(1_000_000)).collect();
    let mut order: Vec<usize> = (0..n_articles).collect();
    order.sort_by_key(|&i| (totals[i], i));
    let mut rank = vec![0.0; n_articles];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r as f64 / (n_articles.max(2) - 1) as f64;
    }
    let week = crate::attention::WEEK_MINUTES as usize;
    let mut articles = Vec::with_capacity(n_articles);
    let mut events = Vec::new();
    let mut taus = Vec::with_capacity(n_articles);
    for i in 0..n_articles {
        let tau = tau_range.0 + (tau_range.1 - tau_range.0) * rank[i];
        let published = origin + Duration::minutes(rng.random_range(0..5 * 1440));
        let id = format!("A{i:06}");
        let q = (-1.0 / tau).exp();
        let weights: Vec<f64> = (0..=week).map(|j| q.powi(j as i32)).collect();
        let rest = q.powi(week as i32 + 1) / (1.0 - q);
        let (counts, overflow) = multinomial(&mut rng, totals[i], &weights, rest);
        let base = epoch_minute(&published);
        for (j, c) in counts.iter().enumerate() {
            if *c > 0 {
                events.push(ClickEvent {
                    article_id: id.clone(),
                    minute: base + j as i64,
                    clicks: *c,
                });
            }
        }
        if overflow > 0 {
            events.push(ClickEvent {
                article_id: id.clone(),
                minute: base + week as i64 + 1,
                clicks: overflow,
            });
        }
        articles.push(NewsArticle {
            article_id: id,
            published,
            title: "cohort article".into(),
            first_paragraph: None,
            tickers: BTreeSet::new(),
        });
        taus.push(tau);
    }
    AttentionCohort {
        articles,
        clicks: ClickLog::from_events(events),
        taus,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{filter_tags, TagOutcome};
    use crate::sentiment::{score_title, tokenize};
    use crate::series::seasonal_profile_volume;
    use crate::tails::{fit_tail, TailOptions};

    fn small() -> SynthConfig {
        SynthConfig {
            n_companies: 4,
            n_days: 5,
            seed: 3,
            ..Default::default()
        }
    }

    #[test]
    fn validation() {
        assert!(SynthConfig::default().validate().is_ok());
        let bad = [
            SynthConfig {
                causal_fraction: 1.5,
                ..small()
            },
            SynthConfig {
                intraday_pattern: vec![1.0; 10],
                ..small()
            },
            SynthConfig {
                intraday_pattern: {
                    let mut p = default_pattern();
                    p[5] = 0.0;
                    p
                },
                ..small()
            },
            SynthConfig {
                n_companies: 0,
                ..small()
            },
            SynthConfig {
                sentiment_mix: [0.5, 0.5, 0.5],
                ..small()
            },
        ];
        for cfg in bad {
            assert!(generate(&cfg).is_err());
        }
    }

    #[test]
    fn calendar_skips_weekends() {
        let cal = small().calendar();
        assert_eq!(cal.n_days(), 5);
        assert!(cal.days().iter().all(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun)));
    }

    #[test]
    fn headline_vocabulary_is_clean() {
        let fin = Lexicon::demo_financial();
        let gen = Lexicon::demo_general();
        for f in FILLER {
            for tok in tokenize(f) {
                assert!(fin.valence(&tok).is_none() && gen.valence(&tok).is_none(), "{tok}");
            }
        }
        for i in 0..999 {
            for tok in tokenize(&company_alias(i)) {
                assert!(fin.valence(&tok).is_none() && gen.valence(&tok).is_none(), "{tok}");
            }
        }
        let aliases: BTreeSet<String> = (0..999).map(company_alias).collect();
        assert_eq!(aliases.len(), 999);
    }

    #[test]
    fn deterministic_per_seed() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let a = generate(&small()).unwrap().write(dir_a.path()).unwrap();
        let b = generate(&small()).unwrap().write(dir_b.path()).unwrap();
        assert_eq!(a.files, b.files);
        let c = generate(&SynthConfig { seed: 4, ..small() }).unwrap().write(dir_b.path()).unwrap();
        assert_ne!(a.files[MARKET_FILE], c.files[MARKET_FILE]);
    }

    #[test]
    fn company_draws_do_not_depend_on_cohort_size() {
        let a = generate(&small()).unwrap();
        let b = generate(&SynthConfig { n_companies: 6, ..small() }).unwrap();
        let s001 = |d: &SynthDataset| -> Vec<f64> {
            d.market.bars.iter().filter(|b| b.company == "S001").map(|b| b.last_price).collect()
        };
        assert_eq!(s001(&a), s001(&b));
    }

    #[test]
    fn titles_score_as_planted_and_tags_filter() {
        let d = generate(&SynthConfig {
            decoy_fraction: 0.3,
            ..small()
        })
        .unwrap();
        let mut decoys = 0;
        let mut digests = 0;
        for a in &d.articles {
            match filter_tags(a, &d.aliases, 4) {
                TagOutcome::Kept(k) => {
                    assert_eq!(k.tickers.len(), 1, "{}", a.title);
                    if a.tickers.len() > 1 {
                        decoys += 1;
                    }
                    let owner = &a.article_id[..4];
                    assert!(k.tickers.contains(owner));
                }
                TagOutcome::Rejected(_) => digests += 1,
            }
            let s = score_title(&a.title, &d.lexicon);
            assert!(s.pos_hits + s.neg_hits <= 1);
        }
        assert_eq!(decoys, d.truth.companies.iter().map(|c| c.n_decoys).sum::<usize>());
        assert_eq!(digests, d.truth.n_digests);
    }

    #[test]
    fn causal_count_is_exact() {
        let cfg = SynthConfig {
            n_companies: 10,
            causal_fraction: 0.5,
            ..small()
        };
        let d = generate(&cfg).unwrap();
        assert_eq!(d.truth.causal_tickers().len(), 5);
    }

    #[test]
    fn clicks_follow_the_planted_law() {
        let cfg = SynthConfig {
            n_companies: 30,
            n_days: 20,
            articles_per_day: 5.0,
            ..small()
        };
        let d = generate(&cfg).unwrap();
        let fit = fit_tail(
            &d.truth.clicks_per_article,
            &TailOptions {
                bootstrap: 50,
                seed: 2,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((fit.alpha - cfg.click_alpha).abs() < 3.0 * fit.se_alpha + 0.05, "{fit:?}");
        assert!(fit.x_min_ci[0] <= cfg.click_xmin * 2, "{fit:?}");
        // every click drawn lands in the log
        let total: u64 = d.truth.clicks_per_article.iter().sum();
        let logged: u64 = d.clicks.events.iter().filter(|e| !e.article_id.starts_with('D')).map(|e| e.clicks).sum();
        assert_eq!(total, logged);
    }

    #[test]
    fn volume_profile_recovers_pattern() {
        let cfg = SynthConfig {
            n_companies: 1,
            n_days: 60,
            ..small()
        };
        let d = generate(&cfg).unwrap();
        let raw: Vec<f64> = d.market.bars.iter().map(|b| b.volume).collect();
        let p = seasonal_profile_volume(&raw).unwrap();
        let total: f64 = cfg.intraday_pattern.iter().sum();
        // mean relative error over the day
        let err: f64 = p
            .zeta
            .iter()
            .zip(&cfg.intraday_pattern)
            .map(|(z, b)| (z - b / total).abs() / (b / total))
            .sum::<f64>()
            / SESSION_MINUTES as f64;
        assert!(err < 0.1, "mean relative error {err}");
    }

    #[test]
    fn oracle_power_grows_with_strength() {
        let cfg = SynthConfig {
            n_companies: 20,
            n_days: 30,
            ..small()
        };
        let oracle = CausalOracle::new(&cfg, 0.05).unwrap();
        let p0 = oracle.power(0.0);
        let p1 = oracle.power(1.0);
        assert!(p0 <= 0.25, "{p0}");
        assert!(p1 >= 0.9, "{p1}");
    }

    #[test]
    fn cohort_taus_rise_with_totals() {
        let c = attention_cohort(200, (30.0, 120.0), DiscretePowerLaw::new(1.2, 20).unwrap(), 5);
        let totals = c.clicks.by_article();
        let mut pairs: Vec<(u64, f64)> = c
            .articles
            .iter()
            .zip(&c.taus)
            .map(|(a, t)| (totals[a.article_id.as_str()].iter().map(|e| e.clicks).sum(), *t))
            .collect();
        pairs.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        for w in pairs.windows(2) {
            assert!(w[1].1 >= w[0].1);
        }
    }
}
