use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::{DateTime, FixedOffset};
use newsflow_core::calendar::TradingCalendar;
use newsflow_core::ingest::{
    parse_clicks, parse_market, parse_news, AliasTable, ClickEvent, ClickLog, MarketBar, MarketData, NewsArticle,
    RejectReason, TagOutcome, filter_tags, minute_instant,
};
use newsflow_core::sentiment::{merge_lexicons, score_title, Lexicon, Provenance};
use newsflow_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::output::{sha256_file, OutputSet};

pub const SUMMARY_FILE: &str = "ingest_summary.json";
const CACHE_CALENDAR: &str = "trading_days.txt";
const CACHE_MARKET: &str = "market.csv";
const CACHE_ARTICLES: &str = "articles.csv";
const CACHE_CLICKS: &str = "clicks.csv";

/// Raw inputs after parsing, before tag filtering.
pub struct Inputs {
    pub calendar: TradingCalendar,
    pub market: MarketData,
    pub news: Vec<NewsArticle>,
    pub clicks: ClickLog,
    pub aliases: AliasTable,
    pub lexicon: Lexicon,
}

/// One surviving (article, company) tag with the headline sign.
#[derive(Clone, Debug, PartialEq)]
pub struct CachedArticle {
    pub article_id: String,
    pub company: String,
    pub published: DateTime<FixedOffset>,
    pub sign: i8,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    /// SHA-256 of each input, keyed by role (`market`, `clicks`, ...).
    pub inputs: BTreeMap<String, String>,
    pub lexicon: String,
    pub lexicon_entries: usize,
    pub trading_days: usize,
    pub companies: usize,
    pub bars: usize,
    pub bars_out_of_session: usize,
    pub articles: usize,
    pub articles_kept: usize,
    pub rejected_too_many_tags: usize,
    pub rejected_no_mention: usize,
    pub company_tags: usize,
    /// Tags naming a ticker that has no market data.
    pub tags_without_market: usize,
    pub positive: usize,
    pub negative: usize,
    pub neutral: usize,
    pub click_rows: usize,
    pub click_rows_unknown_article: usize,
    pub click_rows_rejected_article: usize,
    pub click_rows_out_of_session: usize,
    pub clicks_kept: u64,
    /// SHA-256 of each cache file.
    pub cache: BTreeMap<String, String>,
}

pub struct Prepared {
    pub calendar: TradingCalendar,
    pub market: MarketData,
    /// Sorted by `(company, published, article_id)`.
    pub articles: Vec<CachedArticle>,
    /// Click rows of kept articles only.
    pub clicks: ClickLog,
    pub summary: IngestSummary,
}

impl Prepared {
    /// Kept articles of one company.
    pub fn company_articles(&self, company: &str) -> &[CachedArticle] {
        let start = self.articles.partition_point(|a| a.company.as_str() < company);
        let end = self.articles.partition_point(|a| a.company.as_str() <= company);
        &self.articles[start..end]
    }
}

pub fn load_lexicon(paths: &[PathBuf]) -> Result<Lexicon> {
    match paths {
        [] => Ok(Lexicon::demo_financial()),
        [one] => Lexicon::from_file(one, Provenance::Financial),
        [general, financial] => Ok(merge_lexicons(
            &Lexicon::from_file(general, Provenance::General)?,
            &Lexicon::from_file(financial, Provenance::Financial)?,
        )),
        _ => Err(Error::Config("at most two lexicons".into())),
    }
}

/// Parses every input named in the config.
pub fn read_inputs(cfg: &RunConfig) -> Result<(Inputs, BTreeMap<String, String>)> {
    let calendar = TradingCalendar::from_file(&cfg.calendar)?;
    let market = parse_market(&cfg.market, &calendar)?;
    let news = parse_news(&cfg.news)?;
    let clicks = parse_clicks(&cfg.clicks)?;
    let aliases = match &cfg.aliases {
        Some(p) => AliasTable::from_file(p)?,
        None => AliasTable::default(),
    };
    let lexicon = load_lexicon(&cfg.lexicons)?;

    let mut digests = BTreeMap::new();
    for (role, path) in [
        ("calendar", &cfg.calendar),
        ("market", &cfg.market),
        ("news", &cfg.news),
        ("clicks", &cfg.clicks),
    ] {
        digests.insert(role.to_string(), sha256_file(path)?);
    }
    if let Some(p) = &cfg.aliases {
        digests.insert("aliases".into(), sha256_file(p)?);
    }
    for (i, p) in cfg.lexicons.iter().enumerate() {
        digests.insert(format!("lexicon{i}"), sha256_file(p)?);
    }
    Ok((
        Inputs {
            calendar,
            market,
            news,
            clicks,
            aliases,
            lexicon,
        },
        digests,
    ))
}

/// Filters tags, signs headlines and keeps the click rows of surviving articles.
pub fn prepare(inputs: Inputs, max_tags: usize) -> Prepared {
    let Inputs {
        calendar,
        market,
        news,
        clicks,
        aliases,
        lexicon,
    } = inputs;
    let companies: BTreeSet<String> = market.companies().into_iter().collect();
    let mut s = IngestSummary {
        lexicon: lexicon.provenance().to_string(),
        lexicon_entries: lexicon.len(),
        trading_days: calendar.n_days(),
        companies: companies.len(),
        bars: market.bars.len(),
        bars_out_of_session: market.dropped_out_of_session,
        articles: news.len(),
        click_rows: clicks.events.len(),
        ..Default::default()
    };

    let mut articles = Vec::new();
    let mut kept_ids = BTreeSet::new();
    let mut rejected_ids = BTreeSet::new();
    for a in &news {
        match filter_tags(a, &aliases, max_tags) {
            TagOutcome::Kept(k) => {
                let sign = score_title(&k.title, &lexicon).sign;
                match sign {
                    1 => s.positive += 1,
                    -1 => s.negative += 1,
                    _ => s.neutral += 1,
                }
                for t in &k.tickers {
                    if companies.contains(t) {
                        articles.push(CachedArticle {
                            article_id: k.article_id.clone(),
                            company: t.clone(),
                            published: k.published,
                            sign,
                        });
                    } else {
                        s.tags_without_market += 1;
                    }
                }
                kept_ids.insert(k.article_id.as_str().to_owned());
            }
            TagOutcome::Rejected(reason) => {
                match reason {
                    RejectReason::TooManyTags(_) => s.rejected_too_many_tags += 1,
                    RejectReason::NoMention => s.rejected_no_mention += 1,
                }
                rejected_ids.insert(a.article_id.as_str());
            }
        }
    }
    s.articles_kept = kept_ids.len();
    s.company_tags = articles.len();
    articles.sort_by(|a, b| (&a.company, a.published, &a.article_id).cmp(&(&b.company, b.published, &b.article_id)));

    let mut kept_events: Vec<ClickEvent> = Vec::new();
    for e in &clicks.events {
        if kept_ids.contains(e.article_id.as_str()) {
            if calendar.minute_index(&minute_instant(e.minute)).is_none() {
                s.click_rows_out_of_session += 1;
            }
            s.clicks_kept += e.clicks;
            kept_events.push(e.clone());
        } else if rejected_ids.contains(e.article_id.as_str()) {
            s.click_rows_rejected_article += 1;
        } else {
            s.click_rows_unknown_article += 1;
        }
    }

    Prepared {
        calendar,
        market,
        articles,
        clicks: ClickLog { events: kept_events },
        summary: s,
    }
}

/// Parses the inputs, normalizes them and writes the cache under `<out>/cache`.
pub fn cmd_ingest(cfg: &RunConfig) -> Result<IngestSummary> {
    cfg.validate()?;
    let (inputs, digests) = read_inputs(cfg)?;
    let mut prepared = prepare(inputs, cfg.max_tags);
    prepared.summary.inputs = digests;
    write_cache(&mut prepared, &cfg.cache_dir())?;
    Ok(prepared.summary)
}

pub fn write_cache(p: &mut Prepared, dir: &Path) -> Result<()> {
    let mut out = OutputSet::new(dir)?;
    out.write(CACHE_CALENDAR, p.calendar.to_text().as_bytes())?;

    let mut text = String::from("ticker,day,minute,last_price,volume\n");
    for b in &p.market.bars {
        writeln!(text, "{},{},{},{},{}", b.company, b.day, b.minute, b.last_price, b.volume).expect("string write");
    }
    out.write(CACHE_MARKET, text.as_bytes())?;

    let mut text = String::from("article_id,company,published,sign\n");
    for a in &p.articles {
        writeln!(text, "{},{},{},{}", a.article_id, a.company, a.published.to_rfc3339(), a.sign).expect("string write");
    }
    out.write(CACHE_ARTICLES, text.as_bytes())?;

    let mut text = String::from("article_id,minute,clicks\n");
    for e in &p.clicks.events {
        writeln!(text, "{},{},{}", e.article_id, e.minute, e.clicks).expect("string write");
    }
    out.write(CACHE_CLICKS, text.as_bytes())?;

    p.summary.cache = out.digests().clone();
    let json = serde_json::to_string_pretty(&p.summary)? + "\n";
    out.write(SUMMARY_FILE, json.as_bytes())?;
    Ok(())
}

fn reader(dir: &Path, name: &str) -> Result<(PathBuf, csv::Reader<std::fs::File>)> {
    let path = dir.join(name);
    let r = csv::Reader::from_path(&path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    Ok((path, r))
}

fn field<T: std::str::FromStr>(path: &Path, rec: &csv::StringRecord, i: usize) -> Result<T> {
    let line = rec.position().map_or(0, |p| p.line());
    rec.get(i)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Parse {
            file: path.to_path_buf(),
            line,
            msg: format!("bad field {i}"),
        })
}

/// Reads a cache written by [`write_cache`], checking its digests.
pub fn load_cache(dir: &Path) -> Result<Prepared> {
    let summary_path = dir.join(SUMMARY_FILE);
    let text = std::fs::read_to_string(&summary_path).map_err(|_| {
        Error::Config(format!("no cache at {}; run `newsflow ingest` first", dir.display()))
    })?;
    let summary: IngestSummary = serde_json::from_str(&text)?;
    for (name, digest) in &summary.cache {
        if &sha256_file(&dir.join(name))? != digest {
            return Err(Error::Mismatch(format!("cache file {name} changed since ingest")));
        }
    }
    let calendar = TradingCalendar::from_file(dir.join(CACHE_CALENDAR))?;

    let (path, mut r) = reader(dir, CACHE_MARKET)?;
    let mut bars = Vec::with_capacity(summary.bars);
    for rec in r.records() {
        let rec = rec?;
        bars.push(MarketBar {
            company: field(&path, &rec, 0)?,
            day: field(&path, &rec, 1)?,
            minute: field(&path, &rec, 2)?,
            last_price: field(&path, &rec, 3)?,
            volume: field(&path, &rec, 4)?,
        });
    }

    let (path, mut r) = reader(dir, CACHE_ARTICLES)?;
    let mut articles = Vec::with_capacity(summary.company_tags);
    for rec in r.records() {
        let rec = rec?;
        let published: String = field(&path, &rec, 2)?;
        articles.push(CachedArticle {
            article_id: field(&path, &rec, 0)?,
            company: field(&path, &rec, 1)?,
            published: DateTime::parse_from_rfc3339(&published).map_err(|e| Error::Parse {
                file: path.clone(),
                line: rec.position().map_or(0, |p| p.line()),
                msg: e.to_string(),
            })?,
            sign: field(&path, &rec, 3)?,
        });
    }

    let (path, mut r) = reader(dir, CACHE_CLICKS)?;
    let mut events = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        events.push(ClickEvent {
            article_id: field(&path, &rec, 0)?,
            minute: field(&path, &rec, 1)?,
            clicks: field(&path, &rec, 2)?,
        });
    }

    Ok(Prepared {
        calendar,
        market: MarketData {
            bars,
            dropped_out_of_session: summary.bars_out_of_session,
        },
        articles,
        clicks: ClickLog { events },
        summary,
    })
}
