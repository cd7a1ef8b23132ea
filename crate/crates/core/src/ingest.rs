//! Raw input parsing and article-to-company attribution.
//!
//! Input formats:
//!
//! * market CSV `ticker,timestamp,last_price,volume` (header required)
//! * clicks CSV `article_id,timestamp,clicks` (header required)
//! * news JSONL with `article_id`, `published`, `title`, `first_paragraph`, `tickers`
//! * alias CSV `ticker,alias1|alias2|...`
//!
//! Timestamps are RFC 3339 with an explicit offset.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use chrono::{DateTime, FixedOffset};
use serde::{Deserialize, Serialize};

use crate::calendar::{GridPoint, TradingCalendar};
use crate::error::{Error, Result};
use crate::sentiment::tokenize;

/// Articles tagged with more companies than this are dropped.
pub const DEFAULT_MAX_TAGS: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarketBar {
    pub company: String,
    pub day: usize,
    pub minute: u16,
    pub last_price: f64,
    pub volume: f64,
}

impl MarketBar {
    pub fn point(&self) -> GridPoint {
        GridPoint {
            day: self.day,
            minute: self.minute,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MarketData {
    /// Sorted by `(company, day, minute)`, unique on that key.
    pub bars: Vec<MarketBar>,
    pub dropped_out_of_session: usize,
}

impl MarketData {
    /// Distinct tickers in sorted order.
    pub fn companies(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for b in &self.bars {
            if out.last() != Some(&b.company) {
                out.push(b.company.clone());
            }
        }
        out
    }

    /// The contiguous run of bars belonging to `company`.
    pub fn company_bars(&self, company: &str) -> &[MarketBar] {
        let start = self.bars.partition_point(|b| b.company.as_str() < company);
        let end = self.bars.partition_point(|b| b.company.as_str() <= company);
        &self.bars[start..end]
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn parse_instant(s: &str) -> std::result::Result<DateTime<FixedOffset>, String> {
    DateTime::parse_from_rfc3339(s.trim()).map_err(|e| format!("bad timestamp {s:?}: {e}"))
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader)
}

fn check_header<R: Read>(
    rdr: &mut csv::Reader<R>,
    origin: &Path,
    expected: &[&[&str]],
) -> Result<()> {
    let header = rdr
        .headers()
        .map_err(|e| Error::parse(origin, 1, e.to_string()))?
        .clone();
    let ok = header.len() == expected.len()
        && header
            .iter()
            .zip(expected)
            .all(|(h, names)| names.iter().any(|n| h.eq_ignore_ascii_case(n)));
    if !ok {
        let want: Vec<&str> = expected.iter().map(|n| n[0]).collect();
        return Err(Error::parse(
            origin,
            1,
            format!("expected header `{}`, found `{}`", want.join(","), header.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    Ok(())
}

fn record_line(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

pub fn parse_market(path: impl AsRef<Path>, cal: &TradingCalendar) -> Result<MarketData> {
    let path = path.as_ref();
    parse_market_reader(BufReader::new(open(path)?), path, cal)
}

pub fn parse_market_reader<R: Read>(reader: R, origin: &Path, cal: &TradingCalendar) -> Result<MarketData> {
    let mut rdr = csv_reader(reader);
    check_header(
        &mut rdr,
        origin,
        &[&["ticker"], &["timestamp", "timestamp_iso8601"], &["last_price"], &["volume"]],
    )?;
    let mut out = MarketData::default();
    let mut rec = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut rec) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                return Err(Error::parse(origin, line, e.to_string()));
            }
        }
        let line = record_line(&rec);
        let bad = |msg: String| Error::parse(origin, line, msg);
        if rec.len() != 4 {
            return Err(bad(format!("expected 4 fields, found {}", rec.len())));
        }
        let company = &rec[0];
        if company.is_empty() {
            return Err(bad("empty ticker".into()));
        }
        let at = parse_instant(&rec[1]).map_err(bad)?;
        let last_price: f64 = rec[2]
            .parse()
            .map_err(|_| bad(format!("bad price {:?}", &rec[2])))?;
        if !(last_price.is_finite() && last_price > 0.0) {
            return Err(bad(format!("price must be positive, got {last_price}")));
        }
        let volume: f64 = rec[3]
            .parse()
            .map_err(|_| bad(format!("bad volume {:?}", &rec[3])))?;
        if !(volume.is_finite() && volume >= 0.0) {
            return Err(bad(format!("volume must be non-negative, got {volume}")));
        }
        match cal.minute_index(&at) {
            Some(p) => out.bars.push(MarketBar {
                company: company.to_string(),
                day: p.day,
                minute: p.minute,
                last_price,
                volume,
            }),
            None => out.dropped_out_of_session += 1,
        }
    }
    out.bars
        .sort_by(|a, b| (&a.company, a.day, a.minute).cmp(&(&b.company, b.day, b.minute)));
    if let Some(w) = out
        .bars
        .windows(2)
        .find(|w| w[0].company == w[1].company && w[0].point() == w[1].point())
    {
        return Err(Error::Data(format!(
            "{}: duplicate bar for {} on day {} minute {}",
            origin.display(),
            w[0].company,
            w[0].day,
            w[0].minute
        )));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewsArticle {
    pub article_id: String,
    pub published: DateTime<FixedOffset>,
    pub title: String,
    pub first_paragraph: Option<String>,
    pub tickers: BTreeSet<String>,
}

#[derive(Deserialize)]
struct RawArticle {
    article_id: String,
    published: String,
    title: String,
    #[serde(default)]
    first_paragraph: Option<String>,
    tickers: Vec<String>,
}

pub fn parse_news(path: impl AsRef<Path>) -> Result<Vec<NewsArticle>> {
    let path = path.as_ref();
    parse_news_reader(BufReader::new(open(path)?), path)
}

pub fn parse_news_reader<R: BufRead>(reader: R, origin: &Path) -> Result<Vec<NewsArticle>> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawArticle =
            serde_json::from_str(&line).map_err(|e| Error::parse(origin, line_no, e.to_string()))?;
        let published = parse_instant(&raw.published).map_err(|m| Error::parse(origin, line_no, m))?;
        if !seen.insert(raw.article_id.clone()) {
            return Err(Error::parse(
                origin,
                line_no,
                format!("duplicate article_id {:?}", raw.article_id),
            ));
        }
        out.push(NewsArticle {
            article_id: raw.article_id,
            published,
            title: raw.title,
            first_paragraph: raw.first_paragraph,
            tickers: raw.tickers.into_iter().collect(),
        });
    }
    Ok(out)
}

/// Clicks on one article during one wall-clock minute.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClickEvent {
    pub article_id: String,
    /// Minutes since the Unix epoch, floored.
    pub minute: i64,
    pub clicks: u64,
}

/// Click log aggregated to wall-clock minutes, sorted by `(article_id, minute)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ClickLog {
    pub events: Vec<ClickEvent>,
}

impl ClickLog {
    /// Builds a log from arbitrary rows: sums clicks sharing an
    /// `(article_id, minute)` key and drops zero totals.
    pub fn from_events(mut events: Vec<ClickEvent>) -> Self {
        events.sort_by(|a, b| (&a.article_id, a.minute).cmp(&(&b.article_id, b.minute)));
        let mut out: Vec<ClickEvent> = Vec::with_capacity(events.len());
        for e in events {
            match out.last_mut() {
                Some(last) if last.article_id == e.article_id && last.minute == e.minute => {
                    last.clicks += e.clicks
                }
                _ => out.push(e),
            }
        }
        out.retain(|e| e.clicks > 0);
        Self { events: out }
    }

    /// Events grouped per article.
    pub fn by_article(&self) -> HashMap<&str, &[ClickEvent]> {
        let mut map = HashMap::new();
        let mut start = 0;
        while start < self.events.len() {
            let id = &self.events[start].article_id;
            let len = self.events[start..].partition_point(|e| &e.article_id == id);
            map.insert(id.as_str(), &self.events[start..start + len]);
            start += len;
        }
        map
    }

    pub fn total_clicks(&self) -> u64 {
        self.events.iter().map(|e| e.clicks).sum()
    }
}

/// Floors an instant to minutes since the Unix epoch.
pub fn epoch_minute(at: &DateTime<FixedOffset>) -> i64 {
    at.timestamp().div_euclid(60)
}

pub fn parse_clicks(path: impl AsRef<Path>) -> Result<ClickLog> {
    let path = path.as_ref();
    parse_clicks_reader(BufReader::new(open(path)?), path)
}

pub fn parse_clicks_reader<R: Read>(reader: R, origin: &Path) -> Result<ClickLog> {
    let mut rdr = csv_reader(reader);
    check_header(&mut rdr, origin, &[&["article_id"], &["timestamp", "timestamp_iso8601"], &["clicks"]])?;
    let mut events = Vec::new();
    let mut rec = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut rec) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                return Err(Error::parse(origin, line, e.to_string()));
            }
        }
        let line = record_line(&rec);
        let bad = |msg: String| Error::parse(origin, line, msg);
        if rec.len() != 3 {
            return Err(bad(format!("expected 3 fields, found {}", rec.len())));
        }
        let at = parse_instant(&rec[1]).map_err(bad)?;
        let clicks: u64 = rec[2]
            .parse()
            .map_err(|_| bad(format!("bad click count {:?}", &rec[2])))?;
        events.push(ClickEvent {
            article_id: rec[0].to_string(),
            minute: epoch_minute(&at),
            clicks,
        });
    }
    Ok(ClickLog::from_events(events))
}

/// Ticker to textual aliases, used to decide whether a company is really
/// mentioned by a multi-company article.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AliasTable {
    aliases: BTreeMap<String, Vec<String>>,
}

impl AliasTable {
    pub fn new(aliases: BTreeMap<String, Vec<String>>) -> Self {
        Self { aliases }
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut aliases = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (ticker, list) = line
                .split_once(',')
                .ok_or_else(|| Error::parse(origin, i as u64 + 1, "expected `ticker,alias1|alias2`"))?;
            let ticker = ticker.trim();
            if aliases.is_empty() && ticker.eq_ignore_ascii_case("ticker") {
                continue;
            }
            let names: Vec<String> = list
                .split('|')
                .map(str::trim)
                .filter(|a| !a.is_empty())
                .map(str::to_string)
                .collect();
            aliases.insert(ticker.to_string(), names);
        }
        Ok(Self { aliases })
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn aliases(&self, ticker: &str) -> &[String] {
        self.aliases.get(ticker).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("ticker,aliases\n");
        for (t, names) in &self.aliases {
            out.push_str(&format!("{t},{}\n", names.join("|")));
        }
        out
    }

    /// True when `ticker` appears as a whole word, or any alias appears as a
    /// substring, case-insensitively, in `text`.
    pub fn mentions(&self, ticker: &str, text: &str) -> bool {
        let lower = text.to_lowercase();
        if self
            .aliases(ticker)
            .iter()
            .any(|a| lower.contains(&a.to_lowercase()))
        {
            return true;
        }
        let t = ticker.to_lowercase();
        tokenize(text).contains(&t)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    TooManyTags(usize),
    NoMention,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TagOutcome {
    Kept(NewsArticle),
    Rejected(RejectReason),
}

/// Drops articles with more than `max_tags` companies; for multi-company
/// articles keeps only the companies named in the title or first paragraph.
pub fn filter_tags(article: &NewsArticle, aliases: &AliasTable, max_tags: usize) -> TagOutcome {
    let n = article.tickers.len();
    if n > max_tags {
        return TagOutcome::Rejected(RejectReason::TooManyTags(n));
    }
    if n == 0 {
        return TagOutcome::Rejected(RejectReason::NoMention);
    }
    if n == 1 {
        return TagOutcome::Kept(article.clone());
    }
    let mut text = article.title.clone();
    if let Some(p) = &article.first_paragraph {
        text.push('\n');
        text.push_str(p);
    }
    let kept: BTreeSet<String> = article
        .tickers
        .iter()
        .filter(|t| aliases.mentions(t, &text))
        .cloned()
        .collect();
    if kept.is_empty() {
        return TagOutcome::Rejected(RejectReason::NoMention);
    }
    TagOutcome::Kept(NewsArticle {
        tickers: kept,
        ..article.clone()
    })
}

/// Clicks attributable to one company on one grid minute.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClickMinute {
    pub article_id: String,
    pub day: usize,
    pub minute: u16,
    pub clicks: u64,
}

impl ClickMinute {
    pub fn point(&self) -> GridPoint {
        GridPoint {
            day: self.day,
            minute: self.minute,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CompanyClicks {
    pub company: String,
    /// Sorted by `(day, minute, article_id)`.
    pub entries: Vec<ClickMinute>,
    /// Click rows whose article id is not in the article set.
    pub unknown_rows: usize,
    /// Rows of the company's articles that fell outside the session.
    pub out_of_session_rows: usize,
}

impl CompanyClicks {
    /// Per-minute totals `c̄` over all the company's articles.
    pub fn minute_totals(&self) -> BTreeMap<GridPoint, u64> {
        let mut out = BTreeMap::new();
        for e in &self.entries {
            *out.entry(e.point()).or_insert(0) += e.clicks;
        }
        out
    }

    pub fn total(&self) -> u64 {
        self.entries.iter().map(|e| e.clicks).sum()
    }
}

/// Session-minute clicks on every article tagged with `company`, including
/// articles published on earlier days.
pub fn company_click_series(
    articles: &[NewsArticle],
    clicks: &ClickLog,
    company: &str,
    cal: &TradingCalendar,
) -> CompanyClicks {
    let index = clicks.by_article();
    let known: BTreeSet<&str> = articles.iter().map(|a| a.article_id.as_str()).collect();
    let own: Vec<&str> = articles
        .iter()
        .filter(|a| a.tickers.contains(company))
        .map(|a| a.article_id.as_str())
        .collect();
    let mut out = attribute_clicks(company, &own, &index, cal);
    out.unknown_rows = index
        .iter()
        .filter(|(id, _)| !known.contains(**id))
        .map(|(_, rows)| rows.len())
        .sum();
    out
}

/// Core of [`company_click_series`] over a prebuilt per-article index;
/// `unknown_rows` is left at zero.
pub fn attribute_clicks(
    company: &str,
    article_ids: &[&str],
    index: &HashMap<&str, &[ClickEvent]>,
    cal: &TradingCalendar,
) -> CompanyClicks {
    let mut out = CompanyClicks {
        company: company.to_string(),
        ..Default::default()
    };
    for id in article_ids {
        for e in index.get(id).copied().unwrap_or(&[]) {
            match cal.minute_index(&minute_instant(e.minute)) {
                Some(p) => out.entries.push(ClickMinute {
                    article_id: e.article_id.clone(),
                    day: p.day,
                    minute: p.minute,
                    clicks: e.clicks,
                }),
                None => out.out_of_session_rows += 1,
            }
        }
    }
    out.entries
        .sort_by(|a, b| (a.day, a.minute, &a.article_id).cmp(&(b.day, b.minute, &b.article_id)));
    out
}

/// The UTC instant at the start of an epoch minute.
pub fn minute_instant(minute: i64) -> DateTime<FixedOffset> {
    DateTime::from_timestamp(minute * 60, 0)
        .expect("epoch minute in range")
        .fixed_offset()
}
