//! Trading-time grid.
//!
//! Every market and click series lives on a grid of `(day, minute)` points:
//! `day` indexes the listed trading days and `minute` counts from the 9:30
//! open of the regular session, `0..390`. Instants are converted to exchange
//! local time (US/Eastern) before being placed on the grid; anything outside
//! the session, or on a day that is not listed, has no grid point.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, FixedOffset, NaiveDate, TimeZone, Timelike};
use chrono_tz::America::New_York;
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minute-of-day of the session open (9:30).
pub const SESSION_OPEN: u32 = 570;
/// Length of the regular session in minutes (9:30 to 16:00).
pub const SESSION_MINUTES: usize = 390;

/// Exchange time zone.
pub const EXCHANGE_TZ: Tz = New_York;

/// A coordinate on the trading grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GridPoint {
    pub day: usize,
    pub minute: u16,
}

impl GridPoint {
    /// Position in a day-major minute array of `n_days * 390` entries.
    pub fn flat(&self) -> usize {
        self.day * SESSION_MINUTES + self.minute as usize
    }
}

/// Ordered list of trading days with a fixed 390-minute session.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TradingCalendar {
    days: Vec<NaiveDate>,
}

impl TradingCalendar {
    pub fn new(days: Vec<NaiveDate>) -> Result<Self> {
        if let Some(w) = days.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(format!(
                "trading days must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(Self { days })
    }

    /// Parses the trading-day list format: one ISO-8601 date per line.
    /// Blank lines are skipped.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut days = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let day = NaiveDate::parse_from_str(line, "%Y-%m-%d")
                .map_err(|e| Error::parse(origin, i as u64 + 1, format!("bad date {line:?}: {e}")))?;
            days.push(day);
        }
        Self::new(days)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Serializes back to the trading-day list format.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.days.len() * 11);
        for d in &self.days {
            out.push_str(&d.format("%Y-%m-%d").to_string());
            out.push('\n');
        }
        out
    }

    pub fn days(&self) -> &[NaiveDate] {
        &self.days
    }

    pub fn n_days(&self) -> usize {
        self.days.len()
    }

    /// Total number of session minutes on the grid.
    pub fn n_minutes(&self) -> usize {
        self.days.len() * SESSION_MINUTES
    }

    pub fn day_index(&self, date: NaiveDate) -> Option<usize> {
        self.days.binary_search(&date).ok()
    }

    /// Places an instant on the grid. Seconds are floored to the minute.
    /// Returns `None` for instants outside the session or on unlisted days.
    pub fn minute_index<Z: TimeZone>(&self, instant: &DateTime<Z>) -> Option<GridPoint> {
        let local = instant.with_timezone(&EXCHANGE_TZ);
        let day = self.day_index(local.date_naive())?;
        let minute_of_day = local.hour() * 60 + local.minute();
        let t = minute_of_day.checked_sub(SESSION_OPEN)?;
        if (t as usize) < SESSION_MINUTES {
            Some(GridPoint {
                day,
                minute: t as u16,
            })
        } else {
            None
        }
    }

    /// Exchange-local instant at the start of grid minute `(day, minute)`.
    pub fn instant(&self, day: usize, minute: u16) -> DateTime<Tz> {
        let date = self.days[day];
        let m = SESSION_OPEN + minute as u32;
        let naive = date
            .and_hms_opt(m / 60, m % 60, 0)
            .expect("session minute is a valid time of day");
        // Session hours never fall in a DST gap or overlap.
        EXCHANGE_TZ
            .from_local_datetime(&naive)
            .single()
            .expect("session minute maps to a unique instant")
    }

    /// Same as [`instant`](Self::instant) but as a fixed-offset value, the
    /// form used in every output file.
    pub fn instant_fixed(&self, day: usize, minute: u16) -> DateTime<FixedOffset> {
        self.instant(day, minute).fixed_offset()
    }
}

/// Bin width of a series.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TimeScale {
    /// Intraday bins of the given number of minutes; always a divisor of 390.
    Minutes(u16),
    /// One bin per trading day.
    Daily,
}

impl TimeScale {
    pub const INTRADAY_WIDTHS: [u16; 5] = [1, 10, 30, 65, 130];

    /// The five intraday scales and the daily one.
    pub const ALL: [TimeScale; 6] = [
        TimeScale::Minutes(1),
        TimeScale::Minutes(10),
        TimeScale::Minutes(30),
        TimeScale::Minutes(65),
        TimeScale::Minutes(130),
        TimeScale::Daily,
    ];

    pub fn minutes(width: u16) -> Result<Self> {
        if Self::INTRADAY_WIDTHS.contains(&width) {
            Ok(TimeScale::Minutes(width))
        } else {
            Err(Error::InvalidArgument(format!(
                "unsupported bin width {width}; expected one of {:?}",
                Self::INTRADAY_WIDTHS
            )))
        }
    }

    pub fn is_daily(&self) -> bool {
        matches!(self, TimeScale::Daily)
    }

    /// Width in session minutes; a daily bin spans the whole session.
    pub fn width(&self) -> usize {
        match self {
            TimeScale::Minutes(w) => *w as usize,
            TimeScale::Daily => SESSION_MINUTES,
        }
    }

    pub fn bins_per_day(&self) -> usize {
        SESSION_MINUTES / self.width()
    }

    /// Short label used in file names and reports (`"65"`, `"daily"`).
    pub fn label(&self) -> String {
        match self {
            TimeScale::Minutes(w) => w.to_string(),
            TimeScale::Daily => "daily".to_string(),
        }
    }
}

impl fmt::Display for TimeScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for TimeScale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("daily") || s.eq_ignore_ascii_case("day") {
            return Ok(TimeScale::Daily);
        }
        let w: u16 = s
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad time scale {s:?}")))?;
        TimeScale::minutes(w)
    }
}

impl Serialize for TimeScale {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.label())
    }
}

impl<'de> Deserialize<'de> for TimeScale {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Intraday bin containing session minute `t`.
pub fn bin_of(t: u16, scale: TimeScale) -> Result<usize> {
    match scale {
        TimeScale::Daily => Err(Error::InvalidArgument(
            "daily scale has no intraday bins; use the day index".into(),
        )),
        TimeScale::Minutes(w) => {
            if (t as usize) >= SESSION_MINUTES {
                return Err(Error::InvalidArgument(format!("minute {t} outside session")));
            }
            Ok((t / w) as usize)
        }
    }
}

/// Global bin index of a grid point at the given scale.
pub fn global_bin(p: GridPoint, scale: TimeScale) -> usize {
    p.day * scale.bins_per_day() + p.minute as usize / scale.width()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cal() -> TradingCalendar {
        let days = ["2012-06-01", "2012-06-04", "2012-06-05"]
            .iter()
            .map(|d| NaiveDate::parse_from_str(d, "%Y-%m-%d").unwrap())
            .collect();
        TradingCalendar::new(days).unwrap()
    }

    fn ts(s: &str) -> DateTime<FixedOffset> {
        DateTime::parse_from_rfc3339(s).unwrap()
    }

    #[test]
    fn session_open_is_minute_zero() {
        let p = cal().minute_index(&ts("2012-06-04T09:30:00-04:00")).unwrap();
        assert_eq!(p, GridPoint { day: 1, minute: 0 });
    }

    #[test]
    fn utc_input_is_converted() {
        // 13:31 UTC is 09:31 EDT
        let p = cal().minute_index(&ts("2012-06-04T13:31:45Z")).unwrap();
        assert_eq!(p, GridPoint { day: 1, minute: 1 });
    }

    #[test]
    fn outside_session_is_absent() {
        let c = cal();
        assert_eq!(c.minute_index(&ts("2012-06-04T16:30:00-04:00")), None);
        assert_eq!(c.minute_index(&ts("2012-06-04T16:00:00-04:00")), None);
        assert_eq!(c.minute_index(&ts("2012-06-04T09:29:59-04:00")), None);
        assert_eq!(c.minute_index(&ts("2012-06-02T12:00:00-04:00")), None);
        let last = c.minute_index(&ts("2012-06-04T15:59:59-04:00")).unwrap();
        assert_eq!(last.minute, 389);
    }

    #[test]
    fn winter_offset() {
        let days = vec![NaiveDate::from_ymd_opt(2012, 12, 3).unwrap()];
        let c = TradingCalendar::new(days).unwrap();
        let p = c.minute_index(&ts("2012-12-03T14:30:00Z")).unwrap();
        assert_eq!(p.minute, 0);
        assert_eq!(c.instant_fixed(0, 0).to_rfc3339(), "2012-12-03T09:30:00-05:00");
    }

    #[test]
    fn rejects_unsorted_days() {
        let d = |s| NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap();
        assert!(TradingCalendar::new(vec![d("2012-06-04"), d("2012-06-04")]).is_err());
        assert!(TradingCalendar::new(vec![d("2012-06-05"), d("2012-06-04")]).is_err());
    }

    #[test]
    fn parse_reports_line() {
        let err = TradingCalendar::parse("2012-06-04\nnot-a-date\n", Path::new("days.txt")).unwrap_err();
        assert!(err.to_string().contains("days.txt:2"), "{err}");
    }

    #[test]
    fn text_round_trip() {
        let c = cal();
        assert_eq!(TradingCalendar::parse(&c.to_text(), Path::new("x")).unwrap(), c);
    }

    #[test]
    fn bin_examples() {
        let h = TimeScale::Minutes(65);
        assert_eq!(bin_of(64, h).unwrap(), 0);
        assert_eq!(bin_of(65, h).unwrap(), 1);
        assert_eq!(bin_of(389, TimeScale::Minutes(130)).unwrap(), 2);
        assert!(bin_of(10, TimeScale::Daily).is_err());
        assert!(bin_of(390, h).is_err());
    }

    #[test]
    fn bins_per_day() {
        assert_eq!(TimeScale::Minutes(65).bins_per_day(), 6);
        assert_eq!(TimeScale::Minutes(130).bins_per_day(), 3);
        assert_eq!(TimeScale::Minutes(1).bins_per_day(), 390);
        assert_eq!(TimeScale::Daily.bins_per_day(), 1);
        assert!(TimeScale::minutes(7).is_err());
    }

    #[test]
    fn bins_tile_each_day() {
        for scale in TimeScale::INTRADAY_WIDTHS.map(TimeScale::Minutes) {
            let mut counts = vec![0usize; scale.bins_per_day()];
            for t in 0..SESSION_MINUTES as u16 {
                counts[bin_of(t, scale).unwrap()] += 1;
            }
            assert!(counts.iter().all(|&c| c == scale.width()), "{scale}");
        }
    }

    #[test]
    fn every_session_minute_round_trips() {
        let c = cal();
        for day in 0..c.n_days() {
            for minute in 0..SESSION_MINUTES as u16 {
                let at = c.instant(day, minute);
                assert_eq!(c.minute_index(&at), Some(GridPoint { day, minute }));
            }
        }
    }

    #[test]
    fn scale_parse() {
        assert_eq!("65".parse::<TimeScale>().unwrap(), TimeScale::Minutes(65));
        assert_eq!("DAILY".parse::<TimeScale>().unwrap(), TimeScale::Daily);
        assert!("64".parse::<TimeScale>().is_err());
    }
}
